use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{fit_cart_tree_on, CartParams, TreeNode};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::exec::{derive_seed, Exec};
use crate::rules::Rule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Random forest: bootstrap resamples, random feature subsets per split.
    Rf,
    /// Gradient boosting on squared loss.
    Gb,
    /// Gradient boosting with per-tree row subsampling.
    Sgb,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Rf => "rf",
            Method::Gb => "gb",
            Method::Sgb => "sgb",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rf" => Ok(Method::Rf),
            "gb" => Ok(Method::Gb),
            "sgb" => Ok(Method::Sgb),
            other => Err(Error::InvalidConfig(format!("unknown generator `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub method: Method,
    /// Maximum number of leaves per tree.
    pub tree_size: usize,
    /// Cap on the number of distinct harvested rules.
    pub max_rules: usize,
    pub n_trees: usize,
    /// Shrinkage for GB/SGB.
    pub learning_rate: f64,
    /// Row subsampling rate for SGB.
    pub subsample: f64,
    /// Features searched per split for RF; `None` means `ceil(d / 3)`.
    pub mtry: Option<usize>,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            method: Method::Rf,
            tree_size: 8,
            max_rules: 4000,
            n_trees: 100,
            learning_rate: 0.1,
            subsample: 0.5,
            mtry: None,
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.tree_size < 2 {
            return bad(format!("tree_size must be >= 2, got {}", self.tree_size));
        }
        if self.max_rules < 1 {
            return bad("max_rules must be >= 1".into());
        }
        if self.n_trees < 1 {
            return bad("n_trees must be >= 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be > 0, got {}", self.learning_rate));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return bad(format!("subsample must be in (0, 1], got {}", self.subsample));
        }
        if self.mtry == Some(0) {
            return bad("mtry must be >= 1".into());
        }
        Ok(())
    }

    /// Features searched per split for a dataset with `d` features.
    pub fn effective_mtry(&self, d: usize) -> usize {
        match self.method {
            Method::Rf => self.mtry.unwrap_or(d.div_ceil(3)).clamp(1, d),
            Method::Gb | Method::Sgb => self.mtry.unwrap_or(d).clamp(1, d),
        }
    }
}

/// Grows the trees of the configured ensemble, in build order.
pub fn fit_ensemble(ds: &Dataset, cfg: &GeneratorConfig, exec: Exec) -> Result<Vec<TreeNode>> {
    cfg.validate()?;
    if ds.n_rows() < 2 {
        return Err(Error::InvalidDataset("need at least two rows to grow trees".into()));
    }
    let n = ds.n_rows();
    let params = CartParams {
        max_leaves: cfg.tree_size,
        mtry: Some(cfg.effective_mtry(ds.n_features())),
    };
    let trees = match cfg.method {
        Method::Rf => exec.map_range(cfg.n_trees, |t| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, t as u64));
            let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            fit_cart_tree_on(ds, ds.target(), &rows, params, &mut rng, Exec::Sequential)
        }),
        Method::Gb | Method::Sgb => {
            let init = ds.target().iter().sum::<f64>() / n as f64;
            let mut fitted = vec![init; n];
            let all_rows: Vec<usize> = (0..n).collect();
            let sub_n = ((cfg.subsample * n as f64).floor() as usize).clamp(2, n);
            let mut trees = Vec::with_capacity(cfg.n_trees);
            for t in 0..cfg.n_trees {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, t as u64));
                let residual: Vec<f64> = ds.target().iter().zip(&fitted).map(|(y, f)| y - f).collect();
                let rows = if cfg.method == Method::Sgb && sub_n < n {
                    let mut r = sample(&mut rng, n, sub_n).into_vec();
                    r.sort_unstable();
                    r
                } else {
                    all_rows.clone()
                };
                let tree = fit_cart_tree_on(ds, &residual, &rows, params, &mut rng, exec);
                for (i, f) in fitted.iter_mut().enumerate() {
                    *f += cfg.learning_rate * tree.predict(ds.row(i));
                }
                trees.push(tree);
            }
            trees
        }
    };
    Ok(trees)
}

/// Collects the distinct non-root node rules of `trees` (trees in order,
/// nodes breadth-first), stopping at `max_rules`. Rules holding no row of
/// `ds` are dropped.
pub fn harvest_rules(trees: &[TreeNode], max_rules: usize, ds: &Dataset) -> Vec<Rule> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    'trees: for tree in trees {
        for node in tree.nodes_bfs().into_iter().skip(1) {
            if out.len() >= max_rules {
                break 'trees;
            }
            if seen.insert(node.path_rule.clone()) {
                out.push(node.path_rule.clone());
            }
        }
    }
    out.retain(|r| ds.rows().any(|row| r.covers(row)));
    out
}

pub fn generate_rules(ds: &Dataset, cfg: &GeneratorConfig, exec: Exec) -> Result<Vec<Rule>> {
    let trees = fit_ensemble(ds, cfg, exec)?;
    Ok(harvest_rules(&trees, cfg.max_rules, ds))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::friedman_synthetic;

    #[test]
    fn two_leaf_tree_gives_two_rules() {
        let rows: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64]).collect();
        let y = (0..8).map(|i| if i < 4 { 0.0 } else { 1.0 }).collect();
        let ds = Dataset::from_rows(&rows, y).unwrap();
        let cfg = GeneratorConfig {
            method: Method::Gb,
            tree_size: 2,
            n_trees: 1,
            ..Default::default()
        };
        let rules = generate_rules(&ds, &cfg, Exec::Sequential).unwrap();
        assert_eq!(rules.len(), 2);
        assert!(rules.iter().all(|r| r.len() == 1));
    }

    #[test]
    fn rf_respects_rule_cap_and_is_deterministic() {
        let s = friedman_synthetic(400, 12, 3).unwrap();
        let cfg = GeneratorConfig {
            n_trees: 100,
            max_rules: 300,
            seed: 11,
            ..Default::default()
        };
        let a = generate_rules(&s.data, &cfg, Exec::Parallel).unwrap();
        let b = generate_rules(&s.data, &cfg, Exec::Sequential).unwrap();
        assert!(a.len() <= 300);
        assert_eq!(a, b);
        let set: BTreeSet<_> = a.iter().cloned().collect();
        assert_eq!(set.len(), a.len());
        assert!(a.iter().all(|r| !r.is_empty() && r.len() < cfg.tree_size));
        for r in &a {
            assert!(s.data.rows().any(|row| r.covers(row)));
        }
    }

    #[test]
    fn all_methods_produce_rules() {
        let s = friedman_synthetic(300, 9, 8).unwrap();
        for method in [Method::Rf, Method::Gb, Method::Sgb] {
            let cfg = GeneratorConfig {
                method,
                n_trees: 10,
                ..Default::default()
            };
            let rules = generate_rules(&s.data, &cfg, Exec::Parallel).unwrap();
            assert!(!rules.is_empty(), "{method}");
        }
    }

    #[test]
    fn boosting_training_error_is_non_increasing() {
        let s = friedman_synthetic(300, 9, 2).unwrap();
        for method in [Method::Gb, Method::Sgb] {
            let cfg = GeneratorConfig {
                method,
                n_trees: 30,
                ..Default::default()
            };
            let trees = fit_ensemble(&s.data, &cfg, Exec::Sequential).unwrap();
            let n = s.data.n_rows();
            let mut fitted = vec![s.data.target().iter().sum::<f64>() / n as f64; n];
            let mse = |f: &[f64]| {
                f.iter().zip(s.data.target()).map(|(a, y)| (a - y).powi(2)).sum::<f64>() / n as f64
            };
            let mut prev = mse(&fitted);
            for tree in &trees {
                for (i, f) in fitted.iter_mut().enumerate() {
                    *f += cfg.learning_rate * tree.predict(s.data.row(i));
                }
                let cur = mse(&fitted);
                if method == Method::Gb {
                    assert!(cur <= prev + 1e-12, "{cur} > {prev}");
                }
                prev = cur;
            }
        }
    }

    #[test]
    fn config_validation() {
        let bad = [
            GeneratorConfig { tree_size: 1, ..Default::default() },
            GeneratorConfig { max_rules: 0, ..Default::default() },
            GeneratorConfig { n_trees: 0, ..Default::default() },
            GeneratorConfig { learning_rate: 0.0, ..Default::default() },
            GeneratorConfig { subsample: 1.5, ..Default::default() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
        assert_eq!(GeneratorConfig::default().effective_mtry(100), 34);
    }
}
