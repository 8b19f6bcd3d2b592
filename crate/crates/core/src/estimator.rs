//! Piecewise-constant predictor on the partition induced by a covering.
//!
//! A point's cell is identified by its activation signature: one bit per
//! covering rule, set when the point satisfies the rule. Cells are never
//! built geometrically; the fitted table maps each signature seen in
//! training to the mean target of its rows.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use bitvec::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, TargetStats};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::selection::Covering;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Signature(BitVec<u64, Lsb0>);

impl Signature {
    pub fn from_bits<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        Signature(bits.into_iter().collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, j: usize) -> bool {
        self.0[j]
    }

    pub fn count_active(&self) -> usize {
        self.0.count_ones()
    }

    /// True when the point lies outside every rule.
    pub fn is_uncovered(&self) -> bool {
        self.0.not_any()
    }

    pub fn bits(&self) -> impl Iterator<Item = bool> + '_ {
        self.0.iter().by_vals()
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.0.iter() {
            f.write_str(if *b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for Signature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(Error::InvalidSignature(s.to_string())),
            })
            .collect::<Result<BitVec<u64, Lsb0>>>()
            .map(Signature)
    }
}

pub fn activation_signature(cov: &Covering, x: &[f64]) -> Result<Signature> {
    for s in &cov.rules {
        s.rule.check_dim(x.len())?;
    }
    Ok(signature_unchecked(cov, x))
}

fn signature_unchecked(cov: &Covering, x: &[f64]) -> Signature {
    Signature::from_bits(cov.rules.iter().map(|s| s.rule.covers(x)))
}

/// Value returned for points whose cell holds no training row.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fallback {
    #[default]
    Zero,
    Mean,
}

impl FromStr for Fallback {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(Fallback::Zero),
            "mean" => Ok(Fallback::Mean),
            other => Err(Error::InvalidConfig(format!("unknown fallback `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellStat {
    pub mean: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoveringEstimator {
    pub covering: Covering,
    pub cells: HashMap<Signature, CellStat>,
    pub target_stats: TargetStats,
    pub fallback: Fallback,
    pub n_features: usize,
}

impl CoveringEstimator {
    /// Groups training rows by signature and stores each group's mean.
    /// Rows outside every rule are not stored; they fall back at predict time.
    pub fn fit(covering: Covering, ds: &Dataset, fallback: Fallback, exec: Exec) -> Result<Self> {
        if covering.is_empty() {
            return Err(Error::NothingToSelect);
        }
        for s in &covering.rules {
            s.rule.check_dim(ds.n_features())?;
        }
        let signatures = exec.map_range(ds.n_rows(), |i| signature_unchecked(&covering, ds.row(i)));
        let mut sums: HashMap<Signature, (f64, usize)> = HashMap::new();
        for (sig, &y) in signatures.into_iter().zip(ds.target()) {
            if sig.is_uncovered() {
                continue;
            }
            let e = sums.entry(sig).or_insert((0.0, 0));
            e.0 += y;
            e.1 += 1;
        }
        let cells = sums
            .into_iter()
            .map(|(sig, (sum, count))| {
                (
                    sig,
                    CellStat {
                        mean: sum / count as f64,
                        count,
                    },
                )
            })
            .collect();
        Ok(CoveringEstimator {
            covering,
            cells,
            target_stats: crate::dataset::target_stats(ds),
            fallback,
            n_features: ds.n_features(),
        })
    }

    pub fn fallback_value(&self) -> f64 {
        match self.fallback {
            Fallback::Zero => 0.0,
            Fallback::Mean => self.target_stats.mean,
        }
    }

    pub fn signature(&self, x: &[f64]) -> Result<Signature> {
        self.check_dim(x.len())?;
        Ok(signature_unchecked(&self.covering, x))
    }

    fn check_dim(&self, found: usize) -> Result<()> {
        if found != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                found,
            });
        }
        Ok(())
    }

    /// Cell for a point, `None` when the cell held no training row.
    pub fn cell(&self, x: &[f64]) -> Result<Option<&CellStat>> {
        Ok(self.cells.get(&self.signature(x)?))
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        Ok(self.predict_signature(&self.signature(x)?))
    }

    pub fn predict_signature(&self, sig: &Signature) -> f64 {
        self.cells.get(sig).map_or_else(|| self.fallback_value(), |c| c.mean)
    }

    pub fn predict_dataset(&self, ds: &Dataset, exec: Exec) -> Result<Vec<f64>> {
        self.check_dim(ds.n_features())?;
        Ok(exec.map_range(ds.n_rows(), |i| {
            self.predict_signature(&signature_unchecked(&self.covering, ds.row(i)))
        }))
    }

    /// Cells sorted by signature string, for stable output.
    pub fn sorted_cells(&self) -> Vec<(&Signature, &CellStat)> {
        let mut v: Vec<_> = self.cells.iter().collect();
        v.sort_by_key(|a| a.0.to_string());
        v
    }
}

/// Mean squared training error.
pub fn empirical_risk(predictions: &[f64], target: &[f64]) -> f64 {
    predictions
        .iter()
        .zip(target)
        .map(|(p, y)| (y - p) * (y - p))
        .sum::<f64>()
        / target.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rules::{Interval, Rule};
    use crate::significance::RuleClass;
    use proptest::prelude::*;

    fn iv(lo: f64, hi: f64) -> Interval {
        Interval::new(lo, hi).unwrap()
    }

    fn covering(rules: Vec<Rule>, ds: &Dataset) -> Covering {
        Covering::from_tagged(rules.into_iter().map(|r| (r, RuleClass::Significant)).collect(), ds)
    }

    fn line(n: usize, y: impl Fn(usize) -> f64) -> Dataset {
        let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64, 0.0]).collect();
        Dataset::from_rows(&rows, (0..n).map(y).collect()).unwrap()
    }

    #[test]
    fn signature_examples() {
        let ds = line(3, |i| i as f64);
        let r1 = Rule::from_conditions([(0, iv(0.0, 0.2))]).unwrap();
        let r2 = Rule::from_conditions([(1, iv(0.5, 1.0))]).unwrap();
        let r3 = Rule::from_conditions([(0, iv(0.3, 1.0))]).unwrap();
        let cov = covering(vec![r1, r2, r3], &ds);
        let sig = activation_signature(&cov, &[0.1, 0.7]).unwrap();
        assert_eq!(sig.to_string(), "110");
        assert!(activation_signature(&cov, &[5.0, 5.0]).unwrap().is_uncovered());
        let all = covering(vec![Rule::all_space()], &ds);
        assert_eq!(activation_signature(&all, &[9.0, -9.0]).unwrap().to_string(), "1");
        assert!(activation_signature(&cov, &[0.1]).is_err());
        assert_eq!("110".parse::<Signature>().unwrap(), sig);
        assert!("1x0".parse::<Signature>().is_err());
    }

    #[test]
    fn all_space_gives_constant_prediction() {
        let ds = line(4, |i| i as f64);
        let est = CoveringEstimator::fit(covering(vec![Rule::all_space()], &ds), &ds, Fallback::Zero, Exec::Sequential)
            .unwrap();
        assert_eq!(est.cells.len(), 1);
        assert_eq!(est.predict(&[100.0, 3.0]).unwrap(), 1.5);
    }

    #[test]
    fn disjoint_rules_give_group_means() {
        let ds = line(6, |i| if i < 3 { 1.0 } else { 4.0 });
        let a = Rule::from_conditions([(0, iv(0.0, 2.0))]).unwrap();
        let b = Rule::from_conditions([(0, iv(3.0, 5.0))]).unwrap();
        let est = CoveringEstimator::fit(covering(vec![a, b], &ds), &ds, Fallback::Zero, Exec::Parallel).unwrap();
        assert_eq!(est.cells.len(), 2);
        assert_eq!(est.predict(&[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(est.predict(&[4.0, 0.0]).unwrap(), 4.0);
        // Outside both rules.
        assert_eq!(est.predict(&[10.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn unpopulated_cell_uses_convention() {
        let ds = line(6, |i| i as f64 + 1.0);
        // Overlap region [2.5, 2.7] holds no training row.
        let a = Rule::from_conditions([(0, iv(0.0, 2.7))]).unwrap();
        let b = Rule::from_conditions([(0, iv(2.5, 5.0))]).unwrap();
        let cov = covering(vec![a, b], &ds);
        let zero = CoveringEstimator::fit(cov.clone(), &ds, Fallback::Zero, Exec::Sequential).unwrap();
        assert_eq!(zero.predict(&[2.6, 0.0]).unwrap(), 0.0);
        let mean = CoveringEstimator::fit(cov, &ds, Fallback::Mean, Exec::Sequential).unwrap();
        assert_eq!(mean.predict(&[2.6, 0.0]).unwrap(), 3.5);
        assert_eq!(mean.predict(&[1.0, 0.0]).unwrap(), 2.0);
    }

    #[test]
    fn dimension_mismatch() {
        let ds = line(4, |i| i as f64);
        let est = CoveringEstimator::fit(covering(vec![Rule::all_space()], &ds), &ds, Fallback::Zero, Exec::Sequential)
            .unwrap();
        assert!(matches!(est.predict(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    fn arb_rule(d: usize) -> impl Strategy<Value = Rule> {
        proptest::collection::vec((0..d, 0i32..=10, 0i32..=10), 1..3).prop_map(|c| {
            c.into_iter().fold(Rule::all_space(), |r, (f, a, b)| {
                let (lo, hi) = (a.min(b), a.max(b));
                r.restrict(f, iv(f64::from(lo) / 10.0, f64::from(hi) / 10.0)).unwrap_or(r)
            })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn in_sample_predictions_are_cell_means(
            rules in proptest::collection::vec(arb_rule(2), 1..5),
            seed in 0u64..1000,
        ) {
            let s = crate::dataset::friedman_synthetic(80, 8, seed).unwrap();
            let ds = s.data;
            let cov = covering(rules, &ds);
            let est = CoveringEstimator::fit(cov.clone(), &ds, Fallback::Zero, Exec::Sequential).unwrap();
            let preds = est.predict_dataset(&ds, Exec::Parallel).unwrap();
            let sigs: Vec<Signature> = ds.rows().map(|r| est.signature(r).unwrap()).collect();
            for i in 0..ds.n_rows() {
                if sigs[i].is_uncovered() {
                    prop_assert_eq!(preds[i], 0.0);
                    continue;
                }
                let (mut sum, mut cnt) = (0.0, 0usize);
                for j in 0..ds.n_rows() {
                    if sigs[j] == sigs[i] {
                        sum += ds.target()[j];
                        cnt += 1;
                    }
                }
                prop_assert!((preds[i] - sum / cnt as f64).abs() <= 1e-12 * (1.0 + preds[i].abs()));
                for j in 0..ds.n_rows() {
                    if sigs[j] == sigs[i] {
                        prop_assert_eq!(preds[i], preds[j]);
                    }
                }
            }

            // Reversing rule order (and so the bits) changes no prediction.
            let reversed: Vec<(Rule, RuleClass)> =
                cov.rules.iter().rev().map(|s| (s.rule.clone(), s.tag)).collect();
            let rev = CoveringEstimator::fit(Covering::from_tagged(reversed, &ds), &ds, Fallback::Zero, Exec::Sequential).unwrap();
            let probe = crate::dataset::friedman_synthetic(40, 8, seed + 1).unwrap();
            prop_assert_eq!(
                est.predict_dataset(&probe.data, Exec::Sequential).unwrap(),
                rev.predict_dataset(&probe.data, Exec::Sequential).unwrap()
            );
        }
    }
}
