//! The full fitting procedure: generate, filter, classify, select, fit.

use serde::{Deserialize, Serialize};

use crate::dataset::{target_stats, Dataset};
use crate::error::{Error, Result};
use crate::estimator::{CoveringEstimator, Fallback};
use crate::exec::Exec;
use crate::generators::{generate_rules, GeneratorConfig};
use crate::rules::score_rules;
use crate::selection::{select_covering, SelectionConfig, StopCondition};
use crate::significance::{
    classify_rules, coverage_filter, estimate_noise_variance, SignificanceConfig, SignificanceReport,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub generator: GeneratorConfig,
    pub alpha: f64,
    pub gamma: f64,
    pub l_max: usize,
    /// Known noise variance; estimated from the rules when absent.
    pub sigma2: Option<f64>,
    /// Overrides `epsilon_n = beta_n * s_n`.
    pub epsilon: Option<f64>,
    pub fallback: Fallback,
    pub stop: StopCondition,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            generator: GeneratorConfig::default(),
            alpha: 0.5 - 0.01,
            gamma: 0.90,
            l_max: 3,
            sigma2: None,
            epsilon: None,
            fallback: Fallback::Zero,
            stop: StopCondition::Union,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sigma2Source {
    Estimated,
    Supplied,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Generate,
    Filter,
    Variance,
    Select,
    Estimate,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Generate => "rule generation",
            Stage::Filter => "coverage filter",
            Stage::Variance => "noise variance estimation",
            Stage::Select => "covering selection",
            Stage::Estimate => "estimator fit",
        }
    }
}

trait AtStage<T> {
    fn at(self, stage: Stage) -> Result<T>;
}

impl<T> AtStage<T> for Result<T> {
    fn at(self, stage: Stage) -> Result<T> {
        self.map_err(|e| Error::Stage {
            stage: stage.name(),
            source: Box::new(e),
        })
    }
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub estimator: CoveringEstimator,
    pub significance: SignificanceConfig,
    pub sigma2_source: Sigma2Source,
    pub report: SignificanceReport,
    pub n_generated: usize,
    pub n_eligible: usize,
}

pub fn fit_pipeline(ds: &Dataset, cfg: &PipelineConfig, exec: Exec) -> Result<FitOutcome> {
    let selection = SelectionConfig {
        gamma: cfg.gamma,
        stop: cfg.stop,
    };
    selection.validate()?;
    if cfg.l_max < 1 {
        return Err(Error::InvalidConfig("l_max must be >= 1".into()));
    }
    let rules = generate_rules(ds, &cfg.generator, exec).at(Stage::Generate)?;
    let n_generated = rules.len();
    let scored = score_rules(rules, ds, exec);
    let (kept, pre_discarded) = coverage_filter(scored, ds.n_rows(), cfg.alpha, cfg.l_max).at(Stage::Filter)?;
    let n_eligible = kept.len();
    let (sigma2_hat, sigma2_source) = match cfg.sigma2 {
        Some(s) => (s, Sigma2Source::Supplied),
        None => (estimate_noise_variance(&kept).at(Stage::Variance)?, Sigma2Source::Estimated),
    };
    let stats = target_stats(ds);
    let mut significance = SignificanceConfig::derive(cfg.alpha, cfg.l_max, ds.n_rows(), stats.std, sigma2_hat)?;
    if let Some(eps) = cfg.epsilon {
        significance = significance.with_epsilon(eps);
    }
    let classified = classify_rules(kept, ds, &significance);
    let report = SignificanceReport::new(&classified, &pre_discarded, &significance, ds.n_rows(), ds.feature_names());
    let covering = select_covering(&classified, ds, &selection).at(Stage::Select)?;
    let estimator = CoveringEstimator::fit(covering, ds, cfg.fallback, exec).at(Stage::Estimate)?;
    Ok(FitOutcome {
        estimator,
        significance,
        sigma2_source,
        report,
        n_generated,
        n_eligible,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::friedman_synthetic;
    use crate::rules::Rule;

    #[test]
    fn defaults_match_reference_settings() {
        let c = PipelineConfig::default();
        assert_eq!(c.generator.max_rules, 4000);
        assert_eq!(c.generator.tree_size, 8);
        assert_eq!(c.alpha, 0.49);
        assert_eq!(c.gamma, 0.90);
        assert_eq!(c.l_max, 3);
    }

    #[test]
    fn fits_step_function() {
        let rows: Vec<Vec<f64>> = (0..200).map(|i| vec![(i % 20) as f64 / 20.0, (i / 20) as f64 / 10.0]).collect();
        let y: Vec<f64> = rows.iter().map(|r| if r[0] > 0.5 { 5.0 } else { 1.0 }).collect();
        let ds = Dataset::from_rows(&rows, y).unwrap();
        let cfg = PipelineConfig {
            sigma2: Some(0.0),
            generator: GeneratorConfig {
                n_trees: 20,
                ..Default::default()
            },
            ..Default::default()
        };
        let out = fit_pipeline(&ds, &cfg, Exec::Parallel).unwrap();
        let cov = &out.estimator.covering;
        assert!(cov.n_significant() >= 1);
        assert!(cov.interpretability() >= 1);
        assert_eq!(cov.union_coverage, 1.0);
        // Zero-variance rules with a mean away from the global mean are significant.
        for d in &out.report.rules {
            if d.var == Some(0.0) && d.mean.is_some_and(|m| m != 3.2) && d.reason.is_none() {
                assert_eq!(d.class, "S");
            }
        }
        assert_eq!(out.estimator.predict(&[0.9, 0.3]).unwrap(), 5.0);
        assert_eq!(out.estimator.predict(&[0.1, 0.3]).unwrap(), 1.0);
    }

    #[test]
    fn stage_is_named_in_errors() {
        let s = friedman_synthetic(50, 8, 0).unwrap();
        let cfg = PipelineConfig {
            alpha: 0.01,
            ..Default::default()
        };
        let err = fit_pipeline(&s.data, &cfg, Exec::Sequential).unwrap_err();
        assert!(err.to_string().contains("noise variance estimation"), "{err}");
        let _ = Rule::all_space();
    }
}
