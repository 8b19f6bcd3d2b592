//! JSON model files and the rule interchange format.
//!
//! Rules are written as `{feature, lo, hi}` conditions with `null` for an
//! unbounded side. Floats are written with shortest round-trip formatting,
//! so a reloaded model predicts bit-for-bit like the in-memory one.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, TargetStats};
use crate::error::{Error, Result};
use crate::estimator::{CellStat, CoveringEstimator, Fallback, Signature};
use crate::generators::GeneratorConfig;
use crate::pipeline::{FitOutcome, PipelineConfig, Sigma2Source};
use crate::rules::{Interval, Rule, RuleStats};
use crate::selection::{Covering, SelectedRule, StopCondition};
use crate::significance::RuleClass;

pub const FORMAT: &str = "covreg-model";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionJson {
    pub feature: String,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleJson {
    pub conditions: Vec<ConditionJson>,
    pub stats: RuleStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedRuleJson {
    pub conditions: Vec<ConditionJson>,
    pub stats: RuleStats,
    pub tag: RuleClass,
    pub acceptance_index: usize,
    pub coverage_at_acceptance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellJson {
    pub signature: String,
    pub mean: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub n: usize,
    pub d: usize,
    pub alpha: f64,
    pub gamma: f64,
    pub l_max: usize,
    pub beta_n: f64,
    pub epsilon_n: f64,
    pub sigma2_hat: f64,
    pub sigma2_source: Sigma2Source,
    pub seed: u64,
    pub generator: GeneratorConfig,
    pub stop: StopCondition,
    pub n_generated: usize,
    pub n_eligible: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub metadata: ModelMetadata,
    pub feature_names: Vec<String>,
    pub target_name: String,
    pub target_stats: TargetStats,
    pub fallback: Fallback,
    pub union_coverage: f64,
    pub rules: Vec<SelectedRuleJson>,
    pub cell_table: Vec<CellJson>,
}

fn bound(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

pub fn rule_to_conditions(rule: &Rule, names: &[String]) -> Vec<ConditionJson> {
    rule.conditions()
        .map(|(j, iv)| ConditionJson {
            feature: names.get(j).cloned().unwrap_or_else(|| format!("#{j}")),
            lo: bound(iv.lo()),
            hi: bound(iv.hi()),
        })
        .collect()
}

pub fn rule_from_conditions(conds: &[ConditionJson], names: &[String]) -> Result<Rule> {
    let mut out = Vec::with_capacity(conds.len());
    for c in conds {
        let j = names
            .iter()
            .position(|n| *n == c.feature)
            .ok_or_else(|| Error::UnknownFeature(c.feature.clone()))?;
        let iv = Interval::new(c.lo.unwrap_or(f64::NEG_INFINITY), c.hi.unwrap_or(f64::INFINITY))?;
        out.push((j, iv));
    }
    Rule::from_conditions(out)
}

/// Harvested or filtered rules in the interchange format.
pub fn export_rules<'a, I>(rules: I, names: &[String]) -> Vec<RuleJson>
where
    I: IntoIterator<Item = (&'a Rule, RuleStats)>,
{
    rules
        .into_iter()
        .map(|(r, stats)| RuleJson {
            conditions: rule_to_conditions(r, names),
            stats,
        })
        .collect()
}

impl ModelFile {
    pub fn from_fit(outcome: &FitOutcome, cfg: &PipelineConfig, train: &Dataset) -> ModelFile {
        let est = &outcome.estimator;
        let names = train.feature_names().to_vec();
        let rules = est
            .covering
            .rules
            .iter()
            .map(|s| SelectedRuleJson {
                conditions: rule_to_conditions(&s.rule, &names),
                stats: s.stats,
                tag: s.tag,
                acceptance_index: s.acceptance_index,
                coverage_at_acceptance: s.coverage_at_acceptance,
            })
            .collect();
        let cell_table = est
            .sorted_cells()
            .into_iter()
            .map(|(sig, c)| CellJson {
                signature: sig.to_string(),
                mean: c.mean,
                count: c.count,
            })
            .collect();
        let sig = &outcome.significance;
        ModelFile {
            format: FORMAT.to_string(),
            version: VERSION,
            metadata: ModelMetadata {
                n: train.n_rows(),
                d: train.n_features(),
                alpha: sig.alpha,
                gamma: cfg.gamma,
                l_max: sig.l_max,
                beta_n: sig.beta_n,
                epsilon_n: sig.epsilon_n,
                sigma2_hat: sig.sigma2_hat,
                sigma2_source: outcome.sigma2_source,
                seed: cfg.generator.seed,
                generator: cfg.generator.clone(),
                stop: cfg.stop,
                n_generated: outcome.n_generated,
                n_eligible: outcome.n_eligible,
            },
            feature_names: names,
            target_name: train.target_name().to_string(),
            target_stats: est.target_stats,
            fallback: est.fallback,
            union_coverage: est.covering.union_coverage,
            rules,
            cell_table,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> Result<ModelFile> {
        let m: ModelFile = serde_json::from_str(s)?;
        if m.format != FORMAT || m.version != VERSION {
            return Err(Error::InvalidConfig(format!(
                "not a {FORMAT} v{VERSION} file (found {} v{})",
                m.format, m.version
            )));
        }
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<ModelFile> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ModelFile::from_json(&s)
    }

    pub fn covering(&self) -> Result<Covering> {
        let rules = self
            .rules
            .iter()
            .map(|r| {
                Ok(SelectedRule {
                    rule: rule_from_conditions(&r.conditions, &self.feature_names)?,
                    stats: r.stats,
                    tag: r.tag,
                    acceptance_index: r.acceptance_index,
                    coverage_at_acceptance: r.coverage_at_acceptance,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Covering {
            rules,
            union_coverage: self.union_coverage,
        })
    }

    pub fn to_estimator(&self) -> Result<CoveringEstimator> {
        let covering = self.covering()?;
        let mut cells = HashMap::with_capacity(self.cell_table.len());
        for c in &self.cell_table {
            let sig: Signature = c.signature.parse()?;
            if sig.len() != covering.len() {
                return Err(Error::InvalidSignature(c.signature.clone()));
            }
            cells.insert(
                sig,
                CellStat {
                    mean: c.mean,
                    count: c.count,
                },
            );
        }
        Ok(CoveringEstimator {
            covering,
            cells,
            target_stats: self.target_stats,
            fallback: self.fallback,
            n_features: self.feature_names.len(),
        })
    }

    /// Column names must equal the training feature names, in order.
    pub fn check_schema(&self, names: &[String]) -> Result<()> {
        if names.len() != self.feature_names.len() && names.iter().all(|n| self.feature_names.contains(n)) {
            return Err(Error::DimensionMismatch {
                expected: self.feature_names.len(),
                found: names.len(),
            });
        }
        if names != self.feature_names.as_slice() {
            return Err(Error::SchemaMismatch {
                expected: self.feature_names.clone(),
                found: names.to_vec(),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::friedman_synthetic;
    use crate::exec::Exec;
    use crate::pipeline::fit_pipeline;

    fn small_fit() -> (Dataset, PipelineConfig, FitOutcome) {
        let s = friedman_synthetic(400, 10, 3).unwrap();
        let cfg = PipelineConfig {
            generator: GeneratorConfig {
                n_trees: 30,
                seed: 3,
                ..Default::default()
            },
            ..Default::default()
        };
        let out = fit_pipeline(&s.data, &cfg, Exec::Parallel).unwrap();
        (s.data, cfg, out)
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let (ds, cfg, out) = small_fit();
        let m = ModelFile::from_fit(&out, &cfg, &ds);
        let text = m.to_json().unwrap();
        let back = ModelFile::from_json(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_json().unwrap(), text);
        let est = back.to_estimator().unwrap();
        assert_eq!(est, out.estimator);
        let probe = friedman_synthetic(500, 10, 99).unwrap().data;
        let a = out.estimator.predict_dataset(&probe, Exec::Sequential).unwrap();
        let b = est.predict_dataset(&probe, Exec::Sequential).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn unbounded_sides_are_null() {
        let names = vec!["a".to_string(), "b".to_string()];
        let r = Rule::from_conditions([(0, Interval::at_most(0.5)), (1, Interval::greater_than(2.0))]).unwrap();
        let conds = rule_to_conditions(&r, &names);
        let json = serde_json::to_string(&conds).unwrap();
        assert_eq!(
            json,
            r#"[{"feature":"a","lo":null,"hi":0.5},{"feature":"b","lo":2.0000000000000004,"hi":null}]"#
        );
        assert_eq!(rule_from_conditions(&conds, &names).unwrap(), r);
    }

    #[test]
    fn schema_checks() {
        let (ds, cfg, out) = small_fit();
        let m = ModelFile::from_fit(&out, &cfg, &ds);
        let mut names = m.feature_names.clone();
        assert!(m.check_schema(&names).is_ok());
        names.swap(0, 1);
        assert!(matches!(m.check_schema(&names), Err(Error::SchemaMismatch { .. })));
        names.pop();
        assert!(matches!(m.check_schema(&names), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn rejects_foreign_json() {
        assert!(ModelFile::from_json("{}").is_err());
        let (ds, cfg, out) = small_fit();
        let mut m = ModelFile::from_fit(&out, &cfg, &ds);
        m.cell_table[0].signature.push('1');
        assert!(matches!(m.to_estimator(), Err(Error::InvalidSignature(_))));
    }
}
