//! Finite-sample checks of the suitability conditions on a fitted covering.
//!
//! The asymptotic conditions (vanishing uncovered mass, redundancy ratios of
//! smaller order than a bound) are checked literally at the observed `n`:
//! uncovered mass against a fixed tolerance and redundancy against the bound
//! itself, except that a collection with `M = m` always passes. All
//! statistics are recomputed from the supplied data.

use serde::{Deserialize, Serialize};

use crate::dataset::{target_stats, Dataset};
use crate::error::Result;
use crate::rules::{rule_stats, Rule};
use crate::selection::{redundancy_stats, Covering};
use crate::significance::{coverage_threshold, RuleClass, SignificanceConfig};

/// Default ceiling on the uncovered share of the training sample.
pub const DEFAULT_UNCOVERED_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageCheck {
    pub threshold: f64,
    pub min_coverage: f64,
    /// Rules (by covering position) at or below the threshold.
    pub violations: Vec<usize>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnionCheck {
    pub uncovered: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipCheck {
    /// Rules whose tag disagrees with the recomputed classification.
    pub mismatches: Vec<usize>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RedundancyCheck {
    pub n_rules: usize,
    pub max_redundancy: Option<usize>,
    pub min_redundancy: Option<usize>,
    pub ratio: Option<f64>,
    pub bound: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CardinalityCheck {
    pub n_rules: usize,
    pub bound: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuitabilityReport {
    pub n: usize,
    pub alpha: f64,
    pub gamma: f64,
    pub set_coverage: CoverageCheck,
    pub collection_coverage: UnionCheck,
    pub significance: MembershipCheck,
    pub redundancy_significant: RedundancyCheck,
    pub redundancy_insignificant: RedundancyCheck,
    pub cardinality: CardinalityCheck,
    pub passed: bool,
}

fn redundancy(rules: &[&Rule], ds: &Dataset, bound: f64) -> Result<RedundancyCheck> {
    if rules.is_empty() {
        return Ok(RedundancyCheck {
            n_rules: 0,
            max_redundancy: None,
            min_redundancy: None,
            ratio: None,
            bound,
            passed: true,
        });
    }
    let (max, min) = match redundancy_stats(rules, ds) {
        Ok(mm) => mm,
        // Rules holding no row of `ds`: nothing to measure, and H1 fails anyway.
        Err(crate::Error::EmptyUnion) => {
            return Ok(RedundancyCheck {
                n_rules: rules.len(),
                max_redundancy: None,
                min_redundancy: None,
                ratio: None,
                bound,
                passed: false,
            })
        }
        Err(e) => return Err(e),
    };
    let ratio = max as f64 / min as f64;
    // Disjoint rules satisfy the condition whatever the bound.
    Ok(RedundancyCheck {
        n_rules: rules.len(),
        max_redundancy: Some(max),
        min_redundancy: Some(min),
        ratio: Some(ratio),
        bound,
        passed: max == min || ratio <= bound,
    })
}

pub fn check_suitability(
    cov: &Covering,
    ds: &Dataset,
    sig: &SignificanceConfig,
    gamma: f64,
    uncovered_tolerance: f64,
) -> Result<SuitabilityReport> {
    let n = ds.n_rows();
    let nf = n as f64;
    let alpha = sig.alpha;
    let global_mean = target_stats(ds).mean;
    let stats: Vec<_> = cov.rule_list().map(|r| rule_stats(r, ds)).collect();

    let threshold = coverage_threshold(n, alpha);
    let violations: Vec<usize> = stats
        .iter()
        .enumerate()
        .filter(|(_, s)| s.coverage <= threshold)
        .map(|(i, _)| i)
        .collect();
    let set_coverage = CoverageCheck {
        threshold,
        min_coverage: stats.iter().map(|s| s.coverage).fold(f64::INFINITY, f64::min),
        passed: violations.is_empty(),
        violations,
    };

    let mut union = crate::rules::RowMask::repeat(false, n);
    for r in cov.rule_list() {
        union |= &r.activation_mask(ds);
    }
    let uncovered = 1.0 - union.count_ones() as f64 / nf;
    let collection_coverage = UnionCheck {
        uncovered,
        tolerance: uncovered_tolerance,
        passed: uncovered <= uncovered_tolerance,
    };

    let mismatches: Vec<usize> = cov
        .rules
        .iter()
        .zip(&stats)
        .enumerate()
        .filter(|(_, (sel, st))| {
            let got = match (st.cond_mean, st.cond_var) {
                (Some(m), Some(v)) => sig.classify(m, v, global_mean),
                _ => None,
            };
            got != Some(sel.tag)
        })
        .map(|(i, _)| i)
        .collect();
    let significance = MembershipCheck {
        passed: mismatches.is_empty(),
        mismatches,
    };

    let of_class = |c: RuleClass| -> Vec<&Rule> { cov.rules.iter().filter(|s| s.tag == c).map(|s| &s.rule).collect() };
    let tail = nf.powf(0.5 - alpha);
    let redundancy_significant = redundancy(&of_class(RuleClass::Significant), ds, sig.beta_n.powi(-2).min(tail))?;
    let redundancy_insignificant =
        redundancy(&of_class(RuleClass::Insignificant), ds, sig.epsilon_n.powi(-2).min(tail))?;

    let card_bound = nf.powf(alpha) / (1.0 - gamma);
    let cardinality = CardinalityCheck {
        n_rules: cov.len(),
        bound: card_bound,
        passed: cov.len() as f64 <= card_bound,
    };

    let passed = set_coverage.passed
        && collection_coverage.passed
        && significance.passed
        && redundancy_significant.passed
        && redundancy_insignificant.passed
        && cardinality.passed;
    Ok(SuitabilityReport {
        n,
        alpha,
        gamma,
        set_coverage,
        collection_coverage,
        significance,
        redundancy_significant,
        redundancy_insignificant,
        cardinality,
        passed,
    })
}

impl SuitabilityReport {
    pub fn to_text(&self) -> String {
        let mark = |p: bool| if p { "pass" } else { "FAIL" };
        let ratio = |r: &RedundancyCheck| match r.ratio {
            Some(v) => format!(
                "M={} m={} M/m={v:.4} bound={:.4}",
                r.max_redundancy.unwrap_or(0),
                r.min_redundancy.unwrap_or(0),
                r.bound
            ),
            None => format!("{} rules, nothing to measure", r.n_rules),
        };
        let mut out = String::new();
        out += &format!("n = {}, alpha = {}, gamma = {}\n", self.n, self.alpha, self.gamma);
        out += &format!(
            "H1 set coverage         {}  min coverage {:.6} vs threshold {:.6}; violations {:?}\n",
            mark(self.set_coverage.passed),
            self.set_coverage.min_coverage,
            self.set_coverage.threshold,
            self.set_coverage.violations
        );
        out += &format!(
            "H2 collection coverage  {}  uncovered {:.6} vs tolerance {}\n",
            mark(self.collection_coverage.passed),
            self.collection_coverage.uncovered,
            self.collection_coverage.tolerance
        );
        out += &format!(
            "H3 significance         {}  tag mismatches {:?}\n",
            mark(self.significance.passed),
            self.significance.mismatches
        );
        out += &format!(
            "H4 redundancy (S)       {}  {}\n",
            mark(self.redundancy_significant.passed),
            ratio(&self.redundancy_significant)
        );
        out += &format!(
            "H4 redundancy (I)       {}  {}\n",
            mark(self.redundancy_insignificant.passed),
            ratio(&self.redundancy_insignificant)
        );
        out += &format!(
            "cardinality             {}  {} rules vs bound {:.4}\n",
            mark(self.cardinality.passed),
            self.cardinality.n_rules,
            self.cardinality.bound
        );
        out += &format!("overall                 {}\n", mark(self.passed));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rules::Interval;

    fn grid() -> Dataset {
        let rows: Vec<Vec<f64>> = (0..100).map(|i| vec![i as f64 / 100.0]).collect();
        let y = rows.iter().map(|r| if r[0] < 0.5 { 0.0 } else { 1.0 }).collect();
        Dataset::from_rows(&rows, y).unwrap()
    }

    fn cfg(n: usize) -> SignificanceConfig {
        SignificanceConfig::derive(0.49, 3, n, 0.5, 0.0).unwrap()
    }

    fn half(lo: f64, hi: f64) -> Rule {
        Rule::from_conditions([(0, Interval::new(lo, hi).unwrap())]).unwrap()
    }

    #[test]
    fn disjoint_rules_pass() {
        let ds = grid();
        let cov = Covering::from_tagged(
            vec![
                (half(f64::NEG_INFINITY, 0.49), RuleClass::Significant),
                (half(0.5, f64::INFINITY), RuleClass::Significant),
            ],
            &ds,
        );
        let r = check_suitability(&cov, &ds, &cfg(100), 0.9, 0.05).unwrap();
        assert_eq!(r.redundancy_significant.ratio, Some(1.0));
        assert!(r.redundancy_significant.passed);
        assert!(r.passed, "{}", r.to_text());
    }

    #[test]
    fn disjoint_insignificant_rules_pass_below_unit_bound() {
        let ds = grid();
        let rows: Vec<Vec<f64>> = (0..100).map(|i| vec![i as f64 / 100.0]).collect();
        let flat = Dataset::from_rows(&rows, ds.target().to_vec()).unwrap();
        let cov = Covering::from_tagged(
            vec![
                (half(f64::NEG_INFINITY, 0.49), RuleClass::Insignificant),
                (half(0.5, f64::INFINITY), RuleClass::Insignificant),
            ],
            &flat,
        );
        // epsilon_n > 1 makes the bound epsilon_n^-2 < 1.
        let sig = SignificanceConfig::derive(0.49, 3, 100, 5.0, 0.0).unwrap();
        let r = check_suitability(&cov, &flat, &sig, 0.9, 0.05).unwrap();
        assert!(r.redundancy_insignificant.bound < 1.0);
        assert!(r.redundancy_insignificant.passed);
        // Overlap raises M/m above the bound.
        let cov = Covering::from_tagged(
            vec![
                (half(f64::NEG_INFINITY, 0.6), RuleClass::Insignificant),
                (half(0.5, f64::INFINITY), RuleClass::Insignificant),
            ],
            &flat,
        );
        let r = check_suitability(&cov, &flat, &sig, 0.9, 0.05).unwrap();
        assert_eq!(r.redundancy_insignificant.ratio, Some(2.0));
        assert!(!r.redundancy_insignificant.passed);
    }

    #[test]
    fn small_rule_violates_coverage() {
        let ds = grid();
        // 0.1 = 100^-0.5 < 100^-0.49 ~ 0.1047
        let cov = Covering::from_tagged(
            vec![
                (half(f64::NEG_INFINITY, 0.49), RuleClass::Significant),
                (half(0.5, f64::INFINITY), RuleClass::Significant),
                (half(0.9, f64::INFINITY), RuleClass::Significant),
            ],
            &ds,
        );
        let r = check_suitability(&cov, &ds, &cfg(100), 0.9, 0.05).unwrap();
        assert_eq!(r.set_coverage.violations, vec![2]);
        assert!(!r.passed);
    }

    #[test]
    fn wrong_tag_and_uncovered_mass() {
        let ds = grid();
        // The left half has zero variance and mean 0 != 0.5: significant, not I.
        let cov = Covering::from_tagged(vec![(half(f64::NEG_INFINITY, 0.49), RuleClass::Insignificant)], &ds);
        let r = check_suitability(&cov, &ds, &cfg(100), 0.9, 0.05).unwrap();
        assert_eq!(r.significance.mismatches, vec![0]);
        assert!((r.collection_coverage.uncovered - 0.5).abs() < 1e-12);
        assert!(!r.collection_coverage.passed);
    }

    #[test]
    fn cardinality_bound() {
        let ds = grid();
        let cov = Covering::from_tagged(vec![(Rule::all_space(), RuleClass::Insignificant)], &ds);
        let r = check_suitability(&cov, &ds, &cfg(100), 0.9, 0.05).unwrap();
        assert!((r.cardinality.bound - 100f64.powf(0.49) * 10.0).abs() < 1e-9);
        assert!(r.cardinality.passed);
    }
}
