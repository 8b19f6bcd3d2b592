//! Greedy extraction of a quasi-covering from the significant rules, then
//! the insignificant ones.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rules::{Rule, RowMask, RuleStats, ScoredRule};
use crate::significance::{ClassifiedRules, RuleClass};

/// Loop condition of the selection.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StopCondition {
    /// Continue while the union of selected rules misses some training row.
    #[default]
    Union,
    /// Continue while the sum of selected coverages is below one.
    Sum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub gamma: f64,
    #[serde(default)]
    pub stop: StopCondition,
}

impl SelectionConfig {
    pub fn new(gamma: f64) -> Result<Self> {
        let cfg = SelectionConfig {
            gamma,
            stop: StopCondition::Union,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.gamma > 0.0 && self.gamma < 1.0 {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("gamma must lie in (0, 1), got {}", self.gamma)))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectedRule {
    pub rule: Rule,
    pub stats: RuleStats,
    pub tag: RuleClass,
    /// Position in acceptance order, from 0.
    pub acceptance_index: usize,
    /// Union coverage right after this rule was accepted.
    pub coverage_at_acceptance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Covering {
    pub rules: Vec<SelectedRule>,
    pub union_coverage: f64,
}

impl Covering {
    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn rule_list(&self) -> impl Iterator<Item = &Rule> {
        self.rules.iter().map(|s| &s.rule)
    }

    pub fn n_significant(&self) -> usize {
        self.rules.iter().filter(|r| r.tag == RuleClass::Significant).count()
    }

    pub fn interpretability(&self) -> usize {
        crate::rules::interpretability_index(self.rule_list())
    }

    /// Rebuilds a covering from rules in the given order, recomputing
    /// statistics and union coverage on `ds`.
    pub fn from_tagged(rules: Vec<(Rule, RuleClass)>, ds: &Dataset) -> Covering {
        let mut union = RowMask::repeat(false, ds.n_rows());
        let n = ds.n_rows() as f64;
        let rules = rules
            .into_iter()
            .enumerate()
            .map(|(i, (rule, tag))| {
                let mask = rule.activation_mask(ds);
                union |= &mask;
                SelectedRule {
                    stats: RuleStats::from_mask(&mask, ds.target()),
                    rule,
                    tag,
                    acceptance_index: i,
                    coverage_at_acceptance: union.count_ones() as f64 / n,
                }
            })
            .collect();
        Covering {
            rules,
            union_coverage: union.count_ones() as f64 / n,
        }
    }
}

struct Selector {
    n: usize,
    gamma: f64,
    stop: StopCondition,
    union: RowMask,
    covered: usize,
    coverage_sum: f64,
    chosen: Vec<SelectedRule>,
}

impl Selector {
    fn done(&self) -> bool {
        match self.stop {
            StopCondition::Union => self.covered == self.n,
            StopCondition::Sum => self.coverage_sum >= 1.0,
        }
    }

    fn overlap(&self, mask: &RowMask) -> usize {
        mask.iter_ones().filter(|&i| self.union[i]).count()
    }

    /// Accepts the candidate when at most a `gamma` share of its rows is
    /// already covered.
    fn offer(&mut self, cand: &ScoredRule, tag: RuleClass) {
        let support = cand.stats.support_count;
        let overlap = self.overlap(&cand.mask);
        if !self.chosen.is_empty() && overlap as f64 > self.gamma * support as f64 {
            return;
        }
        self.union |= &cand.mask;
        self.covered = self.union.count_ones();
        self.coverage_sum += cand.stats.coverage;
        self.chosen.push(SelectedRule {
            rule: cand.rule.clone(),
            stats: cand.stats,
            tag,
            acceptance_index: self.chosen.len(),
            coverage_at_acceptance: self.covered as f64 / self.n as f64,
        });
    }
}

/// Greedy selection: significant rules by decreasing coverage, then
/// insignificant rules by increasing conditional variance. Ties fall back
/// to the canonical rule order. Stops as soon as the training sample is
/// covered or both pools are exhausted.
pub fn select_covering(classified: &ClassifiedRules, ds: &Dataset, cfg: &SelectionConfig) -> Result<Covering> {
    cfg.validate()?;
    if classified.is_empty() {
        return Err(Error::NothingToSelect);
    }
    let n = ds.n_rows();
    let mut sig: Vec<&ScoredRule> = classified.significant.iter().collect();
    sig.sort_by(|a, b| {
        b.stats
            .support_count
            .cmp(&a.stats.support_count)
            .then_with(|| a.rule.cmp(&b.rule))
    });
    let mut insig: Vec<&ScoredRule> = classified.insignificant.iter().collect();
    insig.sort_by(|a, b| {
        let va = a.stats.cond_var.unwrap_or(f64::INFINITY);
        let vb = b.stats.cond_var.unwrap_or(f64::INFINITY);
        va.total_cmp(&vb).then_with(|| a.rule.cmp(&b.rule))
    });

    let mut sel = Selector {
        n,
        gamma: cfg.gamma,
        stop: cfg.stop,
        union: RowMask::repeat(false, n),
        covered: 0,
        coverage_sum: 0.0,
        chosen: Vec::new(),
    };
    for cand in sig {
        if !sel.chosen.is_empty() && sel.done() {
            break;
        }
        sel.offer(cand, RuleClass::Significant);
    }
    for cand in insig {
        if !sel.chosen.is_empty() && sel.done() {
            break;
        }
        sel.offer(cand, RuleClass::Insignificant);
    }
    Ok(Covering {
        union_coverage: sel.covered as f64 / n as f64,
        rules: sel.chosen,
    })
}

/// Maximal and minimal number of covering rules activated at a training
/// point inside the union.
pub fn redundancy_stats(rules: &[&Rule], ds: &Dataset) -> Result<(usize, usize)> {
    let counts = ds
        .rows()
        .map(|row| rules.iter().filter(|r| r.covers(row)).count())
        .filter(|&c| c > 0);
    let (mut max, mut min, mut any) = (0, usize::MAX, false);
    for c in counts {
        any = true;
        max = max.max(c);
        min = min.min(c);
    }
    if !any {
        return Err(Error::EmptyUnion);
    }
    Ok((max, min))
}

pub fn covering_redundancy(cov: &Covering, ds: &Dataset) -> Result<(usize, usize)> {
    let rules: Vec<&Rule> = cov.rule_list().collect();
    redundancy_stats(&rules, ds)
}
