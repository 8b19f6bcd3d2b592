//! Hyperrectangle rules and their empirical statistics.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use bitvec::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::exec::Exec;

/// Membership of every training row in some set of feature space.
pub type RowMask = BitVec<u64, Lsb0>;

/// Closed interval `[lo, hi]`; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub const FULL: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
            return Err(Error::InvalidInterval { lo, hi });
        }
        Ok(Interval { lo, hi })
    }

    /// `(-inf, t]`
    pub fn at_most(t: f64) -> Self {
        Interval {
            lo: f64::NEG_INFINITY,
            hi: t,
        }
    }

    /// `(t, +inf)`, stored closed as `[next_up(t), +inf]`.
    pub fn greater_than(t: f64) -> Self {
        Interval {
            lo: t.next_up(),
            hi: f64::INFINITY,
        }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn is_full(&self) -> bool {
        self.lo == f64::NEG_INFINITY && self.hi == f64::INFINITY
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Interval { lo, hi })
    }

    /// True when `other` lies inside `self`.
    pub fn encloses(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    fn total_cmp(&self, other: &Interval) -> Ordering {
        self.lo.total_cmp(&other.lo).then(self.hi.total_cmp(&other.hi))
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

/// Conjunction of per-feature interval conditions. Features without a
/// condition are unconstrained; the empty rule is the whole space.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Rule {
    conditions: BTreeMap<usize, Interval>,
}

impl Eq for Rule {}

impl Ord for Rule {
    /// Canonical order: lexicographic over the sorted condition list.
    fn cmp(&self, other: &Self) -> Ordering {
        let mut a = self.conditions.iter();
        let mut b = other.conditions.iter();
        loop {
            match (a.next(), b.next()) {
                (None, None) => return Ordering::Equal,
                (None, Some(_)) => return Ordering::Less,
                (Some(_), None) => return Ordering::Greater,
                (Some((fa, ia)), Some((fb, ib))) => {
                    let c = fa.cmp(fb).then_with(|| ia.total_cmp(ib));
                    if c != Ordering::Equal {
                        return c;
                    }
                }
            }
        }
    }
}

impl PartialOrd for Rule {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Rule {
    pub fn all_space() -> Self {
        Rule::default()
    }

    /// Builds a rule from `(feature, interval)` pairs. Repeated features are
    /// intersected; an empty intersection is an error.
    pub fn from_conditions<I>(conditions: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, Interval)>,
    {
        let mut rule = Rule::all_space();
        for (feature, interval) in conditions {
            rule = rule
                .restrict(feature, interval)
                .ok_or(Error::InvalidInterval {
                    lo: interval.lo,
                    hi: interval.hi,
                })?;
        }
        Ok(rule)
    }

    /// Tightens the condition on `feature`; `None` if the result is empty.
    /// A full interval leaves the rule unchanged.
    pub fn restrict(&self, feature: usize, interval: Interval) -> Option<Rule> {
        let current = self.conditions.get(&feature).copied().unwrap_or(Interval::FULL);
        let merged = current.intersect(&interval)?;
        let mut rule = self.clone();
        if merged.is_full() {
            rule.conditions.remove(&feature);
        } else {
            rule.conditions.insert(feature, merged);
        }
        Some(rule)
    }

    /// Number of constrained features.
    pub fn len(&self) -> usize {
        self.conditions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.conditions.is_empty()
    }

    pub fn conditions(&self) -> impl ExactSizeIterator<Item = (usize, Interval)> + '_ {
        self.conditions.iter().map(|(&f, &i)| (f, i))
    }

    pub fn condition(&self, feature: usize) -> Option<Interval> {
        self.conditions.get(&feature).copied()
    }

    /// Largest constrained feature index, if any.
    pub fn max_feature(&self) -> Option<usize> {
        self.conditions.keys().next_back().copied()
    }

    pub fn check_dim(&self, d: usize) -> Result<()> {
        match self.max_feature() {
            Some(index) if index >= d => Err(Error::FeatureOutOfRange { index, dim: d }),
            _ => Ok(()),
        }
    }

    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        self.check_dim(x.len())?;
        Ok(self.covers(x))
    }

    /// Membership test without the dimension check. Panics if a constrained
    /// index is out of range.
    #[inline]
    pub fn covers(&self, x: &[f64]) -> bool {
        self.conditions.iter().all(|(&f, iv)| iv.contains(x[f]))
    }

    pub fn intersect(&self, other: &Rule) -> Option<Rule> {
        other
            .conditions
            .iter()
            .try_fold(self.clone(), |acc, (&f, &iv)| acc.restrict(f, iv))
    }

    /// True when every point of `other` is in `self`.
    pub fn encloses(&self, other: &Rule) -> bool {
        self.conditions.iter().all(|(f, iv)| {
            other
                .conditions
                .get(f)
                .is_some_and(|o| iv.encloses(o))
        })
    }

    /// Rows of `ds` activated by this rule.
    pub fn activation_mask(&self, ds: &Dataset) -> RowMask {
        let mut mask = RowMask::repeat(false, ds.n_rows());
        for (i, row) in ds.rows().enumerate() {
            if self.covers(row) {
                mask.set(i, true);
            }
        }
        mask
    }

    pub fn display_with(&self, names: &[String]) -> String {
        if self.is_empty() {
            return "TRUE".to_string();
        }
        self.conditions
            .iter()
            .map(|(&f, iv)| {
                let name = names.get(f).map_or_else(|| format!("x{f}"), Clone::clone);
                format!("{name} in {iv}")
            })
            .collect::<Vec<_>>()
            .join(" AND ")
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.display_with(&[]))
    }
}

pub fn rule_intersect(a: &Rule, b: &Rule) -> Option<Rule> {
    a.intersect(b)
}

/// Sum of rule lengths.
pub fn interpretability_index<'a, I>(rules: I) -> usize
where
    I: IntoIterator<Item = &'a Rule>,
{
    rules.into_iter().map(Rule::len).sum()
}

/// Empirical coverage, conditional mean and conditional variance of a rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuleStats {
    pub support_count: usize,
    pub coverage: f64,
    /// Absent when the rule holds no row.
    pub cond_mean: Option<f64>,
    /// Plug-in (divide-by-count) variance; absent when the rule holds no row.
    pub cond_var: Option<f64>,
}

impl RuleStats {
    pub fn from_mask(mask: &RowMask, target: &[f64]) -> RuleStats {
        let n = target.len();
        let count = mask.count_ones();
        if count == 0 {
            return RuleStats {
                support_count: 0,
                coverage: 0.0,
                cond_mean: None,
                cond_var: None,
            };
        }
        let c = count as f64;
        let mean = mask.iter_ones().map(|i| target[i]).sum::<f64>() / c;
        let var = mask
            .iter_ones()
            .map(|i| (target[i] - mean) * (target[i] - mean))
            .sum::<f64>()
            / c;
        RuleStats {
            support_count: count,
            coverage: c / n as f64,
            cond_mean: Some(mean),
            cond_var: Some(var),
        }
    }

    pub fn cond_std(&self) -> Option<f64> {
        self.cond_var.map(f64::sqrt)
    }
}

pub fn rule_stats(rule: &Rule, ds: &Dataset) -> RuleStats {
    RuleStats::from_mask(&rule.activation_mask(ds), ds.target())
}

/// Rule with its activation mask and statistics on the training sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredRule {
    pub rule: Rule,
    pub mask: RowMask,
    pub stats: RuleStats,
}

impl ScoredRule {
    pub fn new(rule: Rule, ds: &Dataset) -> ScoredRule {
        let mask = rule.activation_mask(ds);
        let stats = RuleStats::from_mask(&mask, ds.target());
        ScoredRule { rule, mask, stats }
    }
}

/// Scores every rule against `ds`, preserving order.
pub fn score_rules(rules: Vec<Rule>, ds: &Dataset, exec: Exec) -> Vec<ScoredRule> {
    let masks = exec.map(&rules, |r| r.activation_mask(ds));
    rules
        .into_iter()
        .zip(masks)
        .map(|(rule, mask)| {
            let stats = RuleStats::from_mask(&mask, ds.target());
            ScoredRule { rule, mask, stats }
        })
        .collect()
}
