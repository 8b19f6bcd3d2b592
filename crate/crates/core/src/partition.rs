//! Explicit construction of the partition generated by a finite collection
//! of boxes: for every subset `S`, the cell `(∩ S) \ (∪ rest)`. Exponential
//! in the number of rules; meant for checking the signature-based estimator.

use crate::error::{Error, Result};
use crate::rules::{Interval, Rule};

pub const MAX_BRUTE_FORCE_RULES: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionCell {
    /// `pattern[j]` is true when the cell lies inside rule `j`.
    pub pattern: Vec<bool>,
    /// Intersection of the rules in the pattern (whole space for none).
    pub core: Rule,
    /// Indices of the rules subtracted from `core`.
    pub excluded: Vec<usize>,
    /// A point of the cell.
    pub witness: Vec<f64>,
}

impl PartitionCell {
    pub fn contains(&self, rules: &[Rule], x: &[f64]) -> bool {
        self.core.covers(x) && self.excluded.iter().all(|&j| !rules[j].covers(x))
    }

    /// The cell outside every rule.
    pub fn is_uncovered(&self) -> bool {
        self.pattern.iter().all(|b| !b)
    }
}

/// Representative coordinates along one axis: every cut value inside
/// `[lo, hi]`, plus one point in each open gap between consecutive cuts
/// (and beyond the outermost ones when the range is unbounded). Each box in
/// the collection either contains or misses each elementary piece whole.
fn axis_representatives(range: Interval, cuts: &mut Vec<f64>) -> Vec<f64> {
    cuts.retain(|c| c.is_finite() && range.contains(*c));
    if range.lo().is_finite() {
        cuts.push(range.lo());
    }
    if range.hi().is_finite() {
        cuts.push(range.hi());
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut reps = Vec::with_capacity(2 * cuts.len() + 1);
    if cuts.is_empty() {
        reps.push(0.0);
        return reps;
    }
    if range.lo() == f64::NEG_INFINITY {
        reps.push(cuts[0] - 1.0);
    }
    for (i, &c) in cuts.iter().enumerate() {
        reps.push(c);
        if let Some(&next) = cuts.get(i + 1) {
            let mid = c + (next - c) / 2.0;
            if mid > c && mid < next {
                reps.push(mid);
            }
        }
    }
    if range.hi() == f64::INFINITY {
        reps.push(cuts[cuts.len() - 1] + 1.0);
    }
    reps
}

/// Finds a point of `core` outside all of `excluded`, sweeping the grid of
/// elementary pieces cut out by every rule endpoint.
fn find_witness(core: &Rule, rules: &[Rule], excluded: &[usize], d: usize) -> Option<Vec<f64>> {
    let axes: Vec<Vec<f64>> = (0..d)
        .map(|f| {
            let range = core.condition(f).unwrap_or(Interval::FULL);
            let mut cuts: Vec<f64> = excluded
                .iter()
                .filter_map(|&j| rules[j].condition(f))
                .flat_map(|iv| [iv.lo(), iv.hi()])
                .collect();
            axis_representatives(range, &mut cuts)
        })
        .collect();
    let mut idx = vec![0usize; d];
    let mut point: Vec<f64> = axes.iter().map(|a| a[0]).collect();
    loop {
        if core.covers(&point) && excluded.iter().all(|&j| !rules[j].covers(&point)) {
            return Some(point);
        }
        // Odometer increment.
        let mut k = 0;
        loop {
            if k == d {
                return None;
            }
            idx[k] += 1;
            if idx[k] < axes[k].len() {
                point[k] = axes[k][idx[k]];
                break;
            }
            idx[k] = 0;
            point[k] = axes[k][0];
            k += 1;
        }
    }
}

/// All non-empty cells of the partition generated by `rules` in `R^d`,
/// including the cell outside every rule when it is non-empty.
pub fn enumerate_partition_bruteforce(rules: &[Rule], d: usize) -> Result<Vec<PartitionCell>> {
    let k = rules.len();
    if k > MAX_BRUTE_FORCE_RULES {
        return Err(Error::TooManyRules(k, MAX_BRUTE_FORCE_RULES));
    }
    if d == 0 {
        return Err(Error::InvalidConfig("dimension must be >= 1".into()));
    }
    for r in rules {
        r.check_dim(d)?;
    }
    let mut cells = Vec::new();
    for subset in 0u32..(1u32 << k) {
        let pattern: Vec<bool> = (0..k).map(|j| subset & (1 << j) != 0).collect();
        let core = pattern
            .iter()
            .zip(rules)
            .filter(|(p, _)| **p)
            .try_fold(Rule::all_space(), |acc, (_, r)| acc.intersect(r));
        let Some(core) = core else { continue };
        let excluded: Vec<usize> = (0..k).filter(|&j| !pattern[j]).collect();
        if let Some(witness) = find_witness(&core, rules, &excluded, d) {
            cells.push(PartitionCell {
                pattern,
                core,
                excluded,
                witness,
            });
        }
    }
    Ok(cells)
}

/// The `2d + 1` boxes partitioning `R^d` with `[0, 1]^d` as one element:
/// the unit cube plus, for each axis `i`, the slabs `x_i < 0` and `x_i > 1`
/// restricted to `[0, 1]` on the axes before `i`.
pub fn unit_cube_witness_partition(d: usize) -> Vec<Rule> {
    let unit = Interval::new(0.0, 1.0).expect("valid");
    let cube = Rule::from_conditions((0..d).map(|f| (f, unit))).expect("valid");
    let mut parts = vec![cube];
    for i in 0..d {
        let prefix: Vec<(usize, Interval)> = (0..i).map(|f| (f, unit)).collect();
        for side in [Interval::at_most(0f64.next_down()), Interval::greater_than(1.0)] {
            let conds = prefix.iter().copied().chain(std::iter::once((i, side)));
            parts.push(Rule::from_conditions(conds).expect("valid"));
        }
    }
    parts
}

/// Checks the unit-cube example in dimension `d`: a two-box covering
/// `{[0,1]^d, R^d}` already yields `[0,1]^d` as a cell, while the explicit
/// partition needs `2d + 1` boxes. Returns `(partition size, covering size)`.
pub fn covering_vs_partition_cardinality_check(d: usize) -> Result<(usize, usize)> {
    if d == 0 {
        return Err(Error::InvalidConfig("dimension must be >= 1".into()));
    }
    let unit = Interval::new(0.0, 1.0)?;
    let cube = Rule::from_conditions((0..d).map(|f| (f, unit)))?;
    let covering = vec![cube.clone(), Rule::all_space()];
    let cells = enumerate_partition_bruteforce(&covering, d)?;
    let both = cells
        .iter()
        .find(|c| c.pattern == [true, true])
        .ok_or_else(|| Error::Verification("no cell inside both covering elements".into()))?;
    if both.core != cube || !both.excluded.is_empty() {
        return Err(Error::Verification("cell (1,1) differs from the unit cube".into()));
    }

    let parts = unit_cube_witness_partition(d);
    for (i, a) in parts.iter().enumerate() {
        for b in &parts[i + 1..] {
            if a.intersect(b).is_some() {
                return Err(Error::Verification(format!("boxes {a} and {b} overlap")));
            }
        }
    }
    // Exhaustiveness on a probe grid around the cube.
    let probes = [-1.0, -1e-9, 0.0, 0.5, 1.0, 1.0 + 1e-9, 2.0];
    let total = probes.len().pow(d as u32);
    let mut x = vec![0.0; d];
    for code in 0..total {
        let mut c = code;
        for v in x.iter_mut() {
            *v = probes[c % probes.len()];
            c /= probes.len();
        }
        let hits = parts.iter().filter(|p| p.covers(&x)).count();
        if hits != 1 {
            return Err(Error::Verification(format!("{x:?} lies in {hits} partition boxes")));
        }
    }
    Ok((parts.len(), covering.len()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn boxr(conds: &[(usize, f64, f64)]) -> Rule {
        Rule::from_conditions(conds.iter().map(|&(f, a, b)| (f, Interval::new(a, b).unwrap()))).unwrap()
    }

    fn covered_cells(cells: &[PartitionCell]) -> usize {
        cells.iter().filter(|c| !c.is_uncovered()).count()
    }

    #[test]
    fn one_rule_gives_rule_and_complement() {
        let cells = enumerate_partition_bruteforce(&[boxr(&[(0, 0.0, 1.0)])], 2).unwrap();
        assert_eq!(cells.len(), 2);
        assert_eq!(covered_cells(&cells), 1);
    }

    #[test]
    fn two_overlapping_boxes() {
        let a = boxr(&[(0, 0.0, 2.0), (1, 0.0, 2.0)]);
        let b = boxr(&[(0, 1.0, 3.0), (1, 1.0, 3.0)]);
        let cells = enumerate_partition_bruteforce(&[a, b], 2).unwrap();
        assert_eq!(covered_cells(&cells), 3);
        assert_eq!(cells.len(), 4);
    }

    #[test]
    fn nested_boxes_and_exact_boundaries() {
        // b contains a: no "a minus b" cell.
        let a = boxr(&[(0, 0.2, 0.4)]);
        let b = boxr(&[(0, 0.0, 1.0)]);
        let cells = enumerate_partition_bruteforce(&[a.clone(), b.clone()], 1).unwrap();
        assert_eq!(covered_cells(&cells), 2);
        // Touching closed boxes share only an endpoint, which still forms a cell.
        let c = boxr(&[(0, 1.0, 2.0)]);
        let cells = enumerate_partition_bruteforce(&[b, c], 1).unwrap();
        let shared = cells.iter().find(|c| c.pattern == [true, true]).unwrap();
        assert_eq!(shared.witness, vec![1.0]);
    }

    /// Five overlapping rectangles whose partition has 11 cells.
    pub(crate) fn five_rect_layout() -> Vec<Rule> {
        vec![
            boxr(&[(0, 0.0, 4.0), (1, 0.0, 4.0)]),
            boxr(&[(0, 3.0, 7.0), (1, 1.0, 3.0)]),
            boxr(&[(0, 6.0, 9.0), (1, 0.0, 4.0)]),
            boxr(&[(0, 1.0, 8.0), (1, 5.0, 6.0)]),
            boxr(&[(0, 5.0, 6.5), (1, 2.0, 5.5)]),
        ]
    }

    #[test]
    fn five_rectangles_give_eleven_cells() {
        let rules = five_rect_layout();
        let cells = enumerate_partition_bruteforce(&rules, 2).unwrap();
        // Oracle: distinct signatures on a fine grid (step 0.05 over [-1, 10]^2).
        let mut seen = std::collections::BTreeSet::new();
        for i in 0..=220 {
            for j in 0..=220 {
                let x = [f64::from(i) / 20.0 - 1.0, f64::from(j) / 20.0 - 1.0];
                let sig: Vec<bool> = rules.iter().map(|r| r.covers(&x)).collect();
                if sig.iter().any(|b| *b) {
                    seen.insert(sig);
                }
            }
        }
        assert_eq!(seen.len(), 11);
        assert_eq!(covered_cells(&cells), 11);
        for c in &cells {
            assert!(c.contains(&rules, &c.witness));
        }
    }

    #[test]
    fn too_many_rules() {
        let rules = vec![Rule::all_space(); 13];
        assert!(matches!(enumerate_partition_bruteforce(&rules, 1), Err(Error::TooManyRules(13, 12))));
    }

    #[test]
    fn unit_cube_example() {
        assert_eq!(covering_vs_partition_cardinality_check(1).unwrap(), (3, 2));
        assert_eq!(covering_vs_partition_cardinality_check(3).unwrap(), (7, 2));
    }
}
