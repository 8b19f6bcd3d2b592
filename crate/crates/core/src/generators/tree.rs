//! Best-first CART regression trees with variance-reduction splits.

use rand::seq::index::sample;
use rand::Rng;

use crate::dataset::Dataset;
use crate::exec::Exec;
use crate::rules::{Interval, Rule};

#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    /// Conjunction of the split conditions from the root to this node.
    pub path_rule: Rule,
    /// Rows (with bootstrap multiplicity) that reached the node during fitting.
    pub n_rows: usize,
    /// Mean fitted target of those rows.
    pub value: f64,
    pub kind: NodeKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    Leaf,
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        matches!(self.kind, NodeKind::Leaf)
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match &node.kind {
                NodeKind::Leaf => return node.value,
                NodeKind::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => node = if x[*feature] <= *threshold { left } else { right },
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        match &self.kind {
            NodeKind::Leaf => 1,
            NodeKind::Split { left, right, .. } => left.n_leaves() + right.n_leaves(),
        }
    }

    /// Depth of the deepest leaf; a lone root has depth 0.
    pub fn depth(&self) -> usize {
        match &self.kind {
            NodeKind::Leaf => 0,
            NodeKind::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    /// All nodes in breadth-first order, root first.
    pub fn nodes_bfs(&self) -> Vec<&TreeNode> {
        let mut out = vec![self];
        let mut i = 0;
        while i < out.len() {
            if let NodeKind::Split { left, right, .. } = &out[i].kind {
                out.push(left);
                out.push(right);
            }
            i += 1;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartParams {
    pub max_leaves: usize,
    /// Features drawn per split search; `None` searches all of them.
    pub mtry: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    feature: usize,
    threshold: f64,
    gain: f64,
}

struct ArenaNode {
    rule: Rule,
    n_rows: usize,
    value: f64,
    split: Option<(usize, f64, usize, usize)>,
}

struct OpenLeaf {
    node: usize,
    rows: Vec<usize>,
    candidate: Option<Candidate>,
}

/// Fits a tree on the whole of `ds` against its own target.
pub fn fit_cart_tree<R: Rng>(
    ds: &Dataset,
    max_leaves: usize,
    mtry: Option<usize>,
    rng: &mut R,
) -> TreeNode {
    let rows: Vec<usize> = (0..ds.n_rows()).collect();
    fit_cart_tree_on(
        ds,
        ds.target(),
        &rows,
        CartParams { max_leaves, mtry },
        rng,
        Exec::Sequential,
    )
}

/// Fits a tree on `rows` (duplicates allowed) of `ds` against `targets`,
/// which is indexed by dataset row. Growth is best-first: the open leaf with
/// the largest impurity decrease is split until `max_leaves` is reached or no
/// split improves the fit.
pub fn fit_cart_tree_on<R: Rng>(
    ds: &Dataset,
    targets: &[f64],
    rows: &[usize],
    params: CartParams,
    rng: &mut R,
    exec: Exec,
) -> TreeNode {
    assert!(!rows.is_empty(), "cannot fit a tree on zero rows");
    let max_leaves = params.max_leaves.max(1);
    let mut arena = vec![ArenaNode {
        rule: Rule::all_space(),
        n_rows: rows.len(),
        value: mean_of(targets, rows),
        split: None,
    }];
    let first = best_split(ds, targets, rows, params.mtry, rng, exec);
    let mut open = vec![OpenLeaf {
        node: 0,
        rows: rows.to_vec(),
        candidate: first,
    }];
    let mut n_leaves = 1;
    while n_leaves < max_leaves {
        // Largest gain wins; earlier-created leaves win ties.
        let pick = open
            .iter()
            .enumerate()
            .filter_map(|(i, l)| l.candidate.map(|c| (i, c.gain)))
            .fold(None::<(usize, f64)>, |best, (i, g)| match best {
                Some((_, bg)) if bg >= g => best,
                _ => Some((i, g)),
            });
        let Some((slot, _)) = pick else { break };
        let leaf = open.swap_remove(slot);
        let cand = leaf.candidate.expect("picked leaf has a candidate");
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = leaf
            .rows
            .iter()
            .partition(|&&r| ds.value(r, cand.feature) <= cand.threshold);
        let parent_rule = arena[leaf.node].rule.clone();
        let left_rule = parent_rule
            .restrict(cand.feature, Interval::at_most(cand.threshold))
            .expect("left child holds rows");
        let right_rule = parent_rule
            .restrict(cand.feature, Interval::greater_than(cand.threshold))
            .expect("right child holds rows");
        let left_id = arena.len();
        arena.push(ArenaNode {
            rule: left_rule,
            n_rows: left_rows.len(),
            value: mean_of(targets, &left_rows),
            split: None,
        });
        let right_id = arena.len();
        arena.push(ArenaNode {
            rule: right_rule,
            n_rows: right_rows.len(),
            value: mean_of(targets, &right_rows),
            split: None,
        });
        arena[leaf.node].split = Some((cand.feature, cand.threshold, left_id, right_id));
        n_leaves += 1;
        for (id, rows) in [(left_id, left_rows), (right_id, right_rows)] {
            let candidate = if n_leaves < max_leaves {
                best_split(ds, targets, &rows, params.mtry, rng, exec)
            } else {
                None
            };
            open.push(OpenLeaf {
                node: id,
                rows,
                candidate,
            });
        }
        // Keep creation order so tie-breaking by position stays stable.
        open.sort_by_key(|l| l.node);
    }
    into_tree(&arena, 0)
}

fn into_tree(arena: &[ArenaNode], id: usize) -> TreeNode {
    let a = &arena[id];
    let kind = match a.split {
        None => NodeKind::Leaf,
        Some((feature, threshold, l, r)) => NodeKind::Split {
            feature,
            threshold,
            left: Box::new(into_tree(arena, l)),
            right: Box::new(into_tree(arena, r)),
        },
    };
    TreeNode {
        path_rule: a.rule.clone(),
        n_rows: a.n_rows,
        value: a.value,
        kind,
    }
}

fn mean_of(targets: &[f64], rows: &[usize]) -> f64 {
    rows.iter().map(|&r| targets[r]).sum::<f64>() / rows.len() as f64
}

fn best_split<R: Rng>(
    ds: &Dataset,
    targets: &[f64],
    rows: &[usize],
    mtry: Option<usize>,
    rng: &mut R,
    exec: Exec,
) -> Option<Candidate> {
    let d = ds.n_features();
    let features: Vec<usize> = match mtry {
        Some(m) if m < d => {
            let mut f = sample(rng, d, m.max(1)).into_vec();
            f.sort_unstable();
            f
        }
        _ => (0..d).collect(),
    };
    if rows.len() < 2 {
        return None;
    }
    let first = targets[rows[0]];
    if rows.iter().all(|&r| targets[r] == first) {
        return None;
    }
    let mean = mean_of(targets, rows);
    let sse: f64 = rows.iter().map(|&r| (targets[r] - mean).powi(2)).sum();
    if sse <= 0.0 {
        return None;
    }
    let per_feature = exec.map(&features, |&f| best_split_on(ds, targets, rows, f, mean));
    // Features are ascending, so strict improvement keeps the lowest index on ties.
    let best = per_feature
        .into_iter()
        .flatten()
        .fold(None::<Candidate>, |best, c| match best {
            Some(b) if b.gain >= c.gain => Some(b),
            _ => Some(c),
        })?;
    (best.gain > 1e-12 * sse).then_some(best)
}

fn best_split_on(
    ds: &Dataset,
    targets: &[f64],
    rows: &[usize],
    feature: usize,
    mean: f64,
) -> Option<Candidate> {
    let mut pairs: Vec<(f64, f64)> = rows
        .iter()
        .map(|&r| (ds.value(r, feature), targets[r] - mean))
        .collect();
    pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
    let n = pairs.len();
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    let base = total * total / n as f64;
    let mut left = 0.0;
    let mut best: Option<Candidate> = None;
    for i in 0..n - 1 {
        left += pairs[i].1;
        let (a, b) = (pairs[i].0, pairs[i + 1].0);
        if a == b {
            continue;
        }
        let nl = (i + 1) as f64;
        let nr = (n - i - 1) as f64;
        let right = total - left;
        let gain = left * left / nl + right * right / nr - base;
        if best.is_none_or(|c| gain > c.gain) {
            let mut threshold = a + (b - a) / 2.0;
            if threshold >= b {
                threshold = a;
            }
            best = Some(Candidate {
                feature,
                threshold,
                gain,
            });
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(0)
    }

    #[test]
    fn step_function_single_split() {
        let xs = [0.1, 0.2, 0.3, 0.6, 0.7, 0.9];
        let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x, 0.5]).collect();
        let y: Vec<f64> = xs.iter().map(|&x| if x < 0.5 { 0.0 } else { 1.0 }).collect();
        let ds = Dataset::from_rows(&rows, y).unwrap();
        let tree = fit_cart_tree(&ds, 2, None, &mut rng());
        match &tree.kind {
            NodeKind::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                assert_eq!(*feature, 0);
                assert!(*threshold > 0.3 && *threshold < 0.6);
                assert_eq!(left.value, 0.0);
                assert_eq!(right.value, 1.0);
            }
            NodeKind::Leaf => panic!("expected a split"),
        }
        assert_eq!(tree.n_leaves(), 2);
    }

    #[test]
    fn constant_target_is_single_leaf() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let ds = Dataset::from_rows(&rows, vec![0.3; 10]).unwrap();
        let tree = fit_cart_tree(&ds, 8, None, &mut rng());
        assert!(tree.is_leaf());
        assert!((tree.value - 0.3).abs() < 1e-15);
    }

    /// Exhaustive search over every pair of axis-aligned cuts that can yield
    /// four leaves on the XOR design, returning the minimal SSE.
    fn brute_force_four_leaf_sse(points: &[(f64, f64, f64)]) -> f64 {
        let cuts = [0.25, 0.5, 0.75];
        let sse = |idx: &[usize]| -> f64 {
            if idx.is_empty() {
                return 0.0;
            }
            let m = idx.iter().map(|&i| points[i].2).sum::<f64>() / idx.len() as f64;
            idx.iter().map(|&i| (points[i].2 - m).powi(2)).sum()
        };
        let mut best = f64::INFINITY;
        for f1 in 0..2 {
            for &c1 in &cuts {
                for f2 in 0..2 {
                    for &c2 in &cuts {
                        for f3 in 0..2 {
                            for &c3 in &cuts {
                                let coord = |p: &(f64, f64, f64), f: usize| if f == 0 { p.0 } else { p.1 };
                                let mut cells: [Vec<usize>; 4] = Default::default();
                                for (i, p) in points.iter().enumerate() {
                                    let k = if coord(p, f1) <= c1 {
                                        usize::from(coord(p, f2) > c2)
                                    } else {
                                        2 + usize::from(coord(p, f3) > c3)
                                    };
                                    cells[k].push(i);
                                }
                                best = best.min(cells.iter().map(|c| sse(c)).sum());
                            }
                        }
                    }
                }
            }
        }
        best
    }

    #[test]
    fn xor_recovers_quadrants() {
        let pts = [(0.0, 0.0, 1.0), (0.0, 1.0, 5.0), (1.0, 0.0, 3.0), (1.0, 1.0, 7.0)];
        assert_eq!(brute_force_four_leaf_sse(&pts), 0.0);
        let rows: Vec<Vec<f64>> = pts.iter().map(|p| vec![p.0, p.1]).collect();
        let ds = Dataset::from_rows(&rows, pts.iter().map(|p| p.2).collect()).unwrap();
        let tree = fit_cart_tree(&ds, 4, None, &mut rng());
        assert_eq!(tree.n_leaves(), 4);
        for p in &pts {
            assert!((tree.predict(&[p.0, p.1]) - p.2).abs() < 1e-9);
        }
    }

    #[test]
    fn leaf_budget_and_rule_lengths() {
        let s = crate::dataset::friedman_synthetic(300, 10, 5).unwrap();
        for leaves in [2, 3, 8, 15] {
            let tree = fit_cart_tree(&s.data, leaves, Some(4), &mut rng());
            assert!(tree.n_leaves() <= leaves);
            for node in tree.nodes_bfs() {
                assert!(node.path_rule.len() <= tree.depth());
                assert!(node.path_rule.len() < leaves);
            }
            // Every node's rule holds the rows that reached it.
            for node in tree.nodes_bfs() {
                let count = s.data.rows().filter(|r| node.path_rule.covers(r)).count();
                assert_eq!(count, node.n_rows);
            }
        }
    }

    #[test]
    fn child_rule_tightens_parent_by_one_interval() {
        let s = crate::dataset::friedman_synthetic(200, 8, 9).unwrap();
        let tree = fit_cart_tree(&s.data, 8, None, &mut rng());
        fn walk(node: &TreeNode) {
            if let NodeKind::Split {
                feature,
                left,
                right,
                ..
            } = &node.kind
            {
                for child in [left, right] {
                    assert!(node.path_rule.encloses(&child.path_rule));
                    let changed = child
                        .path_rule
                        .conditions()
                        .filter(|(f, iv)| node.path_rule.condition(*f) != Some(*iv))
                        .map(|(f, _)| f)
                        .collect::<Vec<_>>();
                    assert_eq!(changed, vec![*feature]);
                    walk(child);
                }
            }
        }
        walk(&tree);
    }
}
