//! Rule generation from tree ensembles: every node and leaf of every tree,
//! except the root, becomes a candidate rule.

mod ensemble;
mod tree;

pub use ensemble::{fit_ensemble, generate_rules, harvest_rules, GeneratorConfig, Method};
pub use tree::{fit_cart_tree, fit_cart_tree_on, CartParams, NodeKind, TreeNode};
