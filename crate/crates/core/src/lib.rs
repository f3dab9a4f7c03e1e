//! Oblique regression trees with ridge-regression splits and feature
//! concatenation (FC-ODT), the Ridge-ODT and CART baselines, simulated and
//! file-backed datasets, and the experiment harness used to compare them.

// `!(x >= 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod datasets;
pub mod error;
pub mod evaluation;
pub mod linalg;
pub mod tree;

pub use baselines::{fit_baseline, fit_cart, fit_ridge_odt, BaselineKind};
pub use datasets::{Dataset, DatasetMeta};
pub use error::{Error, Result};
pub use linalg::{solve_ridge, DenseMatrix, RidgeSolution};
pub use tree::{
    fit_fc_odt, LeafNode, Node, ObliqueTree, PathStep, SplitCriteria, SplitDirection, SplitNode, VariantFlags,
};
