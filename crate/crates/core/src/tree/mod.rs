//! Oblique regression trees whose internal nodes split on ridge projections.
//!
//! A fitted [`ObliqueTree`] covers three learners that share one growth
//! loop and one node layout:
//!
//! * FC-ODT: every split appends its projection score to the feature vector
//!   seen by the children (`concatenate`) and the children fit what the
//!   parent's linear score left unexplained (`residual_path`). Prediction
//!   sums the linear scores along the decision path and adds the leaf's
//!   residual mean.
//! * Ridge-ODT: both flags off; leaves hold plain target means.
//! * CART: axis-parallel splits, plain means.
//!
//! Nodes are stored in breadth-first creation order with the root at index
//! 0; children of a split are allocated as a consecutive pair.

mod build;
mod format;
mod split;
mod stumps;

pub use build::{fit_fc_odt, fit_tree, Splitter};
pub use format::FORMAT_VERSION;
pub use split::{best_threshold, find_axis_split, find_oblique_split, midpoint, SplitResult, ThresholdChoice};
pub use stumps::{compute_stumps, verify_orthogonal_expansion, ExpansionReport, StumpBasis, StumpInfo};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, DenseMatrix};

/// Split eligibility thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitCriteria {
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub min_gain: f64,
}

impl Default for SplitCriteria {
    fn default() -> Self {
        SplitCriteria {
            max_depth: 4,
            min_samples_split: 20,
            min_samples_leaf: 8,
            min_gain: 0.0,
        }
    }
}

impl SplitCriteria {
    pub fn with_depth(max_depth: usize) -> Self {
        SplitCriteria {
            max_depth,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_depth < 1 {
            return Err(Error::invalid("max_depth must be at least 1"));
        }
        if self.min_samples_leaf < 1 {
            return Err(Error::invalid("min_samples_leaf must be at least 1"));
        }
        if self.min_samples_split < 2 * self.min_samples_leaf {
            return Err(Error::invalid(format!(
                "min_samples_split ({}) must be at least twice min_samples_leaf ({})",
                self.min_samples_split, self.min_samples_leaf
            )));
        }
        if !(self.min_gain >= 0.0) || !self.min_gain.is_finite() {
            return Err(Error::invalid("min_gain must be finite and non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariantFlags {
    pub concatenate: bool,
    pub residual_path: bool,
}

impl VariantFlags {
    pub const FC_ODT: VariantFlags = VariantFlags {
        concatenate: true,
        residual_path: true,
    };
    pub const PLAIN: VariantFlags = VariantFlags {
        concatenate: false,
        residual_path: false,
    };
}

/// How split directions are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitDirection {
    Ridge,
    AxisParallel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitNode {
    pub depth: usize,
    /// Weights over the node's input representation, bias last.
    pub projection: Vec<f64>,
    pub threshold: f64,
    pub gain: f64,
    pub left: usize,
    pub right: usize,
    pub sample_count: usize,
}

impl SplitNode {
    #[inline]
    pub fn score(&self, representation: &[f64]) -> f64 {
        let (w, bias) = self.projection.split_at(self.projection.len() - 1);
        dot(w, representation) + bias[0]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafNode {
    pub depth: usize,
    /// Mean of the targets that reached the leaf (residuals when the
    /// residual path is on).
    pub value: f64,
    pub sample_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Split(SplitNode),
    Leaf(LeafNode),
}

impl Node {
    pub fn depth(&self) -> usize {
        match self {
            Node::Split(s) => s.depth,
            Node::Leaf(l) => l.depth,
        }
    }

    pub fn sample_count(&self) -> usize {
        match self {
            Node::Split(s) => s.sample_count,
            Node::Leaf(l) => l.sample_count,
        }
    }

    pub fn as_split(&self) -> Option<&SplitNode> {
        match self {
            Node::Split(s) => Some(s),
            Node::Leaf(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObliqueTree {
    pub input_dim: usize,
    pub lambda: f64,
    pub criteria: SplitCriteria,
    pub flags: VariantFlags,
    pub direction: SplitDirection,
    pub nodes: Vec<Node>,
}

/// One internal node visited while routing a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathStep {
    pub node: usize,
    pub score: f64,
    pub went_left: bool,
}

impl ObliqueTree {
    pub fn root(&self) -> &Node {
        &self.nodes[0]
    }

    pub fn n_internal(&self) -> usize {
        self.nodes.iter().filter(|n| n.as_split().is_some()).count()
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.len() - self.n_internal()
    }

    /// Deepest leaf depth actually realized (0 for a single leaf).
    pub fn realized_depth(&self) -> usize {
        self.nodes.iter().map(Node::depth).max().unwrap_or(0)
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                context: "prediction input",
                expected: self.input_dim,
                actual: x.len(),
            });
        }
        Ok(())
    }

    /// Routes `x` to a leaf, reporting every internal node on the way.
    /// Returns the leaf index and the sum of path scores.
    fn walk(&self, x: &[f64], mut visit: impl FnMut(PathStep)) -> (usize, f64) {
        let mut rep = x.to_vec();
        let mut acc = 0.0;
        let mut idx = 0;
        while let Node::Split(s) = &self.nodes[idx] {
            let score = s.score(&rep);
            acc += score;
            let went_left = score < s.threshold;
            visit(PathStep {
                node: idx,
                score,
                went_left,
            });
            if self.flags.concatenate {
                rep.push(score);
            }
            idx = if went_left { s.left } else { s.right };
        }
        (idx, acc)
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        let (leaf, path_sum) = self.walk(x, |_| {});
        let Node::Leaf(l) = &self.nodes[leaf] else {
            unreachable!("walk stops at a leaf")
        };
        Ok(if self.flags.residual_path {
            path_sum + l.value
        } else {
            l.value
        })
    }

    pub fn predict_batch(&self, x: &DenseMatrix) -> Result<Vec<f64>> {
        if x.cols() != self.input_dim {
            return Err(Error::DimensionMismatch {
                context: "prediction input",
                expected: self.input_dim,
                actual: x.cols(),
            });
        }
        x.iter_rows().map(|r| self.predict(r)).collect()
    }

    pub fn decision_path(&self, x: &[f64]) -> Result<Vec<PathStep>> {
        self.check_input(x)?;
        let mut steps = Vec::new();
        self.walk(x, |s| steps.push(s));
        Ok(steps)
    }

    /// Leaf index reached by `x`.
    pub fn leaf_index(&self, x: &[f64]) -> Result<usize> {
        self.check_input(x)?;
        Ok(self.walk(x, |_| {}).0)
    }
}
