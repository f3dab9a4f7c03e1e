use std::collections::VecDeque;

use crate::datasets::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{check_finite, DenseMatrix};

use super::split::{find_axis_split, find_oblique_split, SplitResult};
use super::{LeafNode, Node, ObliqueTree, SplitCriteria, SplitDirection, SplitNode, VariantFlags};

/// Split search used by the growth loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Splitter {
    Ridge { lambda: f64 },
    Axis,
}

impl Splitter {
    fn find(&self, x: &DenseMatrix, y: &[f64], n_total: usize, c: &SplitCriteria) -> Result<Option<SplitResult>> {
        match *self {
            Splitter::Ridge { lambda } => find_oblique_split(x, y, lambda, n_total, c),
            Splitter::Axis => find_axis_split(x, y, n_total, c),
        }
    }
}

struct Pending {
    node: usize,
    depth: usize,
    features: DenseMatrix,
    targets: Vec<f64>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Grows a tree breadth-first. At each node that passes the eligibility
/// gate the splitter proposes a projection; when one is found its scores
/// are optionally appended as a feature column and subtracted from the
/// targets before the rows are routed by `score < threshold`. Anything else
/// becomes a leaf holding the mean of the targets that reached it.
pub fn fit_tree(
    data: &Dataset,
    splitter: Splitter,
    criteria: &SplitCriteria,
    flags: VariantFlags,
) -> Result<ObliqueTree> {
    criteria.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if data.dim() == 0 {
        return Err(Error::invalid("dataset has no feature columns"));
    }
    check_finite(data.features.as_slice(), "training features")?;
    check_finite(&data.targets, "training targets")?;
    let (lambda, direction) = match splitter {
        Splitter::Ridge { lambda } => {
            if !(lambda >= 0.0) || !lambda.is_finite() {
                return Err(Error::invalid(format!("lambda must be finite and >= 0, got {lambda}")));
            }
            (lambda, SplitDirection::Ridge)
        }
        Splitter::Axis => (0.0, SplitDirection::AxisParallel),
    };

    let n_total = data.len();
    let mut nodes: Vec<Option<Node>> = vec![None];
    let mut queue = VecDeque::from([Pending {
        node: 0,
        depth: 0,
        features: data.features.clone(),
        targets: data.targets.clone(),
    }]);

    while let Some(p) = queue.pop_front() {
        let n = p.targets.len();
        let eligible = p.depth < criteria.max_depth && n >= criteria.min_samples_split;
        let split = if eligible {
            splitter.find(&p.features, &p.targets, n_total, criteria)?
        } else {
            None
        };
        let Some(split) = split else {
            nodes[p.node] = Some(Node::Leaf(LeafNode {
                depth: p.depth,
                value: mean(&p.targets),
                sample_count: n,
            }));
            continue;
        };

        let targets = if flags.residual_path {
            p.targets.iter().zip(&split.scores).map(|(y, s)| y - s).collect()
        } else {
            p.targets
        };
        let features = if flags.concatenate {
            p.features.append_column(&split.scores)?
        } else {
            p.features
        };
        let (left, right) = (nodes.len(), nodes.len() + 1);
        nodes.push(None);
        nodes.push(None);
        for (child, rows) in [(left, &split.left), (right, &split.right)] {
            queue.push_back(Pending {
                node: child,
                depth: p.depth + 1,
                features: features.select_rows(rows),
                targets: rows.iter().map(|&i| targets[i]).collect(),
            });
        }
        nodes[p.node] = Some(Node::Split(SplitNode {
            depth: p.depth,
            projection: split.projection,
            threshold: split.threshold,
            gain: split.gain,
            left,
            right,
            sample_count: n,
        }));
    }

    Ok(ObliqueTree {
        input_dim: data.dim(),
        lambda,
        criteria: *criteria,
        flags,
        direction,
        nodes: nodes.into_iter().map(|n| n.expect("every allocated node is filled")).collect(),
    })
}

/// FC-ODT growth with explicit variant flags.
pub fn fit_fc_odt(data: &Dataset, lambda: f64, criteria: &SplitCriteria, flags: VariantFlags) -> Result<ObliqueTree> {
    fit_tree(data, Splitter::Ridge { lambda }, criteria, flags)
}
