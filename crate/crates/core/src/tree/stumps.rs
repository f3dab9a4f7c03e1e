//! Orthonormal decision-stump diagnostics for residual-path trees.
//!
//! With the residual path on, the running sum of scores at an internal node
//! `t` is the node's fitted linear functional `g_t` of the original targets.
//! For each internal node the children's functionals (the running sum one
//! level down, or a ridge fit on the leaf's own rows when the child is a
//! leaf) are Gram–Schmidt-orthogonalized against `g_t` under the empirical
//! inner product `<u, v>_n = (1/n) Σ u(x_i) v(x_i)` and normalized. The root
//! functional contributes one more unit vector. In the near-OLS regime the
//! resulting columns are orthonormal and
//! `Σ_k <y, ψ_k>_n ψ_k` telescopes to the leaf-level linear fits.
//!
//! The model's own prediction replaces the leaf-level linear fit by
//! `g_parent + residual mean`, which is not an orthogonal projection of `y`;
//! the report therefore carries both deviations.

use crate::datasets::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{predict_linear, solve_ridge, DenseMatrix};

use super::{Node, ObliqueTree, SplitDirection};

/// Norms at or below this fraction of the target scale count as zero.
const DROP_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct StumpInfo {
    /// Internal node the stump belongs to; `None` for the root functional.
    pub node: Option<usize>,
    pub coefficient: f64,
    /// `(1/n)[Σ_t (y - g_t)² - Σ_t (y - g_children)²]` over the node's rows.
    pub linear_impurity_decrease: f64,
    /// Gain recorded by the split search (child-mean form on residuals).
    pub recorded_gain: f64,
}

#[derive(Debug, Clone)]
pub struct StumpBasis {
    /// `n × m`; column `k` is `ψ_k` on the training rows.
    pub stumps: DenseMatrix,
    pub coefficients: Vec<f64>,
    pub info: Vec<StumpInfo>,
    /// Internal nodes whose orthogonalized functional vanished.
    pub dropped: Vec<usize>,
    /// Leaf-level linear functional per training row.
    pub linear_output: Vec<f64>,
}

impl StumpBasis {
    /// Empirical Gram matrix `(1/n) ΨᵀΨ`.
    pub fn gram(&self) -> DenseMatrix {
        let (n, m) = (self.stumps.rows(), self.stumps.cols());
        let mut g = DenseMatrix::zeros(m, m);
        for r in self.stumps.iter_rows() {
            for a in 0..m {
                for b in a..m {
                    g.set(a, b, g.get(a, b) + r[a] * r[b]);
                }
            }
        }
        for a in 0..m {
            for b in a..m {
                let v = g.get(a, b) / n as f64;
                g.set(a, b, v);
                g.set(b, a, v);
            }
        }
        g
    }

    /// Largest entrywise distance of the Gram matrix from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        let g = self.gram();
        let m = g.rows();
        let mut worst: f64 = 0.0;
        for a in 0..m {
            for b in 0..m {
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((g.get(a, b) - target).abs());
            }
        }
        worst
    }

    /// `Σ_k <y, ψ_k>_n ψ_k(x_i)` for every training row.
    pub fn expansion(&self) -> Vec<f64> {
        self.stumps
            .iter_rows()
            .map(|r| r.iter().zip(&self.coefficients).map(|(p, c)| p * c).sum())
            .collect()
    }
}

struct Route {
    /// (node, running sum before the node, node score)
    steps: Vec<(usize, f64, f64)>,
    leaf: usize,
    representation: Vec<f64>,
}

fn route(model: &ObliqueTree, x: &[f64]) -> Route {
    let mut rep = x.to_vec();
    let mut acc = 0.0;
    let mut idx = 0;
    let mut steps = Vec::new();
    while let Node::Split(s) = &model.nodes[idx] {
        let score = s.score(&rep);
        steps.push((idx, acc, score));
        acc += score;
        rep.push(score);
        idx = if score < s.threshold { s.left } else { s.right };
    }
    Route {
        steps,
        leaf: idx,
        representation: rep,
    }
}

fn inner(u: &[f64], v: &[f64], n: usize) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() / n as f64
}

/// Builds the orthonormal stump basis of a fitted FC-ODT on its own
/// training data. Requires the residual path and concatenation to be on.
pub fn compute_stumps(model: &ObliqueTree, data: &Dataset) -> Result<StumpBasis> {
    if !(model.flags.residual_path && model.flags.concatenate) || model.direction != SplitDirection::Ridge {
        return Err(Error::invalid(
            "stump diagnostics need a ridge tree with concatenation and the residual path",
        ));
    }
    if data.dim() != model.input_dim {
        return Err(Error::DimensionMismatch {
            context: "stump diagnostics data",
            expected: model.input_dim,
            actual: data.dim(),
        });
    }
    let n = data.len();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let y = &data.targets;
    let routes: Vec<Route> = data.features.iter_rows().map(|r| route(model, r)).collect();
    let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);

    // Leaf-level linear functional per row.
    let mut linear_output = vec![0.0; n];
    if model.n_internal() == 0 {
        let mean = y.iter().sum::<f64>() / n as f64;
        linear_output.fill(mean);
    } else {
        for (leaf, node) in model.nodes.iter().enumerate() {
            if !matches!(node, Node::Leaf(_)) {
                continue;
            }
            let rows: Vec<usize> = (0..n).filter(|&i| routes[i].leaf == leaf).collect();
            if rows.is_empty() {
                continue;
            }
            let reps: Vec<Vec<f64>> = rows.iter().map(|&i| routes[i].representation.clone()).collect();
            let x = DenseMatrix::from_rows(&reps)?;
            let targets: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
            let fit = solve_ridge(&x, &targets, model.lambda, true)?;
            for (&i, v) in rows.iter().zip(predict_linear(&fit, &x)?) {
                linear_output[i] = v;
            }
        }
    }

    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut info = Vec::new();
    let mut dropped = Vec::new();

    // Root functional.
    let root_fn: Vec<f64> = match model.root() {
        Node::Split(_) => routes.iter().map(|r| r.steps[0].2).collect(),
        Node::Leaf(_) => linear_output.clone(),
    };
    let root_norm = inner(&root_fn, &root_fn, n).sqrt();
    if root_norm > DROP_TOLERANCE * scale {
        columns.push(root_fn.iter().map(|v| v / root_norm).collect());
        info.push(StumpInfo {
            node: None,
            coefficient: 0.0,
            linear_impurity_decrease: 0.0,
            recorded_gain: 0.0,
        });
    }

    for (t, node) in model.nodes.iter().enumerate() {
        let Node::Split(split) = node else { continue };
        let mut parent = vec![0.0; n];
        let mut child = vec![0.0; n];
        for (i, r) in routes.iter().enumerate() {
            let Some(pos) = r.steps.iter().position(|s| s.0 == t) else {
                continue;
            };
            let (_, before, score) = r.steps[pos];
            parent[i] = before + score;
            child[i] = match r.steps.get(pos + 1) {
                Some(&(_, before_child, child_score)) => before_child + child_score,
                None => linear_output[i],
            };
        }
        let pp = inner(&parent, &parent, n);
        let alpha = if pp > 0.0 { inner(&child, &parent, n) / pp } else { 0.0 };
        let u: Vec<f64> = child.iter().zip(&parent).map(|(c, p)| c - alpha * p).collect();
        let norm = inner(&u, &u, n).sqrt();

        let in_node = |i: usize| routes[i].steps.iter().any(|s| s.0 == t);
        let (mut sse_parent, mut sse_child) = (0.0, 0.0);
        for i in (0..n).filter(|&i| in_node(i)) {
            sse_parent += (y[i] - parent[i]).powi(2);
            sse_child += (y[i] - child[i]).powi(2);
        }
        if norm <= DROP_TOLERANCE * scale {
            dropped.push(t);
            continue;
        }
        columns.push(u.iter().map(|v| v / norm).collect());
        info.push(StumpInfo {
            node: Some(t),
            coefficient: 0.0,
            linear_impurity_decrease: (sse_parent - sse_child) / n as f64,
            recorded_gain: split.gain,
        });
    }

    let m = columns.len();
    let mut data_rm = Vec::with_capacity(n * m);
    for i in 0..n {
        data_rm.extend(columns.iter().map(|c| c[i]));
    }
    let coefficients: Vec<f64> = columns.iter().map(|c| inner(y, c, n)).collect();
    for (inf, c) in info.iter_mut().zip(&coefficients) {
        inf.coefficient = *c;
    }
    Ok(StumpBasis {
        stumps: DenseMatrix::new(n, m, data_rm)?,
        coefficients,
        info,
        dropped,
        linear_output,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionReport {
    /// `max_i |h(x_i) - Σ_k <y, ψ_k>_n ψ_k(x_i)|` with `h` the model's
    /// prediction.
    pub max_abs_deviation: f64,
    /// Same, against the leaf-level linear functional.
    pub linear_output_deviation: f64,
    /// Largest entrywise departure of the stump Gram matrix from identity.
    pub orthonormality_error: f64,
    /// Largest relative gap between `<y, ψ_t>²` and the node's linear
    /// impurity decrease.
    pub impurity_identity_error: f64,
    /// `max_i |y_i|`, the scale for relative tolerances.
    pub target_scale: f64,
    pub lambda: f64,
}

impl ExpansionReport {
    pub fn relative_deviation(&self) -> f64 {
        self.max_abs_deviation / self.target_scale
    }
}

/// Checks how well the stump expansion reconstructs the fit on training data.
pub fn verify_orthogonal_expansion(model: &ObliqueTree, data: &Dataset) -> Result<ExpansionReport> {
    let basis = compute_stumps(model, data)?;
    let expansion = basis.expansion();
    let predictions = model.predict_batch(&data.features)?;
    let max_dev = |reference: &[f64]| {
        reference
            .iter()
            .zip(&expansion)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    };
    let impurity_identity_error = basis
        .info
        .iter()
        .filter(|s| s.node.is_some())
        .map(|s| {
            let sq = s.coefficient * s.coefficient;
            (sq - s.linear_impurity_decrease).abs() / s.linear_impurity_decrease.abs().max(f64::MIN_POSITIVE)
        })
        .fold(0.0, f64::max);
    Ok(ExpansionReport {
        max_abs_deviation: max_dev(&predictions),
        linear_output_deviation: max_dev(&basis.linear_output),
        orthonormality_error: basis.orthonormality_error(),
        impurity_identity_error,
        target_scale: data.targets.iter().fold(0.0f64, |m, v| m.max(v.abs())),
        lambda: model.lambda,
    })
}
