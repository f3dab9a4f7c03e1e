use crate::error::{Error, Result};
use crate::linalg::{predict_linear, solve_ridge, DenseMatrix, RidgeSolution};

use super::SplitCriteria;

/// Best threshold on a 1-D score and its impurity decrease.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdChoice {
    pub threshold: f64,
    pub gain: f64,
}

/// Midpoint of two adjacent distinct sorted scores, nudged so that `lo`
/// always routes left under `s < threshold`.
#[inline]
pub fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo + (hi - lo) / 2.0;
    if m > lo {
        m
    } else {
        hi
    }
}

/// Scans every midpoint between adjacent distinct sorted projections and
/// returns the one with the largest MSE impurity decrease, normalized by
/// `n_total`. Both sides must keep `min_samples_leaf` points; ties go to the
/// smallest threshold. `None` when no candidate qualifies or the best gain
/// is below `min_gain`.
pub fn best_threshold(
    projections: &[f64],
    y: &[f64],
    n_total: usize,
    criteria: &SplitCriteria,
) -> Result<Option<ThresholdChoice>> {
    let n = projections.len();
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            context: "best_threshold targets",
            expected: n,
            actual: y.len(),
        });
    }
    if n < 2 {
        return Ok(None);
    }
    if n_total < n {
        return Err(Error::invalid(format!("n_total ({n_total}) is smaller than the node size ({n})")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by(|&a, &b| projections[a].total_cmp(&projections[b]).then(a.cmp(&b)));

    let mean = y.iter().sum::<f64>() / n as f64;
    let min_leaf = criteria.min_samples_leaf.max(1);
    let nf = n as f64;
    let mut left_sum = 0.0;
    let mut best: Option<ThresholdChoice> = None;
    for k in 1..n {
        // Left child holds the first k sorted points.
        left_sum += y[order[k - 1]] - mean;
        let (lo, hi) = (projections[order[k - 1]], projections[order[k]]);
        if k < min_leaf || n - k < min_leaf || !(lo < hi) {
            continue;
        }
        let (nl, nr) = (k as f64, (n - k) as f64);
        // SSE(parent) - SSE(left) - SSE(right) = S_L² · n / (n_L · n_R)
        // with S_L the centered left sum.
        let gain = left_sum * left_sum * nf / (nl * nr) / n_total as f64;
        if best.is_none_or(|b| gain > b.gain) {
            best = Some(ThresholdChoice {
                threshold: midpoint(lo, hi),
                gain,
            });
        }
    }
    Ok(best.filter(|b| b.gain >= criteria.min_gain))
}

/// Outcome of a successful node split.
#[derive(Debug, Clone)]
pub struct SplitResult {
    /// Weights over the node's features followed by the bias.
    pub projection: Vec<f64>,
    pub threshold: f64,
    pub gain: f64,
    /// Score of every node row under `projection`.
    pub scores: Vec<f64>,
    pub left: Vec<usize>,
    pub right: Vec<usize>,
}

impl SplitResult {
    fn from_scores(projection: Vec<f64>, scores: Vec<f64>, choice: ThresholdChoice) -> Self {
        let (left, right) = (0..scores.len()).partition(|&i| scores[i] < choice.threshold);
        SplitResult {
            projection,
            threshold: choice.threshold,
            gain: choice.gain,
            scores,
            left,
            right,
        }
    }
}

fn check_node_size(rows: usize, y_len: usize, criteria: &SplitCriteria) -> Result<()> {
    if rows != y_len {
        return Err(Error::DimensionMismatch {
            context: "node targets",
            expected: rows,
            actual: y_len,
        });
    }
    if rows < criteria.min_samples_split {
        return Err(Error::invalid(format!(
            "node has {rows} rows, fewer than min_samples_split = {}",
            criteria.min_samples_split
        )));
    }
    Ok(())
}

/// Ridge direction on the node's (possibly concatenated) features, then the
/// best threshold along it.
pub fn find_oblique_split(
    x: &DenseMatrix,
    y: &[f64],
    lambda: f64,
    n_total: usize,
    criteria: &SplitCriteria,
) -> Result<Option<SplitResult>> {
    check_node_size(x.rows(), y.len(), criteria)?;
    let ridge = solve_ridge(x, y, lambda, true)?;
    let scores = predict_linear(&ridge, x)?;
    let Some(choice) = best_threshold(&scores, y, n_total, criteria)? else {
        return Ok(None);
    };
    let RidgeSolution {
        mut weights, intercept, ..
    } = ridge;
    weights.push(intercept);
    Ok(Some(SplitResult::from_scores(weights, scores, choice)))
}

/// Exhaustive axis-parallel search: the best threshold of every column,
/// keeping the largest gain (ties: lowest column, then smallest threshold).
pub fn find_axis_split(
    x: &DenseMatrix,
    y: &[f64],
    n_total: usize,
    criteria: &SplitCriteria,
) -> Result<Option<SplitResult>> {
    check_node_size(x.rows(), y.len(), criteria)?;
    let mut best: Option<(usize, ThresholdChoice)> = None;
    for j in 0..x.cols() {
        let col = x.column(j);
        if let Some(c) = best_threshold(&col, y, n_total, criteria)? {
            if best.is_none_or(|(_, b)| c.gain > b.gain) {
                best = Some((j, c));
            }
        }
    }
    Ok(best.map(|(j, choice)| {
        let mut projection = vec![0.0; x.cols() + 1];
        projection[j] = 1.0;
        SplitResult::from_scores(projection, x.column(j), choice)
    }))
}
