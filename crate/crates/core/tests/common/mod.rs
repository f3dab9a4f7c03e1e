//! Reference implementations used as oracles. They recompute everything
//! from scratch with the simplest algorithm available and share no code
//! with the library beyond its public types.
#![allow(dead_code)]

use fcodt::{Dataset, DatasetMeta, DenseMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_dataset(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Dataset {
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
    let y = rows
        .iter()
        .map(|r| r[0].abs() + r.iter().sum::<f64>().sin() + rng.random_range(-0.1..0.1))
        .collect();
    Dataset::new(DenseMatrix::from_rows(&rows).unwrap(), y, DatasetMeta::default()).unwrap()
}

/// Gaussian elimination with full pivoting on a dense square system.
pub fn solve_full_pivot(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let (mut pi, mut pj, mut best) = (k, k, 0.0);
        for (i, row) in a.iter().enumerate().skip(k) {
            for (j, v) in row.iter().enumerate().skip(k) {
                if v.abs() > best {
                    (pi, pj, best) = (i, j, v.abs());
                }
            }
        }
        if best == 0.0 {
            return None;
        }
        a.swap(k, pi);
        b.swap(k, pi);
        for row in a.iter_mut() {
            row.swap(k, pj);
        }
        perm.swap(k, pj);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut z = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| a[i][j] * z[j]).sum();
        z[i] = (b[i] - s) / a[i][i];
    }
    let mut x = vec![0.0; n];
    for (k, &p) in perm.iter().enumerate() {
        x[p] = z[k];
    }
    Some(x)
}

/// Ridge with an unpenalized intercept through the augmented normal
/// equations `[X 1]ᵀ[X 1] + diag(λ, …, λ, 0)`. Returns (weights, intercept).
pub fn ridge_oracle(rows: &[Vec<f64>], y: &[f64], lambda: f64) -> Option<(Vec<f64>, f64)> {
    let d = rows[0].len();
    let aug: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().copied().chain([1.0]).collect()).collect();
    let mut a = vec![vec![0.0; d + 1]; d + 1];
    let mut b = vec![0.0; d + 1];
    for (r, yi) in aug.iter().zip(y) {
        for i in 0..=d {
            b[i] += r[i] * yi;
            for j in 0..=d {
                a[i][j] += r[i] * r[j];
            }
        }
    }
    for (i, row) in a.iter_mut().enumerate().take(d) {
        row[i] += lambda;
    }
    let mut w = solve_full_pivot(a, b)?;
    let c = w.pop().unwrap();
    Some((w, c))
}

fn sse(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - m).powi(2)).sum()
}

fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo + (hi - lo) / 2.0;
    if m > lo {
        m
    } else {
        hi
    }
}

/// Every midpoint of adjacent distinct values, gains recomputed from
/// scratch; the first maximum wins.
pub fn brute_force_threshold(p: &[f64], y: &[f64], n_total: usize, min_leaf: usize, min_gain: f64) -> Option<(f64, f64)> {
    let mut sorted = p.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let parent = sse(y);
    let mut best: Option<(f64, f64)> = None;
    for w in sorted.windows(2) {
        let t = midpoint(w[0], w[1]);
        let l: Vec<f64> = (0..p.len()).filter(|&i| p[i] < t).map(|i| y[i]).collect();
        let r: Vec<f64> = (0..p.len()).filter(|&i| p[i] >= t).map(|i| y[i]).collect();
        if l.len() < min_leaf || r.len() < min_leaf {
            continue;
        }
        let gain = (parent - sse(&l) - sse(&r)) / n_total as f64;
        if best.is_none_or(|b| gain > b.1 * (1.0 + 1e-12) + 1e-15) {
            best = Some((t, gain));
        }
    }
    best.filter(|b| b.1 >= min_gain)
}

/// CART node of the exhaustive oracle, in breadth-first order.
#[derive(Debug, Clone, PartialEq)]
pub enum OracleNode {
    Split { feature: usize, threshold: f64, gain: f64 },
    Leaf { value: f64, count: usize },
}

/// Grows an axis-parallel regression tree by trying every (feature,
/// midpoint) pair at every node.
pub fn exhaustive_cart(
    rows: &[Vec<f64>],
    y: &[f64],
    max_depth: usize,
    min_split: usize,
    min_leaf: usize,
) -> Vec<OracleNode> {
    let n_total = y.len();
    let mut out = Vec::new();
    let mut queue = std::collections::VecDeque::from([((0..y.len()).collect::<Vec<usize>>(), 0usize)]);
    while let Some((idx, depth)) = queue.pop_front() {
        let ys: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
        let mut best: Option<(usize, f64, f64)> = None;
        if depth < max_depth && idx.len() >= min_split {
            for f in 0..rows[0].len() {
                let col: Vec<f64> = idx.iter().map(|&i| rows[i][f]).collect();
                if let Some((t, g)) = brute_force_threshold(&col, &ys, n_total, min_leaf, 0.0) {
                    if best.is_none_or(|b| g > b.2 * (1.0 + 1e-12) + 1e-15) {
                        best = Some((f, t, g));
                    }
                }
            }
        }
        match best {
            Some((feature, threshold, gain)) => {
                out.push(OracleNode::Split { feature, threshold, gain });
                let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| rows[i][feature] < threshold);
                queue.push_back((l, depth + 1));
                queue.push_back((r, depth + 1));
            }
            None => out.push(OracleNode::Leaf {
                value: ys.iter().sum::<f64>() / ys.len() as f64,
                count: ys.len(),
            }),
        }
    }
    out
}
