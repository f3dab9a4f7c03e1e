use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Disjoint train/test index lists covering `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitAssignment {
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

impl SplitAssignment {
    pub fn is_partition_of(&self, n: usize) -> bool {
        let mut seen = vec![false; n];
        for &i in self.train_indices.iter().chain(&self.test_indices) {
            if i >= n || seen[i] {
                return false;
            }
            seen[i] = true;
        }
        seen.into_iter().all(|s| s)
    }
}

fn shuffled(n: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    idx
}

/// Shuffles by `seed` and sends the first `⌈n·fraction⌉` rows to training
/// (kept within `1..n` so neither side is empty).
pub fn train_test_split(n: usize, train_fraction: f64, seed: u64) -> Result<SplitAssignment> {
    if n < 2 {
        return Err(Error::invalid(format!("train/test split needs at least 2 rows, got {n}")));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid(format!("train fraction must lie in (0, 1), got {train_fraction}")));
    }
    let idx = shuffled(n, seed);
    let n_train = ((n as f64 * train_fraction).ceil() as usize).clamp(1, n - 1);
    Ok(SplitAssignment {
        train_indices: idx[..n_train].to_vec(),
        test_indices: idx[n_train..].to_vec(),
    })
}

/// `k` folds with sizes differing by at most one; fold `i` is the test side
/// of the `i`-th assignment.
pub fn kfold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<SplitAssignment>> {
    if k < 2 || k > n {
        return Err(Error::invalid(format!("k-fold needs 2 <= k <= n, got k = {k}, n = {n}")));
    }
    let idx = shuffled(n, seed);
    let (base, extra) = (n / k, n % k);
    let mut bounds = Vec::with_capacity(k + 1);
    bounds.push(0);
    for f in 0..k {
        bounds.push(bounds[f] + base + usize::from(f < extra));
    }
    Ok((0..k)
        .map(|f| {
            let (lo, hi) = (bounds[f], bounds[f + 1]);
            SplitAssignment {
                train_indices: idx[..lo].iter().chain(&idx[hi..]).copied().collect(),
                test_indices: idx[lo..hi].to_vec(),
            }
        })
        .collect())
}
