use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Dataset, DatasetMeta};
use crate::linalg::DenseMatrix;

pub const SIM_DIM: usize = 10;
const BOX: f64 = 3.0;

/// Index groups of the five ridge terms shared by both simulated functions
/// (zero-based).
const RIDGES: [&[usize]; 5] = [&[0], &[1, 2], &[3, 4, 5], &[6, 7, 8, 9], &[0, 2, 4, 6, 8]];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimFunction {
    Sim1,
    Sim2,
}

impl SimFunction {
    pub fn name(self) -> &'static str {
        match self {
            SimFunction::Sim1 => "sim1",
            SimFunction::Sim2 => "sim2",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "sim1" => Some(SimFunction::Sim1),
            "sim2" => Some(SimFunction::Sim2),
            _ => None,
        }
    }

    pub fn eval(self, x: &[f64]) -> f64 {
        match self {
            SimFunction::Sim1 => sim1_function(x),
            SimFunction::Sim2 => sim2_function(x),
        }
    }
}

fn ridge_means(x: &[f64]) -> impl Iterator<Item = f64> + '_ {
    RIDGES
        .iter()
        .map(move |g| g.iter().map(|&j| x[j]).sum::<f64>() / g.len() as f64)
}

/// Sum of ReLUs over the five averaged ridge directions.
pub fn sim1_function(x: &[f64]) -> f64 {
    ridge_means(x).map(|z| z.max(0.0)).sum()
}

/// Sum of exponentials over the five averaged ridge directions.
pub fn sim2_function(x: &[f64]) -> f64 {
    ridge_means(x).map(f64::exp).sum()
}

/// Draws `n` rows with `x ~ U[-3, 3]^10` and `y = f(x) + σ·z`.
///
/// Rows are generated one at a time (ten uniforms, then one standard normal),
/// so a draw of `n` rows is a prefix of any larger draw with the same seed.
pub fn gen_sim(func: SimFunction, n: usize, sigma: f64, seed: u64) -> Dataset {
    assert!(sigma >= 0.0 && sigma.is_finite(), "noise sigma must be finite and >= 0");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(n * SIM_DIM);
    let mut targets = Vec::with_capacity(n);
    let mut clean = Vec::with_capacity(n);
    for _ in 0..n {
        let start = data.len();
        for _ in 0..SIM_DIM {
            data.push(rng.random_range(-BOX..BOX));
        }
        let f = func.eval(&data[start..]);
        let z: f64 = rng.sample(StandardNormal);
        clean.push(f);
        targets.push(f + sigma * z);
    }
    let features = DenseMatrix::new(n, SIM_DIM, data).expect("generator produces finite values");
    let meta = DatasetMeta {
        name: func.name().to_string(),
        source: "simulated".to_string(),
        seed: Some(seed),
        noise_sigma: Some(sigma),
    };
    Dataset::new(features, targets, meta)
        .and_then(|d| d.with_clean_targets(clean))
        .expect("generator produces consistent shapes")
}

pub fn gen_sim1(n: usize, sigma: f64, seed: u64) -> Dataset {
    gen_sim(SimFunction::Sim1, n, sigma, seed)
}

pub fn gen_sim2(n: usize, sigma: f64, seed: u64) -> Dataset {
    gen_sim(SimFunction::Sim2, n, sigma, seed)
}
