//! Datasets: the in-memory representation, simulated generators, text
//! loaders, and train/test/fold assignment.

mod io;
mod manifest;
mod sim;
mod split;

pub use io::{csv_header, parse_csv, parse_csv_features, parse_csv_with, parse_libsvm, write_csv, CsvOptions, TargetColumn};
pub use manifest::{sha256_hex, DataFormat, Manifest, ManifestEntry};
pub use sim::{gen_sim, gen_sim1, gen_sim2, sim1_function, sim2_function, SimFunction, SIM_DIM};
pub use split::{kfold_indices, train_test_split, SplitAssignment};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{check_finite, DenseMatrix};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub name: String,
    pub source: String,
    pub seed: Option<u64>,
    pub noise_sigma: Option<f64>,
}

/// Dense feature matrix with targets. Simulated datasets also carry the
/// noise-free regression function values in `clean_targets`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: DenseMatrix,
    pub targets: Vec<f64>,
    pub clean_targets: Option<Vec<f64>>,
    pub meta: DatasetMeta,
}

impl Dataset {
    pub fn new(features: DenseMatrix, targets: Vec<f64>, meta: DatasetMeta) -> Result<Self> {
        if features.rows() != targets.len() {
            return Err(Error::DimensionMismatch {
                context: "dataset targets",
                expected: features.rows(),
                actual: targets.len(),
            });
        }
        check_finite(&targets, "dataset targets")?;
        Ok(Dataset {
            features,
            targets,
            clean_targets: None,
            meta,
        })
    }

    pub fn with_clean_targets(mut self, clean: Vec<f64>) -> Result<Self> {
        if clean.len() != self.targets.len() {
            return Err(Error::DimensionMismatch {
                context: "noise-free targets",
                expected: self.targets.len(),
                actual: clean.len(),
            });
        }
        check_finite(&clean, "noise-free targets")?;
        self.clean_targets = Some(clean);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    /// Targets used for scoring: noise-free values when the generator kept
    /// them, observed targets otherwise.
    pub fn evaluation_targets(&self) -> &[f64] {
        self.clean_targets.as_deref().unwrap_or(&self.targets)
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(indices),
            targets: indices.iter().map(|&i| self.targets[i]).collect(),
            clean_targets: self
                .clean_targets
                .as_ref()
                .map(|c| indices.iter().map(|&i| c[i]).collect()),
            meta: self.meta.clone(),
        }
    }

    /// Per-column min/max computed on `self`, for scaling other splits the
    /// same way. Constant columns map to zero.
    pub fn min_max_bounds(&self) -> Vec<(f64, f64)> {
        (0..self.dim())
            .map(|j| {
                self.features.iter_rows().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                    (lo.min(r[j]), hi.max(r[j]))
                })
            })
            .collect()
    }

    pub fn scaled(&self, bounds: &[(f64, f64)]) -> Result<Dataset> {
        if bounds.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "min-max bounds",
                expected: self.dim(),
                actual: bounds.len(),
            });
        }
        let mut data = Vec::with_capacity(self.len() * self.dim());
        for r in self.features.iter_rows() {
            for (v, &(lo, hi)) in r.iter().zip(bounds) {
                let span = hi - lo;
                data.push(if span > 0.0 { (v - lo) / span } else { 0.0 });
            }
        }
        Ok(Dataset {
            features: DenseMatrix::new(self.len(), self.dim(), data)?,
            ..self.clone()
        })
    }
}
