use serde::{Deserialize, Serialize};

use crate::datasets::{kfold_indices, Dataset};
use crate::error::{Error, Result};
use crate::tree::SplitCriteria;

use super::metrics::mse;
use super::Method;

/// Cross-validation outcome for one λ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub lambda: f64,
    /// Validation MSE per fold; `None` where the fit failed.
    pub fold_mse: Vec<Option<f64>>,
    /// Mean over folds, `None` if any fold failed.
    pub mean_mse: Option<f64>,
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearch {
    pub best_lambda: f64,
    pub table: Vec<CvRow>,
}

/// K-fold cross-validated choice of λ from `grid`. The winner minimizes the
/// mean validation MSE; ties go to the smaller λ. A λ whose fit fails on any
/// fold is recorded in the table and excluded.
pub fn grid_search_lambda(
    data: &Dataset,
    method: Method,
    criteria: &SplitCriteria,
    grid: &[f64],
    folds: usize,
    seed: u64,
) -> Result<GridSearch> {
    if grid.is_empty() {
        return Err(Error::invalid("lambda grid is empty"));
    }
    if grid.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
        return Err(Error::invalid("lambda grid values must be finite and >= 0"));
    }
    if folds < 2 {
        return Err(Error::invalid("grid search needs at least 2 folds"));
    }
    let assignments = kfold_indices(data.len(), folds, seed)?;
    let splits: Vec<(Dataset, Dataset)> = assignments
        .iter()
        .map(|a| (data.subset(&a.train_indices), data.subset(&a.test_indices)))
        .collect();

    let mut table = Vec::with_capacity(grid.len());
    for &lambda in grid {
        let mut fold_mse = Vec::with_capacity(folds);
        let mut failures = Vec::new();
        for (train, valid) in &splits {
            let score = method
                .fit(train, lambda, criteria)
                .and_then(|m| m.predict_batch(&valid.features))
                .and_then(|p| mse(&p, &valid.targets));
            match score {
                Ok(v) => fold_mse.push(Some(v)),
                Err(e) => {
                    failures.push(e.to_string());
                    fold_mse.push(None);
                }
            }
        }
        let mean_mse = if failures.is_empty() {
            Some(fold_mse.iter().flatten().sum::<f64>() / folds as f64)
        } else {
            None
        };
        table.push(CvRow {
            lambda,
            fold_mse,
            mean_mse,
            failures,
        });
    }

    let best = table
        .iter()
        .filter_map(|r| r.mean_mse.map(|m| (r.lambda, m)))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.total_cmp(&b.0)))
        .ok_or_else(|| Error::invalid(format!("every lambda failed: {}", table[0].failures.join("; "))))?;
    Ok(GridSearch {
        best_lambda: best.0,
        table,
    })
}
