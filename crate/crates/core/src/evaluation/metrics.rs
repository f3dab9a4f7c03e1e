use crate::error::{Error, Result};

fn check_lengths(pred: &[f64], target: &[f64], min: usize) -> Result<()> {
    if pred.len() != target.len() {
        return Err(Error::DimensionMismatch {
            context: "metric inputs",
            expected: target.len(),
            actual: pred.len(),
        });
    }
    if target.len() < min {
        return Err(Error::invalid(format!("metric needs at least {min} values, got {}", target.len())));
    }
    Ok(())
}

/// Mean squared error.
pub fn mse(pred: &[f64], target: &[f64]) -> Result<f64> {
    check_lengths(pred, target, 1)?;
    Ok(pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / target.len() as f64)
}

/// Coefficient of determination `1 - SS_res / SS_total`.
pub fn r2(pred: &[f64], target: &[f64]) -> Result<f64> {
    check_lengths(pred, target, 2)?;
    let mean = target.iter().sum::<f64>() / target.len() as f64;
    let ss_total: f64 = target.iter().map(|t| (t - mean) * (t - mean)).sum();
    if ss_total == 0.0 {
        return Err(Error::UndefinedR2);
    }
    let ss_res: f64 = pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(1.0 - ss_res / ss_total)
}
