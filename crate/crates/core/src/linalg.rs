//! Dense row-major linear algebra: the pieces needed by the ridge split
//! solver and nothing more.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

pub(crate) fn check_finite(values: &[f64], context: &'static str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(context))
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl DenseMatrix {
    /// Builds a matrix from row-major data, rejecting non-finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                context: "matrix data",
                expected: rows * cols,
                actual: data.len(),
            });
        }
        check_finite(&data, "matrix")?;
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    context: "matrix row",
                    expected: cols,
                    actual: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.rows).map(move |i| self.row(i))
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn select_rows(&self, indices: &[usize]) -> DenseMatrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        DenseMatrix {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    /// Returns a copy with `column` appended as the last column.
    pub fn append_column(&self, column: &[f64]) -> Result<DenseMatrix> {
        if column.len() != self.rows {
            return Err(Error::DimensionMismatch {
                context: "appended column",
                expected: self.rows,
                actual: column.len(),
            });
        }
        check_finite(column, "appended column")?;
        let cols = self.cols + 1;
        let mut data = Vec::with_capacity(self.rows * cols);
        for (i, v) in column.iter().enumerate() {
            data.extend_from_slice(self.row(i));
            data.push(*v);
        }
        Ok(DenseMatrix {
            rows: self.rows,
            cols,
            data,
        })
    }

    pub fn drop_last_column(&self) -> DenseMatrix {
        assert!(self.cols > 0, "no column to drop");
        let cols = self.cols - 1;
        let mut data = Vec::with_capacity(self.rows * cols);
        for r in self.iter_rows() {
            data.extend_from_slice(&r[..cols]);
        }
        DenseMatrix {
            rows: self.rows,
            cols,
            data,
        }
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.get(i, j);
            }
        }
        t
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch {
                context: "matrix-vector product",
                expected: self.cols,
                actual: x.len(),
            });
        }
        Ok(self.iter_rows().map(|r| dot(r, x)).collect())
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                context: "matrix product",
                expected: self.cols,
                actual: other.rows,
            });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        Ok(out)
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Fitted ridge model. `weights` cover the feature columns; the intercept is
/// never penalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeSolution {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
}

impl RidgeSolution {
    #[inline]
    pub fn score(&self, row: &[f64]) -> f64 {
        dot(&self.weights, row) + self.intercept
    }
}

/// In-place lower Cholesky factor of a row-major `n × n` matrix. Fails with
/// the index of the first pivot that is not above `min_pivot`.
fn cholesky_in_place(a: &mut [f64], n: usize, min_pivot: f64) -> std::result::Result<(), (usize, f64)> {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > min_pivot) {
            return Err((j, d));
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    Ok(())
}

fn cholesky_solve(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut z = b.to_vec();
    for i in 0..n {
        let mut s = z[i];
        for k in 0..i {
            s -= l[i * n + k] * z[k];
        }
        z[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = z[i];
        for k in (i + 1)..n {
            s -= l[k * n + i] * z[k];
        }
        z[i] = s / l[i * n + i];
    }
    z
}

/// Solves `A x = b` for symmetric positive-definite `A` by Cholesky.
pub fn spd_solve(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::DimensionMismatch {
            context: "spd_solve: square matrix",
            expected: n,
            actual: a.cols(),
        });
    }
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            context: "spd_solve: right-hand side",
            expected: n,
            actual: b.len(),
        });
    }
    check_finite(b, "spd_solve right-hand side")?;
    let scale = (0..n).fold(0.0f64, |m, i| m.max(a.get(i, i).abs()));
    for i in 0..n {
        for j in 0..i {
            let (u, v) = (a.get(i, j), a.get(j, i));
            if (u - v).abs() > 1e-12 * scale.max(1.0) {
                return Err(Error::invalid(format!(
                    "spd_solve: matrix is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    let mut l = a.as_slice().to_vec();
    let min_pivot = n as f64 * f64::EPSILON * scale;
    cholesky_in_place(&mut l, n, min_pivot)
        .map_err(|(pivot, value)| Error::NotPositiveDefinite { pivot, value })?;
    Ok(cholesky_solve(&l, n, b))
}

/// Closed-form ridge regression through the regularized normal equations.
///
/// Minimizes `||y - Xw - c·1||² + λ||w||²`. With `fit_intercept` the
/// intercept `c` is unpenalized (solved by centering); without it `c = 0`.
/// At `λ = 0` a rank-deficient design yields [`Error::Singular`].
pub fn solve_ridge(x: &DenseMatrix, y: &[f64], lambda: f64, fit_intercept: bool) -> Result<RidgeSolution> {
    let (n, p) = (x.rows(), x.cols());
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            context: "solve_ridge targets",
            expected: n,
            actual: y.len(),
        });
    }
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::invalid(format!("ridge lambda must be finite and >= 0, got {lambda}")));
    }
    check_finite(y, "solve_ridge targets")?;

    let (x_mean, y_mean) = if fit_intercept {
        let mut m = vec![0.0; p];
        for r in x.iter_rows() {
            for (acc, v) in m.iter_mut().zip(r) {
                *acc += v;
            }
        }
        m.iter_mut().for_each(|v| *v /= n as f64);
        (m, y.iter().sum::<f64>() / n as f64)
    } else {
        (vec![0.0; p], 0.0)
    };

    // Upper triangle of the centered Gram matrix, then mirrored.
    let mut gram = vec![0.0; p * p];
    let mut rhs = vec![0.0; p];
    let mut centered = vec![0.0; p];
    for (r, &yi) in x.iter_rows().zip(y) {
        for (c, (v, m)) in centered.iter_mut().zip(r.iter().zip(&x_mean)) {
            *c = v - m;
        }
        let yc = yi - y_mean;
        for j in 0..p {
            let cj = centered[j];
            rhs[j] += cj * yc;
            let row = &mut gram[j * p..(j + 1) * p];
            for k in j..p {
                row[k] += cj * centered[k];
            }
        }
    }
    for j in 0..p {
        for k in 0..j {
            gram[j * p + k] = gram[k * p + j];
        }
        gram[j * p + j] += lambda;
    }

    let min_pivot = if lambda > 0.0 {
        0.0
    } else {
        let scale = (0..p).fold(0.0f64, |m, j| m.max(gram[j * p + j]));
        1e-10 * scale.max(f64::MIN_POSITIVE)
    };
    let weights = if p == 0 {
        Vec::new()
    } else {
        match cholesky_in_place(&mut gram, p, min_pivot) {
            Ok(()) => cholesky_solve(&gram, p, &rhs),
            Err((pivot, value)) if lambda > 0.0 => {
                return Err(Error::NotPositiveDefinite { pivot, value });
            }
            Err(_) => return Err(Error::Singular),
        }
    };
    let intercept = y_mean - dot(&x_mean, &weights);
    Ok(RidgeSolution {
        weights,
        intercept,
        lambda,
    })
}

/// Row-wise linear scores `w·x_i + c`.
pub fn predict_linear(model: &RidgeSolution, x: &DenseMatrix) -> Result<Vec<f64>> {
    if x.cols() != model.weights.len() {
        return Err(Error::DimensionMismatch {
            context: "predict_linear",
            expected: model.weights.len(),
            actual: x.cols(),
        });
    }
    Ok(x.iter_rows().map(|r| model.score(r)).collect())
}

#[cfg(test)]
pub(crate) mod oracle {
    /// Gaussian elimination with full pivoting. Deliberately unrelated to the
    /// Cholesky path it checks.
    pub fn solve_full_pivot(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut m: Vec<Vec<f64>> = a
            .iter()
            .zip(b)
            .map(|(r, v)| {
                let mut r = r.clone();
                r.push(*v);
                r
            })
            .collect();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (mut pi, mut pj, mut best) = (k, k, -1.0);
            for (i, row) in m.iter().enumerate().skip(k) {
                for (j, v) in row.iter().enumerate().take(n).skip(k) {
                    if v.abs() > best {
                        best = v.abs();
                        pi = i;
                        pj = j;
                    }
                }
            }
            m.swap(k, pi);
            for row in m.iter_mut() {
                row.swap(k, pj);
            }
            perm.swap(k, pj);
            for i in (k + 1)..n {
                let f = m[i][k] / m[k][k];
                for j in k..=n {
                    m[i][j] -= f * m[k][j];
                }
            }
        }
        let mut z = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = m[i][n];
            for j in (i + 1)..n {
                s -= m[i][j] * z[j];
            }
            z[i] = s / m[i][i];
        }
        let mut x = vec![0.0; n];
        for (k, &p) in perm.iter().enumerate() {
            x[p] = z[k];
        }
        x
    }

    /// Ridge with unpenalized intercept via the augmented normal equations
    /// over `[X, 1]`, solved by full-pivot elimination.
    pub fn ridge(x: &[Vec<f64>], y: &[f64], lambda: f64) -> (Vec<f64>, f64) {
        let p = x[0].len();
        let q = p + 1;
        let mut a = vec![vec![0.0; q]; q];
        let mut b = vec![0.0; q];
        for (r, yi) in x.iter().zip(y) {
            let mut z = r.clone();
            z.push(1.0);
            for i in 0..q {
                b[i] += z[i] * yi;
                for j in 0..q {
                    a[i][j] += z[i] * z[j];
                }
            }
        }
        for (i, row) in a.iter_mut().enumerate().take(p) {
            row[i] += lambda;
        }
        let sol = solve_full_pivot(&a, &b);
        (sol[..p].to_vec(), sol[p])
    }
}
