//! Dense symmetric linear algebra: compensated accumulation, sample
//! covariance, and a deterministic full symmetric eigendecomposition.

use ndarray::{Array1, Array2, Axis};
use rayon::prelude::*;

use crate::error::{Error, Result};

mod eigen;

pub use eigen::{symmetric_eigen, EigenSystem, SYMMETRY_REL_TOL};

/// A d-dimensional real signal (realization, mean, latent vector, ...).
pub type Vector = Array1<f64>;
/// Dense row-major real matrix.
pub type Matrix = Array2<f64>;

/// Neumaier compensated summation. Keeps accumulation error O(eps)
/// independent of the number of terms, so n = 1e5 ensembles do not lose
/// trailing-eigenvalue accuracy to round-off drift.
pub fn kahan_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for x in values {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Compensated dot product of two equal-length slices.
pub fn kahan_dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    kahan_sum(a.iter().zip(b).map(|(x, y)| x * y))
}

/// Ensemble mean over rows: (1/n) sum_k y_k, compensated per column.
pub fn row_mean(data: &Matrix) -> Result<Vector> {
    let (n, d) = data.dim();
    if n == 0 {
        return Err(Error::EmptyEnsemble);
    }
    let mut sums = vec![0.0f64; d];
    let mut comps = vec![0.0f64; d];
    for row in data.axis_iter(Axis(0)) {
        for (j, &x) in row.iter().enumerate() {
            let t = sums[j] + x;
            if sums[j].abs() >= x.abs() {
                comps[j] += (sums[j] - t) + x;
            } else {
                comps[j] += (x - t) + sums[j];
            }
            sums[j] = t;
        }
    }
    let inv = 1.0 / n as f64;
    Ok(Array1::from_iter(
        sums.iter().zip(&comps).map(|(s, c)| (s + c) * inv),
    ))
}

/// Sample covariance S = (1/n) sum_k (y_k - mu)(y_k - mu)^T over the rows of
/// `data`. The divisor is n, not n - 1. Symmetric by construction; each entry
/// is a single compensated sum over k, so the result does not depend on how
/// the work is partitioned across threads.
pub fn sample_covariance(data: &Matrix, mean: &Vector) -> Result<Matrix> {
    let (n, d) = data.dim();
    if n == 0 {
        return Err(Error::EmptyEnsemble);
    }
    if mean.len() != d {
        return Err(Error::DimensionMismatch {
            context: "sample_covariance mean length",
            expected: d,
            actual: mean.len(),
        });
    }

    // Deviations stored transposed (d x n) so each covariance entry reads two
    // contiguous rows.
    let mut dev_t = Array2::<f64>::zeros((d, n));
    for (k, row) in data.axis_iter(Axis(0)).enumerate() {
        for j in 0..d {
            dev_t[[j, k]] = row[j] - mean[j];
        }
    }

    let mut cov_flat = vec![0.0f64; d * d];
    let inv_n = 1.0 / n as f64;
    cov_flat.par_chunks_mut(d).enumerate().for_each(|(i, out_row)| {
        let a = dev_t.row(i);
        let a = a.as_slice().expect("dev_t rows are contiguous");
        for (j, slot) in out_row.iter_mut().enumerate().skip(i) {
            let b = dev_t.row(j);
            let b = b.as_slice().expect("dev_t rows are contiguous");
            *slot = kahan_dot(a, b) * inv_n;
        }
    });
    let mut cov = Array2::from_shape_vec((d, d), cov_flat).expect("shape matches allocation");
    // Mirror the strict upper triangle.
    for i in 0..d {
        for j in 0..i {
            cov[[i, j]] = cov[[j, i]];
        }
    }

    if cov.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite {
            context: "sample covariance (input data may contain NaN or infinity)",
        });
    }
    Ok(cov)
}
