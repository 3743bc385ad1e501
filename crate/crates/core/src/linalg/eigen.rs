//! Full symmetric eigendecomposition via Householder tridiagonalization and
//! implicit-shift QL, with a deterministic ordering and sign convention so
//! that identical input bits always produce identical output bits.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::linalg::{kahan_sum, Matrix, Vector};

/// Symmetry precheck: |a_ij - a_ji| must not exceed this times max|a|.
pub const SYMMETRY_REL_TOL: f64 = 1e-10;

/// QL iteration cap per eigenvalue.
const MAX_QL_ITER: usize = 48;

/// Eigenvalues (descending) paired with orthonormal eigenvector columns.
///
/// Conventions: each column is scaled so its largest-magnitude entry is
/// non-negative, and bit-equal eigenvalues are ordered by lexicographically
/// descending comparison of the normalized columns.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub eigenvalues: Vector,
    pub eigenvectors: Matrix,
}

impl EigenSystem {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Sum of eigenvalues; equals trace of the source matrix up to round-off.
    pub fn trace(&self) -> f64 {
        kahan_sum(self.eigenvalues.iter().copied())
    }
}

/// Decompose a symmetric matrix into all d eigenpairs.
///
/// The input must be square and symmetric within [`SYMMETRY_REL_TOL`]
/// (relative to its largest entry); it is averaged with its transpose before
/// decomposition so round-off asymmetry cannot leak into the result.
pub fn symmetric_eigen(s: &Matrix) -> Result<EigenSystem> {
    let (rows, cols) = s.dim();
    if rows != cols {
        return Err(Error::DimensionMismatch {
            context: "symmetric_eigen column count",
            expected: rows,
            actual: cols,
        });
    }
    let n = rows;
    if n == 0 {
        return Err(Error::DimensionMismatch {
            context: "symmetric_eigen dimension",
            expected: 1,
            actual: 0,
        });
    }

    let mut amax = 0.0f64;
    for &x in s.iter() {
        if !x.is_finite() {
            return Err(Error::NonFinite {
                context: "symmetric_eigen input",
            });
        }
        amax = amax.max(x.abs());
    }
    let sym_tol = SYMMETRY_REL_TOL * amax;
    for i in 0..n {
        for j in (i + 1)..n {
            let diff = (s[[i, j]] - s[[j, i]]).abs();
            if diff > sym_tol {
                return Err(Error::NotSymmetric { i, j, diff, tol: sym_tol });
            }
        }
    }

    // Work on the symmetrized copy in a flat row-major buffer.
    let mut v = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..n {
            v[i * n + j] = 0.5 * (s[[i, j]] + s[[j, i]]);
        }
    }
    let mut diag = vec![0.0f64; n];
    let mut off = vec![0.0f64; n];

    tred2(&mut v, &mut diag, &mut off, n);
    tql2(&mut v, &mut diag, &mut off, n)?;

    // Sign convention: largest-|entry| component non-negative. The first
    // maximal entry decides when several entries tie in magnitude.
    for col in 0..n {
        let mut best = 0usize;
        let mut best_abs = -1.0f64;
        for row in 0..n {
            let a = v[row * n + col].abs();
            if a > best_abs {
                best_abs = a;
                best = row;
            }
        }
        if v[best * n + col] < 0.0 {
            for row in 0..n {
                v[row * n + col] = -v[row * n + col];
            }
        }
    }

    // Order: eigenvalues descending; bit-equal values broken by
    // lexicographically descending columns (deterministic, total).
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by(|&a, &b| {
        match diag[b].partial_cmp(&diag[a]).expect("finite eigenvalues") {
            std::cmp::Ordering::Equal => {
                for row in 0..n {
                    let (x, y) = (v[row * n + a], v[row * n + b]);
                    if x != y {
                        return y.partial_cmp(&x).expect("finite eigenvectors");
                    }
                }
                std::cmp::Ordering::Equal
            }
            other => other,
        }
    });

    let eigenvalues = Array1::from_iter(order.iter().map(|&i| diag[i]));
    let mut eigenvectors = Array2::<f64>::zeros((n, n));
    for (new_col, &old_col) in order.iter().enumerate() {
        for row in 0..n {
            eigenvectors[[row, new_col]] = v[row * n + old_col];
        }
    }
    Ok(EigenSystem { eigenvalues, eigenvectors })
}

/// Householder reduction to symmetric tridiagonal form, accumulating the
/// orthogonal transformation in `v` (EISPACK tred2 lineage).
fn tred2(v: &mut [f64], d: &mut [f64], e: &mut [f64], n: usize) {
    for j in 0..n {
        d[j] = v[(n - 1) * n + j];
    }

    for i in (1..n).rev() {
        let mut scale = 0.0f64;
        let mut h = 0.0f64;
        for item in d.iter().take(i) {
            scale += item.abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1) * n + j];
                v[i * n + j] = 0.0;
                v[j * n + i] = 0.0;
            }
        } else {
            for dk in &mut d[..i] {
                *dk /= scale;
                h += *dk * *dk;
            }
            let f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            e[..i].fill(0.0);

            for j in 0..i {
                let f = d[j];
                v[j * n + i] = f;
                let mut g = e[j] + v[j * n + j] * f;
                for k in (j + 1)..i {
                    g += v[k * n + j] * d[k];
                    e[k] += v[k * n + j] * f;
                }
                e[j] = g;
            }
            let mut f = 0.0f64;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                let f = d[j];
                let g = e[j];
                for k in j..i {
                    v[k * n + j] -= f * e[k] + g * d[k];
                }
                d[j] = v[(i - 1) * n + j];
                v[i * n + j] = 0.0;
            }
        }
        d[i] = h;
    }

    // Accumulate the Householder transformations.
    for i in 0..n.saturating_sub(1) {
        v[(n - 1) * n + i] = v[i * n + i];
        v[i * n + i] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[k * n + i + 1] / h;
            }
            for j in 0..=i {
                let mut g = 0.0f64;
                for k in 0..=i {
                    g += v[k * n + i + 1] * v[k * n + j];
                }
                for k in 0..=i {
                    v[k * n + j] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[k * n + i + 1] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[(n - 1) * n + j];
        v[(n - 1) * n + j] = 0.0;
    }
    v[(n - 1) * n + n - 1] = 1.0;
    e[0] = 0.0;
}

/// Implicit-shift QL iteration on the tridiagonal (d, e), rotations applied
/// to the accumulated columns of `v` (EISPACK tql2 lineage).
fn tql2(v: &mut [f64], d: &mut [f64], e: &mut [f64], n: usize) -> Result<()> {
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let eps = f64::EPSILON;
    let mut shift = 0.0f64;
    let mut tst1 = 0.0f64;

    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }

        if m > l {
            let mut iter = 0usize;
            loop {
                iter += 1;
                if iter > MAX_QL_ITER {
                    return Err(Error::EigenNoConvergence {
                        iterations: MAX_QL_ITER,
                        residual: e[l].abs(),
                    });
                }

                // Wilkinson-style implicit shift from the leading 2x2.
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for item in d.iter_mut().take(n).skip(l + 2) {
                    *item -= h;
                }
                shift += h;

                // One QL sweep with plane rotations, bottom-up.
                p = d[m];
                let mut c = 1.0f64;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0f64;
                let mut s2 = 0.0f64;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);

                    for k in 0..n {
                        let t = v[k * n + i + 1];
                        v[k * n + i + 1] = s * v[k * n + i] + c * t;
                        v[k * n + i] = c * v[k * n + i] - s * t;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;

                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += shift;
        e[l] = 0.0;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn assert_orthonormal(v: &Matrix, tol: f64) {
        let n = v.nrows();
        let gram = v.t().dot(v);
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (gram[[i, j]] - target).abs() <= tol,
                    "gram[{i},{j}] = {}",
                    gram[[i, j]]
                );
            }
        }
    }

    #[test]
    fn identity_matrix_kept_in_natural_order() {
        let s = Array2::<f64>::eye(3);
        let eig = symmetric_eigen(&s).unwrap();
        assert_eq!(eig.eigenvalues, array![1.0, 1.0, 1.0]);
        // Equal eigenvalues: lexicographically descending columns keep the
        // identity ordering e1, e2, e3.
        assert_eq!(eig.eigenvectors, Array2::<f64>::eye(3));
    }

    #[test]
    fn diagonal_matrix_sorted_descending() {
        let s = Array2::from_diag(&array![2.0, 5.0, 1.0]);
        let eig = symmetric_eigen(&s).unwrap();
        assert_eq!(eig.eigenvalues, array![5.0, 2.0, 1.0]);
        let expected = array![[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]];
        assert_eq!(eig.eigenvectors, expected);
    }

    #[test]
    fn known_2x2_pair() {
        // Eigenvalues of [[2,1],[1,2]] are 3 and 1.
        let s = array![[2.0, 1.0], [1.0, 2.0]];
        let eig = symmetric_eigen(&s).unwrap();
        assert!((eig.eigenvalues[0] - 3.0).abs() < 1e-14);
        assert!((eig.eigenvalues[1] - 1.0).abs() < 1e-14);
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        for (a, b) in [(0, 0), (1, 0)] {
            assert!((eig.eigenvectors[[a, b]] - inv_sqrt2).abs() < 1e-14);
        }
        assert_orthonormal(&eig.eigenvectors, 1e-14);
    }

    #[test]
    fn reconstruction_and_trace_on_fixed_6x6() {
        // Deterministic non-trivial symmetric matrix.
        let n = 6usize;
        let mut s = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                let x = ((i * 7 + j * 3 + 1) % 11) as f64 / 11.0;
                s[[i, j]] += x;
                s[[j, i]] += x;
            }
        }
        let eig = symmetric_eigen(&s).unwrap();
        assert_orthonormal(&eig.eigenvectors, 1e-12);

        let lam = Array2::from_diag(&eig.eigenvalues);
        let recon = eig.eigenvectors.dot(&lam).dot(&eig.eigenvectors.t());
        let smax = s.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for i in 0..n {
            for j in 0..n {
                assert!((recon[[i, j]] - s[[i, j]]).abs() <= 1e-12 * smax);
            }
        }

        let trace: f64 = (0..n).map(|i| s[[i, i]]).sum();
        assert!((eig.trace() - trace).abs() <= 1e-12 * trace.abs());
    }

    #[test]
    fn zero_matrix_is_fine() {
        let s = Array2::<f64>::zeros((4, 4));
        let eig = symmetric_eigen(&s).unwrap();
        assert!(eig.eigenvalues.iter().all(|&x| x == 0.0));
        assert_orthonormal(&eig.eigenvectors, 0.0);
    }

    #[test]
    fn sign_convention_largest_entry_non_negative() {
        let s = array![[2.0, 1.0], [1.0, 2.0]];
        let eig = symmetric_eigen(&s).unwrap();
        for col in 0..2 {
            let column = eig.eigenvectors.column(col);
            let mut best = 0usize;
            for row in 0..2 {
                if column[row].abs() > column[best].abs() {
                    best = row;
                }
            }
            assert!(column[best] >= 0.0);
        }
    }

    #[test]
    fn rejects_asymmetric_input() {
        let s = array![[1.0, 0.5], [0.0, 1.0]];
        assert!(matches!(
            symmetric_eigen(&s),
            Err(Error::NotSymmetric { .. })
        ));
    }

    #[test]
    fn rejects_non_square_input() {
        let s = Array2::<f64>::zeros((2, 3));
        assert!(matches!(
            symmetric_eigen(&s),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn deterministic_repeat_is_bit_identical() {
        let s = array![
            [4.0, 1.0, 0.5],
            [1.0, 3.0, -0.25],
            [0.5, -0.25, 2.0]
        ];
        let a = symmetric_eigen(&s).unwrap();
        let b = symmetric_eigen(&s).unwrap();
        assert_eq!(a.eigenvalues, b.eigenvalues);
        assert_eq!(a.eigenvectors, b.eigenvectors);
    }
}
