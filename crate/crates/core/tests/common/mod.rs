//! Independent oracles for the integration suites. Each one recomputes a
//! quantity the library produces using a different algorithm family, so a
//! shared bug cannot cancel out: eigenvalues by inertia bisection instead of
//! tridiagonal QL, the Gaussian log-likelihood through an explicit Cholesky
//! factorization instead of the eigenvalue closed form, the posterior mode by
//! derivative-free search instead of the fixed-point update, and moments by
//! plain two-pass loops instead of compensated parallel sums.
#![allow(dead_code)]

use ndarray::{Array1, Array2};
use promor::rng::NormalSampler;
use promor::{Matrix, Vector};

pub fn normals(seed: u64, count: usize) -> Vec<f64> {
    let mut sampler = NormalSampler::new(seed);
    let mut out = vec![0.0f64; count];
    sampler.fill(&mut out);
    out
}

/// Dense symmetric matrix with Gaussian entries of order one.
pub fn random_symmetric(d: usize, seed: u64) -> Matrix {
    let g = normals(seed, d * d);
    let mut a = Array2::<f64>::zeros((d, d));
    for i in 0..d {
        for j in 0..=i {
            let v = 0.5 * (g[i * d + j] + g[j * d + i]);
            a[[i, j]] = v;
            a[[j, i]] = v;
        }
    }
    a
}

/// Orthonormal d x d matrix from Gram-Schmidt over Gaussian columns.
pub fn random_orthonormal(d: usize, seed: u64) -> Matrix {
    let g = normals(seed, d * d);
    let mut q = Array2::<f64>::zeros((d, d));
    for j in 0..d {
        let mut col: Vec<f64> = (0..d).map(|i| g[j * d + i]).collect();
        // Two rounds of classical Gram-Schmidt for numerical orthogonality.
        for _ in 0..2 {
            for prev in 0..j {
                let dot: f64 = (0..d).map(|i| col[i] * q[[i, prev]]).sum();
                for i in 0..d {
                    col[i] -= dot * q[[i, prev]];
                }
            }
        }
        let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm > 1e-8, "degenerate Gram-Schmidt column");
        for i in 0..d {
            q[[i, j]] = col[i] / norm;
        }
    }
    q
}

pub fn max_abs(a: &Matrix) -> f64 {
    a.iter().fold(0.0f64, |acc, &v| acc.max(v.abs()))
}

fn gershgorin_bounds(a: &Matrix) -> (f64, f64) {
    let d = a.nrows();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..d {
        let radius: f64 = (0..d).filter(|&j| j != i).map(|j| a[[i, j]].abs()).sum();
        lo = lo.min(a[[i, i]] - radius);
        hi = hi.max(a[[i, i]] + radius);
    }
    (lo, hi)
}

/// Number of eigenvalues of `a` strictly below `sigma`: negative pivots of an
/// unpivoted elimination of a - sigma*I (Sylvester's law of inertia). A
/// vanishing pivot is nudged off zero; bisection only queries generic points,
/// so the isolated breakdown set does not matter in practice, and any
/// miscount would surface as a visible mismatch, never a silent pass.
fn eigenvalues_below(a: &Matrix, sigma: f64, scale: f64) -> usize {
    let d = a.nrows();
    let mut w = a.clone();
    for k in 0..d {
        w[[k, k]] -= sigma;
    }
    let floor = 1e-300 + 1e-14 * scale;
    let mut negatives = 0;
    for k in 0..d {
        let mut pivot = w[[k, k]];
        if pivot.abs() < floor {
            pivot = if pivot < 0.0 { -floor } else { floor };
        }
        if pivot < 0.0 {
            negatives += 1;
        }
        for i in (k + 1)..d {
            let f = w[[i, k]] / pivot;
            for j in (k + 1)..d {
                w[[i, j]] -= f * w[[k, j]];
            }
        }
    }
    negatives
}

/// All eigenvalues of a symmetric matrix, descending, each bracketed to the
/// absolute width `tol` by bisection on the inertia count between Gershgorin
/// bounds.
pub fn bisection_eigenvalues(a: &Matrix, tol: f64) -> Vec<f64> {
    let d = a.nrows();
    assert_eq!(d, a.ncols(), "square input required");
    assert!(tol > 0.0);
    let scale = max_abs(a).max(1.0);
    let (glo, ghi) = gershgorin_bounds(a);
    let glo = glo - tol;
    let ghi = ghi + tol;
    let mut out = Vec::with_capacity(d);
    for k in 0..d {
        // Invariant: count(lo) <= k < count(hi), so the k-th smallest
        // eigenvalue stays inside [lo, hi].
        let (mut lo, mut hi) = (glo, ghi);
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if eigenvalues_below(a, mid, scale) <= k {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        out.push(0.5 * (lo + hi));
    }
    out.reverse();
    out
}

/// Lower Cholesky factor; panics on a non-positive pivot, which is the right
/// failure mode for a test oracle.
pub fn cholesky_lower(a: &Matrix) -> Matrix {
    let d = a.nrows();
    let mut l = Array2::<f64>::zeros((d, d));
    for i in 0..d {
        for j in 0..=i {
            let mut sum = a[[i, j]];
            for k in 0..j {
                sum -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                assert!(sum > 0.0, "matrix not positive definite at pivot {i}: {sum}");
                l[[i, j]] = sum.sqrt();
            } else {
                l[[i, j]] = sum / l[[j, j]];
            }
        }
    }
    l
}

/// Solve (L L^T) x = b in place given the lower factor.
fn cholesky_solve(l: &Matrix, b: &mut [f64]) {
    let d = l.nrows();
    for i in 0..d {
        let mut v = b[i];
        for k in 0..i {
            v -= l[[i, k]] * b[k];
        }
        b[i] = v / l[[i, i]];
    }
    for i in (0..d).rev() {
        let mut v = b[i];
        for k in (i + 1)..d {
            v -= l[[k, i]] * b[k];
        }
        b[i] = v / l[[i, i]];
    }
}

/// Model covariance Phi diag(sigma2_w) Phi^T + sigma2_eps I by explicit
/// triple loop.
pub fn model_covariance(phi: &Matrix, sigma2_w: &[f64], sigma2_eps: f64) -> Matrix {
    let (d, m) = (phi.nrows(), phi.ncols());
    assert_eq!(m, sigma2_w.len());
    let mut c = Array2::<f64>::zeros((d, d));
    for i in 0..d {
        for j in 0..d {
            let mut v = 0.0;
            for t in 0..m {
                v += phi[[i, t]] * sigma2_w[t] * phi[[j, t]];
            }
            c[[i, j]] = v;
        }
        c[[i, i]] += sigma2_eps;
    }
    c
}

/// Gaussian training log-likelihood in its dense form,
/// -(n/2) (d ln 2pi + ln det C + tr(C^{-1} S)), evaluated through a Cholesky
/// factorization of the model covariance.
pub fn dense_log_likelihood(c: &Matrix, s: &Matrix, n: usize) -> f64 {
    let d = c.nrows();
    assert_eq!(s.dim(), (d, d));
    let l = cholesky_lower(c);
    let ln_det: f64 = (0..d).map(|i| 2.0 * l[[i, i]].ln()).sum();
    let mut trace = 0.0;
    let mut col = vec![0.0f64; d];
    for j in 0..d {
        for (i, slot) in col.iter_mut().enumerate() {
            *slot = s[[i, j]];
        }
        cholesky_solve(&l, &mut col);
        trace += col[j];
    }
    let two_pi_ln = (2.0 * std::f64::consts::PI).ln();
    -0.5 * n as f64 * (d as f64 * two_pi_ln + ln_det + trace)
}

/// Ensemble mean and divisor-n covariance by plain two-pass loops.
pub fn naive_mean_covariance(data: &Matrix) -> (Vector, Matrix) {
    let (n, d) = data.dim();
    assert!(n > 0);
    let mut mean = Array1::<f64>::zeros(d);
    for k in 0..n {
        for j in 0..d {
            mean[j] += data[[k, j]];
        }
    }
    mean.mapv_inplace(|v| v / n as f64);
    let mut cov = Array2::<f64>::zeros((d, d));
    for k in 0..n {
        for i in 0..d {
            let di = data[[k, i]] - mean[i];
            for j in 0..d {
                cov[[i, j]] += di * (data[[k, j]] - mean[j]);
            }
        }
    }
    cov.mapv_inplace(|v| v / n as f64);
    (mean, cov)
}

/// Free-parameter count written as the explicit sum it abbreviates: one
/// orthonormal basis vector costs d - i parameters (unit norm plus
/// orthogonality to its i - 1 predecessors), the mean costs d, the noise
/// variance 1.
pub fn parameter_count_by_summation(m: usize, d: usize) -> f64 {
    assert!(m >= 1 && m < d);
    let basis: usize = (1..=m).map(|i| d - i).sum();
    (basis + d + 1) as f64
}

/// A projection problem: trained model pieces plus one trial vector.
#[derive(Debug, Clone)]
pub struct MapInstance {
    pub phi: Matrix,
    pub mu: Vector,
    pub sigma2_w: Vec<f64>,
    pub y: Vector,
}

impl MapInstance {
    /// Twice the negative log posterior with constants dropped:
    /// d ln sigma2 + |y - Phi w - mu|^2 / sigma2 + sum_i w_i^2 / sigma2_w_i,
    /// parameterized by x = (w, ln sigma2) so positivity is built in.
    pub fn objective(&self, x: &[f64]) -> f64 {
        let (d, m) = (self.phi.nrows(), self.phi.ncols());
        assert_eq!(x.len(), m + 1);
        let s = x[m];
        let mut r2 = 0.0;
        for i in 0..d {
            let mut fit = self.mu[i];
            for (t, xt) in x[..m].iter().enumerate() {
                fit += self.phi[[i, t]] * xt;
            }
            let r = self.y[i] - fit;
            r2 += r * r;
        }
        let mut prior = 0.0;
        for (xt, sw) in x[..m].iter().zip(&self.sigma2_w) {
            prior += xt * xt / sw;
        }
        d as f64 * s + r2 * (-s).exp() + prior
    }

    fn residual_mean_square(&self, w: &[f64]) -> f64 {
        let (d, m) = (self.phi.nrows(), self.phi.ncols());
        let mut r2 = 0.0;
        for i in 0..d {
            let mut fit = self.mu[i];
            for (t, wt) in w[..m].iter().enumerate() {
                fit += self.phi[[i, t]] * wt;
            }
            let r = self.y[i] - fit;
            r2 += r * r;
        }
        r2 / d as f64
    }

    fn least_squares_w(&self) -> Vec<f64> {
        let (d, m) = (self.phi.nrows(), self.phi.ncols());
        let mut w = vec![0.0f64; m];
        for (t, slot) in w.iter_mut().enumerate() {
            let mut dot = 0.0;
            for i in 0..d {
                dot += self.phi[[i, t]] * (self.y[i] - self.mu[i]);
            }
            *slot = dot;
        }
        w
    }
}

fn nelder_mead(f: &dyn Fn(&[f64]) -> f64, start: &[f64], step: f64, iters: usize) -> Vec<f64> {
    let n = start.len();
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(start.to_vec());
    for i in 0..n {
        let mut v = start.to_vec();
        v[i] += step;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|x| f(x)).collect();
    for _ in 0..iters {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let (best, worst, second_worst) = (order[0], order[n], order[n - 1]);
        if (values[worst] - values[best]).abs() <= 1e-14 * (1.0 + values[best].abs()) {
            break;
        }
        let mut centroid = vec![0.0f64; n];
        for &idx in order.iter().take(n) {
            for (c, v) in centroid.iter_mut().zip(&simplex[idx]) {
                *c += v;
            }
        }
        for c in centroid.iter_mut() {
            *c /= n as f64;
        }
        let point = |coef: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[worst])
                .map(|(c, w)| c + coef * (c - w))
                .collect()
        };
        let reflected = point(1.0);
        let fr = f(&reflected);
        if fr < values[best] {
            let expanded = point(2.0);
            let fe = f(&expanded);
            if fe < fr {
                simplex[worst] = expanded;
                values[worst] = fe;
            } else {
                simplex[worst] = reflected;
                values[worst] = fr;
            }
        } else if fr < values[second_worst] {
            simplex[worst] = reflected;
            values[worst] = fr;
        } else {
            let contracted = point(-0.5);
            let fc = f(&contracted);
            if fc < values[worst] {
                simplex[worst] = contracted;
                values[worst] = fc;
            } else {
                let best_point = simplex[best].clone();
                for idx in 0..=n {
                    if idx == best {
                        continue;
                    }
                    for (v, b) in simplex[idx].iter_mut().zip(&best_point) {
                        *v = b + 0.5 * (*v - b);
                    }
                    values[idx] = f(&simplex[idx]);
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..=n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    simplex[order[0]].clone()
}

/// Compass-search polish: try +/- step along every coordinate, halve the step
/// when nothing improves, stop below `min_step`.
fn compass_refine(f: &dyn Fn(&[f64]) -> f64, start: &[f64], mut step: f64, min_step: f64) -> Vec<f64> {
    let mut x = start.to_vec();
    let mut fx = f(&x);
    while step > min_step {
        let mut improved = false;
        for i in 0..x.len() {
            for dir in [step, -step] {
                let mut cand = x.clone();
                cand[i] += dir;
                let fc = f(&cand);
                if fc < fx {
                    x = cand;
                    fx = fc;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    x
}

/// Posterior mode by direct search: multistart Nelder-Mead on the joint
/// (w, ln sigma2) objective, compass polish, best final point wins. Returns
/// (w, sigma2).
pub fn map_oracle(instance: &MapInstance) -> (Vec<f64>, f64) {
    let m = instance.phi.ncols();
    let f = |x: &[f64]| instance.objective(x);
    let ls = instance.least_squares_w();

    let mut starts: Vec<Vec<f64>> = Vec::new();
    let s_ls = instance.residual_mean_square(&ls).max(1e-12).ln();
    let mut start_a = ls.clone();
    start_a.push(s_ls);
    starts.push(start_a);

    let zero = vec![0.0f64; m];
    let s_zero = instance.residual_mean_square(&zero).max(1e-12).ln();
    let mut start_b = zero;
    start_b.push(s_zero);
    starts.push(start_b);

    let half: Vec<f64> = ls.iter().map(|v| 0.5 * v).collect();
    let s_half = instance.residual_mean_square(&half).max(1e-12).ln();
    let mut start_c = half;
    start_c.push(s_half + 1.0);
    starts.push(start_c);

    let mut best: Option<(f64, Vec<f64>)> = None;
    for start in starts {
        let mut x = start;
        for round in 0..4 {
            let step = 0.5f64.powi(round * 3);
            x = nelder_mead(&f, &x, step.max(1e-6), 400 * (m + 2));
        }
        x = compass_refine(&f, &x, 0.25, 1e-12);
        let fx = f(&x);
        if best.as_ref().is_none_or(|(fb, _)| fx < *fb) {
            best = Some((fx, x));
        }
    }
    let (_, x) = best.expect("at least one start");
    let sigma2 = x[m].exp();
    (x[..m].to_vec(), sigma2)
}

pub fn rel_err(estimate: f64, truth: f64) -> f64 {
    (estimate - truth).abs() / truth.abs()
}

/// Random small projection problem: orthonormal sine columns, descending
/// latent variances, a mean offset, and a noisy in-span trial vector.
pub fn projection_instance(d: usize, m: usize, seed: u64) -> MapInstance {
    let phi = promor::synth::sine_basis(d, m).expect("valid sine basis dims");
    let g = normals(seed, 2 * (m + d));
    let sigma2_w: Vec<f64> = (0..m).map(|t| 1.5 / 2.0f64.powi(t as i32)).collect();
    let mu = Array1::from_shape_fn(d, |i| 1.0 + 0.3 * g[m + i]);
    let mut y = mu.clone();
    for t in 0..m {
        let w_true = sigma2_w[t].sqrt() * g[t];
        for i in 0..d {
            y[i] += phi[[i, t]] * w_true;
        }
    }
    let noise_sigma = 0.4;
    for i in 0..d {
        y[i] += noise_sigma * g[m + d + m + i];
    }
    MapInstance { phi, mu, sigma2_w, y }
}

/// Wrap instance pieces as a trained model so the projection API accepts
/// them; the spectrum fields are irrelevant to projection.
pub fn instance_model(instance: &MapInstance) -> promor::ppca::PpcaModel {
    let (d, m) = (instance.phi.nrows(), instance.phi.ncols());
    promor::ppca::PpcaModel {
        d,
        m,
        n: 100,
        mu: instance.mu.clone(),
        phi: instance.phi.clone(),
        sigma2_w: Array1::from_vec(instance.sigma2_w.clone()),
        sigma2_eps: 0.01,
        eigenvalues: Array1::zeros(d),
        log_likelihood: 0.0,
    }
}
