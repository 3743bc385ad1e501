//! Probabilistic PCA training with per-component latent variances.
//!
//! Fitting an ensemble of n realizations of dimension d at model order m
//! yields the ensemble mean, the leading m eigenvectors of the sample
//! covariance as an orthonormal basis, the per-component latent variances
//! sigma2_w[i] = lambda_i - sigma2_eps, and the noise variance sigma2_eps
//! estimated as the mean of the d - m trailing eigenvalues.

use ndarray::Array1;

use crate::error::{Error, Result};
use crate::linalg::{self, kahan_sum, EigenSystem, Matrix, Vector};

const LN_2PI: f64 = 1.837_877_066_409_345_6;

/// A trained model. Immutable after construction; safe to share across
/// threads.
#[derive(Debug, Clone)]
pub struct PpcaModel {
    pub d: usize,
    pub m: usize,
    /// Training ensemble size.
    pub n: usize,
    pub mu: Vector,
    /// d x m orthonormal basis, columns paired with sigma2_w.
    pub phi: Matrix,
    /// Latent variances, non-negative and non-increasing.
    pub sigma2_w: Vector,
    pub sigma2_eps: f64,
    /// Full spectrum of the sample covariance, descending. Kept for model
    /// selection and diagnostics.
    pub eigenvalues: Vector,
    /// Maximized log-likelihood of the training data at this m. Infinite for
    /// an exactly rank-deficient ensemble (zero residual variance).
    pub log_likelihood: f64,
}

/// Non-fatal observations from a fit.
#[derive(Debug, Clone, Default)]
pub struct FitDiagnostics {
    /// Retained components whose raw variance lambda_i - sigma2_eps came out
    /// negative and was clamped to zero.
    pub clamped: Vec<usize>,
    /// Set when even the leading latent variance sits below the noise floor,
    /// i.e. the data show no resolvable low-rank structure.
    pub weak_leading_mode: bool,
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub model: PpcaModel,
    pub diagnostics: FitDiagnostics,
}

/// Ensemble mean (1/n) sum_k y_k over the rows of `data`.
pub fn estimate_mean(data: &Matrix) -> Result<Vector> {
    linalg::row_mean(data)
}

/// Fit a model of order m to the rows of `data`.
pub fn fit(data: &Matrix, m: usize) -> Result<FitOutcome> {
    let n = data.nrows();
    if n < 2 {
        return Err(Error::TooFewRealizations { n, need: 2 });
    }
    let mean = estimate_mean(data)?;
    let cov = linalg::sample_covariance(data, &mean)?;
    let eigen = linalg::symmetric_eigen(&cov)?;
    fit_from_spectrum(mean, &eigen, n, m)
}

/// Assemble a model of order m from a precomputed mean and eigendecomposition
/// of the sample covariance. Lets order selection scan many m without
/// repeating the eigensolve.
pub fn fit_from_spectrum(
    mean: Vector,
    eigen: &EigenSystem,
    n: usize,
    m: usize,
) -> Result<FitOutcome> {
    let d = eigen.dim();
    if m == 0 || m >= d {
        return Err(Error::InvalidRetainedDim { m, max: d.saturating_sub(1), d });
    }
    if n < 2 {
        return Err(Error::TooFewRealizations { n, need: 2 });
    }
    if mean.len() != d {
        return Err(Error::DimensionMismatch {
            context: "fit mean length",
            expected: d,
            actual: mean.len(),
        });
    }

    let lambda = &eigen.eigenvalues;
    for i in 0..m {
        if lambda[i] <= 0.0 {
            return Err(Error::DegenerateSpectrum { index: i, value: lambda[i] });
        }
    }

    let trailing_mean = kahan_sum(lambda.iter().skip(m).copied()) / (d - m) as f64;
    // The trailing mean can round to a tiny negative for rank-deficient data;
    // the noise variance is zero in that case.
    let sigma2_eps = trailing_mean.max(0.0);

    let mut clamped = Vec::new();
    let mut sigma2_w = Array1::<f64>::zeros(m);
    for i in 0..m {
        let raw = lambda[i] - sigma2_eps;
        if raw < 0.0 {
            clamped.push(i);
            sigma2_w[i] = 0.0;
        } else {
            sigma2_w[i] = raw;
        }
    }
    let weak_leading_mode = sigma2_w[0] < sigma2_eps;

    let log_likelihood = if trailing_mean > 0.0 {
        log_likelihood_at_mle(lambda.as_slice().unwrap(), m, n)?
    } else {
        // Zero residual variance: the Gaussian density degenerates and the
        // maximized likelihood is unbounded.
        f64::INFINITY
    };

    let phi = eigen.eigenvectors.slice(ndarray::s![.., ..m]).to_owned();
    let model = PpcaModel {
        d,
        m,
        n,
        mu: mean,
        phi,
        sigma2_w,
        sigma2_eps,
        eigenvalues: eigen.eigenvalues.clone(),
        log_likelihood,
    };
    Ok(FitOutcome {
        model,
        diagnostics: FitDiagnostics { clamped, weak_leading_mode },
    })
}

/// Maximized log-likelihood of an order-m model, evaluated in closed form
/// from the covariance spectrum alone:
///
///   L = -(n/2) [ d ln 2 pi + sum_{j<=m} ln lambda_j
///                + (d - m) ln( mean of trailing lambda ) + d ].
pub fn log_likelihood_at_mle(eigenvalues: &[f64], m: usize, n: usize) -> Result<f64> {
    let d = eigenvalues.len();
    if m == 0 || m >= d {
        return Err(Error::InvalidRetainedDim { m, max: d.saturating_sub(1), d });
    }
    for (i, &l) in eigenvalues.iter().take(m).enumerate() {
        if l <= 0.0 {
            return Err(Error::DegenerateSpectrum { index: i, value: l });
        }
    }
    let trailing_mean = kahan_sum(eigenvalues[m..].iter().copied()) / (d - m) as f64;
    if trailing_mean <= 0.0 {
        return Err(Error::DegenerateSpectrum { index: m, value: trailing_mean });
    }
    let sum_log_leading = kahan_sum(eigenvalues.iter().take(m).map(|l| l.ln()));
    let df = d as f64;
    let mf = m as f64;
    Ok(-0.5
        * n as f64
        * (df * LN_2PI + sum_log_leading + (df - mf) * trailing_mean.ln() + df))
}

impl PpcaModel {
    /// Reconstruct a signal from latent coefficients: Phi w + mu.
    pub fn reconstruct(&self, w: &Vector) -> Result<Vector> {
        if w.len() != self.m {
            return Err(Error::DimensionMismatch {
                context: "reconstruct latent length",
                expected: self.m,
                actual: w.len(),
            });
        }
        Ok(self.phi.dot(w) + &self.mu)
    }

    /// Check the structural invariants. Used when loading persisted models so
    /// a corrupt or hand-edited document is rejected.
    pub fn validate(&self) -> Result<()> {
        let d = self.d;
        let m = self.m;
        if m == 0 || m >= d {
            return Err(Error::CorruptModel(format!("m = {m} out of range for d = {d}")));
        }
        if self.mu.len() != d
            || self.phi.dim() != (d, m)
            || self.sigma2_w.len() != m
            || self.eigenvalues.len() != d
        {
            return Err(Error::CorruptModel("field dimensions disagree".into()));
        }
        if self.n < 2 {
            return Err(Error::CorruptModel(format!("n = {} below 2", self.n)));
        }
        let finite = self.mu.iter().all(|x| x.is_finite())
            && self.phi.iter().all(|x| x.is_finite())
            && self.sigma2_w.iter().all(|x| x.is_finite())
            && self.eigenvalues.iter().all(|x| x.is_finite())
            && self.sigma2_eps.is_finite();
        if !finite {
            return Err(Error::CorruptModel("non-finite field value".into()));
        }
        if self.sigma2_eps < 0.0 {
            return Err(Error::CorruptModel("negative noise variance".into()));
        }

        let tols = crate::tolerances::get();
        let gram = self.phi.t().dot(&self.phi);
        for i in 0..m {
            for j in 0..m {
                let target = if i == j { 1.0 } else { 0.0 };
                if (gram[[i, j]] - target).abs() > tols.basis_orthonormality_tol {
                    return Err(Error::CorruptModel(format!(
                        "basis not orthonormal: gram[{i},{j}] = {}",
                        gram[[i, j]]
                    )));
                }
            }
        }

        let mut prev = f64::INFINITY;
        for (i, &s) in self.sigma2_w.iter().enumerate() {
            if s < 0.0 || s > prev {
                return Err(Error::CorruptModel(format!(
                    "latent variances not non-negative non-increasing at {i}"
                )));
            }
            prev = s;
        }

        // Spectrum identity: lambda_i = sigma2_w[i] + sigma2_eps for retained
        // components, except where the variance was clamped to zero (the
        // clamp is only valid when lambda_i <= sigma2_eps).
        for i in 0..m {
            let lam = self.eigenvalues[i];
            if self.sigma2_w[i] > 0.0 {
                if (self.sigma2_w[i] + self.sigma2_eps - lam).abs() > tols.eigen_identity_tol {
                    return Err(Error::CorruptModel(format!(
                        "eigenvalue identity violated at component {i}"
                    )));
                }
            } else if lam > self.sigma2_eps + tols.eigen_identity_tol {
                return Err(Error::CorruptModel(format!(
                    "component {i} clamped to zero but eigenvalue exceeds the noise floor"
                )));
            }
        }

        let trailing_mean =
            kahan_sum(self.eigenvalues.iter().skip(m).copied()) / (d - m) as f64;
        if trailing_mean <= 0.0 {
            if self.sigma2_eps != 0.0 {
                return Err(Error::CorruptModel(
                    "noise variance must be zero for a rank-deficient spectrum".into(),
                ));
            }
        } else {
            let rel = (self.sigma2_eps - trailing_mean).abs() / trailing_mean;
            if rel > tols.trailing_mean_rel_tol {
                return Err(Error::CorruptModel(format!(
                    "noise variance disagrees with the trailing eigenvalue mean \
                     (relative error {rel:.3e})"
                )));
            }
        }
        Ok(())
    }
}
