//! Synthetic benchmark ensembles: orthonormal discrete sine basis, Gaussian
//! latent coefficients with geometric variance decay, constant mean, and
//! additive isotropic Gaussian noise, generated bit-reproducibly.

use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::rng::NormalSampler;

fn default_d() -> usize {
    100
}
fn default_m_gen() -> usize {
    10
}
fn default_variance_base() -> f64 {
    2.0
}
fn default_mean_value() -> f64 {
    1.0
}

/// Full description of a synthetic generating process.
///
/// Realization k is y_k = Phi w_k + mu + eps_k with w_j ~ N(0, base^-(j-1))
/// for j = 1..m_gen, eps ~ N(0, sigma2_eps I), mu constant, and Phi the
/// orthonormal discrete sine basis of [`sine_basis`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    #[serde(default = "default_d")]
    pub d: usize,
    #[serde(default = "default_m_gen")]
    pub m_gen: usize,
    /// Latent variance decay base: component j (1-based) has variance
    /// base^-(j-1). The default 2.0 gives 1, 1/2, 1/4, ...
    #[serde(default = "default_variance_base")]
    pub variance_base: f64,
    /// Constant mean level applied to every entry.
    #[serde(default = "default_mean_value")]
    pub mean_value: f64,
    pub sigma2_eps: f64,
    pub n: usize,
    pub seed: u64,
}

impl SyntheticSpec {
    /// Benchmark defaults with the noise level, ensemble size, and seed
    /// supplied by the caller.
    pub fn benchmark(sigma2_eps: f64, n: usize, seed: u64) -> Self {
        SyntheticSpec {
            d: default_d(),
            m_gen: default_m_gen(),
            variance_base: default_variance_base(),
            mean_value: default_mean_value(),
            sigma2_eps,
            n,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 3 {
            return Err(Error::InvalidSpec(format!("d = {} must be at least 3", self.d)));
        }
        if self.m_gen == 0 || self.m_gen > self.d - 2 {
            return Err(Error::InvalidSpec(format!(
                "m_gen = {} must lie in [1, d - 2] = [1, {}]",
                self.m_gen,
                self.d - 2
            )));
        }
        if !(self.variance_base.is_finite() && self.variance_base > 0.0) {
            return Err(Error::InvalidSpec(format!(
                "variance_base = {} must be finite and positive",
                self.variance_base
            )));
        }
        if !self.mean_value.is_finite() {
            return Err(Error::InvalidSpec("mean_value must be finite".into()));
        }
        if !(self.sigma2_eps.is_finite() && self.sigma2_eps >= 0.0) {
            return Err(Error::InvalidSpec(format!(
                "sigma2_eps = {} must be finite and non-negative",
                self.sigma2_eps
            )));
        }
        if self.n == 0 {
            return Err(Error::InvalidSpec("n must be at least 1".into()));
        }
        Ok(())
    }

    /// Variance of latent component j (0-based): base^-j.
    pub fn latent_variance(&self, j: usize) -> f64 {
        self.variance_base.powi(-(j as i32))
    }

    /// All m_gen latent variances, descending.
    pub fn latent_variances(&self) -> Vec<f64> {
        (0..self.m_gen).map(|j| self.latent_variance(j)).collect()
    }

    pub fn mean(&self) -> Vector {
        Array1::from_elem(self.d, self.mean_value)
    }
}

/// An ensemble of realizations (rows), optionally with the noise-free truth
/// and the sampled latent coefficients recorded alongside.
#[derive(Debug, Clone)]
pub struct DataEnsemble {
    realizations: Matrix,
    truth: Option<Matrix>,
    latents: Option<Matrix>,
}

impl DataEnsemble {
    pub fn new(realizations: Matrix) -> Result<Self> {
        if realizations.nrows() == 0 {
            return Err(Error::EmptyEnsemble);
        }
        if realizations.ncols() == 0 {
            return Err(Error::DimensionMismatch {
                context: "ensemble dimension",
                expected: 1,
                actual: 0,
            });
        }
        Ok(DataEnsemble { realizations, truth: None, latents: None })
    }

    pub fn with_truth(mut self, truth: Matrix) -> Result<Self> {
        if truth.dim() != self.realizations.dim() {
            return Err(Error::DimensionMismatch {
                context: "truth matrix rows x cols",
                expected: self.realizations.nrows() * self.realizations.ncols(),
                actual: truth.nrows() * truth.ncols(),
            });
        }
        self.truth = Some(truth);
        Ok(self)
    }

    pub fn with_latents(mut self, latents: Matrix) -> Result<Self> {
        if latents.nrows() != self.realizations.nrows() {
            return Err(Error::DimensionMismatch {
                context: "latent matrix rows",
                expected: self.realizations.nrows(),
                actual: latents.nrows(),
            });
        }
        self.latents = Some(latents);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.realizations.nrows()
    }

    pub fn d(&self) -> usize {
        self.realizations.ncols()
    }

    pub fn realizations(&self) -> &Matrix {
        &self.realizations
    }

    pub fn truth(&self) -> Option<&Matrix> {
        self.truth.as_ref()
    }

    pub fn latents(&self) -> Option<&Matrix> {
        self.latents.as_ref()
    }
}

/// Orthonormal discrete sine basis on d points spanning [0, 1] endpoints
/// included: column j (1-based) is sin(j pi x_k) scaled to unit norm.
/// Columns are mutually orthogonal for j <= d - 2 on this grid.
pub fn sine_basis(d: usize, m: usize) -> Result<Matrix> {
    if d < 3 || m == 0 || m > d - 2 {
        return Err(Error::InvalidSpec(format!(
            "sine basis needs 1 <= m <= d - 2, got m = {m}, d = {d}"
        )));
    }
    let mut phi = Array2::<f64>::zeros((d, m));
    let h = 1.0 / (d - 1) as f64;
    for j in 0..m {
        let freq = (j + 1) as f64 * std::f64::consts::PI;
        let mut norm_sq = 0.0f64;
        for k in 0..d {
            let v = (freq * k as f64 * h).sin();
            phi[[k, j]] = v;
            norm_sq += v * v;
        }
        let inv_norm = 1.0 / norm_sq.sqrt();
        for k in 0..d {
            phi[[k, j]] *= inv_norm;
        }
    }
    Ok(phi)
}

/// Generate an ensemble from the spec. Realization k draws its m_gen latent
/// coefficients and then its d noise values from substream k of the seed, in
/// that order, so the result is independent of thread count and identical
/// across runs for the same (seed, spec).
pub fn generate(spec: &SyntheticSpec) -> Result<DataEnsemble> {
    spec.validate()?;
    let (d, m, n) = (spec.d, spec.m_gen, spec.n);
    let phi = sine_basis(d, m)?;
    let sigma_w: Vec<f64> = (0..m).map(|j| spec.latent_variance(j).sqrt()).collect();
    let sigma_eps = spec.sigma2_eps.sqrt();

    let mut data = vec![0.0f64; n * d];
    let mut truth = vec![0.0f64; n * d];
    let mut latents = vec![0.0f64; n * m];

    data.par_chunks_mut(d)
        .zip(truth.par_chunks_mut(d))
        .zip(latents.par_chunks_mut(m))
        .enumerate()
        .for_each(|(k, ((data_row, truth_row), w_row))| {
            let mut sampler = NormalSampler::substream(spec.seed, k as u64);
            for (j, w) in w_row.iter_mut().enumerate() {
                *w = sigma_w[j] * sampler.next_normal();
            }
            for i in 0..d {
                let mut signal = spec.mean_value;
                for (j, &w) in w_row.iter().enumerate() {
                    signal += phi[[i, j]] * w;
                }
                truth_row[i] = signal;
                data_row[i] = signal + sigma_eps * sampler.next_normal();
            }
        });

    let realizations = Array2::from_shape_vec((n, d), data).expect("shape matches allocation");
    let truth = Array2::from_shape_vec((n, d), truth).expect("shape matches allocation");
    let latents = Array2::from_shape_vec((n, m), latents).expect("shape matches allocation");
    DataEnsemble::new(realizations)?
        .with_truth(truth)?
        .with_latents(latents)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sine_basis_columns_have_unit_norm() {
        let phi = sine_basis(100, 10).unwrap();
        for j in 0..10 {
            let norm_sq: f64 = phi.column(j).iter().map(|x| x * x).sum();
            assert!((norm_sq - 1.0).abs() <= 1e-12, "column {j}: {norm_sq}");
        }
    }

    #[test]
    fn sine_basis_columns_are_orthogonal() {
        let phi = sine_basis(100, 10).unwrap();
        let gram = phi.t().dot(&phi);
        for i in 0..10 {
            for j in 0..10 {
                if i != j {
                    assert!(gram[[i, j]].abs() <= 1e-12, "gram[{i},{j}] = {}", gram[[i, j]]);
                }
            }
        }
    }

    #[test]
    fn sine_basis_peak_scale_at_d_100() {
        let phi = sine_basis(100, 1).unwrap();
        let peak = phi.column(0).iter().fold(0.0f64, |m, x| m.max(x.abs()));
        // Unit-norm sine on 100 points peaks near sqrt(2/d) ~ 0.14.
        assert!((peak - 0.14).abs() < 0.01, "peak = {peak}");
    }

    #[test]
    fn sine_basis_rejects_too_many_modes() {
        assert!(sine_basis(100, 99).is_err());
        assert!(sine_basis(2, 1).is_err());
    }

    #[test]
    fn noise_free_rank_one_stays_in_span() {
        let spec = SyntheticSpec {
            d: 50,
            m_gen: 1,
            variance_base: 2.0,
            mean_value: 1.0,
            sigma2_eps: 0.0,
            n: 20,
            seed: 9,
        };
        let ens = generate(&spec).unwrap();
        let phi = sine_basis(50, 1).unwrap();
        let w = ens.latents().unwrap();
        for k in 0..20 {
            for i in 0..50 {
                let expected = 1.0 + phi[[i, 0]] * w[[k, 0]];
                assert!((ens.realizations()[[k, i]] - expected).abs() <= 1e-12);
            }
        }
        // Zero noise: realizations equal the recorded truth exactly.
        assert_eq!(ens.realizations(), ens.truth().unwrap());
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = SyntheticSpec::benchmark(0.1, 64, 1234);
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a.realizations(), b.realizations());
        assert_eq!(a.truth().unwrap(), b.truth().unwrap());
        assert_eq!(a.latents().unwrap(), b.latents().unwrap());
    }

    #[test]
    fn latent_sample_variances_track_the_decay_rule() {
        // Law-of-large-numbers regression at a fixed seed.
        let spec = SyntheticSpec::benchmark(0.0025, 10_000, 42);
        let ens = generate(&spec).unwrap();
        let w = ens.latents().unwrap();
        for j in 0..5 {
            let var = w.column(j).iter().map(|x| x * x).sum::<f64>() / spec.n as f64;
            let target = spec.latent_variance(j);
            let rel = (var - target).abs() / target;
            assert!(rel <= 0.03, "component {j}: var {var} vs {target} ({rel:.4})");
        }
    }

    #[test]
    fn noise_variance_matches_spec() {
        // realizations - truth is pure noise; its empirical variance must sit
        // within 5% of sigma2_eps once n*d >= 1e5.
        let spec = SyntheticSpec::benchmark(0.1, 1000, 7);
        let ens = generate(&spec).unwrap();
        let diff = ens.realizations() - ens.truth().unwrap();
        let var = diff.iter().map(|x| x * x).sum::<f64>() / diff.len() as f64;
        assert!((var - 0.1).abs() / 0.1 <= 0.05, "noise variance {var}");
    }

    #[test]
    fn spec_validation_rejects_bad_fields() {
        let mut spec = SyntheticSpec::benchmark(0.1, 10, 1);
        spec.sigma2_eps = -1.0;
        assert!(spec.validate().is_err());
        let mut spec = SyntheticSpec::benchmark(0.1, 10, 1);
        spec.m_gen = 99;
        assert!(spec.validate().is_err());
        let mut spec = SyntheticSpec::benchmark(0.1, 10, 1);
        spec.n = 0;
        assert!(spec.validate().is_err());
        let mut spec = SyntheticSpec::benchmark(0.1, 10, 1);
        spec.variance_base = 0.0;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn spec_json_round_trip_with_defaults() {
        let text = r#"{"sigma2_eps": 0.1, "n": 50, "seed": 3}"#;
        let spec: SyntheticSpec = serde_json::from_str(text).unwrap();
        assert_eq!(spec.d, 100);
        assert_eq!(spec.m_gen, 10);
        assert_eq!(spec.variance_base, 2.0);
        assert_eq!(spec.mean_value, 1.0);
        let back: SyntheticSpec =
            serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(spec, back);
    }

    #[test]
    fn spec_json_rejects_unknown_fields() {
        let text = r#"{"sigma2_eps": 0.1, "n": 50, "seed": 3, "sigma_eps": 0.2}"#;
        assert!(serde_json::from_str::<SyntheticSpec>(text).is_err());
    }
}
