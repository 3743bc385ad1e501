//! Probabilistic reduced order modeling of noisy ensembles.
//!
//! The pipeline has three stages:
//!
//! 1. **Training** ([`ppca`]): fit a probabilistic PCA model to an ensemble of
//!    realizations: orthonormal basis, per-component latent variances, and an
//!    explicit estimate of the observation-noise variance.
//! 2. **Order selection** ([`select`]): choose the number of retained basis
//!    functions by minimizing the Bayesian information criterion over the
//!    eigenvalue spectrum, reusing a single eigendecomposition.
//! 3. **Projection** ([`project`]): estimate latent coefficients for a new
//!    noisy trial vector by MAP estimation under the trained Gaussian prior,
//!    jointly with the trial-noise variance, via a fixed-point iteration; a
//!    plain least-squares projection is provided as the baseline.
//!
//! [`synth`] generates the reference benchmark ensembles (orthonormal sine
//! basis, geometrically decaying latent variances, isotropic Gaussian noise)
//! with bit-reproducible seeding, and [`study`] drives the full benchmark
//! study behind the `promor reproduce` command.

pub mod error;
pub mod io;
pub mod linalg;
pub mod manifest;
pub mod model_doc;
pub mod ppca;
pub mod project;
pub mod rng;
pub mod select;
pub mod study;
pub mod svg;
pub mod synth;
pub mod tolerances;

pub use error::{Error, Result};
pub use linalg::{EigenSystem, Matrix, Vector};
