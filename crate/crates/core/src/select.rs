//! Model order selection by minimizing the Bayesian information criterion
//! over the covariance spectrum. One eigendecomposition serves every
//! candidate order.

use std::io::Write;

use crate::error::{Error, Result};
use crate::io::fmt_g17;
use crate::linalg::{self, Matrix};
use crate::ppca::{self, FitOutcome};

/// BIC score per candidate order, plus the selected order.
#[derive(Debug, Clone)]
pub struct BicTable {
    pub d: usize,
    pub n: usize,
    /// Candidate orders, strictly increasing.
    pub m_values: Vec<usize>,
    /// f_bic[i] scores m_values[i].
    pub f_bic: Vec<f64>,
    pub selected_m: usize,
}

impl BicTable {
    /// Two-column CSV (m, f_bic) with a header row.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "m,f_bic")?;
        for (m, f) in self.m_values.iter().zip(&self.f_bic) {
            writeln!(out, "{},{}", m, fmt_g17(*f))?;
        }
        Ok(())
    }
}

/// Number of free model parameters at order m: m(d - 1 - (m-1)/2) + d + 1.
/// Basis column j costs d - j parameters (unit norm plus orthogonality to its
/// j - 1 predecessors), summing to m(d - 1 - (m-1)/2); the mean adds d and
/// the noise variance 1. Integral by parity; exact in f64 well past any
/// practical d.
pub fn parameter_count(m: usize, d: usize) -> Result<f64> {
    if m == 0 || m >= d {
        return Err(Error::InvalidRetainedDim { m, max: d.saturating_sub(1), d });
    }
    let (mf, df) = (m as f64, d as f64);
    let count = mf * (df - 1.0 - (mf - 1.0) / 2.0) + df + 1.0;
    debug_assert_eq!(count.fract(), 0.0, "parameter count must be integral");
    Ok(count)
}

/// f_bic(m) = -2 L(m) + parameter_count(m, d) ln n for m in [1, m_max].
/// Ties select the smaller order.
pub fn bic_scan(eigenvalues: &[f64], n: usize, m_max: usize) -> Result<BicTable> {
    let d = eigenvalues.len();
    if m_max == 0 || m_max >= d {
        return Err(Error::InvalidRetainedDim { m: m_max, max: d.saturating_sub(1), d });
    }
    if n < 2 {
        return Err(Error::TooFewRealizations { n, need: 2 });
    }
    let ln_n = (n as f64).ln();
    let mut m_values = Vec::with_capacity(m_max);
    let mut f_bic = Vec::with_capacity(m_max);
    let mut best_m = 0usize;
    let mut best_f = f64::INFINITY;
    for m in 1..=m_max {
        let log_l = ppca::log_likelihood_at_mle(eigenvalues, m, n)?;
        let f = -2.0 * log_l + parameter_count(m, d)? * ln_n;
        if f < best_f {
            best_f = f;
            best_m = m;
        }
        m_values.push(m);
        f_bic.push(f);
    }
    Ok(BicTable { d, n, m_values, f_bic, selected_m: best_m })
}

/// Fit the order chosen by the BIC scan. `m_max` defaults to d - 1: the scan
/// is cheap once the spectrum exists because the likelihood needs only
/// eigenvalues.
pub fn select_model(data: &Matrix, m_max: Option<usize>) -> Result<(FitOutcome, BicTable)> {
    let n = data.nrows();
    if n < 2 {
        return Err(Error::TooFewRealizations { n, need: 2 });
    }
    let mean = ppca::estimate_mean(data)?;
    let cov = linalg::sample_covariance(data, &mean)?;
    let eigen = linalg::symmetric_eigen(&cov)?;
    let d = eigen.dim();
    let m_max = m_max.unwrap_or(d.saturating_sub(1));
    let table = bic_scan(eigen.eigenvalues.as_slice().unwrap(), n, m_max)?;
    let outcome = ppca::fit_from_spectrum(mean, &eigen, n, table.selected_m)?;
    debug_assert_eq!(outcome.model.m, table.selected_m);
    Ok((outcome, table))
}
