//! Dual-route checks: results of the training pipeline recomputed by the
//! independent oracles in tests/common (inertia bisection, dense Cholesky
//! likelihood, explicit parameter-count summation, direct posterior search).

mod common;

use common::*;
use ndarray::Array2;
use promor::linalg::symmetric_eigen;
use promor::synth::{self, SyntheticSpec};
use promor::{ppca, project, select};

#[test]
fn eigenvalues_match_inertia_bisection_on_random_matrices() {
    for (seed, d) in [(11u64, 3usize), (12, 4), (13, 5), (14, 6), (15, 8), (16, 10)] {
        let a = random_symmetric(d, seed);
        let eigen = symmetric_eigen(&a).unwrap();
        let oracle = bisection_eigenvalues(&a, 1e-11);
        for (i, (have, want)) in eigen.eigenvalues.iter().zip(&oracle).enumerate() {
            assert!(
                (have - want).abs() <= 1e-8,
                "d = {d}, seed = {seed}, eigenvalue {i}: {have} vs oracle {want}"
            );
        }
    }
}

#[test]
fn eigenvalues_match_bisection_and_closed_form_on_tridiagonal() {
    // Second-difference matrix: eigenvalues 2 - 2 cos(k pi / (d + 1)) are
    // known exactly, giving a three-route cross-check.
    let d = 6;
    let mut a = Array2::<f64>::zeros((d, d));
    for i in 0..d {
        a[[i, i]] = 2.0;
        if i + 1 < d {
            a[[i, i + 1]] = -1.0;
            a[[i + 1, i]] = -1.0;
        }
    }
    let mut analytic: Vec<f64> = (1..=d)
        .map(|k| 2.0 - 2.0 * (k as f64 * std::f64::consts::PI / (d as f64 + 1.0)).cos())
        .collect();
    analytic.sort_by(|x, y| y.total_cmp(x));

    let eigen = symmetric_eigen(&a).unwrap();
    let oracle = bisection_eigenvalues(&a, 1e-12);
    for i in 0..d {
        assert!((eigen.eigenvalues[i] - analytic[i]).abs() <= 1e-10);
        assert!((oracle[i] - analytic[i]).abs() <= 1e-10);
    }
}

#[test]
fn mle_log_likelihood_matches_dense_evaluation_on_pinned_spectrum() {
    // Four-dimensional spectrum (4, 2, 1, 1) retained at order two: the
    // noise estimate is the trailing mean 1, latent variances are 3 and 1.
    let (d, n, m) = (4usize, 10usize, 2usize);
    let spectrum = [4.0, 2.0, 1.0, 1.0];
    let have = ppca::log_likelihood_at_mle(&spectrum, m, n).unwrap();

    // Embed the spectrum in a random orientation so the dense route
    // exercises a full matrix, not a diagonal special case.
    let q = random_orthonormal(d, 7);
    let mut s = Array2::<f64>::zeros((d, d));
    for i in 0..d {
        for j in 0..d {
            let mut v = 0.0;
            for t in 0..d {
                v += q[[i, t]] * spectrum[t] * q[[j, t]];
            }
            s[[i, j]] = v;
        }
    }
    let phi = {
        let mut p = Array2::<f64>::zeros((d, m));
        for i in 0..d {
            for t in 0..m {
                p[[i, t]] = q[[i, t]];
            }
        }
        p
    };
    let c = model_covariance(&phi, &[3.0, 1.0], 1.0);
    let want = dense_log_likelihood(&c, &s, n);
    assert!(
        rel_err(have, want) <= 1e-8,
        "closed form {have} vs dense evaluation {want}"
    );

    // Hand arithmetic of the same closed form as a third route.
    let by_hand = -0.5
        * n as f64
        * (d as f64 * (2.0 * std::f64::consts::PI).ln() + 4.0f64.ln() + 2.0f64.ln() + d as f64);
    assert!(rel_err(have, by_hand) <= 1e-12);
}

#[test]
fn mle_log_likelihood_matches_dense_evaluation_on_fitted_models() {
    for (case, seed) in (0u64..10).enumerate() {
        let d = 5 + (case % 6);
        let m_fit = 1 + (case % 3).min(d - 3);
        let spec = SyntheticSpec {
            d,
            m_gen: (2 + case % 2).min(d - 2),
            variance_base: 2.0,
            mean_value: 1.0,
            sigma2_eps: 0.05 + 0.1 * (case as f64 % 4.0),
            n: 60 + 40 * (case % 5),
            seed: 900 + seed,
        };
        let ensemble = synth::generate(&spec).unwrap();
        let outcome = ppca::fit(ensemble.realizations(), m_fit).unwrap();
        let model = &outcome.model;

        let (_, s) = naive_mean_covariance(ensemble.realizations());
        let c = model_covariance(&model.phi, model.sigma2_w.as_slice().unwrap(), model.sigma2_eps);
        let want = dense_log_likelihood(&c, &s, spec.n);
        assert!(
            rel_err(model.log_likelihood, want) <= 1e-8,
            "case {case}: closed form {} vs dense {want}",
            model.log_likelihood
        );
    }
}

#[test]
fn parameter_count_matches_explicit_summation() {
    for d in 2..=30 {
        for m in 1..d {
            let have = select::parameter_count(m, d).unwrap();
            let want = parameter_count_by_summation(m, d);
            assert_eq!(have, want, "m = {m}, d = {d}");
        }
    }
}

#[test]
fn bic_scores_match_dense_likelihood_recomputation() {
    let spec = SyntheticSpec {
        d: 8,
        m_gen: 3,
        variance_base: 2.0,
        mean_value: 1.0,
        sigma2_eps: 0.1,
        n: 150,
        seed: 31,
    };
    let ensemble = synth::generate(&spec).unwrap();
    let (outcome, table) = select::select_model(ensemble.realizations(), None).unwrap();

    let (_, s) = naive_mean_covariance(ensemble.realizations());
    let ln_n = (spec.n as f64).ln();
    let mut best = (0usize, f64::INFINITY);
    for (&m, &have) in table.m_values.iter().zip(&table.f_bic) {
        let fit = ppca::fit(ensemble.realizations(), m).unwrap();
        let model = fit.model;
        let c = model_covariance(&model.phi, model.sigma2_w.as_slice().unwrap(), model.sigma2_eps);
        let want = -2.0 * dense_log_likelihood(&c, &s, spec.n)
            + parameter_count_by_summation(m, spec.d) * ln_n;
        assert!(
            rel_err(have, want) <= 1e-6,
            "m = {m}: score {have} vs dense recomputation {want}"
        );
        if want < best.1 {
            best = (m, want);
        }
    }
    assert_eq!(table.selected_m, best.0, "argmin must agree between routes");
    assert_eq!(outcome.model.m, best.0);
}

#[test]
fn gaussian_projection_matches_posterior_search_on_small_instances() {
    for case in 0u64..12 {
        let d = 6 + (case as usize % 3);
        let m = 1 + (case as usize % 3);
        let instance = projection_instance(d, m, 40 + case);

        let model = instance_model(&instance);
        let result = project::gaussian_project(&model, &instance.y, 1e-14, 2000).unwrap();
        assert!(result.converged, "case {case} must converge");

        let (w_oracle, sigma2_oracle) = map_oracle(&instance);
        for (t, (got, want)) in result.w_map.iter().zip(&w_oracle).enumerate() {
            assert!(
                (got - want).abs() <= 1e-6,
                "case {case}, coordinate {t}: {got} vs oracle {want}"
            );
        }
        assert!(
            (result.sigma2_eps_t - sigma2_oracle).abs() <= 1e-6,
            "case {case}, noise variance: {} vs oracle {sigma2_oracle}",
            result.sigma2_eps_t
        );
    }
}

