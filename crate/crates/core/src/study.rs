//! The full benchmark study behind the `reproduce` command: three synthetic
//! training ensembles, order selection on each, four trial-projection cases,
//! summary tables, figure data, and a pass/fail report whose thresholds come
//! from the checked-in tolerance configuration.

use std::path::Path;

use crate::error::{Error, Result};
use crate::io::{atomic_write, fmt_g17};
use crate::linalg::kahan_sum;
use crate::linalg::Vector;
use crate::ppca::FitOutcome;
use crate::project::{self, Method};
use crate::select::{self, BicTable};
use crate::svg::{self, Series};
use crate::synth::{self, DataEnsemble, SyntheticSpec};
use crate::tolerances::{self, Tolerances};

/// Knobs for a study run. Defaults reproduce the published benchmark; the
/// trial counts and training size are adjustable so smoke tests can exercise
/// the full pipeline cheaply (the checks are only meaningful at full scale).
#[derive(Debug, Clone)]
pub struct StudyOptions {
    pub seed: u64,
    /// Fixed-point settings for the Gaussian-prior projections.
    pub tol: f64,
    pub max_iter: usize,
    /// Largest order scanned during selection; None means d - 1.
    pub m_max: Option<usize>,
    /// Realizations per training ensemble.
    pub train_n: usize,
    /// Trial realizations per projection case (error statistics).
    pub error_trials: usize,
    /// Leading trial count used for the mean noise-variance statistics.
    pub noise_trials: usize,
}

impl Default for StudyOptions {
    fn default() -> Self {
        let t = tolerances::get();
        StudyOptions {
            seed: t.default_seed,
            tol: t.fixed_point_tol,
            max_iter: t.fixed_point_max_iter,
            m_max: None,
            train_n: 10_000,
            error_trials: 10_000,
            noise_trials: 1_000,
        }
    }
}

struct TrainingSetup {
    label: &'static str,
    sigma2_eps: f64,
    m_gen: usize,
    seed_offset: u64,
}

/// The three training ensembles, in fixed order: moderate noise, low noise,
/// and a near-noise-free wide generator that drives selection to high order.
const TRAINING_SETUPS: [TrainingSetup; 3] = [
    TrainingSetup { label: "high_noise", sigma2_eps: 0.1, m_gen: 10, seed_offset: 0 },
    TrainingSetup { label: "low_noise", sigma2_eps: 0.0025, m_gen: 10, seed_offset: 1 },
    TrainingSetup { label: "tiny_noise", sigma2_eps: 1.5e-12, m_gen: 50, seed_offset: 2 },
];

struct CaseSetup {
    label: &'static str,
    model_index: usize,
    trial_sigma2: f64,
    seed_offset: u64,
}

/// The four projection cases: noisy trials against each trained model, plus
/// cleaner trials against the low-noise model. Labels match the reference
/// table in the tolerance configuration.
const CASE_SETUPS: [CaseSetup; 4] = [
    CaseSetup {
        label: "train_eps_0.1__trial_eps_0.2",
        model_index: 0,
        trial_sigma2: 0.2,
        seed_offset: 100,
    },
    CaseSetup {
        label: "train_eps_0.0025__trial_eps_0.2",
        model_index: 1,
        trial_sigma2: 0.2,
        seed_offset: 101,
    },
    CaseSetup {
        label: "train_eps_1.5e-12__trial_eps_0.2",
        model_index: 2,
        trial_sigma2: 0.2,
        seed_offset: 102,
    },
    CaseSetup {
        label: "train_eps_0.0025__trial_eps_0.005",
        model_index: 1,
        trial_sigma2: 0.005,
        seed_offset: 103,
    },
];

/// One training ensemble after selection: the generating spec, the fitted
/// model at the selected order, and the full selection scan.
#[derive(Debug, Clone)]
pub struct TrainedSet {
    pub label: &'static str,
    pub spec: SyntheticSpec,
    pub outcome: FitOutcome,
    pub bic: BicTable,
}

/// The first trial realization of a case with its three reconstructions,
/// kept for the reconstruction figure.
#[derive(Debug, Clone)]
pub struct TrialCurves {
    pub observed: Vector,
    pub truth: Vector,
    pub gaussian: Vector,
    pub l2: Vector,
}

/// Aggregated projection statistics for one case.
#[derive(Debug, Clone)]
pub struct CaseResult {
    pub label: &'static str,
    /// Index into the study's training sets.
    pub model_index: usize,
    pub trial_spec: SyntheticSpec,
    /// Mean reconstruction error against the noise-free truth over all
    /// trials, per method.
    pub mean_error_gaussian: f64,
    pub mean_error_l2: f64,
    /// Mean estimated trial-noise variance over the leading noise_trials.
    pub mean_noise_gaussian: f64,
    pub mean_noise_l2: f64,
    /// Estimates from the first trial alone.
    pub single_noise_gaussian: f64,
    pub single_noise_l2: f64,
    pub max_iterations: usize,
    pub all_converged: bool,
    /// Per-trial errors, trial order, for the error-distribution figure.
    pub errors_gaussian: Vec<f64>,
    pub errors_l2: Vec<f64>,
    pub first_trial: TrialCurves,
}

/// One line of the pass/fail summary.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct StudyReport {
    pub options: StudyOptions,
    pub training: Vec<TrainedSet>,
    pub cases: Vec<CaseResult>,
    pub checks: Vec<Check>,
}

impl StudyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Run the whole benchmark: generate, select, project, and evaluate every
/// check. Deterministic in (options.seed, options); substream layout keys
/// training sets at seed + 0..2 and trial ensembles at seed + 100..103.
pub fn run_study(options: &StudyOptions) -> Result<StudyReport> {
    if options.error_trials == 0 {
        return Err(Error::InvalidArgument("error_trials must be at least 1".into()));
    }
    if options.noise_trials == 0 || options.noise_trials > options.error_trials {
        return Err(Error::InvalidArgument(format!(
            "noise_trials must lie in [1, error_trials]; got {} with {} error trials",
            options.noise_trials, options.error_trials
        )));
    }

    let mut training = Vec::with_capacity(TRAINING_SETUPS.len());
    for setup in &TRAINING_SETUPS {
        let mut spec =
            SyntheticSpec::benchmark(setup.sigma2_eps, options.train_n, options.seed + setup.seed_offset);
        spec.m_gen = setup.m_gen;
        spec.validate()?;
        let ensemble = synth::generate(&spec)?;
        let (outcome, bic) = select::select_model(ensemble.realizations(), options.m_max)?;
        training.push(TrainedSet { label: setup.label, spec, outcome, bic });
    }

    let mut cases = Vec::with_capacity(CASE_SETUPS.len());
    for setup in &CASE_SETUPS {
        let source = &training[setup.model_index];
        let mut trial_spec = SyntheticSpec::benchmark(
            setup.trial_sigma2,
            options.error_trials,
            options.seed + setup.seed_offset,
        );
        // Trials come from the same generating process as the source model's
        // training data, only noisier.
        trial_spec.m_gen = source.spec.m_gen;
        trial_spec.validate()?;
        let trials = synth::generate(&trial_spec)?;
        cases.push(run_case(setup, source, trial_spec, &trials, options)?);
    }

    let checks = evaluate_checks(&training, &cases, tolerances::get());
    Ok(StudyReport { options: options.clone(), training, cases, checks })
}

fn run_case(
    setup: &CaseSetup,
    source: &TrainedSet,
    trial_spec: SyntheticSpec,
    trials: &DataEnsemble,
    options: &StudyOptions,
) -> Result<CaseResult> {
    let model = &source.outcome.model;
    let gaussian = project::batch_project(
        model,
        trials.realizations(),
        Method::GaussianPrior,
        options.tol,
        options.max_iter,
    )?;
    let l2 = project::batch_project(model, trials.realizations(), Method::L2, options.tol, options.max_iter)?;
    let truth = trials
        .truth()
        .ok_or_else(|| Error::InvalidArgument("study trials must carry noise-free truth".into()))?;

    let n = gaussian.len();
    let mut errors_gaussian = Vec::with_capacity(n);
    let mut errors_l2 = Vec::with_capacity(n);
    for k in 0..n {
        let truth_k = truth.row(k).to_owned();
        errors_gaussian.push(project::reconstruction_error(&truth_k, &gaussian[k].reconstruction)?);
        errors_l2.push(project::reconstruction_error(&truth_k, &l2[k].reconstruction)?);
    }

    let mean = |xs: &[f64]| kahan_sum(xs.iter().copied()) / xs.len() as f64;
    let nn = options.noise_trials.min(n);
    let mean_noise = |rs: &[project::ProjectionResult]| {
        kahan_sum(rs.iter().take(nn).map(|r| r.sigma2_eps_t)) / nn as f64
    };

    Ok(CaseResult {
        label: setup.label,
        model_index: setup.model_index,
        trial_spec,
        mean_error_gaussian: mean(&errors_gaussian),
        mean_error_l2: mean(&errors_l2),
        mean_noise_gaussian: mean_noise(&gaussian),
        mean_noise_l2: mean_noise(&l2),
        single_noise_gaussian: gaussian[0].sigma2_eps_t,
        single_noise_l2: l2[0].sigma2_eps_t,
        max_iterations: gaussian.iter().map(|r| r.iterations).max().unwrap_or(0),
        all_converged: gaussian.iter().all(|r| r.converged),
        first_trial: TrialCurves {
            observed: trials.realizations().row(0).to_owned(),
            truth: truth.row(0).to_owned(),
            gaussian: gaussian[0].reconstruction.clone(),
            l2: l2[0].reconstruction.clone(),
        },
        errors_gaussian,
        errors_l2,
    })
}

fn rel_err(estimate: f64, truth: f64) -> f64 {
    ((estimate - truth) / truth).abs()
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "ok"
    } else {
        "FAIL"
    }
}

fn evaluate_checks(training: &[TrainedSet], cases: &[CaseResult], t: &Tolerances) -> Vec<Check> {
    vec![
        check_noise_recovery(training, t),
        check_latent_recovery(training, t),
        check_order_selection(training, t),
        check_spectrum_identity(training, t),
        check_error_means(cases, t),
        check_noise_estimates(cases, t),
        check_fixed_point_budget(cases, t),
    ]
}

/// Fitted residual-noise variance close to the generator's on the two main
/// training sets. The wide-generator set is excluded: its trailing latent
/// variances sit at the noise floor itself, so the floor is not separately
/// identifiable there.
fn check_noise_recovery(training: &[TrainedSet], t: &Tolerances) -> Check {
    let mut passed = true;
    let mut parts = Vec::new();
    for set in &training[..2] {
        let est = set.outcome.model.sigma2_eps;
        let truth = set.spec.sigma2_eps;
        let err = rel_err(est, truth);
        let ok = err <= t.noise_variance_rel_tol;
        passed &= ok;
        parts.push(format!("{}: {:.6} vs {:.6} ({:.2}%, {})", set.label, est, truth, 100.0 * err, verdict(ok)));
    }
    Check { name: "training_noise_recovery", passed, detail: parts.join("; ") }
}

/// Leading latent variances close to the generator's decay: the first 10 on
/// the low-noise set, the first 5 on the high-noise set.
fn check_latent_recovery(training: &[TrainedSet], t: &Tolerances) -> Check {
    let mut passed = true;
    let mut parts = Vec::new();
    for (set, count) in [(&training[1], t.selected_m_low_noise), (&training[0], t.selected_m_high_noise)] {
        let model = &set.outcome.model;
        if model.m < count {
            passed = false;
            parts.push(format!("{}: only {} components retained, need {}", set.label, model.m, count));
            continue;
        }
        let mut worst = 0.0f64;
        let mut worst_i = 0;
        for i in 0..count {
            let err = rel_err(model.sigma2_w[i], set.spec.latent_variance(i));
            if err > worst {
                worst = err;
                worst_i = i + 1;
            }
        }
        let ok = worst <= t.latent_variance_rel_tol;
        passed &= ok;
        parts.push(format!(
            "{}: worst of {} components is #{} at {:.2}% ({})",
            set.label,
            count,
            worst_i,
            100.0 * worst,
            verdict(ok)
        ));
    }
    Check { name: "latent_variance_recovery", passed, detail: parts.join("; ") }
}

fn check_order_selection(training: &[TrainedSet], t: &Tolerances) -> Check {
    let selected: Vec<usize> = training.iter().map(|s| s.bic.selected_m).collect();
    let ok_high = selected[0] == t.selected_m_high_noise;
    let ok_low = selected[1] == t.selected_m_low_noise;
    let ok_tiny =
        selected[2].abs_diff(t.selected_m_tiny_noise) <= t.selected_m_tiny_noise_slack;
    let passed = ok_high && ok_low && ok_tiny;
    let detail = format!(
        "selected m = {}/{}/{} (expected {}/{}/{}±{})",
        selected[0],
        selected[1],
        selected[2],
        t.selected_m_high_noise,
        t.selected_m_low_noise,
        t.selected_m_tiny_noise,
        t.selected_m_tiny_noise_slack
    );
    Check { name: "model_order_selection", passed, detail }
}

/// Sample spectrum matches the generator: retained eigenvalues near latent
/// variance plus noise floor, and the trailing plateau (as its mean; single
/// bulk eigenvalues scatter far more than the mean does) near the floor.
fn check_spectrum_identity(training: &[TrainedSet], t: &Tolerances) -> Check {
    let mut passed = true;
    let mut parts = Vec::new();
    for set in &training[..2] {
        let model = &set.outcome.model;
        let mut worst = 0.0f64;
        for i in 0..model.m {
            let predicted = set.spec.latent_variance(i) + set.spec.sigma2_eps;
            worst = worst.max(rel_err(model.eigenvalues[i], predicted));
        }
        let trailing = model.eigenvalues.iter().skip(model.m).copied();
        let count = (model.d - model.m) as f64;
        let plateau = kahan_sum(trailing) / count;
        let plateau_err = rel_err(plateau, set.spec.sigma2_eps);
        let ok = worst <= t.spectrum_rel_tol && plateau_err <= t.spectrum_rel_tol;
        passed &= ok;
        parts.push(format!(
            "{}: worst retained {:.2}%, plateau mean {:.2}% ({})",
            set.label,
            100.0 * worst,
            100.0 * plateau_err,
            verdict(ok)
        ));
    }
    Check { name: "spectrum_identity", passed, detail: parts.join("; ") }
}

/// Mean reconstruction errors against the reference values on the two cases
/// that have them, and the Gaussian route strictly better in every case.
fn check_error_means(cases: &[CaseResult], t: &Tolerances) -> Check {
    let mut passed = true;
    let mut parts = Vec::new();
    let refs = [
        (&cases[1], &t.reference_error_means.low_noise_model),
        (&cases[2], &t.reference_error_means.tiny_noise_model),
    ];
    for (case, reference) in refs {
        let err_g = rel_err(case.mean_error_gaussian, reference.gaussian);
        let err_l = rel_err(case.mean_error_l2, reference.l2);
        let ok = err_g <= t.error_mean_rel_tol && err_l <= t.error_mean_rel_tol;
        passed &= ok;
        parts.push(format!(
            "{}: gaussian {:.4} vs {:.2}, l2 {:.4} vs {:.2} ({})",
            case.label,
            case.mean_error_gaussian,
            reference.gaussian,
            case.mean_error_l2,
            reference.l2,
            verdict(ok)
        ));
    }
    let ordered = cases.iter().all(|c| c.mean_error_gaussian < c.mean_error_l2);
    passed &= ordered;
    parts.push(format!("gaussian below l2 in all {} cases ({})", cases.len(), verdict(ordered)));
    Check { name: "projection_error_means", passed, detail: parts.join("; ") }
}

/// Trial-noise estimation quality: mean Gaussian estimates near the truth on
/// the two noisy-trial cases over the main models, Gaussian means above L2
/// means everywhere, the L2 mean shrinking as model order grows, and the
/// single-trial estimates within the wide single-realization band of the
/// reference values.
fn check_noise_estimates(cases: &[CaseResult], t: &Tolerances) -> Check {
    let mut passed = true;
    let mut parts = Vec::new();

    for case in &cases[..2] {
        let truth = case.trial_spec.sigma2_eps;
        let err = rel_err(case.mean_noise_gaussian, truth);
        let ok = err <= t.trial_noise_mean_rel_tol;
        passed &= ok;
        parts.push(format!(
            "{}: mean gaussian {:.5} vs {:.3} ({:.2}%, {})",
            case.label,
            case.mean_noise_gaussian,
            truth,
            100.0 * err,
            verdict(ok)
        ));
    }

    let above = cases.iter().all(|c| c.mean_noise_gaussian > c.mean_noise_l2);
    passed &= above;
    parts.push(format!("gaussian mean above l2 mean in all cases ({})", verdict(above)));

    let ordered = cases[0].mean_noise_l2 > cases[1].mean_noise_l2
        && cases[1].mean_noise_l2 > cases[2].mean_noise_l2;
    passed &= ordered;
    parts.push(format!(
        "l2 means fall with model order: {:.4} > {:.4} > {:.4} ({})",
        cases[0].mean_noise_l2,
        cases[1].mean_noise_l2,
        cases[2].mean_noise_l2,
        verdict(ordered)
    ));

    for reference in &t.reference_single_trial_noise {
        let Some(case) = cases.iter().find(|c| c.label == reference.case) else {
            passed = false;
            parts.push(format!("no case labelled {}", reference.case));
            continue;
        };
        let err_g = rel_err(case.single_noise_gaussian, reference.gaussian);
        let err_l = rel_err(case.single_noise_l2, reference.l2);
        let ok = err_g <= t.single_trial_rel_tol && err_l <= t.single_trial_rel_tol;
        passed &= ok;
        parts.push(format!(
            "{} single trial: gaussian {:.5} vs {:.5}, l2 {:.5} vs {:.5} ({})",
            case.label,
            case.single_noise_gaussian,
            reference.gaussian,
            case.single_noise_l2,
            reference.l2,
            verdict(ok)
        ));
    }

    Check { name: "trial_noise_estimation", passed, detail: parts.join("; ") }
}

fn check_fixed_point_budget(cases: &[CaseResult], t: &Tolerances) -> Check {
    let max_iter = cases.iter().map(|c| c.max_iterations).max().unwrap_or(0);
    let all_converged = cases.iter().all(|c| c.all_converged);
    let passed = all_converged && max_iter <= t.fixed_point_max_iterations_observed;
    let detail = format!(
        "all converged: {}; max iterations {} (budget {})",
        all_converged, max_iter, t.fixed_point_max_iterations_observed
    );
    Check { name: "fixed_point_budget", passed, detail }
}

/// Write every table, figure CSV, and companion SVG plot into `dir`.
/// Returns the file names written, for the run manifest.
pub fn write_outputs(report: &StudyReport, dir: &Path) -> Result<Vec<String>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let emit = |name: &str, content: String, written: &mut Vec<String>| -> Result<()> {
        atomic_write(&dir.join(name), content.as_bytes())?;
        written.push(name.to_string());
        Ok(())
    };

    emit("table1.csv", variance_table_csv(report), &mut written)?;
    emit("table1.svg", variance_table_svg(report), &mut written)?;
    emit("table2.csv", trial_noise_table_csv(report), &mut written)?;
    emit("table2.svg", trial_noise_table_svg(report), &mut written)?;
    emit("fig3_spectrum.csv", spectrum_csv(report), &mut written)?;
    emit("fig3_spectrum.svg", spectrum_svg(report), &mut written)?;
    emit("fig5_bic.csv", bic_csv(report), &mut written)?;
    emit("fig5_bic.svg", bic_svg(report), &mut written)?;
    emit("fig6_reconstructions.csv", reconstructions_csv(report), &mut written)?;
    emit("fig6_reconstructions.svg", reconstructions_svg(report), &mut written)?;
    emit("fig7_errors.csv", errors_csv(report), &mut written)?;
    emit("fig7_errors.svg", errors_svg(report), &mut written)?;
    Ok(written)
}

/// Estimated versus true variances for the two main training sets. Cells
/// past a model's retained order are left empty.
fn variance_table_csv(report: &StudyReport) -> String {
    let low = &report.training[1];
    let high = &report.training[0];
    let mut out = String::new();
    out.push_str("quantity,true_low_noise,estimate_low_noise,true_high_noise,estimate_high_noise\n");
    out.push_str(&format!(
        "sigma2_eps,{},{},{},{}\n",
        fmt_g17(low.spec.sigma2_eps),
        fmt_g17(low.outcome.model.sigma2_eps),
        fmt_g17(high.spec.sigma2_eps),
        fmt_g17(high.outcome.model.sigma2_eps)
    ));
    let rows = low.spec.m_gen.max(high.spec.m_gen);
    for i in 0..rows {
        let cell = |set: &TrainedSet| -> (String, String) {
            if i < set.outcome.model.m && i < set.spec.m_gen {
                (fmt_g17(set.spec.latent_variance(i)), fmt_g17(set.outcome.model.sigma2_w[i]))
            } else {
                (String::new(), String::new())
            }
        };
        let (tl, el) = cell(low);
        let (th, eh) = cell(high);
        out.push_str(&format!("sigma2_w_{},{},{},{},{}\n", i + 1, tl, el, th, eh));
    }
    out
}

fn variance_table_svg(report: &StudyReport) -> String {
    let low = &report.training[1];
    let high = &report.training[0];
    let truth: Vec<f64> = (0..low.spec.m_gen).map(|i| low.spec.latent_variance(i)).collect();
    let xs: Vec<f64> = (1..=truth.len()).map(|i| i as f64).collect();
    let low_est: Vec<f64> = low.outcome.model.sigma2_w.iter().take(truth.len()).copied().collect();
    let high_est: Vec<f64> = high.outcome.model.sigma2_w.iter().take(truth.len()).copied().collect();
    let series = [
        Series { label: "true", xs: &xs, ys: &truth },
        Series { label: "low-noise fit", xs: &xs[..low_est.len()], ys: &low_est },
        Series { label: "high-noise fit", xs: &xs[..high_est.len()], ys: &high_est },
    ];
    svg::line_plot("Latent variances: estimate vs truth", "component", "variance (log10)", true, &series)
}

/// First-trial noise-variance estimates per case against the truth.
fn trial_noise_table_csv(report: &StudyReport) -> String {
    let mut out = String::new();
    out.push_str("case,true_sigma2_eps_T,gaussian,l2\n");
    for case in &report.cases {
        out.push_str(&format!(
            "{},{},{},{}\n",
            case.label,
            fmt_g17(case.trial_spec.sigma2_eps),
            fmt_g17(case.single_noise_gaussian),
            fmt_g17(case.single_noise_l2)
        ));
    }
    out
}

fn trial_noise_table_svg(report: &StudyReport) -> String {
    let xs: Vec<f64> = (1..=report.cases.len()).map(|i| i as f64).collect();
    let truth: Vec<f64> = report.cases.iter().map(|c| c.trial_spec.sigma2_eps).collect();
    let gaussian: Vec<f64> = report.cases.iter().map(|c| c.single_noise_gaussian).collect();
    let l2: Vec<f64> = report.cases.iter().map(|c| c.single_noise_l2).collect();
    let series = [
        Series { label: "true", xs: &xs, ys: &truth },
        Series { label: "gaussian", xs: &xs, ys: &gaussian },
        Series { label: "l2", xs: &xs, ys: &l2 },
    ];
    svg::line_plot("Single-trial noise-variance estimates", "case", "sigma2_eps_T (log10)", true, &series)
}

/// Sample eigenvalue spectra of the two main training sets next to the
/// generator prediction (latent variance plus noise floor, then the floor).
fn spectrum_csv(report: &StudyReport) -> String {
    let high = &report.training[0];
    let low = &report.training[1];
    let predicted = |set: &TrainedSet, i: usize| {
        if i < set.spec.m_gen {
            set.spec.latent_variance(i) + set.spec.sigma2_eps
        } else {
            set.spec.sigma2_eps
        }
    };
    let mut out = String::new();
    out.push_str("index,high_noise_sample,high_noise_generator,low_noise_sample,low_noise_generator\n");
    for i in 0..high.outcome.model.d {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            i + 1,
            fmt_g17(high.outcome.model.eigenvalues[i]),
            fmt_g17(predicted(high, i)),
            fmt_g17(low.outcome.model.eigenvalues[i]),
            fmt_g17(predicted(low, i))
        ));
    }
    out
}

fn spectrum_svg(report: &StudyReport) -> String {
    let high = &report.training[0];
    let low = &report.training[1];
    let d = high.outcome.model.d;
    let xs: Vec<f64> = (1..=d).map(|i| i as f64).collect();
    let high_sample: Vec<f64> = high.outcome.model.eigenvalues.to_vec();
    let low_sample: Vec<f64> = low.outcome.model.eigenvalues.to_vec();
    let gen_curve = |set: &TrainedSet| -> Vec<f64> {
        (0..d)
            .map(|i| {
                if i < set.spec.m_gen {
                    set.spec.latent_variance(i) + set.spec.sigma2_eps
                } else {
                    set.spec.sigma2_eps
                }
            })
            .collect()
    };
    let high_gen = gen_curve(high);
    let low_gen = gen_curve(low);
    let series = [
        Series { label: "high-noise sample", xs: &xs, ys: &high_sample },
        Series { label: "high-noise generator", xs: &xs, ys: &high_gen },
        Series { label: "low-noise sample", xs: &xs, ys: &low_sample },
        Series { label: "low-noise generator", xs: &xs, ys: &low_gen },
    ];
    svg::line_plot("Covariance spectrum vs generator", "eigenvalue index", "eigenvalue (log10)", true, &series)
}

/// Selection score against candidate order for all three training sets.
fn bic_csv(report: &StudyReport) -> String {
    let tables: Vec<&BicTable> = report.training.iter().map(|s| &s.bic).collect();
    let mut out = String::new();
    out.push_str("m,f_bic_high_noise,f_bic_low_noise,f_bic_tiny_noise\n");
    let rows = tables.iter().map(|t| t.m_values.len()).max().unwrap_or(0);
    for row in 0..rows {
        let m = tables.iter().find_map(|t| t.m_values.get(row)).copied().unwrap_or(row + 1);
        let cell = |t: &BicTable| t.f_bic.get(row).map(|f| fmt_g17(*f)).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{}\n",
            m,
            cell(tables[0]),
            cell(tables[1]),
            cell(tables[2])
        ));
    }
    out
}

fn bic_svg(report: &StudyReport) -> String {
    let curves: Vec<(String, Vec<f64>, Vec<f64>)> = report
        .training
        .iter()
        .map(|set| {
            let xs: Vec<f64> = set.bic.m_values.iter().map(|m| *m as f64).collect();
            let label = format!("{} (min at {})", set.label, set.bic.selected_m);
            (label, xs, set.bic.f_bic.clone())
        })
        .collect();
    let series: Vec<Series> = curves
        .iter()
        .map(|(label, xs, ys)| Series { label, xs, ys })
        .collect();
    svg::line_plot("Selection score vs candidate order", "m", "f_bic", false, &series)
}

/// First-trial curves for every case: coordinate, truth, observation, and
/// both reconstructions.
fn reconstructions_csv(report: &StudyReport) -> String {
    let mut out = String::new();
    out.push_str("case,x,truth,observed,gaussian,l2\n");
    for case in &report.cases {
        let d = case.first_trial.observed.len();
        for i in 0..d {
            let x = i as f64 / (d - 1) as f64;
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                case.label,
                fmt_g17(x),
                fmt_g17(case.first_trial.truth[i]),
                fmt_g17(case.first_trial.observed[i]),
                fmt_g17(case.first_trial.gaussian[i]),
                fmt_g17(case.first_trial.l2[i])
            ));
        }
    }
    out
}

fn reconstructions_svg(report: &StudyReport) -> String {
    // One representative case keeps the plot readable; the CSV has all four.
    let case = &report.cases[1];
    let d = case.first_trial.observed.len();
    let xs: Vec<f64> = (0..d).map(|i| i as f64 / (d - 1) as f64).collect();
    let truth = case.first_trial.truth.to_vec();
    let observed = case.first_trial.observed.to_vec();
    let gaussian = case.first_trial.gaussian.to_vec();
    let l2 = case.first_trial.l2.to_vec();
    let series = [
        Series { label: "truth", xs: &xs, ys: &truth },
        Series { label: "observed", xs: &xs, ys: &observed },
        Series { label: "gaussian", xs: &xs, ys: &gaussian },
        Series { label: "l2", xs: &xs, ys: &l2 },
    ];
    let title = format!("First-trial reconstruction, case {}", case.label);
    svg::line_plot(&title, "x", "value", false, &series)
}

/// Per-trial reconstruction errors for every case and both methods.
fn errors_csv(report: &StudyReport) -> String {
    let mut out = String::new();
    out.push_str("case,trial_index,error_gaussian,error_l2\n");
    for case in &report.cases {
        for (k, (eg, el)) in case.errors_gaussian.iter().zip(&case.errors_l2).enumerate() {
            out.push_str(&format!("{},{},{},{}\n", case.label, k, fmt_g17(*eg), fmt_g17(*el)));
        }
    }
    out
}

/// Binned error densities for the two reference cases, drawn as polylines.
fn errors_svg(report: &StudyReport) -> String {
    let mut curves: Vec<(String, Vec<f64>, Vec<f64>)> = Vec::new();
    for case in [&report.cases[1], &report.cases[2]] {
        for (method, errors) in [("gaussian", &case.errors_gaussian), ("l2", &case.errors_l2)] {
            let (xs, ys) = histogram(errors, 60);
            curves.push((format!("{} {}", case.label, method), xs, ys));
        }
    }
    let series: Vec<Series> = curves
        .iter()
        .map(|(label, xs, ys)| Series { label, xs, ys })
        .collect();
    svg::line_plot("Reconstruction-error distribution", "error", "density", false, &series)
}

/// Equal-width histogram over [0, max], normalized to unit area.
fn histogram(values: &[f64], bins: usize) -> (Vec<f64>, Vec<f64>) {
    let max = values.iter().copied().fold(0.0f64, f64::max);
    if values.is_empty() || max <= 0.0 || bins == 0 {
        return (vec![0.0], vec![0.0]);
    }
    let width = max / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in values {
        let idx = ((v / width) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    let scale = 1.0 / (values.len() as f64 * width);
    let xs = (0..bins).map(|i| (i as f64 + 0.5) * width).collect();
    let ys = counts.iter().map(|&c| c as f64 * scale).collect();
    (xs, ys)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn smoke_options() -> StudyOptions {
        StudyOptions {
            seed: 7,
            m_max: Some(12),
            train_n: 300,
            error_trials: 40,
            noise_trials: 10,
            ..StudyOptions::default()
        }
    }

    #[test]
    fn smoke_study_produces_all_sections() {
        let report = run_study(&smoke_options()).unwrap();
        assert_eq!(report.training.len(), 3);
        assert_eq!(report.cases.len(), 4);
        assert_eq!(report.checks.len(), 7);
        for case in &report.cases {
            assert_eq!(case.errors_gaussian.len(), 40);
            assert!(case.mean_error_gaussian.is_finite());
            assert!(case.single_noise_gaussian >= 0.0);
        }
        // Trials reuse the source model's generator layout.
        assert_eq!(report.cases[2].trial_spec.m_gen, report.training[2].spec.m_gen);
    }

    #[test]
    fn smoke_outputs_written_and_named(){
        let report = run_study(&smoke_options()).unwrap();
        let dir = std::env::temp_dir().join(format!("promor-study-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let written = write_outputs(&report, &dir).unwrap();
        let expected = [
            "table1.csv",
            "table1.svg",
            "table2.csv",
            "table2.svg",
            "fig3_spectrum.csv",
            "fig3_spectrum.svg",
            "fig5_bic.csv",
            "fig5_bic.svg",
            "fig6_reconstructions.csv",
            "fig6_reconstructions.svg",
            "fig7_errors.csv",
            "fig7_errors.svg",
        ];
        assert_eq!(written, expected);
        for name in expected {
            let content = std::fs::read_to_string(dir.join(name)).unwrap();
            assert!(!content.is_empty(), "{name} is empty");
        }
        let table2 = std::fs::read_to_string(dir.join("table2.csv")).unwrap();
        assert_eq!(table2.lines().count(), 5);
        assert!(table2.starts_with("case,true_sigma2_eps_T,gaussian,l2\n"));
        let errors = std::fs::read_to_string(dir.join("fig7_errors.csv")).unwrap();
        assert_eq!(errors.lines().count(), 1 + 4 * 40);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn invalid_trial_counts_rejected() {
        let mut options = smoke_options();
        options.noise_trials = 100;
        assert!(matches!(run_study(&options), Err(Error::InvalidArgument(_))));
        options.noise_trials = 0;
        assert!(matches!(run_study(&options), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn histogram_normalizes_to_unit_area() {
        let values = vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8];
        let (xs, ys) = histogram(&values, 4);
        assert_eq!(xs.len(), 4);
        let width = xs[1] - xs[0];
        let area: f64 = ys.iter().map(|y| y * width).sum();
        assert!((area - 1.0).abs() <= 1e-12);
    }
}
