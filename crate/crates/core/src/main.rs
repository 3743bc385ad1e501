//! Command-line front end: generate synthetic ensembles, train and select
//! models, project trial data, replay recorded runs, and reproduce the full
//! benchmark study.
//!
//! Exit codes: 0 success, 2 usage or validation failure, 3 I/O failure,
//! 4 benchmark checks failed.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use promor::error::{Error, Result};
use promor::io::{atomic_write, fmt_g17, read_matrix_csv, write_matrix_csv};
use promor::manifest::{RunManifest, MANIFEST_FORMAT_VERSION};
use promor::model_doc::{load_model, save_model, Provenance};
use promor::ppca::{self, FitOutcome};
use promor::project::{self, BatchRow, Method};
use promor::select;
use promor::study::{self, StudyOptions};
use promor::synth::{self, SyntheticSpec};

#[derive(Parser)]
#[command(
    name = "promor",
    version,
    about = "Probabilistic reduced-order modeling: generate, fit, select, project, reproduce"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic ensemble from a generator spec document.
    Generate {
        /// JSON generator spec (dimension, mode count, variances, n, seed).
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        /// Override the seed recorded in the spec.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Fit a model of fixed order to an ensemble CSV (one realization per row).
    Fit {
        #[arg(long)]
        data: PathBuf,
        /// Retained order, 1 <= m <= d - 1.
        #[arg(long)]
        m: usize,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Scan candidate orders, pick the best score, and fit that model.
    Select {
        #[arg(long)]
        data: PathBuf,
        /// Largest order scanned; defaults to d - 1.
        #[arg(long)]
        m_max: Option<usize>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Project trial realizations onto a trained model.
    Project {
        /// Trained model document.
        #[arg(long)]
        model: PathBuf,
        /// Trial realizations CSV, one per row.
        #[arg(long)]
        trials: PathBuf,
        /// Optional noise-free truth CSV matching the trial rows; enables
        /// per-trial reconstruction errors.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = MethodArg::Both)]
        method: MethodArg,
        /// Fixed-point convergence tolerance for the Gaussian-prior route.
        #[arg(long, default_value_t = project::DEFAULT_TOL)]
        tol: f64,
        #[arg(long, default_value_t = project::DEFAULT_MAX_ITER)]
        max_iter: usize,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Run the full benchmark study: three training ensembles, order
    /// selection, four projection cases, tables, figures, pass/fail summary.
    Reproduce {
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        max_iter: Option<usize>,
        #[arg(long)]
        m_max: Option<usize>,
        /// Trial realizations per projection case.
        #[arg(long)]
        error_trials: Option<usize>,
        /// Leading trials used for mean noise-variance statistics.
        #[arg(long)]
        noise_trials: Option<usize>,
    },
    /// Re-run a recorded manifest, reproducing its outputs byte for byte.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
        /// Redirect outputs; defaults to the recorded output directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Gaussian,
    L2,
    Both,
}

impl MethodArg {
    fn as_str(self) -> &'static str {
        match self {
            MethodArg::Gaussian => "gaussian",
            MethodArg::L2 => "l2",
            MethodArg::Both => "both",
        }
    }
}

/// Fully resolved parameters of each command, embedded in its manifest so a
/// replay needs nothing but the manifest (plus referenced input files).
#[derive(Serialize, Deserialize)]
struct GenerateParams {
    spec: SyntheticSpec,
    out_dir: String,
}

#[derive(Serialize, Deserialize)]
struct FitParams {
    data: String,
    m: usize,
    out_dir: String,
}

#[derive(Serialize, Deserialize)]
struct SelectParams {
    data: String,
    m_max: Option<usize>,
    out_dir: String,
}

#[derive(Serialize, Deserialize)]
struct ProjectParams {
    model: String,
    trials: String,
    truth: Option<String>,
    method: String,
    tol: f64,
    max_iter: usize,
    out_dir: String,
}

#[derive(Serialize, Deserialize)]
struct ReproduceParams {
    seed: u64,
    tol: f64,
    max_iter: usize,
    m_max: Option<usize>,
    error_trials: usize,
    noise_trials: usize,
    out_dir: String,
}

fn main() {
    let cli = Cli::parse();
    let code = match run(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code(&err)
        }
    };
    std::process::exit(code);
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io(_) => 3,
        Error::Csv(e) if matches!(e.kind(), csv::ErrorKind::Io(_)) => 3,
        _ => 2,
    }
}

fn path_string(path: &Path) -> String {
    path.to_string_lossy().into_owned()
}

fn run(command: Command) -> Result<i32> {
    match command {
        Command::Generate { spec, out_dir, seed } => {
            let text = std::fs::read_to_string(&spec)?;
            let mut parsed: SyntheticSpec = serde_json::from_str(&text)?;
            if let Some(seed) = seed {
                parsed.seed = seed;
            }
            generate_run(&GenerateParams { spec: parsed, out_dir: path_string(&out_dir) })
        }
        Command::Fit { data, m, out_dir } => {
            fit_run(&FitParams { data: path_string(&data), m, out_dir: path_string(&out_dir) })
        }
        Command::Select { data, m_max, out_dir } => {
            select_run(&SelectParams { data: path_string(&data), m_max, out_dir: path_string(&out_dir) })
        }
        Command::Project { model, trials, truth, method, tol, max_iter, out_dir } => {
            project_run(&ProjectParams {
                model: path_string(&model),
                trials: path_string(&trials),
                truth: truth.as_deref().map(path_string),
                method: method.as_str().to_string(),
                tol,
                max_iter,
                out_dir: path_string(&out_dir),
            })
        }
        Command::Reproduce { out_dir, seed, tol, max_iter, m_max, error_trials, noise_trials } => {
            let defaults = StudyOptions::default();
            reproduce_run(&ReproduceParams {
                seed: seed.unwrap_or(defaults.seed),
                tol: tol.unwrap_or(defaults.tol),
                max_iter: max_iter.unwrap_or(defaults.max_iter),
                m_max,
                error_trials: error_trials.unwrap_or(defaults.error_trials),
                noise_trials: noise_trials.unwrap_or(defaults.noise_trials),
                out_dir: path_string(&out_dir),
            })
        }
        Command::Replay { manifest, out_dir } => replay_run(&manifest, out_dir),
    }
}

fn ensure_dir(out_dir: &str) -> Result<PathBuf> {
    let dir = PathBuf::from(out_dir);
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn generate_run(params: &GenerateParams) -> Result<i32> {
    params.spec.validate()?;
    let ensemble = synth::generate(&params.spec)?;
    let dir = ensure_dir(&params.out_dir)?;

    write_matrix_csv(&dir.join("ensemble.csv"), ensemble.realizations())?;
    let truth = ensemble.truth().expect("generated ensembles carry truth");
    write_matrix_csv(&dir.join("ensemble.truth.csv"), truth)?;
    let mut spec_bytes = serde_json::to_vec_pretty(&params.spec)?;
    spec_bytes.push(b'\n');
    atomic_write(&dir.join("ensemble.spec.json"), &spec_bytes)?;

    let mut manifest = RunManifest::new("generate", serde_json::to_value(params)?);
    manifest.outputs =
        vec!["ensemble.csv".into(), "ensemble.truth.csv".into(), "ensemble.spec.json".into()];
    manifest.save(&dir.join("generate.manifest.json"))?;

    println!(
        "wrote {} x {} ensemble to {}",
        ensemble.n(),
        ensemble.d(),
        dir.join("ensemble.csv").display()
    );
    Ok(0)
}

/// Provenance for a model trained on `data`: picked up from the generator
/// sidecar written by `generate` when one sits next to the data file.
fn sidecar_provenance(data: &Path) -> Provenance {
    let sidecar = data.with_extension("spec.json");
    let spec = std::fs::read_to_string(&sidecar)
        .ok()
        .and_then(|text| serde_json::from_str::<SyntheticSpec>(&text).ok());
    match spec {
        Some(spec) => Provenance {
            seed: Some(spec.seed),
            generator_spec: Some(spec),
            created: promor::io::created_stamp(),
        },
        None => Provenance { seed: None, generator_spec: None, created: promor::io::created_stamp() },
    }
}

fn report_fit(outcome: &FitOutcome) {
    let model = &outcome.model;
    let log_l = if model.log_likelihood.is_finite() {
        fmt_g17(model.log_likelihood)
    } else {
        "unbounded (rank-deficient ensemble)".to_string()
    };
    println!(
        "fit: d = {}, m = {}, n = {}, sigma2_eps = {}, logL = {}",
        model.d,
        model.m,
        model.n,
        fmt_g17(model.sigma2_eps),
        log_l
    );
    if !outcome.diagnostics.clamped.is_empty() {
        let components: Vec<usize> = outcome.diagnostics.clamped.iter().map(|i| i + 1).collect();
        eprintln!(
            "warning: latent variances clamped to zero at components {components:?} \
             (eigenvalue below the noise floor)"
        );
    }
    if outcome.diagnostics.weak_leading_mode {
        eprintln!("warning: leading latent variance sits below the noise floor");
    }
}

fn fit_run(params: &FitParams) -> Result<i32> {
    let data = read_matrix_csv(Path::new(&params.data))?;
    let outcome = ppca::fit(&data, params.m)?;
    let dir = ensure_dir(&params.out_dir)?;

    save_model(&dir.join("model.json"), &outcome.model, sidecar_provenance(Path::new(&params.data)))?;

    let mut manifest = RunManifest::new("fit", serde_json::to_value(params)?);
    manifest.inputs = vec![params.data.clone()];
    manifest.outputs = vec!["model.json".into()];
    manifest.save(&dir.join("fit.manifest.json"))?;

    report_fit(&outcome);
    Ok(0)
}

fn select_run(params: &SelectParams) -> Result<i32> {
    let data = read_matrix_csv(Path::new(&params.data))?;
    let (outcome, bic) = select::select_model(&data, params.m_max)?;
    let dir = ensure_dir(&params.out_dir)?;

    save_model(&dir.join("model.json"), &outcome.model, sidecar_provenance(Path::new(&params.data)))?;

    let mut bic_bytes = Vec::new();
    bic.write_csv(&mut bic_bytes)?;
    atomic_write(&dir.join("bic.csv"), &bic_bytes)?;

    let mut spectrum = String::from("index,eigenvalue\n");
    for (i, ev) in outcome.model.eigenvalues.iter().enumerate() {
        spectrum.push_str(&format!("{},{}\n", i + 1, fmt_g17(*ev)));
    }
    atomic_write(&dir.join("spectrum.csv"), spectrum.as_bytes())?;

    let mut manifest = RunManifest::new("select", serde_json::to_value(params)?);
    manifest.inputs = vec![params.data.clone()];
    manifest.outputs = vec!["model.json".into(), "bic.csv".into(), "spectrum.csv".into()];
    manifest.save(&dir.join("select.manifest.json"))?;

    println!("selected m = {} over candidates 1..={}", bic.selected_m, bic.m_values.len());
    report_fit(&outcome);
    Ok(0)
}

fn project_run(params: &ProjectParams) -> Result<i32> {
    let (model, _provenance) = load_model(Path::new(&params.model))?;
    let trials = read_matrix_csv(Path::new(&params.trials))?;
    let truth = match &params.truth {
        Some(path) => Some(read_matrix_csv(Path::new(path))?),
        None => None,
    };
    if let Some(t) = &truth {
        if t.nrows() != trials.nrows() {
            return Err(Error::DimensionMismatch {
                context: "truth row count",
                expected: trials.nrows(),
                actual: t.nrows(),
            });
        }
        if t.ncols() != trials.ncols() {
            return Err(Error::DimensionMismatch {
                context: "truth row length",
                expected: trials.ncols(),
                actual: t.ncols(),
            });
        }
    }

    let methods: Vec<Method> = match params.method.as_str() {
        "gaussian" => vec![Method::GaussianPrior],
        "l2" => vec![Method::L2],
        "both" => vec![Method::GaussianPrior, Method::L2],
        other => return Err(Error::InvalidArgument(format!("unknown method '{other}'"))),
    };

    let mut rows: Vec<BatchRow> = Vec::new();
    for method in methods {
        let results = project::batch_project(&model, &trials, method, params.tol, params.max_iter)?;
        let mut errors = Vec::with_capacity(results.len());
        for (k, result) in results.iter().enumerate() {
            let error_vs_truth = match &truth {
                Some(t) => {
                    let row = t.row(k).to_owned();
                    Some(project::reconstruction_error(&row, &result.reconstruction)?)
                }
                None => None,
            };
            if let Some(e) = error_vs_truth {
                errors.push(e);
            }
            rows.push(BatchRow {
                index: k,
                method,
                sigma2_eps_t: result.sigma2_eps_t,
                iterations: result.iterations,
                converged: result.converged,
                error_vs_truth,
            });
        }
        let n = results.len() as f64;
        let mean_noise: f64 = results.iter().map(|r| r.sigma2_eps_t).sum::<f64>() / n;
        let unconverged = results.iter().filter(|r| !r.converged).count();
        let mut line = format!(
            "{}: {} trials, mean sigma2_eps_T = {}",
            method.label(),
            results.len(),
            fmt_g17(mean_noise)
        );
        if !errors.is_empty() {
            let mean_error = errors.iter().sum::<f64>() / errors.len() as f64;
            line.push_str(&format!(", mean error vs truth = {}", fmt_g17(mean_error)));
        }
        println!("{line}");
        if unconverged > 0 {
            eprintln!("warning: {unconverged} {} projections hit the iteration cap", method.label());
        }
    }

    let dir = ensure_dir(&params.out_dir)?;
    let mut csv_bytes = Vec::new();
    project::write_batch_csv(&mut csv_bytes, &rows)?;
    atomic_write(&dir.join("projections.csv"), &csv_bytes)?;

    let mut manifest = RunManifest::new("project", serde_json::to_value(params)?);
    manifest.inputs = vec![params.model.clone(), params.trials.clone()];
    if let Some(t) = &params.truth {
        manifest.inputs.push(t.clone());
    }
    manifest.outputs = vec!["projections.csv".into()];
    manifest.save(&dir.join("project.manifest.json"))?;
    Ok(0)
}

fn reproduce_run(params: &ReproduceParams) -> Result<i32> {
    let options = StudyOptions {
        seed: params.seed,
        tol: params.tol,
        max_iter: params.max_iter,
        m_max: params.m_max,
        error_trials: params.error_trials,
        noise_trials: params.noise_trials,
        ..StudyOptions::default()
    };
    let report = study::run_study(&options)?;

    let dir = ensure_dir(&params.out_dir)?;
    let outputs = study::write_outputs(&report, &dir)?;

    let mut manifest = RunManifest::new("reproduce", serde_json::to_value(params)?);
    manifest.outputs = outputs;
    manifest.save(&dir.join("reproduce.manifest.json"))?;

    for set in &report.training {
        println!(
            "training {}: selected m = {}, sigma2_eps = {}",
            set.label,
            set.bic.selected_m,
            fmt_g17(set.outcome.model.sigma2_eps)
        );
    }
    for check in &report.checks {
        let tag = if check.passed { "PASS" } else { "FAIL" };
        println!("[{tag}] {}: {}", check.name, check.detail);
    }
    if report.all_passed() {
        println!("all {} checks passed", report.checks.len());
        Ok(0)
    } else {
        let failed = report.checks.iter().filter(|c| !c.passed).count();
        println!("{failed} of {} checks failed", report.checks.len());
        Ok(4)
    }
}

fn replay_run(manifest_path: &Path, out_dir: Option<PathBuf>) -> Result<i32> {
    let manifest = RunManifest::load(manifest_path)?;
    if manifest.format_version != MANIFEST_FORMAT_VERSION {
        return Err(Error::UnsupportedFormatVersion {
            found: manifest.format_version,
            supported: MANIFEST_FORMAT_VERSION,
        });
    }
    let override_dir = out_dir.as_deref().map(path_string);
    match manifest.command.as_str() {
        "generate" => {
            let mut params: GenerateParams = serde_json::from_value(manifest.parameters)?;
            if let Some(dir) = override_dir {
                params.out_dir = dir;
            }
            generate_run(&params)
        }
        "fit" => {
            let mut params: FitParams = serde_json::from_value(manifest.parameters)?;
            if let Some(dir) = override_dir {
                params.out_dir = dir;
            }
            fit_run(&params)
        }
        "select" => {
            let mut params: SelectParams = serde_json::from_value(manifest.parameters)?;
            if let Some(dir) = override_dir {
                params.out_dir = dir;
            }
            select_run(&params)
        }
        "project" => {
            let mut params: ProjectParams = serde_json::from_value(manifest.parameters)?;
            if let Some(dir) = override_dir {
                params.out_dir = dir;
            }
            project_run(&params)
        }
        "reproduce" => {
            let mut params: ReproduceParams = serde_json::from_value(manifest.parameters)?;
            if let Some(dir) = override_dir {
                params.out_dir = dir;
            }
            reproduce_run(&params)
        }
        other => Err(Error::InvalidArgument(format!("manifest command '{other}' is not replayable"))),
    }
}
