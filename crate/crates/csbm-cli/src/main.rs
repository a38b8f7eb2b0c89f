//! `csbm`: experiment harness for community detection on graphs with node
//! covariates.
//!
//! Subcommands: `generate` (sample instances to disk), `run` (one
//! algorithm on one instance), `sweep` (phase-diagram grid), `de`
//! (population dynamics), `theory` (closed-form predictions), `report`
//! (heatmaps from a sweep CSV).
//!
//! Exit codes: 0 success, 2 configuration error, 3 sweep finished with
//! partial failures. `CSBM_THREADS` caps worker threads.

use clap::{Args, Parser, Subcommand};
use csbm::de::{de_run, jacobian_radius, DeInit, DeParams};
use csbm::fullbp::{fullbp_run, BpConfig};
use csbm::linbp::{linbp_run, LinBpForm};
use csbm::metrics::{covariate_overlap, overlap, overlap_labels, TraceRow};
use csbm::model::{
    derive_params, sample_contextual, sample_gaussian, Format, GaussianInstance, Instance,
};
use csbm::spectral::{gaussian_test, null_threshold, spectral_estimate, SpectralProblem};
use csbm::sweep::{sweep_to_dir, Algorithm, GridSpec, SweepConfig};
use csbm::theory::{null_value, predicted_opt, threshold, ComparisonParams};
use csbm::Error;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "csbm", version, about = "Community detection with covariates: simulation lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample an instance and write it to disk.
    Generate(GenerateArgs),
    /// Run one algorithm on one instance.
    Run(RunArgs),
    /// Monte Carlo sweep over a (lambda, mu) grid.
    Sweep(SweepArgs),
    /// Density evolution by population dynamics.
    De(DeArgs),
    /// Closed-form predictions for one parameter point.
    Theory(TheoryArgs),
    /// Render heatmaps and a summary from a sweep CSV.
    Report(ReportArgs),
}

#[derive(Args, Clone)]
struct ModelArgs {
    #[arg(long, default_value_t = 800)]
    n: usize,
    #[arg(long, default_value_t = 1000)]
    p: usize,
    #[arg(long, default_value_t = 5.0)]
    d: f64,
    #[arg(long, default_value_t = 0.9)]
    lambda: f64,
    #[arg(long, default_value_t = 0.9)]
    mu: f64,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Observation model: sbm | gaussian.
    #[arg(long, default_value = "sbm")]
    model_kind: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Container format: json | bin.
    #[arg(long, default_value = "json")]
    format: String,
    /// Output path.
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// Algorithm: linbp | fullbp | spectral.
    #[arg(long)]
    alg: String,
    /// Observation model: sbm | gaussian.
    #[arg(long, default_value = "sbm")]
    model: String,
    #[command(flatten)]
    params: ModelArgs,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    tmax: usize,
    /// Variance of the random initialization.
    #[arg(long, default_value_t = 0.01)]
    init_scale: f64,
    /// Use the exact Onsager coefficients in the linearized update.
    #[arg(long)]
    exact_onsager: bool,
    /// Detection slack for the spectral test.
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    /// Absolute tolerance of the xi search.
    #[arg(long, default_value_t = 1e-6)]
    tol_xi: f64,
    /// Load the instance from a file instead of sampling.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Write the per-step trace CSV here.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Write the result JSON here (also printed to stdout).
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// JSON config file; explicit flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    lambda_min: Option<f64>,
    #[arg(long)]
    lambda_max: Option<f64>,
    #[arg(long)]
    lambda_count: Option<usize>,
    #[arg(long)]
    mu_min: Option<f64>,
    #[arg(long)]
    mu_max: Option<f64>,
    #[arg(long)]
    mu_count: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    d: Option<f64>,
    #[arg(long)]
    runs: Option<usize>,
    /// Comma-separated list: linbp,fullbp.
    #[arg(long)]
    algs: Option<String>,
    #[arg(long)]
    tmax: Option<usize>,
    #[arg(long)]
    init_scale: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "sweep-out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct DeArgs {
    #[arg(long)]
    lambda: f64,
    #[arg(long)]
    mu: f64,
    #[arg(long)]
    gamma: f64,
    #[arg(long, default_value_t = 5.0)]
    d: f64,
    #[arg(long, default_value_t = 100_000)]
    pool: usize,
    #[arg(long, default_value_t = 20)]
    tmax: usize,
    #[arg(long, default_value_t = 0.1)]
    init_m1: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Write the trajectory CSV here (also printed to stdout).
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TheoryArgs {
    #[arg(long)]
    lambda: f64,
    #[arg(long)]
    mu: f64,
    #[arg(long)]
    gamma: f64,
    /// Covariate coupling weight; defaults to b* sqrt(gamma).
    #[arg(long)]
    b: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
    #[arg(long, default_value_t = 1.0)]
    tau: f64,
}

#[derive(Args)]
struct ReportArgs {
    /// Sweep CSV to render.
    #[arg(long)]
    csv: PathBuf,
    #[arg(long, default_value = "report-out")]
    out_dir: PathBuf,
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("CSBM_THREADS") {
        if let Ok(k) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
        }
    }
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Config(_) | Error::InvalidParams(_) | Error::Schema(_) => {
                    ExitCode::from(2)
                }
                _ => ExitCode::FAILURE,
            }
        }
    }
}

fn dispatch(cli: Cli) -> csbm::Result<ExitCode> {
    match cli.command {
        Command::Generate(args) => generate(args),
        Command::Run(args) => run(args),
        Command::Sweep(args) => run_sweep(args),
        Command::De(args) => run_de(args),
        Command::Theory(args) => run_theory(args),
        Command::Report(args) => run_report(args),
    }
}

fn generate(args: GenerateArgs) -> csbm::Result<ExitCode> {
    let params =
        derive_params(args.model.n, args.model.p, args.model.d, args.model.lambda, args.model.mu)?;
    let format: Format = args.format.parse()?;
    let mut file = std::io::BufWriter::new(std::fs::File::create(&args.out)?);
    match args.model_kind.as_str() {
        "sbm" => sample_contextual(&params, args.seed).save(&mut file, format)?,
        "gaussian" => sample_gaussian(&params, args.seed).save(&mut file, format)?,
        other => {
            return Err(Error::Config(format!("unknown model `{other}` (expected sbm|gaussian)")))
        }
    }
    eprintln!("wrote {}", args.out.display());
    Ok(ExitCode::SUCCESS)
}

/// Sniffs the container format from the leading magic bytes.
fn load_instance(path: &PathBuf) -> csbm::Result<Instance> {
    let bytes = std::fs::read(path)?;
    let format = if bytes.starts_with(b"CSBM") { Format::Bin } else { Format::Json };
    Instance::load(&mut bytes.as_slice(), format)
}

fn load_gaussian(path: &PathBuf) -> csbm::Result<GaussianInstance> {
    let bytes = std::fs::read(path)?;
    let format = if bytes.starts_with(b"CSBM") { Format::Bin } else { Format::Json };
    GaussianInstance::load(&mut bytes.as_slice(), format)
}

fn trace_csv(trace: &[TraceRow]) -> String {
    let mut out = String::from("step,eta_norm,m_norm,overlap,cov_overlap\n");
    for row in trace {
        let _ = writeln!(
            out,
            "{},{:.9e},{:.9e},{:.6},{:.6}",
            row.step, row.eta_norm, row.m_norm, row.overlap, row.cov_overlap
        );
    }
    out
}

fn emit(text: &str, out: &Option<PathBuf>) -> csbm::Result<()> {
    println!("{text}");
    if let Some(path) = out {
        std::fs::write(path, format!("{text}\n"))?;
    }
    Ok(())
}

fn run(args: RunArgs) -> csbm::Result<ExitCode> {
    let params =
        derive_params(args.params.n, args.params.p, args.params.d, args.params.lambda, args.params.mu)?;

    match (args.alg.as_str(), args.model.as_str()) {
        ("linbp", "sbm") | ("fullbp", "sbm") => {
            let inst = match &args.input {
                Some(path) => load_instance(path)?,
                None => sample_contextual(&params, args.seed),
            };
            let out = if args.alg == "linbp" {
                let form =
                    if args.exact_onsager { LinBpForm::ExactOnsager } else { LinBpForm::Standard };
                linbp_run(&inst, args.tmax, args.init_scale, args.seed, form)?
            } else {
                let cfg = BpConfig::new(&inst.params, args.tmax, args.init_scale)?;
                fullbp_run(&inst, &cfg, args.seed)?
            };
            if let Some(path) = &args.trace {
                std::fs::write(path, trace_csv(&out.trace))?;
            }
            let ov = overlap_labels(&out.v_hat, &inst.truth.v).unwrap_or(0.0);
            let cov = if out.u_hat.iter().any(|&x| x != 0.0) {
                covariate_overlap(&out.u_hat, &inst.truth.u).unwrap_or(0.0)
            } else {
                0.0
            };
            let result = serde_json::json!({
                "algorithm": args.alg,
                "n": inst.params.n,
                "p": inst.params.p,
                "d": inst.params.d,
                "lambda": inst.params.lambda,
                "mu": inst.params.mu,
                "gamma": inst.params.gamma,
                "seed": args.seed,
                "tmax": args.tmax,
                "init_scale": args.init_scale,
                "eta_norm0": out.norm0,
                "eta_norm_final": out.state.eta_norm(),
                "decision": out.decision,
                "overlap": ov,
                "cov_overlap": cov,
                "saturated": out.saturated,
            });
            emit(&serde_json::to_string_pretty(&result)?, &args.out)?;
            Ok(ExitCode::SUCCESS)
        }
        ("spectral", model) => {
            let (result, truth_v): (csbm::spectral::SpectralResult, Vec<i8>);
            match model {
                "gaussian" => {
                    let inst = match &args.input {
                        Some(path) => load_gaussian(path)?,
                        None => sample_gaussian(&params, args.seed),
                    };
                    let problem = SpectralProblem::from_gaussian(&inst);
                    result = spectral_estimate(&problem, args.tol_xi, args.seed)?;
                    truth_v = inst.truth.v.clone();
                }
                "sbm" => {
                    // Extrapolation beyond the Gaussian-model guarantee.
                    eprintln!(
                        "note: spectral on the sparse model uses the centered adjacency; \
                         the theory covers the gaussian model"
                    );
                    let inst = match &args.input {
                        Some(path) => load_instance(path)?,
                        None => sample_contextual(&params, args.seed),
                    };
                    let problem = SpectralProblem::from_sbm(&inst);
                    result = spectral_estimate(&problem, args.tol_xi, args.seed)?;
                    truth_v = inst.truth.v.clone();
                }
                other => {
                    return Err(Error::Config(format!(
                        "unknown model `{other}` (expected sbm|gaussian)"
                    )))
                }
            }
            let ov = overlap(&result.v_hat, &truth_v)?;
            let thr = null_threshold(params.lambda, params.mu, params.gamma)?;
            let decision =
                gaussian_test(result.t_value, params.lambda, params.mu, params.gamma, args.delta)?;
            let json = serde_json::json!({
                "xi_star": result.xi_star,
                "t_value": result.t_value,
                "threshold": thr,
                "decision": decision,
                "overlap": ov,
            });
            emit(&serde_json::to_string_pretty(&json)?, &args.out)?;
            Ok(ExitCode::SUCCESS)
        }
        ("linbp", other) | ("fullbp", other) => Err(Error::Config(format!(
            "message passing runs on the sbm model, not `{other}`"
        ))),
        (alg, _) => Err(Error::Config(format!(
            "unknown algorithm `{alg}` (expected linbp|fullbp|spectral)"
        ))),
    }
}

fn run_sweep(args: SweepArgs) -> csbm::Result<ExitCode> {
    let mut cfg: SweepConfig = match &args.config {
        Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)
            .map_err(|e| Error::Config(format!("bad config file: {e}")))?,
        None => SweepConfig {
            lambda: GridSpec { min: 0.0, max: 1.0, count: 11 },
            mu: GridSpec { min: 0.0, max: f64::NAN, count: 11 },
            n: 800,
            p: 1000,
            d: 5.0,
            runs: 20,
            algorithms: vec![Algorithm::Fullbp],
            t_max: 50,
            init_scale: 0.01,
            seed: 1,
        },
    };
    // Flags override the file (or the defaults).
    if let Some(v) = args.lambda_min {
        cfg.lambda.min = v;
    }
    if let Some(v) = args.lambda_max {
        cfg.lambda.max = v;
    }
    if let Some(v) = args.lambda_count {
        cfg.lambda.count = v;
    }
    if let Some(v) = args.mu_min {
        cfg.mu.min = v;
    }
    if let Some(v) = args.mu_max {
        cfg.mu.max = v;
    }
    if let Some(v) = args.mu_count {
        cfg.mu.count = v;
    }
    if let Some(v) = args.n {
        cfg.n = v;
    }
    if let Some(v) = args.p {
        cfg.p = v;
    }
    if let Some(v) = args.d {
        cfg.d = v;
    }
    if let Some(v) = args.runs {
        cfg.runs = v;
    }
    if let Some(list) = &args.algs {
        cfg.algorithms = list
            .split(',')
            .map(|s| s.trim().parse::<Algorithm>())
            .collect::<csbm::Result<Vec<_>>>()?;
    }
    if let Some(v) = args.tmax {
        cfg.t_max = v;
    }
    if let Some(v) = args.init_scale {
        cfg.init_scale = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if cfg.mu.max.is_nan() {
        // Default grid tops out at sqrt(gamma), the covariate-only threshold.
        cfg.mu.max = cfg.gamma().sqrt();
    }

    let (result, csv_path) = sweep_to_dir(&cfg, &args.out_dir)?;
    eprintln!(
        "wrote {} ({} rows, {} failed runs)",
        csv_path.display(),
        result.rows.len(),
        result.total_failed
    );
    if result.total_failed > 0 {
        return Ok(ExitCode::from(3));
    }
    Ok(ExitCode::SUCCESS)
}

fn run_de(args: DeArgs) -> csbm::Result<ExitCode> {
    let params = DeParams::new(args.lambda, args.mu, args.gamma, args.d)?;
    let traj = de_run(
        &params,
        &DeInit::Informative { m1: args.init_m1 },
        args.tmax,
        args.pool,
        args.seed,
    )?;
    let mut csv = String::from("step,m1,m2,m3,m4,m1_over_sqrt_m3\n");
    for (t, m) in traj.moments.iter().enumerate() {
        let _ = writeln!(
            csv,
            "{t},{:.9e},{:.9e},{:.9e},{:.9e},{:.6}",
            m.m1,
            m.m2,
            m.m3,
            m.m4,
            m.normalized_correlation()
        );
    }
    print!("{csv}");
    if let Some(path) = &args.out {
        std::fs::write(path, csv)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn run_theory(args: TheoryArgs) -> csbm::Result<ExitCode> {
    let cp = match args.b {
        Some(b) => ComparisonParams::new(args.lambda, args.mu, args.gamma, b, args.rho, args.tau)?,
        None => ComparisonParams::from_model(args.lambda, args.mu, args.gamma)?,
    };
    let opt = predicted_opt(&cp);
    let json = serde_json::json!({
        "threshold": threshold(args.lambda, args.mu, args.gamma),
        "jacobian_radius": jacobian_radius(args.lambda, args.mu, args.gamma),
        "predicted_opt": opt.value,
        "t_star": opt.t_star,
        "null_value": null_value(&cp),
    });
    println!("{}", serde_json::to_string_pretty(&json)?);
    Ok(ExitCode::SUCCESS)
}

fn run_report(args: ReportArgs) -> csbm::Result<ExitCode> {
    let written = csbm::report::report(&args.csv, &args.out_dir)?;
    for path in written {
        eprintln!("wrote {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}
