use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mmdpoints::config::{AnnealSettings, HerdingSettings, StationarySettings, SupportPointsSettings, TargetSpec};
use mmdpoints::dataset::{load_points, write_points};
use mmdpoints::output::write_results;
use mmdpoints::{fit_rate, load_config, parse_results, run_experiment, BenchError};
use mmdpoints_core::baselines::{iid_points, kernel_herding, support_points};
use mmdpoints_core::{
    check_assumption5, initial_points, mmd_squared, run_descent, stationarity_residual, Embedding, KernelSpec,
    NoiseSchedule, Target, TrajectoryEntry,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "mmdpoints",
    version,
    about = "Stationary MMD point sets and integration benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run noisy MMD particle descent and write the points and trajectory.
    Descend(DescendArgs),
    /// Build a baseline point set.
    Baseline(BaselineArgs),
    /// Run an experiment grid from a JSON config.
    Bench { config: PathBuf },
    /// Fit a log-log rate to the per-size medians in a results file.
    Rate {
        results: PathBuf,
        #[arg(long)]
        method: String,
        #[arg(long)]
        metric: String,
    },
    /// Evaluate the noise-level condition for a point set.
    CheckA5(CheckArgs),
}

#[derive(Args)]
struct Problem {
    /// Kernel spec, e.g. `gaussian:l=1` or `imq:l=1,c=1`.
    #[arg(long, default_value = "gaussian:l=1")]
    kernel: KernelSpec,
    /// `gmm:benchmark`, `normal:d=<d>` or `dataset:<path.csv>`.
    #[arg(long, default_value = "gmm:benchmark")]
    target: TargetSpec,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScheduleKind {
    None,
    Powerlaw,
    Adaptive,
}

#[derive(Args)]
struct DescendArgs {
    #[command(flatten)]
    problem: Problem,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long = "T", default_value_t = 20_000)]
    iterations: usize,
    #[arg(long, default_value_t = 1.0)]
    beta0: f64,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, value_enum, default_value = "powerlaw")]
    schedule: ScheduleKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    log_every: usize,
    #[arg(long)]
    stop_residual: Option<f64>,
    /// Switch the noise off after this iteration.
    #[arg(long)]
    noise_until: Option<usize>,
    /// Anneal the step geometrically to this value.
    #[arg(long, requires_all = ["anneal_from", "anneal_to"])]
    anneal_end: Option<f64>,
    #[arg(long)]
    anneal_from: Option<usize>,
    #[arg(long)]
    anneal_to: Option<usize>,
    /// Run the noise-level check every this many iterations.
    #[arg(long)]
    check_every: Option<usize>,
    #[arg(long, default_value_t = 100)]
    check_samples: usize,
    /// Perturb the all-zero start by this times standard-normal draws.
    #[arg(long)]
    jitter: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum BaselineMethod {
    Iid,
    Herding,
    SupportPoints,
}

#[derive(Args)]
struct BaselineArgs {
    #[command(flatten)]
    problem: Problem,
    #[arg(long, value_enum)]
    method: BaselineMethod,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Herding candidate pool size.
    #[arg(long)]
    pool: Option<usize>,
    /// Polish each herding pick by local ascent.
    #[arg(long)]
    refine: bool,
    #[arg(long)]
    refine_steps: Option<usize>,
    /// Support-points iterations.
    #[arg(long)]
    iterations: Option<usize>,
    /// Support-points step size.
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    problem: Problem,
    /// Point set to check (CSV, one point per row).
    #[arg(long)]
    points: PathBuf,
    #[arg(long)]
    beta: f64,
    #[arg(long, default_value_t = 100)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    // Usage errors exit with 1 like other configuration errors; 2 is reserved
    // for partially failed experiment grids.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Descend(a) => descend(a),
        Command::Baseline(a) => baseline(a),
        Command::Bench { config } => bench(&config),
        Command::Rate {
            results,
            method,
            metric,
        } => rate(&results, &method, &metric),
        Command::CheckA5(a) => check_a5(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn schedule(a: &DescendArgs) -> NoiseSchedule {
    match a.schedule {
        ScheduleKind::None => NoiseSchedule::None,
        ScheduleKind::Powerlaw => NoiseSchedule::power_law(a.beta0, a.alpha),
        ScheduleKind::Adaptive => match NoiseSchedule::adaptive_default() {
            NoiseSchedule::Adaptive { exponents, .. } => NoiseSchedule::Adaptive {
                beta0: a.beta0,
                exponents,
                check_samples: a.check_samples,
            },
            other => other,
        },
    }
}

fn descend(a: DescendArgs) -> Result<ExitCode, BenchError> {
    let target = a.problem.target.build(Path::new("."))?;
    let emb = Embedding::new(a.problem.kernel.kernel, &target)?;
    let settings = StationarySettings {
        iterations: a.iterations,
        gamma: a.gamma,
        schedule: schedule(&a),
        anneal: a.anneal_end.map(|end| AnnealSettings {
            end,
            from: a.anneal_from.unwrap_or(1),
            to: a.anneal_to.unwrap_or(a.iterations),
        }),
        noise_until: a.noise_until,
        stop_residual: a.stop_residual,
        log_every: a.log_every,
        init_jitter: a.jitter,
    };
    let mut cfg = settings.descent_config(a.seed);
    cfg.assumption_check_every = a.check_every;
    cfg.assumption_check_samples = a.check_samples;
    let warnings = cfg.warnings(target.dim(), a.problem.kernel.kernel.kappa_bound());
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let x0 = initial_points(a.n, target.dim(), a.jitter, a.seed)?;
    let out = run_descent(&emb, &x0, &cfg)?;

    std::fs::create_dir_all(&a.out).map_err(|e| BenchError::io(&a.out, e))?;
    write_points(&a.out.join("points.csv"), &out.final_points)?;
    let traj_path = a.out.join("trajectory.csv");
    std::fs::write(&traj_path, trajectory_csv(&out.trajectory)).map_err(|e| BenchError::io(&traj_path, e))?;
    let report = mmd_squared(&emb, &out.final_points)?;
    let meta = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "kernel": a.problem.kernel.to_string(),
        "target": a.problem.target,
        "n": a.n,
        "init_jitter": a.jitter,
        "config": cfg,
        "warnings": warnings,
        "steps": out.steps,
        "stopped_on_residual": out.stopped_on_residual,
        "final": {
            "mmd": report.mmd,
            "mmd_squared": report.mmd_squared,
            "residual": stationarity_residual(&emb, &out.final_points)?,
        },
    });
    let meta_path = a.out.join("meta.json");
    std::fs::write(&meta_path, serde_json::to_string_pretty(&meta).unwrap() + "\n")
        .map_err(|e| BenchError::io(&meta_path, e))?;
    println!(
        "{} steps, mmd {:.6e}, residual {:.3e}",
        out.steps,
        report.mmd,
        stationarity_residual(&emb, &out.final_points)?
    );
    Ok(ExitCode::SUCCESS)
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn trajectory_csv(entries: &[TrajectoryEntry]) -> String {
    let mut s = String::from("t,mmd,residual,beta,a5_lhs,a5_rhs,a5_satisfied\n");
    for e in entries {
        writeln!(
            s,
            "{},{:.16e},{:.16e},{:.16e},{},{},{}",
            e.t,
            e.mmd,
            e.residual,
            e.beta,
            opt(e.a5_lhs.map(|v| format!("{v:.16e}"))),
            opt(e.a5_rhs.map(|v| format!("{v:.16e}"))),
            opt(e.a5_satisfied),
        )
        .unwrap();
    }
    s
}

fn baseline(a: BaselineArgs) -> Result<ExitCode, BenchError> {
    let target: Target<f64> = a.problem.target.build(Path::new("."))?;
    let x = match a.method {
        BaselineMethod::Iid => iid_points(&target, a.n, a.seed)?,
        BaselineMethod::Herding => {
            let emb = Embedding::new(a.problem.kernel.kernel, &target)?;
            let mut h = HerdingSettings::default();
            h.candidate_pool = a.pool.or(h.candidate_pool);
            h.local_refine = a.refine;
            h.refine_steps = a.refine_steps.unwrap_or(h.refine_steps);
            kernel_herding(&emb, &h.config(a.n, a.seed))?
        }
        BaselineMethod::SupportPoints => {
            let mut s = SupportPointsSettings::default();
            s.iterations = a.iterations.unwrap_or(s.iterations);
            s.step = a.step.unwrap_or(s.step);
            support_points(&target, &s.config(a.n, a.seed))?
        }
    };
    if let Some(dir) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| BenchError::io(dir, e))?;
    }
    write_points(&a.out, &x)?;
    Ok(ExitCode::SUCCESS)
}

fn bench(config: &Path) -> Result<ExitCode, BenchError> {
    let cfg = load_config(config)?;
    let base = config.parent().unwrap_or(Path::new("."));
    let outcome = run_experiment(&cfg, base)?;
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    let paths = write_results(
        &base.join(&cfg.output_dir),
        &outcome.rows,
        &outcome.summary,
        &outcome.errors,
    )?;
    for (method, metrics) in &outcome.summary.stats {
        for (metric, cells) in metrics {
            for (n, s) in cells {
                println!(
                    "{method:>16} {metric:>14} n={n:<6} median {:.4e} [{:.4e}, {:.4e}]",
                    s.median, s.q25, s.q75
                );
            }
            if let Some(fit) = outcome.summary.rates.get(method).and_then(|m| m.get(metric)) {
                println!("{method:>16} {metric:>14} slope {:.3} (r2 {:.3})", fit.slope, fit.r2);
            }
        }
    }
    println!("wrote {}", paths.results.display());
    if outcome.errors.is_empty() {
        return Ok(ExitCode::SUCCESS);
    }
    for e in &outcome.errors {
        eprintln!("cell {} n={} seed={} failed: {}", e.method, e.n, e.seed, e.reason);
    }
    eprintln!(
        "{} cell(s) failed; see {}",
        outcome.errors.len(),
        paths.errors.display()
    );
    Ok(ExitCode::from(2))
}

fn rate(results: &Path, method: &str, metric: &str) -> Result<ExitCode, BenchError> {
    let rows = parse_results(results)?;
    let fit = fit_rate(&rows, method, metric)?;
    println!("{}", serde_json::to_string(&fit).unwrap());
    Ok(ExitCode::SUCCESS)
}

fn check_a5(a: CheckArgs) -> Result<ExitCode, BenchError> {
    let target = a.problem.target.build(Path::new("."))?;
    let emb = Embedding::new(a.problem.kernel.kernel, &target)?;
    let x = load_points(&a.points, false)?;
    let check = check_assumption5(&emb, &x, a.beta, a.samples, &mut ChaCha8Rng::seed_from_u64(a.seed))?;
    println!(
        "{}",
        json!({
            "lhs": check.lhs,
            "rhs": check.rhs,
            "rhs_first_order": check.rhs_first_order,
            "satisfied": check.satisfied,
        })
    );
    Ok(ExitCode::SUCCESS)
}
