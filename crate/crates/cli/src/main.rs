use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use dualalloc::bounds::{bound_report, ReportOptions};
use dualalloc::harness::sweep::{run_sweep, SweepConfig, MAX_ABORT_FRACTION};
use dualalloc::harness::verify::{self, Fault, Level};
use dualalloc::harness::{generate_instance, ExperimentConfig};
use dualalloc::{run, Instance, Variant};

#[derive(Parser)]
#[command(
    name = "dualalloc",
    version,
    about = "Dual subgradient descent for regularized online allocation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single trial and print its bound report as JSON.
    Run(RunArgs),
    /// Run the (λ, T, trial) sweep and write CSV.
    Sweep(Common),
    /// Run the verification suites.
    Verify(VerifyArgs),
    /// Emit a generated instance as JSON.
    Gen(Common),
}

#[derive(Args, Clone, Default)]
struct Common {
    /// JSON file with "generator", "sweep" and "solver" sections.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Horizon; for `sweep` replaces the configured horizons.
    #[arg(long = "T")]
    horizon: Option<usize>,
    /// Regularization strength; for `sweep` replaces the configured list.
    #[arg(long)]
    lambda: Option<f64>,
    /// none, maxmin, loadbal, hinge or mirrored_hinge.
    #[arg(long)]
    regularizer: Option<Variant>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Step-size scale: η = scale / √T.
    #[arg(long)]
    eta_scale: Option<f64>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// Read the instance from JSON instead of generating it.
    #[arg(long)]
    instance: Option<PathBuf>,
    /// Write the per-step trace as JSON lines.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Grid step for the exhaustive optimum (tiny instances only).
    #[arg(long)]
    brute_force_step: Option<f64>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value = "fast")]
    level: Level,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, hide = true)]
    inject_projection_fault: Option<f64>,
}

const DEFAULT_RUN_HORIZON: usize = 1000;

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => {
            ExperimentConfig::load(path).with_context(|| format!("reading {}", path.display()))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(h) = common.horizon {
        cfg.sweep.horizons = vec![h];
    }
    if let Some(l) = common.lambda {
        cfg.sweep.lambdas = vec![l];
    }
    if let Some(v) = common.regularizer {
        cfg.sweep.regularizer.variant = v;
    }
    if let Some(t) = common.trials {
        cfg.sweep.trials = t;
    }
    if let Some(s) = common.seed {
        cfg.sweep.seed = s;
    }
    if let Some(e) = common.eta_scale {
        cfg.solver.eta_scale = e;
    }
    if common.jobs.is_some() {
        cfg.sweep.jobs = common.jobs;
    }
    if common.output.is_some() {
        cfg.sweep.output = common.output.clone();
    }
    Ok(cfg)
}

fn output(path: Option<&PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// Single-trial horizon and λ: the first configured value unless overridden.
fn single_cell(cfg: &ExperimentConfig, common: &Common) -> (usize, f64) {
    let horizon = common.horizon.unwrap_or(DEFAULT_RUN_HORIZON);
    let lambda = common
        .lambda
        .or_else(|| cfg.sweep.lambdas.iter().copied().find(|l| *l > 0.0))
        .unwrap_or(0.0);
    (horizon, lambda)
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let cfg = load_config(&args.common)?;
    let (horizon, lambda) = single_cell(&cfg, &args.common);
    let instance = match &args.instance {
        Some(path) => {
            Instance::load(path).with_context(|| format!("reading {}", path.display()))?
        }
        None => generate_instance(&cfg.generator.resolve()?, horizon, cfg.sweep.seed)?,
    };
    let reg_cfg = dualalloc::harness::sweep::regularizer_at(&cfg.sweep.regularizer, lambda);
    let reg = reg_cfg.bind(&instance.rho)?;
    let trace = run(&instance, &reg, &cfg.solver)?;
    if let Some(path) = &args.trace {
        trace.write_jsonl(output(Some(path))?)?;
    }
    let opts = ReportOptions {
        minimize_iterations: cfg.sweep.minimize_iterations,
        brute_force_step: args.brute_force_step,
    };
    let report = bound_report(&instance, &reg, &trace, &opts)?;
    let mut out = output(args.common.output.as_ref())?;
    serde_json::to_writer_pretty(&mut out, &report)?;
    writeln!(out)?;
    Ok(())
}

fn cmd_sweep(common: Common) -> Result<ExitCode> {
    let cfg = load_config(&common)?;
    let sweep: SweepConfig = cfg.sweep.clone();
    let out = output(sweep.output.as_ref())?;
    let summary = run_sweep(&sweep, &cfg.generator, &cfg.solver, out)?;
    let aborted = summary.aborted();
    if aborted > 0 {
        eprintln!("{aborted} of {} trials aborted", summary.outcomes.len());
    }
    if summary.failed() {
        eprintln!("abort fraction above {MAX_ABORT_FRACTION}");
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(args: VerifyArgs) -> Result<ExitCode> {
    let fault = Fault {
        projection_offset: args.inject_projection_fault.unwrap_or(0.0),
    };
    let results = verify::run_all(args.level, args.seed, fault)?;
    let mut ok = true;
    for r in &results {
        println!("{r}");
        ok &= r.passed();
    }
    Ok(if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn cmd_gen(common: Common) -> Result<()> {
    let cfg = load_config(&common)?;
    let (horizon, _) = single_cell(&cfg, &common);
    if horizon == 0 {
        bail!("--T must be at least 1");
    }
    let instance = generate_instance(&cfg.generator.resolve()?, horizon, cfg.sweep.seed)?;
    let mut out = output(common.output.as_ref())?;
    out.write_all(instance.to_json()?.as_bytes())?;
    writeln!(out)?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args).map(|_| ExitCode::SUCCESS),
        Command::Sweep(common) => cmd_sweep(common),
        Command::Verify(args) => cmd_verify(args),
        Command::Gen(common) => cmd_gen(common).map(|_| ExitCode::SUCCESS),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
