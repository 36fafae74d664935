//! Experiment sweeps over regularization strength and horizon, written as
//! CSV with one row per trial and one aggregate row per `(λ, T)` cell.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{bound_report, ReportOptions};
use crate::error::{Error, Result};
use crate::harness::generator::{generate_instance, trial_seed, GeneratorConfig};
use crate::regularizer::{RegularizerConfig, Variant};
use crate::solver::{run, SolverConfig};

pub const CSV_HEADER: &str = "trial,lambda,T,seed,total_reward,regularizer_value,objective,\
fairness_min_rel_consumption,dual_bound_mu_avg,dual_bound_minimized,regret_vs_mu_avg,\
depletion_time,wall_time_ms";

/// Value of the `trial` column on aggregate rows.
pub const AGGREGATE_LABEL: &str = "aggregate";

/// Fraction of aborted trials above which a sweep counts as failed.
pub const MAX_ABORT_FRACTION: f64 = 0.01;

fn default_lambdas() -> Vec<f64> {
    vec![0.0, 0.0001, 0.001, 0.01, 0.1]
}

fn default_horizons() -> Vec<usize> {
    let mut h = vec![100];
    h.extend((1..=10).map(|k| k * 1000));
    h
}

fn default_trials() -> usize {
    100
}

fn default_regularizer() -> RegularizerConfig {
    RegularizerConfig::new(Variant::MaxMin, 0.0)
}

fn default_minimize_iterations() -> usize {
    200
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    #[serde(default = "default_lambdas")]
    pub lambdas: Vec<f64>,
    #[serde(default = "default_horizons")]
    pub horizons: Vec<usize>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Variant and hinge parameters; the strength comes from `lambdas`.
    #[serde(default = "default_regularizer")]
    pub regularizer: RegularizerConfig,
    /// Base seed of the per-trial seeds.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Offline dual descent iterations per trial; 0 leaves the column empty.
    #[serde(default = "default_minimize_iterations")]
    pub minimize_iterations: usize,
    /// Fill `wall_time_ms`. Off by default so output is reproducible.
    #[serde(default)]
    pub record_wall_time: bool,
    /// Worker threads; `None` uses the global pool.
    #[serde(default)]
    pub jobs: Option<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            lambdas: default_lambdas(),
            horizons: default_horizons(),
            trials: default_trials(),
            regularizer: default_regularizer(),
            seed: 0,
            output: None,
            minimize_iterations: default_minimize_iterations(),
            record_wall_time: false,
            jobs: None,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if self.lambdas.is_empty() || self.horizons.is_empty() {
            return Err(Error::InvalidConfig(
                "lambdas and horizons must be nonempty".into(),
            ));
        }
        if let Some(&h) = self.horizons.iter().find(|h| **h == 0) {
            return Err(Error::InvalidConfig(format!(
                "horizon {h} must be at least 1"
            )));
        }
        if let Some(l) = self.lambdas.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
            return Err(Error::InvalidConfig(format!(
                "lambda {l} must be nonnegative"
            )));
        }
        Ok(())
    }
}

/// Regularizer for strength `lambda`: `λ = 0` is the unregularized problem;
/// hinge penalties are scaled by `λ`.
pub fn regularizer_at(base: &RegularizerConfig, lambda: f64) -> RegularizerConfig {
    if lambda == 0.0 {
        return RegularizerConfig::new(Variant::None, 0.0);
    }
    let mut cfg = base.clone();
    match base.variant {
        Variant::None => {}
        Variant::MaxMin | Variant::LoadBalancing => cfg.lambda = lambda,
        Variant::Hinge | Variant::MirroredHinge => {
            cfg.c = if base.c.is_empty() {
                Vec::new()
            } else {
                base.c.iter().map(|c| c * lambda).collect()
            };
            cfg.lambda = lambda;
        }
    }
    cfg
}

/// Metrics of one completed trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialMetrics {
    pub total_reward: f64,
    pub regularizer_value: f64,
    pub objective: f64,
    pub fairness: f64,
    pub dual_bound_mu_avg: f64,
    pub dual_bound_minimized: Option<f64>,
    pub regret_vs_mu_avg: f64,
    pub depletion_time: Option<usize>,
    pub wall_time_ms: Option<f64>,
    /// `Σ_t b_t x_t ≤ Tρ` held for the forward sums.
    pub feasible: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialOutcome {
    pub lambda_index: usize,
    pub lambda: f64,
    pub horizon: usize,
    pub trial: usize,
    pub seed: u64,
    pub result: std::result::Result<TrialMetrics, String>,
}

/// Mean and sample standard deviation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl Moments {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Some(Self {
            mean,
            std: var.sqrt(),
            count: values.len(),
        })
    }

    pub fn std_error(&self) -> f64 {
        self.std / (self.count as f64).sqrt()
    }
}

#[derive(Clone, Debug)]
pub struct SweepSummary {
    pub outcomes: Vec<TrialOutcome>,
}

impl SweepSummary {
    pub fn aborted(&self) -> usize {
        self.outcomes.iter().filter(|o| o.result.is_err()).count()
    }

    pub fn abort_fraction(&self) -> f64 {
        self.aborted() as f64 / self.outcomes.len().max(1) as f64
    }

    pub fn failed(&self) -> bool {
        self.abort_fraction() > MAX_ABORT_FRACTION
    }

    /// Successful trials of one `(λ index, T)` cell.
    pub fn cell(&self, lambda_index: usize, horizon: usize) -> Vec<&TrialMetrics> {
        self.outcomes
            .iter()
            .filter(|o| o.lambda_index == lambda_index && o.horizon == horizon)
            .filter_map(|o| o.result.as_ref().ok())
            .collect()
    }
}

/// Runs a single trial of the sweep.
pub fn run_trial(
    gen: &GeneratorConfig,
    solver: &SolverConfig,
    reg_cfg: &RegularizerConfig,
    horizon: usize,
    seed: u64,
    opts: &ReportOptions,
    record_wall_time: bool,
) -> Result<TrialMetrics> {
    let start = Instant::now();
    let instance = generate_instance(gen, horizon, seed)?;
    let reg = reg_cfg.bind(&instance.rho)?;
    let trace = run(&instance, &reg, solver)?;
    let report = bound_report(&instance, &reg, &trace, opts)?;
    let used = trace.total_consumption();
    let budget = instance.budget();
    Ok(TrialMetrics {
        total_reward: trace.total_reward,
        regularizer_value: trace.regularizer_value,
        objective: trace.objective,
        fairness: trace.fairness(&instance.rho),
        dual_bound_mu_avg: report.dual_at_mu_avg,
        dual_bound_minimized: report.dual_minimized,
        regret_vs_mu_avg: report.regret_vs_dual_avg,
        depletion_time: trace.depletion_time,
        wall_time_ms: record_wall_time.then(|| start.elapsed().as_secs_f64() * 1e3),
        feasible: used.iter().zip(&budget).all(|(u, b)| u <= b),
    })
}

/// Runs every `(λ, T, trial)` cell and writes the CSV to `out`.
pub fn run_sweep(
    sweep: &SweepConfig,
    gen: &GeneratorConfig,
    solver: &SolverConfig,
    out: impl Write,
) -> Result<SweepSummary> {
    sweep.validate()?;
    let gen = gen.resolve()?;
    let opts = ReportOptions {
        minimize_iterations: sweep.minimize_iterations,
        brute_force_step: None,
    };

    let mut cells = Vec::new();
    for (li, &lambda) in sweep.lambdas.iter().enumerate() {
        for &horizon in &sweep.horizons {
            for trial in 0..sweep.trials {
                cells.push((
                    li,
                    lambda,
                    horizon,
                    trial,
                    trial_seed(sweep.seed, li, horizon, trial),
                ));
            }
        }
    }

    let work = || {
        cells
            .par_iter()
            .map(|&(li, lambda, horizon, trial, seed)| {
                let reg_cfg = regularizer_at(&sweep.regularizer, lambda);
                let result = run_trial(&gen, solver, &reg_cfg, horizon, seed, &opts, sweep.record_wall_time)
                    .map_err(|e| e.to_string());
                if let Err(e) = &result {
                    log::warn!("trial aborted (lambda={lambda}, T={horizon}, trial={trial}, seed={seed}): {e}");
                }
                TrialOutcome {
                    lambda_index: li,
                    lambda,
                    horizon,
                    trial,
                    seed,
                    result,
                }
            })
            .collect::<Vec<_>>()
    };
    let outcomes = match sweep.jobs {
        Some(jobs) => rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build()
            .map_err(|e| Error::InvalidConfig(e.to_string()))?
            .install(work),
        None => work(),
    };

    let summary = SweepSummary { outcomes };
    write_csv(&summary, sweep, &gen, solver, out)?;
    Ok(summary)
}

/// [`run_sweep`] into a file.
pub fn run_sweep_to_path(
    sweep: &SweepConfig,
    gen: &GeneratorConfig,
    solver: &SolverConfig,
    path: impl AsRef<Path>,
) -> Result<SweepSummary> {
    let file = BufWriter::new(File::create(path)?);
    run_sweep(sweep, gen, solver, file)
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn write_csv(
    summary: &SweepSummary,
    sweep: &SweepConfig,
    gen: &GeneratorConfig,
    solver: &SolverConfig,
    mut out: impl Write,
) -> Result<()> {
    let created = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    writeln!(out, "# created_unix: {created}")?;
    writeln!(out, "# generator: {}", serde_json::to_string(gen)?)?;
    writeln!(out, "# sweep: {}", serde_json::to_string(sweep)?)?;
    writeln!(out, "# solver: {}", serde_json::to_string(solver)?)?;
    writeln!(out, "{CSV_HEADER}")?;

    for (li, &lambda) in sweep.lambdas.iter().enumerate() {
        for &horizon in &sweep.horizons {
            let rows: Vec<&TrialOutcome> = summary
                .outcomes
                .iter()
                .filter(|o| o.lambda_index == li && o.horizon == horizon)
                .collect();
            for o in &rows {
                match &o.result {
                    Ok(r) => writeln!(
                        out,
                        "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                        o.trial,
                        lambda,
                        horizon,
                        o.seed,
                        r.total_reward,
                        r.regularizer_value,
                        r.objective,
                        r.fairness,
                        r.dual_bound_mu_avg,
                        opt(r.dual_bound_minimized),
                        r.regret_vs_mu_avg,
                        opt(r.depletion_time),
                        opt(r.wall_time_ms),
                    )?,
                    Err(_) => writeln!(
                        out,
                        "{},{},{},{},,,,,,,,,",
                        o.trial, lambda, horizon, o.seed
                    )?,
                }
            }
            let ok: Vec<&TrialMetrics> =
                rows.iter().filter_map(|o| o.result.as_ref().ok()).collect();
            writeln!(out, "{}", aggregate_row(lambda, horizon, &ok))?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Aggregate row: numeric columns hold `mean|std` over successful trials and
/// the `seed` column holds the number of trials aggregated.
fn aggregate_row(lambda: f64, horizon: usize, ok: &[&TrialMetrics]) -> String {
    let cell = |values: Vec<f64>| match Moments::of(&values) {
        Some(m) => format!("{}|{}", m.mean, m.std),
        None => String::new(),
    };
    let all = |f: &dyn Fn(&TrialMetrics) -> Option<f64>| -> Vec<f64> {
        let v: Vec<Option<f64>> = ok.iter().map(|r| f(r)).collect();
        if v.iter().all(Option::is_some) {
            v.into_iter().flatten().collect()
        } else {
            Vec::new()
        }
    };
    let fields = [
        cell(ok.iter().map(|r| r.total_reward).collect()),
        cell(ok.iter().map(|r| r.regularizer_value).collect()),
        cell(ok.iter().map(|r| r.objective).collect()),
        cell(ok.iter().map(|r| r.fairness).collect()),
        cell(ok.iter().map(|r| r.dual_bound_mu_avg).collect()),
        cell(all(&|r| r.dual_bound_minimized)),
        cell(ok.iter().map(|r| r.regret_vs_mu_avg).collect()),
        cell(
            ok.iter()
                .filter_map(|r| r.depletion_time.map(|t| t as f64))
                .collect(),
        ),
        cell(all(&|r| r.wall_time_ms)),
    ];
    format!(
        "{AGGREGATE_LABEL},{lambda},{horizon},{},{}",
        ok.len(),
        fields.join(",")
    )
}

/// Strips `#` comment lines, leaving the header and data rows.
pub fn csv_body(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect()
}
