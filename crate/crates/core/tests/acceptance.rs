//! Acceptance criteria, one PASS/FAIL line each. Exits nonzero on failure.

use std::process::ExitCode;
use std::time::Instant;

use dualalloc::bounds::{theoretical_bound, BoundConstants};
use dualalloc::harness::sweep::{csv_body, run_sweep, Moments, SweepConfig, SweepSummary};
use dualalloc::harness::verify::{self, Fault, FeasibilityLog};
use dualalloc::harness::GeneratorConfig;
use dualalloc::{RegularizerConfig, SolverConfig, SupportBounds, Variant, WeightRule};

const SEED: u64 = 20_240_601;

struct Outcome {
    passed: bool,
    detail: String,
}

fn report(id: u32, title: &str, limit_s: f64, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = f();
    let secs = start.elapsed().as_secs_f64();
    let passed = out.passed && secs < limit_s;
    println!(
        "{} criterion {id}: {title} ({}; {secs:.2}s of {limit_s}s)",
        if passed { "PASS" } else { "FAIL" },
        out.detail
    );
    passed
}

fn from_suite(res: verify::SuiteResult) -> Outcome {
    Outcome {
        passed: res.passed(),
        detail: res.to_string(),
    }
}

fn maxmin_sweep(lambdas: Vec<f64>, horizons: Vec<usize>, trials: usize, seed: u64) -> SweepConfig {
    SweepConfig {
        lambdas,
        horizons,
        trials,
        regularizer: RegularizerConfig::new(Variant::MaxMin, 0.0),
        seed,
        minimize_iterations: 0,
        ..SweepConfig::default()
    }
}

fn record_sweep_feasibility(summary: &SweepSummary, log: &mut FeasibilityLog) -> usize {
    let mut aborted = 0;
    for o in &summary.outcomes {
        match &o.result {
            Ok(m) => {
                log.runs += 1;
                if !m.feasible {
                    log.violations += 1;
                }
            }
            Err(_) => aborted += 1,
        }
    }
    aborted
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn sqrt_t_scaling(feasibility: &mut FeasibilityLog) -> Outcome {
    let horizons = vec![100, 400, 1600, 6400];
    let sweep = maxmin_sweep(vec![0.01], horizons.clone(), 20, SEED);
    let gen = GeneratorConfig::synthetic(12, SEED).expect("generator");
    let solver = SolverConfig {
        eta_scale: 0.01,
        w_rule: WeightRule::RhoSquared,
        ..SolverConfig::default()
    };
    let summary = match run_sweep(&sweep, &gen, &solver, std::io::sink()) {
        Ok(s) => s,
        Err(e) => {
            return Outcome {
                passed: false,
                detail: e.to_string(),
            }
        }
    };
    let aborted = record_sweep_feasibility(&summary, feasibility);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut means = Vec::new();
    for &h in &horizons {
        let regrets: Vec<f64> = summary
            .cell(0, h)
            .iter()
            .map(|m| m.regret_vs_mu_avg)
            .collect();
        let mean = Moments::of(&regrets).map_or(f64::NAN, |m| m.mean);
        means.push(format!("T={h}: {mean:.3}"));
        xs.push((h as f64).ln());
        ys.push(mean.ln());
    }
    let s = slope(&xs, &ys);
    Outcome {
        passed: aborted == 0 && (0.3..=0.65).contains(&s),
        detail: format!("slope {s:.3}, mean regret {}", means.join(", ")),
    }
}

fn tradeoff(feasibility: &mut FeasibilityLog) -> Outcome {
    let lambdas = vec![1e-4, 1e-3, 1e-2, 1e-1];
    let sweep = maxmin_sweep(lambdas.clone(), vec![1000], 50, SEED);
    let gen = GeneratorConfig::synthetic(12, SEED).expect("generator");
    let summary = match run_sweep(&sweep, &gen, &SolverConfig::default(), std::io::sink()) {
        Ok(s) => s,
        Err(e) => {
            return Outcome {
                passed: false,
                detail: e.to_string(),
            }
        }
    };
    let aborted = record_sweep_feasibility(&summary, feasibility);
    let moments = |li: usize, f: &dyn Fn(&dualalloc::harness::sweep::TrialMetrics) -> f64| {
        let v: Vec<f64> = summary.cell(li, 1000).iter().map(|m| f(m)).collect();
        Moments::of(&v).expect("nonempty cell")
    };
    let mut ok = aborted == 0;
    let mut parts = Vec::new();
    for (k, lambda) in lambdas.iter().enumerate() {
        let fair = moments(k, &|m| m.fairness);
        let reward = moments(k, &|m| m.total_reward);
        parts.push(format!(
            "λ={}: fairness {:.4}±{:.4}, reward {:.2}±{:.2}",
            lambda,
            fair.mean,
            fair.std_error(),
            reward.mean,
            reward.std_error()
        ));
        if k > 0 {
            let pf = moments(k - 1, &|m| m.fairness);
            let pr = moments(k - 1, &|m| m.total_reward);
            let se_f = (fair.std_error().powi(2) + pf.std_error().powi(2)).sqrt();
            let se_r = (reward.std_error().powi(2) + pr.std_error().powi(2)).sqrt();
            ok &= fair.mean - pf.mean >= -se_f;
            ok &= reward.mean - pr.mean <= se_r;
        }
    }
    Outcome {
        passed: ok,
        detail: parts.join("; "),
    }
}

struct CalculatorCase {
    sb: SupportBounds,
    mu0: Vec<f64>,
    w: Vec<f64>,
    horizon: usize,
    expected: (f64, f64, f64),
}

fn sb(
    f_bar: f64,
    b_bar: f64,
    a_bar: f64,
    l: f64,
    r_bar: f64,
    r_under: f64,
    rho_under: f64,
) -> SupportBounds {
    SupportBounds {
        f_bar,
        b_bar,
        a_bar,
        lipschitz_l: l,
        r_bar,
        r_underline: r_under,
        rho_underline: rho_under,
    }
}

fn calculator() -> Outcome {
    // constants worked out by hand:
    // C1 = (f̄ + r̄ + L(b̄ + ā) − r̲)/ρ̲, C2 = (b̄ + ā)²/2, C3 = (L + C1 √‖w‖∞)² + ‖μ₀‖²_w
    let cases = [
        CalculatorCase {
            sb: sb(1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0),
            mu0: vec![0.0],
            w: vec![1.0],
            horizon: 1000,
            expected: (1.0, 2.0, 1.0),
        },
        CalculatorCase {
            sb: sb(2.0, 0.5, 0.5, 1.0, 1.0, 0.0, 0.5),
            mu0: vec![1.0, 0.0],
            w: vec![4.0, 1.0],
            horizon: 100,
            expected: (8.0, 0.5, 293.0),
        },
        CalculatorCase {
            sb: sb(1.0, 2.0, 1.0, 0.5, 0.0, -1.0, 0.25),
            mu0: vec![0.5],
            w: vec![0.25],
            horizon: 10_000,
            expected: (14.0, 4.5, 56.3125),
        },
        CalculatorCase {
            sb: sb(3.0, 1.0, 3.0, 2.0, 2.0, -2.0, 2.0),
            mu0: vec![1.0, 1.0, 1.0],
            w: vec![1.0, 1.0, 9.0],
            horizon: 500,
            expected: (7.5, 8.0, 611.25),
        },
        CalculatorCase {
            sb: sb(0.5, 0.25, 0.75, 0.0, 0.0, 0.0, 0.5),
            mu0: vec![2.0],
            w: vec![1.0],
            horizon: 1,
            expected: (1.0, 0.5, 5.0),
        },
    ];
    let mut ok = true;
    let mut worst_eta: f64 = 0.0;
    for case in &cases {
        let c = BoundConstants::new(&case.sb, &case.mu0, &case.w);
        let (e1, e2, e3) = case.expected;
        ok &= c.c1 == e1 && c.c2 == e2 && c.c3 == e3;
        let closed = (e3 / (e2 * case.horizon as f64)).sqrt();
        // log-spaced η grid over four decades around the prediction
        let n = 100_000;
        let (lo, hi) = (closed * 1e-2, closed * 1e2);
        let best = (0..=n)
            .map(|i| lo * (hi / lo).powf(i as f64 / n as f64))
            .map(|eta| {
                (
                    eta,
                    theoretical_bound(&case.sb, eta, case.horizon, &case.mu0, &case.w),
                )
            })
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("nonempty grid")
            .0;
        let rel = (best - closed).abs() / closed;
        worst_eta = worst_eta.max(rel);
        ok &= rel <= 0.01 && (c.optimal_eta(case.horizon) - closed).abs() <= 1e-12 * closed;
    }
    Outcome {
        passed: ok,
        detail: format!("5 parameter sets, worst η* relative gap {worst_eta:.2e}"),
    }
}

fn determinism() -> Outcome {
    let sweep = SweepConfig {
        lambdas: vec![0.0, 0.001, 0.1],
        horizons: vec![100, 1000],
        trials: 8,
        seed: 99,
        minimize_iterations: 50,
        jobs: Some(4),
        ..SweepConfig::default()
    };
    let gen = GeneratorConfig::synthetic(12, 5).expect("generator");
    let solver = SolverConfig::default();
    let once = || -> String {
        let mut buf = Vec::new();
        run_sweep(&sweep, &gen, &solver, &mut buf).expect("sweep");
        csv_body(&String::from_utf8(buf).expect("utf8"))
    };
    let (a, b) = (once(), once());
    Outcome {
        passed: a == b && !a.is_empty(),
        detail: format!("{} body bytes, identical: {}", a.len(), a == b),
    }
}

fn main() -> ExitCode {
    let mut feasibility = FeasibilityLog::default();
    let mut all = true;

    all &= report(1, "conjugate closed forms vs grid maximum", 30.0, || {
        from_suite(verify::conjugate_grid(SEED, 200, 3, 1e-3))
    });
    all &= report(
        2,
        "fast projections vs active-set oracle",
        60.0,
        || match verify::projection_kkt(SEED, 1000, 4, Fault::default()) {
            Ok(r) => from_suite(r),
            Err(e) => Outcome {
                passed: false,
                detail: e.to_string(),
            },
        },
    );
    all &= report(
        3,
        "weak duality on enumerable instances",
        300.0,
        || match verify::weak_duality(SEED, 50, 100, 0.1, &mut feasibility) {
            Ok(r) => from_suite(r),
            Err(e) => Outcome {
                passed: false,
                detail: e.to_string(),
            },
        },
    );
    all &= report(
        5,
        "online gradient descent bound",
        120.0,
        || match verify::ogd_bound(SEED, 20, 500, 100, &mut feasibility) {
            Ok(r) => from_suite(r),
            Err(e) => Outcome {
                passed: false,
                detail: e.to_string(),
            },
        },
    );
    all &= report(6, "regret grows like sqrt(T)", 600.0, || {
        sqrt_t_scaling(&mut feasibility)
    });
    all &= report(7, "fairness-reward tradeoff across lambda", 300.0, || {
        tradeoff(&mut feasibility)
    });
    all &= report(
        4,
        "hard budget feasibility across criteria 3, 5, 6, 7",
        1.0,
        || from_suite(feasibility.result()),
    );
    all &= report(8, "regret bound calculator", 1.0, calculator);
    all &= report(9, "sweep output is deterministic", 60.0, determinism);

    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
