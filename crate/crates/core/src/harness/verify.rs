//! Self-verification suites that cross-check the fast paths against the
//! brute-force references in [`crate::oracle`].
//!
//! Every suite takes explicit parameters so callers can run it at whatever
//! size they need; [`Level`] gives the two presets used by the command line.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bounds::{brute_force_opt, empirical_dual, BoundConstants};
use crate::domain::support_bounds;
use crate::error::Result;
use crate::geometry::{rho_squared, DescentContext};
use crate::norm;
use crate::oracle;
use crate::regularizer::{DualGeometry, Variant};
use crate::solver::{run, RunTrace, SolverConfig, WeightRule};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Level {
    Fast,
    Full,
}

impl std::str::FromStr for Level {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "fast" => Ok(Level::Fast),
            "full" => Ok(Level::Full),
            _ => Err(format!("unknown level {s:?} (expected fast or full)")),
        }
    }
}

/// Outcome of one suite. `worst` is the largest normalized violation seen
/// (`> 1` means a failure).
#[derive(Clone, Debug, Serialize)]
pub struct SuiteResult {
    pub name: String,
    pub cases: usize,
    pub failures: usize,
    pub worst: f64,
    pub first_failure: Option<String>,
}

impl SuiteResult {
    fn new(name: &str) -> Self {
        Self {
            name: name.into(),
            cases: 0,
            failures: 0,
            worst: 0.0,
            first_failure: None,
        }
    }

    /// Records a case with violation `excess / tol`.
    fn check(&mut self, excess: f64, tol: f64, describe: impl FnOnce() -> String) {
        self.cases += 1;
        let ratio = if excess.is_nan() {
            f64::INFINITY
        } else {
            excess.max(0.0) / tol
        };
        self.worst = self.worst.max(ratio);
        if ratio > 1.0 {
            self.failures += 1;
            if self.first_failure.is_none() {
                self.first_failure = Some(describe());
            }
        }
    }

    fn check_bool(&mut self, ok: bool, describe: impl FnOnce() -> String) {
        self.check(if ok { 0.0 } else { f64::INFINITY }, 1.0, describe)
    }

    pub fn passed(&self) -> bool {
        self.failures == 0 && self.cases > 0
    }
}

impl std::fmt::Display for SuiteResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {:<20} cases={:<6} failures={:<4} worst={:.3e}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.cases,
            self.failures,
            self.worst
        )?;
        if let Some(msg) = &self.first_failure {
            write!(f, "  first: {msg}")?;
        }
        Ok(())
    }
}

fn rng(seed: u64, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

fn l1(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

/// `r*(−μ)` against the maximum over the grid `a_j ∈ ρ_j·{0, step, …, 1}`,
/// tolerance `0.01 (1 + ‖μ‖₁)`.
pub fn conjugate_grid(
    seed: u64,
    points_per_variant: usize,
    max_m: usize,
    step: f64,
) -> SuiteResult {
    let mut res = SuiteResult::new("conjugate-grid");
    let mut rng = rng(seed, 1);
    for variant in Variant::ALL {
        for _ in 0..points_per_variant {
            let m = rng.random_range(1..=max_m);
            let rho = oracle::random_rho(m, &mut rng);
            let reg = oracle::random_regularizer(variant, &rho, &mut rng);
            let mu = oracle::random_dual_point(&reg, &mut rng);
            let exact = reg.conjugate(&mu);
            let grid = oracle::grid_conjugate(&reg, &mu, step);
            res.check((exact - grid).abs(), 0.01 * (1.0 + l1(&mu)), || {
                format!("{variant} mu={mu:?}: closed form {exact}, grid {grid}")
            });
        }
    }
    res
}

/// Fenchel–Young `r(a) + μᵀa ≤ r*(−μ)` on random `a ∈ [0, ρ]`, and equality
/// at the returned maximizer.
pub fn fenchel(seed: u64, cases_per_variant: usize, max_m: usize) -> SuiteResult {
    let mut res = SuiteResult::new("fenchel");
    let mut rng = rng(seed, 2);
    for variant in Variant::ALL {
        for _ in 0..cases_per_variant {
            let m = rng.random_range(1..=max_m);
            let rho = oracle::random_rho(m, &mut rng);
            let reg = oracle::random_regularizer(variant, &rho, &mut rng);
            let mu = oracle::random_dual_point(&reg, &mut rng);
            let conj = reg.conjugate(&mu);
            let scale = 1e-9 * (1.0 + l1(&mu) + conj.abs());
            let a: Vec<f64> = rho
                .iter()
                .map(|r| r * rng.random_range(0.0..=1.0))
                .collect();
            let lhs = reg.value_unchecked(&a) + norm::dot(&mu, &a);
            res.check(lhs - conj, scale, || {
                format!("{variant} mu={mu:?} a={a:?}: {lhs} > {conj}")
            });
            match reg.argmax(&mu) {
                Ok(star) => {
                    let at = reg.value_unchecked(&star) + norm::dot(&mu, &star);
                    res.check((at - conj).abs(), scale, || {
                        format!("{variant} mu={mu:?}: value at maximizer {at}, conjugate {conj}")
                    });
                }
                Err(e) => {
                    res.check_bool(false, || format!("{variant} mu={mu:?}: argmax failed: {e}"))
                }
            }
        }
    }
    res
}

/// O(m) max-min membership against all `2^m − 1` subset constraints.
pub fn membership_subsets(seed: u64, cases: usize, max_m: usize) -> SuiteResult {
    let mut res = SuiteResult::new("membership-subsets");
    let mut rng = rng(seed, 3);
    for _ in 0..cases {
        let m = rng.random_range(1..=max_m);
        let rho = oracle::random_rho(m, &mut rng);
        let reg = oracle::random_regularizer(Variant::MaxMin, &rho, &mut rng);
        let mu = if rng.random_bool(0.5) {
            oracle::random_dual_point(&reg, &mut rng)
        } else {
            oracle::random_infeasible_point(&reg, &mut rng)
        };
        let fast = reg.contains_with_tol(&mu, 0.0);
        let slow = oracle::exhaustive_membership(&reg, &mu, 0.0);
        // ties within rounding of the boundary are not decisive
        let margin = crate::regularizer::min_subset_sum(&rho, &mu)
            + match reg.kind() {
                crate::regularizer::Kind::MaxMin { lambda } => *lambda,
                _ => unreachable!(),
            };
        res.check_bool(fast == slow || margin.abs() < 1e-12, || {
            format!("m={m} mu={mu:?}: fast {fast}, exhaustive {slow}")
        });
    }
    res
}

/// Outside `D` the conjugate is `+∞`, and the supremum indeed diverges
/// along a recession direction of `{a ≤ ρ}`.
pub fn recession(seed: u64, cases_per_variant: usize, max_m: usize) -> SuiteResult {
    let mut res = SuiteResult::new("recession");
    let mut rng = rng(seed, 4);
    for variant in Variant::ALL {
        for _ in 0..cases_per_variant {
            let m = rng.random_range(1..=max_m);
            let rho = oracle::random_rho(m, &mut rng);
            let reg = oracle::random_regularizer(variant, &rho, &mut rng);
            let mu = oracle::random_infeasible_point(&reg, &mut rng);
            res.check_bool(
                !reg.contains(&mu) && reg.conjugate(&mu) == f64::INFINITY,
                || format!("{variant} mu={mu:?}: conjugate finite outside D"),
            );
            let Some(d) = oracle::recession_direction(&reg, &mu) else {
                res.check_bool(false, || {
                    format!("{variant} mu={mu:?}: no recession direction")
                });
                continue;
            };
            let along = |k: f64| {
                let a: Vec<f64> = rho.iter().zip(&d).map(|(r, dj)| r + k * dj).collect();
                reg.value_unchecked(&a) + norm::dot(&mu, &a)
            };
            let (v0, v1, v2) = (along(0.0), along(1e3), along(1e6));
            res.check_bool(
                v0 < v1 && v1 < v2 && (v2 - v1) > 100.0 * (v1 - v0) * 0.5,
                || {
                    format!(
                        "{variant} mu={mu:?}: values {v0}, {v1}, {v2} along {d:?} do not diverge"
                    )
                },
            );
        }
    }
    res
}

/// Perturbation applied to every fast projection before comparison; used
/// to confirm the suite detects faults.
#[derive(Clone, Copy, Debug, Default)]
pub struct Fault {
    pub projection_offset: f64,
}

/// Fast projections against the active-set oracle, tolerance `1e-8` in
/// `‖·‖_w`, plus idempotence and, for the max-min set, preservation of the
/// order of `ρ ∘ μ̃`.
pub fn projection_kkt(
    seed: u64,
    cases_per_geometry: usize,
    max_m: usize,
    fault: Fault,
) -> Result<SuiteResult> {
    let mut res = SuiteResult::new("projection-kkt");
    let mut rng = rng(seed, 5);
    for variant in [
        Variant::None,
        Variant::LoadBalancing,
        Variant::MaxMin,
        Variant::MirroredHinge,
    ] {
        for _ in 0..cases_per_geometry {
            let m = rng.random_range(1..=max_m);
            let rho = oracle::random_rho(m, &mut rng);
            let reg = oracle::random_regularizer(variant, &rho, &mut rng);
            let w = match reg.geometry() {
                DualGeometry::SubsetSums { .. } => rho_squared(&rho),
                _ => (0..m).map(|_| rng.random_range(0.1..3.0)).collect(),
            };
            let ctx = DescentContext::new(reg.clone(), w.clone(), 1.0)?;
            let mu_tilde: Vec<f64> = (0..m).map(|_| rng.random_range(-4.0..3.0)).collect();
            let mut fast = ctx.project(&mu_tilde);
            fast.iter_mut().for_each(|v| *v += fault.projection_offset);
            let exact = oracle::oracle_projection(&mu_tilde, &reg, &w)?;
            let dist = norm::weighted_distance(&fast, &exact, &w);
            res.check(dist, 1e-8, || {
                format!("{variant} mu_tilde={mu_tilde:?}: fast {fast:?}, oracle {exact:?}")
            });
            let again = ctx.project(&fast);
            res.check(norm::weighted_distance(&again, &fast, &w), 1e-10, || {
                format!("{variant} mu_tilde={mu_tilde:?}: projection not idempotent")
            });
            if let DualGeometry::SubsetSums { .. } = reg.geometry() {
                let y_in: Vec<f64> = (0..m).map(|j| rho[j] * mu_tilde[j]).collect();
                let y_out: Vec<f64> = (0..m).map(|j| rho[j] * fast[j]).collect();
                let mut worst: f64 = 0.0;
                for i in 0..m {
                    for k in 0..m {
                        if y_in[i] <= y_in[k] {
                            worst = worst.max(y_out[i] - y_out[k]);
                        }
                    }
                }
                res.check(worst, 1e-12, || {
                    format!("mu_tilde={mu_tilde:?}: order of rho*mu not preserved")
                });
            }
        }
    }
    Ok(res)
}

/// `T · D(μ) ≥ OPT` on tiny instances, with OPT from exhaustive grid search
/// (a lower bound on the true optimum, so the check is conservative).
pub fn weak_duality(
    seed: u64,
    instances: usize,
    mus_per_instance: usize,
    grid_step: f64,
    feasibility: &mut FeasibilityLog,
) -> Result<SuiteResult> {
    let mut res = SuiteResult::new("weak-duality");
    let mut rng = rng(seed, 6);
    for i in 0..instances {
        let horizon = rng.random_range(1..=3);
        let instance = oracle::random_tiny_instance(&mut rng, horizon, 2, 2);
        let variant = Variant::ALL[i % Variant::ALL.len()];
        let reg = oracle::random_regularizer(variant, &instance.rho, &mut rng);
        let opt = brute_force_opt(&instance, &reg, grid_step)?;
        let trace = run(&instance, &reg, &SolverConfig::default())?;
        feasibility.record(&instance, &trace);
        let tf = horizon as f64;
        for k in 0..mus_per_instance {
            let mu = if k == 0 {
                trace.mu_average.clone()
            } else {
                oracle::random_dual_point(&reg, &mut rng)
            };
            if !reg.contains(&mu) {
                continue;
            }
            let dual = tf * empirical_dual(&mu, &instance.requests, &reg);
            res.check(opt - dual, 1e-9 * (1.0 + opt.abs()), || {
                format!("{variant} T={horizon} mu={mu:?}: T*D = {dual} < OPT = {opt}")
            });
        }
        // the solver plays vertices, which lie on the grid
        res.check(trace.objective - opt, 1e-9 * (1.0 + opt.abs()), || {
            format!(
                "{variant}: realized objective {} above OPT {opt}",
                trace.objective
            )
        });
    }
    Ok(res)
}

/// `Σ_t ⟨g_t, μ_t − μ⟩ ≤ ½ G² η T + ‖μ − μ₀‖²_w / (2η)` with
/// `G = b̄ + ā`, for comparators `μ ∈ D`.
pub fn ogd_bound(
    seed: u64,
    runs: usize,
    horizon: usize,
    comparators: usize,
    feasibility: &mut FeasibilityLog,
) -> Result<SuiteResult> {
    let mut res = SuiteResult::new("ogd-bound");
    let mut rng = rng(seed, 7);
    for i in 0..runs {
        let m = rng.random_range(2..=4);
        let d = rng.random_range(1..=3);
        let instance = oracle::random_tiny_instance(&mut rng, horizon, m, d);
        let variant = Variant::ALL[i % Variant::ALL.len()];
        let reg = oracle::random_regularizer(variant, &instance.rho, &mut rng);
        let cfg = SolverConfig {
            eta_scale: rng.random_range(0.05..2.0),
            w_rule: if matches!(reg.geometry(), DualGeometry::SubsetSums { .. })
                || rng.random_bool(0.5)
            {
                WeightRule::RhoSquared
            } else {
                WeightRule::Ones
            },
            ..SolverConfig::default()
        };
        let trace = run(&instance, &reg, &cfg)?;
        feasibility.record(&instance, &trace);
        let sb = support_bounds(&instance, &reg, &trace.weights)?;
        let g_bar = sb.b_bar + sb.a_bar;
        for step in &trace.steps {
            let gn = norm::dual_norm(&step.g, &trace.weights);
            res.check(gn - g_bar, 1e-12 * (1.0 + g_bar), || {
                format!("{variant}: subgradient norm {gn} exceeds b_bar + a_bar = {g_bar}")
            });
        }
        // steps strictly before the depletion time, and the whole run
        let before = trace.depletion_time.map_or(horizon, |t| t - 1);
        for _ in 0..comparators {
            let mu = oracle::random_dual_point(&reg, &mut rng);
            let dist_term = norm::weighted_distance(&mu, &trace.mu0, &trace.weights).powi(2)
                / (2.0 * trace.eta);
            let mut lhs = 0.0;
            for (k, s) in trace.steps.iter().enumerate() {
                lhs +=
                    s.g.iter()
                        .zip(&s.mu)
                        .zip(&mu)
                        .map(|((g, mt), m)| g * (mt - m))
                        .sum::<f64>();
                if k + 1 == before || k + 1 == horizon {
                    let rhs = 0.5 * g_bar * g_bar * trace.eta * horizon as f64 + dist_term;
                    res.check(lhs - rhs, 1e-9 * (1.0 + rhs.abs()), || {
                        format!(
                            "{variant} mu={mu:?}: sum over {} steps {lhs} > bound {rhs}",
                            k + 1
                        )
                    });
                }
            }
        }
    }
    Ok(res)
}

/// The closed-form `η*` against a numerical minimization of the bound, and
/// the bound at `η*` against its closed-form value `C₁ + 2√(C₂C₃T)`.
pub fn bound_calculator(cases: &[(f64, f64, f64, usize)]) -> SuiteResult {
    let mut res = SuiteResult::new("bound-calculator");
    for &(c1, c2, c3, horizon) in cases {
        let consts = BoundConstants { c1, c2, c3 };
        let eta = consts.optimal_eta(horizon);
        let numeric = golden_section(|e| consts.bound(e, horizon), eta * 1e-3, eta * 1e3);
        res.check((eta - numeric).abs() / numeric, 0.01, || {
            format!("C=({c1},{c2},{c3}), T={horizon}: eta* {eta} vs numerical {numeric}")
        });
        let closed = c1 + 2.0 * (c2 * c3 * horizon as f64).sqrt();
        let at = consts.bound(eta, horizon);
        res.check((at - closed).abs(), 1e-9 * closed.abs().max(1.0), || {
            format!("C=({c1},{c2},{c3}), T={horizon}: bound(eta*) {at} vs {closed}")
        });
    }
    res
}

/// Minimizes a unimodal function of `ln η`.
pub fn golden_section(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo.ln(), hi.ln());
    let g = |x: f64| f(x.exp());
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    for _ in 0..200 {
        if g(c) < g(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - phi * (b - a);
        d = a + phi * (b - a);
    }
    ((a + b) / 2.0).exp()
}

pub const CALCULATOR_CASES: [(f64, f64, f64, usize); 5] = [
    (1.0, 2.0, 1.0, 1),
    (0.5, 0.125, 8.0, 100),
    (3.0, 4.5, 0.01, 10_000),
    (10.0, 0.02, 50.0, 1_000),
    (0.0, 1.0, 1.0, 1_000_000),
];

/// The support constants against direct measurement: rewards, subgradients,
/// the range of `r` on `[0, ρ]` and its Lipschitz constant on random pairs.
pub fn support_bounds_suite(seed: u64, cases: usize) -> Result<SuiteResult> {
    let mut res = SuiteResult::new("support-bounds");
    let mut rng = rng(seed, 9);
    for i in 0..cases {
        let m = rng.random_range(1..=4);
        let d = rng.random_range(1..=3);
        let instance = oracle::random_tiny_instance(&mut rng, 20, m, d);
        let variant = Variant::ALL[i % Variant::ALL.len()];
        let reg = oracle::random_regularizer(variant, &instance.rho, &mut rng);
        let w: Vec<f64> = if rng.random_bool(0.5) {
            rho_squared(&instance.rho)
        } else {
            (0..m).map(|_| rng.random_range(0.2..3.0)).collect()
        };
        let sb = support_bounds(&instance, &reg, &w)?;
        let rho = &instance.rho;
        let tol = 1e-12;
        for _ in 0..20 {
            let a: Vec<f64> = rho
                .iter()
                .map(|r| r * rng.random_range(0.0..=1.0))
                .collect();
            let b: Vec<f64> = rho
                .iter()
                .map(|r| r * rng.random_range(0.0..=1.0))
                .collect();
            let (ra, rb) = (reg.value_unchecked(&a), reg.value_unchecked(&b));
            res.check(ra - sb.r_bar, tol, || {
                format!("{variant}: r(a) {ra} above r_bar {}", sb.r_bar)
            });
            res.check(sb.r_underline - ra, tol, || {
                format!("{variant}: r(a) {ra} below r_underline {}", sb.r_underline)
            });
            let lip = sb.lipschitz_l
                * norm::dual_norm(
                    &a.iter().zip(&b).map(|(x, y)| x - y).collect::<Vec<_>>(),
                    &w,
                );
            res.check((ra - rb).abs() - lip, tol, || {
                format!(
                    "{variant}: |r(a) - r(b)| = {} above L |a - b| = {lip}",
                    (ra - rb).abs()
                )
            });
            res.check(norm::dual_norm(&a, &w) - sb.a_bar, tol, || {
                format!("{variant}: |a| above a_bar")
            });
        }
        for req in &instance.requests {
            for j in 0..req.num_actions() {
                let col = req.cost_column(j);
                res.check(req.rewards[j] - sb.f_bar, tol, || {
                    format!("reward above f_bar {}", sb.f_bar)
                });
                res.check(norm::dual_norm(&col, &w) - sb.b_bar, tol, || {
                    "cost column above b_bar".to_string()
                });
            }
        }
        res.check_bool(
            sb.rho_underline == rho.iter().copied().fold(f64::INFINITY, f64::min),
            || "rho_underline is not the smallest budget rate".into(),
        );
    }
    Ok(res)
}

/// Budget feasibility collected across runs: `Σ_t b_t x_t ≤ Tρ` with no
/// slack, evaluated with forward sums.
#[derive(Clone, Debug, Default)]
pub struct FeasibilityLog {
    pub runs: usize,
    pub violations: usize,
    pub worst_excess: f64,
}

impl FeasibilityLog {
    pub fn record(&mut self, instance: &crate::domain::Instance, trace: &RunTrace) {
        self.runs += 1;
        let used = trace.total_consumption();
        let excess = used
            .iter()
            .zip(instance.budget())
            .map(|(u, b)| u - b)
            .fold(f64::NEG_INFINITY, f64::max);
        if excess > 0.0 {
            self.violations += 1;
        }
        self.worst_excess = self.worst_excess.max(excess);
    }

    pub fn result(&self) -> SuiteResult {
        let mut res = SuiteResult::new("budget-feasibility");
        res.cases = self.runs;
        res.failures = self.violations;
        res.worst = if self.violations > 0 {
            f64::INFINITY
        } else {
            0.0
        };
        if self.violations > 0 {
            res.first_failure = Some(format!("largest overshoot {:e}", self.worst_excess));
        }
        res
    }
}

/// Runs every suite at the given level.
pub fn run_all(level: Level, seed: u64, fault: Fault) -> Result<Vec<SuiteResult>> {
    let full = level == Level::Full;
    let mut feasibility = FeasibilityLog::default();
    let mut out = vec![
        conjugate_grid(
            seed,
            if full { 200 } else { 20 },
            3,
            if full { 1e-3 } else { 1e-2 },
        ),
        fenchel(seed, if full { 2000 } else { 200 }, 6),
        membership_subsets(
            seed,
            if full { 2000 } else { 300 },
            if full { 12 } else { 8 },
        ),
        recession(seed, if full { 500 } else { 50 }, 6),
        projection_kkt(seed, if full { 1000 } else { 100 }, 4, fault)?,
        weak_duality(
            seed,
            if full { 50 } else { 10 },
            if full { 100 } else { 20 },
            0.1,
            &mut feasibility,
        )?,
        ogd_bound(
            seed,
            if full { 20 } else { 5 },
            if full { 500 } else { 200 },
            if full { 100 } else { 20 },
            &mut feasibility,
        )?,
        bound_calculator(&CALCULATOR_CASES),
        support_bounds_suite(seed, if full { 200 } else { 30 })?,
    ];
    out.push(feasibility.result());
    Ok(out)
}
