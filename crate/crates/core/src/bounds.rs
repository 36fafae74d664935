//! Offline benchmarks: the empirical dual function and its minimization,
//! exhaustive offline optimum for tiny instances, regret estimates and the
//! regret-bound calculator.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{support_bounds, Action, Instance, Request, SupportBounds};
use crate::error::{Error, Result};
use crate::geometry::{rho_squared, DescentContext};
use crate::norm;
use crate::regularizer::Regularizer;
use crate::solver::{best_response, RunTrace};

/// Largest number of action combinations [`brute_force_opt`] will enumerate.
pub const BRUTE_FORCE_LIMIT: u64 = 500_000_000;

/// Upper bounds on the offline optimum and the resulting regret estimates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    /// `T · D(μ̄)` at the average dual iterate.
    pub dual_at_mu_avg: f64,
    /// `T · min_μ D(μ)` from offline subgradient descent, when computed.
    pub dual_minimized: Option<f64>,
    pub brute_force_opt: Option<f64>,
    pub regret_vs_dual_avg: f64,
    pub theoretical_bound: f64,
}

/// `D(μ) = (1/N) Σ_i f_i*(b_iᵀμ) + r*(−μ)` over the empirical distribution
/// of `requests`. Returns `+∞` outside the dual set.
pub fn empirical_dual(mu: &[f64], requests: &[Request], reg: &Regularizer) -> f64 {
    let conj = reg.conjugate(mu);
    if conj.is_infinite() {
        log::debug!("empirical dual evaluated outside the dual set");
        return f64::INFINITY;
    }
    let n = requests.len() as f64;
    requests.iter().map(|r| r.conjugate(mu)).sum::<f64>() / n + conj
}

/// `T · D(μ̄)` at the trace's average dual.
pub fn dual_bound_from_trace(trace: &RunTrace, requests: &[Request], reg: &Regularizer) -> f64 {
    requests.len() as f64 * empirical_dual(&trace.mu_average, requests, reg)
}

/// Step-size schedule `η_k = eta0 / √k` for [`minimize_dual`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EtaSchedule {
    pub eta0: f64,
}

impl EtaSchedule {
    /// `eta0 = 1 / (b̄ + ā)` in the `w = ρ²` geometry.
    pub fn standard(requests: &[Request], reg: &Regularizer) -> Result<Self> {
        let instance = Instance {
            horizon: requests.len(),
            rho: reg.rho().to_vec(),
            requests: requests.to_vec(),
        };
        let sb = support_bounds(&instance, reg, &rho_squared(reg.rho()))?;
        let g = sb.b_bar + sb.a_bar;
        Ok(Self {
            eta0: if g > 0.0 { 1.0 / g } else { 1.0 },
        })
    }

    pub fn at(&self, k: usize) -> f64 {
        self.eta0 / (k as f64).sqrt()
    }
}

/// Per-request dual value and the sampled subgradient at `mu`.
fn dual_value_and_subgradient(
    mu: &[f64],
    requests: &[Request],
    reg: &Regularizer,
) -> Result<(f64, Vec<f64>)> {
    let n = requests.len() as f64;
    let mut g = reg.argmax(mu)?;
    let mut value = reg.conjugate(mu);
    for req in requests {
        let x = best_response(req, mu);
        value += req.reward(&x) / n - norm::dot(mu, &req.consumption(&x)) / n;
        for (gj, cj) in g.iter_mut().zip(req.consumption(&x)) {
            *gj -= cj / n;
        }
    }
    Ok((value, g))
}

/// Deterministic projected subgradient descent on `μ ↦ D(μ)` with iterate
/// averaging. Returns the best point seen (iterates, running averages and
/// the start) with its per-period dual value.
pub fn minimize_dual(
    requests: &[Request],
    reg: &Regularizer,
    iterations: usize,
    schedule: EtaSchedule,
) -> Result<(Vec<f64>, f64)> {
    if iterations == 0 {
        return Err(Error::InvalidConfig(
            "minimize_dual needs at least one iteration".into(),
        ));
    }
    if requests.is_empty() {
        return Err(Error::EmptyHorizon);
    }
    let m = reg.num_resources();
    let ctx = DescentContext::new(reg.clone(), rho_squared(reg.rho()), schedule.eta0)?;
    let mut mu = ctx.project(&vec![0.0; m]);
    let mut avg = vec![0.0; m];
    let (mut value, mut g) = dual_value_and_subgradient(&mu, requests, reg)?;
    let mut best = (mu.clone(), value);

    for k in 1..=iterations {
        mu = ctx.with_eta(schedule.at(k))?.step(&mu, &g)?;
        if mu.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteIterate { step: k });
        }
        (value, g) = dual_value_and_subgradient(&mu, requests, reg)?;
        if value < best.1 {
            best = (mu.clone(), value);
        }
        let kf = k as f64;
        for (a, v) in avg.iter_mut().zip(&mu) {
            *a += (v - *a) / kf;
        }
        let avg_value = empirical_dual(&avg, requests, reg);
        if avg_value < best.1 {
            best = (avg.clone(), avg_value);
        }
    }
    Ok(best)
}

/// Exhaustive offline optimum on a simplex grid:
/// `max Σ_t q_tᵀx_t + T r((1/T) Σ_t b_t x_t)` subject to `Σ_t b_t x_t ≤ Tρ`,
/// with every `x_t` on the grid `{i·step}` inside the simplex.
pub fn brute_force_opt(instance: &Instance, reg: &Regularizer, grid_step: f64) -> Result<f64> {
    instance.validate()?;
    let d = instance.num_actions();
    let horizon = instance.horizon;
    if horizon > 3 || d > 2 {
        return Err(Error::TooLarge(format!(
            "T = {horizon}, d = {d} (limits T ≤ 3, d ≤ 2)"
        )));
    }
    if !(0.01..=0.25).contains(&grid_step) {
        return Err(Error::InvalidConfig(format!(
            "grid step {grid_step} outside [0.01, 0.25]"
        )));
    }
    let grid = simplex_grid(d, (1.0 / grid_step).round() as usize);
    let combos = (grid.len() as u64).saturating_pow(horizon as u32);
    if combos > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge(format!("{combos} action combinations")));
    }

    let budget = instance.budget();
    let slack: Vec<f64> = budget.iter().map(|b| 1e-12 * (1.0 + b)).collect();
    let tf = horizon as f64;
    let rho = &instance.rho;
    let evaluate = |reward: f64, used: &[f64]| -> f64 {
        let rate: Vec<f64> = used
            .iter()
            .zip(rho)
            .map(|(u, r)| (u / tf).min(*r))
            .collect();
        reward + tf * reg.value_unchecked(&rate)
    };

    fn search(
        t: usize,
        reward: f64,
        used: &mut Vec<f64>,
        ctx: &(&[Request], &[Action], &[f64], &[f64]),
        eval: &dyn Fn(f64, &[f64]) -> f64,
    ) -> f64 {
        let (requests, grid, budget, slack) = *ctx;
        if t == requests.len() {
            return eval(reward, used);
        }
        let mut best = f64::NEG_INFINITY;
        for x in grid {
            let c = requests[t].consumption(x);
            if (0..used.len()).any(|j| used[j] + c[j] > budget[j] + slack[j]) {
                continue;
            }
            for j in 0..used.len() {
                used[j] += c[j];
            }
            best = best.max(search(
                t + 1,
                reward + requests[t].reward(x),
                used,
                ctx,
                eval,
            ));
            for j in 0..used.len() {
                used[j] -= c[j];
            }
        }
        best
    }

    let m = instance.num_resources();
    let ctx = (
        instance.requests.as_slice(),
        grid.as_slice(),
        budget.as_slice(),
        slack.as_slice(),
    );
    let first = &instance.requests[0];
    let best = grid
        .par_iter()
        .map(|x| {
            let c = first.consumption(x);
            if (0..m).any(|j| c[j] > budget[j] + slack[j]) {
                return f64::NEG_INFINITY;
            }
            let mut used = c;
            search(1, first.reward(x), &mut used, &ctx, &evaluate)
        })
        .reduce(|| f64::NEG_INFINITY, f64::max);
    Ok(best)
}

fn simplex_grid(d: usize, n: usize) -> Vec<Action> {
    let nf = n as f64;
    match d {
        1 => (0..=n)
            .map(|i| Action::new(vec![i as f64 / nf]).unwrap())
            .collect(),
        2 => (0..=n)
            .flat_map(|i| (0..=n - i).map(move |k| (i, k)))
            .map(|(i, k)| Action::new(vec![i as f64 / nf, k as f64 / nf]).unwrap())
            .collect(),
        _ => unreachable!("grid dimension checked by caller"),
    }
}

/// Constants of the regret bound `C₁ + C₂ηT + C₃/η`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl BoundConstants {
    pub fn new(bounds: &SupportBounds, mu0: &[f64], w: &[f64]) -> Self {
        let sb = bounds;
        let g = sb.b_bar + sb.a_bar;
        let c1 = (sb.f_bar + sb.r_bar + sb.lipschitz_l * g - sb.r_underline) / sb.rho_underline;
        let c2 = g * g / 2.0;
        let w_inf = w.iter().copied().fold(0.0, f64::max);
        let c3 = (sb.lipschitz_l + c1 * w_inf.sqrt()).powi(2) + norm::weighted_norm_sq(mu0, w);
        Self { c1, c2, c3 }
    }

    pub fn bound(&self, eta: f64, horizon: usize) -> f64 {
        self.c1 + self.c2 * eta * horizon as f64 + self.c3 / eta
    }

    /// `η* = √(C₃ / (C₂ T))`, the minimizer of [`BoundConstants::bound`].
    pub fn optimal_eta(&self, horizon: usize) -> f64 {
        (self.c3 / (self.c2 * horizon as f64)).sqrt()
    }
}

pub fn theoretical_bound(
    bounds: &SupportBounds,
    eta: f64,
    horizon: usize,
    mu0: &[f64],
    w: &[f64],
) -> f64 {
    BoundConstants::new(bounds, mu0, w).bound(eta, horizon)
}

/// `bound − objective`. Values below `−1e−6·T` indicate an invalid bound.
pub fn regret_estimate(trace: &RunTrace, bound: f64) -> f64 {
    let regret = bound - trace.objective;
    if regret < -1e-6 * trace.horizon() as f64 {
        log::warn!("negative regret estimate {regret}: bound below realized objective");
    }
    regret
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportOptions {
    /// Offline descent iterations for `dual_minimized`; 0 skips it.
    pub minimize_iterations: usize,
    /// Grid step for `brute_force_opt` on tiny instances.
    pub brute_force_step: Option<f64>,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            minimize_iterations: 200,
            brute_force_step: None,
        }
    }
}

/// Collects every available bound for a completed run.
pub fn bound_report(
    instance: &Instance,
    reg: &Regularizer,
    trace: &RunTrace,
    opts: &ReportOptions,
) -> Result<BoundReport> {
    let requests = &instance.requests;
    let tf = instance.horizon as f64;
    let dual_at_mu_avg = dual_bound_from_trace(trace, requests, reg);
    let dual_minimized = if opts.minimize_iterations > 0 {
        let schedule = EtaSchedule::standard(requests, reg)?;
        let (_, v) = minimize_dual(requests, reg, opts.minimize_iterations, schedule)?;
        Some(tf * v)
    } else {
        None
    };
    let brute_force_opt = match opts.brute_force_step {
        Some(step) if instance.horizon <= 3 && instance.num_actions() <= 2 => {
            Some(brute_force_opt(instance, reg, step)?)
        }
        _ => None,
    };
    let sb = support_bounds(instance, reg, &trace.weights)?;
    Ok(BoundReport {
        dual_at_mu_avg,
        dual_minimized,
        brute_force_opt,
        regret_vs_dual_avg: regret_estimate(trace, dual_at_mu_avg),
        theoretical_bound: theoretical_bound(
            &sb,
            trace.eta,
            instance.horizon,
            &trace.mu0,
            &trace.weights,
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(q: f64, b: f64) -> Request {
        Request::new(vec![q], vec![vec![b]])
    }

    #[test]
    fn empirical_dual_examples() {
        let reg = Regularizer::none(vec![1.0]);
        assert_eq!(empirical_dual(&[0.0], &[one(1.0, 1.0)], &reg), 1.0);
        // μ = 3: adjusted reward negative, only r*(−μ) = 3 remains
        assert_eq!(empirical_dual(&[3.0], &[one(1.0, 1.0)], &reg), 3.0);
        assert_eq!(
            empirical_dual(&[-1.0], &[one(1.0, 1.0)], &reg),
            f64::INFINITY
        );
    }

    #[test]
    fn minimize_dual_one_dimensional() {
        // D(μ) = max(0, 1 − μ) + 0.5 μ, minimized at μ = 1 with value 0.5
        let reqs = [one(1.0, 1.0)];
        let reg = Regularizer::none(vec![0.5]);
        let schedule = EtaSchedule::standard(&reqs, &reg).unwrap();
        let (mu, v) = minimize_dual(&reqs, &reg, 10_000, schedule).unwrap();
        assert!((v - 0.5).abs() < 1e-3, "{v} at {mu:?}");
        assert!(v <= empirical_dual(&[0.0], &reqs, &reg));
    }

    #[test]
    fn brute_force_examples() {
        let reg = Regularizer::none(vec![1.0]);
        let inst = Instance::new(vec![1.0], vec![one(1.0, 1.0)]).unwrap();
        assert_eq!(brute_force_opt(&inst, &reg, 0.1).unwrap(), 1.0);

        let reg = Regularizer::none(vec![0.4]);
        let inst = Instance::new(vec![0.4], vec![one(1.0, 1.0)]).unwrap();
        assert!((brute_force_opt(&inst, &reg, 0.1).unwrap() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn brute_force_rejects_large_instances() {
        let reg = Regularizer::none(vec![1.0]);
        let inst = Instance::new(vec![1.0], vec![one(1.0, 1.0); 4]).unwrap();
        assert!(matches!(
            brute_force_opt(&inst, &reg, 0.1),
            Err(Error::TooLarge(_))
        ));
        let two = Request::new(vec![1.0, 0.5], vec![vec![1.0, 1.0]]);
        let inst = Instance::new(vec![1.0], vec![two; 3]).unwrap();
        assert!(matches!(
            brute_force_opt(&inst, &reg, 0.01),
            Err(Error::TooLarge(_))
        ));
        assert!(brute_force_opt(&inst, &reg, 0.5).is_err());
    }

    fn unit_bounds() -> SupportBounds {
        SupportBounds {
            f_bar: 1.0,
            b_bar: 1.0,
            a_bar: 1.0,
            lipschitz_l: 0.0,
            r_bar: 0.0,
            r_underline: 0.0,
            rho_underline: 1.0,
        }
    }

    #[test]
    fn bound_constants_examples() {
        let c = BoundConstants::new(&unit_bounds(), &[0.0], &[1.0]);
        assert_eq!((c.c1, c.c2, c.c3), (1.0, 2.0, 1.0));
        assert_eq!(
            theoretical_bound(&unit_bounds(), 1.0, 1, &[0.0], &[1.0]),
            4.0
        );

        let zero = SupportBounds {
            f_bar: 0.0,
            b_bar: 0.0,
            a_bar: 0.0,
            ..unit_bounds()
        };
        assert_eq!(theoretical_bound(&zero, 0.5, 10, &[0.0], &[1.0]), 0.0);
    }

    #[test]
    fn regret_is_bound_minus_objective() {
        let inst = Instance::new(vec![1.0], vec![one(1.0, 1.0)]).unwrap();
        let reg = Regularizer::none(inst.rho.clone());
        let trace = crate::solver::run(&inst, &reg, &Default::default()).unwrap();
        assert_eq!(regret_estimate(&trace, trace.objective), 0.0);
    }
}
