//! The online dual subgradient descent loop.
//!
//! Each period: best-respond to the current prices, void the action if it
//! would overrun the remaining budget, pick the regularizer's target
//! consumption, form the stochastic subgradient `g = a − b x̃` from the
//! *unguarded* response and take a weighted projected descent step.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::domain::{support_bounds, Action, Instance, Request};
use crate::error::{Error, Result};
use crate::geometry::{rho_squared, DescentContext};
use crate::norm;
use crate::regularizer::Regularizer;

pub const DEFAULT_ETA_SCALE: f64 = 0.01;

fn default_eta_scale() -> f64 {
    DEFAULT_ETA_SCALE
}

/// How the weight vector `w` is derived from the budget rate.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightRule {
    /// `w_j = ρ_j²`.
    #[default]
    RhoSquared,
    Ones,
    Explicit(Vec<f64>),
}

impl WeightRule {
    pub fn resolve(&self, rho: &[f64]) -> Result<Vec<f64>> {
        let w = match self {
            WeightRule::RhoSquared => rho_squared(rho),
            WeightRule::Ones => vec![1.0; rho.len()],
            WeightRule::Explicit(w) => w.clone(),
        };
        norm::check_weights(&w, rho.len())?;
        Ok(w)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Initial dual; defaults to the projection of `0` onto the dual set.
    #[serde(default)]
    pub mu0: Option<Vec<f64>>,
    /// Fixed step-size. When absent, `eta_scale · T^(−1/2)` is used.
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(default = "default_eta_scale")]
    pub eta_scale: f64,
    #[serde(default)]
    pub w_rule: WeightRule,
    /// Reserved; the loop itself is deterministic.
    #[serde(default)]
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            mu0: None,
            eta: None,
            eta_scale: DEFAULT_ETA_SCALE,
            w_rule: WeightRule::RhoSquared,
            seed: 0,
        }
    }
}

impl SolverConfig {
    /// Constant step-size for a run of length `horizon`.
    pub fn resolve_eta(&self, horizon: usize) -> Result<f64> {
        let eta = self
            .eta
            .unwrap_or_else(|| self.eta_scale / (horizon as f64).sqrt());
        if eta > 0.0 && eta.is_finite() {
            Ok(eta)
        } else {
            Err(Error::InvalidStepSize(eta))
        }
    }

    pub fn initial_dual(&self, ctx: &DescentContext) -> Result<Vec<f64>> {
        let m = ctx.weights().len();
        match &self.mu0 {
            Some(mu0) => {
                if mu0.len() != m {
                    return Err(Error::DimensionMismatch {
                        what: "mu0".into(),
                        expected: m,
                        found: mu0.len(),
                    });
                }
                if !ctx.regularizer().contains(mu0) {
                    return Err(Error::OutsideDualSet);
                }
                Ok(mu0.clone())
            }
            None => Ok(ctx.project(&vec![0.0; m])),
        }
    }
}

/// One period of the loop. `mu` is the dual *before* the update.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// 1-based period index.
    pub t: usize,
    pub mu: Vec<f64>,
    pub x: Action,
    pub x_tilde: Action,
    pub a: Vec<f64>,
    pub g: Vec<f64>,
    pub reward: f64,
    pub consumption: Vec<f64>,
    pub remaining: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub steps: Vec<StepRecord>,
    pub depletion_time: Option<usize>,
    pub mu_average: Vec<f64>,
    pub total_reward: f64,
    /// `(1/T) Σ_t b_t x_t`.
    pub final_consumption_rate: Vec<f64>,
    /// `T · r(final_consumption_rate)`.
    pub regularizer_value: f64,
    /// `total_reward + regularizer_value`.
    pub objective: f64,
    pub eta: f64,
    pub weights: Vec<f64>,
    pub mu0: Vec<f64>,
}

#[derive(Serialize)]
struct TraceSummary<'a> {
    total_reward: f64,
    objective: f64,
    depletion_time: Option<usize>,
    mu_average: &'a [f64],
}

impl RunTrace {
    pub fn horizon(&self) -> usize {
        self.steps.len()
    }

    /// `Σ_t b_t x_t`, summed forward in period order.
    pub fn total_consumption(&self) -> Vec<f64> {
        let m = self.mu_average.len();
        let mut used = vec![0.0; m];
        for step in &self.steps {
            for (u, c) in used.iter_mut().zip(&step.consumption) {
                *u += c;
            }
        }
        used
    }

    /// `min_j Σ_t (b_t x_t)_j / (T ρ_j)`.
    pub fn fairness(&self, rho: &[f64]) -> f64 {
        let t = self.horizon() as f64;
        self.total_consumption()
            .iter()
            .zip(rho)
            .map(|(u, r)| u / (t * r))
            .fold(f64::INFINITY, f64::min)
    }

    /// One JSON object per step, then a summary line.
    pub fn write_jsonl(&self, mut out: impl Write) -> Result<()> {
        for step in &self.steps {
            serde_json::to_writer(&mut out, step)?;
            out.write_all(b"\n")?;
        }
        serde_json::to_writer(
            &mut out,
            &TraceSummary {
                total_reward: self.total_reward,
                objective: self.objective,
                depletion_time: self.depletion_time,
                mu_average: &self.mu_average,
            },
        )?;
        out.write_all(b"\n")?;
        Ok(())
    }
}

/// `argmax_{x ∈ X} qᵀx − μᵀbx`: the vertex with the largest strictly
/// positive adjusted reward (smallest index on ties), else the void action.
pub fn best_response(request: &Request, mu: &[f64]) -> Action {
    let s = request.adjusted_rewards(mu);
    let mut best: Option<(usize, f64)> = None;
    for (j, &v) in s.iter().enumerate() {
        if v > 0.0 && best.is_none_or(|(_, b)| v > b) {
            best = Some((j, v));
        }
    }
    match best {
        Some((j, _)) => Action::vertex(s.len(), j),
        None => Action::void(s.len()),
    }
}

/// `x̃` if `b x̃ ≤ remaining` componentwise, else the void action.
pub fn budget_guard(x_tilde: &Action, request: &Request, remaining: &[f64]) -> Action {
    let fits = request
        .consumption(x_tilde)
        .iter()
        .zip(remaining)
        .all(|(c, r)| c <= r);
    if fits {
        x_tilde.clone()
    } else {
        Action::void(x_tilde.as_slice().len())
    }
}

/// Runs the algorithm over the realized request sequence.
///
/// The executed budget test compares the forward running sum of consumption
/// with `Tρ`, so `Σ_t b_t x_t ≤ Tρ` holds bit-exactly in floating point.
pub fn run(instance: &Instance, reg: &Regularizer, cfg: &SolverConfig) -> Result<RunTrace> {
    instance.validate()?;
    let m = instance.num_resources();
    if reg.rho() != instance.rho.as_slice() {
        return Err(Error::InvalidRegularizer(
            "regularizer budget rate differs from the instance".into(),
        ));
    }
    let horizon = instance.horizon;
    let w = cfg.w_rule.resolve(&instance.rho)?;
    let eta = cfg.resolve_eta(horizon)?;
    let ctx = DescentContext::new(reg.clone(), w.clone(), eta)?;
    let mu0 = cfg.initial_dual(&ctx)?;
    let budget = instance.budget();

    let mut mu = mu0.clone();
    let mut used = vec![0.0; m];
    let mut mu_sum = vec![0.0; m];
    let mut total_reward = 0.0;
    let mut steps = Vec::with_capacity(horizon);

    for (idx, request) in instance.requests.iter().enumerate() {
        let t = idx + 1;
        debug_assert!(reg.contains(&mu), "dual iterate left D at step {t}");
        let x_tilde = best_response(request, &mu);
        let tilde_consumption = request.consumption(&x_tilde);
        let fits = (0..m).all(|j| used[j] + tilde_consumption[j] <= budget[j]);
        let x = if fits {
            x_tilde.clone()
        } else {
            Action::void(x_tilde.as_slice().len())
        };
        let consumption = if fits {
            tilde_consumption.clone()
        } else {
            vec![0.0; m]
        };
        for j in 0..m {
            used[j] += consumption[j];
        }
        let remaining: Vec<f64> = (0..m).map(|j| budget[j] - used[j]).collect();

        let a = reg.argmax(&mu)?;
        let g: Vec<f64> = (0..m).map(|j| a[j] - tilde_consumption[j]).collect();
        let reward = request.reward(&x);
        total_reward += reward;

        let next = ctx.step(&mu, &g)?;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteIterate { step: t });
        }
        for j in 0..m {
            mu_sum[j] += mu[j];
        }
        steps.push(StepRecord {
            t,
            mu: std::mem::replace(&mut mu, next),
            x,
            x_tilde,
            a,
            g,
            reward,
            consumption,
            remaining,
        });
    }

    let tf = horizon as f64;
    let final_consumption_rate: Vec<f64> = used.iter().map(|u| u / tf).collect();
    let regularizer_value = tf * reg.value(&final_consumption_rate)?;
    let b_bar = support_bounds(instance, reg, &w)?.b_bar;
    let mut trace = RunTrace {
        steps,
        depletion_time: None,
        mu_average: mu_sum.iter().map(|s| s / tf).collect(),
        total_reward,
        final_consumption_rate,
        regularizer_value,
        objective: total_reward + regularizer_value,
        eta,
        weights: w,
        mu0,
    };
    trace.depletion_time = depletion_time(&trace, &instance.rho, b_bar);
    Ok(trace)
}

/// First period `t` at which some resource satisfies
/// `Σ_{s≤t} (b_s x_s)_j + b_bar ≥ ρ_j T`.
pub fn depletion_time(trace: &RunTrace, rho: &[f64], b_bar: f64) -> Option<usize> {
    let horizon = trace.horizon() as f64;
    let mut used = vec![0.0; rho.len()];
    for step in &trace.steps {
        for (u, c) in used.iter_mut().zip(&step.consumption) {
            *u += c;
        }
        if used.iter().zip(rho).any(|(u, r)| u + b_bar >= r * horizon) {
            return Some(step.t);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_request(q: &[f64]) -> Request {
        Request::with_identity_costs(q.to_vec())
    }

    #[test]
    fn best_response_examples() {
        let r = identity_request(&[3.0, 1.0]);
        assert_eq!(best_response(&r, &[0.0, 0.0]), Action::vertex(2, 0));
        let r = identity_request(&[1.0, 1.0]);
        assert!(best_response(&r, &[2.0, 2.0]).is_void());
        let r = Request::new(vec![2.0, 1.0], vec![vec![1.0, 0.0], vec![0.0, 2.0]]);
        assert_eq!(best_response(&r, &[1.0, 0.4]), Action::vertex(2, 0));
    }

    #[test]
    fn best_response_breaks_ties_to_smallest_index_and_void_on_zero() {
        let r = identity_request(&[1.0, 1.0]);
        assert_eq!(best_response(&r, &[0.0, 0.0]), Action::vertex(2, 0));
        assert!(best_response(&r, &[1.0, 1.0]).is_void());
    }

    #[test]
    fn budget_guard_examples() {
        let r = Request::new(vec![1.0], vec![vec![0.5]]);
        let x = Action::vertex(1, 0);
        assert_eq!(budget_guard(&x, &r, &[1.0]), x);
        let r = Request::new(vec![1.0], vec![vec![1.5]]);
        assert!(budget_guard(&x, &r, &[1.0]).is_void());
        let r = Request::new(vec![1.0], vec![vec![1.0]]);
        assert_eq!(budget_guard(&x, &r, &[1.0]), x);
    }

    #[test]
    fn single_step_matches_unrolled_update() {
        let inst = Instance::new(vec![0.5, 0.5], vec![identity_request(&[0.2, 0.7])]).unwrap();
        let reg = Regularizer::none(inst.rho.clone());
        let cfg = SolverConfig {
            eta: Some(0.1),
            ..SolverConfig::default()
        };
        let trace = run(&inst, &reg, &cfg).unwrap();
        let s = &trace.steps[0];
        assert_eq!(s.x_tilde, Action::vertex(2, 1));
        // budget 0.5 < 1: the guard voids the action
        assert!(s.x.is_void());
        assert_eq!(s.g, vec![0.5, -0.5]);
        assert_eq!(s.remaining, vec![0.5, 0.5]);
        let w: f64 = 0.25;
        assert_eq!(trace.steps.len(), 1);
        assert_eq!(trace.mu_average, vec![0.0, 0.0]);
        let mu1 = [
            (0.0f64 - 0.1 * 0.5 / w).max(0.0),
            (0.0f64 + 0.1 * 0.5 / w).max(0.0),
        ];
        // re-run one more step to observe μ₁
        let inst2 = Instance::new(
            vec![0.5, 0.5],
            vec![identity_request(&[0.2, 0.7]), identity_request(&[0.0, 0.0])],
        )
        .unwrap();
        let cfg2 = SolverConfig {
            eta: Some(0.1),
            ..SolverConfig::default()
        };
        let tr2 = run(&inst2, &reg, &cfg2).unwrap();
        assert_eq!(tr2.steps[1].mu, mu1.to_vec());
    }

    #[test]
    fn serves_exactly_one_unit_when_budget_is_one() {
        let rho = 1.0 / 3.0;
        let reqs = vec![Request::new(vec![1.0], vec![vec![1.0]]); 3];
        let inst = Instance::new(vec![rho], reqs).unwrap();
        let reg = Regularizer::none(inst.rho.clone());
        for eta in [1e-4, 0.01, 1.0] {
            let cfg = SolverConfig {
                eta: Some(eta),
                ..SolverConfig::default()
            };
            let trace = run(&inst, &reg, &cfg).unwrap();
            let served: f64 = trace.total_consumption()[0];
            assert!(served <= 3.0 * rho);
            assert!(trace.steps.iter().all(|s| s.remaining[0] >= 0.0));
            assert_eq!(trace.total_reward, served);
            assert!(served <= 1.0);
        }
    }

    #[test]
    fn nonbinding_budgets_serve_every_best_coordinate() {
        let reqs = vec![
            identity_request(&[0.3, 0.1]),
            identity_request(&[0.0, 0.4]),
            identity_request(&[0.2, 0.2]),
            identity_request(&[0.0, 0.0]),
        ];
        let inst = Instance::new(vec![5.0, 5.0], reqs).unwrap();
        let reg = Regularizer::none(inst.rho.clone());
        let trace = run(&inst, &reg, &SolverConfig::default()).unwrap();
        assert!((trace.total_reward - 0.9).abs() < 1e-15);
        assert!(trace.steps.iter().all(|s| s.mu == vec![0.0, 0.0]));
    }

    #[test]
    fn depletion_time_threshold() {
        let steps: Vec<StepRecord> = (1..=6)
            .map(|t| StepRecord {
                t,
                mu: vec![0.0],
                x: Action::void(1),
                x_tilde: Action::void(1),
                a: vec![0.0],
                g: vec![0.0],
                reward: 0.0,
                consumption: vec![if t <= 5 { 0.14 } else { 0.0 }],
                remaining: vec![0.0],
            })
            .collect();
        let trace = RunTrace {
            steps,
            depletion_time: None,
            mu_average: vec![0.0],
            total_reward: 0.0,
            final_consumption_rate: vec![0.0],
            regularizer_value: 0.0,
            objective: 0.0,
            eta: 1.0,
            weights: vec![1.0],
            mu0: vec![0.0],
        };
        // ρT = 1 with T = 6; cumulative consumption reaches 0.7 at t = 5
        let rho = [1.0 / 6.0];
        assert_eq!(depletion_time(&trace, &rho, 0.3), Some(5));
        assert_eq!(depletion_time(&trace, &rho, 0.0), None);
    }

    #[test]
    fn rejects_infeasible_mu0() {
        let inst = Instance::new(vec![1.0], vec![identity_request(&[1.0])]).unwrap();
        let reg = Regularizer::none(inst.rho.clone());
        let cfg = SolverConfig {
            mu0: Some(vec![-1.0]),
            ..SolverConfig::default()
        };
        assert!(matches!(run(&inst, &reg, &cfg), Err(Error::OutsideDualSet)));
    }

    #[test]
    fn load_balancing_default_mu0_is_projected_into_d() {
        let inst = Instance::new(vec![0.5, 0.5], vec![identity_request(&[1.0, 1.0])]).unwrap();
        let reg = Regularizer::load_balancing(inst.rho.clone(), 1.0).unwrap();
        let trace = run(&inst, &reg, &SolverConfig::default()).unwrap();
        assert!(reg.contains(&trace.mu0));
        assert!((norm::dot(&trace.mu0, &inst.rho) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn jsonl_has_expected_fields() {
        let inst = Instance::new(vec![1.0], vec![identity_request(&[1.0]); 2]).unwrap();
        let reg = Regularizer::none(inst.rho.clone());
        let trace = run(&inst, &reg, &SolverConfig::default()).unwrap();
        let mut buf = Vec::new();
        trace.write_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<serde_json::Value> = text
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(lines.len(), 3);
        for key in [
            "t",
            "mu",
            "x",
            "x_tilde",
            "a",
            "g",
            "reward",
            "consumption",
            "remaining",
        ] {
            assert!(lines[0].get(key).is_some(), "missing {key}");
        }
        for key in ["total_reward", "objective", "depletion_time", "mu_average"] {
            assert!(lines[2].get(key).is_some(), "missing {key}");
        }
    }
}
