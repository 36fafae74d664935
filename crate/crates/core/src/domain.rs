//! Problem data: requests, instances, actions and the support-bound
//! diagnostics used by the regret calculator.
//!
//! Rewards are linear, `f(x) = qᵀx`, over the scaled simplex
//! `X = {x ≥ 0, Σ x_j ≤ 1}`. Costs are an `m × d` nonnegative matrix stored
//! row-major (one row per resource).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::norm;
use crate::regularizer::Regularizer;

/// Round-off tolerated on an action before it is clamped into `X`.
pub const ACTION_TOL: f64 = 1e-12;

/// One arrival `(q, b)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Request {
    #[serde(rename = "q")]
    pub rewards: Vec<f64>,
    /// `m` rows × `d` columns.
    #[serde(rename = "b")]
    pub costs: Vec<Vec<f64>>,
}

impl Request {
    pub fn new(rewards: Vec<f64>, costs: Vec<Vec<f64>>) -> Self {
        Self { rewards, costs }
    }

    /// A request whose cost matrix is the `m × m` identity.
    pub fn with_identity_costs(rewards: Vec<f64>) -> Self {
        let m = rewards.len();
        let costs = (0..m)
            .map(|i| (0..m).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self { rewards, costs }
    }

    pub fn num_actions(&self) -> usize {
        self.rewards.len()
    }

    pub fn num_resources(&self) -> usize {
        self.costs.len()
    }

    pub fn reward(&self, x: &Action) -> f64 {
        norm::dot(&self.rewards, x.as_slice())
    }

    /// Resource consumption `b x`.
    pub fn consumption(&self, x: &Action) -> Vec<f64> {
        self.costs
            .iter()
            .map(|row| norm::dot(row, x.as_slice()))
            .collect()
    }

    /// Column `j` of `b`, i.e. the consumption of the vertex action `e_j`.
    pub fn cost_column(&self, j: usize) -> Vec<f64> {
        self.costs.iter().map(|row| row[j]).collect()
    }

    /// Opportunity-cost-adjusted rewards `q − bᵀμ`.
    pub fn adjusted_rewards(&self, mu: &[f64]) -> Vec<f64> {
        let mut s = self.rewards.clone();
        for (row, mu_i) in self.costs.iter().zip(mu) {
            for (s_j, b_ij) in s.iter_mut().zip(row) {
                *s_j -= mu_i * b_ij;
            }
        }
        s
    }

    /// Conjugate `f*(bᵀμ) = sup_{x ∈ X} qᵀx − μᵀbx`, attained at `0` or a vertex.
    pub fn conjugate(&self, mu: &[f64]) -> f64 {
        self.adjusted_rewards(mu).into_iter().fold(0.0, f64::max)
    }
}

/// A full realized request sequence with its horizon and per-period budget.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    #[serde(rename = "T")]
    pub horizon: usize,
    pub rho: Vec<f64>,
    pub requests: Vec<Request>,
}

impl Instance {
    /// Builds and validates an instance; the horizon is the number of requests.
    pub fn new(rho: Vec<f64>, requests: Vec<Request>) -> Result<Self> {
        validate_instance(Self {
            horizon: requests.len(),
            rho,
            requests,
        })
    }

    pub fn num_resources(&self) -> usize {
        self.rho.len()
    }

    pub fn num_actions(&self) -> usize {
        self.requests.first().map_or(0, Request::num_actions)
    }

    /// Total budget `Tρ`.
    pub fn budget(&self) -> Vec<f64> {
        let t = self.horizon as f64;
        self.rho.iter().map(|r| t * r).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::EmptyHorizon);
        }
        if self.requests.len() != self.horizon {
            return Err(Error::DimensionMismatch {
                what: "requests".into(),
                expected: self.horizon,
                found: self.requests.len(),
            });
        }
        for (j, &r) in self.rho.iter().enumerate() {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::NonPositiveBudgetRate { j, value: r });
            }
        }
        let m = self.rho.len();
        let d = self.num_actions();
        for (t, req) in self.requests.iter().enumerate() {
            if req.rewards.len() != d {
                return Err(Error::DimensionMismatch {
                    what: format!("rewards of request {t}"),
                    expected: d,
                    found: req.rewards.len(),
                });
            }
            if req.costs.len() != m {
                return Err(Error::DimensionMismatch {
                    what: format!("cost rows of request {t}"),
                    expected: m,
                    found: req.costs.len(),
                });
            }
            for (j, &q) in req.rewards.iter().enumerate() {
                if !q.is_finite() {
                    return Err(Error::NonFinite {
                        what: format!("reward at t={t}, j={j}"),
                    });
                }
                if q < 0.0 {
                    return Err(Error::NegativeReward { t, j, value: q });
                }
            }
            for (row, costs) in req.costs.iter().enumerate() {
                if costs.len() != d {
                    return Err(Error::DimensionMismatch {
                        what: format!("cost row {row} of request {t}"),
                        expected: d,
                        found: costs.len(),
                    });
                }
                for (col, &b) in costs.iter().enumerate() {
                    if !b.is_finite() {
                        return Err(Error::NonFinite {
                            what: format!("cost at t={t}, ({row},{col})"),
                        });
                    }
                    if b < 0.0 {
                        return Err(Error::NegativeCost {
                            t,
                            row,
                            col,
                            value: b,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        validate_instance(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

/// Returns the instance iff every invariant holds.
pub fn validate_instance(instance: Instance) -> Result<Instance> {
    instance.validate()?;
    Ok(instance)
}

/// A point of the scaled simplex `{x ≥ 0, Σ x_j ≤ 1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Action(Vec<f64>);

impl Action {
    /// The void action `0`.
    pub fn void(d: usize) -> Self {
        Self(vec![0.0; d])
    }

    /// The simplex vertex `e_j`.
    pub fn vertex(d: usize, j: usize) -> Self {
        let mut x = vec![0.0; d];
        x[j] = 1.0;
        Self(x)
    }

    /// Accepts `x` if it lies in `X` up to [`ACTION_TOL`], then clamps it
    /// exactly into `X`.
    pub fn new(mut x: Vec<f64>) -> Result<Self> {
        if let Some(j) = x.iter().position(|v| !v.is_finite() || *v < -ACTION_TOL) {
            return Err(Error::InvalidConfig(format!(
                "action coordinate {j} = {} is negative",
                x[j]
            )));
        }
        x.iter_mut().for_each(|v| *v = v.max(0.0));
        let total: f64 = x.iter().sum();
        if total > 1.0 + ACTION_TOL {
            return Err(Error::InvalidConfig(format!("action sums to {total} > 1")));
        }
        if total > 1.0 {
            x.iter_mut().for_each(|v| *v /= total);
        }
        Ok(Self(x))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_void(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// Support constants appearing in the regret bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportBounds {
    pub f_bar: f64,
    pub b_bar: f64,
    pub a_bar: f64,
    pub lipschitz_l: f64,
    pub r_bar: f64,
    pub r_underline: f64,
    pub rho_underline: f64,
}

/// Support bounds computed from the realized request sequence.
///
/// Linear forms over the simplex attain their extremes at `0` or a vertex,
/// so `f_bar` and `b_bar` are maxima over the columns of each request.
pub fn support_bounds(instance: &Instance, reg: &Regularizer, w: &[f64]) -> Result<SupportBounds> {
    let m = instance.num_resources();
    norm::check_weights(w, m)?;
    let mut f_bar: f64 = 0.0;
    let mut b_bar: f64 = 0.0;
    for req in &instance.requests {
        for j in 0..req.num_actions() {
            f_bar = f_bar.max(req.rewards[j]);
            b_bar = b_bar.max(norm::dual_norm(&req.cost_column(j), w));
        }
    }
    let rb = reg.bounds(w);
    Ok(SupportBounds {
        f_bar,
        b_bar,
        a_bar: rb.a_bar,
        lipschitz_l: rb.lipschitz,
        r_bar: rb.r_bar,
        r_underline: rb.r_underline,
        rho_underline: instance.rho.iter().copied().fold(f64::INFINITY, f64::min),
    })
}
