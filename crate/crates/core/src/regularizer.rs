//! Concave consumption regularizers `r(a)` on the average consumption `a ≤ ρ`.
//!
//! Every variant supplies its value, the conjugate
//! `r*(−μ) = sup_{a ≤ ρ} r(a) + μᵀa`, a maximizer `a*(−μ)`, membership in the
//! dual feasible set `D = {μ : r*(−μ) < ∞}` and the constants needed by the
//! regret bound.
//!
//! | variant          | `r(a)`                        | `D`                                  |
//! |------------------|-------------------------------|--------------------------------------|
//! | none             | `0`                           | `μ ≥ 0`                              |
//! | max-min fairness | `λ min_j a_j/ρ_j`             | `Σ_{j∈S} ρ_j μ_j ≥ −λ` for all `S`   |
//! | load balancing   | `−λ max_j a_j/ρ_j`            | `μ ≥ 0`, `ρᵀμ ≥ λ`                   |
//! | hinge            | `−Σ c_j max(a_j − t_j, 0)`    | `μ ≥ 0`                              |
//! | mirrored hinge   | `−Σ c_j max(t_j − a_j, 0)`    | `μ ≥ −c`                             |

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::norm;

/// Absolute slack used by membership tests and the `a ≤ ρ` precondition.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "none")]
    None,
    #[serde(rename = "maxmin")]
    MaxMin,
    #[serde(rename = "loadbal")]
    LoadBalancing,
    #[serde(rename = "hinge")]
    Hinge,
    #[serde(rename = "mirrored_hinge")]
    MirroredHinge,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::None,
        Variant::MaxMin,
        Variant::LoadBalancing,
        Variant::Hinge,
        Variant::MirroredHinge,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::None => "none",
            Variant::MaxMin => "maxmin",
            Variant::LoadBalancing => "loadbal",
            Variant::Hinge => "hinge",
            Variant::MirroredHinge => "mirrored_hinge",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::InvalidRegularizer(format!("unknown variant {s:?}")))
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Serialized form: `{"variant", "lambda", "c", "t"}`.
///
/// The budget rate is not part of the config; [`RegularizerConfig::bind`]
/// attaches it from the instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularizerConfig {
    pub variant: Variant,
    #[serde(default)]
    pub lambda: f64,
    #[serde(default)]
    pub c: Vec<f64>,
    #[serde(default)]
    pub t: Vec<f64>,
}

impl RegularizerConfig {
    pub fn new(variant: Variant, lambda: f64) -> Self {
        Self {
            variant,
            lambda,
            c: Vec::new(),
            t: Vec::new(),
        }
    }

    /// Binds the parameters to a budget rate. Empty hinge vectors default to
    /// `c = 1` and `t = ρ/2`.
    pub fn bind(&self, rho: &[f64]) -> Result<Regularizer> {
        let rho = rho.to_vec();
        let m = rho.len();
        let hinge_params = || {
            let c = if self.c.is_empty() {
                vec![1.0; m]
            } else {
                self.c.clone()
            };
            let t = if self.t.is_empty() {
                rho.iter().map(|r| r / 2.0).collect()
            } else {
                self.t.clone()
            };
            (c, t)
        };
        match self.variant {
            Variant::None => Ok(Regularizer::none(rho)),
            Variant::MaxMin => Regularizer::max_min(rho, self.lambda),
            Variant::LoadBalancing => Regularizer::load_balancing(rho, self.lambda),
            Variant::Hinge => {
                let (c, t) = hinge_params();
                Regularizer::hinge(rho, c, t)
            }
            Variant::MirroredHinge => {
                let (c, t) = hinge_params();
                Regularizer::mirrored_hinge(rho, c, t)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Kind {
    None,
    MaxMin { lambda: f64 },
    LoadBalancing { lambda: f64 },
    Hinge { c: Vec<f64>, t: Vec<f64> },
    MirroredHinge { c: Vec<f64>, t: Vec<f64> },
}

/// Shape of the dual feasible set, which selects the projection routine.
#[derive(Clone, Debug, PartialEq)]
pub enum DualGeometry {
    /// `{μ ≥ lower}`.
    Box { lower: Vec<f64> },
    /// `{μ ≥ 0, ρᵀμ ≥ λ}`.
    HalfspaceOrthant { lambda: f64 },
    /// `{Σ_{j∈S} ρ_j μ_j ≥ −λ ∀S}`.
    SubsetSums { lambda: f64 },
}

/// Constants of the regularizer entering the regret bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularizerBounds {
    pub a_bar: f64,
    pub lipschitz: f64,
    pub r_bar: f64,
    pub r_underline: f64,
}

/// A regularizer bound to a budget rate `ρ`.
#[derive(Clone, Debug, PartialEq)]
pub struct Regularizer {
    kind: Kind,
    rho: Vec<f64>,
}

fn check_rho(rho: &[f64]) -> Result<()> {
    for (j, &r) in rho.iter().enumerate() {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::NonPositiveBudgetRate { j, value: r });
        }
    }
    Ok(())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidRegularizer(format!(
            "lambda must be positive, got {lambda}"
        )))
    }
}

fn check_hinge(rho: &[f64], c: &[f64], t: &[f64]) -> Result<()> {
    for (what, v) in [("c", c), ("t", t)] {
        if v.len() != rho.len() {
            return Err(Error::DimensionMismatch {
                what: format!("hinge {what}"),
                expected: rho.len(),
                found: v.len(),
            });
        }
    }
    for j in 0..rho.len() {
        if !(c[j] >= 0.0 && c[j].is_finite()) {
            return Err(Error::InvalidRegularizer(format!(
                "penalty c[{j}] = {} is negative",
                c[j]
            )));
        }
        if !(t[j] >= 0.0 && t[j] <= rho[j]) {
            return Err(Error::InvalidRegularizer(format!(
                "threshold t[{j}] = {} outside [0, {}]",
                t[j], rho[j]
            )));
        }
    }
    Ok(())
}

impl Regularizer {
    pub fn none(rho: Vec<f64>) -> Self {
        Self {
            kind: Kind::None,
            rho,
        }
    }

    pub fn max_min(rho: Vec<f64>, lambda: f64) -> Result<Self> {
        check_rho(&rho)?;
        check_lambda(lambda)?;
        Ok(Self {
            kind: Kind::MaxMin { lambda },
            rho,
        })
    }

    pub fn load_balancing(rho: Vec<f64>, lambda: f64) -> Result<Self> {
        check_rho(&rho)?;
        check_lambda(lambda)?;
        Ok(Self {
            kind: Kind::LoadBalancing { lambda },
            rho,
        })
    }

    pub fn hinge(rho: Vec<f64>, c: Vec<f64>, t: Vec<f64>) -> Result<Self> {
        check_rho(&rho)?;
        check_hinge(&rho, &c, &t)?;
        Ok(Self {
            kind: Kind::Hinge { c, t },
            rho,
        })
    }

    pub fn mirrored_hinge(rho: Vec<f64>, c: Vec<f64>, t: Vec<f64>) -> Result<Self> {
        check_rho(&rho)?;
        check_hinge(&rho, &c, &t)?;
        Ok(Self {
            kind: Kind::MirroredHinge { c, t },
            rho,
        })
    }

    pub fn kind(&self) -> &Kind {
        &self.kind
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn num_resources(&self) -> usize {
        self.rho.len()
    }

    pub fn variant(&self) -> Variant {
        match self.kind {
            Kind::None => Variant::None,
            Kind::MaxMin { .. } => Variant::MaxMin,
            Kind::LoadBalancing { .. } => Variant::LoadBalancing,
            Kind::Hinge { .. } => Variant::Hinge,
            Kind::MirroredHinge { .. } => Variant::MirroredHinge,
        }
    }

    pub fn config(&self) -> RegularizerConfig {
        let mut cfg = RegularizerConfig::new(self.variant(), 0.0);
        match &self.kind {
            Kind::None => {}
            Kind::MaxMin { lambda } | Kind::LoadBalancing { lambda } => cfg.lambda = *lambda,
            Kind::Hinge { c, t } | Kind::MirroredHinge { c, t } => {
                cfg.c = c.clone();
                cfg.t = t.clone();
            }
        }
        cfg
    }

    pub fn geometry(&self) -> DualGeometry {
        let m = self.rho.len();
        match &self.kind {
            Kind::None | Kind::Hinge { .. } => DualGeometry::Box {
                lower: vec![0.0; m],
            },
            Kind::MirroredHinge { c, .. } => DualGeometry::Box {
                lower: c.iter().map(|v| -v).collect(),
            },
            Kind::LoadBalancing { lambda } => DualGeometry::HalfspaceOrthant { lambda: *lambda },
            Kind::MaxMin { lambda } => DualGeometry::SubsetSums { lambda: *lambda },
        }
    }

    /// `r(a)`. Fails when `a` exceeds `ρ` by more than [`MEMBERSHIP_TOL`].
    pub fn value(&self, a: &[f64]) -> Result<f64> {
        self.check_len(a.len(), "consumption")?;
        for (j, (&aj, &rj)) in a.iter().zip(&self.rho).enumerate() {
            if aj > rj + MEMBERSHIP_TOL {
                return Err(Error::ConsumptionExceedsBudget {
                    j,
                    value: aj,
                    limit: rj,
                });
            }
        }
        Ok(self.value_unchecked(a))
    }

    /// `r(a)` without the `a ≤ ρ` check.
    pub fn value_unchecked(&self, a: &[f64]) -> f64 {
        let rel = || a.iter().zip(&self.rho).map(|(aj, rj)| aj / rj);
        match &self.kind {
            Kind::None => 0.0,
            Kind::MaxMin { lambda } => lambda * rel().fold(f64::INFINITY, f64::min),
            Kind::LoadBalancing { lambda } => -lambda * rel().fold(f64::NEG_INFINITY, f64::max),
            Kind::Hinge { c, t } => -(0..a.len())
                .map(|j| c[j] * (a[j] - t[j]).max(0.0))
                .sum::<f64>(),
            Kind::MirroredHinge { c, t } => -(0..a.len())
                .map(|j| c[j] * (t[j] - a[j]).max(0.0))
                .sum::<f64>(),
        }
    }

    /// `r*(−μ)`; `+∞` exactly when `μ ∉ D`.
    pub fn conjugate(&self, mu: &[f64]) -> f64 {
        if mu.len() != self.rho.len() || !self.contains(mu) {
            return f64::INFINITY;
        }
        let rho_mu = norm::dot(&self.rho, mu);
        match &self.kind {
            Kind::None => rho_mu,
            Kind::MaxMin { lambda } => rho_mu + lambda,
            // The maximizer is a = ρ, where r(ρ) = −λ.
            Kind::LoadBalancing { lambda } => rho_mu - lambda,
            Kind::Hinge { c, t } => {
                norm::dot(mu, t)
                    + (0..mu.len())
                        .map(|j| (self.rho[j] - t[j]) * (mu[j] - c[j]).max(0.0))
                        .sum::<f64>()
            }
            Kind::MirroredHinge { t, .. } => {
                norm::dot(mu, t)
                    + (0..mu.len())
                        .map(|j| (self.rho[j] - t[j]) * mu[j].max(0.0))
                        .sum::<f64>()
            }
        }
    }

    /// A maximizer `a*(−μ) ∈ argmax_{a ≤ ρ} r(a) + μᵀa`.
    ///
    /// Hinge coordinates at the kink (`μ_j = c_j`, or `μ_j = 0` for the
    /// mirrored hinge) return the threshold `t_j`.
    pub fn argmax(&self, mu: &[f64]) -> Result<Vec<f64>> {
        self.check_len(mu.len(), "dual vector")?;
        if !self.contains(mu) {
            return Err(Error::OutsideDualSet);
        }
        Ok(match &self.kind {
            Kind::None | Kind::MaxMin { .. } | Kind::LoadBalancing { .. } => self.rho.clone(),
            Kind::Hinge { c, t } => (0..mu.len())
                .map(|j| if mu[j] <= c[j] { t[j] } else { self.rho[j] })
                .collect(),
            Kind::MirroredHinge { t, .. } => (0..mu.len())
                .map(|j| if mu[j] <= 0.0 { t[j] } else { self.rho[j] })
                .collect(),
        })
    }

    /// Membership `μ ∈ D` with absolute slack [`MEMBERSHIP_TOL`].
    pub fn contains(&self, mu: &[f64]) -> bool {
        self.contains_with_tol(mu, MEMBERSHIP_TOL)
    }

    pub fn contains_with_tol(&self, mu: &[f64], tol: f64) -> bool {
        if mu.len() != self.rho.len() || mu.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match &self.kind {
            Kind::None | Kind::Hinge { .. } => mu.iter().all(|&v| v >= -tol),
            Kind::MirroredHinge { c, .. } => mu.iter().zip(c).all(|(&v, &cj)| v >= -cj - tol),
            Kind::LoadBalancing { lambda } => {
                mu.iter().all(|&v| v >= -tol) && norm::dot(&self.rho, mu) >= lambda - tol
            }
            Kind::MaxMin { lambda } => min_subset_sum(&self.rho, mu) >= -lambda - tol,
        }
    }

    /// Regret-bound constants in the `‖·‖_{w,*}` geometry.
    ///
    /// `r_bar`/`r_underline` are the range of `r` over the box `[0, ρ]`.
    pub fn bounds(&self, w: &[f64]) -> RegularizerBounds {
        let a_bar = norm::dual_norm(&self.rho, w);
        let (lipschitz, r_bar, r_underline) = match &self.kind {
            Kind::None => (0.0, 0.0, 0.0),
            // |Δ min_j a_j/ρ_j| ≤ max_j |Δa_j|/ρ_j ≤ max_j (√w_j/ρ_j) ‖Δa‖_{w,*},
            // tight along the coordinate attaining the max.
            Kind::MaxMin { lambda } => (lambda * self.max_sqrt_w_over_rho(w), *lambda, 0.0),
            Kind::LoadBalancing { lambda } => (lambda * self.max_sqrt_w_over_rho(w), 0.0, -lambda),
            Kind::Hinge { c, t } => (
                norm::weighted_norm(c, w),
                0.0,
                -(0..c.len())
                    .map(|j| c[j] * (self.rho[j] - t[j]))
                    .sum::<f64>(),
            ),
            Kind::MirroredHinge { c, t } => (norm::weighted_norm(c, w), 0.0, -norm::dot(c, t)),
        };
        RegularizerBounds {
            a_bar,
            lipschitz,
            r_bar,
            r_underline,
        }
    }

    fn max_sqrt_w_over_rho(&self, w: &[f64]) -> f64 {
        w.iter()
            .zip(&self.rho)
            .map(|(wj, rj)| wj.sqrt() / rj)
            .fold(0.0, f64::max)
    }

    fn check_len(&self, found: usize, what: &str) -> Result<()> {
        if found == self.rho.len() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                what: what.into(),
                expected: self.rho.len(),
                found,
            })
        }
    }
}

/// `min_S Σ_{j∈S} ρ_j μ_j` over all subsets `S ⊆ [m]`. The minimizing subset
/// collects every negative term, i.e. it is the most negative prefix of the
/// ascending sort of `ρ ∘ μ`.
pub fn min_subset_sum(rho: &[f64], mu: &[f64]) -> f64 {
    rho.iter()
        .zip(mu)
        .map(|(r, m)| r * m)
        .filter(|v| *v < 0.0)
        .sum()
}
