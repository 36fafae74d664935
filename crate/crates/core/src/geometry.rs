//! Weighted projections onto the dual feasible sets and the composite
//! descent step
//!
//! ```text
//! μ⁺ = argmin_{μ ∈ D} ⟨g, μ⟩ + ‖μ − μ_t‖²_w / (2η)
//!    = P_w(μ_t − η g / w)
//! ```
//!
//! where `P_w` is the `‖·‖_w` projection onto `D`. Box sets are separable, so
//! the projection is a clamp whatever the weights. The load-balancing set
//! `{μ ≥ 0, ρᵀμ ≥ λ}` is solved exactly via its one-dimensional multiplier.
//! The max-min fairness set has one constraint per subset of resources; with
//! `w = ρ²` the projection keeps the ordering of `ρ ∘ μ̃`, so only the `m`
//! prefix constraints of that ordering matter and the problem collapses to an
//! antitonic (pool-adjacent-violators) fit.

use crate::error::{Error, Result};
use crate::norm;
use crate::regularizer::{DualGeometry, Regularizer};

/// Relative tolerance when checking that weights equal `ρ²`.
const WEIGHT_MATCH_RTOL: f64 = 1e-12;

/// `w_j = ρ_j²`, the weights under which the max-min projection is tractable.
pub fn rho_squared(rho: &[f64]) -> Vec<f64> {
    rho.iter().map(|r| r * r).collect()
}

/// Weights, step-size and regularizer of one dual update.
#[derive(Clone, Debug)]
pub struct DescentContext {
    reg: Regularizer,
    w: Vec<f64>,
    eta: f64,
}

impl DescentContext {
    pub fn new(reg: Regularizer, w: Vec<f64>, eta: f64) -> Result<Self> {
        norm::check_weights(&w, reg.num_resources())?;
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::InvalidStepSize(eta));
        }
        if let DualGeometry::SubsetSums { .. } = reg.geometry() {
            check_rho_squared(reg.rho(), &w)?;
        }
        Ok(Self { reg, w, eta })
    }

    pub fn regularizer(&self) -> &Regularizer {
        &self.reg
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Same context with a different step-size.
    pub fn with_eta(&self, eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::InvalidStepSize(eta));
        }
        Ok(Self {
            eta,
            ..self.clone()
        })
    }

    /// `‖·‖_w` projection of `mu_tilde` onto the dual feasible set.
    pub fn project(&self, mu_tilde: &[f64]) -> Vec<f64> {
        match self.reg.geometry() {
            DualGeometry::Box { lower } => project_clamp(mu_tilde, &lower),
            DualGeometry::HalfspaceOrthant { lambda } => {
                project_halfspace_orthant(mu_tilde, self.reg.rho(), lambda, &self.w)
            }
            DualGeometry::SubsetSums { lambda } => {
                project_prefix_qp(mu_tilde, self.reg.rho(), lambda)
            }
        }
    }

    /// One descent step from `mu` along the subgradient `g`.
    pub fn step(&self, mu: &[f64], g: &[f64]) -> Result<Vec<f64>> {
        descent_step(self, mu, g)
    }
}

fn check_rho_squared(rho: &[f64], w: &[f64]) -> Result<()> {
    for (j, (r, wj)) in rho.iter().zip(w).enumerate() {
        let target = r * r;
        if (wj - target).abs() > WEIGHT_MATCH_RTOL * target {
            return Err(Error::WeightMismatch { j });
        }
    }
    Ok(())
}

/// `argmin_{μ ∈ D} ⟨g, μ⟩ + ‖μ − μ_t‖²_w / (2η)`.
pub fn descent_step(ctx: &DescentContext, mu: &[f64], g: &[f64]) -> Result<Vec<f64>> {
    let m = ctx.w.len();
    for (what, v) in [("dual vector", mu), ("subgradient", g)] {
        if v.len() != m {
            return Err(Error::DimensionMismatch {
                what: what.into(),
                expected: m,
                found: v.len(),
            });
        }
    }
    if !ctx.reg.contains(mu) {
        return Err(Error::OutsideDualSet);
    }
    let mu_tilde: Vec<f64> = (0..m).map(|j| mu[j] - ctx.eta * g[j] / ctx.w[j]).collect();
    Ok(ctx.project(&mu_tilde))
}

/// Projection onto `{μ ≥ lower}`: componentwise `max(μ̃_j, lower_j)`.
pub fn project_clamp(mu_tilde: &[f64], lower: &[f64]) -> Vec<f64> {
    mu_tilde.iter().zip(lower).map(|(m, l)| m.max(*l)).collect()
}

/// `‖·‖_w` projection onto `{μ ≥ 0, ρᵀμ ≥ λ}`.
///
/// The solution is `μ_j(ν) = max(μ̃_j + ν ρ_j / w_j, 0)` for the smallest
/// `ν ≥ 0` with `ρᵀμ(ν) ≥ λ`. `ρᵀμ(ν)` is piecewise linear with breakpoints
/// `−μ̃_j w_j / ρ_j`, so `ν` is found exactly on the right segment.
pub fn project_halfspace_orthant(
    mu_tilde: &[f64],
    rho: &[f64],
    lambda: f64,
    w: &[f64],
) -> Vec<f64> {
    let clamped = project_clamp(mu_tilde, &vec![0.0; mu_tilde.len()]);
    if norm::dot(rho, &clamped) >= lambda {
        return clamped;
    }
    let mut breakpoints: Vec<(f64, usize)> = (0..mu_tilde.len())
        .map(|j| (-mu_tilde[j] * w[j] / rho[j], j))
        .collect();
    breakpoints.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    // h(ν) = offset + ν·slope on the current segment.
    let mut offset = 0.0;
    let mut slope = 0.0;
    let mut nu = None;
    for &(bp, j) in &breakpoints {
        if bp > 0.0 && slope > 0.0 {
            let candidate = (lambda - offset) / slope;
            if candidate <= bp {
                nu = Some(candidate);
                break;
            }
        }
        offset += rho[j] * mu_tilde[j];
        slope += rho[j] * rho[j] / w[j];
    }
    let nu = nu.unwrap_or_else(|| (lambda - offset) / slope);
    (0..mu_tilde.len())
        .map(|j| (mu_tilde[j] + nu * rho[j] / w[j]).max(0.0))
        .collect()
}

/// `‖·‖_{ρ²}` projection onto `{μ : Σ_{j∈S} ρ_j μ_j ≥ −λ ∀S ⊆ [m]}`.
///
/// In `y = ρ ∘ μ` the objective is `½‖y − ỹ‖²`. Sorting `ỹ` ascending, only
/// the prefix constraints `Y_s = Σ_{i≤s} y_(i) ≥ −λ` remain. Writing
/// `y_(i) = ỹ_(i) + δ_i`, the shifts satisfy `Σ_{i≤s} δ_i ≥ L_s := −λ − P_s`
/// (`P_s` the prefix sums of `ỹ`) and KKT forces `δ` nonincreasing and
/// nonnegative. The optimal cumulative shift is therefore the least concave
/// majorant of `(0,0), (s, L_s)` up to the largest `L_s`, flat afterwards.
/// Its slopes are computed by pooling adjacent violators of the increments
/// `L_s − L_{s−1}`.
pub fn project_prefix_qp(mu_tilde: &[f64], rho: &[f64], lambda: f64) -> Vec<f64> {
    let m = mu_tilde.len();
    let y_tilde: Vec<f64> = (0..m).map(|j| rho[j] * mu_tilde[j]).collect();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| y_tilde[a].total_cmp(&y_tilde[b]).then(a.cmp(&b)));

    // Barrier L_s for s = 1..m and the first index attaining its maximum.
    let mut barrier = Vec::with_capacity(m);
    let mut prefix = 0.0;
    for &j in &order {
        prefix += y_tilde[j];
        barrier.push(-lambda - prefix);
    }
    let (peak, peak_value) =
        barrier
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (s, v)| {
                if v > best.1 {
                    (s, v)
                } else {
                    best
                }
            });
    if peak_value <= 0.0 {
        return mu_tilde.to_vec();
    }

    let shifts = antitonic_increments(&barrier[..=peak]);
    let mut mu = mu_tilde.to_vec();
    for (pos, &j) in order.iter().enumerate() {
        let delta = shifts.get(pos).copied().unwrap_or(0.0);
        mu[j] = (y_tilde[j] + delta) / rho[j];
    }
    mu
}

/// Slopes of the least concave majorant through the origin of the points
/// `(s, cumulative[s−1])`, returned per unit step.
fn antitonic_increments(cumulative: &[f64]) -> Vec<f64> {
    // Each block stores (length, total rise); means must strictly decrease.
    let mut blocks: Vec<(usize, f64)> = Vec::with_capacity(cumulative.len());
    let mut previous = 0.0;
    for &value in cumulative {
        let mut block = (1usize, value - previous);
        previous = value;
        while let Some(&(len, rise)) = blocks.last() {
            if rise / len as f64 <= block.1 / block.0 as f64 {
                blocks.pop();
                block = (block.0 + len, block.1 + rise);
            } else {
                break;
            }
        }
        blocks.push(block);
    }
    blocks
        .into_iter()
        .flat_map(|(len, rise)| std::iter::repeat_n(rise / len as f64, len))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn clamp_examples() {
        assert_eq!(project_clamp(&[-0.5, 0.3], &[0.0, 0.0]), vec![0.0, 0.3]);
        assert_eq!(project_clamp(&[-2.0], &[-1.0]), vec![-1.0]);
        assert_eq!(project_clamp(&[0.2, 5.0], &[0.0, 0.0]), vec![0.2, 5.0]);
    }

    #[test]
    fn halfspace_examples() {
        let p = project_halfspace_orthant(&[0.0, 0.0], &[1.0, 1.0], 1.0, &[1.0, 1.0]);
        assert_close(&p, &[0.5, 0.5], 1e-15);
        let p = project_halfspace_orthant(&[2.0, 2.0], &[1.0, 1.0], 1.0, &[1.0, 1.0]);
        assert_eq!(p, vec![2.0, 2.0]);
    }

    #[test]
    fn halfspace_with_negative_coordinate_left_at_zero() {
        // μ̃ = (−5, 0): only the second coordinate moves up to meet ρᵀμ = 1.
        let p = project_halfspace_orthant(&[-5.0, 0.0], &[1.0, 1.0], 1.0, &[1.0, 1.0]);
        assert_close(&p, &[0.0, 1.0], 1e-15);
    }

    #[test]
    fn prefix_qp_example() {
        let p = project_prefix_qp(&[-2.0, 0.0], &[1.0, 1.0], 1.0);
        assert_close(&p, &[-1.0, 0.0], 1e-15);
    }

    #[test]
    fn prefix_qp_identity_on_feasible_point() {
        let mu = [-0.3, 0.4, -0.2];
        assert_eq!(project_prefix_qp(&mu, &[1.0, 2.0, 0.5], 1.0), mu.to_vec());
    }

    #[test]
    fn prefix_qp_pools_two_violators() {
        // ỹ = (−5, −4.9), λ = 1: single pooled block with shift 4.45.
        let p = project_prefix_qp(&[-5.0, -4.9], &[1.0, 1.0], 1.0);
        assert_close(&p, &[-0.55, -0.45], 1e-12);
    }

    #[test]
    fn descent_step_examples() {
        let none = Regularizer::none(vec![1.0, 1.0]);
        let ctx = DescentContext::new(none, vec![1.0, 1.0], 1.0).unwrap();
        assert_eq!(ctx.step(&[1.0, 1.0], &[2.0, 0.0]).unwrap(), vec![0.0, 1.0]);

        let mm = Regularizer::max_min(vec![1.0, 1.0], 1.0).unwrap();
        let ctx = DescentContext::new(mm, vec![1.0, 1.0], 1.0).unwrap();
        assert_close(
            &ctx.step(&[0.0, 0.0], &[2.0, 0.0]).unwrap(),
            &[-1.0, 0.0],
            1e-15,
        );
    }

    #[test]
    fn zero_subgradient_is_identity() {
        let rho = vec![0.5, 1.0, 2.0];
        let w = rho_squared(&rho);
        let regs = [
            Regularizer::none(rho.clone()),
            Regularizer::max_min(rho.clone(), 0.7).unwrap(),
            Regularizer::load_balancing(rho.clone(), 0.7).unwrap(),
            Regularizer::hinge(rho.clone(), vec![1.0; 3], vec![0.1, 0.2, 0.3]).unwrap(),
            Regularizer::mirrored_hinge(rho.clone(), vec![1.0; 3], vec![0.1, 0.2, 0.3]).unwrap(),
        ];
        let mu = [0.3, 0.2, 0.4];
        for reg in regs {
            let ctx = DescentContext::new(reg, w.clone(), 0.3).unwrap();
            assert_eq!(ctx.step(&mu, &[0.0; 3]).unwrap(), mu.to_vec());
        }
    }

    #[test]
    fn unit_weights_on_orthant_is_classical_projected_descent() {
        let ctx = DescentContext::new(Regularizer::none(vec![1.0; 3]), vec![1.0; 3], 0.25).unwrap();
        let mu = [0.5f64, 0.1, 2.0];
        let g = [1.0, 2.0, -4.0];
        let expected: Vec<f64> = (0..3).map(|j| (mu[j] - 0.25 * g[j]).max(0.0)).collect();
        assert_eq!(ctx.step(&mu, &g).unwrap(), expected);
    }

    #[test]
    fn max_min_requires_rho_squared_weights() {
        let mm = Regularizer::max_min(vec![0.5, 1.0], 1.0).unwrap();
        assert!(matches!(
            DescentContext::new(mm.clone(), vec![1.0, 1.0], 0.1),
            Err(Error::WeightMismatch { j: 0 })
        ));
        assert!(DescentContext::new(mm, vec![0.25, 1.0], 0.1).is_ok());
    }

    #[test]
    fn step_rejects_infeasible_start() {
        let ctx = DescentContext::new(Regularizer::none(vec![1.0]), vec![1.0], 1.0).unwrap();
        assert!(matches!(
            ctx.step(&[-1.0], &[0.0]),
            Err(Error::OutsideDualSet)
        ));
        assert!(DescentContext::new(Regularizer::none(vec![1.0]), vec![1.0], 0.0).is_err());
    }
}
