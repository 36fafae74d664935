//! Brute-force reference implementations used to cross-check the fast
//! paths. Nothing here is used by the solver itself.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::domain::{Instance, Request};
use crate::error::{Error, Result};
use crate::norm;
use crate::regularizer::{min_subset_sum, Kind, Regularizer, Variant};

/// Linear description `G μ ≥ h` of the dual feasible set, one row per
/// constraint. The max-min set lists every nonempty subset.
pub fn dual_constraints(reg: &Regularizer) -> (Vec<Vec<f64>>, Vec<f64>) {
    let m = reg.num_resources();
    let rho = reg.rho();
    let unit = |j: usize| {
        let mut row = vec![0.0; m];
        row[j] = 1.0;
        row
    };
    match reg.kind() {
        Kind::None | Kind::Hinge { .. } => ((0..m).map(unit).collect(), vec![0.0; m]),
        Kind::MirroredHinge { c, .. } => {
            ((0..m).map(unit).collect(), c.iter().map(|v| -v).collect())
        }
        Kind::LoadBalancing { lambda } => {
            let mut rows: Vec<Vec<f64>> = (0..m).map(unit).collect();
            let mut rhs = vec![0.0; m];
            rows.push(rho.to_vec());
            rhs.push(*lambda);
            (rows, rhs)
        }
        Kind::MaxMin { lambda } => {
            let mut rows = Vec::new();
            for mask in 1u32..(1 << m) {
                rows.push(
                    (0..m)
                        .map(|j| if mask >> j & 1 == 1 { rho[j] } else { 0.0 })
                        .collect(),
                );
            }
            let n = rows.len();
            (rows, vec![-lambda; n])
        }
    }
}

/// Exact `‖·‖_w` projection by active-set enumeration.
///
/// For every set of at most `m` linearly independent constraints, solves the
/// equality-constrained weighted least-squares problem in closed form
/// `μ = μ̃ + W⁻¹Gᵀν` and keeps the primal-feasible, dual-feasible candidate
/// of smallest objective.
pub fn oracle_projection(mu_tilde: &[f64], reg: &Regularizer, w: &[f64]) -> Result<Vec<f64>> {
    let m = mu_tilde.len();
    let (rows, rhs) = dual_constraints(reg);
    let n = rows.len();
    let scale = 1.0 + mu_tilde.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let feas_tol = 1e-10 * scale;

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut consider = |active: &[usize]| {
        let Some((mu, nu)) = solve_equality_projection(mu_tilde, w, &rows, &rhs, active) else {
            return;
        };
        if nu.iter().any(|&v| v < -1e-9 * scale) {
            return;
        }
        let feasible = rows
            .iter()
            .zip(&rhs)
            .all(|(row, h)| norm::dot(row, &mu) >= h - feas_tol);
        if !feasible {
            return;
        }
        let obj = 0.5 * norm::weighted_distance(&mu, mu_tilde, w).powi(2);
        if best.as_ref().is_none_or(|(b, _)| obj < *b) {
            best = Some((obj, mu));
        }
    };
    for k in 0..=m.min(n) {
        for_each_combination(n, k, &mut consider);
    }
    best.map(|(_, mu)| mu)
        .ok_or_else(|| Error::Oracle("no feasible active set".into()))
}

fn solve_equality_projection(
    mu_tilde: &[f64],
    w: &[f64],
    rows: &[Vec<f64>],
    rhs: &[f64],
    active: &[usize],
) -> Option<(Vec<f64>, Vec<f64>)> {
    let m = mu_tilde.len();
    let k = active.len();
    if k == 0 {
        return Some((mu_tilde.to_vec(), Vec::new()));
    }
    let g = DMatrix::from_fn(k, m, |i, j| rows[active[i]][j]);
    let sv = g.clone().svd(false, false).singular_values;
    let (smax, smin) = (sv.max(), sv.min());
    if smin <= 1e-9 * smax {
        return None;
    }
    let winv = DMatrix::from_fn(m, m, |i, j| if i == j { 1.0 / w[i] } else { 0.0 });
    let gram = &g * &winv * g.transpose();
    let mt = DVector::from_column_slice(mu_tilde);
    let resid = DVector::from_fn(k, |i, _| rhs[active[i]]) - &g * &mt;
    let nu = gram.lu().solve(&resid)?;
    let mu = mt + winv * g.transpose() * &nu;
    Some((mu.iter().copied().collect(), nu.iter().copied().collect()))
}

fn for_each_combination(n: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(start: usize, n: usize, k: usize, buf: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if buf.len() == k {
            f(buf);
            return;
        }
        for i in start..n {
            if n - i < k - buf.len() {
                break;
            }
            buf.push(i);
            rec(i + 1, n, k, buf, f);
            buf.pop();
        }
    }
    rec(0, n, k, &mut Vec::with_capacity(k), f);
}

/// Membership in `D` by checking every constraint of [`dual_constraints`]
/// (all `2^m − 1` subsets for max-min fairness).
pub fn exhaustive_membership(reg: &Regularizer, mu: &[f64], tol: f64) -> bool {
    let (rows, rhs) = dual_constraints(reg);
    rows.iter()
        .zip(&rhs)
        .all(|(row, h)| norm::dot(row, mu) >= h - tol)
}

/// `max r(a) + μᵀa` over the grid `a_j = ρ_j · i · step`, `i = 0..=1/step`.
///
/// The separable variants are maximized coordinate by coordinate. For the
/// min/max variants the grid is swept by the level `k` of the extreme
/// coordinate: every other coordinate ranges over the grid points on the
/// allowed side of `k`, which reproduces the exact product-grid maximum.
pub fn grid_conjugate(reg: &Regularizer, mu: &[f64], step: f64) -> f64 {
    let n = (1.0 / step).round() as usize;
    let rho = reg.rho();
    let m = mu.len();
    let level = |i: usize| i as f64 / n as f64;
    match reg.kind() {
        Kind::None | Kind::Hinge { .. } | Kind::MirroredHinge { .. } => (0..m)
            .map(|j| {
                (0..=n)
                    .map(|i| {
                        let aj = rho[j] * level(i);
                        coordinate_value(reg, j, aj) + mu[j] * aj
                    })
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .sum(),
        Kind::MaxMin { lambda } => (0..=n)
            .map(|k| {
                // min coordinate at level k, others in [k, n]
                lambda * level(k)
                    + (0..m)
                        .map(|j| {
                            (k..=n)
                                .map(|i| mu[j] * rho[j] * level(i))
                                .fold(f64::NEG_INFINITY, f64::max)
                        })
                        .sum::<f64>()
            })
            .fold(f64::NEG_INFINITY, f64::max),
        Kind::LoadBalancing { lambda } => (0..=n)
            .map(|k| {
                // max coordinate at level k, others in [0, k]
                -lambda * level(k)
                    + (0..m)
                        .map(|j| {
                            (0..=k)
                                .map(|i| mu[j] * rho[j] * level(i))
                                .fold(f64::NEG_INFINITY, f64::max)
                        })
                        .sum::<f64>()
            })
            .fold(f64::NEG_INFINITY, f64::max),
    }
}

fn coordinate_value(reg: &Regularizer, j: usize, aj: f64) -> f64 {
    match reg.kind() {
        Kind::Hinge { c, t } => -c[j] * (aj - t[j]).max(0.0),
        Kind::MirroredHinge { c, t } => -c[j] * (t[j] - aj).max(0.0),
        _ => 0.0,
    }
}

/// Plain enumeration of the full product grid; only for tiny grids.
pub fn grid_conjugate_naive(reg: &Regularizer, mu: &[f64], step: f64) -> f64 {
    let n = (1.0 / step).round() as usize;
    let rho = reg.rho();
    let m = mu.len();
    let mut idx = vec![0usize; m];
    let mut best = f64::NEG_INFINITY;
    loop {
        let a: Vec<f64> = (0..m).map(|j| rho[j] * idx[j] as f64 / n as f64).collect();
        best = best.max(reg.value_unchecked(&a) + norm::dot(mu, &a));
        let mut j = 0;
        while j < m && idx[j] == n {
            idx[j] = 0;
            j += 1;
        }
        if j == m {
            return best;
        }
        idx[j] += 1;
    }
}

/// Random regularizer of the given variant on budget rate `rho`.
pub fn random_regularizer(variant: Variant, rho: &[f64], rng: &mut impl Rng) -> Regularizer {
    let m = rho.len();
    let lambda = rng.random_range(0.05..2.0);
    let c: Vec<f64> = (0..m).map(|_| rng.random_range(0.1..2.0)).collect();
    let t: Vec<f64> = rho.iter().map(|r| r * rng.random_range(0.0..1.0)).collect();
    let rho = rho.to_vec();
    match variant {
        Variant::None => Regularizer::none(rho),
        Variant::MaxMin => Regularizer::max_min(rho, lambda).expect("valid max-min"),
        Variant::LoadBalancing => {
            Regularizer::load_balancing(rho, lambda).expect("valid load balancing")
        }
        Variant::Hinge => Regularizer::hinge(rho, c, t).expect("valid hinge"),
        Variant::MirroredHinge => {
            Regularizer::mirrored_hinge(rho, c, t).expect("valid mirrored hinge")
        }
    }
}

pub fn random_rho(m: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..m).map(|_| rng.random_range(0.1..1.0)).collect()
}

/// Random point of `D`, built from the constraint description rather than a
/// projection. About a fifth of the points sit on the boundary.
pub fn random_dual_point(reg: &Regularizer, rng: &mut impl Rng) -> Vec<f64> {
    let m = reg.num_resources();
    let rho = reg.rho();
    let on_boundary = rng.random_bool(0.2);
    match reg.kind() {
        Kind::None | Kind::Hinge { .. } | Kind::MirroredHinge { .. } => {
            let lower: Vec<f64> = match reg.kind() {
                Kind::MirroredHinge { c, .. } => c.iter().map(|v| -v).collect(),
                _ => vec![0.0; m],
            };
            (0..m)
                .map(|j| {
                    if on_boundary && rng.random_bool(0.5) {
                        lower[j]
                    } else if let (Kind::Hinge { c, .. }, true) = (reg.kind(), rng.random_bool(0.1))
                    {
                        c[j]
                    } else {
                        lower[j] + rng.random_range(0.0..3.0)
                    }
                })
                .collect()
        }
        Kind::LoadBalancing { lambda } => {
            let mut mu: Vec<f64> = (0..m)
                .map(|_| {
                    if rng.random_bool(0.3) {
                        0.0
                    } else {
                        rng.random_range(0.0..3.0)
                    }
                })
                .collect();
            let s = norm::dot(rho, &mu);
            if s <= 0.0 {
                mu = vec![0.0; m];
                mu[rng.random_range(0..m)] = 1.0;
            }
            let s = norm::dot(rho, &mu);
            let target = if on_boundary {
                *lambda
            } else {
                s.max(lambda * rng.random_range(1.0..3.0))
            };
            if on_boundary || s < *lambda {
                mu.iter_mut().for_each(|v| *v *= target / s);
            }
            mu
        }
        Kind::MaxMin { lambda } => {
            let mut mu: Vec<f64> = (0..m).map(|_| rng.random_range(-3.0..2.0)).collect();
            let neg = min_subset_sum(rho, &mu);
            if neg < 0.0 {
                let target = if on_boundary {
                    *lambda
                } else {
                    lambda * rng.random_range(0.0..1.0)
                };
                let scale = target / -neg;
                if scale < 1.0 || on_boundary {
                    mu.iter_mut()
                        .filter(|v| **v < 0.0)
                        .for_each(|v| *v *= scale);
                }
            }
            mu
        }
    }
}

/// Point strictly outside `D`.
pub fn random_infeasible_point(reg: &Regularizer, rng: &mut impl Rng) -> Vec<f64> {
    let m = reg.num_resources();
    let rho = reg.rho();
    let excess = rng.random_range(1e-3..1.0);
    let mut mu = random_dual_point(reg, rng);
    match reg.kind() {
        Kind::None | Kind::Hinge { .. } => mu[rng.random_range(0..m)] = -excess,
        Kind::MirroredHinge { c, .. } => {
            let j = rng.random_range(0..m);
            mu[j] = -c[j] - excess;
        }
        Kind::LoadBalancing { lambda } => {
            if rng.random_bool(0.5) {
                mu[rng.random_range(0..m)] = -excess;
            } else {
                let s = norm::dot(rho, &mu);
                let scale = (lambda - excess.min(lambda * 0.99)) / s;
                mu.iter_mut().for_each(|v| *v *= scale);
            }
        }
        Kind::MaxMin { lambda } => {
            let j = rng.random_range(0..m);
            let others = min_subset_sum(rho, &mu) - (rho[j] * mu[j]).min(0.0);
            mu[j] = (-lambda - others - excess) / rho[j];
        }
    }
    mu
}

/// Direction `d ≤ 0` along which `r(ρ + k d) + μᵀ(ρ + k d)` grows without
/// bound when `μ ∉ D`.
pub fn recession_direction(reg: &Regularizer, mu: &[f64]) -> Option<Vec<f64>> {
    let m = mu.len();
    let rho = reg.rho();
    let unit = |j: usize| {
        let mut d = vec![0.0; m];
        d[j] = -1.0;
        d
    };
    match reg.kind() {
        Kind::None | Kind::Hinge { .. } => (0..m).find(|&j| mu[j] < 0.0).map(unit),
        Kind::MirroredHinge { c, .. } => (0..m).find(|&j| mu[j] < -c[j]).map(unit),
        Kind::LoadBalancing { lambda } => match (0..m).find(|&j| mu[j] < 0.0) {
            Some(j) => Some(unit(j)),
            None if norm::dot(rho, mu) < *lambda => Some(rho.iter().map(|r| -r).collect()),
            None => None,
        },
        Kind::MaxMin { lambda } => (min_subset_sum(rho, mu) < -lambda).then(|| {
            (0..m)
                .map(|j| if mu[j] < 0.0 { -rho[j] } else { 0.0 })
                .collect()
        }),
    }
}

/// Random instance with uniform rewards in `[0, 1)`, uniform costs in
/// `[0, 1)` and budget rates in `[0.2, 1)`.
pub fn random_tiny_instance(rng: &mut impl Rng, horizon: usize, m: usize, d: usize) -> Instance {
    let rho: Vec<f64> = (0..m).map(|_| rng.random_range(0.2..1.0)).collect();
    let requests = (0..horizon)
        .map(|_| {
            let q = (0..d).map(|_| rng.random_range(0.0..1.0)).collect();
            let b = (0..m)
                .map(|_| (0..d).map(|_| rng.random_range(0.0..1.0)).collect())
                .collect();
            Request::new(q, b)
        })
        .collect();
    Instance::new(rho, requests).expect("valid random instance")
}
