#![allow(dead_code)]

use dualalloc::{Instance, Regularizer, Request, Variant};
use proptest::prelude::*;

pub fn rho_strategy(min_m: usize, max_m: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.1f64..1.0, min_m..=max_m)
}

fn build(
    variant: Variant,
    rho: Vec<f64>,
    lambda: f64,
    c: Vec<f64>,
    t_frac: Vec<f64>,
) -> Regularizer {
    let m = rho.len();
    let c = c[..m].to_vec();
    let t: Vec<f64> = rho.iter().zip(&t_frac).map(|(r, f)| r * f).collect();
    match variant {
        Variant::None => Regularizer::none(rho),
        Variant::MaxMin => Regularizer::max_min(rho, lambda).unwrap(),
        Variant::LoadBalancing => Regularizer::load_balancing(rho, lambda).unwrap(),
        Variant::Hinge => Regularizer::hinge(rho, c, t).unwrap(),
        Variant::MirroredHinge => Regularizer::mirrored_hinge(rho, c, t).unwrap(),
    }
}

/// Regularizer of any variant with `min_m..=max_m` resources.
pub fn regularizer(min_m: usize, max_m: usize) -> impl Strategy<Value = Regularizer> {
    (0..5usize).prop_flat_map(move |v| regularizer_of(Variant::ALL[v], min_m, max_m))
}

pub fn regularizer_of(
    variant: Variant,
    min_m: usize,
    max_m: usize,
) -> impl Strategy<Value = Regularizer> {
    (
        rho_strategy(min_m, max_m),
        0.05f64..2.0,
        prop::collection::vec(0.1f64..2.0, max_m),
        prop::collection::vec(0.0f64..1.0, max_m),
    )
        .prop_map(move |(rho, lambda, c, t)| build(variant, rho, lambda, c, t))
}

/// Vector of length `m` with entries in `lo..hi`.
pub fn vector(m: usize, lo: f64, hi: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(lo..hi, m)
}

pub fn instance(horizon: usize, m: usize, d: usize) -> impl Strategy<Value = Instance> {
    (
        prop::collection::vec(0.2f64..1.0, m),
        prop::collection::vec(
            (
                vector(d, 0.0, 1.0),
                prop::collection::vec(vector(d, 0.0, 1.0), m),
            ),
            horizon,
        ),
    )
        .prop_map(|(rho, reqs)| {
            Instance::new(
                rho,
                reqs.into_iter().map(|(q, b)| Request::new(q, b)).collect(),
            )
            .unwrap()
        })
}

pub fn l1(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}
