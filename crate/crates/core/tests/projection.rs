mod common;

use common::{regularizer, regularizer_of, vector};
use dualalloc::geometry::{project_prefix_qp, rho_squared};
use dualalloc::norm::weighted_distance;
use dualalloc::oracle::{oracle_projection, random_dual_point};
use dualalloc::{DescentContext, DualGeometry, Regularizer, Variant};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Context with `w = ρ²` for the max-min set and the given weights otherwise.
fn context(reg: &Regularizer, w: &[f64]) -> DescentContext {
    let m = reg.num_resources();
    let w = match reg.geometry() {
        DualGeometry::SubsetSums { .. } => rho_squared(reg.rho()),
        _ => w[..m].to_vec(),
    };
    DescentContext::new(reg.clone(), w, 1.0).unwrap()
}

proptest! {
    #[test]
    fn projection_matches_active_set_oracle(
        reg in regularizer(1, 4),
        x in vector(4, -4.0, 3.0),
        w in vector(4, 0.1, 3.0),
    ) {
        let ctx = context(&reg, &w);
        let x = &x[..reg.num_resources()];
        let fast = ctx.project(x);
        let exact = oracle_projection(x, &reg, ctx.weights()).unwrap();
        prop_assert!(weighted_distance(&fast, &exact, ctx.weights()) <= 1e-8, "{:?} vs {:?}", fast, exact);
        prop_assert!(reg.contains(&fast));
    }

    #[test]
    fn projection_is_idempotent(reg in regularizer(1, 8), x in vector(8, -4.0, 3.0), w in vector(8, 0.1, 3.0)) {
        let ctx = context(&reg, &w);
        let p = ctx.project(&x[..reg.num_resources()]);
        let q = ctx.project(&p);
        prop_assert!(weighted_distance(&p, &q, ctx.weights()) <= 1e-12);
    }

    #[test]
    fn projection_is_nonexpansive(
        reg in regularizer(1, 8),
        x in vector(8, -4.0, 3.0),
        y in vector(8, -4.0, 3.0),
        w in vector(8, 0.1, 3.0),
    ) {
        let ctx = context(&reg, &w);
        let m = reg.num_resources();
        let (x, y) = (&x[..m], &y[..m]);
        let w = ctx.weights();
        prop_assert!(
            weighted_distance(&ctx.project(x), &ctx.project(y), w) <= weighted_distance(x, y, w) * (1.0 + 1e-12) + 1e-12
        );
    }

    #[test]
    fn feasible_points_are_fixed(reg in regularizer(1, 8), seed: u64, w in vector(8, 0.1, 3.0)) {
        let ctx = context(&reg, &w);
        let mu = random_dual_point(&reg, &mut ChaCha8Rng::seed_from_u64(seed));
        let p = ctx.project(&mu);
        prop_assert!(weighted_distance(&p, &mu, ctx.weights()) <= 1e-9);
    }

    #[test]
    fn prefix_projection_preserves_order(reg in regularizer_of(Variant::MaxMin, 1, 10), x in vector(10, -5.0, 3.0)) {
        let rho = reg.rho();
        let x = &x[..rho.len()];
        let DualGeometry::SubsetSums { lambda } = reg.geometry() else { unreachable!() };
        let p = project_prefix_qp(x, rho, lambda);
        for i in 0..rho.len() {
            for k in 0..rho.len() {
                if rho[i] * x[i] <= rho[k] * x[k] {
                    prop_assert!(rho[i] * p[i] <= rho[k] * p[k] + 1e-12);
                }
            }
        }
        prop_assert!(reg.contains(&p));
    }

    #[test]
    fn descent_step_stays_in_dual_set(reg in regularizer(1, 6), seed: u64, g in vector(6, -3.0, 3.0), eta in 0.001f64..5.0) {
        let w = rho_squared(reg.rho());
        let ctx = DescentContext::new(reg.clone(), w, eta).unwrap();
        let mu = random_dual_point(&reg, &mut ChaCha8Rng::seed_from_u64(seed));
        let next = ctx.step(&mu, &g[..reg.num_resources()]).unwrap();
        prop_assert!(reg.contains(&next));
    }
}

#[test]
fn prefix_qp_four_resources_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..500 {
        let rho: Vec<f64> = (0..4)
            .map(|_| rand::Rng::random_range(&mut rng, 0.1..1.0))
            .collect();
        let lambda = rand::Rng::random_range(&mut rng, 0.05..2.0);
        let x: Vec<f64> = (0..4)
            .map(|_| rand::Rng::random_range(&mut rng, -4.0..2.0))
            .collect();
        let reg = Regularizer::max_min(rho.clone(), lambda).unwrap();
        let fast = project_prefix_qp(&x, &rho, lambda);
        let exact = oracle_projection(&x, &reg, &rho_squared(&rho)).unwrap();
        assert!(
            weighted_distance(&fast, &exact, &rho_squared(&rho)) <= 1e-8,
            "{x:?}: {fast:?} vs {exact:?}"
        );
    }
}
