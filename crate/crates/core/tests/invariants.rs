//! Properties of the relaxation and the equilibrium on random AR(1) games.

mod common;

use dynpricing::assumptions::check_regularity;
use dynpricing::equilibrium::solve_pbe_star;
use dynpricing::mechanism::{
    benchmark_two_period, boundary_curve, claim1_certify, solve_relaxed, virtual_values,
};
use proptest::prelude::*;

use common::{build, passes_assumptions, Instance};

const N: usize = 61;

fn arb_instance() -> impl Strategy<Value = Instance> {
    (0.05f64..0.95, 0.5f64..=1.0, 1.0f64..3.0, 0.15f64..0.5, 0.1f64..0.5)
        .prop_map(|(a, d, mu, s, e)| build(a, d, mu, s, e, N))
        .prop_filter("MLRP, Lipschitz and regularity", passes_assumptions)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn off_diagonal_gain_vanishes(inst in arb_instance()) {
        let x = inst.game.prior().points();
        let (lo, hi) = (x[0], x[x.len() - 1]);
        for s in 0..=10 {
            let k = lo + (hi - lo) * f64::from(s) / 10.0;
            let c = claim1_certify(&inst.game, k).unwrap();
            prop_assert!(c.gap <= 1e-9, "k {k}: gap {}", c.gap);
        }
    }

    #[test]
    fn relaxed_value_is_the_posting_benchmark(inst in arb_instance()) {
        let g = &inst.game;
        let r = solve_relaxed(g).unwrap();
        let b = benchmark_two_period(g).total;
        prop_assert!((r.value - b).abs() <= 2.0 * g.price_step(), "{} vs {b}", r.value);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn relaxation_bounds_equilibrium_revenue(inst in arb_instance()) {
        let g = &inst.game;
        let bound = solve_relaxed(g).unwrap().value + 2.0 * g.price_step();
        let e = solve_pbe_star(g).unwrap();
        prop_assert!(e.revenue <= bound, "{} > {bound}", e.revenue);
    }

    #[test]
    fn boundary_is_nonincreasing_under_regularity(inst in arb_instance()) {
        let g = &inst.game;
        let k = &g.kernels.reject;
        prop_assert!(check_regularity(g.prior(), k).unwrap().holds);
        let curve = boundary_curve(&virtual_values(g.prior(), k).unwrap()).unwrap();
        for w in curve.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12, "{} then {}", w[0], w[1]);
        }
    }
}
