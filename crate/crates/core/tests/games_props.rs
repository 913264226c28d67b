use moment_rep::games::{
    compare_solutions, moment_state_count, solve_mme, solve_mpe, solve_mpe_with, GameSpec,
    SolverOptions,
};
use proptest::prelude::*;

fn game() -> impl Strategy<Value = GameSpec> {
    (
        1usize..=4,
        1u32..=4,
        0.5f64..3.0,
        0.1f64..1.0,
        0.0f64..0.5,
        0.1f64..0.9,
        0.05f64..0.5,
        0.0f64..0.95,
        1.0f64..8.0,
    )
        .prop_map(|(firms, states, price_scale, quality_slope, invest_cost, success_prob, depreciation_prob, discount, choice_scale)| GameSpec {
            firms,
            states,
            price_scale,
            quality_slope,
            invest_cost,
            success_prob,
            depreciation_prob,
            discount,
            choice_scale,
        })
}

const TOL: f64 = 1e-9;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mme_at_full_degree_equals_mpe(g in game()) {
        let mpe = solve_mpe(&g, TOL, 50_000).unwrap();
        let k = g.firms.saturating_sub(1).max(1);
        let mme = solve_mme(&g, k, TOL, 50_000).unwrap();
        let cmp = compare_solutions(&mpe, &mme).unwrap();
        prop_assert!(cmp.value_gap <= 2.0 * TOL);
        prop_assert!(cmp.policy_gap <= 2.0 * TOL);
        prop_assert!(mpe.residual <= TOL);
        prop_assert!(mpe.policies.iter().all(|p| (0.0..=1.0).contains(p)));
    }

    #[test]
    fn moment_count_law(g in game()) {
        let k = g.firms.saturating_sub(1).max(1);
        prop_assert_eq!(moment_state_count(&g, k).unwrap(), g.competitor_multisets().unwrap());
        let mut prev = 0;
        for k in 1..g.firms.max(2) {
            let n = moment_state_count(&g, k).unwrap();
            prop_assert!(n >= prev);
            prev = n;
        }
    }

    #[test]
    fn initialization_does_not_matter(g in game(), p0 in 0.0f64..=1.0) {
        let a = solve_mpe(&g, TOL, 50_000).unwrap();
        let b = solve_mpe_with(&g, &SolverOptions { initial_policy: p0, max_iter: 50_000, ..SolverOptions::default() }).unwrap();
        let gap = a.values.iter().zip(&b.values).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        let scale = (1.0 - g.discount).max(1e-3);
        prop_assert!(gap <= 10.0 * TOL / scale, "gap {gap}");
    }

    #[test]
    fn contraction_rate(g in game().prop_filter("slow enough to measure", |g| g.discount >= 0.5)) {
        let sol = solve_mpe(&g, TOL, 50_000).unwrap();
        let t = &sol.residual_trace;
        prop_assume!(t.len() >= 12);
        let tail = &t[t.len() - 11..];
        let rate = (tail[10] / tail[0]).powf(0.1);
        prop_assert!(rate <= g.discount + 0.05, "rate {rate} beta {}", g.discount);
    }
}

#[test]
fn permuted_lookups_agree() {
    let g = GameSpec {
        firms: 4,
        states: 3,
        ..GameSpec::default()
    };
    let sol = solve_mpe(&g, TOL, 50_000).unwrap();
    assert_eq!(sol.value(2, &[3, 1, 2]).unwrap(), sol.value(2, &[1, 2, 3]).unwrap());
    assert_eq!(sol.policy(1, &[2, 2, 1]).unwrap(), sol.policy(1, &[1, 2, 2]).unwrap());
}
