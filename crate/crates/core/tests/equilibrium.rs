//! Cross-module properties of the solver, the matrix oracle and the game model.

use poisongame::{
    attacker_benefit_threshold, build_matrix, expected_payoff, find_percentage, solve,
    solve_matrix_game, uniform_grid, AttackPlan, PayoffCurve, SolveOptions,
};
use proptest::prelude::*;

/// Increasing `E` and non-increasing `Γ` on a shared uniform grid.
fn curves() -> impl Strategy<Value = (PayoffCurve, PayoffCurve)> {
    (3usize..10).prop_flat_map(|k| {
        (
            -4e-4..1e-3f64,
            prop::collection::vec(1e-5..6e-4f64, k - 1),
            0.01..0.3f64,
            prop::collection::vec(0.0..0.05f64, k - 1),
        )
            .prop_map(move |(e0, de, g0, dg)| {
                let grid = uniform_grid(k);
                let mut e = vec![e0];
                let mut g = vec![g0];
                for i in 0..k - 1 {
                    e.push(e[i] + de[i]);
                    g.push((g[i] - dg[i]).max(0.0));
                }
                let knots =
                    |v: Vec<f64>| PayoffCurve::new(grid.iter().copied().zip(v).collect()).unwrap();
                (knots(e), knots(g))
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn solved_mix_is_indifferent_and_unexploitable((e, g) in curves(), n in 2usize..6, budget in 10u32..1000) {
        prop_assume!(attacker_benefit_threshold(&e) < 0.9);
        let r = solve(&e, &g, n, budget, SolveOptions::default()).unwrap();
        let mix = &r.mix;
        let probs = mix.probs();
        prop_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(probs.iter().all(|&p| p >= 0.0));

        let e1 = e.eval(mix.min_radius());
        for x in mix.radii() {
            prop_assert!((e.eval(x) * mix.cdf(x) - e1).abs() <= 1e-9);
        }
        let n_f = budget as f64;
        for x in uniform_grid(200) {
            prop_assert!(n_f * e.eval(x) * mix.cdf(x) <= n_f * e1 + 1e-6);
        }
        // Stacking at the smallest radius realizes the reported loss.
        let plan = AttackPlan::single(mix.min_radius(), budget).unwrap();
        prop_assert!((expected_payoff(&plan, mix, &e, &g) - r.defender_loss).abs() <= 1e-9);
    }

    #[test]
    fn probabilities_follow_the_ratio_recurrence(e in prop::collection::vec(1e-4..1e-2f64, 2..6)) {
        let mut e = e;
        e.sort_by(f64::total_cmp);
        let grid = uniform_grid(e.len());
        let curve = PayoffCurve::new(grid.iter().copied().zip(e.iter().copied()).collect()).unwrap();
        let p = find_percentage(&grid, &curve).unwrap();
        let c: Vec<f64> = e.iter().map(|v| e[0] / v).collect();
        for i in 0..e.len() {
            let tail: f64 = p[i..].iter().sum();
            prop_assert!((tail - c[i]).abs() < 1e-12);
        }
    }
}

#[test]
fn fictitious_play_brackets_the_solver_on_two_step_curves() {
    // E doubles across one grid step at 0.5; the equilibrium needs two radii.
    let h = 1.0 / 199.0;
    let cut = 100.0 * h;
    let e = PayoffCurve::new(vec![
        (0.0, 0.001),
        (cut, 0.001),
        (cut + h, 0.002),
        (1.0, 0.002),
    ])
    .unwrap();
    let g = PayoffCurve::from_fn(&uniform_grid(200), |t| 0.1 * (1.0 - t).powi(2)).unwrap();
    let fp = solve_matrix_game(
        &build_matrix(&e, &g, 100, &uniform_grid(200)).unwrap(),
        100_000,
    )
    .unwrap();
    let r = solve(&e, &g, 2, 100, SolveOptions::default()).unwrap();
    assert!(fp.gap() / fp.midpoint() < 0.01, "gap {}", fp.gap());
    let rel = (r.defender_loss - fp.midpoint()).abs() / fp.midpoint();
    assert!(
        rel < 0.02,
        "solver {} vs [{}, {}]",
        r.defender_loss,
        fp.value_lower,
        fp.value_upper
    );
}
