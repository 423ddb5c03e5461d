mod common;

use bp_centralization::tullock::{
    gamma_profile, kkt_residual, max_share_bound, perturb_multiplier, solve_equilibrium, worst_case_instance,
    CompetitivenessProfile, MultiplierProfile,
};
use proptest::prelude::*;

fn multipliers(max_n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![1 => Just(0.0), 9 => 0.01f64..100.0], 2..=max_n)
        .prop_filter("some producer must be positive", |mu| mu.iter().any(|&m| m > 0.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn solution_satisfies_kkt(mu in multipliers(12), r in 0.1f64..10.0, c in 0.1f64..10.0) {
        let p = MultiplierProfile::relaxed(mu, r, c).unwrap();
        let a = solve_equilibrium(&p).unwrap();
        let scale = p.mu().iter().cloned().fold(0.0, f64::max) * r / c;
        prop_assert!(kkt_residual(&p, &a) <= 1e-12 * scale.max(1.0));
        prop_assert!(a.x.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn no_grid_point_beats_solver(mu in prop::collection::vec(0.05f64..20.0, 2..=3)) {
        let p = MultiplierProfile::relaxed(mu.clone(), 1.0, 1.0).unwrap();
        let a = solve_equilibrium(&p).unwrap();
        let solver = common::potential(&mu, &a.x);
        prop_assert!(common::simplex_grid_max(&mu, 200) <= solver + 1e-12 * solver);
    }

    #[test]
    fn stakes_are_best_responses(mu in multipliers(8), delta in 0.001f64..0.5) {
        // A lone positive producer has no interior equilibrium (its stake tends to 0).
        prop_assume!(mu.iter().filter(|&&m| m > 0.0).count() >= 2);
        let p = MultiplierProfile::relaxed(mu, 1.0, 1.0).unwrap();
        let a = solve_equilibrium(&p).unwrap();
        for i in 0..p.n() {
            let others = a.total_stake - a.pi[i];
            let at_eq = p.utility(i, a.pi[i], others);
            let tol = 1e-12 * p.mu()[i].max(1.0);
            prop_assert!(p.utility(i, 0.0, others) <= at_eq + tol);
            prop_assert!(p.utility(i, a.pi[i] * (1.0 + delta), others) <= at_eq + tol);
            prop_assert!(p.utility(i, a.pi[i] * (1.0 - delta), others) <= at_eq + tol);
            prop_assert!(p.utility(i, a.pi[i] + delta, others) <= at_eq + tol);
        }
    }

    #[test]
    fn raising_one_multiplier_never_raises_another_share(
        mu in multipliers(10),
        pick in any::<prop::sample::Index>(),
        bump in 0.0f64..50.0,
    ) {
        let p = MultiplierProfile::relaxed(mu.clone(), 1.0, 1.0).unwrap();
        let j = pick.index(mu.len());
        let (before, after) = perturb_multiplier(&p, j, mu[j] + bump).unwrap();
        prop_assert!(after.x[j] >= before.x[j] - 1e-12);
        for i in (0..mu.len()).filter(|&i| i != j) {
            prop_assert!(after.x[i] <= before.x[i] + 1e-12);
        }
    }

    #[test]
    fn shares_are_scale_invariant(mu in multipliers(8), s in 0.01f64..100.0, r in 0.1f64..10.0) {
        let base = solve_equilibrium(&MultiplierProfile::relaxed(mu.clone(), 1.0, 1.0).unwrap()).unwrap();
        let scaled = MultiplierProfile::relaxed(mu.iter().map(|m| m * s).collect(), r, 1.0).unwrap();
        let scaled = solve_equilibrium(&scaled).unwrap();
        for (a, b) in base.x.iter().zip(&scaled.x) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        prop_assert!((scaled.total_stake - s * r * base.total_stake).abs() <= 1e-10 * scaled.total_stake.max(1.0));
    }

    #[test]
    fn largest_share_respects_every_competitiveness_bound(mu in prop::collection::vec(0.01f64..100.0, 2..=10)) {
        let p = MultiplierProfile::relaxed(mu, 1.0, 1.0).unwrap();
        let a = solve_equilibrium(&p).unwrap();
        let g = gamma_profile(&p).unwrap();
        for &(gamma, k) in &g.pairs {
            let cp = CompetitivenessProfile::new(gamma, k).unwrap();
            prop_assert!(a.max_share() <= max_share_bound(cp) + 1e-12);
        }
        prop_assert!(a.max_share() <= g.best_bound + 1e-12);
    }
}

#[test]
fn worst_case_attains_the_bound() {
    for gamma in [0.01, 0.1, 0.3, 0.5, 0.9, 1.0] {
        for k in [1, 2, 3, 7, 20, 100] {
            let cp = CompetitivenessProfile::new(gamma, k).unwrap();
            let a = solve_equilibrium(&worst_case_instance(cp).unwrap()).unwrap();
            assert!((a.x[0] - max_share_bound(cp)).abs() <= 1e-12, "gamma {gamma}, k {k}");
        }
    }
}

#[test]
fn two_producer_closed_form() {
    // λ = 1 / (1/a1 + 1/a2), x1 = a1 / (a1 + a2).
    for (a1, a2) in [(2.0, 1.0), (10.0, 3.0), (1.0, 1.0)] {
        let a = solve_equilibrium(&MultiplierProfile::relaxed(vec![a1, a2], 1.0, 1.0).unwrap()).unwrap();
        assert!((a.x[0] - a1 / (a1 + a2)).abs() <= 1e-15);
        assert!((a.total_stake - a1 * a2 / (a1 + a2)).abs() <= 1e-15);
    }
}

#[test]
fn weak_producers_drop_out() {
    // With a = (10, 10, 1): two-producer λ = 5 >= 1, so the third stakes nothing.
    let a = solve_equilibrium(&MultiplierProfile::relaxed(vec![10.0, 10.0, 1.0], 1.0, 1.0).unwrap()).unwrap();
    assert_eq!(a.x, vec![0.5, 0.5, 0.0]);
    assert_eq!(a.pi[2], 0.0);
}
