//! Property tests for the algebraic invariants: linearity, marginal
//! recovery, triangle inequalities, stochasticity preservation, and the
//! constructive stationary distribution.

use policy_dyn_core::game::{
    expected_utility, l1_distance, perturb_strategy, product_distribution, Game,
    JointDistribution, MixedStrategy, Player,
};
use policy_dyn_core::learners::{sample_action, round_rng, ReactiveUtility, WindowUtility};
use policy_dyn_core::markov::{
    deviation_stationary, empirical_chain, empirical_function_distribution,
    enumerate_function_pairs, induced_chain, FunctionPairDistribution,
};
use proptest::prelude::*;

fn simplex(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1e-4..1.0f64, len).prop_map(|w| {
        let s: f64 = w.iter().sum();
        w.into_iter().map(|v| v / s).collect()
    })
}

fn random_game() -> impl Strategy<Value = Game> {
    prop::collection::vec(0.0..=1.0f64, 8).prop_map(|u| {
        Game::new(
            vec!["a".into(), "b".into()],
            vec!["c".into(), "d".into()],
            vec![vec![u[0], u[1]], vec![u[2], u[3]]],
            vec![vec![u[4], u[5]], vec![u[6], u[7]]],
        )
        .unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn expected_utility_is_linear_in_sigma(
        game in random_game(),
        p in simplex(4),
        q in simplex(4),
        alpha in 0.0..=1.0f64,
    ) {
        let phi = JointDistribution::new(2, 2, p).unwrap();
        let psi = JointDistribution::new(2, 2, q).unwrap();
        let mix: Vec<f64> = phi
            .probs()
            .iter()
            .zip(psi.probs())
            .map(|(a, b)| alpha * a + (1.0 - alpha) * b)
            .collect();
        let mixed = JointDistribution::new(2, 2, mix).unwrap();
        for player in [Player::One, Player::Two] {
            let lhs = expected_utility(&mixed, &game, player).unwrap();
            let rhs = alpha * expected_utility(&phi, &game, player).unwrap()
                + (1.0 - alpha) * expected_utility(&psi, &game, player).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn product_marginals_recover_factors(p in simplex(3), q in simplex(2)) {
        let p1 = MixedStrategy::new(p).unwrap();
        let p2 = MixedStrategy::new(q).unwrap();
        let joint = product_distribution(&p1, &p2);
        for (a, b) in joint.marginal1().probs().iter().zip(p1.probs()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in joint.marginal2().probs().iter().zip(p2.probs()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn perturbation_floors_every_entry(p in simplex(4), eps in 0.0..0.06f64) {
        let strategy = MixedStrategy::new(p).unwrap();
        let out = perturb_strategy(&strategy, eps, 4).unwrap();
        let weight = (4.0 * eps).sqrt();
        let floor = weight / 4.0;
        for &v in out.probs() {
            prop_assert!(v >= floor - 1e-15);
        }
        let total: f64 = out.probs().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn l1_distance_satisfies_triangle_inequality(
        x in simplex(4),
        y in simplex(4),
        z in simplex(4),
    ) {
        let xy = l1_distance(&x, &y).unwrap();
        let yz = l1_distance(&y, &z).unwrap();
        let xz = l1_distance(&x, &z).unwrap();
        prop_assert!(xz <= xy + yz + 1e-14);
    }

    #[test]
    fn sampled_actions_respect_support(p in simplex(5), seed in any::<u64>(), round in 1..1000u64) {
        let strategy = MixedStrategy::new(p).unwrap();
        let mut rng = round_rng(seed, round);
        let a = sample_action(&strategy, &mut rng);
        prop_assert!(a < 5);
    }

    #[test]
    fn reactive_utility_range_is_three_valued(window in prop::collection::vec(0..2usize, 4)) {
        let rule = ReactiveUtility::new(4).unwrap();
        let v = rule.eval(&window).unwrap();
        prop_assert!(v == 0.0 || v == 0.5 || v == 1.0);
    }

    #[test]
    fn empirical_chain_rows_are_stochastic(
        seqs in prop::collection::vec(simplex(4), 2..20),
        lagged in any::<bool>(),
    ) {
        let strategies: Vec<JointDistribution> = seqs
            .into_iter()
            .map(|p| JointDistribution::new(2, 2, p).unwrap())
            .collect();
        let chain = empirical_chain(&strategies, lagged).unwrap();
        for row in &chain.rows {
            let sum: f64 = row.iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-10);
            prop_assert!(row.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn induced_chain_is_linear_in_pi(
        w1 in simplex(16),
        w2 in simplex(16),
        alpha in 0.0..=1.0f64,
    ) {
        let pi1 = FunctionPairDistribution::new(2, 2, w1).unwrap();
        let pi2 = FunctionPairDistribution::new(2, 2, w2).unwrap();
        let mix: Vec<f64> = pi1
            .probs()
            .iter()
            .zip(pi2.probs())
            .map(|(a, b)| alpha * a + (1.0 - alpha) * b)
            .collect();
        let pim = FunctionPairDistribution::new(2, 2, mix).unwrap();
        let m1 = induced_chain(&pi1);
        let m2 = induced_chain(&pi2);
        let mm = induced_chain(&pim);
        for x in 0..4 {
            for y in 0..4 {
                let want = alpha * m1.rows[x][y] + (1.0 - alpha) * m2.rows[x][y];
                prop_assert!((mm.rows[x][y] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn deviation_stationary_is_certified_and_matches_brute_force(
        w in simplex(16),
        game in random_game(),
    ) {
        let pi = FunctionPairDistribution::new(2, 2, w).unwrap();
        for (player, arity) in [(Player::One, 2usize), (Player::Two, 2usize)] {
            for action in 0..arity {
                // The constructor certifies the residual internally.
                let sigma = deviation_stationary(&pi, player, action).unwrap();
                let lhs = expected_utility(&sigma, &game, player).unwrap();
                let mut rhs = 0.0;
                for (i, (f, g)) in enumerate_function_pairs(2, 2).enumerate() {
                    let p = pi.probs()[i];
                    rhs += p * match player {
                        Player::One => game.utility(Player::One, action, g[action]),
                        Player::Two => game.utility(Player::Two, f[action], action),
                    };
                }
                prop_assert!((lhs - rhs).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fitted_pi_round_trips_constant_correlated_play(w in simplex(4)) {
        let sigma = JointDistribution::new(2, 2, w).unwrap();
        let seq = vec![sigma; 4];
        let chain = empirical_chain(&seq, false).unwrap();
        let pi = empirical_function_distribution(&seq, false).unwrap();
        let total: f64 = pi.probs().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        let induced = induced_chain(&pi);
        for x in 0..4 {
            for y in 0..4 {
                prop_assert!(
                    (induced.rows[x][y] - chain.rows[x][y]).abs() < 1e-10,
                    "row {} col {}: {} vs {}", x, y, induced.rows[x][y], chain.rows[x][y]
                );
            }
        }
    }
}

#[test]
fn mwu_external_regret_obeys_the_two_sqrt_t_log_k_bound() {
    use policy_dyn_core::learners::Learner;
    use rand::Rng;
    use rand::SeedableRng;
    // Random [0,1] utility sequences, full information.
    for (seed, t, k) in [(1u64, 400u64, 2usize), (2, 2500, 2), (3, 900, 4)] {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut learner = Learner::mwu(k, t, 1.0, seed).unwrap();
        let mut cum = vec![0.0; k];
        let mut realized = 0.0;
        for _ in 0..t {
            let u: Vec<f64> = (0..k).map(|_| rng.gen()).collect();
            let p = learner.strategy();
            realized += p.probs().iter().zip(&u).map(|(a, b)| a * b).sum::<f64>();
            for (c, v) in cum.iter_mut().zip(&u) {
                *c += v;
            }
            learner.mwu_step(&u).unwrap();
        }
        let best = cum.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let regret = best - realized;
        let bound = 2.0 * (t as f64 * (k as f64).ln()).sqrt();
        assert!(regret <= bound, "regret {regret} > bound {bound}");
    }
}

#[test]
fn exp3_average_drift_stays_below_three_gamma() {
    use policy_dyn_core::learners::Learner;
    use rand::Rng;
    use rand::SeedableRng;
    let t = 400u64;
    let gamma = 1.0 / (t as f64).sqrt();
    let mut total = 0.0;
    let seeds = 200u64;
    for seed in 0..seeds {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut learner = Learner::exp3(2, t, 1.0, seed).unwrap();
        let mut prev = learner.strategy();
        let mut run_total = 0.0;
        for round in 1..=t {
            let played = learner.sample_round_action(round, &prev);
            let utility: f64 = rng.gen();
            let next = learner.exp3_step(played, utility).unwrap();
            run_total += l1_distance(prev.probs(), next.probs()).unwrap();
            prev = next;
        }
        total += run_total / t as f64;
    }
    let average = total / seeds as f64;
    // Conditional expected drift is at most 3 gamma; leave a noise band.
    assert!(
        average <= 3.0 * gamma + 3.0 * gamma / (seeds as f64).sqrt() * 3.0,
        "average drift {average} vs 3 gamma {}",
        3.0 * gamma
    );
}

#[test]
fn tracker_runs_are_deterministic_given_seeds() {
    use policy_dyn_core::learners::{Feedback, Learner};
    let target = JointDistribution::new(2, 2, vec![0.4, 0.1, 0.2, 0.3]).unwrap();
    let run = || {
        let mut l =
            Learner::cce_tracker(target.clone(), Player::One, 400, 1.0, 5, 6).unwrap();
        let mut actions = Vec::new();
        let mut modes = Vec::new();
        for t in 1..=400u64 {
            let s = l.strategy();
            actions.push(l.sample_round_action(t, &s));
            let boundary = t % 20 == 0;
            l.observe(Feedback::Tracker {
                played: actions[actions.len() - 1],
                utility: 0.5,
                sigma_hat: boundary.then_some(&target),
            })
            .unwrap();
            modes.push(l.tracker_mode().unwrap());
        }
        (actions, modes)
    };
    let (a1, m1) = run();
    let (a2, m2) = run();
    assert_eq!(a1, a2);
    assert_eq!(m1, m2);
}
