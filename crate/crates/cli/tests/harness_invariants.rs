//! Harness-level invariants: perturbation behavior, the observed-vs-averaged
//! distribution gap trend, and lagged-mode sensitivity.

use policy_dyn::{run_selfplay, run_sweep, LearnerConfig, Mode, RunConfig};
use policy_dyn_core::game::{
    expected_utility, perturb_strategy, product_distribution, Game, Player,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn random_unit_game(rng: &mut ChaCha8Rng) -> Game {
    Game::new(
        vec!["a".into(), "b".into()],
        vec!["c".into(), "d".into()],
        vec![vec![rng.gen(), rng.gen()], vec![rng.gen(), rng.gen()]],
        vec![vec![rng.gen(), rng.gen()], vec![rng.gen(), rng.gen()]],
    )
    .unwrap()
}

fn config(rounds: u64, record_every: u64, seed: u64, perturb: bool) -> RunConfig {
    RunConfig {
        mode: Mode::Selfplay,
        game: None,
        rounds,
        memory: 1,
        learner1: LearnerConfig {
            algo: "mwu".into(),
            seed: 2 * seed + 1,
            eta_scale: 1.0,
            gamma_scale: 1.0,
        },
        learner2: LearnerConfig {
            algo: "mwu".into(),
            seed: 2 * seed + 2,
            eta_scale: 1.0,
            gamma_scale: 1.0,
        },
        lagged_empirical: false,
        perturb,
        record_every,
        out: String::new(),
        seed,
        sigma: None,
    }
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// With perturbed play, the observed-vs-averaged l1 gap shrinks from the
/// T = 1000 checkpoint to the T = 16000 one, in median over 50 seeds.
#[test]
fn observed_play_gap_shrinks_with_horizon() {
    let mut rng = ChaCha8Rng::seed_from_u64(1234);
    let game = random_unit_game(&mut rng);
    let seeds: Vec<u64> = (0..50).collect();
    let gaps = run_sweep(&seeds, |seed| {
        let out = run_selfplay(&config(16_000, 1_000, seed, true), &game, None).unwrap();
        let early = out
            .report
            .rows
            .iter()
            .find(|r| r.round == 1_000)
            .unwrap()
            .l1_sigma_tilde_hat;
        let late = out
            .report
            .rows
            .iter()
            .find(|r| r.round == 16_000)
            .unwrap()
            .l1_sigma_tilde_hat;
        (early, late)
    });
    let early = median(gaps.iter().map(|g| g.0).collect());
    let late = median(gaps.iter().map(|g| g.1).collect());
    assert!(
        late < early,
        "median gap should shrink: {early:.4} -> {late:.4}"
    );
}

/// Substituting perturbed strategies on a fixed trajectory changes every
/// player's cumulative expected utility by at most 2 T sqrt(|A| eps).
#[test]
fn perturbation_penalty_is_bounded_on_fixed_trajectories() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let game = random_unit_game(&mut rng);
    let t = 1_000u64;
    let out = run_selfplay(&config(t, t, 3, false), &game, None).unwrap();
    let eps = (t as f64).powf(-0.25) / 4.0;
    let budget = 2.0 * t as f64 * (4.0 * eps).sqrt();
    for player in [Player::One, Player::Two] {
        let mut diff = 0.0;
        for i in 0..out.history.rounds {
            let p1 = &out.history.strategies1[i];
            let p2 = &out.history.strategies2[i];
            let q1 = perturb_strategy(p1, eps, 4).unwrap();
            let q2 = perturb_strategy(p2, eps, 4).unwrap();
            let base = expected_utility(&product_distribution(p1, p2), &game, player).unwrap();
            let pert = expected_utility(&product_distribution(&q1, &q2), &game, player).unwrap();
            diff += (pert - base).abs();
        }
        assert!(
            diff <= budget,
            "player {:?}: penalty {diff:.3} over budget {budget:.3}",
            player
        );
    }
}

/// The lagged empirical-chain mode runs and reports; unlike the same-t mode
/// it does not promise an exactly stationary averaged strategy.
#[test]
fn lagged_mode_runs_and_reports() {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let game = random_unit_game(&mut rng);
    let mut cfg = config(512, 64, 5, false);
    cfg.lagged_empirical = true;
    let out = run_selfplay(&cfg, &game, None).unwrap();
    assert!(!out.report.rows.is_empty());
    for row in &out.report.rows {
        assert!(row.stat_res_hat >= 0.0);
        assert!(row.stat_res_tilde >= 0.0);
    }
    // Same-t mode on the identical seeds is exactly stationary.
    let mut cfg2 = cfg.clone();
    cfg2.lagged_empirical = false;
    let out2 = run_selfplay(&cfg2, &game, None).unwrap();
    for row in &out2.report.rows {
        assert!(row.stat_res_hat <= 1e-10);
    }
}

/// MWU self-play on the built-in example game stays within the
/// stability-plus-regret policy bound for both players.
#[test]
fn example_game_selfplay_respects_policy_bound() {
    let game = policy_dyn::example_game();
    let t = 10_000u64;
    let out = run_selfplay(&config(t, t, 17, false), &game, None).unwrap();
    let r_t = 2.0 * (t as f64 * 2f64.ln()).sqrt();
    for (player, regrets) in [
        (Player::One, &out.policy_regret1),
        (Player::Two, &out.policy_regret2),
    ] {
        let bound = policy_dyn_core::game::spectral_norm(game.utility_matrix(player)).unwrap()
            * (t as f64).sqrt()
            + r_t;
        for (dev, &r) in regrets.iter().enumerate() {
            assert!(r <= bound, "{player:?} deviation {dev}: {r} > {bound}");
        }
    }
}

/// JSON reports are byte-identical across reruns of the same config.
#[test]
fn json_reports_are_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let game = random_unit_game(&mut rng);
    let cfg = config(256, 16, 9, false);
    let a = run_selfplay(&cfg, &game, None).unwrap();
    let b = run_selfplay(&cfg, &game, None).unwrap();
    assert_eq!(a.report.to_json().unwrap(), b.report.to_json().unwrap());
}
