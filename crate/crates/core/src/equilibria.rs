//! Certification of coarse correlated equilibria and policy equilibria.
//!
//! A policy equilibrium is a distribution over response-function pairs whose
//! induced chain admits a stationary distribution beating every constant
//! deviation's stationary value; certification searches the full stationary
//! polytope by LP, since chains from degenerate pair distributions are
//! frequently reducible.

use crate::error::Result;
use crate::game::{expected_utility, Game, JointDistribution, Player};
use crate::markov::{
    deviation_stationary, induced_chain, solve_constrained_stationary, FunctionPairDistribution,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use crate::markov::enumerate_function_pairs;

/// Tolerance for certifying exact or analytic inputs.
pub const ANALYTIC_TOL: f64 = 1e-8;
/// Tolerance for certifying empirical finite-horizon inputs.
pub const EMPIRICAL_TOL: f64 = 0.05;

/// One `(player, deviation action, slack)` record; slack is the deviation's
/// expected-utility advantage over the candidate distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviationSlack {
    pub player: Player,
    pub deviation: usize,
    pub slack: f64,
}

/// Certification outcome. `violations` records the slack of every deviation
/// of both players against the witness (or against the least-violating
/// stationary point when no witness exists).
#[derive(Debug, Clone)]
pub struct EquilibriumVerdict {
    pub is_equilibrium: bool,
    pub witness: Option<JointDistribution>,
    pub violations: Vec<DeviationSlack>,
}

impl EquilibriumVerdict {
    pub fn max_slack(&self) -> f64 {
        self.violations
            .iter()
            .map(|v| v.slack)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn slack_of(&self, player: Player, deviation: usize) -> Option<f64> {
        self.violations
            .iter()
            .find(|v| v.player == player && v.deviation == deviation)
            .map(|v| v.slack)
    }
}

fn deviation_slacks(
    sigma: &JointDistribution,
    deviation_values: &[(Player, usize, f64)],
    game: &Game,
) -> Result<Vec<DeviationSlack>> {
    let mut out = Vec::with_capacity(deviation_values.len());
    for &(player, deviation, value) in deviation_values {
        let base = expected_utility(sigma, game, player)?;
        out.push(DeviationSlack {
            player,
            deviation,
            slack: value - base,
        });
    }
    Ok(out)
}

/// Checks whether `sigma` is a coarse correlated equilibrium of `game`:
/// no player gains more than `tol` by a unilateral fixed-action deviation
/// with the opponent's behavior unchanged.
pub fn is_cce(sigma: &JointDistribution, game: &Game, tol: f64) -> Result<EquilibriumVerdict> {
    let mut deviation_values = Vec::new();
    for a in 0..game.n1() {
        // E_{(a',b) ~ sigma}[u1(a, b)]
        let mut v = 0.0;
        for a0 in 0..game.n1() {
            for b in 0..game.n2() {
                v += sigma.prob(a0, b) * game.utility(Player::One, a, b);
            }
        }
        deviation_values.push((Player::One, a, v));
    }
    for b in 0..game.n2() {
        let mut v = 0.0;
        for a in 0..game.n1() {
            for b0 in 0..game.n2() {
                v += sigma.prob(a, b0) * game.utility(Player::Two, a, b);
            }
        }
        deviation_values.push((Player::Two, b, v));
    }
    let violations = deviation_slacks(sigma, &deviation_values, game)?;
    let is_equilibrium = violations.iter().all(|v| v.slack <= tol);
    Ok(EquilibriumVerdict {
        is_equilibrium,
        witness: is_equilibrium.then(|| sigma.clone()),
        violations,
    })
}

/// The deviation values of `pi`: for each fixed action, the expected utility
/// of the constructive stationary distribution of the deviation chain.
pub fn deviation_values(
    pi: &FunctionPairDistribution,
    game: &Game,
) -> Result<Vec<(Player, usize, f64)>> {
    let mut values = Vec::new();
    for a in 0..game.n1() {
        let sigma_a = deviation_stationary(pi, Player::One, a)?;
        values.push((
            Player::One,
            a,
            expected_utility(&sigma_a, game, Player::One)?,
        ));
    }
    for b in 0..game.n2() {
        let sigma_b = deviation_stationary(pi, Player::Two, b)?;
        values.push((
            Player::Two,
            b,
            expected_utility(&sigma_b, game, Player::Two)?,
        ));
    }
    Ok(values)
}

/// Certifies `pi` as a policy equilibrium of `game` at tolerance `tol`.
pub fn is_policy_equilibrium(
    pi: &FunctionPairDistribution,
    game: &Game,
    tol: f64,
) -> Result<EquilibriumVerdict> {
    is_policy_equilibrium_opt(pi, game, tol, false)
}

/// As [`is_policy_equilibrium`], optionally breaking witness ties by
/// maximizing total welfare `E[u1] + E[u2]`.
pub fn is_policy_equilibrium_opt(
    pi: &FunctionPairDistribution,
    game: &Game,
    tol: f64,
    maximize_welfare: bool,
) -> Result<EquilibriumVerdict> {
    let chain = induced_chain(pi);
    let values = deviation_values(pi, game)?;
    let flat_u = |player: Player| -> Vec<f64> {
        let mut v = Vec::with_capacity(game.joint_size());
        for a in 0..game.n1() {
            for b in 0..game.n2() {
                v.push(game.utility(player, a, b));
            }
        }
        v
    };
    let u1 = flat_u(Player::One);
    let u2 = flat_u(Player::Two);
    let inequalities: Vec<(Vec<f64>, f64)> = values
        .iter()
        .map(|&(player, _, value)| {
            let coeffs = match player {
                Player::One => u1.clone(),
                Player::Two => u2.clone(),
            };
            (coeffs, value - tol)
        })
        .collect();
    let objective: Option<Vec<f64>> =
        maximize_welfare.then(|| u1.iter().zip(&u2).map(|(a, b)| a + b).collect());
    let witness = solve_constrained_stationary(
        &chain,
        game.n1(),
        game.n2(),
        &inequalities,
        objective.as_deref(),
    )?;
    match witness {
        Some(sigma) => {
            let violations = deviation_slacks(&sigma, &values, game)?;
            Ok(EquilibriumVerdict {
                is_equilibrium: true,
                witness: Some(sigma),
                violations,
            })
        }
        None => {
            // Report slacks at the least-violating stationary point: maximize
            // v subject to E[u_p] >= max deviation value - v.
            let max_dev1 = values
                .iter()
                .filter(|(p, _, _)| *p == Player::One)
                .map(|&(_, _, v)| v)
                .fold(f64::NEG_INFINITY, f64::max);
            let max_dev2 = values
                .iter()
                .filter(|(p, _, _)| *p == Player::Two)
                .map(|&(_, _, v)| v)
                .fold(f64::NEG_INFINITY, f64::max);
            let dim = game.joint_size();
            // Extra variable v: sigma entries then v.
            // Rebuild as a direct simplex problem over (sigma, v).
            use crate::simplex::{solve, Constraint, LpOutcome, Rel};
            let mut cons = Vec::new();
            let mut row = vec![1.0; dim];
            row.push(0.0);
            cons.push(Constraint::new(row, Rel::Eq, 1.0));
            for j in 0..dim {
                let mut coeffs: Vec<f64> = (0..dim)
                    .map(|i| chain.rows[i][j] - if i == j { 1.0 } else { 0.0 })
                    .collect();
                coeffs.push(0.0);
                cons.push(Constraint::new(coeffs, Rel::Eq, 0.0));
            }
            let mut c1 = u1.clone();
            c1.push(1.0);
            cons.push(Constraint::new(c1, Rel::Ge, max_dev1));
            let mut c2 = u2.clone();
            c2.push(1.0);
            cons.push(Constraint::new(c2, Rel::Ge, max_dev2));
            let mut objective = vec![0.0; dim];
            objective.push(-1.0); // minimize the violation v
            let sigma = match solve(dim + 1, &cons, Some(&objective), 1e-9)? {
                LpOutcome::Optimal { x, .. } => {
                    let clamped: Vec<f64> = x[..dim].iter().map(|&v| v.max(0.0)).collect();
                    JointDistribution::from_weights(game.n1(), game.n2(), &clamped)
                }
                _ => JointDistribution::uniform(game.n1(), game.n2()),
            };
            let violations = deviation_slacks(&sigma, &values, game)?;
            Ok(EquilibriumVerdict {
                is_equilibrium: false,
                witness: None,
                violations,
            })
        }
    }
}

/// Finite-horizon equilibrium-slack diagnostic: the largest advantage any
/// deviation's empirical distribution has over the empirical play.
pub fn equilibrium_slack(
    sigma_hat: &JointDistribution,
    deviations1: &[JointDistribution],
    deviations2: &[JointDistribution],
    game: &Game,
) -> Result<f64> {
    let base1 = expected_utility(sigma_hat, game, Player::One)?;
    let base2 = expected_utility(sigma_hat, game, Player::Two)?;
    let mut worst = f64::NEG_INFINITY;
    for d in deviations1 {
        worst = worst.max(expected_utility(d, game, Player::One)? - base1);
    }
    for d in deviations2 {
        worst = worst.max(expected_utility(d, game, Player::Two)? - base2);
    }
    Ok(worst)
}

/// A vertex of the CCE polytope found by maximizing a seeded random
/// objective; every finite game has at least one CCE, so this always
/// succeeds on valid games.
pub fn random_cce(game: &Game, seed: u64) -> Result<JointDistribution> {
    use crate::simplex::{solve, Constraint, LpOutcome, Rel};
    let dim = game.joint_size();
    let mut cons = Vec::new();
    cons.push(Constraint::new(vec![1.0; dim], Rel::Eq, 1.0));
    for a_dev in 0..game.n1() {
        let mut coeffs = vec![0.0; dim];
        for a in 0..game.n1() {
            for b in 0..game.n2() {
                coeffs[game.joint_index(a, b)] =
                    game.utility(Player::One, a, b) - game.utility(Player::One, a_dev, b);
            }
        }
        cons.push(Constraint::new(coeffs, Rel::Ge, 0.0));
    }
    for b_dev in 0..game.n2() {
        let mut coeffs = vec![0.0; dim];
        for a in 0..game.n1() {
            for b in 0..game.n2() {
                coeffs[game.joint_index(a, b)] =
                    game.utility(Player::Two, a, b) - game.utility(Player::Two, a, b_dev);
            }
        }
        cons.push(Constraint::new(coeffs, Rel::Ge, 0.0));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let objective: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>()).collect();
    match solve(dim, &cons, Some(&objective), 1e-9)? {
        LpOutcome::Optimal { x, .. } => {
            let clamped: Vec<f64> = x.iter().map(|&v| v.max(0.0)).collect();
            Ok(JointDistribution::from_weights(
                game.n1(),
                game.n2(),
                &clamped,
            ))
        }
        other => Err(crate::error::Error::LpFailure {
            detail: format!("CCE polytope LP failed: {other:?}"),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::MixedStrategy;
    use crate::markov::FunctionPairDistribution;

    fn simp_game() -> Game {
        Game::new(
            vec!["a".into(), "b".into()],
            vec!["c".into(), "d".into()],
            vec![vec![0.75, 0.0], vec![1.0, 0.0]],
            vec![vec![1.0, 1.0], vec![1.0, 1.0]],
        )
        .unwrap()
    }

    fn worked_example_pi() -> FunctionPairDistribution {
        FunctionPairDistribution::dirac(2, 2, &[0, 0], &[0, 1]).unwrap()
    }

    #[test]
    fn constant_utilities_make_everything_a_cce() {
        let game = Game::new(
            vec!["a".into(), "b".into()],
            vec!["c".into(), "d".into()],
            vec![vec![0.5, 0.5], vec![0.5, 0.5]],
            vec![vec![0.2, 0.2], vec![0.2, 0.2]],
        )
        .unwrap();
        let sigma = JointDistribution::from_weights(2, 2, &[0.4, 0.1, 0.3, 0.2]);
        assert!(is_cce(&sigma, &game, 1e-12).unwrap().is_equilibrium);
    }

    #[test]
    fn worked_example_point_is_not_a_cce() {
        let game = simp_game();
        let sigma = JointDistribution::dirac(2, 2, 0, 0);
        let verdict = is_cce(&sigma, &game, ANALYTIC_TOL).unwrap();
        assert!(!verdict.is_equilibrium);
        let slack = verdict.slack_of(Player::One, 1).unwrap();
        assert_eq!(slack, 0.25);
        // A loose tolerance flips the verdict; the slack is still reported.
        let loose = is_cce(&sigma, &game, 0.5).unwrap();
        assert!(loose.is_equilibrium);
        assert_eq!(loose.slack_of(Player::One, 1).unwrap(), 0.25);
    }

    #[test]
    fn matching_pennies_uniform_is_a_cce() {
        let game = Game::new(
            vec!["h".into(), "t".into()],
            vec!["h".into(), "t".into()],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        )
        .unwrap();
        let verdict = is_cce(&JointDistribution::uniform(2, 2), &game, 1e-12).unwrap();
        assert!(verdict.is_equilibrium);
        for v in &verdict.violations {
            assert!(v.slack.abs() < 1e-15);
        }
    }

    #[test]
    fn worked_example_is_a_policy_equilibrium() {
        let game = simp_game();
        let verdict = is_policy_equilibrium(&worked_example_pi(), &game, 1e-10).unwrap();
        assert!(verdict.is_equilibrium);
        let witness = verdict.witness.as_ref().unwrap();
        assert!((witness.prob(0, 0) - 1.0).abs() < 1e-10);
        let value = expected_utility(witness, &game, Player::One).unwrap();
        assert!((value - 0.75).abs() < 1e-10);
        // Deviation to b is worth exactly 0.
        let v_b = deviation_values(&worked_example_pi(), &game)
            .unwrap()
            .into_iter()
            .find(|&(p, a, _)| p == Player::One && a == 1)
            .unwrap()
            .2;
        assert_eq!(v_b, 0.0);
    }

    #[test]
    fn constant_utility_game_accepts_every_pi() {
        let game = Game::new(
            vec!["a".into(), "b".into()],
            vec!["c".into(), "d".into()],
            vec![vec![0.3, 0.3], vec![0.3, 0.3]],
            vec![vec![0.7, 0.7], vec![0.7, 0.7]],
        )
        .unwrap();
        let pi = FunctionPairDistribution::uniform(2, 2).unwrap();
        assert!(is_policy_equilibrium(&pi, &game, 1e-10)
            .unwrap()
            .is_equilibrium);
    }

    #[test]
    fn constant_pair_in_worked_example_is_rejected() {
        let game = simp_game();
        // f == a constant, g == c constant.
        let pi = FunctionPairDistribution::dirac(2, 2, &[0, 0], &[0, 0]).unwrap();
        let verdict = is_policy_equilibrium(&pi, &game, 1e-10).unwrap();
        assert!(!verdict.is_equilibrium);
        // Deviation of player 1 to b pays 1 against the constant responder.
        let v = deviation_values(&pi, &game)
            .unwrap()
            .into_iter()
            .find(|&(p, a, _)| p == Player::One && a == 1)
            .unwrap()
            .2;
        assert_eq!(v, 1.0);
    }

    #[test]
    fn equilibrium_slack_examples() {
        let game = simp_game();
        let sigma = JointDistribution::dirac(2, 2, 0, 0);
        let devs1 = vec![sigma.clone()];
        let devs2 = vec![sigma.clone()];
        assert_eq!(
            equilibrium_slack(&sigma, &devs1, &devs2, &game).unwrap(),
            0.0
        );
        // Worked example limit: row deviation to b gives -3/4 slack, all
        // player-2 deviations give 0 (constant utility), so the max is 0.
        let dev_b = JointDistribution::dirac(2, 2, 1, 1);
        let devs1 = vec![sigma.clone(), dev_b];
        let devs2 = vec![
            JointDistribution::dirac(2, 2, 0, 0),
            JointDistribution::dirac(2, 2, 0, 1),
        ];
        let slack = equilibrium_slack(&sigma, &devs1, &devs2, &game).unwrap();
        assert_eq!(slack, 0.0);
    }

    #[test]
    fn enumerate_pair_counts() {
        assert_eq!(enumerate_function_pairs(2, 2).count(), 16);
        assert_eq!(enumerate_function_pairs(1, 1).count(), 1);
        assert_eq!(enumerate_function_pairs(2, 3).count(), 72);
    }

    #[test]
    fn random_cce_satisfies_the_cce_inequalities() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for seed in 0..8u64 {
            let game = Game::new(
                vec!["a".into(), "b".into()],
                vec!["c".into(), "d".into()],
                vec![
                    vec![rng.gen(), rng.gen()],
                    vec![rng.gen(), rng.gen()],
                ],
                vec![
                    vec![rng.gen(), rng.gen()],
                    vec![rng.gen(), rng.gen()],
                ],
            )
            .unwrap();
            let sigma = random_cce(&game, seed).unwrap();
            let verdict = is_cce(&sigma, &game, 1e-7).unwrap();
            assert!(verdict.is_equilibrium, "slack {}", verdict.max_slack());
        }
    }

    #[test]
    fn every_cce_certifies_through_the_constant_play_construction() {
        use crate::markov::{empirical_function_distribution, induced_chain, stationary_residual};
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1515);
        for seed in 0..10u64 {
            let game = Game::new(
                vec!["a".into(), "b".into()],
                vec!["c".into(), "d".into()],
                vec![vec![rng.gen(), rng.gen()], vec![rng.gen(), rng.gen()]],
                vec![vec![rng.gen(), rng.gen()], vec![rng.gen(), rng.gen()]],
            )
            .unwrap();
            let sigma = random_cce(&game, seed).unwrap();
            // Fit a pair distribution to constant play of the CCE itself.
            let pi = empirical_function_distribution(&vec![sigma.clone(); 4], false).unwrap();
            let verdict = is_policy_equilibrium(&pi, &game, 1e-8).unwrap();
            assert!(verdict.is_equilibrium, "seed {seed}");
            // The CCE itself is a valid witness: stationary for the induced
            // chain, and no deviation beats it beyond tolerance.
            let chain = induced_chain(&pi);
            assert!(stationary_residual(&chain, &sigma).unwrap() <= 1e-8);
            for (player, action, value) in deviation_values(&pi, &game).unwrap() {
                let base = expected_utility(&sigma, &game, player).unwrap();
                assert!(
                    value - base <= 1e-8,
                    "seed {seed}: deviation ({player:?}, {action}) slack {}",
                    value - base
                );
            }
        }
    }

    #[test]
    fn policy_equilibrium_invariant_under_action_relabeling() {
        // Swap both players' action labels and conjugate pi accordingly.
        let game = simp_game();
        let pi = worked_example_pi();
        let verdict = is_policy_equilibrium(&pi, &game, 1e-9).unwrap();

        let swapped_game = Game::new(
            vec!["b".into(), "a".into()],
            vec!["d".into(), "c".into()],
            vec![vec![0.0, 1.0], vec![0.0, 0.75]],
            vec![vec![1.0, 1.0], vec![1.0, 1.0]],
        )
        .unwrap();
        // f: A2 -> A1 with relabeled inputs and outputs: f'(b') = perm(f(inv(b'))).
        // Original f = const a -> new const at index 1; g: a->c, b->d becomes
        // g'(0)=g'(b)=d->0? b index swaps: new g'(0) = relabeled g(old b)=d -> 0,
        // g'(1) = relabeled g(old a)=c -> 1.
        let pi_swapped = FunctionPairDistribution::dirac(2, 2, &[1, 1], &[0, 1]).unwrap();
        let verdict_swapped = is_policy_equilibrium(&pi_swapped, &swapped_game, 1e-9).unwrap();
        assert_eq!(verdict.is_equilibrium, verdict_swapped.is_equilibrium);
        let w = verdict.witness.unwrap();
        let w2 = verdict_swapped.witness.unwrap();
        assert!((w.prob(0, 0) - w2.prob(1, 1)).abs() < 1e-9);
        let _ = MixedStrategy::uniform(2);
    }
}
