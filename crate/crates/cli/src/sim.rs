//! Self-play simulation loop with incremental regret, chain, and deviation
//! bookkeeping.
//!
//! One run is single-threaded and fully deterministic given its config and
//! seeds. Multi-seed sweeps parallelize across runs (see [`crate::sweep`]).

use crate::config::{AlgoSpec, RunConfig};
use crate::report::{CheckpointRow, RunReport};
use anyhow::{anyhow, Context, Result};
use policy_dyn_core::equilibria::equilibrium_slack;
use policy_dyn_core::game::{
    expected_utility, l1_distance, perturb_strategy, product_distribution, Game,
    JointDistribution, Player,
};
use policy_dyn_core::learners::{Feedback, Learner};
use policy_dyn_core::markov::{chain_from_accumulators, stationary_residual_raw, TransitionMatrix};
use policy_dyn_core::regret::{DeviationTracker, OpponentReplayer, PlayHistory};
use std::fs;

/// Everything a finished run exposes to callers beyond the report rows.
#[derive(Debug, Clone)]
pub struct SelfPlayOutcome {
    pub report: RunReport,
    pub history: PlayHistory,
    /// Recorded per-round joint strategy distributions (the tracker pair's
    /// correlated recommendation when both follow one, else the product).
    pub joints: Vec<JointDistribution>,
    pub sigma_hat: JointDistribution,
    pub sigma_tilde: JointDistribution,
    /// Deviation empirical distributions, one per deviation action.
    pub dev_sigma1: Vec<JointDistribution>,
    pub dev_sigma2: Vec<JointDistribution>,
    pub m_hat: TransitionMatrix,
    pub m_tilde: TransitionMatrix,
    pub external_regret1: f64,
    pub external_regret2: f64,
    pub policy_regret1: Vec<f64>,
    pub policy_regret2: Vec<f64>,
    pub final_slack: f64,
}

/// Geometric checkpoint schedule: `record_every * 2^k` up to `T`, plus `T`.
pub fn checkpoint_schedule(rounds: u64, record_every: u64) -> Vec<u64> {
    let mut points = Vec::new();
    let mut t = record_every;
    while t <= rounds {
        points.push(t);
        match t.checked_mul(2) {
            Some(next) => t = next,
            None => break,
        }
    }
    if points.last() != Some(&rounds) {
        points.push(rounds);
    }
    points
}

fn build_learner(
    spec: AlgoSpec,
    config: &RunConfig,
    player: Player,
    game: &Game,
    target: Option<&JointDistribution>,
) -> Result<Learner> {
    let arity = game.action_count(player);
    let lc = match player {
        Player::One => &config.learner1,
        Player::Two => &config.learner2,
    };
    let learner = match spec {
        AlgoSpec::Mwu => Learner::mwu(arity, config.rounds, lc.eta_scale, lc.seed)?,
        AlgoSpec::Exp3 => Learner::exp3(arity, config.rounds, lc.gamma_scale, lc.seed)?,
        AlgoSpec::Fixed(action) => Learner::fixed(action, arity, config.rounds, lc.seed)?,
        AlgoSpec::CceTrack => {
            let target = target.ok_or_else(|| anyhow!("cce-track needs a target sigma"))?;
            Learner::cce_tracker(
                target.clone(),
                player,
                config.rounds,
                lc.gamma_scale,
                config.seed,
                lc.seed,
            )?
        }
    };
    Ok(learner)
}

/// Runs one self-play simulation.
pub fn run_selfplay(
    config: &RunConfig,
    game: &Game,
    target: Option<&JointDistribution>,
) -> Result<SelfPlayOutcome> {
    config.validate()?;
    let rounds = config.rounds;
    let n1 = game.n1();
    let n2 = game.n2();
    let dim = game.joint_size();
    let memory = config.memory;

    let spec1 = config.learner1.algo_spec()?;
    let spec2 = config.learner2.algo_spec()?;
    let mut l1 = build_learner(spec1, config, Player::One, game, target)?;
    let mut l2 = build_learner(spec2, config, Player::Two, game, target)?;

    // Horizon-scaled perturbation: eps = T^(-1/4) / |A|.
    let eps = config
        .perturb
        .then(|| (rounds as f64).powf(-0.25) / dim as f64);

    // Counterfactual trackers: one per deviation action of each player.
    let mut dev1: Vec<DeviationTracker> = (0..n1)
        .map(|a| {
            DeviationTracker::new(
                Player::One,
                a,
                memory,
                Some(OpponentReplayer {
                    game: game.clone(),
                    opponent: Player::Two,
                    initial: l2.clone(),
                    perturb: eps,
                }),
            )
        })
        .collect::<policy_dyn_core::Result<_>>()?;
    let mut dev2: Vec<DeviationTracker> = (0..n2)
        .map(|b| {
            DeviationTracker::new(
                Player::Two,
                b,
                memory,
                Some(OpponentReplayer {
                    game: game.clone(),
                    opponent: Player::One,
                    initial: l1.clone(),
                    perturb: eps,
                }),
            )
        })
        .collect::<policy_dyn_core::Result<_>>()?;

    let epoch_len = (rounds as f64).sqrt().ceil() as u64;
    let schedule = checkpoint_schedule(rounds, config.record_every);

    // Accumulators.
    let mut sigma_hat_acc = vec![0.0; dim];
    let mut sigma_tilde_counts = vec![0.0; dim];
    let mut mhat_num = vec![vec![0.0; dim]; dim];
    let mut mhat_den = vec![0.0; dim];
    let mut mtilde_num = vec![vec![0.0; dim]; dim];
    let mut mtilde_den = vec![0.0; dim];
    let mut prev_joint: Option<JointDistribution> = None;
    let mut prev_state: Option<usize> = None;
    let mut dev_acc1 = vec![vec![0.0; dim]; n1];
    let mut dev_acc2 = vec![vec![0.0; dim]; n2];
    let mut dev_util1 = vec![0.0; n1];
    let mut dev_util2 = vec![0.0; n2];
    let mut exp_util1 = 0.0; // strategy-level realized utility sums
    let mut exp_util2 = 0.0;
    let mut alt1 = vec![0.0; n1]; // fixed-action counterfactuals on realized play
    let mut alt2 = vec![0.0; n2];
    let mut real1 = 0.0;
    let mut real2 = 0.0;

    let mut history = PlayHistory {
        rounds: rounds as usize,
        actions1: Vec::with_capacity(rounds as usize),
        actions2: Vec::with_capacity(rounds as usize),
        strategies1: Vec::with_capacity(rounds as usize),
        strategies2: Vec::with_capacity(rounds as usize),
        utility_trace1: Vec::with_capacity(rounds as usize),
        utility_trace2: Vec::with_capacity(rounds as usize),
    };
    let mut joints: Vec<JointDistribution> = Vec::with_capacity(rounds as usize);
    let mut rows: Vec<CheckpointRow> = Vec::with_capacity(schedule.len());
    let mut schedule_iter = schedule.iter().peekable();

    for t in 1..=rounds {
        let raw1 = l1.strategy();
        let raw2 = l2.strategy();
        let played1 = match eps {
            Some(e) => perturb_strategy(&raw1, e, dim)?,
            None => raw1,
        };
        let played2 = match eps {
            Some(e) => perturb_strategy(&raw2, e, dim)?,
            None => raw2,
        };

        // The round's joint strategy: the shared recommendation when both
        // players follow the same correlated device, else the product.
        let joint_t = match (l1.correlated_joint(), l2.correlated_joint()) {
            (Some(j1), Some(j2)) if j1 == j2 => j1.clone(),
            _ => product_distribution(&played1, &played2),
        };

        // Counterfactual opponent strategies for every deviation.
        for tracker in dev1.iter_mut() {
            let a = tracker.deviation();
            let cf = tracker.round_strategy(t as usize, &played2)?;
            let mut util = 0.0;
            for b in 0..n2 {
                let p = cf.prob(b);
                dev_acc1[a][a * n2 + b] += p;
                util += p * game.utility(Player::One, a, b);
            }
            dev_util1[a] += util;
        }
        for tracker in dev2.iter_mut() {
            let b = tracker.deviation();
            let cf = tracker.round_strategy(t as usize, &played1)?;
            let mut util = 0.0;
            for a in 0..n1 {
                let p = cf.prob(a);
                dev_acc2[b][a * n2 + b] += p;
                util += p * game.utility(Player::Two, a, b);
            }
            dev_util2[b] += util;
        }

        let a = l1.sample_round_action(t, &played1);
        let b = l2.sample_round_action(t, &played2);
        let x = game.joint_index(a, b);
        let u1 = game.utility(Player::One, a, b);
        let u2 = game.utility(Player::Two, a, b);

        // Strategy-level bookkeeping.
        let jp = joint_t.probs();
        for i in 0..dim {
            sigma_hat_acc[i] += jp[i];
        }
        if config.lagged_empirical {
            if let Some(prev) = &prev_joint {
                let pp = prev.probs();
                for i in 0..dim {
                    if pp[i] == 0.0 {
                        continue;
                    }
                    mhat_den[i] += pp[i];
                    for j in 0..dim {
                        mhat_num[i][j] += pp[i] * jp[j];
                    }
                }
            }
        } else {
            for i in 0..dim {
                if jp[i] == 0.0 {
                    continue;
                }
                mhat_den[i] += jp[i];
                for j in 0..dim {
                    mhat_num[i][j] += jp[i] * jp[j];
                }
            }
        }
        exp_util1 += expected_utility(&joint_t, game, Player::One)?;
        exp_util2 += expected_utility(&joint_t, game, Player::Two)?;

        // Realized-play bookkeeping.
        sigma_tilde_counts[x] += 1.0;
        if let Some(px) = prev_state {
            mtilde_num[px][x] += 1.0;
            mtilde_den[px] += 1.0;
        }
        for (a_alt, slot) in alt1.iter_mut().enumerate() {
            *slot += game.utility(Player::One, a_alt, b);
        }
        for (b_alt, slot) in alt2.iter_mut().enumerate() {
            *slot += game.utility(Player::Two, a, b_alt);
        }
        real1 += u1;
        real2 += u2;

        history.actions1.push(a);
        history.actions2.push(b);
        history.strategies1.push(played1.clone());
        history.strategies2.push(played2.clone());
        history.utility_trace1.push(u1);
        history.utility_trace2.push(u2);
        joints.push(joint_t);
        prev_joint = Some(joints.last().unwrap().clone());
        prev_state = Some(x);

        // Advance deviation replicas with the realized actions.
        for tracker in dev1.iter_mut() {
            tracker.advance(a, b)?;
        }
        for tracker in dev2.iter_mut() {
            tracker.advance(b, a)?;
        }

        // Feedback. The tracker oracle hands out the running strategy-level
        // empirical distribution at epoch boundaries.
        let boundary = t % epoch_len == 0;
        let oracle: Option<JointDistribution> = (boundary
            && (l1.kind() == policy_dyn_core::LearnerKind::CceTracker
                || l2.kind() == policy_dyn_core::LearnerKind::CceTracker))
        .then(|| JointDistribution::from_weights(n1, n2, &sigma_hat_acc));
        step_learner(&mut l1, game, Player::One, a, b, oracle.as_ref())?;
        step_learner(&mut l2, game, Player::Two, b, a, oracle.as_ref())?;

        // Checkpoint row.
        if schedule_iter.peek() == Some(&&t) {
            schedule_iter.next();
            let sigma_hat = JointDistribution::from_weights(n1, n2, &sigma_hat_acc);
            let sigma_tilde = JointDistribution::from_weights(n1, n2, &sigma_tilde_counts);
            let dev_sigma1: Vec<JointDistribution> = dev_acc1
                .iter()
                .map(|acc| JointDistribution::from_weights(n1, n2, acc))
                .collect();
            let dev_sigma2: Vec<JointDistribution> = dev_acc2
                .iter()
                .map(|acc| JointDistribution::from_weights(n1, n2, acc))
                .collect();
            let slack = equilibrium_slack(&sigma_hat, &dev_sigma1, &dev_sigma2, game)?;
            let m_hat = chain_from_accumulators(&mhat_num, &mhat_den);
            let stat_res_hat = stationary_residual_raw(&m_hat, sigma_hat.probs())?;
            let stat_res_tilde = if t >= 2 {
                let m_tilde = chain_from_accumulators(&mtilde_num, &mtilde_den);
                stationary_residual_raw(&m_tilde, sigma_tilde.probs())?
            } else {
                0.0
            };
            let pol1: Vec<f64> = dev_util1.iter().map(|&v| v - exp_util1).collect();
            let pol2: Vec<f64> = dev_util2.iter().map(|&v| v - exp_util2).collect();
            let row = CheckpointRow {
                round: t,
                ext1: alt1.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - real1,
                ext2: alt2.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - real2,
                pol1_max: pol1.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                pol2_max: pol2.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                pol1,
                pol2,
                slack,
                l1_sigma_tilde_hat: l1_distance(sigma_tilde.probs(), sigma_hat.probs())?,
                stat_res_hat,
                stat_res_tilde,
            }
            .rounded();
            rows.push(row);
        }
    }

    let sigma_hat = JointDistribution::from_weights(n1, n2, &sigma_hat_acc);
    let sigma_tilde = JointDistribution::from_weights(n1, n2, &sigma_tilde_counts);
    let dev_sigma1: Vec<JointDistribution> = dev_acc1
        .iter()
        .map(|acc| JointDistribution::from_weights(n1, n2, acc))
        .collect();
    let dev_sigma2: Vec<JointDistribution> = dev_acc2
        .iter()
        .map(|acc| JointDistribution::from_weights(n1, n2, acc))
        .collect();
    let final_slack = equilibrium_slack(&sigma_hat, &dev_sigma1, &dev_sigma2, game)?;
    let m_hat = chain_from_accumulators(&mhat_num, &mhat_den);
    let m_tilde = chain_from_accumulators(&mtilde_num, &mtilde_den);

    let report = RunReport {
        config: config.clone(),
        seed: config.seed,
        rows,
    };
    Ok(SelfPlayOutcome {
        report,
        history,
        joints,
        sigma_hat,
        sigma_tilde,
        dev_sigma1: dev_sigma1.clone(),
        dev_sigma2: dev_sigma2.clone(),
        m_hat,
        m_tilde,
        external_regret1: alt1.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - real1,
        external_regret2: alt2.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - real2,
        policy_regret1: dev_util1.iter().map(|&v| v - exp_util1).collect(),
        policy_regret2: dev_util2.iter().map(|&v| v - exp_util2).collect(),
        final_slack,
    })
}

fn step_learner(
    learner: &mut Learner,
    game: &Game,
    player: Player,
    own_action: usize,
    opp_action: usize,
    oracle: Option<&JointDistribution>,
) -> Result<()> {
    use policy_dyn_core::LearnerKind::*;
    let (a, b) = match player {
        Player::One => (own_action, opp_action),
        Player::Two => (opp_action, own_action),
    };
    let utility = game.utility(player, a, b);
    match learner.kind() {
        Mwu => {
            let column = game.utility_column(player, opp_action);
            learner.observe(Feedback::Full(&column))?;
        }
        Exp3 => {
            learner.observe(Feedback::Bandit {
                played: own_action,
                utility,
            })?;
        }
        Fixed => {
            learner.observe(Feedback::None)?;
        }
        CceTracker => {
            learner.observe(Feedback::Tracker {
                played: own_action,
                utility,
                sigma_hat: oracle,
            })?;
        }
    }
    Ok(())
}

/// Loads the game (and tracker target, when configured) and runs.
pub fn run_selfplay_from_files(config: &RunConfig) -> Result<SelfPlayOutcome> {
    let game_path = config
        .game
        .as_ref()
        .ok_or_else(|| anyhow!("selfplay mode needs a game file"))?;
    let text = fs::read_to_string(game_path)
        .with_context(|| format!("reading {}", game_path.display()))?;
    let game = Game::from_json(&text)?;
    let target = match &config.sigma {
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            Some(JointDistribution::from_json(&text)?)
        }
        None => None,
    };
    run_selfplay(config, &game, target.as_ref())
}
