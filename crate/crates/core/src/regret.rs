//! External regret, m-memory policy regret, and counterfactual deviation
//! distributions computed by deterministic replay of opponent learners.
//!
//! Replay relies on two properties of [`Learner`]: states are cheap values,
//! and all sampling is a pure function of `(seed, round)`. A counterfactual
//! round therefore consumes exactly the random numbers the realized round
//! did (common random numbers), which keeps the estimator deterministic.

use crate::error::{Error, Result};
use crate::game::{
    expected_utility, product_distribution, Game, JointDistribution, MixedStrategy, Player,
};
use crate::learners::{Feedback, Learner, LearnerKind, WindowUtility};
use std::collections::VecDeque;

/// Realized actions, per-round strategies, and realized utilities of one run.
#[derive(Debug, Clone)]
pub struct PlayHistory {
    pub rounds: usize,
    pub actions1: Vec<usize>,
    pub actions2: Vec<usize>,
    pub strategies1: Vec<MixedStrategy>,
    pub strategies2: Vec<MixedStrategy>,
    pub utility_trace1: Vec<f64>,
    pub utility_trace2: Vec<f64>,
}

impl PlayHistory {
    pub fn validate(&self, game: &Game) -> Result<()> {
        let t = self.rounds;
        for (what, len) in [
            ("actions1", self.actions1.len()),
            ("actions2", self.actions2.len()),
            ("strategies1", self.strategies1.len()),
            ("strategies2", self.strategies2.len()),
            ("utility_trace1", self.utility_trace1.len()),
            ("utility_trace2", self.utility_trace2.len()),
        ] {
            if len != t {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: t,
                    actual: len,
                });
            }
        }
        for i in 0..t {
            let (a, b) = (self.actions1[i], self.actions2[i]);
            if self.utility_trace1[i] != game.utility(Player::One, a, b)
                || self.utility_trace2[i] != game.utility(Player::Two, a, b)
            {
                return Err(Error::BadUtility {
                    index: i,
                    value: self.utility_trace1[i],
                });
            }
        }
        Ok(())
    }

    pub fn action(&self, player: Player, t: usize) -> usize {
        match player {
            Player::One => self.actions1[t],
            Player::Two => self.actions2[t],
        }
    }

    pub fn strategy(&self, player: Player, t: usize) -> &MixedStrategy {
        match player {
            Player::One => &self.strategies1[t],
            Player::Two => &self.strategies2[t],
        }
    }

    pub fn utility(&self, player: Player, t: usize) -> f64 {
        match player {
            Player::One => self.utility_trace1[t],
            Player::Two => self.utility_trace2[t],
        }
    }
}

/// Per-round counterfactual opponent strategies and joints for one deviation.
#[derive(Debug, Clone)]
pub struct DeviationTrace {
    pub deviating_player: Player,
    pub deviation: usize,
    pub memory: usize,
    /// Counterfactual opponent strategies, one per round.
    pub strategies: Vec<MixedStrategy>,
    /// `dirac(deviation) x strategy`, one per round.
    pub joints: Vec<JointDistribution>,
}

/// Reconstructs an opponent learner deterministically from its initial state.
#[derive(Debug, Clone)]
pub struct OpponentReplayer {
    pub game: Game,
    /// The player being replayed, i.e. the deviating player's opponent.
    pub opponent: Player,
    pub initial: Learner,
    /// Perturbation `eps` applied by the harness to emitted strategies.
    pub perturb: Option<f64>,
}

impl OpponentReplayer {
    pub fn new(game: Game, opponent: Player, initial: Learner) -> OpponentReplayer {
        OpponentReplayer {
            game,
            opponent,
            initial,
            perturb: None,
        }
    }

    /// The distribution the opponent actually plays this round.
    pub fn emitted(&self, state: &Learner) -> Result<MixedStrategy> {
        let raw = state.strategy();
        match self.perturb {
            Some(eps) => crate::game::perturb_strategy(&raw, eps, self.game.joint_size()),
            None => Ok(raw),
        }
    }

    /// Advances `state` with the feedback it would observe when the deviating
    /// player plays `deviator_action` and the opponent plays `own_action`.
    pub fn advance(
        &self,
        state: &mut Learner,
        deviator_action: usize,
        own_action: usize,
    ) -> Result<()> {
        let column;
        let fb = match state.kind() {
            LearnerKind::Mwu => {
                column = self.game.utility_column(self.opponent, deviator_action);
                Feedback::Full(&column)
            }
            LearnerKind::Exp3 => {
                let (a, b) = match self.opponent {
                    Player::One => (own_action, deviator_action),
                    Player::Two => (deviator_action, own_action),
                };
                Feedback::Bandit {
                    played: own_action,
                    utility: self.game.utility(self.opponent, a, b),
                }
            }
            LearnerKind::Fixed => Feedback::None,
            // Tracker replay is handled by the replay-invariant fast path.
            LearnerKind::CceTracker => {
                return Err(Error::WrongLearnerKind {
                    expected: "replayable learner",
                })
            }
        };
        state.observe(fb)?;
        Ok(())
    }
}

/// Incrementally maintained counterfactual trace for one `(player, action)`
/// deviation. Snapshots the opponent at depth `m` and replays the at most
/// `m - 1` rounds whose feedback the deviation changes.
#[derive(Debug)]
pub struct DeviationTracker {
    replayer: Option<OpponentReplayer>,
    deviating: Player,
    deviation: usize,
    memory: usize,
    realized: Option<Learner>,
    /// Snapshots at the start of rounds `t-m+1 ..= t`.
    ring: VecDeque<Learner>,
}

impl DeviationTracker {
    /// `replayer` may be omitted when the opponent is history independent or
    /// `memory == 1`; any other configuration needs it for counterfactuals.
    pub fn new(
        deviating: Player,
        deviation: usize,
        memory: usize,
        replayer: Option<OpponentReplayer>,
    ) -> Result<DeviationTracker> {
        if memory == 0 {
            return Err(Error::BadParameter {
                name: "memory",
                value: 0.0,
            });
        }
        let needs_replay = memory > 1
            && !replayer
                .as_ref()
                .map(|r| r.initial.replay_invariant())
                .unwrap_or(false);
        if needs_replay && replayer.is_none() {
            return Err(Error::ReplayUnavailable);
        }
        let realized = replayer.as_ref().map(|r| r.initial.clone());
        Ok(DeviationTracker {
            replayer,
            deviating,
            deviation,
            memory,
            realized,
            ring: VecDeque::new(),
        })
    }

    fn fast_path(&self) -> bool {
        self.memory == 1
            || self
                .replayer
                .as_ref()
                .map(|r| r.initial.replay_invariant())
                .unwrap_or(true)
    }

    /// Counterfactual opponent strategy for 1-based round `t`.
    ///
    /// `realized_opp_strategy` is the distribution the opponent actually
    /// plays this round (post-perturbation); it is the answer whenever the
    /// deviation cannot yet have influenced the opponent.
    pub fn round_strategy(
        &mut self,
        t: usize,
        realized_opp_strategy: &MixedStrategy,
    ) -> Result<MixedStrategy> {
        if self.fast_path() {
            return Ok(realized_opp_strategy.clone());
        }
        let replayer = self.replayer.as_ref().ok_or(Error::ReplayUnavailable)?;
        let realized = self.realized.as_ref().expect("realized state present");
        self.ring.push_back(realized.clone());
        if self.ring.len() > self.memory {
            self.ring.pop_front();
        }
        // Front of the ring has processed rounds 1 ..= t - ring.len().
        let mut state = self.ring.front().expect("ring nonempty").clone();
        let start = t + 1 - self.ring.len();
        for s in start..t {
            let emitted = replayer.emitted(&state)?;
            let own = state.sample_round_action(s as u64, &emitted);
            replayer.advance(&mut state, self.deviation, own)?;
        }
        replayer.emitted(&state)
    }

    /// Records round `t`'s realized actions, advancing the internal replica.
    pub fn advance(&mut self, deviator_action: usize, opponent_action: usize) -> Result<()> {
        if self.fast_path() {
            return Ok(());
        }
        let replayer = self.replayer.as_ref().ok_or(Error::ReplayUnavailable)?;
        let realized = self.realized.as_mut().expect("realized state present");
        replayer.advance(realized, deviator_action, opponent_action)
    }

    pub fn deviation(&self) -> usize {
        self.deviation
    }

    pub fn deviating_player(&self) -> Player {
        self.deviating
    }
}

/// Builds the full counterfactual trace for one deviation of one player.
///
/// For each round, the opponent's strategy is reconstructed as if the
/// deviating player's last `m` actions (the current one included) had been
/// `deviation`; rounds `t <= m` replay the entire available prefix.
pub fn deviation_trace(
    history: &PlayHistory,
    game: &Game,
    deviating_player: Player,
    deviation: usize,
    memory: usize,
    opponent: Option<Learner>,
    perturb: Option<f64>,
) -> Result<DeviationTrace> {
    let dev_arity = game.action_count(deviating_player);
    if deviation >= dev_arity {
        return Err(Error::ActionOutOfRange {
            action: deviation,
            arity: dev_arity,
        });
    }
    let opp = deviating_player.other();
    let replayer = opponent.map(|initial| OpponentReplayer {
        game: game.clone(),
        opponent: opp,
        initial,
        perturb,
    });
    let needs_replay = memory > 1
        && !replayer
            .as_ref()
            .map(|r| r.initial.replay_invariant())
            .unwrap_or(false);
    if needs_replay && replayer.is_none() {
        return Err(Error::ReplayUnavailable);
    }
    let mut tracker = DeviationTracker::new(deviating_player, deviation, memory, replayer)?;
    let mut strategies = Vec::with_capacity(history.rounds);
    let mut joints = Vec::with_capacity(history.rounds);
    for t in 1..=history.rounds {
        let realized_opp = history.strategy(opp, t - 1);
        let strat = tracker.round_strategy(t, realized_opp)?;
        let dev_dirac = MixedStrategy::dirac(deviation, dev_arity);
        let joint = match deviating_player {
            Player::One => product_distribution(&dev_dirac, &strat),
            Player::Two => product_distribution(&strat, &dev_dirac),
        };
        strategies.push(strat);
        joints.push(joint);
        tracker.advance(
            history.action(deviating_player, t - 1),
            history.action(opp, t - 1),
        )?;
    }
    Ok(DeviationTrace {
        deviating_player,
        deviation,
        memory,
        strategies,
        joints,
    })
}

/// Average of the per-round counterfactual joints (the deviation's empirical
/// distribution). The deviating player's marginal is exactly the deviation.
pub fn deviation_empirical(trace: &DeviationTrace) -> Result<JointDistribution> {
    if trace.joints.is_empty() {
        return Err(Error::TooFewRounds {
            needed: 1,
            actual: 0,
        });
    }
    let n1 = trace.joints[0].n1;
    let n2 = trace.joints[0].n2;
    let mut acc = vec![0.0; n1 * n2];
    for j in &trace.joints {
        for (a, &p) in acc.iter_mut().zip(j.probs()) {
            *a += p;
        }
    }
    Ok(JointDistribution::from_weights(n1, n2, &acc))
}

/// External regret over realized play in a bimatrix game: the best fixed
/// action against the opponent's realized sequence minus realized utility.
pub fn external_regret(history: &PlayHistory, game: &Game, player: Player) -> f64 {
    let opp = player.other();
    let arity = game.action_count(player);
    let realized: f64 = (0..history.rounds).map(|t| history.utility(player, t)).sum();
    let mut best = f64::NEG_INFINITY;
    for a in 0..arity {
        let mut total = 0.0;
        for t in 0..history.rounds {
            let b = history.action(opp, t);
            total += match player {
                Player::One => game.utility(Player::One, a, b),
                Player::Two => game.utility(Player::Two, b, a),
            };
        }
        best = best.max(total);
    }
    best - realized
}

/// m-memory policy regret in game mode, at strategy level: the counterfactual
/// term averages over the deviation trace's joints, the realized term over
/// the recorded product strategies. Negative values are reported as-is.
pub fn policy_regret(
    history: &PlayHistory,
    game: &Game,
    player: Player,
    memory: usize,
    deviation: usize,
    opponent: Option<Learner>,
    perturb: Option<f64>,
) -> Result<f64> {
    let trace = deviation_trace(history, game, player, deviation, memory, opponent, perturb)?;
    policy_regret_from_trace(history, game, player, &trace)
}

/// Same as [`policy_regret`], reusing an already-built trace.
pub fn policy_regret_from_trace(
    history: &PlayHistory,
    game: &Game,
    player: Player,
    trace: &DeviationTrace,
) -> Result<f64> {
    let mut counterfactual = 0.0;
    let mut realized = 0.0;
    for t in 0..history.rounds {
        counterfactual += expected_utility(&trace.joints[t], game, player)?;
        let joint = product_distribution(&history.strategies1[t], &history.strategies2[t]);
        realized += expected_utility(&joint, game, player)?;
    }
    Ok(counterfactual - realized)
}

/// Window of the last `rule.memory()` own actions ending at 1-based round
/// `t`, with out-of-range positions clamped to the first action and
/// positions after `t - deviation_memory` replaced by `deviation`.
fn deviated_window<W: WindowUtility>(
    actions: &[usize],
    rule: &W,
    t: usize,
    deviation_memory: usize,
    deviation: usize,
) -> Vec<usize> {
    let m = rule.memory();
    (0..m)
        .map(|k| {
            let pos = (t + k + 1) as isize - m as isize; // 1-based position
            if deviation_memory > 0 && pos as i64 > t as i64 - deviation_memory as i64 {
                deviation
            } else if pos < 1 {
                actions[0]
            } else {
                actions[pos as usize - 1]
            }
        })
        .collect()
}

/// Realized cumulative utility of an action sequence under a window rule.
pub fn realized_reactive_utility<W: WindowUtility>(actions: &[usize], rule: &W) -> Result<f64> {
    let mut total = 0.0;
    for t in 1..=actions.len() {
        let w = deviated_window(actions, rule, t, 0, 0);
        total += rule.eval(&w)?;
    }
    Ok(total)
}

/// External regret against a reactive window utility: the comparator
/// re-evaluates the rule on the true prefix with only position `t` replaced.
pub fn external_regret_reactive<W: WindowUtility>(
    actions: &[usize],
    rule: &W,
    arity: usize,
) -> Result<f64> {
    let realized = realized_reactive_utility(actions, rule)?;
    let mut best = f64::NEG_INFINITY;
    for a in 0..arity {
        let mut total = 0.0;
        for t in 1..=actions.len() {
            let w = deviated_window(actions, rule, t, 1, a);
            total += rule.eval(&w)?;
        }
        best = best.max(total);
    }
    Ok(best - realized)
}

/// m-memory policy regret against a reactive window utility with respect to
/// one deviation action: the comparator replaces the last `memory` positions.
pub fn policy_regret_reactive<W: WindowUtility>(
    actions: &[usize],
    rule: &W,
    memory: usize,
    deviation: usize,
) -> Result<f64> {
    if memory == 0 {
        return Err(Error::BadParameter {
            name: "memory",
            value: 0.0,
        });
    }
    let realized = realized_reactive_utility(actions, rule)?;
    let mut counterfactual = 0.0;
    for t in 1..=actions.len() {
        let w = deviated_window(actions, rule, t, memory, deviation);
        counterfactual += rule.eval(&w)?;
    }
    Ok(counterfactual - realized)
}

/// Closed-form policy regret bound `||P_player|| * S_T + R_T`, using the
/// spectral norm of the player's utility matrix.
pub fn policy_regret_bound(game: &Game, player: Player, s_t: f64, r_t: f64) -> Result<f64> {
    if s_t < 0.0 || r_t < 0.0 {
        return Err(Error::BadParameter {
            name: "regret bound term",
            value: s_t.min(r_t),
        });
    }
    let norm = crate::game::spectral_norm(game.utility_matrix(player))?;
    Ok(norm * s_t + r_t)
}
