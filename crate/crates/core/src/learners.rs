//! Online learners and adversary constructions.
//!
//! Every learner is a value: advancing it is a pure function of the old state
//! and the observed feedback, and all randomness is drawn from a per-round
//! stream derived from `(seed, round)`. That makes counterfactual replay
//! possible: cloning a snapshot and re-running modified rounds consumes the
//! same random numbers as the realized run.

use crate::error::{Error, Result};
use crate::game::{JointDistribution, MixedStrategy, Player};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Deterministic per-round random stream. The same `(seed, round)` pair
/// always yields the same stream, independent of call order.
pub fn round_rng(seed: u64, round: u64) -> ChaCha8Rng {
    // splitmix64 finalizer over seed and round so neighboring rounds decorrelate
    let mut z = seed ^ round.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    ChaCha8Rng::seed_from_u64(z)
}

/// Draws an action by inverse CDF over the canonical action order.
pub fn sample_action<R: Rng>(strategy: &MixedStrategy, rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in strategy.probs().iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    strategy.arity() - 1
}

/// Draws a joint action index by inverse CDF over the canonical joint order.
pub fn sample_joint<R: Rng>(joint: &JointDistribution, rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in joint.probs().iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    joint.len() - 1
}

/// Dirac strategy on a fixed action.
pub fn fixed_action_strategy(action: usize, arity: usize) -> Result<MixedStrategy> {
    if action >= arity {
        return Err(Error::ActionOutOfRange { action, arity });
    }
    Ok(MixedStrategy::dirac(action, arity))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LearnerKind {
    Mwu,
    Exp3,
    Fixed,
    CceTracker,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackerMode {
    Track,
    PendingSwitch,
    Exp3Mode,
}

/// Feedback observed at the end of a round.
#[derive(Debug, Clone, Copy)]
pub enum Feedback<'a> {
    /// Full-information: the utility of every own action against the
    /// opponent's realized action.
    Full(&'a [f64]),
    /// Bandit: only the realized utility of the played action.
    Bandit { played: usize, utility: f64 },
    /// Tracker round: bandit feedback plus, at epoch boundaries only, the
    /// oracle's running empirical distribution of play.
    Tracker {
        played: usize,
        utility: f64,
        sigma_hat: Option<&'a JointDistribution>,
    },
    /// No feedback needed (fixed action).
    None,
}

#[derive(Debug, Clone)]
struct TrackerState {
    target: JointDistribution,
    player: Player,
    epoch_len: u64,
    /// 1-based index of the epoch currently being played.
    epoch: u64,
    mode: TrackerMode,
    exp3_weights: Vec<f64>,
    gamma: f64,
    shared_seed: u64,
}

#[derive(Debug, Clone)]
enum Inner {
    Mwu { weights: Vec<f64>, eta: f64 },
    Exp3 { weights: Vec<f64>, gamma: f64 },
    Fixed { action: usize, arity: usize },
    Tracker(Box<TrackerState>),
}

/// State of one online learner.
#[derive(Debug, Clone)]
pub struct Learner {
    seed: u64,
    horizon: u64,
    step: u64,
    inner: Inner,
}

fn renormalize(weights: &mut [f64]) {
    let sum: f64 = weights.iter().sum();
    for w in weights {
        *w /= sum;
    }
}

fn exp3_mixed(weights: &[f64], gamma: f64) -> MixedStrategy {
    let k = weights.len() as f64;
    let sum: f64 = weights.iter().sum();
    let probs = weights
        .iter()
        .map(|w| (1.0 - gamma) * w / sum + gamma / k)
        .collect();
    MixedStrategy::new(probs).expect("exp3 mixing preserves the simplex")
}

impl Learner {
    /// Multiplicative weights with step size `eta_scale / sqrt(T)`.
    pub fn mwu(arity: usize, horizon: u64, eta_scale: f64, seed: u64) -> Result<Learner> {
        if arity == 0 {
            return Err(Error::ActionOutOfRange { action: 0, arity });
        }
        let eta = eta_scale / (horizon as f64).sqrt();
        if !eta.is_finite() || eta <= 0.0 {
            return Err(Error::BadParameter {
                name: "eta",
                value: eta,
            });
        }
        Ok(Learner {
            seed,
            horizon,
            step: 0,
            inner: Inner::Mwu {
                weights: vec![1.0 / arity as f64; arity],
                eta,
            },
        })
    }

    /// Exp3 with exploration floor `gamma / k` and `gamma = gamma_scale / sqrt(T)`.
    pub fn exp3(arity: usize, horizon: u64, gamma_scale: f64, seed: u64) -> Result<Learner> {
        if arity == 0 {
            return Err(Error::ActionOutOfRange { action: 0, arity });
        }
        let gamma = gamma_scale / (horizon as f64).sqrt();
        if !gamma.is_finite() || gamma <= 0.0 || gamma > 1.0 {
            return Err(Error::BadParameter {
                name: "gamma",
                value: gamma,
            });
        }
        Ok(Learner {
            seed,
            horizon,
            step: 0,
            inner: Inner::Exp3 {
                weights: vec![1.0 / arity as f64; arity],
                gamma,
            },
        })
    }

    pub fn fixed(action: usize, arity: usize, horizon: u64, seed: u64) -> Result<Learner> {
        if action >= arity {
            return Err(Error::ActionOutOfRange { action, arity });
        }
        Ok(Learner {
            seed,
            horizon,
            step: 0,
            inner: Inner::Fixed { action, arity },
        })
    }

    /// CCE-tracking learner. Plays the target's own marginal, drawing the
    /// joint recommendation from a seed shared by both players, and tests the
    /// oracle's empirical distribution against `|A| / (j T^(1/6))` at the end
    /// of each length-`ceil(sqrt(T))` epoch. One failed test arms the switch;
    /// the switch to Exp3 happens at the end of the following epoch.
    pub fn cce_tracker(
        target: JointDistribution,
        player: Player,
        horizon: u64,
        gamma_scale: f64,
        shared_seed: u64,
        seed: u64,
    ) -> Result<Learner> {
        let arity = match player {
            Player::One => target.n1,
            Player::Two => target.n2,
        };
        let gamma = gamma_scale / (horizon as f64).sqrt();
        if !gamma.is_finite() || gamma <= 0.0 || gamma > 1.0 {
            return Err(Error::BadParameter {
                name: "gamma",
                value: gamma,
            });
        }
        let epoch_len = (horizon as f64).sqrt().ceil() as u64;
        Ok(Learner {
            seed,
            horizon,
            step: 0,
            inner: Inner::Tracker(Box::new(TrackerState {
                target,
                player,
                epoch_len,
                epoch: 1,
                mode: TrackerMode::Track,
                exp3_weights: vec![1.0 / arity as f64; arity],
                gamma,
                shared_seed,
            })),
        })
    }

    pub fn kind(&self) -> LearnerKind {
        match self.inner {
            Inner::Mwu { .. } => LearnerKind::Mwu,
            Inner::Exp3 { .. } => LearnerKind::Exp3,
            Inner::Fixed { .. } => LearnerKind::Fixed,
            Inner::Tracker(_) => LearnerKind::CceTracker,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn arity(&self) -> usize {
        match &self.inner {
            Inner::Mwu { weights, .. } => weights.len(),
            Inner::Exp3 { weights, .. } => weights.len(),
            Inner::Fixed { arity, .. } => *arity,
            Inner::Tracker(t) => match t.player {
                Player::One => t.target.n1,
                Player::Two => t.target.n2,
            },
        }
    }

    /// Whether the next feedback must be the full utility column.
    pub fn needs_full_info(&self) -> bool {
        matches!(self.inner, Inner::Mwu { .. })
    }

    /// History-independent learners emit the same strategy no matter what the
    /// opponent played; counterfactual replay is the identity for them. The
    /// tracker counts as history-independent over any window shorter than an
    /// epoch: substituting recent opponent actions cannot move its switch
    /// decision earlier than the end of the running epoch.
    pub fn replay_invariant(&self) -> bool {
        matches!(self.inner, Inner::Fixed { .. } | Inner::Tracker(_))
    }

    /// The strategy the learner plays this round.
    pub fn strategy(&self) -> MixedStrategy {
        match &self.inner {
            Inner::Mwu { weights, .. } => MixedStrategy::from_weights(weights),
            Inner::Exp3 { weights, gamma } => exp3_mixed(weights, *gamma),
            Inner::Fixed { action, arity } => MixedStrategy::dirac(*action, *arity),
            Inner::Tracker(t) => match t.mode {
                TrackerMode::Track | TrackerMode::PendingSwitch => t.target.marginal(t.player),
                TrackerMode::Exp3Mode => exp3_mixed(&t.exp3_weights, t.gamma),
            },
        }
    }

    /// The joint recommendation the learner is following, when its play this
    /// round is correlated through the shared seed rather than independent.
    pub fn correlated_joint(&self) -> Option<&JointDistribution> {
        match &self.inner {
            Inner::Tracker(t) if t.mode != TrackerMode::Exp3Mode => Some(&t.target),
            _ => None,
        }
    }

    pub fn tracker_mode(&self) -> Option<TrackerMode> {
        match &self.inner {
            Inner::Tracker(t) => Some(t.mode),
            _ => None,
        }
    }

    /// Samples the action for 1-based round `round`.
    ///
    /// `played` is the distribution actually in force this round (it differs
    /// from [`Learner::strategy`] when the harness perturbs play). Trackers in
    /// a correlated mode ignore it and take their coordinate of the shared
    /// joint draw, so that both players realize the target distribution.
    pub fn sample_round_action(&self, round: u64, played: &MixedStrategy) -> usize {
        match &self.inner {
            Inner::Tracker(t) if t.mode != TrackerMode::Exp3Mode => {
                let mut rng = round_rng(t.shared_seed, round);
                let joint = sample_joint(&t.target, &mut rng);
                match t.player {
                    Player::One => joint / t.target.n2,
                    Player::Two => joint % t.target.n2,
                }
            }
            _ => {
                let mut rng = round_rng(self.seed, round);
                sample_action(played, &mut rng)
            }
        }
    }

    /// One MWU update from a full utility column; returns the new strategy.
    pub fn mwu_step(&mut self, utilities: &[f64]) -> Result<MixedStrategy> {
        let Inner::Mwu { weights, eta } = &mut self.inner else {
            return Err(Error::WrongLearnerKind { expected: "mwu" });
        };
        if utilities.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                what: "utility vector",
                expected: weights.len(),
                actual: utilities.len(),
            });
        }
        for (i, &u) in utilities.iter().enumerate() {
            if !u.is_finite() || !(0.0..=1.0).contains(&u) {
                return Err(Error::BadUtility { index: i, value: u });
            }
        }
        let eta = *eta;
        for (w, &u) in weights.iter_mut().zip(utilities) {
            *w *= (eta * u).exp();
        }
        renormalize(weights);
        self.step += 1;
        Ok(MixedStrategy::from_weights(match &self.inner {
            Inner::Mwu { weights, .. } => weights,
            _ => unreachable!(),
        }))
    }

    /// One Exp3 update from bandit feedback; returns the new mixed strategy.
    pub fn exp3_step(&mut self, played: usize, utility: f64) -> Result<MixedStrategy> {
        let Inner::Exp3 { weights, gamma } = &mut self.inner else {
            return Err(Error::WrongLearnerKind { expected: "exp3" });
        };
        let gamma = *gamma;
        exp3_update(weights, gamma, played, utility)?;
        self.step += 1;
        Ok(self.strategy())
    }

    /// One tracker round: bandit feedback every round, oracle value at epoch
    /// boundaries only. Returns the strategy for the next round.
    pub fn cce_tracker_step(
        &mut self,
        sigma_hat: Option<&JointDistribution>,
        played: usize,
        utility: f64,
    ) -> Result<MixedStrategy> {
        let horizon = self.horizon;
        let round = self.step + 1;
        let Inner::Tracker(t) = &mut self.inner else {
            return Err(Error::WrongLearnerKind {
                expected: "cce-tracker",
            });
        };
        // Feedback for the round just played, under the mode it was played in.
        if t.mode == TrackerMode::Exp3Mode {
            exp3_update(&mut t.exp3_weights, t.gamma, played, utility)?;
        }
        let boundary = round % t.epoch_len == 0;
        match (sigma_hat, boundary) {
            (Some(_), false) => return Err(Error::OracleOutsideBoundary { round }),
            (None, true) if t.mode != TrackerMode::Exp3Mode => {
                return Err(Error::MissingOracle { round })
            }
            (sigma, true) => {
                if let Some(sigma) = sigma {
                    let dist = crate::game::l1_distance(sigma.probs(), t.target.probs())?;
                    let threshold = t.target.len() as f64
                        / (t.epoch as f64 * (horizon as f64).powf(1.0 / 6.0));
                    t.mode = match t.mode {
                        TrackerMode::Track if dist > threshold => TrackerMode::PendingSwitch,
                        TrackerMode::Track => TrackerMode::Track,
                        TrackerMode::PendingSwitch => TrackerMode::Exp3Mode,
                        TrackerMode::Exp3Mode => TrackerMode::Exp3Mode,
                    };
                }
                t.epoch += 1;
            }
            (None, false) => {}
        }
        self.step += 1;
        Ok(self.strategy())
    }

    /// Advances the learner with whatever feedback its kind expects.
    pub fn observe(&mut self, feedback: Feedback<'_>) -> Result<MixedStrategy> {
        match (&self.inner, feedback) {
            (Inner::Mwu { .. }, Feedback::Full(u)) => self.mwu_step(u),
            (Inner::Exp3 { .. }, Feedback::Bandit { played, utility }) => {
                self.exp3_step(played, utility)
            }
            (Inner::Fixed { .. }, _) => {
                self.step += 1;
                Ok(self.strategy())
            }
            (
                Inner::Tracker(_),
                Feedback::Tracker {
                    played,
                    utility,
                    sigma_hat,
                },
            ) => self.cce_tracker_step(sigma_hat, played, utility),
            (Inner::Mwu { .. }, _) => Err(Error::WrongLearnerKind { expected: "mwu" }),
            (Inner::Exp3 { .. }, _) => Err(Error::WrongLearnerKind { expected: "exp3" }),
            (Inner::Tracker(_), _) => Err(Error::WrongLearnerKind {
                expected: "cce-tracker",
            }),
        }
    }
}

fn exp3_update(weights: &mut [f64], gamma: f64, played: usize, utility: f64) -> Result<()> {
    let k = weights.len();
    if played >= k {
        return Err(Error::ActionOutOfRange {
            action: played,
            arity: k,
        });
    }
    if !utility.is_finite() || !(0.0..=1.0).contains(&utility) {
        return Err(Error::BadUtility {
            index: played,
            value: utility,
        });
    }
    let sum: f64 = weights.iter().sum();
    let p = (1.0 - gamma) * weights[played] / sum + gamma / k as f64;
    if p <= 0.0 {
        // The exploration floor keeps p >= gamma/k; reaching here is a bug.
        return Err(Error::BadParameter {
            name: "exp3 sampling probability",
            value: p,
        });
    }
    weights[played] *= (gamma * utility / (k as f64 * p)).exp();
    renormalize(weights);
    Ok(())
}

/// The reactive adversary of the incompatibility construction.
///
/// Over binary actions, the rule pays 1 when the previous `m - 1` actions are
/// all 1 and the current action breaks the streak, 1/2 when the whole window
/// is 1s, and 0 otherwise. Requires `m >= 3` for the case split to be
/// well-formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReactiveUtility {
    memory: usize,
}

/// Utility that depends on the player's own last `memory()` actions.
pub trait WindowUtility {
    fn memory(&self) -> usize;
    fn eval(&self, window: &[usize]) -> Result<f64>;
}

impl ReactiveUtility {
    pub fn new(memory: usize) -> Result<ReactiveUtility> {
        if memory < 3 {
            return Err(Error::BadParameter {
                name: "reactive memory",
                value: memory as f64,
            });
        }
        Ok(ReactiveUtility { memory })
    }
}

impl WindowUtility for ReactiveUtility {
    fn memory(&self) -> usize {
        self.memory
    }

    fn eval(&self, window: &[usize]) -> Result<f64> {
        if window.len() != self.memory {
            return Err(Error::BadWindow {
                expected: self.memory,
                actual: window.len(),
            });
        }
        for &a in window {
            if a > 1 {
                return Err(Error::ActionOutOfRange {
                    action: a,
                    arity: 2,
                });
            }
        }
        let m = self.memory;
        let head_all_ones = window[..m - 1].iter().all(|&a| a == 1);
        if head_all_ones && window[m - 1] != window[m - 2] {
            Ok(1.0)
        } else if head_all_ones && window[m - 1] == 1 {
            Ok(0.5)
        } else {
            Ok(0.0)
        }
    }
}
