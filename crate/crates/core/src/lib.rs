//! Repeated two-player bimatrix games under online learning.
//!
//! The library simulates repeated play between online learners, measures
//! external and m-memory policy regret with counterfactual opponent replay,
//! and constructs and certifies policy equilibria via Markov chains over the
//! joint action space and LP feasibility.
//!
//! Module map:
//! - [`game`]: games, mixed strategies, joint distributions, expectations.
//! - [`learners`]: MWU, Exp3, fixed actions, the CCE tracker, and the
//!   reactive adversary; all deterministic functions of `(seed, history)`.
//! - [`regret`]: external and policy regret, deviation traces by replay.
//! - [`markov`]: empirical/induced/deviation chains, stationary solving.
//! - [`simplex`]: the dense two-phase LP used by `markov` and `equilibria`.
//! - [`equilibria`]: CCE and policy-equilibrium certification, slack
//!   diagnostics, CCE sampling.

pub mod equilibria;
pub mod error;
pub mod game;
pub mod learners;
pub mod markov;
pub mod regret;
pub mod simplex;

pub use error::{Error, Result};
pub use game::{
    expected_utility, l1_distance, perturb_strategy, product_distribution, spectral_norm, Game,
    JointDistribution, MixedStrategy, Player,
};
pub use learners::{
    fixed_action_strategy, round_rng, sample_action, Feedback, Learner, LearnerKind,
    ReactiveUtility, TrackerMode, WindowUtility,
};
pub use markov::{
    deviation_chain, deviation_stationary, empirical_chain, empirical_function_distribution,
    enumerate_function_pairs, induced_chain, observed_chain, solve_constrained_stationary,
    stationary_residual, FunctionPairDistribution, TransitionMatrix,
};
pub use regret::{
    deviation_empirical, deviation_trace, external_regret, external_regret_reactive,
    policy_regret, policy_regret_bound, policy_regret_reactive, DeviationTrace, DeviationTracker,
    OpponentReplayer, PlayHistory,
};

pub use equilibria::{
    equilibrium_slack, is_cce, is_policy_equilibrium, random_cce, DeviationSlack,
    EquilibriumVerdict,
};
