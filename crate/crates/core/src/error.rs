//! Error type shared by the library.

use std::fmt;

/// Errors produced by validation, replay, and the LP solver.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A vector or matrix had the wrong size for the operation.
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    /// A probability vector did not sum to 1 within tolerance.
    NotADistribution { what: &'static str, sum: f64 },
    /// A probability vector had a negative or non-finite entry.
    BadProbability {
        what: &'static str,
        index: usize,
        value: f64,
    },
    /// A payoff entry fell outside [0, 1].
    UtilityOutOfRange {
        player: u8,
        row: usize,
        col: usize,
        value: f64,
    },
    /// A utility fed to a learner was NaN, negative, or above 1.
    BadUtility { index: usize, value: f64 },
    /// The perturbation mixing weight sqrt(|A| eps) left [0, 1].
    BadMixingWeight { weight: f64 },
    /// Power iteration did not converge; carries the last iterate and residual.
    PowerIterationStalled { residual: f64, iterate: Vec<f64> },
    /// An action index exceeded the action-set size.
    ActionOutOfRange { action: usize, arity: usize },
    /// A scalar parameter was out of its admissible range.
    BadParameter { name: &'static str, value: f64 },
    /// A reactive-utility window had the wrong length.
    BadWindow { expected: usize, actual: usize },
    /// The tracker oracle supplied an empirical distribution mid-epoch.
    OracleOutsideBoundary { round: u64 },
    /// The tracker reached an epoch boundary without an oracle value.
    MissingOracle { round: u64 },
    /// A step was applied to a learner of the wrong kind.
    WrongLearnerKind { expected: &'static str },
    /// The function-pair space exceeds the enumeration cap.
    FunctionSpaceTooLarge { size: u128, cap: u128 },
    /// A transition-matrix row did not sum to 1 within tolerance.
    RowNotStochastic { row: usize, sum: f64 },
    /// An operation needed more rounds than the input provides.
    TooFewRounds { needed: usize, actual: usize },
    /// The LP solver failed numerically; carries diagnostics.
    LpFailure { detail: String },
    /// A constructed stationary distribution failed its residual check.
    StationarityViolated { residual: f64 },
    /// Counterfactual replay was requested but no replayer was supplied.
    ReplayUnavailable,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch {
                what,
                expected,
                actual,
            } => write!(f, "{what}: expected size {expected}, got {actual}"),
            Error::NotADistribution { what, sum } => {
                write!(f, "{what}: entries sum to {sum}, not 1")
            }
            Error::BadProbability { what, index, value } => {
                write!(f, "{what}: entry {index} is {value}")
            }
            Error::UtilityOutOfRange {
                player,
                row,
                col,
                value,
            } => write!(
                f,
                "utility u{player}[{row}][{col}] = {value} outside [0, 1]"
            ),
            Error::BadUtility { index, value } => {
                write!(f, "utility feedback entry {index} is {value}")
            }
            Error::BadMixingWeight { weight } => {
                write!(f, "perturbation mixing weight {weight} outside [0, 1]")
            }
            Error::PowerIterationStalled { residual, .. } => {
                write!(f, "power iteration stalled at residual {residual}")
            }
            Error::ActionOutOfRange { action, arity } => {
                write!(f, "action {action} out of range for {arity} actions")
            }
            Error::BadParameter { name, value } => write!(f, "parameter {name} = {value} invalid"),
            Error::BadWindow { expected, actual } => {
                write!(f, "window length {actual}, rule expects {expected}")
            }
            Error::OracleOutsideBoundary { round } => {
                write!(f, "empirical distribution supplied mid-epoch at round {round}")
            }
            Error::MissingOracle { round } => {
                write!(f, "epoch boundary at round {round} reached without an oracle value")
            }
            Error::WrongLearnerKind { expected } => {
                write!(f, "step applied to wrong learner kind, expected {expected}")
            }
            Error::FunctionSpaceTooLarge { size, cap } => {
                write!(f, "function space has {size} pairs, cap is {cap}")
            }
            Error::RowNotStochastic { row, sum } => {
                write!(f, "transition row {row} sums to {sum}")
            }
            Error::TooFewRounds { needed, actual } => {
                write!(f, "need at least {needed} rounds, got {actual}")
            }
            Error::LpFailure { detail } => write!(f, "LP solver failure: {detail}"),
            Error::StationarityViolated { residual } => {
                write!(f, "constructed stationary distribution has residual {residual}")
            }
            Error::ReplayUnavailable => write!(f, "opponent replayer unavailable in game mode"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
