//! Experiment harness for repeated-game policy-regret dynamics.
//!
//! Wraps the core library in an orchestration layer: run configurations,
//! the self-play loop, the incompatibility experiment, the worked example,
//! equilibrium checks over files, and CSV/JSON report emission. The
//! `policy-dyn` binary is a thin CLI over these functions.

pub mod config;
pub mod example;
pub mod incompat;
pub mod report;
pub mod sim;
pub mod sweep;

pub use config::{AlgoSpec, LearnerConfig, Mode, RunConfig};
pub use example::{example_game, example_pi, run_example, ExampleOutcome};
pub use incompat::{emit_incompat, run_arm, run_incompat, Arm, ArmReport};
pub use report::{emit_report, fmt_sig12, round_sig12, CheckpointRow, RunReport, CSV_HEADER};
pub use sim::{checkpoint_schedule, run_selfplay, run_selfplay_from_files, SelfPlayOutcome};
pub use sweep::{run_sweep, sweep_threads};
