use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use policy_dyn::{emit_incompat, emit_report, run_incompat, run_selfplay_from_files, Arm, Mode};
use policy_dyn_core::equilibria::{is_cce, EquilibriumVerdict, ANALYTIC_TOL};
use policy_dyn_core::game::{Game, JointDistribution};
use policy_dyn_core::markov::FunctionPairDistribution;
use serde_json::json;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

/// Repeated bimatrix games under online learning: policy regret meters and
/// policy-equilibrium certification.
#[derive(Parser)]
#[command(name = "policy-dyn", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a self-play simulation described by a JSON config file.
    Simulate(SimulateArgs),
    /// Run the external-vs-policy regret incompatibility experiment.
    Incompat(IncompatArgs),
    /// Certify an equilibrium from files.
    CheckEq(CheckEqArgs),
    /// Reproduce the built-in worked example and verify its values.
    Example(ExampleArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Path to the run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args)]
struct IncompatArgs {
    /// Horizon T.
    #[arg(long)]
    rounds: u64,
    /// Adversary memory m (at least 3).
    #[arg(long)]
    memory: usize,
    /// Which arm to run; both when omitted.
    #[arg(long)]
    arm: Option<Arm>,
    /// RNG seed for the learner arm.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path prefix for <prefix>.csv and <prefix>.json.
    #[arg(long)]
    out: String,
}

#[derive(Args)]
struct CheckEqArgs {
    /// Game file (JSON).
    #[arg(long)]
    game: PathBuf,
    /// Function-pair distribution file: policy-equilibrium mode.
    #[arg(long, conflicts_with = "sigma")]
    pi: Option<PathBuf>,
    /// Joint distribution file: CCE mode.
    #[arg(long)]
    sigma: Option<PathBuf>,
    /// Certification tolerance.
    #[arg(long, default_value_t = ANALYTIC_TOL)]
    tol: f64,
    /// Break witness ties by maximizing total welfare.
    #[arg(long, default_value_t = false)]
    maximize_welfare: bool,
}

#[derive(Args)]
struct ExampleArgs {
    /// Tolerance for the CCE rejection check.
    #[arg(long, default_value_t = ANALYTIC_TOL)]
    cce_tol: f64,
}

fn read(path: &PathBuf) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn verdict_json(verdict: &EquilibriumVerdict, game: &Game) -> serde_json::Value {
    let violations: Vec<serde_json::Value> = verdict
        .violations
        .iter()
        .map(|v| {
            json!({
                "player": v.player.number(),
                "deviation": game.action_label(v.player, v.deviation),
                "slack": policy_dyn::round_sig12(v.slack),
            })
        })
        .collect();
    json!({
        "equilibrium": verdict.is_equilibrium,
        "witness": verdict.witness.as_ref().map(|w| {
            w.probs().iter().map(|&p| policy_dyn::round_sig12(p)).collect::<Vec<_>>()
        }),
        "violations": violations,
    })
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let config = policy_dyn::RunConfig::from_json(&read(&args.config)?)?;
    if config.mode != Mode::Selfplay {
        bail!("simulate handles mode \"selfplay\"; use the dedicated subcommand instead");
    }
    let outcome = run_selfplay_from_files(&config)?;
    let (csv, json_path) = emit_report(&outcome.report, &config.out)?;
    eprintln!("wrote {} and {}", csv.display(), json_path.display());
    Ok(())
}

fn cmd_incompat(args: IncompatArgs) -> Result<()> {
    let reports = run_incompat(args.rounds, args.memory, args.seed, args.arm)?;
    let (csv, json_path) = emit_incompat(&reports, &args.out)?;
    for r in &reports {
        println!(
            "{:5?} arm: external regret {:.3}, max policy regret {:.3}",
            r.arm, r.external_regret, r.policy_regret_max
        );
    }
    eprintln!("wrote {} and {}", csv.display(), json_path.display());
    Ok(())
}

fn cmd_check_eq(args: CheckEqArgs) -> Result<()> {
    let game = Game::from_json(&read(&args.game)?)?;
    let verdict = match (&args.pi, &args.sigma) {
        (Some(pi_path), None) => {
            let pi = FunctionPairDistribution::from_json(&read(pi_path)?)?;
            if pi.n1 != game.n1() || pi.n2 != game.n2() {
                bail!("pi dimensions {}x{} do not match the game", pi.n1, pi.n2);
            }
            policy_dyn_core::equilibria::is_policy_equilibrium_opt(
                &pi,
                &game,
                args.tol,
                args.maximize_welfare,
            )?
        }
        (None, Some(sigma_path)) => {
            let sigma = JointDistribution::from_json(&read(sigma_path)?)?;
            if sigma.n1 != game.n1() || sigma.n2 != game.n2() {
                bail!(
                    "sigma dimensions {}x{} do not match the game",
                    sigma.n1,
                    sigma.n2
                );
            }
            is_cce(&sigma, &game, args.tol)?
        }
        _ => return Err(anyhow!("pass exactly one of --pi or --sigma")),
    };
    println!("{}", serde_json::to_string_pretty(&verdict_json(&verdict, &game))?);
    Ok(())
}

fn cmd_example(args: ExampleArgs) -> Result<bool> {
    let outcome = policy_dyn::run_example(args.cce_tol)?;
    let game = policy_dyn::example_game();
    println!("worked example: 2x2 game, row responder pair (const a; a->c, b->d)");
    for c in &outcome.checks {
        println!("  [{}] {:<22} {}", if c.passed { "ok" } else { "FAIL" }, c.name, c.detail);
    }
    let machine = json!({
        "policy_equilibrium": verdict_json(&outcome.policy_verdict, &game),
        "cce": verdict_json(&outcome.cce_verdict, &game),
        "witness_value": policy_dyn::round_sig12(outcome.witness_value),
        "deviation_value_b": policy_dyn::round_sig12(outcome.deviation_value_b),
        "cce_slack_b": policy_dyn::round_sig12(outcome.cce_slack_b),
    });
    println!("{}", serde_json::to_string_pretty(&machine)?);
    if !outcome.all_passed() {
        let failed: Vec<&str> = outcome
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect();
        eprintln!("failed checks: {}", failed.join(", "));
    }
    Ok(outcome.all_passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => cmd_simulate(args).map(|_| true),
        Command::Incompat(args) => cmd_incompat(args).map(|_| true),
        Command::CheckEq(args) => cmd_check_eq(args).map(|_| true),
        Command::Example(args) => cmd_example(args),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
