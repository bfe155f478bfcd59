//! Command-line front end: Monte Carlo simulation, scripted attacks, security
//! bounds, threshold-contagion distributions, parameter sweeps and searches.
//!
//! Every subcommand prints JSON (CSV for `sweep`) to stdout or, with `--out`,
//! to a file. All randomness derives from one master seed; the `SEED`
//! environment variable, when set, takes precedence over `--seed` so batch
//! drivers can redirect runs without touching command lines. Exit code is 0
//! on success and 2 on any configuration or usage error.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use pbcast::adversaries::{
    contagion_consistency_trials, contagion_totality_trials, sieve_attack_trials, TwoPhaseTable,
};
use pbcast::bounds::{
    blackjack_distribution, combined_security, contagion_mu, contagion_split_mass,
    ready_spread_distribution, sieve_consistency_bound,
};
use pbcast::epidemics::{gamma_distribution, GameParams};
use pbcast::optimizer::{optimize_params, sweep, SweepAxis, SweepRequest};
use pbcast::simnet::{run_honest_trials, StackMode};
use pbcast::{ProtocolParams, SystemConfig};
use serde_json::json;

#[derive(Parser)]
#[command(name = "pbcast", version, about = "Broadcast simulator and security bound calculator")]
struct Cli {
    /// Write output to this file instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run seeded full-stack broadcasts and report property violation counts.
    Simulate(SimulateArgs),
    /// Run a scripted attack against one layer and compare it to its bound.
    Attack(AttackArgs),
    /// Evaluate the security bound report for one parameter point.
    Bound(BoundArgs),
    /// Solve the threshold-contagion game and print per-round distributions.
    Gamma(GammaArgs),
    /// Evaluate bounds along a parameter axis and print CSV rows.
    Sweep(SweepArgs),
    /// Search for the best parameters at a fixed per-process budget.
    Optimize(OptimizeArgs),
}

/// Sample sizes and thresholds shared by every protocol subcommand.
#[derive(Args)]
struct ParamArgs {
    /// Gossip sample size.
    #[arg(long, default_value_t = 15)]
    g: usize,
    /// Echo sample size.
    #[arg(long, default_value_t = 20)]
    e: usize,
    /// Echoes required to deliver.
    #[arg(long, default_value_t = 14)]
    e_hat: usize,
    /// Ready sample size.
    #[arg(long, default_value_t = 20)]
    r: usize,
    /// Ready messages required to turn ready.
    #[arg(long, default_value_t = 10)]
    r_hat: usize,
    /// Delivery sample size.
    #[arg(long, default_value_t = 20)]
    d: usize,
    /// Ready messages required to deliver.
    #[arg(long, default_value_t = 14)]
    d_hat: usize,
}

impl ParamArgs {
    fn build(&self) -> Result<ProtocolParams> {
        Ok(ProtocolParams::new(
            self.g, self.e, self.e_hat, self.r, self.r_hat, self.d, self.d_hat,
        )?)
    }
}

#[derive(Args)]
struct SeedArg {
    /// Master seed; the SEED environment variable overrides this flag.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SeedArg {
    fn resolve(&self) -> Result<u64> {
        match std::env::var("SEED") {
            Ok(text) => text
                .trim()
                .parse()
                .with_context(|| format!("SEED must be an unsigned integer, got {text:?}")),
            Err(_) => Ok(self.seed),
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// Number of processes.
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Fraction of Byzantine processes.
    #[arg(long, default_value_t = 0.0)]
    f: f64,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    /// What the Byzantine processes do during the runs.
    #[arg(long, value_enum, default_value_t = AdversaryArg::Passive)]
    adversary: AdversaryArg,
    #[command(flatten)]
    seed: SeedArg,
    #[command(flatten)]
    params: ParamArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum AdversaryArg {
    /// Byzantine processes stay silent.
    Passive,
}

#[derive(Args)]
struct AttackArgs {
    #[arg(long, value_enum)]
    kind: AttackKind,
    #[arg(long, default_value_t = 16)]
    n: usize,
    #[arg(long, default_value_t = 0.25)]
    f: f64,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    /// JSON file holding the two-phase delivery table (sieve attack only).
    #[arg(long, value_name = "PATH")]
    table: Option<PathBuf>,
    #[command(flatten)]
    seed: SeedArg,
    #[command(flatten)]
    params: ParamArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum AttackKind {
    /// Two-phase echo-table attack against Sieve consistency.
    Sieve,
    /// Ready flood for a second message against Contagion consistency.
    ContagionConsistency,
    /// Round-by-round delivery split against Contagion totality.
    ContagionTotality,
}

#[derive(Args)]
struct BoundArgs {
    #[arg(long, default_value_t = 1024)]
    n: usize,
    #[arg(long, default_value_t = 0.1)]
    f: f64,
    #[command(flatten)]
    params: ParamArgs,
}

#[derive(Args)]
struct GammaArgs {
    /// Number of nodes.
    #[arg(long)]
    n: usize,
    /// Predecessor sample size.
    #[arg(long)]
    r: usize,
    /// Link probability.
    #[arg(long)]
    l: f64,
    /// Number of player rounds.
    #[arg(long)]
    k: usize,
    /// Nodes the player infects per round.
    #[arg(long)]
    s: usize,
    /// Infected predecessors required to catch the infection.
    #[arg(long)]
    rhat: usize,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_enum)]
    axis: AxisArg,
    /// Grid points along the axis, comma separated.
    #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
    grid: Vec<f64>,
    #[arg(long, default_value_t = 1024)]
    n: usize,
    #[arg(long, default_value_t = 0.1)]
    f: f64,
    /// Average sample size for axes that do not sweep it.
    #[arg(long, default_value_t = 32)]
    s: usize,
    /// Size tuples examined per optimized grid point.
    #[arg(long, default_value_t = 24)]
    budget: usize,
    /// Evaluate the given parameters as-is instead of optimizing each point.
    #[arg(long, default_value_t = false)]
    fixed: bool,
    #[command(flatten)]
    params: ParamArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    S,
    N,
    F,
}

impl From<AxisArg> for SweepAxis {
    fn from(axis: AxisArg) -> Self {
        match axis {
            AxisArg::S => SweepAxis::S,
            AxisArg::N => SweepAxis::N,
            AxisArg::F => SweepAxis::F,
        }
    }
}

#[derive(Args)]
struct OptimizeArgs {
    #[arg(long, default_value_t = 1024)]
    n: usize,
    #[arg(long, default_value_t = 0.1)]
    f: f64,
    /// Average sample size: G + E + R + D = 4s.
    #[arg(long, default_value_t = 32)]
    s: usize,
    /// Size tuples examined before the search stops.
    #[arg(long, default_value_t = 40)]
    budget: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let text = match cli.command {
        Command::Simulate(args) => simulate(args)?,
        Command::Attack(args) => attack(args)?,
        Command::Bound(args) => bound(args)?,
        Command::Gamma(args) => gamma(args)?,
        Command::Sweep(args) => run_sweep(args)?,
        Command::Optimize(args) => optimize(args)?,
    };
    emit(cli.out.as_deref(), &text)
}

fn emit(out: Option<&std::path::Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, format!("{text}\n"))
            .with_context(|| format!("writing {}", path.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn simulate(args: SimulateArgs) -> Result<String> {
    let config = SystemConfig::new(args.n, args.f)?;
    let params = args.params.build()?;
    let seed = args.seed.resolve()?;
    let AdversaryArg::Passive = args.adversary;
    let stats = run_honest_trials(&config, &params, StackMode::Full, args.trials, seed)?;
    let freq = |count: usize| count as f64 / stats.trials.max(1) as f64;
    let value = json!({
        "n": args.n,
        "f": args.f,
        "seed": seed,
        "adversary": "passive",
        "trials": stats.trials,
        "counts": {
            "no_duplication_violations": stats.no_duplication_violations,
            "integrity_violations": stats.integrity_violations,
            "validity_violations": stats.validity_violations,
            "consistency_violations": stats.consistency_violations,
            "totality_violations": stats.totality_violations,
            "disconnected_gossip": stats.disconnected_gossip,
            "connected_delivery_violations": stats.connected_delivery_violations,
        },
        "frequencies": {
            "no_duplication_violations": freq(stats.no_duplication_violations),
            "integrity_violations": freq(stats.integrity_violations),
            "validity_violations": freq(stats.validity_violations),
            "consistency_violations": freq(stats.consistency_violations),
            "totality_violations": freq(stats.totality_violations),
            "disconnected_gossip": freq(stats.disconnected_gossip),
        },
    });
    Ok(serde_json::to_string_pretty(&value)?)
}

fn attack(args: AttackArgs) -> Result<String> {
    let config = SystemConfig::new(args.n, args.f)?;
    let params = args.params.build()?;
    let seed = args.seed.resolve()?;
    if args.trials == 0 {
        bail!("at least one trial is required");
    }
    let c = config.num_correct();
    let (label, wins, ln_bound) = match args.kind {
        AttackKind::Sieve => {
            let table = match &args.table {
                Some(path) => {
                    let text = fs::read_to_string(path)
                        .with_context(|| format!("reading {}", path.display()))?;
                    let table = TwoPhaseTable::from_json(&text)?;
                    table.validate(c)?;
                    table
                }
                None => TwoPhaseTable::default_split(c),
            };
            let wins = sieve_attack_trials(&config, &params, &table, args.trials, seed)?;
            let ln = sieve_consistency_bound(c, args.f, params.e, params.e_hat)?;
            ("sieve", wins, ln)
        }
        AttackKind::ContagionConsistency => {
            let wins = contagion_consistency_trials(&config, &params, args.trials, seed)?;
            let spread = ready_spread_distribution(args.n, c, params.r, params.r_hat)?;
            let ln = contagion_mu(&spread, args.n, c, params.d, params.d_hat)?;
            ("contagion-consistency", wins, ln)
        }
        AttackKind::ContagionTotality => {
            let wins = contagion_totality_trials(&config, &params, args.trials, seed)?;
            let blackjack = blackjack_distribution(c, args.n, params.r, params.r_hat)?;
            let ln = contagion_split_mass(args.n, c, params.d, params.d_hat, &blackjack)?;
            ("contagion-totality", wins, ln)
        }
    };
    let value = json!({
        "kind": label,
        "n": args.n,
        "f": args.f,
        "seed": seed,
        "trials": args.trials,
        "wins": wins,
        "win_frequency": wins as f64 / args.trials as f64,
        "ln_bound": ln_bound.min(0.0),
        "log10_bound": ln_bound.min(0.0) / std::f64::consts::LN_10,
        "bound_vacuous": ln_bound >= 0.0,
    });
    Ok(serde_json::to_string_pretty(&value)?)
}

fn bound(args: BoundArgs) -> Result<String> {
    let config = SystemConfig::new(args.n, args.f)?;
    let params = args.params.build()?;
    let report = combined_security(&config, &params)?;
    Ok(serde_json::to_string_pretty(&report.to_json())?)
}

fn gamma(args: GammaArgs) -> Result<String> {
    let params = GameParams {
        n: args.n,
        r: args.r,
        l: args.l,
        k: args.k,
        s: args.s,
        r_hat: args.rhat,
    };
    let distribution = gamma_distribution(&params)?;
    Ok(serde_json::to_string_pretty(&distribution.to_json())?)
}

fn run_sweep(args: SweepArgs) -> Result<String> {
    let fixed = if args.fixed {
        Some(args.params.build()?)
    } else {
        None
    };
    let request = SweepRequest {
        axis: args.axis.into(),
        grid: args.grid,
        n: args.n,
        f: args.f,
        s: args.s,
        budget: args.budget,
        fixed,
    };
    Ok(sweep(&request)?.trim_end().to_string())
}

fn optimize(args: OptimizeArgs) -> Result<String> {
    let outcome = optimize_params(args.n, args.f, args.s, args.budget)?;
    let value = json!({
        "n": args.n,
        "f": args.f,
        "s": args.s,
        "budget": args.budget,
        "evaluations": outcome.evaluations,
        "params": outcome.params,
        "report": outcome.report.to_json(),
    });
    Ok(serde_json::to_string_pretty(&value)?)
}
