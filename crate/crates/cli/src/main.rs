//! `bogolab`: runs experiment plans and writes CSV plus a JSON manifest.

use std::path::PathBuf;
use std::process::ExitCode;

use bogolab_core::harness::{run, write_outputs, ExperimentKind, ExperimentPlan, Status};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bogolab", version, about = "Exact, pair-correlated and Bogoliubov lattice Bose gas experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Randomized residual checks of the projector identities.
    Fuzz(Common),
    /// Hartree trajectory only.
    Hartree(Common),
    /// Exact versus pair-projected dynamics across a density sweep.
    SweepMain(Common),
    /// Pair-projected versus Bogoliubov sector hierarchies.
    SweepBog(Common),
    /// Micro/macro excitation density comparison.
    SweepDensity(Common),
    /// Counting functionals against their Gronwall envelopes.
    Envelope(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment plan (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to the plan's `out`, then `./out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Grid points run concurrently.
    #[arg(long)]
    jobs: Option<usize>,
    /// Overrides every seed in the grid.
    #[arg(long)]
    seed: Option<u64>,
}

impl Command {
    fn split(self) -> (ExperimentKind, Common) {
        match self {
            Command::Fuzz(c) => (ExperimentKind::IdentityFuzz, c),
            Command::Hartree(c) => (ExperimentKind::HartreeOnly, c),
            Command::SweepMain(c) => (ExperimentKind::MainTheoremSweep, c),
            Command::SweepBog(c) => (ExperimentKind::BogoliubovSweep, c),
            Command::SweepDensity(c) => (ExperimentKind::MicroMacroSweep, c),
            Command::Envelope(c) => (ExperimentKind::EnvelopeReport, c),
        }
    }
}

fn load(kind: ExperimentKind, args: &Common) -> Result<ExperimentPlan, String> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| format!("cannot read {}: {e}", args.config.display()))?;
    let mut plan = ExperimentPlan::from_json(&text).map_err(|e| e.to_string())?;
    if plan.experiment != kind {
        return Err(format!(
            "plan is a `{}` experiment, subcommand expects `{}`",
            plan.experiment.name(),
            kind.name()
        ));
    }
    if let Some(seed) = args.seed {
        plan = plan.with_seed(seed);
    }
    if args.jobs == Some(0) {
        return Err("--jobs must be >= 1".into());
    }
    Ok(plan)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = cli.command.split();
    let plan = match load(kind, &args) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let outcome = match run(&plan, args.jobs) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let dir = args
        .out
        .or_else(|| plan.out.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let (csv, manifest) = match write_outputs(&dir, &plan, &outcome) {
        Ok(paths) => paths,
        Err(e) => {
            eprintln!("error: cannot write outputs: {e}");
            return ExitCode::from(1);
        }
    };
    for p in &outcome.points {
        let status = match p.status {
            Status::Ok => "ok",
            Status::CheckFailed => "check-failed",
            Status::Failed => "failed",
        };
        let c = &p.point.config;
        print!("point {} (M={}, N={}, T={}): {status} in {:.2}s", p.point.index, c.m, c.n, c.t, p.runtime_s);
        match &p.error {
            Some(e) => println!(" ({e})"),
            None => println!(),
        }
        for w in &p.warnings {
            println!("  warning: {w}");
        }
    }
    if let Some(f) = &outcome.fit {
        println!("log-log slope {:.4} (intercept {:.4}, residual {:.2e})", f.slope, f.intercept, f.residual);
    }
    if let Some(e) = &outcome.fit_error {
        println!("no fit: {e}");
    }
    if let Some(d) = outcome.strictly_decreasing {
        println!("strictly decreasing in rho: {d}");
    }
    println!("wrote {} and {}", csv.display(), manifest.display());
    ExitCode::from(outcome.exit_code() as u8)
}
