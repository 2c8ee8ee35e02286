use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use iterlab::{parse_config, run_scenario, write_outputs, Overrides};

#[derive(Parser)]
#[command(name = "iterlab", version, about = "Iterate-class analysis of constant-coefficient operator systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the derivative-decay exponent γ_P
    EstimateGamma(Common),
    /// Fit the weakness exponent h of Q against P
    EstimateH(Common),
    /// Ellipticity of the principal parts
    CheckElliptic(Common),
    /// Compare two systems both ways
    Compare(Common),
    /// Check the weight axioms
    WeightAxioms(Common),
    /// Young conjugate table and its invariants
    Conjugate(Common),
    /// Sweep the sup-over-j bound for Gevrey weights
    LemmaSweep(Common),
    /// L² norms of iterates on the box
    IterateNorms(Common),
    /// Iterate semi-norm for one λ
    Seminorm(Common),
    /// Beurling or Roumieu class membership
    Classify(Common),
    /// Check class inclusion on a test set
    VerifyInclusion(Common),
    /// Run every task in the scenario
    Run(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    radii: Option<usize>,
    #[arg(long)]
    directions: Option<usize>,
    #[arg(long)]
    alpha_max: Option<u32>,
    #[arg(long)]
    snap_den: Option<u64>,
    /// output directory; defaults to `[output] dir` or `iterlab-out`
    #[arg(long)]
    out: Option<PathBuf>,
}

fn split(c: Command) -> (Option<&'static str>, Common) {
    match c {
        Command::EstimateGamma(a) => (Some("estimate-gamma"), a),
        Command::EstimateH(a) => (Some("estimate-h"), a),
        Command::CheckElliptic(a) => (Some("check-elliptic"), a),
        Command::Compare(a) => (Some("compare"), a),
        Command::WeightAxioms(a) => (Some("weight-axioms"), a),
        Command::Conjugate(a) => (Some("conjugate"), a),
        Command::LemmaSweep(a) => (Some("lemma-sweep"), a),
        Command::IterateNorms(a) => (Some("iterate-norms"), a),
        Command::Seminorm(a) => (Some("seminorm"), a),
        Command::Classify(a) => (Some("classify"), a),
        Command::VerifyInclusion(a) => (Some("verify-inclusion"), a),
        Command::Run(a) => (None, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("ITERLAB_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let (only, args) = split(cli.command);
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.config.display());
            return ExitCode::from(2);
        }
    };
    let mut scenario = match parse_config(&text, args.config.parent()) {
        Ok(s) => s,
        Err(errs) => {
            for e in &errs.0 {
                eprintln!("{}: {e}", args.config.display());
            }
            return ExitCode::from(2);
        }
    };
    Overrides {
        seed: args.seed,
        radii: args.radii,
        directions: args.directions,
        alpha_max: args.alpha_max,
        snap_den: args.snap_den,
    }
    .apply(&mut scenario);
    let (report, timings) = run_scenario(&scenario, only);
    let dir = args
        .out
        .or_else(|| scenario.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("iterlab-out"));
    if let Err(e) = write_outputs(&dir, &report, &timings) {
        eprintln!("error: writing {}: {e}", dir.display());
        return ExitCode::from(2);
    }
    print!("{}", iterlab::summary(&report));
    ExitCode::from(report.exit_code() as u8)
}
