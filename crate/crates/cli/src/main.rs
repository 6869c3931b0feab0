mod commands;
mod output;
mod reproduce;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use output::{CliError, Log};

#[derive(Parser, Debug)]
#[command(name = "pecs", version, about = "Polynomial-phase sequence design and radar waveform analysis")]
struct Cli {
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true)]
    quiet: bool,
    #[arg(long, global = true)]
    json_logs: bool,
    /// Record wall-clock times (makes artifacts non-reproducible).
    #[arg(long, global = true)]
    timing: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a designer and write the sequence, trace and autocorrelation.
    Design(commands::DesignArgs),
    /// Closed-form chirplike codes.
    Codes {
        #[command(subcommand)]
        action: CodesAction,
    },
    /// Ambiguity function of a sequence file.
    AnalyzeAf(commands::AfArgs),
    /// Matched-filter peak loss, PSLR and ISLR against Doppler.
    AnalyzeDoppler(commands::DopplerArgs),
    /// Monte-Carlo peak cross-correlation between two sequence populations.
    Stats(commands::StatsArgs),
    /// Simulate and process one FMCW or PMCW frame.
    Scenario(commands::ScenarioArgs),
    /// Re-run a published experiment at desk scale.
    Reproduce(reproduce::ReproduceArgs),
}

#[derive(Subcommand, Debug)]
enum CodesAction {
    Gen(commands::CodesArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(v) = std::env::var("PECS_THREADS") {
        let threads = match v.parse::<usize>() {
            Ok(t) => t,
            Err(_) => return fail(CliError::Config(format!("PECS_THREADS must be an integer, got {v:?}"))),
        };
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            return fail(CliError::Config(e.to_string()));
        }
    }
    let log = Log { quiet: cli.quiet, json: cli.json_logs };
    let ctx = commands::Ctx { out: cli.out, timing: cli.timing, log };
    let result = match cli.command {
        Command::Design(a) => commands::design(&ctx, a),
        Command::Codes { action: CodesAction::Gen(a) } => commands::codes(&ctx, a),
        Command::AnalyzeAf(a) => commands::analyze_af(&ctx, a),
        Command::AnalyzeDoppler(a) => commands::analyze_doppler(&ctx, a),
        Command::Stats(a) => commands::stats(&ctx, a),
        Command::Scenario(a) => commands::scenario(&ctx, a),
        Command::Reproduce(a) => reproduce::run(&ctx, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e),
    }
}

fn fail(e: CliError) -> ExitCode {
    eprintln!("{}", e.to_json());
    ExitCode::from(e.exit_code() as u8)
}
