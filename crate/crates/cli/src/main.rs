use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use bellkit_cli::config::{self, RawConfig};
use bellkit_cli::run;
use bellkit_core::Error;

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

/// Couplings, CHSH analysis and Bell-test simulations.
#[derive(Parser)]
#[command(name = "bellkit", version)]
struct Cli {
    /// 64-bit seed for every random stream.
    #[arg(long, global = true)]
    seed: Option<String>,
    /// Output prefix: writes <prefix>.json and <prefix>.<table>.csv. Prints JSON to stdout when absent.
    #[arg(long, global = true)]
    out: Option<String>,
    /// Key/value configuration file; command-line flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// All eight CHSH variants of a behavior JSON file.
    Chsh { behavior: String },
    /// Joint-distribution (coupling) feasibility of a behavior JSON file.
    Fine { behavior: String },
    /// Singlet predictions for spin-measurement angles in degrees.
    Singlet {
        /// a1,a2,b1,b2 in degrees.
        #[arg(long, allow_hyphen_values = true)]
        angles: Option<String>,
    },
    /// The six-state hidden-variable counterexample and its joint probability.
    Counterexample,
    /// Disjoint-sample vs shared-spreadsheet CHSH estimates over repeated runs.
    Spreadsheet {
        /// s2 (population S = 2), s1 (S = 1) or lf (the counterexample).
        #[arg(long)]
        preset: Option<String>,
        /// Trials per context.
        #[arg(long)]
        n: Option<String>,
        #[arg(long)]
        runs: Option<String>,
    },
    /// Contextual model with instrument variables and coincidence conditioning.
    Contextual {
        #[arg(long)]
        preset: Option<String>,
        /// Trials per context.
        #[arg(long)]
        n: Option<String>,
        /// Instrument-threshold correlation coefficient in [-1, 1].
        #[arg(long, allow_hyphen_values = true)]
        malus: Option<String>,
        /// Polarizer angles a1,a2,b1,b2 in degrees.
        #[arg(long, allow_hyphen_values = true)]
        angles: Option<String>,
    },
}

fn merge(cli: &Cli) -> Result<RawConfig, Vec<config::Diagnostic>> {
    let (mut raw, errors) = match &cli.config {
        Some(path) => match fs::read_to_string(path) {
            Ok(text) => RawConfig::parse(&text),
            Err(e) => {
                return Err(vec![config::Diagnostic {
                    origin: None,
                    key: None,
                    message: format!("cannot read {}: {e}", path.display()),
                }])
            }
        },
        None => (RawConfig::default(), Vec::new()),
    };
    if let Some(s) = &cli.seed {
        raw.set_flag("seed", s, "seed");
    }
    if let Some(o) = &cli.out {
        raw.set_flag("output", o, "out");
    }
    match &cli.command {
        None => {}
        Some(Command::Chsh { behavior }) => {
            raw.set_flag("experiment", "chsh", "experiment");
            raw.set_flag("model.behavior", behavior, "behavior");
        }
        Some(Command::Fine { behavior }) => {
            raw.set_flag("experiment", "fine", "experiment");
            raw.set_flag("model.behavior", behavior, "behavior");
        }
        Some(Command::Singlet { angles }) => {
            raw.set_flag("experiment", "singlet", "experiment");
            if let Some(a) = angles {
                raw.set_flag("angles", a, "angles");
            }
        }
        Some(Command::Counterexample) => raw.set_flag("experiment", "counterexample", "experiment"),
        Some(Command::Spreadsheet { preset, n, runs }) => {
            raw.set_flag("experiment", "spreadsheet", "experiment");
            for (key, flag, value) in [
                ("model.preset", "preset", preset),
                ("N", "n", n),
                ("runs", "runs", runs),
            ] {
                if let Some(v) = value {
                    raw.set_flag(key, v, flag);
                }
            }
        }
        Some(Command::Contextual {
            preset,
            n,
            malus,
            angles,
        }) => {
            raw.set_flag("experiment", "contextual", "experiment");
            for (key, flag, value) in [
                ("model.preset", "preset", preset),
                ("N", "n", n),
                ("model.malus", "malus", malus),
                ("angles", "angles", angles),
            ] {
                if let Some(v) = value {
                    raw.set_flag(key, v, flag);
                }
            }
        }
    }
    if errors.is_empty() {
        Ok(raw)
    } else {
        // File-level errors are reported together with validation errors.
        let more = config::validate(&raw).err().map(|e| e.0).unwrap_or_default();
        Err(errors.into_iter().chain(more).collect())
    }
}

fn main() -> ExitCode {
    let started = Instant::now();
    let cli = Cli::parse();
    let cfg = match merge(&cli).and_then(|raw| config::validate(&raw).map_err(|e| e.0)) {
        Ok(cfg) => cfg,
        Err(mut diags) => {
            diags.sort_by_key(|d| match d.origin {
                Some(config::Origin::Line(n)) => (0, n),
                Some(config::Origin::Flag(_)) => (1, 0),
                None => (2, 0),
            });
            eprintln!("{}", config::ConfigErrors(diags));
            return ExitCode::from(EXIT_CONFIG);
        }
    };

    let output = match run::run(&cfg) {
        Ok(o) => o,
        Err(e @ Error::LpNonConvergence { .. }) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_NUMERICAL);
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_FAILURE);
        }
    };
    let envelope = run::envelope(&cfg, &output, started);
    match &cfg.output {
        Some(prefix) => {
            if let Err(e) = run::write_outputs(prefix, &envelope, &output) {
                eprintln!("error: {e}");
                return ExitCode::from(EXIT_FAILURE);
            }
        }
        None => println!("{}", run::pretty(&envelope)),
    }
    ExitCode::SUCCESS
}
