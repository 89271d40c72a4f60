use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hiercap::commands::{self, EvalOptions};
use hiercap::config::RunConfig;

#[derive(Parser)]
#[command(name = "hiercap", version, about = "Boundary-aware hierarchical video captioning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic segmented-video corpus.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model; writes config, vocabulary, log and checkpoints.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// `key=value`, overriding the config file.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Caption one VFEA file or every video in a manifest.
    Caption {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long, default_value_t = 6)]
        beam: usize,
    },
    /// Decode a manifest and score it against reference captions.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        captions: PathBuf,
        #[arg(long, default_value_t = 6)]
        beam: usize,
        /// Boundary annotations; defaults to boundaries.tsv beside the manifest.
        #[arg(long)]
        boundaries: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        tolerance: usize,
        /// Report directory; defaults to the checkpoint's directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed of the random-gate boundary baseline.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Per-word split signals and attention, and per-frame β.
    Inspect {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long, default_value_t = 6)]
        beam: usize,
    },
}

fn run(cli: Cli) -> hiercap::Result<()> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Synth { spec, out: dir } => {
            commands::synth(&spec, &dir)?;
        }
        Command::Train { config, overrides } => {
            let cfg = RunConfig::load(&config, &overrides)?;
            commands::train(&cfg, &mut out)?;
        }
        Command::Caption {
            checkpoint,
            features,
            beam,
        } => commands::caption(&checkpoint, &features, beam, &mut out)?,
        Command::Eval {
            checkpoint,
            manifest,
            captions,
            beam,
            boundaries,
            tolerance,
            out: dir,
            seed,
        } => {
            let opts = EvalOptions {
                beam,
                boundaries,
                tolerance,
                out_dir: dir,
                seed,
            };
            let report = commands::eval(&checkpoint, &manifest, &captions, &opts)?;
            let _ = out.write_all(report.to_text().as_bytes());
        }
        Command::Inspect {
            checkpoint,
            features,
            beam,
        } => commands::inspect(&checkpoint, &features, beam, &mut out)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {msg}", e.kind());
            ExitCode::FAILURE
        }
    }
}
