use std::path::PathBuf;
use std::process::ExitCode;

use beamtrack_cli::{cmd_bench, cmd_synth, cmd_track, load_config, CliError, TrackOptions};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "beamtrack",
    version,
    about = "Track a buckling beam across grayscale frames"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Track every numbered PNG in a directory.
    Track {
        dir: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory (default: <dir>/results).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write annotated overlay frames.
        #[arg(long)]
        overlay: bool,
        #[arg(long)]
        relocate_per_frame: bool,
        /// Process frames on a single thread.
        #[arg(long)]
        sequential: bool,
    },
    /// Render a synthetic sequence with ground truth.
    Synth {
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Measure single-threaded pipeline throughput.
    Bench {
        dir: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Track {
            dir,
            config,
            out,
            overlay,
            relocate_per_frame,
            sequential,
        } => {
            let opts = TrackOptions {
                config_path: config,
                out_dir: out,
                overlay,
                relocate_per_frame,
                parallel: !sequential,
                ..TrackOptions::new(dir)
            };
            let outcome = cmd_track(&opts)?;
            let r = &outcome.report;
            println!(
                "{} frames, {} ok, {} excluded",
                outcome.samples.len(),
                r.ok_samples,
                r.excluded_samples
            );
            println!(
                "classification: {} ({} crossings, {:.3} Hz)",
                r.classification.as_str(),
                r.crossing_count,
                r.transition_rate_hz
            );
            println!("results written to {}", outcome.out_dir.display());
        }
        Command::Synth { spec, out } => {
            let truths = cmd_synth(&spec, &out)?;
            println!("{} frames written to {}", truths.len(), out.display());
        }
        Command::Bench { dir, config, json } => {
            let cfg = load_config(config.as_deref())?;
            let report = cmd_bench(&dir, &cfg)?;
            if json {
                let mut value = serde_json::to_value(&report).expect("report serialises");
                value.as_object_mut().map(|o| o.remove("samples"));
                println!("{}", serde_json::to_string_pretty(&value).expect("json"));
            } else {
                print!("{}", report.render());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("beamtrack: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
