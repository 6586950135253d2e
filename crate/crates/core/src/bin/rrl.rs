use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rrl::cli::{render_csv, run, Settings};
use rrl::Error;

#[derive(Parser)]
#[command(name = "rrl", version, about = "Asynchronous quantum repeater rate model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one point or a sweep and write CSV
    Run {
        #[command(flatten)]
        settings: Settings,
        /// key = value file with the same keys as the long flags
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn execute(settings: Settings, config: Option<PathBuf>) -> Result<(), Error> {
    let file = match config {
        Some(path) => {
            let text = std::fs::read_to_string(&path).map_err(|e| {
                Error::Config(format!("{}: {e}", path.display()))
            })?;
            Settings::from_kv_text(&text, &path.display().to_string())?
        }
        None => Settings::default(),
    };
    let spec = settings.or(file).into_spec()?;
    let rows = run(&spec)?;
    let csv = render_csv(&spec, &rows);
    match &spec.output {
        Some(path) => std::fs::write(path, csv)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display()))),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Command::Run { settings, config } = cli.command;
    match execute(settings, config) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rrl: {e}");
            ExitCode::from(2)
        }
    }
}
