use std::path::PathBuf;
use std::process::ExitCode;

use cavity_states::cli_runner::{exit_code, run, write_artifacts, Command, OutputFormat, ScenarioConfig};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "cavity-sim", version, about = "Resonances, extraction efficiencies and Wigner maps of an absorbing high-Q cavity")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Locate resonances and sweep the spectral response |D1|^-2.
    Resonances(Args),
    /// Extraction efficiency curve and mode couplings.
    Extraction(Args),
    /// Output Wigner function of the cat-generation scheme.
    CatDemo(Args),
    /// Output Wigner function for a cavity state and a channel list.
    WignerMap(Args),
}

#[derive(clap::Args)]
struct Args {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to the scenario's `output.directory`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Artifact formats to write; may be repeated.
    #[arg(long, value_enum)]
    format: Vec<Format>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
    Grid,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
            Format::Grid => OutputFormat::Grid,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, args) = match cli.command {
        Cmd::Resonances(a) => (Command::Resonances, a),
        Cmd::Extraction(a) => (Command::Extraction, a),
        Cmd::CatDemo(a) => (Command::CatDemo, a),
        Cmd::WignerMap(a) => (Command::WignerMap, a),
    };
    let result = ScenarioConfig::from_path(&args.config).and_then(|cfg| {
        let formats: Vec<OutputFormat> = args.format.iter().map(|&f| f.into()).collect();
        let out = run(cmd, &cfg, &formats)?;
        let dir = args.out.clone().unwrap_or_else(|| cfg.output.directory.clone());
        let written = write_artifacts(&dir, &out)?;
        Ok((out, written))
    });
    match result {
        Ok((out, written)) => {
            for w in &out.warnings {
                eprintln!("warning: {w}");
            }
            println!("{}", out.summary);
            for p in written {
                println!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
