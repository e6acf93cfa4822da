use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use lattice_trace_cli::{execute, parse_config, Command, OutputFormat, EXIT_CONFIG};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CommandArg {
    Green,
    DetGrid,
    Zeros,
    Audit,
    Bounds,
    OracleCompare,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

/// Trace formulae and eigenvalue bounds for discrete Schrödinger operators.
#[derive(Debug, Parser)]
#[command(name = "lattice-trace", version)]
struct Cli {
    #[arg(value_enum)]
    command: CommandArg,
    /// TOML or JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Report destination.
    #[arg(long)]
    output: PathBuf,
    /// Overrides `output_format` from the configuration.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let text = match std::fs::read_to_string(&cli.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("cannot read {}: {e}", cli.config.display());
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    let mut cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("configuration error: {e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    if let Some(f) = cli.format {
        cfg.output_format = match f {
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Json => OutputFormat::Json,
        };
    }
    let command = match cli.command {
        CommandArg::Green => Command::Green,
        CommandArg::DetGrid => Command::DetGrid,
        CommandArg::Zeros => Command::Zeros,
        CommandArg::Audit => Command::Audit,
        CommandArg::Bounds => Command::Bounds,
        CommandArg::OracleCompare => Command::OracleCompare,
    };
    ExitCode::from(execute(command, &cfg, &cli.output) as u8)
}
