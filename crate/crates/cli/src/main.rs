//! `eeio`: build input-output models from data directories and report
//! footprints, contributions, endpoint correlations and lifecycle shares.
//!
//! Exit codes: 0 success, 1 numeric or output failure, 2 invalid input.

mod commands;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use table::Format;

#[derive(Parser)]
#[command(name = "eeio", version, about = "Environmentally-extended input-output footprints")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Assemble a model from a data directory.
    Build {
        data_dir: PathBuf,
        /// Model file to write; the assembly report goes next to it as
        /// `<stem>.report.json`.
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Indicator totals for a final demand scope.
    Footprint {
        model: PathBuf,
        /// `all`, `consumption`, or comma-separated category labels.
        #[arg(long, default_value = "consumption")]
        scope: String,
        /// Add a per-capita column for this population.
        #[arg(long, value_name = "POPULATION")]
        per_capita: Option<f64>,
        /// Mass unit for per-capita values.
        #[arg(long, default_value = "t")]
        per_capita_unit: String,
        #[command(flatten)]
        output: Output,
    },
    /// First-tier contribution analysis of one sector.
    Contribute {
        model: PathBuf,
        #[arg(long)]
        sector: String,
        /// Aggregation level; the fine classification when omitted.
        #[arg(long)]
        level: Option<String>,
        /// Long-format plot data (`group,indicator,share_percent`).
        #[arg(long)]
        plot: Option<PathBuf>,
        #[command(flatten)]
        output: Output,
    },
    /// Regress endpoint contribution shares on a midpoint's shares.
    Correlate {
        model: PathBuf,
        #[arg(long)]
        sector: String,
        #[arg(long)]
        level: Option<String>,
        /// X-axis indicator; the first midpoint indicator when omitted.
        #[arg(long)]
        x_indicator: Option<String>,
        /// Keep the direct emissions point in the regression.
        #[arg(long)]
        include_direct: bool,
        /// Scatter data (`indicator,group,x_percent,y_percent`).
        #[arg(long)]
        scatter: Option<PathBuf>,
        #[command(flatten)]
        output: Output,
    },
    /// Shares of a lifecycle component table.
    Lifecycle {
        components: PathBuf,
        #[command(flatten)]
        output: Output,
    },
}

#[derive(Args)]
struct Output {
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Write the result table here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), commands::Failure> {
    commands::configure_threads()?;
    match cli.command {
        Command::Build { data_dir, out } => commands::build(&data_dir, &out),
        Command::Footprint {
            model,
            scope,
            per_capita,
            per_capita_unit,
            output,
        } => commands::footprint(&model, &scope, per_capita, &per_capita_unit, output.format, output.out.as_deref()),
        Command::Contribute {
            model,
            sector,
            level,
            plot,
            output,
        } => commands::contribute(
            &model,
            &sector,
            level.as_deref(),
            plot.as_deref(),
            output.format,
            output.out.as_deref(),
        ),
        Command::Correlate {
            model,
            sector,
            level,
            x_indicator,
            include_direct,
            scatter,
            output,
        } => commands::correlate(
            &model,
            &commands::CorrelateOptions {
                sector,
                level,
                x_indicator,
                include_direct,
            },
            scatter.as_deref(),
            output.format,
            output.out.as_deref(),
        ),
        Command::Lifecycle { components, output } => {
            commands::lifecycle(&components, output.format, output.out.as_deref())
        }
    }
}
