//! `smdma`: data generation, training, calibration, sweeps, plots and
//! channel sampling for the two-user S-MDMA simulator.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use smdma::error::ErrorKind;

mod commands;
mod manifest;
mod plot;
mod workspace;

#[derive(Debug, Parser)]
#[command(name = "smdma", version, about = "Two-user semantic broadcast simulator over a Shadowed-Rician link")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write synthetic correlated image pairs and an index file.
    GenData(GenDataArgs),
    /// Train the semantic codec or the channel codec.
    Train(TrainArgs),
    /// Compute the dataset sensitivity ranking and write it to a file.
    Calibrate(CalibrateArgs),
    /// Evaluate a grid of SNRs, ratios, sortings and seeds into sweep.csv.
    Sweep(SweepArgs),
    /// Render a sweep CSV as an SVG line plot.
    Plot(PlotArgs),
    /// Draw Shadowed-Rician power gains and report their mean and KS statistic.
    SampleChannel(SampleChannelArgs),
    /// Re-run a recorded command and verify its outputs byte for byte.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ConfigArgs {
    /// Experiment config file; built-in defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one config key, e.g. --set train.epochs=10.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct GenDataArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub count: usize,
    #[arg(long, default_value_t = 32)]
    pub size: usize,
    #[arg(long, default_value_t = 0.25)]
    pub edit_fraction: f64,
    #[arg(long, default_value_t = 1)]
    pub channels: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Overwrite an existing dataset.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Stage {
    Semantic,
    Channel,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long, value_enum)]
    pub stage: Stage,
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Workspace directory for model files.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Ranking file to write; its directory is the workspace.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// SNR grid in dB: comma list and/or lo:hi:step ranges, `inf` for an ideal link.
    #[arg(long, allow_hyphen_values = true)]
    pub snr: Option<String>,
    /// Retention ratios in (0, 1].
    #[arg(long)]
    pub ratio: Option<String>,
    /// sensitivity, random, or both comma-separated.
    #[arg(long)]
    pub sorting: Option<String>,
    /// on, off, or both comma-separated.
    #[arg(long)]
    pub normalization: Option<String>,
    #[arg(long)]
    pub seeds: Option<usize>,
    /// Model workspace; defaults to --out.
    #[arg(long)]
    pub models: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct PlotArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_parser = ["snr_db", "ratio"])]
    pub x: String,
    #[arg(long, value_parser = ["psnr_db", "ssim", "mse"])]
    pub y: String,
    #[arg(long, default_value = "user")]
    pub group: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SampleChannelArgs {
    /// b0,m,omega
    #[arg(long, default_value = "0.158,19.4,1.29")]
    pub params: String,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Usage => 2,
        ErrorKind::Config => 3,
        ErrorKind::Data => 4,
        ErrorKind::Numeric => 5,
    }
}

fn one_line(msg: &str) -> String {
    msg.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind as K;
            if matches!(e.kind(), K::DisplayHelp | K::DisplayVersion | K::DisplayHelpOnMissingArgumentOrSubcommand) {
                let _ = e.print();
                return if e.kind() == K::DisplayHelpOnMissingArgumentOrSubcommand { ExitCode::from(2) } else { ExitCode::SUCCESS };
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            eprintln!("error: {}", one_line(first.trim_start_matches("error: ")));
            return ExitCode::from(2);
        }
    };
    match commands::run(&cli, &argv, &commands::Context::default()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", one_line(&e.to_string()));
            ExitCode::from(exit_code(e.kind()))
        }
    }
}
