//! `outage-sentinel`: simulate PMU data, detect and localize line outages,
//! print distribution-factor tables and run N-1 evaluations.

mod commands;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use outage_core::detector::{DetectorParams, SecondPeakRule};
use outage_core::filters::FilterParams;
use outage_core::locator::PowerChangeWindows;

use crate::error::EXIT_USAGE;

#[derive(Parser)]
#[command(
    name = "outage-sentinel",
    version,
    about = "Line outage detection and localization from PMU streams"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write the PMU dataset CSV.
    Simulate {
        /// Scenario JSON.
        #[arg(long)]
        config: PathBuf,
        /// Network JSON or `fixture:<name>`; overrides the scenario's own.
        #[arg(long)]
        network: Option<String>,
        /// Noise seed; overrides the scenario's own.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Detect events in a dataset and print them as JSON.
    Detect {
        /// Dataset CSV.
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        detector: DetectorArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Localize an event by power change and/or the max-frequency baseline.
    Locate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        network: String,
        /// Event JSON from `detect`; without it the first detected event is used.
        #[arg(long)]
        event: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = MethodArg::Both)]
        method: MethodArg,
        /// Actual outaged branch; adds `error_miles` to each report.
        #[arg(long)]
        truth: Option<u32>,
        #[command(flatten)]
        detector: DetectorArgs,
        #[command(flatten)]
        windows: WindowArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print PTDF or LODF tables as CSV.
    Factors {
        #[arg(long)]
        network: String,
        /// Outaged branch id (LODF table).
        #[arg(
            long,
            conflicts_with = "transaction",
            required_unless_present = "transaction"
        )]
        outage: Option<u32>,
        /// Transfer from bus A to bus B (PTDF table).
        #[arg(long, num_args = 2, value_names = ["FROM", "TO"])]
        transaction: Option<Vec<u32>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every non-islanding single-line outage and tabulate the results.
    Evaluate {
        #[arg(long)]
        network: String,
        /// Fraction of branches carrying a PMU channel.
        #[arg(long, default_value_t = 1.0)]
        coverage: f64,
        /// Noise seeds per outage.
        #[arg(long, default_value_t = 1)]
        seeds: usize,
        /// Base seed for noise and for the monitored-set draw.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Keep every tripped line out of the monitored set.
        #[arg(long)]
        exclude_outaged: bool,
        #[arg(long, default_value_t = 0.001)]
        sigma_hz: f64,
        #[arg(long, default_value_t = 0.5)]
        sigma_mw: f64,
        #[arg(long, default_value_t = 0.005)]
        spike_probability: f64,
        /// Run cases on one thread.
        #[arg(long)]
        sequential: bool,
        #[command(flatten)]
        detector: DetectorArgs,
        #[command(flatten)]
        windows: WindowArgs,
        /// Per-case rows CSV.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Group summary JSON; printed to stderr when absent.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Turn a localization report into GeoJSON.
    ExportMap {
        #[arg(long)]
        localization: PathBuf,
        #[arg(long)]
        network: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Both,
    PowerChange,
    Baseline,
}

#[derive(Clone, Copy, ValueEnum)]
enum SecondPeakArg {
    OppositeSign,
    SameSign,
}

#[derive(Args)]
struct DetectorArgs {
    #[arg(long, default_value_t = 7)]
    median_window: usize,
    #[arg(long, default_value_t = 31)]
    mean_window: usize,
    /// Samples allowed between the first and second peak.
    #[arg(long, default_value_t = 20)]
    detection_window: usize,
    /// Hz.
    #[arg(long, default_value_t = 0.0045)]
    first_threshold: f64,
    /// Hz.
    #[arg(long, default_value_t = 0.0025)]
    second_threshold: f64,
    /// Seconds.
    #[arg(long, default_value_t = 1.0)]
    cluster_window: f64,
    #[arg(long, default_value_t = 1)]
    min_channels: usize,
    #[arg(long, value_enum, default_value_t = SecondPeakArg::OppositeSign)]
    second_peak: SecondPeakArg,
}

impl DetectorArgs {
    fn params(&self) -> DetectorParams {
        DetectorParams {
            filter: FilterParams {
                median_window: self.median_window,
                mean_window: self.mean_window,
            },
            detection_window: self.detection_window,
            first_threshold: self.first_threshold,
            second_threshold: self.second_threshold,
            cluster_window: self.cluster_window,
            min_channels: self.min_channels,
            second_peak: match self.second_peak {
                SecondPeakArg::OppositeSign => SecondPeakRule::OppositeSign,
                SecondPeakArg::SameSign => SecondPeakRule::SameSign,
            },
        }
    }
}

#[derive(Args)]
struct WindowArgs {
    #[arg(long, default_value_t = 50)]
    pre_length: usize,
    #[arg(long, default_value_t = 10)]
    pre_gap: usize,
    #[arg(long, default_value_t = 25)]
    post_gap: usize,
    #[arg(long, default_value_t = 50)]
    post_length: usize,
    /// Median window applied to power before differencing.
    #[arg(long, default_value_t = 7)]
    power_median_window: usize,
}

impl WindowArgs {
    fn windows(&self) -> PowerChangeWindows {
        PowerChangeWindows {
            pre_length: self.pre_length,
            pre_gap: self.pre_gap,
            post_gap: self.post_gap,
            post_length: self.post_length,
            median_window: self.power_median_window,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE as u8 } else { 0 });
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
