use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nwr_core::arc::{ReflexNetwork, WeightsFile};
use nwr_core::config::RunConfig;
use nwr_core::experiments::{
    run_compare, run_curve, run_ss, run_train, run_ts, surrogate_ramp, two_plateau, write_output, ExperimentReport,
};
use nwr_core::stimulus::{load_trace, StimulusTrace};
use nwr_core::Error;

mod live;

const EXIT_CHECK: u8 = 2;
const EXIT_USAGE: u8 = 64;
const EXIT_DATA: u8 = 65;
const EXIT_SOFTWARE: u8 = 70;

#[derive(Parser)]
#[command(name = "nwr", version, about = "Nociceptive withdrawal-reflex experiments")]
struct Cli {
    /// Run configuration (JSON); omitted fields take their defaults
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured RNG seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default: the configured `out_dir`)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct WeightsArg {
    /// Weights JSON written by `train` or `curve`
    #[arg(long)]
    weights: PathBuf,
}

#[derive(Args)]
struct TraceArg {
    /// `t_s,temp_C` CSV (optionally gzipped); defaults to the built-in surrogate trace
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Train the sensory-to-interneuron weights
    Train,
    /// Calibrate the decoder and sweep the reflex-strength curve
    Curve(WeightsArg),
    /// Spatial summation on a ramp trace and its clipped copy
    Ss {
        #[command(flatten)]
        weights: WeightsArg,
        #[command(flatten)]
        trace: TraceArg,
    },
    /// Temporal summation of sub-threshold pulse trains
    Ts(WeightsArg),
    /// Run the network and the three baselines on one trace
    Compare {
        #[command(flatten)]
        weights: WeightsArg,
        #[command(flatten)]
        trace: TraceArg,
    },
    /// Process a live `t_s,temp_C` feed into ND-JSON events
    Stream {
        #[command(flatten)]
        weights: WeightsArg,
        /// `-` for stdin, or a TCP address `host:port`
        #[arg(long, default_value = "-")]
        source: String,
    },
    /// Write the surrogate stimulus traces as CSV
    Fixtures,
}

/// Why a command stopped, mapped onto the process exit status.
enum Failure {
    Usage(String),
    Data(String),
    Check,
    Internal(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter { .. } | Error::ContractViolation(_) | Error::EmptyTrace => {
                Failure::Usage(e.to_string())
            }
            Error::CalibrationFailure(_) => {
                eprintln!("FAIL calibration: {e}");
                Failure::Check
            }
            Error::MissingFile(_)
            | Error::NonMonotoneTimestamps { .. }
            | Error::NonNumericField { .. }
            | Error::MalformedTrace(_)
            | Error::TemperatureOutOfBounds(_)
            | Error::Json(_)
            | Error::Io(_) => Failure::Data(e.to_string()),
            Error::IntegrationFault { .. } | Error::CalibrationViolation { .. } | Error::UnknownSynapse(_) => {
                Failure::Internal(e.to_string())
            }
        }
    }
}

type Outcome = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("NWR_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check) => ExitCode::from(EXIT_CHECK),
        Err(Failure::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Data(msg)) => {
            eprintln!("data error: {msg}");
            ExitCode::from(EXIT_DATA)
        }
        Err(Failure::Internal(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_SOFTWARE)
        }
    }
}

fn load_config(cli: &Cli) -> std::result::Result<RunConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.rng_seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.to_string_lossy().into_owned();
    }
    Ok(cfg)
}

fn load_network(cfg: &RunConfig, path: &Path) -> std::result::Result<ReflexNetwork, Failure> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()).into());
    }
    let text = std::fs::read_to_string(path).map_err(Error::from)?;
    let file = WeightsFile::from_json(&text)?;
    Ok(cfg.network_from(&file)?)
}

fn load_or(
    cfg: &RunConfig,
    arg: &TraceArg,
    fallback: fn(f64) -> nwr_core::Result<StimulusTrace>,
) -> Result<StimulusTrace, Failure> {
    Ok(match &arg.trace {
        Some(path) => load_trace(path, cfg.sample_rate_hz)?,
        None => fallback(cfg.sample_rate_hz)?,
    })
}

/// Prints one line per check and writes `<id>_report.json`.
fn finish(cfg: &RunConfig, report: &ExperimentReport) -> Outcome {
    for c in &report.checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    for n in &report.notes {
        log::info!("{n}");
    }
    write_output(Path::new(&cfg.out_dir), &format!("{}_report.json", report.experiment), &report.to_json())?;
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Check)
    }
}

fn run(cli: Cli) -> Outcome {
    let cfg = load_config(&cli)?;
    let out = PathBuf::from(&cfg.out_dir);
    match &cli.command {
        Command::Train => {
            let result = run_train(&cfg)?;
            write_output(&out, "weights.json", &result.net.to_weights_file().to_json())?;
            write_output(&out, "training_log.csv", &result.log.to_csv())?;
            write_output(&out, "train_sweep.csv", &result.report.records_csv())?;
            finish(&cfg, &result.report)
        }
        Command::Curve(w) => {
            let net = load_network(&cfg, &w.weights)?;
            let (report, calibrated) = run_curve(&cfg, &net)?;
            write_output(&out, "curve.csv", &report.records_csv())?;
            write_output(&out, "weights_calibrated.json", &calibrated.to_weights_file().to_json())?;
            finish(&cfg, &report)
        }
        Command::Ss { weights, trace } => {
            let net = load_network(&cfg, &weights.weights)?;
            let trace = load_or(&cfg, trace, surrogate_ramp)?;
            let report = run_ss(&cfg, &net, &trace)?;
            write_output(&out, "ss_raster.csv", &report.raster_csv())?;
            write_output(&out, "ss_counts.csv", &report.records_csv())?;
            finish(&cfg, &report)
        }
        Command::Ts(w) => {
            let net = load_network(&cfg, &w.weights)?;
            let report = run_ts(&cfg, &net)?;
            write_output(&out, "ts_sweep.csv", &report.records_csv())?;
            finish(&cfg, &report)
        }
        Command::Compare { weights, trace } => {
            let net = load_network(&cfg, &weights.weights)?;
            let trace = load_or(&cfg, trace, two_plateau)?;
            let result = run_compare(&cfg, &net, &trace)?;
            write_output(&out, "compare_timeline.csv", &result.timeline_csv)?;
            write_output(&out, "compare_plateaus.csv", &result.report.records_csv())?;
            finish(&cfg, &result.report)
        }
        Command::Stream { weights, source } => {
            let net = load_network(&cfg, &weights.weights)?;
            live::run(&cfg, net, source).map_err(|e| Failure::Data(e.to_string()))
        }
        Command::Fixtures => {
            write_output(&out, "surrogate_ramp.csv", &surrogate_ramp(cfg.sample_rate_hz)?.to_csv())?;
            write_output(&out, "two_plateau.csv", &two_plateau(cfg.sample_rate_hz)?.to_csv())?;
            Ok(())
        }
    }
}
