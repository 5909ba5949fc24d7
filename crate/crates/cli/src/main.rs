//! `hopfbank`: run detector banks on audio and characterize them.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hopfbank::signal::ToneSegment;
use hopfbank::{BandwidthRequest, SolverMethod};

#[derive(Parser, Debug)]
#[command(name = "hopfbank", version, about = "Hopf-resonator detector banks")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Norm {
    None,
    Search,
}

/// Flags shared by every subcommand.
#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Sample rate in Hz (ignored for --in, which carries its own).
    #[arg(long, global = true, default_value_t = 48_000.0)]
    pub sr: f64,
    /// Integration method: rk4 or cd.
    #[arg(long, global = true, default_value = "rk4")]
    pub method: SolverMethod,
    #[arg(long, global = true, value_enum, default_value_t = Norm::None)]
    pub norm: Norm,
    /// Per-sample damping factor.
    #[arg(long, global = true, default_value_t = 1e-4)]
    pub damping: f64,
    /// Forcing amplitude X.
    #[arg(long, global = true, default_value_t = 5.0)]
    pub gain: f64,
    /// `min` or a -3 dB bandwidth in Hz.
    #[arg(long, global = true, default_value = "min")]
    pub bandwidth: BandwidthRequest,
    /// Detector frequencies, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    pub freqs: Vec<f64>,
    /// Mono WAV input.
    #[arg(long = "in", global = true, value_name = "WAV")]
    pub input: Option<PathBuf>,
    /// Synthetic input, `f:dur[,f:dur...]`; `rest:dur` is silence.
    #[arg(long, global = true, value_delimiter = ',')]
    pub tone: Vec<ToneSegment>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Keep every n-th row in envelope CSVs.
    #[arg(long, global = true, default_value_t = 1)]
    pub csv_decimate: usize,
    /// Exit with status 3 if any measurement is outside its tolerance.
    #[arg(long, global = true)]
    pub strict: bool,
    /// Correct orbit ellipticity and bound |z| by 1.
    #[arg(long, global = true)]
    pub amp_normalize: bool,
    /// Apply frequency-dependent amplitude scaling.
    #[arg(long, global = true)]
    pub amp_scale: bool,
    /// Calibration table for --amp-scale (otherwise measured at build).
    #[arg(long, global = true, value_name = "FILE")]
    pub amp_table: Option<PathBuf>,
    /// Shift high detectors' input down into the accurate band.
    #[arg(long, global = true)]
    pub freq_shift: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a bank over an input and write its envelopes.
    Respond(commands::RespondArgs),
    /// Envelope maxima of a full-band bank for one tone.
    Sweep(commands::SweepArgs),
    /// Measure a detector's -3 dB bandwidth.
    Bandwidth(commands::BandwidthArgs),
    /// Rise and relaxation times across damping factors.
    Timing(commands::TimingArgs),
    /// Time to discriminate two close frequencies.
    Discriminate(commands::DiscriminateArgs),
    /// Envelope similarity with and without white noise.
    Noise(commands::NoiseArgs),
    /// Measure the amplitude-scaling table.
    Calibrate,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_EXPERIMENT: u8 = 3;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let c = &cli.common;
    let result = match &cli.command {
        Command::Respond(a) => commands::respond(c, a),
        Command::Sweep(a) => commands::sweep(c, a),
        Command::Bandwidth(a) => commands::bandwidth(c, a),
        Command::Timing(a) => commands::timing(c, a),
        Command::Discriminate(a) => commands::discriminate(c, a),
        Command::Noise(a) => commands::noise(c, a),
        Command::Calibrate => commands::calibrate(c),
    };
    match result {
        Ok(report) => {
            print!("{}", report.to_text());
            if c.strict && !report.passed() {
                for m in report.failures() {
                    eprintln!("tolerance breach: {} = {} {}", m.name, m.value, m.unit);
                }
                ExitCode::from(EXIT_EXPERIMENT)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                hopfbank::Error::Measurement(_) => ExitCode::from(EXIT_EXPERIMENT),
                _ => ExitCode::from(EXIT_CONFIG),
            }
        }
    }
}
