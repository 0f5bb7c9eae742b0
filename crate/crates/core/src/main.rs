use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use afdm::channel::build_shaped_ecm;
use afdm::detection::{DetectorConfig, DetectorKind};
use afdm::harness::{
    csv_string, emit_plot, run_ber_sweep, run_nmse_sweep, Experiment, ExperimentConfig, RunOptions, SnrGrid,
    SweepResult, WaveformConfig, WaveformPreset, WindowName,
};
use afdm::multiaccess::{AllocationRequest, Direction};
use afdm::params::validate_params;
use afdm::profile::DdProfile;
use afdm::{AfdmError, Result};

#[derive(Parser)]
#[command(name = "afdm", version, about = "AFDM link-level simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Bit error rate versus SNR.
    Ber(SweepArgs),
    /// Channel estimation NMSE versus SNR.
    Nmse(SweepArgs),
    /// Dump the effective channel matrix and its predicted support as JSON.
    Ecm(EcmArgs),
    /// Allocate DAFT-domain resources to several users.
    Allocate(AllocateArgs),
    /// Report parameter checks for a configuration.
    Validate(ConfigArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// SNR grid in dB as `start:stop:step` or a single value.
    #[arg(long)]
    snr: Option<String>,
    #[arg(long)]
    frames: Option<usize>,
    /// afdm | ocdm | ofdm
    #[arg(long, value_parser = parse_enum::<WaveformPreset>)]
    waveform: Option<WaveformPreset>,
    /// zf | lmmse | mp | ml | single_tap
    #[arg(long, value_parser = parse_enum::<DetectorKind>)]
    detector: Option<DetectorKind>,
    /// rect | hamming | chebyshev
    #[arg(long, value_parser = parse_enum::<WindowName>)]
    window: Option<WindowName>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// SVG plot destination.
    #[arg(long)]
    plot: Option<PathBuf>,
    /// Worker threads; all cores when absent.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct EcmArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Profile TOML; defaults to the configuration's first trial.
    #[arg(long)]
    profile: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AllocateArgs {
    /// TOML user set: `n`, `direction`, optional `c2` and `options`, and `[[users]]`.
    #[arg(long)]
    users: PathBuf,
    /// Overrides the document's direction.
    #[arg(long, value_parser = parse_enum::<Direction>)]
    direction: Option<Direction>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_enum<T: DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_lowercase())).map_err(|e| e.to_string())
}

impl ConfigArgs {
    fn resolve(&self, default: fn() -> ExperimentConfig) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(snr) = &self.snr {
            cfg.snr = SnrGrid::parse(snr)?;
        }
        if let Some(frames) = self.frames {
            cfg.frames = frames;
        }
        if let Some(preset) = self.waveform {
            cfg.waveform = WaveformConfig {
                preset,
                c1: None,
                c2: cfg.waveform.c2,
            };
        }
        if let Some(kind) = self.detector {
            cfg.detector = DetectorConfig {
                kind,
                ..cfg.detector
            };
        }
        if let Some(window) = self.window {
            cfg.window = window;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn write_out(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| AfdmError::io(path, e)),
        None => match std::io::stdout().write_all(text.as_bytes()) {
            Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(AfdmError::io("<stdout>", e)),
            _ => Ok(()),
        },
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable") + "\n"
}

fn sweep(args: &SweepArgs, nmse: bool) -> Result<()> {
    let default = if nmse {
        ExperimentConfig::default_nmse
    } else {
        ExperimentConfig::default_ber
    };
    let cfg = args.config.resolve(default)?;
    let opts = RunOptions { workers: args.workers };
    let result: SweepResult = if nmse {
        run_nmse_sweep(&cfg, &opts)?
    } else {
        run_ber_sweep(&cfg, &opts)?
    };
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    write_out(&csv_string(&result), args.out.as_deref())?;
    if let Some(path) = &args.plot {
        emit_plot(&result, path)?;
    }
    eprintln!("done in {:.2?}", result.wall_time);
    Ok(())
}

#[derive(Serialize)]
struct EcmDump {
    n: usize,
    c1: f64,
    c2: f64,
    profile_digest: String,
    support: Vec<(usize, usize)>,
    /// Row-major `[re, im]` pairs.
    matrix: Vec<Vec<[f64; 2]>>,
}

fn ecm(args: &EcmArgs) -> Result<()> {
    let cfg = args.config.resolve(ExperimentConfig::default_ber)?;
    let exp = Experiment::new(&cfg)?;
    let profile = match &args.profile {
        Some(path) => DdProfile::load(path)?,
        None => exp.profile(0)?,
    };
    let ecm = build_shaped_ecm(&profile, &exp.plan, exp.shaping.as_ref())?;
    let dump = EcmDump {
        n: ecm.n(),
        c1: exp.params.c1(),
        c2: exp.params.c2(),
        profile_digest: ecm.profile_digest.clone(),
        support: ecm.support.clone(),
        matrix: ecm
            .matrix
            .row_iter()
            .map(|row| row.iter().map(|z| [z.re, z.im]).collect())
            .collect(),
    };
    write_out(&to_json(&dump), args.out.as_deref())
}

fn allocate(args: &AllocateArgs) -> Result<()> {
    let mut request = AllocationRequest::load(&args.users)?;
    if let Some(direction) = args.direction {
        request.direction = direction;
    }
    let plan = request.allocate()?;
    write_out(&(plan.to_json() + "\n"), args.out.as_deref())
}

fn validate(args: &ConfigArgs) -> Result<bool> {
    let cfg = args.resolve(ExperimentConfig::default_ber)?;
    let exp = Experiment::new(&cfg)?;
    let profile = exp.profile(0)?;
    let report = validate_params(&exp.params, &profile);
    println!("config_digest={} seed={}", cfg.digest(), cfg.seed);
    println!(
        "n={} c1={} c2={} l_cpp={} 2Nc1={}",
        exp.params.n_sub(),
        exp.params.c1(),
        exp.params.c2(),
        exp.params.l_cpp(),
        exp.params.two_n_c1()
    );
    print!("{report}");
    Ok(report.all_passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Ber(a) => sweep(a, false).map(|_| true),
        Command::Nmse(a) => sweep(a, true).map(|_| true),
        Command::Ecm(a) => ecm(a).map(|_| true),
        Command::Allocate(a) => allocate(a).map(|_| true),
        Command::Validate(a) => validate(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
