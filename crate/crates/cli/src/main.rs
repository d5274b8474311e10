mod commands;
mod config;
mod error;
mod output;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::DeviceConfig;
use crate::error::CliError;
use crate::output::{manifest_path, now_utc, sha256_hex, write_atomic, RunManifest};

#[derive(Parser, Debug)]
#[command(name = "jjosc", version, about = "Josephson-junction oscillator model, simulator and analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Io {
    /// Device configuration (TOML with [junction], [resonator], [environment]).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// CSV output path; the manifest is written next to it as `<out>.manifest.json`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Start {
    /// On the predicted limit cycle (falls back to `bare` off the step).
    Predicted,
    /// Junction at the Shapiro voltage of the bare resonance.
    Bare,
    Zero,
}

#[derive(Args, Debug, Clone)]
pub struct SimArgs {
    /// Bias current (A).
    #[arg(long)]
    pub ib: f64,
    /// Simulated time (s).
    #[arg(long, default_value_t = 2e-6)]
    pub duration: f64,
    /// Output sample spacing (s).
    #[arg(long, default_value_t = 20e-12)]
    pub output_dt: f64,
    /// Overrides environment.temperature_k.
    #[arg(long)]
    pub temperature: Option<f64>,
    /// Overrides environment.bias_noise_psd_a2_per_hz.
    #[arg(long)]
    pub bias_noise_psd: Option<f64>,
    #[arg(long, value_enum, default_value_t = Start::Predicted)]
    pub initial: Start,
    /// Fraction of the trace discarded as transient in the analysis.
    #[arg(long, default_value_t = 0.5)]
    pub transient: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub rtol: f64,
    /// Injection tone frequency (Hz).
    #[arg(long, requires = "inj_power_dbm")]
    pub inj_freq: Option<f64>,
    /// Injection tone power at the sample (dBm).
    #[arg(long, requires = "inj_freq")]
    pub inj_power_dbm: Option<f64>,
    /// Injected current amplitude per square-root watt (A/sqrt(W)).
    #[arg(long, default_value_t = jjosc::injection::DEFAULT_COUPLING)]
    pub coupling: f64,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Signal {
    Voltage,
    Current,
    Power,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum FitShape {
    None,
    Gaussian,
    Lorentzian,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum WindowArg {
    Hann,
    Rect,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Steady-state oscillation at one bias.
    OperatingPoint {
        #[command(flatten)]
        io: Io,
        #[arg(long)]
        ib: f64,
    },
    /// Region, frequency and output power over a bias sweep.
    SweepBias {
        #[command(flatten)]
        io: Io,
        /// start:stop:step (A).
        #[arg(long, allow_hyphen_values = true)]
        ib: String,
    },
    /// Time-domain IV curve with continuation between bias points.
    Iv {
        #[command(flatten)]
        io: Io,
        /// start:stop:step (A).
        #[arg(long, allow_hyphen_values = true)]
        ib: String,
        /// Simulated time per bias point (s).
        #[arg(long, default_value_t = 2e-6)]
        duration: f64,
        #[arg(long, default_value_t = 20e-12)]
        output_dt: f64,
        /// Part of each point spent ramping from the previous bias.
        #[arg(long, default_value_t = 0.25)]
        ramp_fraction: f64,
        #[arg(long)]
        temperature: Option<f64>,
    },
    /// Full-circuit time trace.
    #[command(allow_negative_numbers = true)]
    Simulate {
        #[command(flatten)]
        io: Io,
        #[command(flatten)]
        sim: SimArgs,
        /// Keep every n-th sample in the CSV.
        #[arg(long, default_value_t = 1)]
        decimate: usize,
    },
    /// Welch spectrum of a simulated trace with optional line fit.
    #[command(allow_negative_numbers = true)]
    Spectrum {
        #[command(flatten)]
        io: Io,
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long, value_enum, default_value_t = Signal::Power)]
        signal: Signal,
        /// Welch segment length (samples); 0 uses the whole steady part.
        #[arg(long, default_value_t = 0)]
        segment: usize,
        #[arg(long, value_enum, default_value_t = WindowArg::Hann)]
        window: WindowArg,
        /// Keep only lo:hi (Hz) in the CSV.
        #[arg(long)]
        band: Option<String>,
        #[arg(long, value_enum, default_value_t = FitShape::None)]
        fit: FitShape,
    },
    /// Lock classification over injection frequencies at fixed power.
    #[command(allow_negative_numbers = true)]
    InjectionMap {
        #[command(flatten)]
        io: Io,
        #[arg(long)]
        ib: f64,
        /// Injection power at the sample (dBm).
        #[arg(long)]
        p_inj_dbm: f64,
        #[arg(long, default_value_t = jjosc::injection::DEFAULT_COUPLING)]
        coupling: f64,
        /// Absolute injection frequencies, start:stop:step (Hz).
        #[arg(long, conflicts_with = "f_offset", allow_hyphen_values = true)]
        f_inj: Option<String>,
        /// Offsets from the free-running frequency, start:stop:step (Hz).
        #[arg(long, allow_hyphen_values = true)]
        f_offset: Option<String>,
        /// Simulated time per injection frequency (s).
        #[arg(long, default_value_t = 3e-6)]
        duration: f64,
        /// Free-running time before injection starts (s).
        #[arg(long, default_value_t = 2e-6)]
        settle: f64,
        #[arg(long, default_value_t = 20e-12)]
        output_dt: f64,
        #[arg(long, default_value_t = 0.3)]
        transient: f64,
        #[arg(long, default_value_t = 0.99)]
        threshold: f64,
        #[arg(long)]
        temperature: Option<f64>,
        /// Also write long-form spectra (f_inj, f, psd) here.
        #[arg(long)]
        spectra: Option<PathBuf>,
    },
    /// Fits lock range = k sqrt(P) to a CSV with columns p_inj_w (or
    /// p_inj_dbm) and lock_range_hz.
    AdlerFit {
        #[command(flatten)]
        io: Io,
        #[arg(long)]
        input: PathBuf,
    },
    /// Dephasing integral and infidelity of qubit operations driven by a
    /// phase-noise profile.
    #[command(allow_negative_numbers = true)]
    Fidelity {
        #[command(flatten)]
        io: Io,
        /// Phase-noise anchors `f:L,f:L,...` (Hz : dBc/Hz).
        #[arg(long, default_value = "1e4:-95,1e6:-116,5e6:-120", allow_hyphen_values = true)]
        anchors: String,
        /// Operation durations, start:stop:step or start:stop:xF (s).
        #[arg(long, default_value = "1e-6:1e-1:x10")]
        tau: String,
        /// Comma-separated subset of ramsey, hahn_echo, not_gate.
        #[arg(long, default_value = "ramsey,hahn_echo,not_gate")]
        ops: String,
        /// Drop noise above this offset (Hz).
        #[arg(long)]
        clip_above: Option<f64>,
        #[arg(long, default_value_t = 0.1)]
        f_min: f64,
        #[arg(long, default_value_t = 1e9)]
        f_max: f64,
        #[arg(long, default_value_t = 0.005)]
        rel_tol: f64,
    },
    /// Critical current and series load that deliver a target power.
    DesignOptimize {
        #[command(flatten)]
        io: Io,
        /// Target output power (W).
        #[arg(long)]
        target_power: f64,
        /// Operating frequency (Hz).
        #[arg(long)]
        freq: f64,
        /// Shunt capacitance (F); taken from the config when omitted.
        #[arg(long)]
        cs: Option<f64>,
    },
    /// Replays the run recorded in a manifest.
    Rerun {
        #[arg(long)]
        manifest: PathBuf,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::OperatingPoint { .. } => "operating-point",
            Command::SweepBias { .. } => "sweep-bias",
            Command::Iv { .. } => "iv",
            Command::Simulate { .. } => "simulate",
            Command::Spectrum { .. } => "spectrum",
            Command::InjectionMap { .. } => "injection-map",
            Command::AdlerFit { .. } => "adler-fit",
            Command::Fidelity { .. } => "fidelity",
            Command::DesignOptimize { .. } => "design-optimize",
            Command::Rerun { .. } => "rerun",
        }
    }

    fn io(&self) -> Option<&Io> {
        match self {
            Command::OperatingPoint { io, .. }
            | Command::SweepBias { io, .. }
            | Command::Iv { io, .. }
            | Command::Simulate { io, .. }
            | Command::Spectrum { io, .. }
            | Command::InjectionMap { io, .. }
            | Command::AdlerFit { io, .. }
            | Command::Fidelity { io, .. }
            | Command::DesignOptimize { io, .. } => Some(io),
            Command::Rerun { .. } => None,
        }
    }
}

/// Loaded device configuration with its raw text hash.
pub struct Loaded {
    pub device: Option<DeviceConfig>,
    pub path: Option<String>,
    pub sha256: Option<String>,
}

fn load_config(path: Option<&Path>) -> Result<Loaded, CliError> {
    match path {
        None => Ok(Loaded { device: None, path: None, sha256: None }),
        Some(p) => {
            let (device, text) = DeviceConfig::load(p)?;
            Ok(Loaded {
                device: Some(device),
                path: Some(p.display().to_string()),
                sha256: Some(sha256_hex(text.as_bytes())),
            })
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("JJOSC_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("JJOSC_THREADS `{v}`: expected a positive integer")))?;
    // a pool may already exist when running several commands in-process
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn execute(command: Command, args: Vec<String>) -> Result<(), CliError> {
    if let Command::Rerun { manifest } = &command {
        return rerun(manifest);
    }
    let io = command.io().cloned().expect("non-rerun commands carry io");
    let started = now_utc();
    let loaded = load_config(io.config.as_deref())?;
    let report = commands::run(&command, &loaded, io.seed)?;
    let mut outputs = vec![io.out.display().to_string()];
    write_atomic(&io.out, report.table.to_csv().as_bytes())?;
    for (path, body) in &report.extra {
        write_atomic(path, body.as_bytes())?;
        outputs.push(path.display().to_string());
    }
    let manifest = RunManifest {
        command: command.name().to_string(),
        args,
        config_path: loaded.path,
        config_sha256: loaded.sha256,
        seed: report.seeded.then_some(io.seed),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        started_utc: started,
        finished_utc: now_utc(),
        outputs,
        rows: report.table.len(),
        results: report.results,
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Io(e.to_string()))?;
    write_atomic(&manifest_path(&io.out), json.as_bytes())
}

fn rerun(path: &Path) -> Result<(), CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let m: RunManifest =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if let (Some(p), Some(hash)) = (&m.config_path, &m.config_sha256) {
        let now = std::fs::read(p).map_err(|e| CliError::Io(format!("{p}: {e}")))?;
        if &sha256_hex(&now) != hash {
            return Err(CliError::Config(format!("{p}: contents changed since the recorded run")));
        }
    }
    let cli = Cli::try_parse_from(std::iter::once("jjosc".to_string()).chain(m.args.iter().cloned()))
        .map_err(|e| CliError::Config(format!("recorded arguments: {e}")))?;
    if matches!(cli.command, Command::Rerun { .. }) {
        return Err(CliError::Config("a manifest cannot replay another rerun".into()));
    }
    execute(cli.command, m.args)
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            let err = CliError::Config(e.kind().to_string());
            eprintln!("{}", err.record());
            std::process::exit(err.exit_code());
        }
        Err(e) => {
            let _ = e.print();
            std::process::exit(0);
        }
    };
    let args: Vec<String> = std::env::args().skip(1).collect();
    if let Err(e) = configure_threads().and_then(|_| execute(cli.command, args)) {
        eprintln!("{}", e.record());
        std::process::exit(e.exit_code());
    }
}
