//! `srlab`: batch front end for the Schmitt-trigger stochastic-resonance simulations.
//!
//! Each subcommand writes CSV files and a `manifest.txt` into `--out-dir` and
//! prints a one-line summary. Exit codes: 0 success, 2 usage, 3 computation,
//! 1 I/O. Errors go to stderr as `error[<category>]: <message>`.

mod commands;
mod params;

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Computation(String),
    Io(String),
}

impl CliError {
    fn category(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Computation(_) => "computation",
            CliError::Io(_) => "io",
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Computation(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Computation(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

impl From<srlab::Error> for CliError {
    fn from(e: srlab::Error) -> Self {
        match e {
            srlab::Error::InvalidArgument(_) => CliError::Usage(e.to_string()),
            _ => CliError::Computation(format!("{}: {e}", e.category())),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "srlab",
    version,
    about = "Stochastic resonance in a Schmitt trigger: simulations and weak-signal detectors"
)]
struct Cli {
    #[command(flatten)]
    flags: Flags,
    #[command(subcommand)]
    command: Command,
}

/// Parameter flags. Each command accepts the subset it uses; the rest are rejected.
#[derive(Args, Debug, Default)]
struct Flags {
    /// Base seed for all noise streams (falls back to SRLAB_SEED, then 0)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Acquisition sample rate, Hz
    #[arg(long, global = true, allow_hyphen_values = true)]
    sample_rate: Option<f64>,
    /// Acquisition time, s
    #[arg(long, global = true, allow_hyphen_values = true)]
    duration: Option<f64>,
    /// Noise standard deviation at the generator, V (a one-point grid for sweeps)
    #[arg(long, global = true, allow_hyphen_values = true)]
    sigma: Option<f64>,
    /// Noise grid: `a,b,c` or `start:stop:step`, V
    #[arg(long, global = true)]
    sigma_grid: Option<String>,
    /// Supply voltage setting the thresholds through the empirical law, V
    #[arg(long, global = true, allow_hyphen_values = true)]
    vdc: Option<f64>,
    /// Signal amplitude at the generator (before the input divider), V
    #[arg(long, global = true, allow_hyphen_values = true)]
    amplitude: Option<f64>,
    /// Signal frequency, Hz
    #[arg(long, global = true, allow_hyphen_values = true)]
    frequency: Option<f64>,
    /// Decay constant of the damped sine, 1/s
    #[arg(long, global = true, allow_hyphen_values = true)]
    decay: Option<f64>,
    /// Repeats per grid point (runs, votes)
    #[arg(long, global = true)]
    repeats: Option<u64>,
    /// Noise draw rate, Hz (defaults to the sample rate)
    #[arg(long, global = true, allow_hyphen_values = true)]
    noise_rate: Option<f64>,
    /// Feedback divider ratio for the ideal trigger
    #[arg(long, global = true, allow_hyphen_values = true)]
    ratio: Option<f64>,
    /// Hysteresis sweep lower end, V
    #[arg(long, global = true, allow_hyphen_values = true)]
    v_min: Option<f64>,
    /// Hysteresis sweep upper end, V
    #[arg(long, global = true, allow_hyphen_values = true)]
    v_max: Option<f64>,
    /// Points per hysteresis branch
    #[arg(long, global = true)]
    points: Option<u64>,
    /// Frequency list for the error table, Hz
    #[arg(long, global = true)]
    frequencies: Option<String>,
    /// Calibration decay constants, 1/s
    #[arg(long, global = true)]
    decays: Option<String>,
    /// Bank thresholds (input-referred), V
    #[arg(long, global = true)]
    thresholds: Option<String>,
    /// Supply grid for the threshold law table, V
    #[arg(long, global = true)]
    vdc_grid: Option<String>,
    /// Noise draw rates for the SNR figure, Hz
    #[arg(long, global = true)]
    noise_rates: Option<String>,
    /// Preset variant (`ideal`/`measured` for hysteresis, `threshold`/`sigma` for bank)
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Input curve CSV for fit-sigmoid
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// Sigmoid plateau, s
    #[arg(long, global = true, allow_hyphen_values = true)]
    plateau: Option<f64>,
    /// Fit the plateau instead of fixing it
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    float_plateau: Option<bool>,
    /// Leave runs without transitions out of <t0>
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    exclude_no_transition: Option<bool>,
    /// Simulate the observed curve with the calibration noise
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    shared_noise: Option<bool>,
    /// Output directory
    #[arg(long, global = true, default_value = "srlab-out")]
    out_dir: PathBuf,
    /// Flat key=value config file; flags win over it
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

impl Flags {
    fn to_map(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                m.insert(k.to_string(), v);
            }
        };
        let s = |x: &Option<f64>| x.map(|v| v.to_string());
        put("seed", self.seed.map(|v| v.to_string()));
        put("sample-rate", s(&self.sample_rate));
        put("duration", s(&self.duration));
        put("sigma", s(&self.sigma));
        put("sigma-grid", self.sigma_grid.clone());
        put("vdc", s(&self.vdc));
        put("amplitude", s(&self.amplitude));
        put("frequency", s(&self.frequency));
        put("decay", s(&self.decay));
        put("repeats", self.repeats.map(|v| v.to_string()));
        put("noise-rate", s(&self.noise_rate));
        put("ratio", s(&self.ratio));
        put("v-min", s(&self.v_min));
        put("v-max", s(&self.v_max));
        put("points", self.points.map(|v| v.to_string()));
        put("frequencies", self.frequencies.clone());
        put("decays", self.decays.clone());
        put("thresholds", self.thresholds.clone());
        put("vdc-grid", self.vdc_grid.clone());
        put("noise-rates", self.noise_rates.clone());
        put("preset", self.preset.clone());
        put(
            "input",
            self.input.as_ref().map(|p| p.display().to_string()),
        );
        put("plateau", s(&self.plateau));
        put("float-plateau", self.float_plateau.map(|v| v.to_string()));
        put(
            "exclude-no-transition",
            self.exclude_no_transition.map(|v| v.to_string()),
        );
        put("shared-noise", self.shared_noise.map(|v| v.to_string()));
        m
    }
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Noiseless up/down sweep of the trigger input
    Hysteresis,
    /// Input, combined and output waveforms of one noisy run
    Transitions,
    /// Output SNR at the signal frequency against noise level
    SnrSweep,
    /// Frequency of a damped sine from the output spectrum
    DetectFreq,
    /// Detection error per frequency over repeated seeds
    FreqTable,
    /// Noise level maximizing the output SNR, then detection there
    OptimalSigma,
    /// Mean last-transition time against noise level
    T0Curve,
    /// Logistic fit of a <t0> curve CSV
    FitSigmoid,
    /// Decay constant from calibration curves
    EstimateDecay,
    /// Detector bank: amplitude bracketing or frequency consensus
    Bank,
    /// Figure and table presets
    Reproduce {
        #[arg(value_enum)]
        figure: Figure,
    },
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    /// Input, combined and output traces for a noisy 100 Hz sine
    Fig4,
    /// SNR against noise level at two noise draw rates
    Fig5,
    /// Ideal and measured hysteresis loops
    Fig6,
    /// Threshold against supply voltage
    Fig8,
    /// Frequency detection error by signal frequency
    Table1,
    /// Optimal noise level for a 50 Hz damped sine
    Fig12,
    /// <t0> curves and sigmoid fits for five decay constants
    Fig13,
}

fn run(cli: Cli) -> Result<String, CliError> {
    let config = match &cli.flags.config {
        Some(p) => params::read_config(p)?,
        None => BTreeMap::new(),
    };
    let flags = cli.flags.to_map();
    let preset = flags
        .get("preset")
        .or_else(|| config.get("preset"))
        .cloned();
    let mut p = commands::defaults(cli.command, preset.as_deref())?;
    if p.contains("seed") {
        if let Ok(env) = std::env::var("SRLAB_SEED") {
            let seed: u64 = env.trim().parse().map_err(|_| {
                CliError::Usage(format!("SRLAB_SEED must be an integer, got `{env}`"))
            })?;
            p.set("seed", seed.to_string());
        }
    }
    p.overlay("config file", &redirect_sigma(&p, config))?;
    p.overlay("command line", &redirect_sigma(&p, flags))?;
    if p.contains("noise-rate") && p.raw("noise-rate")?.is_empty() {
        let sr = p.raw("sample-rate")?.to_string();
        p.set("noise-rate", sr);
    }
    commands::execute(cli.command, &p, &cli.flags.out_dir)
}

/// Sweep commands take `--sigma` as a one-point grid.
fn redirect_sigma(p: &params::Params, mut m: BTreeMap<String, String>) -> BTreeMap<String, String> {
    if !p.contains("sigma") && p.contains("sigma-grid") {
        if let Some(s) = m.remove("sigma") {
            m.insert("sigma-grid".into(), s);
        }
    }
    m
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            if !e.use_stderr() {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            eprintln!(
                "error[usage]: {}",
                e.to_string().trim_start_matches("error: ").trim_end()
            );
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::from(e.exit_code())
        }
    }
}
