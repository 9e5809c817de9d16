//! SNR vs. noise-level sweeps and transition captures.

use std::io::{self, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::noise::{fill_noise, generate_noise, NoiseSpec};
use crate::signal::{generate, sample_count, SignalSpec, Trace};
use crate::spectral::{snr_db, spectrum_of, PeriodogramOptions};
use crate::trigger::{self, TriggerConfig};

/// Default sweep grid: 0.01 to 0.20 V in 0.005 V steps.
pub fn default_sigma_grid() -> Vec<f64> {
    (0..=38).map(|i| 0.01 + 0.005 * i as f64).collect()
}

/// Noise stream for cell `(sigma index, repeat)`.
pub fn cell_stream(sigma_idx: usize, repeat: usize) -> u64 {
    ((sigma_idx as u64) << 32) | repeat as u64
}

pub(crate) fn check_sigmas(sigmas: &[f64]) -> Result<()> {
    if sigmas.is_empty() {
        return Err(Error::invalid("sigma grid is empty"));
    }
    if sigmas.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
        return Err(Error::invalid("sigmas must be finite and >= 0"));
    }
    if sigmas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("sigma grid must be strictly increasing"));
    }
    Ok(())
}

/// Output samples of the trigger driven by `signal + noise`.
pub(crate) fn simulate_output(
    config: &TriggerConfig,
    signal: &[f64],
    noise: &NoiseSpec,
    sample_rate: f64,
) -> Result<Vec<f64>> {
    let mut buf = Vec::with_capacity(signal.len());
    fill_noise(noise, sample_rate, &mut buf, signal.len())?;
    let mut level = config.initial;
    for (x, s) in buf.iter_mut().zip(signal) {
        level = config.next_level(level, config.alpha * (s + *x));
        *x = config.output(level);
    }
    Ok(buf)
}

pub(crate) fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = if xs.len() > 1 {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub sigmas: Vec<f64>,
    pub snr_mean_db: Vec<f64>,
    pub snr_std_db: Vec<f64>,
    pub repeats: usize,
    pub seed_base: u64,
}

impl SweepResult {
    pub fn len(&self) -> usize {
        self.sigmas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigmas.is_empty()
    }

    /// Writes `sigma_v,snr_mean_db,snr_std_db,repeats` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "sigma_v,snr_mean_db,snr_std_db,repeats")?;
        for i in 0..self.len() {
            writeln!(
                w,
                "{},{},{},{}",
                self.sigmas[i], self.snr_mean_db[i], self.snr_std_db[i], self.repeats
            )?;
        }
        Ok(())
    }
}

/// SNR at the signal frequency for every `(sigma, repeat)` cell.
///
/// The noise seed comes from `noise_template.seed`; cell `(i, r)` uses stream
/// [`cell_stream`]`(i, r)`. Cells run in parallel and are reduced in index order.
pub fn snr_sigma_sweep(
    config: &TriggerConfig,
    signal: &SignalSpec,
    noise_template: &NoiseSpec,
    sigmas: &[f64],
    sample_rate: f64,
    duration: f64,
    repeats: usize,
) -> Result<SweepResult> {
    config.validate()?;
    check_sigmas(sigmas)?;
    let f = signal
        .frequency()
        .ok_or_else(|| Error::invalid("SNR sweep needs an oscillatory signal"))?;
    if repeats == 0 {
        return Err(Error::invalid("repeats must be >= 1"));
    }
    noise_template.validate()?;
    let sig = generate(signal, sample_rate, duration)?;
    let dt = sig.dt;
    let opts = PeriodogramOptions::default();

    let cells: Vec<(usize, usize)> = (0..sigmas.len())
        .flat_map(|i| (0..repeats).map(move |r| (i, r)))
        .collect();
    let snrs: Vec<f64> = cells
        .par_iter()
        .map(|&(i, r)| {
            let ns = noise_template
                .with_sigma(sigmas[i])
                .with_stream(cell_stream(i, r));
            let out = simulate_output(config, &sig.samples, &ns, sample_rate)?;
            let sp = spectrum_of(&out, dt, &opts)?;
            snr_db(&sp, f)
        })
        .collect::<Result<_>>()?;

    let mut snr_mean_db = Vec::with_capacity(sigmas.len());
    let mut snr_std_db = Vec::with_capacity(sigmas.len());
    for chunk in snrs.chunks(repeats) {
        let (m, s) = mean_std(chunk);
        snr_mean_db.push(m);
        snr_std_db.push(s);
    }
    Ok(SweepResult {
        sigmas: sigmas.to_vec(),
        snr_mean_db,
        snr_std_db,
        repeats,
        seed_base: noise_template.seed,
    })
}

/// Noise level with the highest mean SNR; ties go to the smaller sigma.
pub fn find_sr_peak(sweep: &SweepResult) -> Result<(f64, f64)> {
    if sweep.is_empty() {
        return Err(Error::invalid("empty sweep"));
    }
    let mut best = 0;
    for i in 1..sweep.len() {
        if sweep.snr_mean_db[i] > sweep.snr_mean_db[best] {
            best = i;
        }
    }
    Ok((sweep.sigmas[best], sweep.snr_mean_db[best]))
}

/// Aligned traces from one noisy run.
#[derive(Debug, Clone, PartialEq)]
pub struct Capture {
    /// Deterministic signal.
    pub input: Trace,
    /// Raw `signal + noise`, before the input attenuation.
    pub combined: Trace,
    pub output: Trace,
}

impl Capture {
    pub fn transitions(&self) -> usize {
        self.output
            .samples
            .windows(2)
            .filter(|w| w[0] != w[1])
            .count()
    }

    /// Writes `time_s,input_v,combined_v,output_v` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "time_s,input_v,combined_v,output_v")?;
        for i in 0..self.input.len() {
            writeln!(
                w,
                "{},{},{},{}",
                self.input.time(i),
                self.input.samples[i],
                self.combined.samples[i],
                self.output.samples[i]
            )?;
        }
        Ok(())
    }
}

pub fn capture_transitions(
    config: &TriggerConfig,
    signal: &SignalSpec,
    noise: &NoiseSpec,
    sample_rate: f64,
    duration: f64,
) -> Result<Capture> {
    sample_count(sample_rate, duration)?;
    let input = generate(signal, sample_rate, duration)?;
    let nz = generate_noise(noise, sample_rate, duration)?;
    let output = trigger::run(config, &input, &nz)?;
    let combined: Vec<f64> = input
        .samples
        .iter()
        .zip(&nz.samples)
        .map(|(a, b)| a + b)
        .collect();
    let combined = Trace::new(input.start_time, input.dt, combined)?;
    Ok(Capture {
        input,
        combined,
        output,
    })
}
