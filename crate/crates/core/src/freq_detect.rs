//! Frequency recovery of damped sinusoids from the trigger output spectrum.
//!
//! The detector never sees the true frequency; it is only used to score the
//! estimate and, in [`optimal_sigma_search`], as the SNR target.

use std::io::{self, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::experiments::{cell_stream, check_sigmas, mean_std, simulate_output};
use crate::noise::NoiseSpec;
use crate::signal::{generate, SignalSpec};
use crate::spectral::{
    default_dc_guard, second_peak_frequency_with, snr_db, spectrum_of, PeakOptions,
    PeriodogramOptions,
};
use crate::trigger::TriggerConfig;

/// Test frequencies of the error-rate protocol, Hz.
pub const TABLE_FREQUENCIES: [f64; 6] = [10.0, 50.0, 100.0, 500.0, 1000.0, 2000.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreqDetectReport {
    pub f_true: f64,
    pub f_est: Option<f64>,
    pub error_pct: Option<f64>,
    pub sigma: f64,
    pub seed: u64,
}

impl FreqDetectReport {
    pub fn detected(&self) -> bool {
        self.f_est.is_some()
    }
}

/// Acquisition and noise parameters shared by the detection routines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectParams {
    pub amplitude: f64,
    pub decay: f64,
    pub sigma: f64,
    pub noise_rate: f64,
    pub sample_rate: f64,
    pub duration: f64,
    pub seed: u64,
    /// `None` selects two bin widths.
    pub dc_guard: Option<f64>,
    pub peak: PeakOptions,
}

impl Default for DetectParams {
    fn default() -> Self {
        DetectParams {
            amplitude: 0.1,
            decay: 5.0,
            sigma: 0.01,
            noise_rate: 20_000.0,
            sample_rate: 20_000.0,
            duration: 0.4,
            seed: 0,
            dc_guard: None,
            peak: PeakOptions::default(),
        }
    }
}

impl DetectParams {
    fn noise(&self, sigma: f64, seed: u64, stream: u64) -> NoiseSpec {
        NoiseSpec::new(sigma, self.noise_rate, seed).with_stream(stream)
    }
}

fn true_frequency(damped: &SignalSpec) -> Result<f64> {
    match damped {
        SignalSpec::DampedSine { frequency, .. } => Ok(*frequency),
        _ => Err(Error::invalid("frequency detection expects a damped sine")),
    }
}

pub fn detect_frequency(
    config: &TriggerConfig,
    damped: &SignalSpec,
    noise: &NoiseSpec,
    sample_rate: f64,
    duration: f64,
    dc_guard: Option<f64>,
) -> Result<FreqDetectReport> {
    detect_frequency_with(
        config,
        damped,
        noise,
        sample_rate,
        duration,
        dc_guard,
        &PeakOptions::default(),
    )
}

pub fn detect_frequency_with(
    config: &TriggerConfig,
    damped: &SignalSpec,
    noise: &NoiseSpec,
    sample_rate: f64,
    duration: f64,
    dc_guard: Option<f64>,
    peak: &PeakOptions,
) -> Result<FreqDetectReport> {
    let f_true = true_frequency(damped)?;
    config.validate()?;
    let sig = generate(damped, sample_rate, duration)?;
    let out = simulate_output(config, &sig.samples, noise, sample_rate)?;
    let sp = spectrum_of(&out, sig.dt, &PeriodogramOptions::default())?;
    let guard = dc_guard.unwrap_or_else(|| default_dc_guard(&sp));
    let f_est = second_peak_frequency_with(&sp, guard, peak);
    Ok(FreqDetectReport {
        f_true,
        f_est,
        error_pct: f_est.map(|f| 100.0 * (f - f_true).abs() / f_true),
        sigma: noise.sigma,
        seed: noise.seed,
    })
}

/// One detection per `(frequency, repeat)`; repeat `r` uses seed `params.seed + r`.
/// Reports come back grouped by frequency, repeats in order.
pub fn error_rate_table(
    config: &TriggerConfig,
    frequencies: &[f64],
    params: &DetectParams,
    repeats: usize,
) -> Result<Vec<FreqDetectReport>> {
    if frequencies.is_empty() {
        return Err(Error::invalid("frequency list is empty"));
    }
    if repeats == 0 {
        return Err(Error::invalid("repeats must be >= 1"));
    }
    let cells: Vec<(f64, u64)> = frequencies
        .iter()
        .flat_map(|&f| (0..repeats as u64).map(move |r| (f, params.seed.wrapping_add(r))))
        .collect();
    cells
        .par_iter()
        .map(|&(f, seed)| {
            let damped = SignalSpec::damped(params.amplitude, params.decay, f);
            detect_frequency_with(
                config,
                &damped,
                &params.noise(params.sigma, seed, 0),
                params.sample_rate,
                params.duration,
                params.dc_guard,
                &params.peak,
            )
        })
        .collect()
}

/// Per-frequency aggregate of an error-rate table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorSummary {
    pub f_true: f64,
    /// Mean over detected runs only; `None` if nothing was detected.
    pub mean_error_pct: Option<f64>,
    pub n_detected: usize,
    pub n_missing: usize,
}

impl ErrorSummary {
    pub fn missing_rate(&self) -> f64 {
        self.n_missing as f64 / (self.n_detected + self.n_missing) as f64
    }
}

/// Groups reports by `f_true` in order of first appearance.
pub fn summarize(reports: &[FreqDetectReport]) -> Vec<ErrorSummary> {
    let mut order: Vec<f64> = Vec::new();
    for r in reports {
        if !order.contains(&r.f_true) {
            order.push(r.f_true);
        }
    }
    order
        .into_iter()
        .map(|f| {
            let errs: Vec<f64> = reports
                .iter()
                .filter(|r| r.f_true == f)
                .filter_map(|r| r.error_pct)
                .collect();
            let total = reports.iter().filter(|r| r.f_true == f).count();
            ErrorSummary {
                f_true: f,
                mean_error_pct: (!errs.is_empty())
                    .then(|| errs.iter().sum::<f64>() / errs.len() as f64),
                n_detected: errs.len(),
                n_missing: total - errs.len(),
            }
        })
        .collect()
}

/// Writes `f_true_hz,f_est_hz,error_pct,detected_bool,sigma_v,seed` rows.
/// Missing estimates are written as empty fields.
pub fn write_reports_csv<W: Write>(reports: &[FreqDetectReport], mut w: W) -> io::Result<()> {
    writeln!(w, "f_true_hz,f_est_hz,error_pct,detected_bool,sigma_v,seed")?;
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for r in reports {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.f_true,
            opt(r.f_est),
            opt(r.error_pct),
            r.detected(),
            r.sigma,
            r.seed
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimalSigma {
    pub sigma_star: f64,
    /// `(sigma, mean SNR dB)` per grid point.
    pub snr_curve: Vec<(f64, f64)>,
}

/// Noise level maximizing the mean output SNR at the hypothesized frequency.
///
/// Grid point `i`, repeat `r` uses seed `params.seed` and stream
/// [`cell_stream`]`(i, r)`; [`sigma_noise`] rebuilds that noise so a follow-up
/// detection can reuse it.
pub fn optimal_sigma_search(
    config: &TriggerConfig,
    damped: &SignalSpec,
    sigmas: &[f64],
    params: &DetectParams,
    repeats: usize,
) -> Result<OptimalSigma> {
    let f = true_frequency(damped)?;
    check_sigmas(sigmas)?;
    if repeats == 0 {
        return Err(Error::invalid("repeats must be >= 1"));
    }
    let sig = generate(damped, params.sample_rate, params.duration)?;
    let cells: Vec<(usize, usize)> = (0..sigmas.len())
        .flat_map(|i| (0..repeats).map(move |r| (i, r)))
        .collect();
    let snrs: Vec<f64> = cells
        .par_iter()
        .map(|&(i, r)| {
            let ns = sigma_noise(params, sigmas, i, r);
            let out = simulate_output(config, &sig.samples, &ns, params.sample_rate)?;
            snr_db(
                &spectrum_of(&out, sig.dt, &PeriodogramOptions::default())?,
                f,
            )
        })
        .collect::<Result<_>>()?;
    let snr_curve: Vec<(f64, f64)> = snrs
        .chunks(repeats)
        .zip(sigmas)
        .map(|(c, &s)| (s, mean_std(c).0))
        .collect();
    let mut best = 0;
    for i in 1..snr_curve.len() {
        if snr_curve[i].1 > snr_curve[best].1 {
            best = i;
        }
    }
    Ok(OptimalSigma {
        sigma_star: snr_curve[best].0,
        snr_curve,
    })
}

/// Noise used by [`optimal_sigma_search`] for grid point `i`, repeat `r`.
pub fn sigma_noise(params: &DetectParams, sigmas: &[f64], i: usize, r: usize) -> NoiseSpec {
    params.noise(sigmas[i], params.seed, cell_stream(i, r))
}
