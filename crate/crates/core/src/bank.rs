//! Banks of parallel trigger detectors.
//!
//! A threshold sweep at a common noise level brackets an unknown amplitude:
//! detectors whose threshold the signal (plus a little noise) reaches keep
//! switching, the rest stay quiet. A noise sweep at a fixed threshold gives
//! several independent frequency estimates of the same input.

use std::io::{self, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::experiments::simulate_output;
use crate::noise::NoiseSpec;
use crate::signal::{generate, SignalSpec};
use crate::spectral::{default_dc_guard, second_peak_frequency, spectrum_of, PeriodogramOptions};
use crate::trigger::{TriggerConfig, DEFAULT_ALPHA};

/// Noise level of the threshold-sweep preset, volts.
pub const DEFAULT_BANK_SIGMA: f64 = 0.001;

/// Geometric thresholds from 1 mV to 100 mV, ten detectors.
pub fn default_thresholds() -> Vec<f64> {
    (0..10)
        .map(|k| 0.001 * 10f64.powf(2.0 * k as f64 / 9.0))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResonanceRule {
    /// Resonating when the transition rate is at least this many per second.
    MinRate(f64),
    /// Resonating when the transition rate is at least this multiple of the signal frequency.
    SignalMultiple(f64),
}

impl Default for ResonanceRule {
    fn default() -> Self {
        ResonanceRule::SignalMultiple(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detector {
    pub sigma: f64,
    pub trigger: TriggerConfig,
}

impl Detector {
    /// Input-referred upper threshold.
    pub fn threshold(&self) -> f64 {
        self.trigger.v_ut / self.trigger.alpha
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BankConfig {
    pub detectors: Vec<Detector>,
    pub rule: ResonanceRule,
    pub noise_rate: f64,
}

impl BankConfig {
    pub fn new(detectors: Vec<Detector>, rule: ResonanceRule, noise_rate: f64) -> Result<Self> {
        let b = BankConfig {
            detectors,
            rule,
            noise_rate,
        };
        b.validate()?;
        Ok(b)
    }

    /// Symmetric detectors with input-referred thresholds `+-th` and a common noise level.
    pub fn threshold_sweep(thresholds: &[f64], sigma: f64, noise_rate: f64) -> Result<Self> {
        if thresholds.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("thresholds must be strictly increasing"));
        }
        let detectors = thresholds
            .iter()
            .map(|&th| {
                let v = DEFAULT_ALPHA * th;
                Ok(Detector {
                    sigma,
                    trigger: TriggerConfig::new(1.0, -1.0, v, -v, DEFAULT_ALPHA)?,
                })
            })
            .collect::<Result<_>>()?;
        Self::new(detectors, ResonanceRule::default(), noise_rate)
    }

    /// One trigger, several noise levels.
    pub fn sigma_sweep(trigger: &TriggerConfig, sigmas: &[f64], noise_rate: f64) -> Result<Self> {
        if sigmas.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("sigmas must be strictly increasing"));
        }
        let detectors = sigmas
            .iter()
            .map(|&sigma| Detector {
                sigma,
                trigger: *trigger,
            })
            .collect();
        Self::new(detectors, ResonanceRule::default(), noise_rate)
    }

    pub fn with_rule(mut self, rule: ResonanceRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.detectors.len() < 2 {
            return Err(Error::invalid("a bank needs at least 2 detectors"));
        }
        for d in &self.detectors {
            d.trigger.validate()?;
            if !(d.sigma >= 0.0 && d.sigma.is_finite()) {
                return Err(Error::invalid("detector sigma must be >= 0"));
            }
        }
        if !(self.noise_rate > 0.0) {
            return Err(Error::invalid("noise_rate must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorResult {
    pub threshold: f64,
    pub sigma: f64,
    pub transition_rate: f64,
    pub resonating: bool,
    pub f_est: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BankReport {
    pub detectors: Vec<DetectorResult>,
    pub amplitude_low: Option<f64>,
    pub amplitude_high: Option<f64>,
}

impl BankReport {
    pub fn pattern(&self) -> Vec<bool> {
        self.detectors.iter().map(|d| d.resonating).collect()
    }

    /// Writes `idx,threshold_v,sigma_v,transition_rate_hz,resonating,f_est_hz` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(
            w,
            "idx,threshold_v,sigma_v,transition_rate_hz,resonating,f_est_hz"
        )?;
        for (i, d) in self.detectors.iter().enumerate() {
            let f = d.f_est.map(|f| f.to_string()).unwrap_or_default();
            writeln!(
                w,
                "{},{},{},{},{},{}",
                i, d.threshold, d.sigma, d.transition_rate, d.resonating, f
            )?;
        }
        Ok(())
    }

    fn with_bracket(mut self) -> Self {
        if let Ok(Some((lo, hi))) = amplitude_bracket(&self) {
            self.amplitude_low = Some(lo);
            self.amplitude_high = Some(hi);
        }
        self
    }
}

fn min_rate(rule: ResonanceRule, signal: &SignalSpec) -> Result<f64> {
    match rule {
        ResonanceRule::MinRate(r) => Ok(r),
        ResonanceRule::SignalMultiple(m) => signal.frequency().map(|f| m * f).ok_or_else(|| {
            Error::invalid("signal-relative resonance rule needs an oscillatory signal")
        }),
    }
}

/// Runs every detector on its own noise stream (`seed_base`, stream = detector index).
pub fn run_bank(
    bank: &BankConfig,
    signal: &SignalSpec,
    sample_rate: f64,
    duration: f64,
    seed_base: u64,
) -> Result<BankReport> {
    bank.validate()?;
    let threshold_rate = min_rate(bank.rule, signal)?;
    let sig = generate(signal, sample_rate, duration)?;
    let span = sig.duration();
    let detectors = bank
        .detectors
        .par_iter()
        .enumerate()
        .map(|(i, d)| {
            let ns = NoiseSpec::new(d.sigma, bank.noise_rate, seed_base).with_stream(i as u64);
            let out = simulate_output(&d.trigger, &sig.samples, &ns, sample_rate)?;
            let switches = out.windows(2).filter(|w| w[0] != w[1]).count()
                + usize::from(out[0] != d.trigger.output(d.trigger.initial));
            let sp = spectrum_of(&out, sig.dt, &PeriodogramOptions::default())?;
            let rate = switches as f64 / span;
            Ok(DetectorResult {
                threshold: d.threshold(),
                sigma: d.sigma,
                transition_rate: rate,
                resonating: rate >= threshold_rate,
                f_est: second_peak_frequency(&sp, default_dc_guard(&sp)),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BankReport {
        detectors,
        amplitude_low: None,
        amplitude_high: None,
    }
    .with_bracket())
}

/// Runs the bank with seeds `seed_base..seed_base + votes` and keeps, per
/// detector, the majority resonance flag (ties count as not resonating), the
/// median transition rate and the most common frequency estimate.
pub fn run_bank_voted(
    bank: &BankConfig,
    signal: &SignalSpec,
    sample_rate: f64,
    duration: f64,
    seed_base: u64,
    votes: usize,
) -> Result<BankReport> {
    if votes == 0 {
        return Err(Error::invalid("votes must be >= 1"));
    }
    let runs = (0..votes as u64)
        .map(|v| {
            run_bank(
                bank,
                signal,
                sample_rate,
                duration,
                seed_base.wrapping_add(v),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let detectors = (0..bank.detectors.len())
        .map(|i| {
            let cells: Vec<&DetectorResult> = runs.iter().map(|r| &r.detectors[i]).collect();
            let yes = cells.iter().filter(|c| c.resonating).count();
            let mut rates: Vec<f64> = cells.iter().map(|c| c.transition_rate).collect();
            rates.sort_by(f64::total_cmp);
            let f_est = mode_f64(cells.iter().filter_map(|c| c.f_est));
            DetectorResult {
                threshold: cells[0].threshold,
                sigma: cells[0].sigma,
                transition_rate: rates[rates.len() / 2],
                resonating: 2 * yes > votes,
                f_est,
            }
        })
        .collect();
    Ok(BankReport {
        detectors,
        amplitude_low: None,
        amplitude_high: None,
    }
    .with_bracket())
}

fn mode_f64(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let mut v: Vec<f64> = xs.collect();
    v.sort_by(f64::total_cmp);
    let mut best: Option<(f64, usize)> = None;
    let mut i = 0;
    while i < v.len() {
        let j = v[i..].iter().take_while(|&&x| x == v[i]).count();
        if best.is_none_or(|(_, n)| j > n) {
            best = Some((v[i], j));
        }
        i += j;
    }
    best.map(|(x, _)| x)
}

/// `(largest resonating threshold, smallest quiet threshold)` of a threshold sweep.
///
/// `None` when every detector resonates or none does. A pattern that is not a
/// run of resonating detectors followed by quiet ones is an error.
pub fn amplitude_bracket(report: &BankReport) -> Result<Option<(f64, f64)>> {
    let pattern = report.pattern();
    let boundary = pattern.iter().position(|r| !r).unwrap_or(pattern.len());
    if pattern[boundary..].iter().any(|&r| r) {
        return Err(Error::AmbiguousPattern { pattern });
    }
    if boundary == 0 || boundary == pattern.len() {
        return Ok(None);
    }
    Ok(Some((
        report.detectors[boundary - 1].threshold,
        report.detectors[boundary].threshold,
    )))
}
