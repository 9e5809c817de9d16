//! Deterministic input signals and the sampled [`Trace`] container.
//!
//! Sample `i` of a generated trace sits at `t = start_time + i * dt`.

use std::f64::consts::TAU;
use std::io::{self, Write};

use crate::error::{Error, Result};

/// Parametric description of a deterministic input voltage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SignalSpec {
    Sine {
        amplitude: f64,
        frequency: f64,
        phase: f64,
    },
    /// `A * exp(-b t) * sin(2 pi f t)` for `t >= 0`.
    DampedSine {
        amplitude: f64,
        decay: f64,
        frequency: f64,
    },
    Dc {
        level: f64,
    },
    /// Linear sweep from `v_start` at `t = 0` to `v_end` at the last sample.
    Ramp {
        v_start: f64,
        v_end: f64,
    },
}

impl SignalSpec {
    pub fn sine(amplitude: f64, frequency: f64) -> Self {
        SignalSpec::Sine {
            amplitude,
            frequency,
            phase: 0.0,
        }
    }

    pub fn damped(amplitude: f64, decay: f64, frequency: f64) -> Self {
        SignalSpec::DampedSine {
            amplitude,
            decay,
            frequency,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |x: f64, name: &str| {
            if x.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be finite")))
            }
        };
        match *self {
            SignalSpec::Sine {
                amplitude,
                frequency,
                phase,
            } => {
                finite(amplitude, "amplitude")?;
                finite(phase, "phase")?;
                check_amp_freq(amplitude, frequency)
            }
            SignalSpec::DampedSine {
                amplitude,
                decay,
                frequency,
            } => {
                check_amp_freq(amplitude, frequency)?;
                if !(decay >= 0.0 && decay.is_finite()) {
                    return Err(Error::invalid(format!("decay must be >= 0, got {decay}")));
                }
                Ok(())
            }
            SignalSpec::Dc { level } => finite(level, "level"),
            SignalSpec::Ramp { v_start, v_end } => {
                finite(v_start, "v_start")?;
                finite(v_end, "v_end")
            }
        }
    }

    /// Signal frequency for the oscillatory variants.
    pub fn frequency(&self) -> Option<f64> {
        match *self {
            SignalSpec::Sine { frequency, .. } | SignalSpec::DampedSine { frequency, .. } => {
                Some(frequency)
            }
            _ => None,
        }
    }

    /// Value at time `t`. Ramps need the total span, so they are evaluated in [`generate`].
    fn value_at(&self, t: f64) -> f64 {
        match *self {
            SignalSpec::Sine {
                amplitude,
                frequency,
                phase,
            } => amplitude * (TAU * frequency * t + phase).sin(),
            SignalSpec::DampedSine {
                amplitude,
                decay,
                frequency,
            } => amplitude * (-decay * t).exp() * (TAU * frequency * t).sin(),
            SignalSpec::Dc { level } => level,
            SignalSpec::Ramp { v_start, .. } => v_start,
        }
    }
}

fn check_amp_freq(amplitude: f64, frequency: f64) -> Result<()> {
    if !(amplitude >= 0.0 && amplitude.is_finite()) {
        return Err(Error::invalid(format!(
            "amplitude must be >= 0, got {amplitude}"
        )));
    }
    if !(frequency > 0.0 && frequency.is_finite()) {
        return Err(Error::invalid(format!(
            "frequency must be > 0, got {frequency}"
        )));
    }
    Ok(())
}

/// Uniformly sampled voltage series.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub start_time: f64,
    pub dt: f64,
    pub samples: Vec<f64>,
}

impl Trace {
    pub fn new(start_time: f64, dt: f64, samples: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid(format!("dt must be > 0, got {dt}")));
        }
        if samples.is_empty() {
            return Err(Error::invalid("trace must contain at least one sample"));
        }
        Ok(Trace {
            start_time,
            dt,
            samples,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 * self.dt
    }

    pub fn sample_rate(&self) -> f64 {
        1.0 / self.dt
    }

    pub fn time(&self, i: usize) -> f64 {
        self.start_time + i as f64 * self.dt
    }

    /// Writes `time_s,volts` rows with a header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "time_s,volts")?;
        for (i, v) in self.samples.iter().enumerate() {
            writeln!(w, "{},{}", self.time(i), v)?;
        }
        Ok(())
    }
}

/// Number of samples covering `duration` at `sample_rate`.
pub fn sample_count(sample_rate: f64, duration: f64) -> Result<usize> {
    if !(sample_rate > 0.0 && sample_rate.is_finite()) {
        return Err(Error::invalid(format!(
            "sample_rate must be > 0, got {sample_rate}"
        )));
    }
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::invalid(format!(
            "duration must be > 0, got {duration}"
        )));
    }
    // Guard against 0.4 * 20000 = 7999.999...
    let n = (duration * sample_rate + 1e-9).floor() as usize;
    Ok(n.max(1))
}

pub fn generate(spec: &SignalSpec, sample_rate: f64, duration: f64) -> Result<Trace> {
    spec.validate()?;
    let n = sample_count(sample_rate, duration)?;
    let dt = 1.0 / sample_rate;
    let samples = match *spec {
        SignalSpec::Ramp { v_start, v_end } => {
            if n == 1 {
                vec![v_start]
            } else {
                let step = (v_end - v_start) / (n - 1) as f64;
                (0..n).map(|i| v_start + step * i as f64).collect()
            }
        }
        _ => (0..n).map(|i| spec.value_at(i as f64 * dt)).collect(),
    };
    Trace::new(0.0, dt, samples)
}

/// Envelope `A * exp(-b t)` of a damped sine.
pub fn envelope(spec: &SignalSpec, t: f64) -> Result<f64> {
    match *spec {
        SignalSpec::DampedSine {
            amplitude, decay, ..
        } => {
            if !(t >= 0.0) {
                return Err(Error::invalid(format!("t must be >= 0, got {t}")));
            }
            Ok(amplitude * (-decay * t).exp())
        }
        _ => Err(Error::invalid("envelope is defined for damped sines only")),
    }
}
