//! Amplitude and decay recovery from last-transition-time statistics.
//!
//! A damped sine that starts above threshold keeps the trigger switching until
//! its envelope sinks into the noise. The last switching time `t0`, averaged
//! over repeated runs, traces a sigmoid in the noise level whose slope and
//! center depend on the decay constant.

mod decay;
mod fit;
mod theory;

use std::io::{self, Write};

use rayon::prelude::*;

pub use decay::{
    calibrate_and_estimate_decay, estimate_decay_from_fits, DecayEstimate, DecayOptions,
    Interpolation, Weighting,
};
pub use fit::{
    fit_sigmoid, fit_sigmoid_with, fit_sigmoid_xy, write_fits_csv, FitOptions, SigmoidFit,
};
pub use theory::{
    expected_t0_theory, expected_t0_theory_with, last_transition_pmf, ln_phi,
    no_transition_probability, p_fire, p_hold, p_t0_density, p_t0_density_with, phi, Quadrature,
    ThresholdGap,
};

use crate::error::{Error, Result};
use crate::experiments::{cell_stream, check_sigmas, mean_std};
use crate::noise::{fill_noise, NoiseSpec};
use crate::signal::{generate, SignalSpec, Trace};
use crate::trigger::{last_switch_index, TriggerConfig};

/// Time of the final level change in `output`, or 0 if the level never changes.
pub fn last_transition_time(output: &Trace) -> f64 {
    output
        .samples
        .windows(2)
        .rposition(|w| w[0] != w[1])
        .map(|i| output.time(i + 1))
        .unwrap_or(0.0)
}

/// Default noise grid: 0 to 0.5 V in 0.01 V steps.
pub fn default_t0_sigma_grid() -> Vec<f64> {
    (0..=50).map(|i| 0.01 * i as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct T0Stats {
    pub sigma: f64,
    pub mean_t0: f64,
    pub std_t0: f64,
    pub n_runs: usize,
    pub n_no_transition: usize,
}

impl T0Stats {
    /// Standard error of `mean_t0`.
    pub fn std_error(&self) -> f64 {
        let used = self.n_runs.max(1) as f64;
        self.std_t0 / used.sqrt()
    }
}

/// Writes `sigma_v,mean_t0_s,std_t0_s,n_runs,n_no_transition` rows.
pub fn write_curve_csv<W: Write>(curve: &[T0Stats], mut w: W) -> io::Result<()> {
    writeln!(w, "sigma_v,mean_t0_s,std_t0_s,n_runs,n_no_transition")?;
    for s in curve {
        writeln!(
            w,
            "{},{},{},{},{}",
            s.sigma, s.mean_t0, s.std_t0, s.n_runs, s.n_no_transition
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct T0Params {
    pub sample_rate: f64,
    pub duration: f64,
    pub noise_rate: f64,
    pub n_runs: usize,
    pub seed_base: u64,
    /// Leave runs without any transition out of the mean instead of counting them as 0.
    pub exclude_no_transition: bool,
}

impl Default for T0Params {
    fn default() -> Self {
        T0Params {
            sample_rate: 20_000.0,
            duration: 1.5,
            noise_rate: 20_000.0,
            n_runs: 50,
            seed_base: 0,
            exclude_no_transition: false,
        }
    }
}

fn aggregate(sigma: f64, t0s: &[Option<f64>], exclude: bool) -> T0Stats {
    let n_no_transition = t0s.iter().filter(|t| t.is_none()).count();
    let used: Vec<f64> = if exclude {
        t0s.iter().flatten().copied().collect()
    } else {
        t0s.iter().map(|t| t.unwrap_or(0.0)).collect()
    };
    let (mean_t0, std_t0) = if used.is_empty() {
        (0.0, 0.0)
    } else {
        mean_std(&used)
    };
    T0Stats {
        sigma,
        mean_t0,
        std_t0,
        n_runs: used.len(),
        n_no_transition,
    }
}

/// Monte Carlo `<t0>` curves for several signals sharing the same noise.
///
/// Run `r` at grid point `i` uses seed `seed_base` and stream
/// [`cell_stream`]`(i, r)` for every signal, so the curves differ only through
/// the signals. Returns one curve per signal.
pub fn t0_sigma_curves(
    config: &TriggerConfig,
    signals: &[SignalSpec],
    sigmas: &[f64],
    params: &T0Params,
) -> Result<Vec<Vec<T0Stats>>> {
    config.validate()?;
    check_sigmas(sigmas)?;
    if params.n_runs == 0 {
        return Err(Error::invalid("n_runs must be >= 1"));
    }
    let traces: Vec<Trace> = signals
        .iter()
        .map(|s| generate(s, params.sample_rate, params.duration))
        .collect::<Result<_>>()?;
    let n = traces.first().map(|t| t.len()).unwrap_or(0);
    let dt = 1.0 / params.sample_rate;

    let cells: Vec<(usize, usize)> = (0..sigmas.len())
        .flat_map(|i| (0..params.n_runs).map(move |r| (i, r)))
        .collect();
    let per_cell: Vec<Vec<Option<f64>>> = cells
        .par_iter()
        .map_init(Vec::new, |buf, &(i, r)| {
            let ns = NoiseSpec::new(sigmas[i], params.noise_rate, params.seed_base)
                .with_stream(cell_stream(i, r));
            buf.clear();
            fill_noise(&ns, params.sample_rate, buf, n)?;
            Ok(traces
                .iter()
                .map(|tr| last_switch_index(config, &tr.samples, buf).map(|k| k as f64 * dt))
                .collect())
        })
        .collect::<Result<_>>()?;

    Ok((0..signals.len())
        .map(|s| {
            sigmas
                .iter()
                .enumerate()
                .map(|(i, &sigma)| {
                    let t0s: Vec<Option<f64>> = per_cell
                        [i * params.n_runs..(i + 1) * params.n_runs]
                        .iter()
                        .map(|c| c[s])
                        .collect();
                    aggregate(sigma, &t0s, params.exclude_no_transition)
                })
                .collect()
        })
        .collect())
}

pub fn t0_sigma_curve(
    config: &TriggerConfig,
    damped: &SignalSpec,
    sigmas: &[f64],
    params: &T0Params,
) -> Result<Vec<T0Stats>> {
    Ok(t0_sigma_curves(config, std::slice::from_ref(damped), sigmas, params)?.remove(0))
}

/// `<t0>` at a single noise level. Same noise as grid point 0 of a curve.
pub fn mean_t0_monte_carlo(
    config: &TriggerConfig,
    damped: &SignalSpec,
    sigma: f64,
    params: &T0Params,
) -> Result<T0Stats> {
    Ok(t0_sigma_curve(config, damped, &[sigma], params)?.remove(0))
}

/// Threshold gap seen by the comparator for a damped sine on this trigger,
/// using the upper threshold and the attenuated envelope.
pub fn envelope_gap(
    config: &TriggerConfig,
    damped: &SignalSpec,
    sample_rate: f64,
    duration: f64,
) -> Result<ThresholdGap> {
    match *damped {
        SignalSpec::DampedSine {
            amplitude, decay, ..
        } => ThresholdGap::envelope(
            config.v_ut,
            config.alpha,
            amplitude,
            decay,
            sample_rate,
            duration,
        ),
        _ => Err(Error::invalid("threshold gap needs a damped sine")),
    }
}
