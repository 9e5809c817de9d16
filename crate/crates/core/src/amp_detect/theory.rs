//! Last-transition-time distribution under the independent-window model.
//!
//! Time is discretized on the sample grid `t_k = k * dt`. In each window the
//! noise either pushes the comparator input past the threshold gap `v_k`
//! (probability `Phi(-v_k / sigma)`) or not. The last transition falls at `t_k`
//! when window `k` fires and no later window does:
//!
//! ```text
//! P_k = Phi(-v_k / sigma) * prod_{j > k} Phi(v_j / sigma)
//! ```
//!
//! Runs without any transition get `t0 = 0`, so `<t0> = sum_k t_k P_k`.

use crate::error::{Error, Result};
use crate::signal::sample_count;

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Standard normal CDF.
pub fn phi(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// `ln Phi(x)`, accurate in both tails.
pub fn ln_phi(x: f64) -> f64 {
    if x > 0.0 {
        (-0.5 * libm::erfc(x / SQRT_2)).ln_1p()
    } else if x > -35.0 {
        phi(x).ln()
    } else {
        // asymptotic Mills-ratio expansion
        let x2 = x * x;
        -0.5 * x2 - (-x).ln() - LN_SQRT_2PI + (1.0 - 1.0 / x2 + 3.0 / (x2 * x2)).ln()
    }
}

/// Probability that one window does not fire, `P1 = Phi(v / sigma)`.
pub fn p_hold(v: f64, sigma: f64) -> f64 {
    phi(v / sigma)
}

/// Probability that one window fires, `P2 = Phi(-v / sigma)`.
pub fn p_fire(v: f64, sigma: f64) -> f64 {
    phi(-v / sigma)
}

/// Threshold gap `v(t) = V0 - f(t)` sampled on `t_k = k * dt`, `k < N`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdGap {
    pub v0: f64,
    pub values: Vec<f64>,
    pub dt: f64,
    /// Acquisition time `N * dt`.
    pub t_end: f64,
}

impl ThresholdGap {
    pub fn new(v0: f64, values: Vec<f64>, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::invalid("dt must be > 0"));
        }
        if values.is_empty() {
            return Err(Error::invalid("gap grid is empty"));
        }
        let t_end = values.len() as f64 * dt;
        Ok(ThresholdGap {
            v0,
            values,
            dt,
            t_end,
        })
    }

    /// Envelope gap `v_k = v0 - alpha * amplitude * exp(-decay * t_k)`.
    pub fn envelope(
        v0: f64,
        alpha: f64,
        amplitude: f64,
        decay: f64,
        sample_rate: f64,
        duration: f64,
    ) -> Result<Self> {
        let n = sample_count(sample_rate, duration)?;
        let dt = 1.0 / sample_rate;
        let values = (0..n)
            .map(|k| v0 - alpha * amplitude * (-decay * k as f64 * dt).exp())
            .collect();
        Self::new(v0, values, dt)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }
}

/// Integration rule for the hold exponent and the outer mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Quadrature {
    /// Exact discrete sums over the sample grid (matches a sampled simulation).
    #[default]
    SampleSum,
    /// Trapezoidal rule on the same grid.
    Trapezoid,
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("sigma must be > 0, got {sigma}")))
    }
}

/// `suffix[k] = sum_{j > k} ln Phi(v_j / sigma)`.
fn hold_suffix(gap: &ThresholdGap, sigma: f64) -> Vec<f64> {
    let n = gap.len();
    let mut suffix = vec![0.0; n];
    for k in (0..n - 1).rev() {
        suffix[k] = suffix[k + 1] + ln_phi(gap.values[k + 1] / sigma);
    }
    suffix
}

/// `suffix[k] = integral_{t_k}^{t_last} ln Phi(v(t)/sigma) dt / dt`, trapezoidal.
fn hold_suffix_trapezoid(gap: &ThresholdGap, sigma: f64) -> Vec<f64> {
    let n = gap.len();
    let lp: Vec<f64> = gap.values.iter().map(|v| ln_phi(v / sigma)).collect();
    let mut suffix = vec![0.0; n];
    for k in (0..n - 1).rev() {
        suffix[k] = suffix[k + 1] + 0.5 * (lp[k] + lp[k + 1]);
    }
    suffix
}

/// Per-sample probabilities `P_k` that the last transition falls on sample `k`.
pub fn last_transition_pmf(gap: &ThresholdGap, sigma: f64) -> Result<Vec<f64>> {
    check_sigma(sigma)?;
    let suffix = hold_suffix(gap, sigma);
    Ok(gap
        .values
        .iter()
        .zip(&suffix)
        .map(|(v, s)| p_fire(*v, sigma) * s.exp())
        .collect())
}

/// Probability that no window fires in the whole acquisition.
pub fn no_transition_probability(gap: &ThresholdGap, sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    Ok(gap
        .values
        .iter()
        .map(|v| ln_phi(v / sigma))
        .sum::<f64>()
        .exp())
}

/// Density of the last transition time at `t0`, in 1/s.
pub fn p_t0_density(gap: &ThresholdGap, sigma: f64, t0: f64) -> Result<f64> {
    p_t0_density_with(gap, sigma, t0, Quadrature::default())
}

pub fn p_t0_density_with(gap: &ThresholdGap, sigma: f64, t0: f64, rule: Quadrature) -> Result<f64> {
    check_sigma(sigma)?;
    if !(0.0..=gap.t_end).contains(&t0) {
        return Err(Error::invalid(format!(
            "t0 = {t0} outside [0, {}]",
            gap.t_end
        )));
    }
    let k = ((t0 / gap.dt).round() as usize).min(gap.len() - 1);
    let suffix = match rule {
        Quadrature::SampleSum => hold_suffix(gap, sigma),
        Quadrature::Trapezoid => hold_suffix_trapezoid(gap, sigma),
    };
    Ok(p_fire(gap.values[k], sigma) * suffix[k].exp() / gap.dt)
}

/// Mean last transition time `<t0>` with the no-transition sentinel `t0 = 0`.
pub fn expected_t0_theory(gap: &ThresholdGap, sigma: f64) -> Result<f64> {
    expected_t0_theory_with(gap, sigma, Quadrature::default())
}

pub fn expected_t0_theory_with(gap: &ThresholdGap, sigma: f64, rule: Quadrature) -> Result<f64> {
    check_sigma(sigma)?;
    match rule {
        Quadrature::SampleSum => {
            let pmf = last_transition_pmf(gap, sigma)?;
            Ok(pmf.iter().enumerate().map(|(k, p)| gap.time(k) * p).sum())
        }
        Quadrature::Trapezoid => {
            let suffix = hold_suffix_trapezoid(gap, sigma);
            let f: Vec<f64> = (0..gap.len())
                .map(|k| gap.time(k) * p_fire(gap.values[k], sigma) * suffix[k].exp() / gap.dt)
                .collect();
            Ok(f.windows(2).map(|w| 0.5 * (w[0] + w[1]) * gap.dt).sum())
        }
    }
}
