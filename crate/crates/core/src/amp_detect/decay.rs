//! Decay-constant inversion from a calibration table of sigmoid fits.
//!
//! Each calibration curve (known `b`) yields a point `(a, c)` in fit-parameter
//! space. The points are joined by a curve parameterized by `b`, and the
//! estimate is the `b` whose point lies closest to the fit of the observed
//! curve after scaling each coordinate.

use crate::error::{Error, Result};

use super::fit::{fit_sigmoid_with, FitOptions, SigmoidFit};
use super::T0Stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Interpolation {
    /// Piecewise linear in `b`.
    Linear,
    /// Monotone piecewise cubic Hermite (Fritsch-Carlson slopes).
    #[default]
    Pchip,
}

/// Scaling of the two coordinates before measuring distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Weighting {
    /// Divide by the spread of the calibration values.
    #[default]
    Range,
    /// Divide by the standard errors of the observed fit.
    StdError,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DecayOptions {
    pub fit: FitOptions,
    pub interpolation: Interpolation,
    pub weighting: Weighting,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayEstimate {
    pub decay: f64,
    /// The observed fit lies outside the calibration range in `a` or `c`.
    pub extrapolated: bool,
    /// Scaled distance between the observed point and the calibration curve.
    pub distance: f64,
    pub observed: SigmoidFit,
    pub calibration: Vec<(f64, SigmoidFit)>,
}

/// Fits every calibration curve and the observed curve, then inverts for `b`.
pub fn calibrate_and_estimate_decay(
    curves_by_b: &[(f64, Vec<T0Stats>)],
    observed: &[T0Stats],
    plateau_t: f64,
    opts: &DecayOptions,
) -> Result<DecayEstimate> {
    let mut fits = curves_by_b
        .iter()
        .map(|(b, c)| Ok((*b, fit_sigmoid_with(c, plateau_t, &opts.fit)?)))
        .collect::<Result<Vec<_>>>()?;
    fits.sort_by(|x, y| x.0.total_cmp(&y.0));
    let obs = fit_sigmoid_with(observed, plateau_t, &opts.fit)?;
    estimate_decay_from_fits(&fits, &obs, opts)
}

/// Inversion step on already-fitted parameters. `calibration` must be sorted by `b`.
pub fn estimate_decay_from_fits(
    calibration: &[(f64, SigmoidFit)],
    observed: &SigmoidFit,
    opts: &DecayOptions,
) -> Result<DecayEstimate> {
    if calibration.len() < 3 {
        return Err(Error::invalid(format!(
            "decay calibration needs at least 3 curves, got {}",
            calibration.len()
        )));
    }
    let bs: Vec<f64> = calibration.iter().map(|(b, _)| *b).collect();
    if bs.windows(2).any(|w| !(w[1] > w[0])) || bs.iter().any(|b| !b.is_finite()) {
        return Err(Error::invalid(
            "calibration decays must be distinct and finite",
        ));
    }
    let a: Vec<f64> = calibration.iter().map(|(_, f)| f.slope_a).collect();
    let c: Vec<f64> = calibration.iter().map(|(_, f)| f.center_b).collect();

    let span = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    };
    let (a_lo, a_hi) = span(&a);
    let (c_lo, c_hi) = span(&c);
    let positive = |x: f64| if x > 0.0 && x.is_finite() { x } else { 1.0 };
    let (sa, sc) = match opts.weighting {
        Weighting::Range => (positive(a_hi - a_lo), positive(c_hi - c_lo)),
        Weighting::StdError => (positive(observed.se_a), positive(observed.se_b)),
    };
    let extrapolated = observed.slope_a < a_lo
        || observed.slope_a > a_hi
        || observed.center_b < c_lo
        || observed.center_b > c_hi;

    let ia = Interp::new(&bs, &a, opts.interpolation);
    let ic = Interp::new(&bs, &c, opts.interpolation);
    let dist2 = |b: f64| {
        let da = (ia.eval(b) - observed.slope_a) / sa;
        let dc = (ic.eval(b) - observed.center_b) / sc;
        da * da + dc * dc
    };

    let mut best_b = bs[0];
    let mut best_d = dist2(bs[0]);
    for w in bs.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        const STEPS: usize = 64;
        let h = (hi - lo) / STEPS as f64;
        let mut k_best = 0;
        let mut d_best = f64::INFINITY;
        for k in 0..=STEPS {
            let d = dist2(lo + h * k as f64);
            if d < d_best {
                d_best = d;
                k_best = k;
            }
        }
        let x0 = lo + h * k_best.saturating_sub(1) as f64;
        let x1 = (lo + h * (k_best + 1) as f64).min(hi);
        let (xb, db) = golden_min(&dist2, x0, x1);
        let (xb, db) = if db < d_best {
            (xb, db)
        } else {
            (lo + h * k_best as f64, d_best)
        };
        if db < best_d {
            best_d = db;
            best_b = xb;
        }
    }
    // Snap to a knot when it fits at least as well.
    for &b in &bs {
        let d = dist2(b);
        if d <= best_d {
            best_d = d;
            best_b = b;
        }
    }
    Ok(DecayEstimate {
        decay: best_b,
        extrapolated,
        distance: best_d.sqrt(),
        observed: *observed,
        calibration: calibration.to_vec(),
    })
}

fn golden_min(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..100 {
        if hi - lo <= 1e-12 * (1.0 + lo.abs()) {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

struct Interp {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
    kind: Interpolation,
}

impl Interp {
    fn new(x: &[f64], y: &[f64], kind: Interpolation) -> Self {
        let n = x.len();
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
        let mut d = vec![0.0; n];
        if kind == Interpolation::Pchip {
            for i in 1..n - 1 {
                if delta[i - 1] * delta[i] > 0.0 {
                    let w1 = 2.0 * h[i] + h[i - 1];
                    let w2 = h[i] + 2.0 * h[i - 1];
                    d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
                }
            }
            d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
            d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        }
        Interp {
            x: x.to_vec(),
            y: y.to_vec(),
            d,
            kind,
        }
    }

    fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        let i = match self.x.iter().rposition(|&xi| xi <= t) {
            Some(i) if i >= n - 1 => n - 2,
            Some(i) => i,
            None => 0,
        };
        let h = self.x[i + 1] - self.x[i];
        let s = (t - self.x[i]) / h;
        match self.kind {
            Interpolation::Linear => self.y[i] + s * (self.y[i + 1] - self.y[i]),
            Interpolation::Pchip => {
                let (s2, s3) = (s * s, s * s * s);
                let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
                let h10 = s3 - 2.0 * s2 + s;
                let h01 = -2.0 * s3 + 3.0 * s2;
                let h11 = s3 - s2;
                h00 * self.y[i]
                    + h10 * h * self.d[i]
                    + h01 * self.y[i + 1]
                    + h11 * h * self.d[i + 1]
            }
        }
    }
}

fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if d.signum() != d0.signum() {
        0.0
    } else if d0.signum() != d1.signum() && d.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        d
    }
}
