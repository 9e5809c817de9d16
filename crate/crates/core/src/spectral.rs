//! One-sided magnitude spectra, dB-domain SNR and secondary-peak picking.
//!
//! The forward FFT is unnormalized: `X_k = sum_n x_n exp(-2 pi i k n / N)`.
//! Absolute dB levels therefore scale with `N`; SNR values are differences of
//! dB levels and only depend on the shape of the spectrum.

use std::cell::RefCell;
use std::f64::consts::TAU;
use std::io::{self, Write};

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::signal::Trace;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Window {
    #[default]
    Rectangular,
    Hann,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodogramOptions {
    pub window: Window,
    /// Magnitudes are floored at this value before taking the logarithm.
    pub eps: f64,
}

impl Default for PeriodogramOptions {
    fn default() -> Self {
        PeriodogramOptions {
            window: Window::Rectangular,
            eps: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub df: f64,
    pub mag_db: Vec<f64>,
    /// Linear magnitudes `|X_k|` before flooring.
    pub mag: Vec<f64>,
    pub n_samples: usize,
}

impl Spectrum {
    /// Builds a spectrum from dB values alone (linear magnitudes are derived).
    pub fn from_db(df: f64, mag_db: Vec<f64>, n_samples: usize) -> Result<Self> {
        if !(df > 0.0) {
            return Err(Error::invalid("df must be > 0"));
        }
        if mag_db.len() != n_samples / 2 + 1 {
            return Err(Error::invalid(format!(
                "{} bins do not match {} samples",
                mag_db.len(),
                n_samples
            )));
        }
        let mag = mag_db.iter().map(|d| 10f64.powf(d / 20.0)).collect();
        Ok(Spectrum {
            df,
            mag_db,
            mag,
            n_samples,
        })
    }

    pub fn len(&self) -> usize {
        self.mag_db.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mag_db.is_empty()
    }

    pub fn freq(&self, k: usize) -> f64 {
        k as f64 * self.df
    }

    pub fn nyquist(&self) -> f64 {
        self.df * self.n_samples as f64 / 2.0
    }

    pub fn nearest_bin(&self, f: f64) -> usize {
        ((f / self.df).round() as usize).min(self.len() - 1)
    }

    /// `sum_k |X_k|^2` over the full two-sided spectrum, rebuilt from the
    /// one-sided half by conjugate symmetry.
    pub fn two_sided_energy(&self) -> f64 {
        let n = self.n_samples;
        let last = self.mag.len() - 1;
        self.mag
            .iter()
            .enumerate()
            .map(|(k, m)| {
                let w = if k == 0 || (n.is_multiple_of(2) && k == last) {
                    1.0
                } else {
                    2.0
                };
                w * m * m
            })
            .sum()
    }

    /// Writes `freq_hz,mag_db` rows with a header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "freq_hz,mag_db")?;
        for (k, d) in self.mag_db.iter().enumerate() {
            writeln!(w, "{},{}", self.freq(k), d)?;
        }
        Ok(())
    }
}

pub fn periodogram(trace: &Trace) -> Result<Spectrum> {
    periodogram_with(trace, &PeriodogramOptions::default())
}

pub fn periodogram_with(trace: &Trace, opts: &PeriodogramOptions) -> Result<Spectrum> {
    spectrum_of(&trace.samples, trace.dt, opts)
}

pub(crate) fn spectrum_of(samples: &[f64], dt: f64, opts: &PeriodogramOptions) -> Result<Spectrum> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::invalid("periodogram needs at least 2 samples"));
    }
    if !(opts.eps > 0.0) {
        return Err(Error::invalid("eps must be > 0"));
    }
    let mut buf: Vec<Complex<f64>> = match opts.window {
        Window::Rectangular => samples.iter().map(|&x| Complex::new(x, 0.0)).collect(),
        Window::Hann => samples
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let w = 0.5 - 0.5 * (TAU * i as f64 / n as f64).cos();
                Complex::new(x * w, 0.0)
            })
            .collect(),
    };
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(n));
    fft.process(&mut buf);
    let half = n / 2 + 1;
    let mag: Vec<f64> = buf[..half].iter().map(|c| c.norm()).collect();
    let mag_db = mag
        .iter()
        .map(|&m| 20.0 * m.max(opts.eps).log10())
        .collect();
    Ok(Spectrum {
        df: 1.0 / (n as f64 * dt),
        mag_db,
        mag,
        n_samples: n,
    })
}

/// Signal-bin level minus the mean level over all bins.
pub fn snr_db(spectrum: &Spectrum, f_signal: f64) -> Result<f64> {
    snr_db_with(spectrum, f_signal, true)
}

/// As [`snr_db`]; with `include_signal_bin = false` the mean skips the signal bin.
pub fn snr_db_with(spectrum: &Spectrum, f_signal: f64, include_signal_bin: bool) -> Result<f64> {
    if !(f_signal > 0.0 && f_signal < spectrum.nyquist()) {
        return Err(Error::invalid(format!(
            "signal frequency {f_signal} Hz outside (0, {}) Hz",
            spectrum.nyquist()
        )));
    }
    let k = spectrum.nearest_bin(f_signal);
    let total: f64 = spectrum.mag_db.iter().sum();
    let mean = if include_signal_bin {
        total / spectrum.len() as f64
    } else {
        (total - spectrum.mag_db[k]) / (spectrum.len() - 1) as f64
    };
    Ok(spectrum.mag_db[k] - mean)
}

/// Secondary-peak picker settings.
///
/// Candidates are ranked by `mag_db[k] + tilt_db_per_decade * log10(k)`. The
/// tilt offsets the low-frequency skirt that a switching output always has, so
/// a narrow line higher up can beat broad leakage just above the guard. A peak
/// is reported only if it clears `margin_db` over the median of the ranked
/// values and lies past the end of the DC lobe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakOptions {
    pub margin_db: f64,
    pub tilt_db_per_decade: f64,
    /// Reject a peak that sits on the monotone skirt descending from DC.
    pub reject_dc_lobe: bool,
    /// Refine the bin estimate with a 3-point parabola through the dB values.
    pub interpolate: bool,
}

impl Default for PeakOptions {
    fn default() -> Self {
        PeakOptions {
            margin_db: 6.0,
            tilt_db_per_decade: 10.0,
            reject_dc_lobe: true,
            interpolate: true,
        }
    }
}

pub fn default_dc_guard(spectrum: &Spectrum) -> f64 {
    2.0 * spectrum.df
}

pub fn second_peak_frequency(spectrum: &Spectrum, dc_guard_hz: f64) -> Option<f64> {
    second_peak_frequency_with(spectrum, dc_guard_hz, &PeakOptions::default())
}

pub fn second_peak_frequency_with(
    spectrum: &Spectrum,
    dc_guard_hz: f64,
    opts: &PeakOptions,
) -> Option<f64> {
    let db = &spectrum.mag_db;
    let len = db.len();
    if len < 3 || !(dc_guard_hz >= 0.0) {
        return None;
    }
    let weighted: Vec<f64> = (1..len)
        .map(|k| db[k] + opts.tilt_db_per_decade * (k as f64).log10())
        .collect();
    let w = |k: usize| weighted[k - 1];

    let first = (1..len).find(|&k| spectrum.freq(k) > dc_guard_hz)?;
    let mut best = first;
    for k in first + 1..len {
        if w(k) > w(best) {
            best = k;
        }
    }

    if opts.reject_dc_lobe {
        let mut lobe_end = 1;
        while lobe_end + 1 < len && db[lobe_end + 1] < db[lobe_end] {
            lobe_end += 1;
        }
        if best <= lobe_end {
            return None;
        }
    }

    let mut sorted = weighted.clone();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len();
    let median = if m % 2 == 1 {
        sorted[m / 2]
    } else {
        0.5 * (sorted[m / 2 - 1] + sorted[m / 2])
    };
    if w(best) - median < opts.margin_db {
        return None;
    }

    let mut pos = best as f64;
    if opts.interpolate && best + 1 < len {
        let (a, b, c) = (db[best - 1], db[best], db[best + 1]);
        let denom = a - 2.0 * b + c;
        if denom < 0.0 {
            pos += (0.5 * (a - c) / denom).clamp(-0.5, 0.5);
        }
    }
    Some(pos * spectrum.df)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(f: f64, rate: f64, n: usize) -> Trace {
        let s = (0..n)
            .map(|i| {
                let phase = (f * i as f64 / rate).fract();
                if phase < 0.5 {
                    1.0
                } else {
                    -1.0
                }
            })
            .collect();
        Trace::new(0.0, 1.0 / rate, s).unwrap()
    }

    #[test]
    fn constant_trace_is_all_dc() {
        let tr = Trace::new(0.0, 1e-3, vec![0.7; 1000]).unwrap();
        let sp = periodogram(&tr).unwrap();
        assert_eq!(sp.len(), 501);
        assert!((sp.mag[0] - 700.0).abs() < 1e-9);
        assert!(sp.mag_db[1..].iter().all(|&d| d < -200.0));
    }

    #[test]
    fn sine_bin_is_max() {
        let n = 8000;
        let rate = 20_000.0;
        let s: Vec<f64> = (0..n)
            .map(|i| (TAU * 500.0 * i as f64 / rate).sin())
            .collect();
        let sp = periodogram(&Trace::new(0.0, 1.0 / rate, s).unwrap()).unwrap();
        let k = (1..sp.len())
            .max_by(|&a, &b| sp.mag[a].total_cmp(&sp.mag[b]))
            .unwrap();
        assert_eq!(k, 200);
        assert!((sp.mag[200] - n as f64 / 2.0).abs() < 1e-6);
        assert!(snr_db(&sp, 500.0).unwrap() > 40.0);
    }

    #[test]
    fn square_wave_harmonics() {
        let sp = periodogram(&square(500.0, 20_000.0, 8000)).unwrap();
        // closed-form DFT of a 40-sample period, 20 high then 20 low, over 200 periods:
        // |X_h| = 200 * 2 / sin(pi h / 40) for odd h
        let oracle = |h: f64| 400.0 / (std::f64::consts::PI * h / 40.0).sin();
        for h in [1usize, 3, 5] {
            let m = sp.mag[200 * h];
            assert!(
                (m - oracle(h as f64)).abs() / oracle(h as f64) < 1e-9,
                "h={h}, m={m}"
            );
        }
        // and close to the continuous series (N/2)(4 / (pi h)) at the fundamental
        assert!(
            (sp.mag[200] - 8000.0 / 2.0 * 4.0 / std::f64::consts::PI).abs() / sp.mag[200] < 2e-3
        );
        assert!(sp.mag[200] > sp.mag[600] && sp.mag[600] > sp.mag[1000]);
        assert!(sp.mag[400] < 1e-6 * sp.mag[200]);
    }

    #[test]
    fn flat_spectrum_snr_is_zero() {
        let sp = Spectrum::from_db(1.0, vec![-3.0; 51], 100).unwrap();
        assert!(snr_db(&sp, 10.0).unwrap().abs() < 1e-12);
        assert!(snr_db(&sp, 0.0).is_err());
        assert!(snr_db(&sp, 50.0).is_err());
    }

    #[test]
    fn excluding_signal_bin_raises_snr() {
        let mut db = vec![0.0; 51];
        db[10] = 30.0;
        let sp = Spectrum::from_db(1.0, db, 100).unwrap();
        let a = snr_db_with(&sp, 10.0, true).unwrap();
        let b = snr_db_with(&sp, 10.0, false).unwrap();
        assert!((a - (30.0 - 30.0 / 51.0)).abs() < 1e-12);
        assert!((b - 30.0).abs() < 1e-12);
    }

    #[test]
    fn square_wave_peak_found() {
        let sp = periodogram(&square(500.0, 20_000.0, 8000)).unwrap();
        let f = second_peak_frequency(&sp, default_dc_guard(&sp)).unwrap();
        assert!((f - 500.0).abs() < 1e-9);
    }

    #[test]
    fn flat_spectrum_has_no_peak() {
        let db: Vec<f64> = (0..501)
            .map(|k| if k % 2 == 0 { -1.0 } else { 1.0 })
            .collect();
        let sp = Spectrum::from_db(1.0, db, 1000).unwrap();
        let no_tilt = PeakOptions {
            tilt_db_per_decade: 0.0,
            ..PeakOptions::default()
        };
        assert_eq!(second_peak_frequency_with(&sp, 2.0, &no_tilt), None);
    }

    #[test]
    fn peak_on_dc_skirt_is_rejected() {
        let db: Vec<f64> = (0..501).map(|k| -(k as f64)).collect();
        let sp = Spectrum::from_db(1.0, db, 1000).unwrap();
        assert_eq!(second_peak_frequency(&sp, 2.0), None);
    }

    #[test]
    fn parabolic_refinement_lands_between_bins() {
        let n = 8000;
        let rate = 20_000.0;
        let f = 1001.0;
        let s: Vec<f64> = (0..n).map(|i| (TAU * f * i as f64 / rate).sin()).collect();
        let sp = periodogram(&Trace::new(0.0, 1.0 / rate, s).unwrap()).unwrap();
        let est = second_peak_frequency(&sp, 5.0).unwrap();
        assert!((est - f).abs() < 0.5 * sp.df, "est = {est}");
        assert!((est - f).abs() > 1e-3);
    }

    #[test]
    fn parseval_identity() {
        let s: Vec<f64> = (0..1001)
            .map(|i| ((i * 7919) % 97) as f64 / 97.0 - 0.5)
            .collect();
        let time: f64 = s.iter().map(|x| x * x).sum();
        let sp = periodogram(&Trace::new(0.0, 1e-3, s).unwrap()).unwrap();
        let freq = sp.two_sided_energy() / sp.n_samples as f64;
        assert!(((time - freq) / time).abs() < 1e-9);
    }

    #[test]
    fn hann_window_option() {
        let tr = Trace::new(0.0, 1e-3, vec![1.0; 100]).unwrap();
        let opts = PeriodogramOptions {
            window: Window::Hann,
            ..Default::default()
        };
        let sp = periodogram_with(&tr, &opts).unwrap();
        assert!((sp.mag[0] - 50.0).abs() < 1e-9);
        assert!((sp.mag[1] - 25.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_short_traces() {
        let tr = Trace::new(0.0, 1e-3, vec![1.0]).unwrap();
        assert!(periodogram(&tr).is_err());
    }

    #[test]
    fn csv_layout() {
        let sp = Spectrum::from_db(2.0, vec![0.0, 1.5], 2).unwrap();
        let mut buf = Vec::new();
        sp.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "freq_hz,mag_db\n0,0\n2,1.5\n"
        );
    }
}
