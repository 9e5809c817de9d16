//! Inverting Schmitt trigger.
//!
//! The comparator input is `v_n = alpha * (signal + noise)`. From HIGH the
//! output drops to `v_sat_neg` once `v_n > v_ut`; from LOW it returns to
//! `v_sat_pos` once `v_n < v_lt`. Inside `[v_lt, v_ut]` the state holds.

use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::signal::Trace;

/// Slope of the empirical threshold vs. supply law.
pub const VTH_SLOPE: f64 = 0.051;
/// Offset of the empirical threshold vs. supply law, volts.
pub const VTH_OFFSET: f64 = -0.005;
/// Default divider ratio of the feedback network.
pub const DEFAULT_RATIO: f64 = 0.045;
/// Default input attenuation (the series divider halves signal and noise).
pub const DEFAULT_ALPHA: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Level {
    High,
    Low,
}

/// Current output state of the trigger.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TriggerState {
    pub level: Level,
}

impl TriggerState {
    pub fn new(level: Level) -> Self {
        TriggerState { level }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriggerConfig {
    pub v_sat_pos: f64,
    pub v_sat_neg: f64,
    pub v_ut: f64,
    pub v_lt: f64,
    pub alpha: f64,
    pub v_dc: f64,
    pub initial: Level,
}

impl TriggerConfig {
    pub fn new(v_sat_pos: f64, v_sat_neg: f64, v_ut: f64, v_lt: f64, alpha: f64) -> Result<Self> {
        let c = TriggerConfig {
            v_sat_pos,
            v_sat_neg,
            v_ut,
            v_lt,
            alpha,
            v_dc: v_sat_pos,
            initial: Level::High,
        };
        c.validate()?;
        Ok(c)
    }

    /// Symmetric thresholds from the feedback divider, saturating at the supply.
    pub fn ideal(v_dc: f64, ratio: f64) -> Result<Self> {
        let (v_ut, v_lt) = thresholds_from_divider(v_dc, ratio)?;
        let mut c = Self::new(v_dc, -v_dc, v_ut, v_lt, DEFAULT_ALPHA)?;
        c.v_dc = v_dc;
        Ok(c)
    }

    /// Symmetric thresholds `+-v_th_from_vdc(v_dc)`, saturating at the supply.
    pub fn calibrated(v_dc: f64) -> Result<Self> {
        let th = v_th_from_vdc(v_dc)?;
        let mut c = Self::new(v_dc, -v_dc, th, -th, DEFAULT_ALPHA)?;
        c.v_dc = v_dc;
        Ok(c)
    }

    /// Asymmetric element matching the measured 1 V hysteresis loop: comparator
    /// thresholds 0.049 / -0.0375 V and saturations 0.93 / -0.915 V.
    pub fn measured_loop() -> Self {
        TriggerConfig {
            v_sat_pos: 0.93,
            v_sat_neg: -0.915,
            v_ut: 0.049,
            v_lt: -0.0375,
            alpha: DEFAULT_ALPHA,
            v_dc: 1.0,
            initial: Level::High,
        }
    }

    pub fn with_initial(mut self, level: Level) -> Self {
        self.initial = level;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Result<Self> {
        self.alpha = alpha;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let all_finite = [
            self.v_sat_pos,
            self.v_sat_neg,
            self.v_ut,
            self.v_lt,
            self.alpha,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::invalid("trigger parameters must be finite"));
        }
        if !(self.v_lt < self.v_ut) {
            return Err(Error::invalid(format!(
                "v_lt ({}) must be below v_ut ({})",
                self.v_lt, self.v_ut
            )));
        }
        if !(self.v_sat_neg < 0.0 && 0.0 < self.v_sat_pos) {
            return Err(Error::invalid("saturation levels must straddle zero"));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::invalid(format!(
                "alpha must be in (0, 1], got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    /// Input-referred (pre-attenuation) thresholds `(v_ut / alpha, v_lt / alpha)`.
    pub fn raw_thresholds(&self) -> (f64, f64) {
        (self.v_ut / self.alpha, self.v_lt / self.alpha)
    }

    /// Feedback coefficient `v_ut / v_sat_pos`.
    pub fn feedback_coefficient(&self) -> f64 {
        self.v_ut / self.v_sat_pos
    }

    pub fn output(&self, level: Level) -> f64 {
        match level {
            Level::High => self.v_sat_pos,
            Level::Low => self.v_sat_neg,
        }
    }

    #[inline]
    pub(crate) fn next_level(&self, level: Level, v_n: f64) -> Level {
        match level {
            Level::High if v_n > self.v_ut => Level::Low,
            Level::Low if v_n < self.v_lt => Level::High,
            l => l,
        }
    }
}

/// `(v_ut, v_lt) = (v_sat * ratio, -v_sat * ratio)`.
pub fn thresholds_from_divider(v_sat: f64, ratio: f64) -> Result<(f64, f64)> {
    if !(v_sat > 0.0 && v_sat.is_finite()) {
        return Err(Error::invalid(format!("v_sat must be > 0, got {v_sat}")));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::invalid(format!(
            "ratio must be in (0, 1), got {ratio}"
        )));
    }
    Ok((v_sat * ratio, -v_sat * ratio))
}

/// Empirical threshold magnitude `0.051 * v_dc - 0.005`.
pub fn v_th_from_vdc(v_dc: f64) -> Result<f64> {
    if !(v_dc > 0.0 && v_dc.is_finite()) {
        return Err(Error::invalid(format!("v_dc must be > 0, got {v_dc}")));
    }
    Ok(VTH_SLOPE * v_dc + VTH_OFFSET)
}

pub fn step(state: TriggerState, v_n: f64, config: &TriggerConfig) -> (TriggerState, f64) {
    let level = config.next_level(state.level, v_n);
    (TriggerState { level }, config.output(level))
}

/// Runs the trigger over `alpha * (signal + noise)` and returns the output trace.
pub fn run(config: &TriggerConfig, signal: &Trace, noise: &Trace) -> Result<Trace> {
    config.validate()?;
    if signal.len() != noise.len() {
        return Err(Error::invalid(format!(
            "signal has {} samples but noise has {}",
            signal.len(),
            noise.len()
        )));
    }
    if (signal.dt - noise.dt).abs() > 1e-12 * signal.dt.abs() {
        return Err(Error::invalid(
            "signal and noise use different sample intervals",
        ));
    }
    let mut level = config.initial;
    let out = signal
        .samples
        .iter()
        .zip(&noise.samples)
        .map(|(s, n)| {
            level = config.next_level(level, config.alpha * (s + n));
            config.output(level)
        })
        .collect();
    Trace::new(signal.start_time, signal.dt, out)
}

/// Index of the last sample whose level differs from its predecessor, driven by
/// the comparator inputs `alpha * (signal[i] + noise[i])`. `None` if the output
/// never changes. The initial level counts as the state before sample 0.
pub(crate) fn last_switch_index(
    config: &TriggerConfig,
    signal: &[f64],
    noise: &[f64],
) -> Option<usize> {
    let mut level = config.initial;
    let mut last = None;
    for (i, (s, n)) in signal.iter().zip(noise).enumerate() {
        let next = config.next_level(level, config.alpha * (s + n));
        if next != level {
            last = Some(i);
            level = next;
        }
    }
    last
}

#[derive(Debug, Clone, PartialEq)]
pub struct HysteresisLoop {
    pub ascending: Vec<(f64, f64)>,
    pub descending: Vec<(f64, f64)>,
    /// Raw input at which the ascending sweep switched the output, if it did.
    pub measured_up_threshold: Option<f64>,
    /// Raw input at which the descending sweep switched the output, if it did.
    pub measured_down_threshold: Option<f64>,
    pub up_transitions: usize,
    pub down_transitions: usize,
}

impl HysteresisLoop {
    /// Enclosed area in the `(v_in, v_out)` plane.
    pub fn area(&self) -> f64 {
        // Both branches share the same v_in grid in reverse order.
        let asc = &self.ascending;
        let desc: Vec<_> = self.descending.iter().rev().collect();
        let mut area = 0.0;
        for k in 1..asc.len().min(desc.len()) {
            let dv = asc[k].0 - asc[k - 1].0;
            let gap_a = desc[k].1 - asc[k].1;
            let gap_b = desc[k - 1].1 - asc[k - 1].1;
            area += 0.5 * dv * (gap_a + gap_b);
        }
        area.abs()
    }

    /// Writes `direction,v_in,v_out` rows, ascending branch first.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "direction,v_in,v_out")?;
        for (v, o) in &self.ascending {
            writeln!(w, "ascending,{v},{o}")?;
        }
        for (v, o) in &self.descending {
            writeln!(w, "descending,{v},{o}")?;
        }
        Ok(())
    }
}

/// Noiseless ramp `v_min -> v_max -> v_min` of raw input, `points` per branch.
/// The trigger starts in the state forced by `v_min` (or `config.initial` if
/// `v_min` lies inside the band).
pub fn hysteresis_sweep(
    config: &TriggerConfig,
    v_min: f64,
    v_max: f64,
    points: usize,
) -> Result<HysteresisLoop> {
    config.validate()?;
    if !(v_min < v_max) || !v_min.is_finite() || !v_max.is_finite() {
        return Err(Error::invalid(format!(
            "need v_min < v_max, got {v_min}, {v_max}"
        )));
    }
    if points < 2 {
        return Err(Error::invalid("hysteresis sweep needs at least 2 points"));
    }
    let step_v = (v_max - v_min) / (points - 1) as f64;
    let grid: Vec<f64> = (0..points).map(|i| v_min + step_v * i as f64).collect();

    let mut level = config.next_level(config.initial, config.alpha * v_min);
    let mut sweep = |inputs: &mut dyn Iterator<Item = f64>| {
        let mut pts = Vec::with_capacity(points);
        let mut first = None;
        let mut count = 0;
        for v in inputs {
            let next = config.next_level(level, config.alpha * v);
            if next != level {
                count += 1;
                first.get_or_insert(v);
            }
            level = next;
            pts.push((v, config.output(level)));
        }
        (pts, first, count)
    };
    let (ascending, up, up_n) = sweep(&mut grid.iter().copied());
    let (descending, down, down_n) = sweep(&mut grid.iter().rev().copied());
    Ok(HysteresisLoop {
        ascending,
        descending,
        measured_up_threshold: up,
        measured_down_threshold: down,
        up_transitions: up_n,
        down_transitions: down_n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{generate, SignalSpec};

    #[test]
    fn divider_thresholds() {
        assert_eq!(
            thresholds_from_divider(1.0, 0.045).unwrap(),
            (0.045, -0.045)
        );
        let (u, l) = thresholds_from_divider(4.0, 0.045).unwrap();
        assert!((u - 4.0 * 0.045).abs() < 1e-15 && (l + 0.18).abs() < 1e-15);
        let (u1, _) = thresholds_from_divider(1.3, 0.2).unwrap();
        let (u2, _) = thresholds_from_divider(2.6, 0.2).unwrap();
        assert!((u2 - 2.0 * u1).abs() < 1e-15);
        assert!(thresholds_from_divider(1.0, 1.0).is_err());
        assert!(thresholds_from_divider(1.0, 0.0).is_err());
    }

    #[test]
    fn empirical_law() {
        assert!((v_th_from_vdc(1.0).unwrap() - 0.046).abs() < 1e-15);
        assert!((v_th_from_vdc(4.0).unwrap() - 0.199).abs() < 1e-15);
        let root = 0.005 / 0.051;
        assert!(v_th_from_vdc(root).unwrap().abs() < 1e-15);
        assert!(v_th_from_vdc(0.0).is_err());
    }

    #[test]
    fn step_table() {
        let c = TriggerConfig::ideal(1.0, 0.045).unwrap();
        let hi = TriggerState::new(Level::High);
        let lo = TriggerState::new(Level::Low);
        assert_eq!(step(hi, 0.045 + 1e-9, &c), (lo, -1.0));
        assert_eq!(step(hi, 0.045, &c), (hi, 1.0));
        assert_eq!(step(hi, 0.0, &c), (hi, 1.0));
        assert_eq!(step(lo, -0.045 - 1e-9, &c), (hi, 1.0));
        assert_eq!(step(lo, 0.0, &c), (lo, -1.0));
    }

    #[test]
    fn silent_input_holds() {
        let c = TriggerConfig::ideal(1.0, 0.045).unwrap();
        let z = Trace::new(0.0, 1e-3, vec![0.0; 100]).unwrap();
        let out = run(&c, &z, &z).unwrap();
        assert!(out.samples.iter().all(|&v| v == 1.0));
        let out = run(&c.with_initial(Level::Low), &z, &z).unwrap();
        assert!(out.samples.iter().all(|&v| v == -1.0));
    }

    #[test]
    fn super_threshold_sine_gives_square_wave() {
        let c = TriggerConfig::ideal(1.0, 0.045).unwrap();
        let amp = 2.0 * c.v_ut / c.alpha;
        let f = 100.0;
        let s = generate(&SignalSpec::sine(amp, f), 20_000.0, 0.4).unwrap();
        let z = Trace::new(0.0, s.dt, vec![0.0; s.len()]).unwrap();
        let out = run(&c, &s, &z).unwrap();
        // oracle: count sign changes of the output directly
        let switches = out.samples.windows(2).filter(|w| w[0] != w[1]).count();
        assert_eq!(switches, 2 * (0.4 * f) as usize);
        // the first swing goes low during the positive half cycle
        let first = out.samples.iter().position(|&v| v < 0.0).unwrap();
        assert!(first < 50);
    }

    #[test]
    fn mismatched_grids_rejected() {
        let c = TriggerConfig::ideal(1.0, 0.045).unwrap();
        let a = Trace::new(0.0, 1e-3, vec![0.0; 10]).unwrap();
        let b = Trace::new(0.0, 1e-3, vec![0.0; 11]).unwrap();
        let d = Trace::new(0.0, 2e-3, vec![0.0; 10]).unwrap();
        assert!(run(&c, &a, &b).is_err());
        assert!(run(&c, &a, &d).is_err());
    }

    #[test]
    fn ideal_loop_switches_at_point_zero_nine() {
        let c = TriggerConfig::ideal(1.0, 0.045).unwrap();
        let lp = hysteresis_sweep(&c, -0.2, 0.2, 401).unwrap();
        assert_eq!((lp.up_transitions, lp.down_transitions), (1, 1));
        assert!((lp.measured_up_threshold.unwrap() - 0.09).abs() <= 0.001 + 1e-12);
        assert!((lp.measured_down_threshold.unwrap() + 0.09).abs() <= 0.001 + 1e-12);
        // area of an ideal rectangle: threshold width times output swing
        assert!((lp.area() - 0.18 * 2.0).abs() < 0.01);
    }

    #[test]
    fn measured_loop_is_asymmetric() {
        let c = TriggerConfig::measured_loop();
        let lp = hysteresis_sweep(&c, -0.2, 0.2, 4001).unwrap();
        assert!((lp.measured_up_threshold.unwrap() - 0.098).abs() <= 1e-4 + 1e-12);
        assert!((lp.measured_down_threshold.unwrap() + 0.075).abs() <= 1e-4 + 1e-12);
        let outs: Vec<f64> = lp.ascending.iter().map(|p| p.1).collect();
        assert!(outs.contains(&0.93) && outs.contains(&-0.915));
        assert_eq!(c.raw_thresholds(), (0.098, -0.075));
    }

    #[test]
    fn loop_csv_layout() {
        let c = TriggerConfig::ideal(1.0, 0.045).unwrap();
        let lp = hysteresis_sweep(&c, -0.2, 0.2, 3).unwrap();
        let mut buf = Vec::new();
        lp.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = s.lines().collect();
        assert_eq!(lines[0], "direction,v_in,v_out");
        assert_eq!(lines.len(), 7);
        assert_eq!(lines[1], "ascending,-0.2,1");
        assert_eq!(lines[6], "descending,-0.2,1");
    }

    #[test]
    fn invalid_configs() {
        assert!(TriggerConfig::new(1.0, -1.0, -0.1, 0.1, 0.5).is_err());
        assert!(TriggerConfig::new(1.0, 1.0, 0.1, -0.1, 0.5).is_err());
        assert!(TriggerConfig::new(1.0, -1.0, 0.1, -0.1, 0.0).is_err());
        assert!(TriggerConfig::new(1.0, -1.0, 0.1, -0.1, 1.5).is_err());
    }
}
