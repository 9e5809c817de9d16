//! Subcommand defaults and runners.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use srlab::amp_detect::{
    self, calibrate_and_estimate_decay, fit_sigmoid_with, t0_sigma_curve, t0_sigma_curves,
    write_curve_csv, write_fits_csv, DecayOptions, FitOptions, T0Params, T0Stats,
};
use srlab::bank::{self, amplitude_bracket, BankConfig};
use srlab::experiments::{capture_transitions, find_sr_peak, snr_sigma_sweep};
use srlab::freq_detect::{
    detect_frequency, error_rate_table, optimal_sigma_search, sigma_noise, summarize,
    write_reports_csv, DetectParams,
};
use srlab::spectral::periodogram;
use srlab::trigger::{hysteresis_sweep, thresholds_from_divider, v_th_from_vdc};
use srlab::{NoiseSpec, SignalSpec, TriggerConfig};

use crate::params::Params;
use crate::{CliError, Command, Figure};

type Defaults = &'static [(&'static str, &'static str)];

const ACQ: Defaults = &[
    ("seed", "0"),
    ("sample-rate", "20000"),
    ("duration", "0.4"),
    ("noise-rate", ""),
];

const HYST_IDEAL: Defaults = &[
    ("preset", "ideal"),
    ("vdc", "1"),
    ("ratio", "0.045"),
    ("v-min", "-0.2"),
    ("v-max", "0.2"),
    ("points", "401"),
];
const HYST_MEASURED: Defaults = &[
    ("preset", "measured"),
    ("v-min", "-0.2"),
    ("v-max", "0.2"),
    ("points", "401"),
];
const TRANSITIONS: Defaults = &[
    ("vdc", "1"),
    ("amplitude", "0.1"),
    ("frequency", "100"),
    ("sigma", "0.05"),
];
const SNR: Defaults = &[
    ("vdc", "1"),
    ("amplitude", "0.05"),
    ("frequency", "500"),
    ("sigma-grid", "0.01:0.2:0.005"),
    ("repeats", "10"),
];
const DETECT: Defaults = &[
    ("vdc", "1"),
    ("amplitude", "0.1"),
    ("decay", "5"),
    ("frequency", "500"),
    ("sigma", "0.01"),
];
const TABLE: Defaults = &[
    ("vdc", "1"),
    ("amplitude", "0.1"),
    ("decay", "5"),
    ("sigma", "0.01"),
    ("frequencies", "10,50,100,500,1000,2000"),
    ("repeats", "20"),
];
const OPTIMAL: Defaults = &[
    ("vdc", "1"),
    ("amplitude", "0.1"),
    ("decay", "5"),
    ("frequency", "50"),
    ("sigma-grid", "0.01:0.05:0.01"),
    ("repeats", "1"),
];
const T0: Defaults = &[
    ("duration", "1.5"),
    ("vdc", "4"),
    ("amplitude", "0.1"),
    ("decay", "5"),
    ("frequency", "1000"),
    ("sigma-grid", "0:0.5:0.01"),
    ("repeats", "50"),
    ("exclude-no-transition", "false"),
];
const FIT: Defaults = &[
    ("input", ""),
    ("plateau", "1.5"),
    ("float-plateau", "false"),
    ("decay", "5"),
];
const DECAY: Defaults = &[
    ("duration", "1.5"),
    ("vdc", "4"),
    ("amplitude", "0.1"),
    ("frequency", "1000"),
    ("decay", "5"),
    ("decays", "1,3,7,9"),
    ("sigma-grid", "0:0.5:0.01"),
    ("repeats", "3000"),
    ("shared-noise", "true"),
    ("plateau", "1.5"),
];
const BANK_THRESHOLD: Defaults = &[
    ("preset", "threshold"),
    ("amplitude", "0.01"),
    ("frequency", "100"),
    ("repeats", "20"),
];
const BANK_SIGMA: Defaults = &[
    ("preset", "sigma"),
    ("vdc", "1"),
    ("amplitude", "0.05"),
    ("frequency", "500"),
    ("sigma-grid", "0.01:0.1:0.01"),
];
const FIG5: Defaults = &[
    ("vdc", "1"),
    ("amplitude", "0.05"),
    ("frequency", "500"),
    ("sigma-grid", "0.01:0.2:0.005"),
    ("repeats", "10"),
    ("noise-rates", "20000,4000"),
];
const FIG6: Defaults = &[
    ("vdc", "1"),
    ("ratio", "0.045"),
    ("v-min", "-0.2"),
    ("v-max", "0.2"),
    ("points", "401"),
];
const FIG8: Defaults = &[
    ("vdc-grid", "1:5:0.5"),
    ("ratio", "0.045"),
    ("v-min", "-0.5"),
    ("v-max", "0.5"),
    ("points", "10001"),
];
const FIG13: Defaults = &[
    ("duration", "1.5"),
    ("vdc", "4"),
    ("amplitude", "0.1"),
    ("frequency", "1000"),
    ("decays", "1,3,5,7,9"),
    ("sigma-grid", "0:0.5:0.01"),
    ("repeats", "50"),
    ("plateau", "1.5"),
];

fn build(parts: &[Defaults]) -> Params {
    let mut p = Params::with_defaults(&[]);
    for part in parts {
        for (k, v) in *part {
            p.set(k, *v);
        }
    }
    p
}

pub fn defaults(cmd: Command, preset: Option<&str>) -> Result<Params, CliError> {
    let bad_preset = |p: &str| CliError::Usage(format!("unknown preset `{p}` for this command"));
    Ok(match cmd {
        Command::Hysteresis => match preset.unwrap_or("ideal") {
            "ideal" => build(&[HYST_IDEAL]),
            "measured" => build(&[HYST_MEASURED]),
            p => return Err(bad_preset(p)),
        },
        Command::Transitions => build(&[ACQ, TRANSITIONS]),
        Command::SnrSweep => build(&[ACQ, SNR]),
        Command::DetectFreq => build(&[ACQ, DETECT]),
        Command::FreqTable => build(&[ACQ, TABLE]),
        Command::OptimalSigma => build(&[ACQ, OPTIMAL]),
        Command::T0Curve => build(&[ACQ, T0]),
        Command::FitSigmoid => build(&[FIT]),
        Command::EstimateDecay => build(&[ACQ, DECAY]),
        Command::Bank => match preset.unwrap_or("threshold") {
            "threshold" => {
                let mut p = build(&[ACQ, BANK_THRESHOLD]);
                p.set("sigma", bank::DEFAULT_BANK_SIGMA.to_string());
                let th: Vec<String> = bank::default_thresholds()
                    .iter()
                    .map(f64::to_string)
                    .collect();
                p.set("thresholds", th.join(","));
                p
            }
            "sigma" => build(&[ACQ, BANK_SIGMA]),
            p => return Err(bad_preset(p)),
        },
        Command::Reproduce { figure } => match figure {
            Figure::Fig4 => build(&[ACQ, TRANSITIONS]),
            Figure::Fig5 => build(&[ACQ, FIG5]),
            Figure::Fig6 => build(&[FIG6]),
            Figure::Fig8 => build(&[FIG8]),
            Figure::Table1 => build(&[ACQ, TABLE]),
            Figure::Fig12 => build(&[ACQ, OPTIMAL]),
            Figure::Fig13 => build(&[ACQ, FIG13]),
        },
    })
}

fn command_name(cmd: Command) -> String {
    match cmd {
        Command::Hysteresis => "hysteresis".into(),
        Command::Transitions => "transitions".into(),
        Command::SnrSweep => "snr-sweep".into(),
        Command::DetectFreq => "detect-freq".into(),
        Command::FreqTable => "freq-table".into(),
        Command::OptimalSigma => "optimal-sigma".into(),
        Command::T0Curve => "t0-curve".into(),
        Command::FitSigmoid => "fit-sigmoid".into(),
        Command::EstimateDecay => "estimate-decay".into(),
        Command::Bank => "bank".into(),
        Command::Reproduce { figure } => {
            let f = match figure {
                Figure::Fig4 => "fig4",
                Figure::Fig5 => "fig5",
                Figure::Fig6 => "fig6",
                Figure::Fig8 => "fig8",
                Figure::Table1 => "table1",
                Figure::Fig12 => "fig12",
                Figure::Fig13 => "fig13",
            };
            format!("reproduce {f}")
        }
    }
}

struct Out<'a> {
    dir: &'a Path,
    written: Vec<String>,
}

impl Out<'_> {
    fn write<F>(&mut self, name: &str, f: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    {
        let path = self.dir.join(name);
        let file = File::create(&path)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", path.display())))?;
        let mut w = BufWriter::new(file);
        f(&mut w)?;
        w.flush()?;
        self.written.push(name.to_string());
        Ok(())
    }
}

pub fn execute(cmd: Command, p: &Params, dir: &Path) -> Result<String, CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    let mut out = Out {
        dir,
        written: Vec::new(),
    };
    let name = command_name(cmd);
    let summary = match cmd {
        Command::Hysteresis => hysteresis(p, &mut out, "hysteresis.csv")?,
        Command::Transitions
        | Command::Reproduce {
            figure: Figure::Fig4,
        } => transitions(p, &mut out)?,
        Command::SnrSweep => snr_sweep(p, &mut out)?,
        Command::DetectFreq => detect(p, &mut out)?,
        Command::FreqTable
        | Command::Reproduce {
            figure: Figure::Table1,
        } => freq_table(p, &mut out)?,
        Command::OptimalSigma
        | Command::Reproduce {
            figure: Figure::Fig12,
        } => optimal(p, &mut out)?,
        Command::T0Curve => t0_curve(p, &mut out)?,
        Command::FitSigmoid => fit(p, &mut out)?,
        Command::EstimateDecay => estimate_decay(p, &mut out)?,
        Command::Bank => bank_cmd(p, &mut out)?,
        Command::Reproduce {
            figure: Figure::Fig5,
        } => fig5(p, &mut out)?,
        Command::Reproduce {
            figure: Figure::Fig6,
        } => fig6(p, &mut out)?,
        Command::Reproduce {
            figure: Figure::Fig8,
        } => fig8(p, &mut out)?,
        Command::Reproduce {
            figure: Figure::Fig13,
        } => fig13(p, &mut out)?,
    };
    let manifest = p.manifest(&name);
    out.write("manifest.txt", |w| w.write_all(manifest.as_bytes()))?;
    Ok(format!("{name}: {summary} [{}]", out.written.join(", ")))
}

fn noise(p: &Params, sigma: f64) -> Result<NoiseSpec, CliError> {
    Ok(NoiseSpec::new(sigma, p.f64("noise-rate")?, p.u64("seed")?))
}

fn hysteresis(p: &Params, out: &mut Out, file: &str) -> Result<String, CliError> {
    let cfg = match p.raw("preset")? {
        "measured" => TriggerConfig::measured_loop(),
        _ => TriggerConfig::ideal(p.f64("vdc")?, p.f64("ratio")?)?,
    };
    let lp = hysteresis_sweep(&cfg, p.f64("v-min")?, p.f64("v-max")?, p.usize("points")?)?;
    out.write(file, |w| lp.write_csv(w))?;
    let show = |x: Option<f64>| {
        x.map(|v| format!("{v:.4} V"))
            .unwrap_or_else(|| "none".into())
    };
    Ok(format!(
        "ascending switch at {}, descending switch at {} ({} up, {} down)",
        show(lp.measured_up_threshold),
        show(lp.measured_down_threshold),
        lp.up_transitions,
        lp.down_transitions
    ))
}

fn transitions(p: &Params, out: &mut Out) -> Result<String, CliError> {
    let cfg = TriggerConfig::calibrated(p.f64("vdc")?)?;
    let f = p.f64("frequency")?;
    let sig = SignalSpec::sine(p.f64("amplitude")?, f);
    let duration = p.f64("duration")?;
    let cap = capture_transitions(
        &cfg,
        &sig,
        &noise(p, p.f64("sigma")?)?,
        p.f64("sample-rate")?,
        duration,
    )?;
    out.write("transitions.csv", |w| cap.write_csv(w))?;
    let n = cap.transitions();
    Ok(format!(
        "{n} transitions, {:.2} per signal period",
        n as f64 / (duration * f)
    ))
}

fn snr_sweep(p: &Params, out: &mut Out) -> Result<String, CliError> {
    let (summary, sweep) = run_sweep(p, p.f64("noise-rate")?)?;
    out.write("snr_sweep.csv", |w| sweep.write_csv(w))?;
    Ok(summary)
}

fn run_sweep(
    p: &Params,
    noise_rate: f64,
) -> Result<(String, srlab::experiments::SweepResult), CliError> {
    let cfg = TriggerConfig::calibrated(p.f64("vdc")?)?;
    let sig = SignalSpec::sine(p.f64("amplitude")?, p.f64("frequency")?);
    let tmpl = NoiseSpec::new(0.0, noise_rate, p.u64("seed")?);
    let sweep = snr_sigma_sweep(
        &cfg,
        &sig,
        &tmpl,
        &p.list("sigma-grid")?,
        p.f64("sample-rate")?,
        p.f64("duration")?,
        p.usize("repeats")?,
    )?;
    let (s, v) = find_sr_peak(&sweep)?;
    Ok((
        format!(
            "peak SNR {v:.2} dB at sigma {s} V ({} points x {} repeats)",
            sweep.len(),
            sweep.repeats
        ),
        sweep,
    ))
}

fn detect(p: &Params, out: &mut Out) -> Result<String, CliError> {
    let cfg = TriggerConfig::calibrated(p.f64("vdc")?)?;
    let d = SignalSpec::damped(p.f64("amplitude")?, p.f64("decay")?, p.f64("frequency")?);
    let ns = noise(p, p.f64("sigma")?)?;
    let (rate, dur) = (p.f64("sample-rate")?, p.f64("duration")?);
    let r = detect_frequency(&cfg, &d, &ns, rate, dur, None)?;
    let cap = capture_transitions(&cfg, &d, &ns, rate, dur)?;
    let sp = periodogram(&cap.output)?;
    out.write("detect_freq.csv", |w| write_reports_csv(&[r], w))?;
    out.write("spectrum.csv", |w| sp.write_csv(w))?;
    Ok(match (r.f_est, r.error_pct) {
        (Some(f), Some(e)) => format!("estimated {f:.3} Hz (true {} Hz, error {e:.3} %)", r.f_true),
        _ => format!("peak not found (true {} Hz)", r.f_true),
    })
}

fn detect_params(p: &Params) -> Result<DetectParams, CliError> {
    Ok(DetectParams {
        amplitude: p.f64("amplitude")?,
        decay: p.f64("decay")?,
        sigma: if p.contains("sigma") {
            p.f64("sigma")?
        } else {
            0.0
        },
        noise_rate: p.f64("noise-rate")?,
        sample_rate: p.f64("sample-rate")?,
        duration: p.f64("duration")?,
        seed: p.u64("seed")?,
        ..Default::default()
    })
}

fn freq_table(p: &Params, out: &mut Out) -> Result<String, CliError> {
    let cfg = TriggerConfig::calibrated(p.f64("vdc")?)?;
    let reports = error_rate_table(
        &cfg,
        &p.list("frequencies")?,
        &detect_params(p)?,
        p.usize("repeats")?,
    )?;
    let sums = summarize(&reports);
    out.write("freq_table.csv", |w| write_reports_csv(&reports, w))?;
    out.write("freq_summary.csv", |w| {
        writeln!(w, "f_true_hz,mean_error_pct,n_detected,n_missing")?;
        for s in &sums {
            let e = s.mean_error_pct.map(|e| e.to_string()).unwrap_or_default();
            writeln!(w, "{},{},{},{}", s.f_true, e, s.n_detected, s.n_missing)?;
        }
        Ok(())
    })?;
    let cells: Vec<String> = sums
        .iter()
        .map(|s| match s.mean_error_pct {
            Some(e) => format!("{} Hz {e:.3} %", s.f_true),
            None => format!("{} Hz not found", s.f_true),
        })
        .collect();
    Ok(format!("mean error {}", cells.join(", ")))
}

fn optimal(p: &Params, out: &mut Out) -> Result<String, CliError> {
    let cfg = TriggerConfig::calibrated(p.f64("vdc")?)?;
    let dp = detect_params(p)?;
    let d = SignalSpec::damped(dp.amplitude, dp.decay, p.f64("frequency")?);
    let grid = p.list("sigma-grid")?;
    let o = optimal_sigma_search(&cfg, &d, &grid, &dp, p.usize("repeats")?)?;
    let reports = (0..grid.len())
        .map(|i| {
            detect_frequency(
                &cfg,
                &d,
                &sigma_noise(&dp, &grid, i, 0),
                dp.sample_rate,
                dp.duration,
                None,
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    out.write("optimal_sigma.csv", |w| {
        writeln!(w, "sigma_v,snr_mean_db")?;
        for (s, v) in &o.snr_curve {
            writeln!(w, "{s},{v}")?;
        }
        Ok(())
    })?;
    out.write("optimal_sigma_detect.csv", |w| {
        write_reports_csv(&reports, w)
    })?;
    let star = grid.iter().position(|&s| s == o.sigma_star).unwrap_or(0);
    let err = reports[star]
        .error_pct
        .map(|e| format!("{e:.3} %"))
        .unwrap_or_else(|| "peak not found".into());
    Ok(format!(
        "sigma* = {} V, detection error there {err}",
        o.sigma_star
    ))
}

fn t0_params(p: &Params) -> Result<T0Params, CliError> {
    Ok(T0Params {
        sample_rate: p.f64("sample-rate")?,
        duration: p.f64("duration")?,
        noise_rate: p.f64("noise-rate")?,
        n_runs: p.usize("repeats")?,
        seed_base: p.u64("seed")?,
        exclude_no_transition: if p.contains("exclude-no-transition") {
            p.bool("exclude-no-transition")?
        } else {
            false
        },
    })
}

fn t0_curve(p: &Params, out: &mut Out) -> Result<String, CliError> {
    let cfg = TriggerConfig::calibrated(p.f64("vdc")?)?;
    let d = SignalSpec::damped(p.f64("amplitude")?, p.f64("decay")?, p.f64("frequency")?);
    let curve = t0_sigma_curve(&cfg, &d, &p.list("sigma-grid")?, &t0_params(p)?)?;
    out.write("t0_curve.csv", |w| write_curve_csv(&curve, w))?;
    let last = curve.last().map(|s| s.mean_t0).unwrap_or(0.0);
    Ok(format!("{} points, <t0> rises to {last:.4} s", curve.len()))
}

fn read_curve(path: &str) -> Result<Vec<T0Stats>, CliError> {
    if path.is_empty() {
        return Err(CliError::Usage(
            "fit-sigmoid needs --input <curve.csv>".into(),
        ));
    }
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {path}: {e}")))?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
    let col = |name: &str| header.iter().position(|h| h.trim() == name);
    let (Some(ci), Some(mi)) = (col("sigma_v"), col("mean_t0_s")) else {
        return Err(CliError::Usage(format!(
            "{path}: needs sigma_v and mean_t0_s columns"
        )));
    };
    let (si, ni, zi) = (col("std_t0_s"), col("n_runs"), col("n_no_transition"));
    let bad = |n: usize| CliError::Usage(format!("{path}: bad value on line {}", n + 2));
    lines
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(n, l)| {
            let cells: Vec<&str> = l.split(',').collect();
            let get = |i: Option<usize>| -> Result<Option<f64>, CliError> {
                match i {
                    None => Ok(None),
                    Some(i) => cells
                        .get(i)
                        .and_then(|c| c.trim().parse::<f64>().ok())
                        .map(Some)
                        .ok_or_else(|| bad(n)),
                }
            };
            Ok(T0Stats {
                sigma: get(Some(ci))?.unwrap_or(0.0),
                mean_t0: get(Some(mi))?.unwrap_or(0.0),
                std_t0: get(si)?.unwrap_or(0.0),
                n_runs: get(ni)?.unwrap_or(0.0) as usize,
                n_no_transition: get(zi)?.unwrap_or(0.0) as usize,
            })
        })
        .collect()
}

fn fit(p: &Params, out: &mut Out) -> Result<String, CliError> {
    let curve = read_curve(p.raw("input")?)?;
    let opts = FitOptions {
        float_plateau: p.bool("float-plateau")?,
        ..Default::default()
    };
    let f = fit_sigmoid_with(&curve, p.f64("plateau")?, &opts)?;
    let b = p.f64("decay")?;
    out.write("sigmoid_fit.csv", |w| write_fits_csv(&[(b, f)], w))?;
    Ok(format!(
        "slope {:.3} 1/V, center {:.5} V, plateau {} s, r2 {:.5}",
        f.slope_a, f.center_b, f.plateau_t, f.r_squared
    ))
}

fn estimate_decay(p: &Params, out: &mut Out) -> Result<String, CliError> {
    let cfg = TriggerConfig::calibrated(p.f64("vdc")?)?;
    let (amp, f, b_true) = (p.f64("amplitude")?, p.f64("frequency")?, p.f64("decay")?);
    let decays = p.list("decays")?;
    let grid = p.list("sigma-grid")?;
    let tp = t0_params(p)?;
    let shared = p.bool("shared-noise")?;
    let mut signals: Vec<SignalSpec> = decays
        .iter()
        .map(|&b| SignalSpec::damped(amp, b, f))
        .collect();
    let observed_signal = SignalSpec::damped(amp, b_true, f);
    if shared {
        signals.push(observed_signal);
    }
    let mut curves = t0_sigma_curves(&cfg, &signals, &grid, &tp)?;
    let observed = if shared {
        curves.pop().unwrap_or_default()
    } else {
        let tp2 = T0Params {
            seed_base: tp.seed_base.wrapping_add(1),
            ..tp
        };
        t0_sigma_curve(&cfg, &observed_signal, &grid, &tp2)?
    };
    let calibration: Vec<(f64, Vec<T0Stats>)> = decays.iter().copied().zip(curves).collect();
    let est = calibrate_and_estimate_decay(
        &calibration,
        &observed,
        p.f64("plateau")?,
        &DecayOptions::default(),
    )?;
    out.write("decay_fits.csv", |w| write_fits_csv(&est.calibration, w))?;
    out.write("decay_estimate.csv", |w| {
        writeln!(
            w,
            "true_decay_b,estimated_decay_b,extrapolated,slope_a,center_b,r2"
        )?;
        let o = &est.observed;
        writeln!(
            w,
            "{b_true},{},{},{},{},{}",
            est.decay, est.extrapolated, o.slope_a, o.center_b, o.r_squared
        )
    })?;
    Ok(format!(
        "estimated b = {:.3} 1/s (true {b_true}){}",
        est.decay,
        if est.extrapolated {
            ", observed fit outside the calibration hull"
        } else {
            ""
        }
    ))
}

fn bank_cmd(p: &Params, out: &mut Out) -> Result<String, CliError> {
    let (rate, dur, seed) = (p.f64("sample-rate")?, p.f64("duration")?, p.u64("seed")?);
    let sig = SignalSpec::sine(p.f64("amplitude")?, p.f64("frequency")?);
    let noise_rate = p.f64("noise-rate")?;
    if p.raw("preset")? == "sigma" {
        let cfg = TriggerConfig::calibrated(p.f64("vdc")?)?;
        let b = BankConfig::sigma_sweep(&cfg, &p.list("sigma-grid")?, noise_rate)?;
        let r = bank::run_bank(&b, &sig, rate, dur, seed)?;
        out.write("bank.csv", |w| r.write_csv(w))?;
        let res = r.detectors.iter().filter(|d| d.resonating).count();
        return Ok(format!(
            "{res} of {} detectors resonating",
            r.detectors.len()
        ));
    }
    let b = BankConfig::threshold_sweep(&p.list("thresholds")?, p.f64("sigma")?, noise_rate)?;
    let r = bank::run_bank_voted(&b, &sig, rate, dur, seed, p.usize("repeats")?)?;
    out.write("bank.csv", |w| r.write_csv(w))?;
    match amplitude_bracket(&r)? {
        Some((lo, hi)) => Ok(format!("amplitude between {lo:.5} V and {hi:.5} V")),
        None => Ok("amplitude outside the threshold range".into()),
    }
}

fn fig5(p: &Params, out: &mut Out) -> Result<String, CliError> {
    let mut parts = Vec::new();
    for nr in p.list("noise-rates")? {
        let (s, sweep) = run_sweep(p, nr)?;
        out.write(&format!("snr_sweep_{nr}hz.csv"), |w| sweep.write_csv(w))?;
        parts.push(format!("{nr} Hz noise: {s}"));
    }
    Ok(parts.join("; "))
}

fn fig6(p: &Params, out: &mut Out) -> Result<String, CliError> {
    let mut ideal = p.clone();
    ideal.set("preset", "ideal");
    let a = hysteresis(&ideal, out, "hysteresis_ideal.csv")?;
    let mut measured = p.clone();
    measured.set("preset", "measured");
    let b = hysteresis(&measured, out, "hysteresis_measured.csv")?;
    Ok(format!("ideal: {a}; measured: {b}"))
}

fn fig8(p: &Params, out: &mut Out) -> Result<String, CliError> {
    let ratio = p.f64("ratio")?;
    let (lo, hi, n) = (p.f64("v-min")?, p.f64("v-max")?, p.usize("points")?);
    let mut rows = Vec::new();
    for v in p.list("vdc-grid")? {
        let emp = v_th_from_vdc(v)?;
        let (div, _) = thresholds_from_divider(v, ratio)?;
        let cfg = TriggerConfig::calibrated(v)?;
        let lp = hysteresis_sweep(&cfg, lo, hi, n)?;
        let measured = lp.measured_up_threshold.map(|x| x * cfg.alpha);
        rows.push((v, emp, div, measured));
    }
    out.write("threshold_law.csv", |w| {
        writeln!(w, "vdc_v,v_th_empirical_v,v_th_divider_v,v_th_measured_v")?;
        for (v, e, d, m) in &rows {
            writeln!(
                w,
                "{v},{e},{d},{}",
                m.map(|x| x.to_string()).unwrap_or_default()
            )?;
        }
        Ok(())
    })?;
    Ok(format!(
        "{} supply settings, V_th = 0.051 V_dc - 0.005",
        rows.len()
    ))
}

fn fig13(p: &Params, out: &mut Out) -> Result<String, CliError> {
    let cfg = TriggerConfig::calibrated(p.f64("vdc")?)?;
    let (amp, f) = (p.f64("amplitude")?, p.f64("frequency")?);
    let decays = p.list("decays")?;
    let signals: Vec<SignalSpec> = decays
        .iter()
        .map(|&b| SignalSpec::damped(amp, b, f))
        .collect();
    let curves = t0_sigma_curves(&cfg, &signals, &p.list("sigma-grid")?, &t0_params(p)?)?;
    let plateau = p.f64("plateau")?;
    let mut fits = Vec::new();
    for (b, c) in decays.iter().zip(&curves) {
        out.write(&format!("t0_curve_b{b}.csv"), |w| write_curve_csv(c, w))?;
        fits.push((*b, amp_detect::fit_sigmoid(c, plateau)?));
    }
    out.write("sigmoid_fits.csv", |w| write_fits_csv(&fits, w))?;
    let min_r2 = fits
        .iter()
        .map(|(_, f)| f.r_squared)
        .fold(f64::INFINITY, f64::min);
    Ok(format!("{} decay curves, min r2 {min_r2:.5}", fits.len()))
}
