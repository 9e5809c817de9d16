use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn srlab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_srlab"))
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .env_remove("SRLAB_SEED")
        .output()
        .unwrap()
}

fn tmp(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("srlab-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&d);
    fs::create_dir_all(&d).unwrap();
    d
}

fn read(p: &Path) -> String {
    fs::read_to_string(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn manifest_value(dir: &Path, key: &str) -> String {
    read(&dir.join("manifest.txt"))
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")).map(str::to_string))
        .unwrap()
}

#[test]
fn snr_sweep_reruns_are_identical() {
    let (a, b) = (tmp("det-a"), tmp("det-b"));
    let args = [
        "snr-sweep",
        "--sigma",
        "0.05",
        "--repeats",
        "1",
        "--seed",
        "7",
    ];
    assert!(srlab(&args, &a).status.success());
    assert!(srlab(&args, &b).status.success());
    for f in ["snr_sweep.csv", "manifest.txt"] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    let csv = read(&a.join("snr_sweep.csv"));
    assert!(csv.starts_with("sigma_v,snr_mean_db,snr_std_db,repeats\n0.05,"));
    assert_eq!(csv.lines().count(), 2);
    assert!(!csv.contains('\r'));
}

#[test]
fn seed_changes_output() {
    let (a, b) = (tmp("seed-a"), tmp("seed-b"));
    assert!(srlab(&["transitions", "--seed", "1"], &a).status.success());
    assert!(srlab(&["transitions", "--seed", "2"], &b).status.success());
    assert_ne!(
        read(&a.join("transitions.csv")),
        read(&b.join("transitions.csv"))
    );
}

#[test]
fn env_seed_is_a_fallback() {
    let (a, b) = (tmp("env-a"), tmp("env-b"));
    let run = |dir: &Path, extra: &[&str]| {
        Command::new(env!("CARGO_BIN_EXE_srlab"))
            .arg("transitions")
            .args(extra)
            .arg("--out-dir")
            .arg(dir)
            .env("SRLAB_SEED", "42")
            .output()
            .unwrap()
    };
    assert!(run(&a, &[]).status.success());
    assert!(run(&b, &["--seed", "3"]).status.success());
    assert_eq!(manifest_value(&a, "seed"), "42");
    assert_eq!(manifest_value(&b, "seed"), "3");
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tmp("config");
    let cfg = dir.join("run.ini");
    fs::write(
        &cfg,
        "# transitions run\n[acquisition]\nseed = 9\nsample_rate = 10000\nsigma=0.02\n",
    )
    .unwrap();
    let out = dir.join("out");
    let o = srlab(
        &[
            "transitions",
            "--config",
            cfg.to_str().unwrap(),
            "--sigma",
            "0.03",
        ],
        &out,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(manifest_value(&out, "seed"), "9");
    assert_eq!(manifest_value(&out, "sample-rate"), "10000");
    assert_eq!(manifest_value(&out, "sigma"), "0.03");
    assert_eq!(manifest_value(&out, "noise-rate"), "10000");
}

#[test]
fn usage_errors_exit_2() {
    let dir = tmp("usage");
    for args in [
        vec!["no-such-command"],
        vec!["snr-sweep", "--sigma", "-1"],
        vec!["hysteresis", "--v-min", "0.3", "--v-max", "0.1"],
        vec!["hysteresis", "--preset", "nope"],
        vec!["fit-sigmoid"],
        vec!["hysteresis", "--seed", "4"],
        vec!["snr-sweep", "--sigma-grid", "0.1:0.01:0.01"],
    ] {
        let o = srlab(&args, &dir);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(
            String::from_utf8_lossy(&o.stderr).starts_with("error[usage]"),
            "{args:?}"
        );
    }
    let ini = dir.join("bad.ini");
    fs::write(&ini, "bogus = 1\n").unwrap();
    let o = srlab(&["transitions", "--config", ini.to_str().unwrap()], &dir);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numeric_failure_exits_3() {
    let dir = tmp("numeric");
    let flat = dir.join("flat.csv");
    fs::write(
        &flat,
        "sigma_v,mean_t0_s\n0,0\n0.1,0\n0.2,0\n0.3,0\n0.4,0\n",
    )
    .unwrap();
    let o = srlab(&["fit-sigmoid", "--input", flat.to_str().unwrap()], &dir);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error[computation]"));
}

#[test]
fn unwritable_output_exits_1() {
    let dir = tmp("io");
    let file = dir.join("occupied");
    fs::write(&file, "").unwrap();
    let o = srlab(&["hysteresis"], &file.join("sub"));
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error[io]"));
}

#[test]
fn fig6_transitions_match_thresholds() {
    let dir = tmp("fig6");
    let o = srlab(&["reproduce", "fig6"], &dir);
    assert!(o.status.success());
    // ideal: v_ut = 0.045 at the comparator, 0.09 V raw; measured: 0.049 / -0.0375
    for (file, up, down) in [
        ("hysteresis_ideal.csv", 0.09, -0.09),
        ("hysteresis_measured.csv", 0.098, -0.075),
    ] {
        let csv = read(&dir.join(file));
        let rows: Vec<(String, f64, f64)> = csv
            .lines()
            .skip(1)
            .map(|l| {
                let f: Vec<&str> = l.split(',').collect();
                (
                    f[0].to_string(),
                    f[1].parse().unwrap(),
                    f[2].parse().unwrap(),
                )
            })
            .collect();
        let step = rows[1].1 - rows[0].1;
        let switches = |dir_: &str| -> Vec<f64> {
            let branch: Vec<_> = rows.iter().filter(|r| r.0 == dir_).collect();
            branch
                .windows(2)
                .filter(|w| w[0].2 != w[1].2)
                .map(|w| w[1].1)
                .collect()
        };
        let (asc, desc) = (switches("ascending"), switches("descending"));
        assert_eq!(asc.len(), 1, "{file}");
        assert_eq!(desc.len(), 1, "{file}");
        assert!((asc[0] - up).abs() <= step + 1e-12, "{file}: {asc:?}");
        assert!((desc[0] - down).abs() <= step + 1e-12, "{file}: {desc:?}");
    }
}

#[test]
fn fitted_t0_curve_is_sigmoidal() {
    let dir = tmp("fit");
    let curve_dir = dir.join("curve");
    assert!(srlab(&["t0-curve", "--decay", "5"], &curve_dir)
        .status
        .success());
    let input = curve_dir.join("t0_curve.csv");
    let fit_dir = dir.join("fit");
    let o = srlab(
        &["fit-sigmoid", "--input", input.to_str().unwrap()],
        &fit_dir,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = read(&fit_dir.join("sigmoid_fit.csv"));
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    let r2: f64 = row[3].parse().unwrap();
    assert!(r2 >= 0.99, "r2 = {r2}");
}

#[test]
fn every_command_writes_a_manifest() {
    let dir = tmp("manifest");
    let runs: &[&[&str]] = &[
        &["hysteresis", "--preset", "measured"],
        &["detect-freq"],
        &["freq-table", "--repeats", "2"],
        &["reproduce", "fig4"],
        &[
            "reproduce",
            "fig5",
            "--repeats",
            "1",
            "--sigma-grid",
            "0.02:0.06:0.02",
        ],
        &["reproduce", "fig8"],
        &[
            "reproduce",
            "fig13",
            "--repeats",
            "5",
            "--sigma-grid",
            "0:0.5:0.1",
        ],
        &["bank", "--preset", "sigma"],
    ];
    for (i, args) in runs.iter().enumerate() {
        let out = dir.join(i.to_string());
        let o = srlab(args, &out);
        assert!(
            o.status.success(),
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        let stdout = String::from_utf8_lossy(&o.stdout);
        assert_eq!(stdout.lines().count(), 1, "{args:?}");
        assert_eq!(manifest_value(&out, "version"), env!("CARGO_PKG_VERSION"));
    }
    assert!(dir.join("4/snr_sweep_20000hz.csv").exists());
    assert!(dir.join("4/snr_sweep_4000hz.csv").exists());
    assert!(dir.join("6/t0_curve_b9.csv").exists());
}
