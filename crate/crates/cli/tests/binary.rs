use std::path::Path;
use std::process::{Command, Output};

use csgl_amp::GroupedComplexVector;
use csgl_amp::Thresholds;
use csgl_amp_cli::selftest::{default_onsager, run_selftest, run_selftest_with};

const TINY: &str = "scenario = gaussian\nrows = 60\ngroups = 12\ngroup_size = 5\nnonzeros = 2\nactive = 3\n\
                    snr_db = 5, 15\ntrials = 6\nseed = 4\nsolvers = ost-topk, cgl-amp, csgl-amp\n";

fn csgl(args: &[&str], dir: &Path, threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_csgl-amp"));
    cmd.args(args).current_dir(dir);
    match threads {
        Some(t) => cmd.env("CSGL_AMP_THREADS", t),
        None => cmd.env_remove("CSGL_AMP_THREADS"),
    };
    cmd.output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn sweep_writes_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("tiny.cfg"), TINY).unwrap();
    let out = csgl(&["sweep", "tiny.cfg", "-o", "out.csv"], dir.path(), None);
    assert!(out.status.success(), "{}", stderr(&out));

    let csv = std::fs::read_to_string(dir.path().join("out.csv")).unwrap();
    let lines: Vec<_> = csv.lines().collect();
    assert_eq!(lines[0], "solver,snr_db,pmd,pfa,trials,misdetected,wall_time_ms");
    assert_eq!(lines.len(), 1 + 3 * 2);
    assert!(lines[1].starts_with("ost-topk,5,"));
    assert!(lines[6].starts_with("csgl-amp,15,"));
    for l in &lines[1..] {
        let f: Vec<_> = l.split(',').collect();
        assert_eq!(f.len(), 7);
        assert_eq!(f[4], "6");
    }

    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("out.json")).unwrap()).unwrap();
    for key in ["config_digest", "code_version", "seed", "timestamp", "snr_definition", "detection_rule"] {
        assert!(manifest.get(key).is_some(), "manifest lacks {key}");
    }
    assert_eq!(manifest["seed"], 4);
    assert_eq!(manifest["config_digest"].as_str().unwrap().len(), 64);
    assert_eq!(manifest["command"], "sweep");
    assert_eq!(manifest["output"], "out.csv");
}

#[test]
fn overrides_change_seed_and_trials() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("tiny.cfg"), TINY).unwrap();
    let out = csgl(&["sweep", "tiny.cfg", "-o", "o.csv", "--seed", "99", "--trials", "2"], dir.path(), None);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.path().join("o.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.split(',').nth(4) == Some("2")));
    let manifest = std::fs::read_to_string(dir.path().join("o.json")).unwrap();
    assert!(manifest.contains("\"seed\": 99"));
}

#[test]
fn output_is_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("tiny.cfg"), TINY).unwrap();
    let mut bodies = Vec::new();
    for (i, threads) in ["1", "1", "3"].iter().enumerate() {
        let name = format!("r{i}.csv");
        let out = csgl(&["sweep", "tiny.cfg", "-o", &name, "--no-timing"], dir.path(), Some(threads));
        assert!(out.status.success(), "{}", stderr(&out));
        bodies.push(std::fs::read(dir.path().join(&name)).unwrap());
    }
    assert_eq!(bodies[0], bodies[1]);
    assert_eq!(bodies[0], bodies[2]);
    let text = String::from_utf8(bodies[0].clone()).unwrap();
    assert!(text.lines().skip(1).all(|l| l.ends_with(",0.000")));
}

#[test]
fn invalid_inputs_exit_nonzero_without_output() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("empty.cfg"), TINY.replace("snr_db = 5, 15", "snr_db =")).unwrap();
    let out = csgl(&["sweep", "empty.cfg", "-o", "x.csv"], dir.path(), None);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("snr_points"), "{}", stderr(&out));
    assert!(!dir.path().join("x.csv").exists());

    std::fs::write(dir.path().join("tiny.cfg"), TINY).unwrap();
    let out = csgl(&["sweep", "tiny.cfg", "-o", "x.csv"], dir.path(), Some("many"));
    assert!(!out.status.success());
    assert!(stderr(&out).contains("CSGL_AMP_THREADS"), "{}", stderr(&out));

    let out = csgl(&["sweep", "missing.cfg", "-o", "x.csv"], dir.path(), None);
    assert!(!out.status.success());
    assert!(!dir.path().join("x.csv").exists());
}

#[test]
fn region_writes_boundaries() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = TINY.replace("snr_db = 5, 15", "snr_db = 30") + "delta_grid = 0.5, 1\nrho_grid = 0.1:0.5:0.1\ntarget_pmd = 0\n";
    std::fs::write(dir.path().join("reg.cfg"), cfg).unwrap();
    let out = csgl(&["region", "reg.cfg", "-o", "reg.csv", "--trials", "3"], dir.path(), None);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.path().join("reg.csv")).unwrap();
    let lines: Vec<_> = csv.lines().collect();
    assert_eq!(lines[0], "solver,snr_db,delta,rho_g_max");
    assert_eq!(lines.len(), 1 + 3 * 2);
    for l in &lines[1..] {
        let rho = l.rsplit(',').next().unwrap();
        assert!(rho == "NA" || rho.parse::<f64>().is_ok(), "{l}");
    }
    assert!(dir.path().join("reg.json").exists());
}

#[test]
fn calibrate_reports_best_pair_per_solver() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("tiny.cfg"), TINY).unwrap();
    let out =
        csgl(&["calibrate", "tiny.cfg", "-o", "cal.csv", "--alpha1", "1.2,1.6", "--alpha2", "0.4,0.8", "--trials", "3"], dir.path(), None);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.path().join("cal.csv")).unwrap();
    let lines: Vec<_> = csv.lines().collect();
    assert_eq!(lines[0], "solver,snr_db,alpha1,alpha2,pmd,pfa");
    // AMP variants only, one row per SNR point
    assert_eq!(lines.len(), 1 + 2 * 2);
    assert!(lines[1..].iter().all(|l| !l.starts_with("ost")));
}

#[test]
fn selftest_command_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = csgl(&["selftest"], dir.path(), None);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{stdout}");
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 4);
}

#[test]
fn selftest_catches_a_perturbed_onsager_term() {
    assert!(run_selftest().iter().all(|c| c.passed));
    let skewed = |r: &GroupedComplexVector, t: &Thresholds| 1.01 * default_onsager(r, t);
    let checks = run_selftest_with(&skewed);
    let onsager = checks.iter().find(|c| c.name == "onsager oracle").unwrap();
    assert!(!onsager.passed, "{}", onsager.detail);
    assert!(checks.iter().filter(|c| c.name != "onsager oracle").all(|c| c.passed));
}
