use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use csgl_amp::harness::{
    calibrate_thresholds, snr_sweep, validity_region, CalibrationResult, ExperimentConfig, MetricsRow, RegionRow, Workers,
};

use crate::manifest::{FailedTrials, RunManifest};

pub const SWEEP_HEADER: &str = "solver,snr_db,pmd,pfa,trials,misdetected,wall_time_ms";
pub const REGION_HEADER: &str = "solver,snr_db,delta,rho_g_max";
pub const CALIBRATION_HEADER: &str = "solver,snr_db,alpha1,alpha2,pmd,pfa";

/// Environment variable capping worker threads (`0` or unset: all cores).
pub const THREADS_ENV: &str = "CSGL_AMP_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error(transparent)]
    Core(#[from] csgl_amp::Error),
    #[error("{THREADS_ENV}='{0}' is not a non-negative integer")]
    Threads(String),
    #[error("cannot write {path}: {source}")]
    Write { path: String, source: std::io::Error },
}

/// Reads [`THREADS_ENV`].
pub fn threads_from_env() -> Result<usize, RunError> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(0),
        Ok(v) if v.trim().is_empty() => Ok(0),
        Ok(v) => v.trim().parse().map_err(|_| RunError::Threads(v)),
    }
}

pub fn sweep_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{},{},{},{},{},{},{:.3}", r.solver, r.snr_db, r.pmd, r.pfa, r.trials, r.misdetected, r.wall_time_ms);
    }
    out
}

pub fn region_csv(rows: &[RegionRow]) -> String {
    let mut out = String::from(REGION_HEADER);
    out.push('\n');
    for r in rows {
        let rho = r.rho_g_max.map_or_else(|| "NA".to_string(), |v| v.to_string());
        let _ = writeln!(out, "{},{},{},{}", r.solver, r.snr_db, r.delta, rho);
    }
    out
}

pub fn calibration_csv(result: &CalibrationResult) -> String {
    let mut out = String::from(CALIBRATION_HEADER);
    out.push('\n');
    for r in &result.best {
        let _ = writeln!(out, "{},{},{},{},{},{}", r.solver, r.snr_db, r.alpha1, r.alpha2, r.pmd, r.pfa);
    }
    out
}

/// `results.csv` -> `results.json`.
pub fn manifest_path(out: &Path) -> PathBuf {
    if out.extension().is_some_and(|e| e == "json") {
        let mut name = out.as_os_str().to_owned();
        name.push(".manifest.json");
        PathBuf::from(name)
    } else {
        out.with_extension("json")
    }
}

/// Writes every `(path, contents)` pair via temporary files in the target
/// directories and renames them only once all were written.
pub fn write_atomically(files: &[(&Path, &str)]) -> Result<(), RunError> {
    let err = |path: &Path| {
        let path = path.display().to_string();
        move |source: std::io::Error| RunError::Write { path, source }
    };
    let mut staged = Vec::with_capacity(files.len());
    for (path, contents) in files {
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(err(path))?;
        tmp.write_all(contents.as_bytes()).map_err(err(path))?;
        tmp.as_file().sync_all().map_err(err(path))?;
        staged.push((tmp, *path));
    }
    for (tmp, path) in staged {
        tmp.persist(path).map_err(|e| err(path)(e.error))?;
    }
    Ok(())
}

fn write_with_manifest(out: &Path, body: &str, mut manifest: RunManifest) -> Result<(), RunError> {
    manifest.output = out.file_name().map_or_else(|| out.display().to_string(), |n| n.to_string_lossy().into_owned());
    let json = manifest.to_json();
    write_atomically(&[(out, body), (&manifest_path(out), &json)])
}

pub fn cmd_sweep(config: &ExperimentConfig, out: &Path, threads: usize) -> Result<Vec<MetricsRow>, RunError> {
    let workers = Workers::new(threads)?;
    let rows = snr_sweep(config, &workers)?;
    let mut manifest = RunManifest::new("sweep", "", config, workers.threads());
    manifest.failed_trials = rows
        .iter()
        .filter(|r| r.failed > 0)
        .map(|r| FailedTrials { solver: r.solver.clone(), snr_db: r.snr_db, failed: r.failed })
        .collect();
    write_with_manifest(out, &sweep_csv(&rows), manifest)?;
    Ok(rows)
}

pub fn cmd_region(config: &ExperimentConfig, out: &Path, threads: usize) -> Result<Vec<RegionRow>, RunError> {
    let workers = Workers::new(threads)?;
    let result = validity_region(config, &workers)?;
    let mut manifest = RunManifest::new("region", "", config, workers.threads());
    manifest.failed_trials = result
        .points
        .iter()
        .filter(|p| p.metrics.failed > 0)
        .map(|p| FailedTrials {
            solver: format!("{}@delta={},rho={}", p.metrics.solver, p.delta, p.rho),
            snr_db: p.metrics.snr_db,
            failed: p.metrics.failed,
        })
        .collect();
    write_with_manifest(out, &region_csv(&result.rows), manifest)?;
    Ok(result.rows)
}

pub fn cmd_calibrate(
    config: &ExperimentConfig,
    out: &Path,
    alpha1_grid: &[f64],
    alpha2_grid: &[f64],
    pfa_cap: Option<f64>,
    threads: usize,
) -> Result<CalibrationResult, RunError> {
    let workers = Workers::new(threads)?;
    let result = calibrate_thresholds(config, alpha1_grid, alpha2_grid, pfa_cap, &workers)?;
    let manifest = RunManifest::new("calibrate", "", config, workers.threads());
    write_with_manifest(out, &calibration_csv(&result), manifest)?;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sidecar_names() {
        assert_eq!(manifest_path(Path::new("out/fig1.csv")), PathBuf::from("out/fig1.json"));
        assert_eq!(manifest_path(Path::new("fig1")), PathBuf::from("fig1.json"));
        assert_eq!(manifest_path(Path::new("a.json")), PathBuf::from("a.json.manifest.json"));
    }

    #[test]
    fn region_absent_boundary_is_na() {
        let rows = vec![RegionRow { solver: "ost-topk".into(), snr_db: 20.0, delta: 0.4, rho_g_max: None }];
        assert_eq!(region_csv(&rows), "solver,snr_db,delta,rho_g_max\nost-topk,20,0.4,NA\n");
    }
}
