//! Fast invariant checks, runnable from the binary without any files.

use std::sync::Arc;
use std::time::Instant;

use rand::Rng;

use csgl_amp::denoise::{csgl_denoise, group_shrink_denoise, numerical_wirtinger_divergence, soft_threshold_denoise};
use csgl_amp::gaussian::{draw_group_sparse_truth, gaussian_matrix};
use csgl_amp::oracle::grid_prox_scalar;
use csgl_amp::otfs::{build_dd_grid, twisted_shift, Preamble};
use csgl_amp::problem::observe;
use csgl_amp::rng::{complex_gaussian_vec, seeded_rng};
use csgl_amp::solvers::{run_amp, run_amp_with, DetectionResult, SolverConfig, Variant};
use csgl_amp::{soft_threshold_complex, Complex64, GroupPartition, GroupedComplexVector, Thresholds};

/// Divergence under test: average `<eta'>` of the CSGL denoiser.
pub type OnsagerFn = dyn Fn(&GroupedComplexVector, &Thresholds) -> f64;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

pub fn default_onsager(r: &GroupedComplexVector, t: &Thresholds) -> f64 {
    csgl_denoise(r, t).divergence
}

/// Runs every check with the library's own divergence.
pub fn run_selftest() -> Vec<Check> {
    run_selftest_with(&default_onsager)
}

pub fn run_selftest_with(onsager: &OnsagerFn) -> Vec<Check> {
    vec![prox_oracle(), onsager_oracle(onsager), twisted_shift_unitarity(), variant_reduction()]
}

fn random_complex<R: Rng>(rng: &mut R, max_mod: f64) -> Complex64 {
    Complex64::from_polar(rng.random_range(0.0..max_mod), rng.random_range(0.0..std::f64::consts::TAU))
}

fn prox_oracle() -> Check {
    let mut rng = seeded_rng(11);
    let mut worst = 0.0f64;
    for _ in 0..400 {
        let v = random_complex(&mut rng, 3.0);
        let lambda = rng.random_range(0.0..2.0);
        worst = worst.max((soft_threshold_complex(v, lambda) - grid_prox_scalar(v, lambda)).norm());
    }
    Check { name: "prox oracle", passed: worst < 1e-6, detail: format!("max |error| {worst:.2e} over 400 scalars") }
}

fn onsager_oracle(onsager: &OnsagerFn) -> Check {
    let mut rng = seeded_rng(12);
    let mut worst = 0.0f64;
    let mut checked = 0;
    while checked < 200 {
        let p = rng.random_range(1..=4);
        let part = GroupPartition::new(3, p).expect("positive sizes");
        let values = (0..part.len()).map(|_| random_complex(&mut rng, 3.0)).collect();
        let r = GroupedComplexVector::from_vec(values, part).expect("matching length");
        let t = Thresholds::new(rng.random_range(0.05..1.0), rng.random_range(0.05..2.0)).expect("valid thresholds");
        let Ok(reference) = numerical_wirtinger_divergence(&r, &t, 1e-6) else { continue };
        let got = onsager(&r, &t);
        let rel = (got - reference).abs() / reference.abs().max(1e-12);
        if reference != 0.0 || got != 0.0 {
            worst = worst.max(rel);
        }
        checked += 1;
    }
    Check { name: "onsager oracle", passed: worst <= 1e-3, detail: format!("max relative error {worst:.2e} over {checked} inputs") }
}

fn twisted_shift_unitarity() -> Check {
    let grid = build_dd_grid(7, 11, 3, 2).expect("valid grid");
    let mut rng = seeded_rng(13);
    let mut worst = 0.0f64;
    for root in 0..20 {
        let raw = complex_gaussian_vec(&mut rng, grid.frame_len(), 1.0);
        let norm = raw.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let s = Preamble { samples: raw.iter().map(|v| v / norm).collect(), root };
        for (k, l) in grid.shifts() {
            let out = twisted_shift(&s, k, l, &grid).expect("shift on grid");
            let n = out.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            worst = worst.max((n - 1.0).abs());
        }
    }
    Check { name: "twisted shift unitarity", passed: worst < 1e-10, detail: format!("max |norm - 1| {worst:.2e}") }
}

fn max_iterate_gap(a: &DetectionResult, b: &DetectionResult) -> f64 {
    if a.trace.len() != b.trace.len() {
        return f64::INFINITY;
    }
    let beta = a.beta_hat.values().iter().zip(b.beta_hat.values()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    a.trace
        .iter()
        .zip(&b.trace)
        .map(|(x, y)| (x.residual_power - y.residual_power).abs().max((x.divergence - y.divergence).abs()))
        .fold(beta, f64::max)
}

fn variant_reduction() -> Check {
    let mut rng = seeded_rng(14);
    let x = Arc::new(gaussian_matrix(40, GroupPartition::new(10, 6).expect("sizes"), &mut rng).expect("matrix"));
    let truth = draw_group_sparse_truth(&x, 2, 2, &mut rng).expect("truth");
    let noise = complex_gaussian_vec(&mut rng, 40, 1.0);
    let inst = observe(&x, truth, 15.0, &noise).expect("instance");
    let base = SolverConfig { max_iters: 30, stop_tol: 0.0, ..SolverConfig::default() };
    let gap = (|| {
        let cl = run_amp(&inst, &SolverConfig { variant: Variant::Cl, ..base }).ok()?;
        let csgl_no_group = run_amp(&inst, &SolverConfig { alpha2: 0.0, ..base }).ok()?;
        let pure_st =
            run_amp_with(&inst, &SolverConfig { variant: Variant::Cl, ..base }, &|r, t| soft_threshold_denoise(r, t.lambda1)).ok()?;
        let cgl = run_amp(&inst, &SolverConfig { variant: Variant::Cgl, ..base }).ok()?;
        let csgl_no_elem = run_amp(&inst, &SolverConfig { alpha1: 0.0, ..base }).ok()?;
        let pure_gs =
            run_amp_with(&inst, &SolverConfig { variant: Variant::Cgl, ..base }, &|r, t| group_shrink_denoise(r, t.lambda2)).ok()?;
        Some(
            max_iterate_gap(&cl, &csgl_no_group)
                .max(max_iterate_gap(&cl, &pure_st))
                .max(max_iterate_gap(&cgl, &csgl_no_elem))
                .max(max_iterate_gap(&cgl, &pure_gs)),
        )
    })();
    match gap {
        Some(g) => Check { name: "variant reduction", passed: g <= 1e-12, detail: format!("max per-iterate gap {g:.2e}") },
        None => Check { name: "variant reduction", passed: false, detail: "an AMP run aborted".into() },
    }
}

/// Prints one line per check and returns whether all passed.
pub fn report(checks: &[Check], out: &mut impl std::io::Write) -> std::io::Result<bool> {
    for c in checks {
        writeln!(out, "{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail)?;
    }
    Ok(checks.iter().all(|c| c.passed))
}

/// Times [`run_selftest`]; used by the binary.
pub fn run_timed() -> (Vec<Check>, std::time::Duration) {
    let start = Instant::now();
    let checks = run_selftest();
    (checks, start.elapsed())
}
