//! wasm-bindgen bindings behind `www/index.html`.
//!
//! Every export takes and returns plain numbers, vectors or JSON strings, so
//! the same functions run natively (tests) and in the browser. Errors come
//! back as `{"error": "..."}` instead of a thrown `JsValue`.

use serde::Deserialize;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use csgl_amp::denoise::denoise_group;
use csgl_amp::harness::{snr_sweep, Experiment, ExperimentConfig, GaussianScenario, Scenario, SolverSpec, Workers};
use csgl_amp::solvers::{run_amp, OstConfig, OstRule};
use csgl_amp::{Complex64, SolverConfig, Thresholds, Variant};

/// Gaussian toy problem shared by the trace and sweep panels.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemoSettings {
    pub rows: usize,
    pub groups: usize,
    pub group_size: usize,
    pub active: usize,
    pub nonzeros: usize,
    pub snr_db: f64,
    pub variant: String,
    pub alpha1: f64,
    pub alpha2: f64,
    pub onsager: bool,
    pub seed: u64,
    pub trial: usize,
}

impl Default for DemoSettings {
    fn default() -> Self {
        Self {
            rows: 120,
            groups: 30,
            group_size: 8,
            active: 4,
            nonzeros: 3,
            snr_db: 15.0,
            variant: "csgl".into(),
            alpha1: 1.4,
            alpha2: 0.6,
            onsager: true,
            seed: 1,
            trial: 0,
        }
    }
}

fn parse_variant(name: &str) -> Result<Variant, String> {
    match name {
        "csgl" | "csgl-amp" => Ok(Variant::Csgl),
        "cl" | "cl-amp" => Ok(Variant::Cl),
        "cgl" | "cgl-amp" => Ok(Variant::Cgl),
        other => Err(format!("unknown variant '{other}'")),
    }
}

impl DemoSettings {
    pub fn from_json(text: &str) -> Result<Self, String> {
        if text.trim().is_empty() {
            return Ok(Self::default());
        }
        serde_json::from_str(text).map_err(|e| e.to_string())
    }

    fn solver(&self, variant: Variant) -> SolverConfig {
        SolverConfig { alpha1: self.alpha1, alpha2: self.alpha2, onsager: self.onsager, ..SolverConfig::variant(variant) }
    }

    fn experiment(&self, solvers: Vec<SolverSpec>) -> ExperimentConfig {
        let scenario = Scenario::Gaussian(GaussianScenario {
            rows: self.rows,
            groups: self.groups,
            group_size: self.group_size,
            nonzeros: self.nonzeros,
        });
        let mut cfg = ExperimentConfig::new(scenario, self.active, solvers);
        cfg.seed = self.seed;
        cfg.snr_points = vec![self.snr_db];
        cfg.record_timing = false;
        cfg
    }
}

fn respond(result: Result<Value, String>) -> String {
    result.unwrap_or_else(|e| json!({ "error": e })).to_string()
}

/// Output modulus of one coordinate of a CSGL block as its input modulus
/// sweeps `0..=r_max`, the other `group_size - 1` coordinates held at
/// `background`. Empty on invalid thresholds.
#[wasm_bindgen]
pub fn shrinkage_curve(lambda1: f64, lambda2: f64, group_size: usize, background: f64, r_max: f64, points: usize) -> Vec<f64> {
    let Ok(t) = Thresholds::new(lambda1, lambda2) else {
        return Vec::new();
    };
    if group_size == 0 || points < 2 {
        return Vec::new();
    }
    let mut block = vec![Complex64::new(background, 0.0); group_size];
    let mut out = vec![Complex64::default(); group_size];
    (0..points)
        .map(|i| {
            block[0] = Complex64::new(r_max * i as f64 / (points - 1) as f64, 0.0);
            denoise_group(&block, &t, &mut out);
            out[0].norm()
        })
        .collect()
}

fn trace(settings: &DemoSettings) -> Result<Value, String> {
    let variant = parse_variant(&settings.variant)?;
    let cfg = settings.experiment(vec![SolverSpec::amp(settings.solver(variant))]);
    cfg.validate().map_err(|e| e.to_string())?;
    let exp = Experiment::prepare(&cfg).map_err(|e| e.to_string())?;
    let instance = exp.instance(settings.snr_db, settings.trial).map_err(|e| e.to_string())?;
    let result = run_amp(&instance, &settings.solver(variant)).map_err(|e| e.to_string())?;
    let energy = |v: &csgl_amp::GroupedComplexVector| -> Vec<f64> {
        (0..v.partition().num_groups()).map(|g| v.group(g).iter().map(|c| c.norm_sqr()).sum()).collect()
    };
    let noise = instance.noise_variance;
    Ok(json!({
        "residual_db": result.trace.iter().map(|r| 10.0 * (r.residual_power / noise).log10()).collect::<Vec<_>>(),
        "active_groups": result.trace.iter().map(|r| r.active_groups).collect::<Vec<_>>(),
        "truth": instance.truth.active_groups,
        "detected": result.detected_groups,
        "true_energy": energy(&instance.truth.coefficients),
        "estimated_energy": energy(&result.beta_hat),
        "converged": result.converged,
    }))
}

/// One AMP run on a seeded Gaussian instance. `settings` is a JSON object
/// with any [`DemoSettings`] fields; missing ones take defaults.
#[wasm_bindgen]
pub fn amp_trace(settings: &str) -> String {
    respond(DemoSettings::from_json(settings).and_then(|s| trace(&s)))
}

fn sweep(settings: &DemoSettings, snr_lo: f64, snr_hi: f64, snr_step: f64, trials: usize) -> Result<Value, String> {
    let ordered = snr_step > 0.0 && snr_hi >= snr_lo;
    if !ordered {
        return Err("need snr_lo <= snr_hi and a positive step".into());
    }
    let solvers = vec![
        SolverSpec::ost(OstConfig { rule: OstRule::TopK, ..OstConfig::default() }),
        SolverSpec::amp(settings.solver(Variant::Cl)),
        SolverSpec::amp(settings.solver(Variant::Cgl)),
        SolverSpec::amp(settings.solver(Variant::Csgl)),
    ];
    let mut cfg = settings.experiment(solvers);
    let steps = ((snr_hi - snr_lo) / snr_step + 1e-9).floor() as usize;
    cfg.snr_points = (0..=steps).map(|i| snr_lo + i as f64 * snr_step).collect();
    cfg.trials = trials;
    cfg.validate().map_err(|e| e.to_string())?;
    let workers = Workers::new(1).map_err(|e| e.to_string())?;
    let rows = snr_sweep(&cfg, &workers).map_err(|e| e.to_string())?;
    Ok(Value::Array(
        rows.iter().map(|r| json!({ "solver": r.solver, "snr_db": r.snr_db, "pmd": r.pmd, "pfa": r.pfa, "failed": r.failed })).collect(),
    ))
}

/// Small Monte Carlo: misdetection rate of OST (top-K) and the three AMP
/// variants over an SNR grid, `trials` instances per point.
#[wasm_bindgen]
pub fn pmd_sweep(settings: &str, snr_lo: f64, snr_hi: f64, snr_step: f64, trials: usize) -> String {
    respond(DemoSettings::from_json(settings).and_then(|s| sweep(&s, snr_lo, snr_hi, snr_step, trials)))
}
