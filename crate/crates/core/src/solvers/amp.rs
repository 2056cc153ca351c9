use num_complex::Complex64;

use crate::denoise::{csgl_denoise_with, DenoiseOutput, OnsagerForm, Thresholds};
use crate::error::{Error, Result};
use crate::matrix::SensingMatrix;
use crate::problem::ProblemInstance;
use crate::types::GroupedComplexVector;

use super::{DetectionResult, TraceRecord};

/// Which sparsity levels the AMP denoiser enforces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Element and group sparsity.
    Csgl,
    /// Complex LASSO: element sparsity only, `lambda2 = 0`.
    Cl,
    /// Complex group LASSO: group sparsity only, `lambda1 = 0`.
    Cgl,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Csgl => "csgl-amp",
            Variant::Cl => "cl-amp",
            Variant::Cgl => "cgl-amp",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Element threshold multiplier.
    pub alpha1: f64,
    /// Group threshold multiplier.
    pub alpha2: f64,
    /// Stop once `||beta+ - beta|| / ||beta+||` drops below this.
    pub stop_tol: f64,
    pub variant: Variant,
    /// Include the Onsager term in the residual update.
    pub onsager: bool,
    pub onsager_form: OnsagerForm,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 200,
            alpha1: 1.4,
            alpha2: 0.8,
            stop_tol: 1e-6,
            variant: Variant::Csgl,
            onsager: true,
            onsager_form: OnsagerForm::Exact,
        }
    }
}

impl SolverConfig {
    pub fn variant(variant: Variant) -> Self {
        Self { variant, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::param("max_iters must be at least 1"));
        }
        for (name, v) in [("alpha1", self.alpha1), ("alpha2", self.alpha2), ("stop_tol", self.stop_tol)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::param(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// `sigma = ||z|| / sqrt(n)`, `lambda1 = alpha1 sigma`,
/// `lambda2 = alpha2 sigma sqrt(p)`; the CL and CGL variants zero the
/// threshold they do not use.
pub fn threshold_schedule(residual: &[Complex64], group_size: usize, config: &SolverConfig) -> Thresholds {
    let n = residual.len().max(1) as f64;
    let sigma = (residual.iter().map(|v| v.norm_sqr()).sum::<f64>() / n).sqrt();
    let lambda1 = match config.variant {
        Variant::Cgl => 0.0,
        _ => config.alpha1 * sigma,
    };
    let lambda2 = match config.variant {
        Variant::Cl => 0.0,
        _ => config.alpha2 * sigma * (group_size as f64).sqrt(),
    };
    Thresholds { lambda1, lambda2 }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmpState {
    pub iterate: usize,
    pub beta: GroupedComplexVector,
    pub residual: Vec<Complex64>,
    /// `r` that produced `beta` (zero at `t = 0`).
    pub effective_obs: GroupedComplexVector,
    pub thresholds: Thresholds,
    pub divergence: f64,
}

impl AmpState {
    /// `beta = 0`, `z = y`.
    pub fn initial(matrix: &SensingMatrix, observation: &[Complex64]) -> Self {
        let partition = matrix.partition();
        Self {
            iterate: 0,
            beta: GroupedComplexVector::zeros(partition),
            residual: observation.to_vec(),
            effective_obs: GroupedComplexVector::zeros(partition),
            thresholds: Thresholds::zero(),
            divergence: 0.0,
        }
    }

    pub fn residual_power(&self) -> f64 {
        self.residual.iter().map(|v| v.norm_sqr()).sum::<f64>() / self.residual.len().max(1) as f64
    }

    fn trace_record(&self) -> TraceRecord {
        TraceRecord {
            iterate: self.iterate,
            residual_power: self.residual_power(),
            lambda1: self.thresholds.lambda1,
            lambda2: self.thresholds.lambda2,
            divergence: self.divergence,
            active_groups: self.beta.nonzero_groups().len(),
        }
    }
}

/// One AMP iteration using the CSGL denoiser selected by `config`.
pub fn amp_step(state: &AmpState, matrix: &SensingMatrix, observation: &[Complex64], config: &SolverConfig) -> Result<AmpState> {
    let form = config.onsager_form;
    amp_step_with(state, matrix, observation, config, &|r, t| csgl_denoise_with(r, t, form))
}

fn amp_step_with(
    state: &AmpState,
    matrix: &SensingMatrix,
    observation: &[Complex64],
    config: &SolverConfig,
    denoiser: &dyn Fn(&GroupedComplexVector, &Thresholds) -> DenoiseOutput,
) -> Result<AmpState> {
    if observation.len() != matrix.rows() || state.residual.len() != matrix.rows() {
        return Err(Error::DimensionMismatch {
            expected: matrix.rows(),
            actual: observation.len().min(state.residual.len()),
            context: "amp_step observation/residual",
        });
    }
    let partition = matrix.partition();
    let mut r = matrix.hermitian_apply(&state.residual)?;
    for (ri, bi) in r.values_mut().iter_mut().zip(state.beta.values()) {
        *ri += bi;
    }
    let thresholds = threshold_schedule(&state.residual, partition.group_size(), config);
    let out = denoiser(&r, &thresholds);

    let mut residual = vec![Complex64::new(0.0, 0.0); matrix.rows()];
    matrix.forward_apply_into(out.result.values(), &mut residual);
    let onsager = if config.onsager { out.divergence / matrix.delta() } else { 0.0 };
    for ((zi, yi), zo) in residual.iter_mut().zip(observation).zip(&state.residual) {
        *zi = yi - *zi + zo * onsager;
    }

    let next =
        AmpState { iterate: state.iterate + 1, beta: out.result, residual, effective_obs: r, thresholds, divergence: out.divergence };
    let finite = next.divergence.is_finite()
        && next.residual.iter().all(|v| v.re.is_finite() && v.im.is_finite())
        && next.beta.values().iter().all(|v| v.re.is_finite() && v.im.is_finite());
    if !finite {
        return Err(Error::NonFinite { iterate: next.iterate, trace: Vec::new() });
    }
    Ok(next)
}

/// Runs AMP from `beta = 0, z = y` with the CSGL denoiser (CL/CGL via the
/// variant's threshold rule).
pub fn run_amp(instance: &ProblemInstance, config: &SolverConfig) -> Result<DetectionResult> {
    let form = config.onsager_form;
    run_amp_with(instance, config, &|r, t| csgl_denoise_with(r, t, form))
}

/// Residual energy growth over `DIVERGENCE_WINDOW` consecutive iterations that
/// aborts the run.
const DIVERGENCE_GROWTH: f64 = 10.0;
const DIVERGENCE_WINDOW: usize = 5;

/// [`run_amp`] with a caller-supplied denoiser.
pub fn run_amp_with(
    instance: &ProblemInstance,
    config: &SolverConfig,
    denoiser: &dyn Fn(&GroupedComplexVector, &Thresholds) -> DenoiseOutput,
) -> Result<DetectionResult> {
    config.validate()?;
    let matrix = &*instance.matrix;
    let y = &instance.observation;
    let mut state = AmpState::initial(matrix, y);
    let mut trace = Vec::with_capacity(config.max_iters.min(256));
    let mut converged = false;
    for _ in 0..config.max_iters {
        let next = match amp_step_with(&state, matrix, y, config, denoiser) {
            Ok(next) => next,
            Err(Error::NonFinite { iterate, .. }) => return Err(Error::NonFinite { iterate, trace }),
            Err(e) => return Err(e),
        };
        trace.push(next.trace_record());

        let t = trace.len();
        if t > DIVERGENCE_WINDOW {
            let window = &trace[t - 1 - DIVERGENCE_WINDOW..];
            let rising = window.windows(2).all(|w| w[1].residual_power > w[0].residual_power);
            if rising && window[DIVERGENCE_WINDOW].residual_power > DIVERGENCE_GROWTH * window[0].residual_power {
                return Err(Error::Diverged { iterate: next.iterate, trace });
            }
        }

        let change: f64 = next.beta.values().iter().zip(state.beta.values()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        let scale = next.beta.norm();
        state = next;
        if change <= config.stop_tol * scale {
            converged = true;
            break;
        }
    }
    Ok(DetectionResult::from_estimate(state.beta, trace, converged))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoise::{csgl_denoise, group_shrink_denoise, soft_threshold_denoise};
    use crate::gaussian::{draw_group_sparse_truth, gaussian_matrix};
    use crate::problem::observe;
    use crate::rng::{complex_gaussian_vec, seeded_rng};
    use crate::types::GroupPartition;
    use std::sync::Arc;

    fn gaussian_instance(rows: usize, groups: usize, p: usize, active: usize, nnz: usize, snr: f64, seed: u64) -> ProblemInstance {
        let mut rng = seeded_rng(seed);
        let x = Arc::new(gaussian_matrix(rows, GroupPartition::new(groups, p).unwrap(), &mut rng).unwrap());
        let truth = draw_group_sparse_truth(&x, active, nnz, &mut rng).unwrap();
        let noise = complex_gaussian_vec(&mut rng, rows, 1.0);
        observe(&x, truth, snr, &noise).unwrap()
    }

    #[test]
    fn schedule_rules() {
        let cfg = SolverConfig::default();
        let zero = threshold_schedule(&[Complex64::new(0.0, 0.0); 4], 20, &cfg);
        assert_eq!(zero, Thresholds::zero());

        let unit: Vec<Complex64> = (0..9).map(|k| Complex64::from_polar(1.0, k as f64)).collect();
        let t = threshold_schedule(&unit, 1, &SolverConfig { alpha1: 1.0, ..cfg });
        assert!((t.lambda1 - 1.0).abs() < 1e-15);

        // sigma = 0.5 from a residual with ||z||^2 / n = 0.25
        let half = vec![Complex64::new(0.0, 0.5); 16];
        let t = threshold_schedule(&half, 20, &cfg);
        assert!((t.lambda1 - 0.7).abs() < 1e-15);
        assert!((t.lambda2 - 0.8 * 0.5 * 20f64.sqrt()).abs() < 1e-12);
        assert!((t.lambda2 - 1.789).abs() < 1e-3);

        assert_eq!(threshold_schedule(&half, 20, &SolverConfig::variant(Variant::Cl)).lambda2, 0.0);
        assert_eq!(threshold_schedule(&half, 20, &SolverConfig::variant(Variant::Cgl)).lambda1, 0.0);
    }

    #[test]
    fn zero_is_fixed_point() {
        let inst = gaussian_instance(8, 4, 3, 0, 1, 10.0, 1);
        let zero_y = vec![Complex64::new(0.0, 0.0); 8];
        let state = AmpState::initial(&inst.matrix, &zero_y);
        let next = amp_step(&state, &inst.matrix, &zero_y, &SolverConfig::default()).unwrap();
        assert!(next.beta.values().iter().all(|v| v.norm() == 0.0));
        assert!(next.residual.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn correction_vanishes_when_everything_is_thresholded() {
        let inst = gaussian_instance(12, 6, 2, 1, 1, 10.0, 2);
        let cfg = SolverConfig { alpha1: 1e3, ..SolverConfig::default() };
        let state = AmpState::initial(&inst.matrix, &inst.observation);
        let next = amp_step(&state, &inst.matrix, &inst.observation, &cfg).unwrap();
        assert_eq!(next.divergence, 0.0);
        assert_eq!(next.residual, inst.observation);
    }

    #[test]
    fn step_matches_hand_composition() {
        let inst = gaussian_instance(4, 3, 2, 1, 2, 15.0, 3);
        let cfg = SolverConfig { alpha1: 0.5, alpha2: 0.3, ..SolverConfig::default() };
        let x = &inst.matrix;
        let y = &inst.observation;
        let s0 = AmpState::initial(x, y);
        let s1 = amp_step(&s0, x, y, &cfg).unwrap();
        let s2 = amp_step(&s1, x, y, &cfg).unwrap();

        // independent composition of the three update lines from s1
        let xhz = x.hermitian_apply(&s1.residual).unwrap();
        let r: Vec<Complex64> = xhz.values().iter().zip(s1.beta.values()).map(|(a, b)| a + b).collect();
        let r = GroupedComplexVector::from_vec(r, x.partition()).unwrap();
        let sigma = (s1.residual.iter().map(|v| v.norm_sqr()).sum::<f64>() / 4.0).sqrt();
        let t = Thresholds::new(0.5 * sigma, 0.3 * sigma * 2f64.sqrt()).unwrap();
        let out = csgl_denoise(&r, &t);
        let xb = x.forward_apply(&out.result).unwrap();
        let delta = 4.0 / 6.0;
        for k in 0..4 {
            let expect = y[k] - xb[k] + s1.residual[k] * (out.divergence / delta);
            assert!((s2.residual[k] - expect).norm() < 1e-12);
        }
        assert_eq!(s2.beta, out.result);
        assert_eq!(s2.iterate, 2);
    }

    #[test]
    fn noiseless_single_group_recovery() {
        // delta = 0.8: 32 rows, 8 groups of 5
        let mut rng = seeded_rng(40);
        let x = Arc::new(gaussian_matrix(32, GroupPartition::new(8, 5).unwrap(), &mut rng).unwrap());
        let truth = draw_group_sparse_truth(&x, 1, 2, &mut rng).unwrap();
        let y = x.forward_apply(&truth.coefficients).unwrap();
        let inst = ProblemInstance::new(x, y, 0.0, truth.clone()).unwrap();
        let cfg = SolverConfig { max_iters: 2000, stop_tol: 1e-12, ..SolverConfig::default() };
        let res = run_amp(&inst, &cfg).unwrap();
        assert_eq!(res.detected_groups, truth.active_groups);
        let err: f64 = res.beta_hat.values().iter().zip(truth.coefficients.values()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        assert!(err / truth.coefficients.norm() < 1e-3, "relative error {}", err / truth.coefficients.norm());
    }

    #[test]
    fn null_instance_detects_nothing() {
        let inst = gaussian_instance(100, 20, 10, 0, 1, 10.0, 5);
        let res = run_amp(&inst, &SolverConfig::default()).unwrap();
        assert!(res.detected_groups.is_empty());
    }

    #[test]
    fn variants_reduce_to_pure_denoisers() {
        let inst = gaussian_instance(60, 12, 8, 3, 2, 15.0, 6);
        let cl = SolverConfig::variant(Variant::Cl);
        let a = run_amp(&inst, &cl).unwrap();
        let b = run_amp_with(&inst, &cl, &|r, t| soft_threshold_denoise(r, t.lambda1)).unwrap();
        assert_eq!(a.trace.len(), b.trace.len());
        for (u, v) in a.trace.iter().zip(&b.trace) {
            assert!((u.residual_power - v.residual_power).abs() <= 1e-12 * u.residual_power.max(1.0));
        }
        for (u, v) in a.beta_hat.values().iter().zip(b.beta_hat.values()) {
            assert!((u - v).norm() <= 1e-12);
        }

        let cgl = SolverConfig::variant(Variant::Cgl);
        let a = run_amp(&inst, &cgl).unwrap();
        let b = run_amp_with(&inst, &cgl, &|r, t| group_shrink_denoise(r, t.lambda2)).unwrap();
        assert_eq!(a.trace.len(), b.trace.len());
        for (u, v) in a.beta_hat.values().iter().zip(b.beta_hat.values()) {
            assert!((u - v).norm() <= 1e-12);
        }
    }

    #[test]
    fn rejects_zero_iterations() {
        let inst = gaussian_instance(8, 4, 3, 1, 1, 10.0, 1);
        let cfg = SolverConfig { max_iters: 0, ..SolverConfig::default() };
        assert!(run_amp(&inst, &cfg).is_err());
    }

    #[test]
    fn divergence_aborts_with_trace() {
        // alpha = 0 makes the denoiser the identity; with delta < 1 the
        // Onsager factor 1/delta > 1 makes the residual grow geometrically.
        let inst = gaussian_instance(20, 10, 4, 2, 2, 20.0, 7);
        let cfg = SolverConfig { alpha1: 0.0, alpha2: 0.0, stop_tol: 0.0, ..SolverConfig::default() };
        match run_amp(&inst, &cfg) {
            Err(Error::Diverged { trace, .. }) | Err(Error::NonFinite { trace, .. }) => assert!(!trace.is_empty()),
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
