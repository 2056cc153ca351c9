//! Recovery algorithms and detectors.

mod amp;
mod fista;
mod ost;

pub use amp::{amp_step, run_amp, run_amp_with, threshold_schedule, AmpState, SolverConfig, Variant};
pub use fista::{fista_sgl, run_fista_sgl, sgl_objective, spectral_norm_sqr, FistaOutcome};
pub use ost::{calibrate_ost, ost_detect, OstCalibration, OstConfig, OstRule};

use crate::types::GroupedComplexVector;

/// Per-iteration diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub iterate: usize,
    /// `||z||^2 / n`.
    pub residual_power: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub divergence: f64,
    pub active_groups: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    /// Ascending group indices with a nonzero block in `beta_hat`.
    pub detected_groups: Vec<usize>,
    pub beta_hat: GroupedComplexVector,
    pub trace: Vec<TraceRecord>,
    pub converged: bool,
}

impl DetectionResult {
    pub(crate) fn from_estimate(beta_hat: GroupedComplexVector, trace: Vec<TraceRecord>, converged: bool) -> Self {
        Self { detected_groups: beta_hat.nonzero_groups(), beta_hat, trace, converged }
    }
}
