//! One-step thresholding baseline: matched filter `c = X^H y`, group energy
//! statistic `T_g = ||c_g||^2`, and a single threshold decision.

use crate::error::{Error, Result};
use crate::matrix::SensingMatrix;
use crate::problem::ProblemInstance;
use crate::rng::{complex_gaussian_vec, purpose, substream};
use crate::types::GroupedComplexVector;

use super::DetectionResult;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OstRule {
    /// Declare `g` active when `T_g` exceeds the `(1 - pfa)` quantile of its
    /// pure-noise distribution at the instance's noise variance.
    NullQuantile { pfa: f64 },
    /// Declare the `K` largest statistics active (`K` taken from the instance).
    TopK,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OstConfig {
    pub rule: OstRule,
    /// Pure-noise draws used to estimate the null quantile.
    pub calibration_draws: usize,
}

impl Default for OstConfig {
    fn default() -> Self {
        Self { rule: OstRule::NullQuantile { pfa: 1e-3 }, calibration_draws: 200 }
    }
}

/// Null quantile of `T_g` at unit noise variance; scale by `sigma_n^2` to use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OstCalibration {
    pub unit_quantile: f64,
    pub pfa: f64,
}

/// Monte Carlo estimate of the `(1 - pfa)` quantile of `||(X^H w)_g||^2` for
/// `w ~ CN(0, I)`, pooled over all groups.
pub fn calibrate_ost(matrix: &SensingMatrix, pfa: f64, draws: usize, seed: u64) -> Result<OstCalibration> {
    if !(pfa > 0.0 && pfa < 1.0) {
        return Err(Error::param(format!("OST false-alarm target must be in (0, 1), got {pfa}")));
    }
    if draws == 0 {
        return Err(Error::param("OST calibration needs at least one noise draw"));
    }
    let mut rng = substream(seed, purpose::OST_CALIBRATION);
    let mut stats = Vec::with_capacity(draws * matrix.partition().num_groups());
    for _ in 0..draws {
        let w = complex_gaussian_vec(&mut rng, matrix.rows(), 1.0);
        let c = matrix.hermitian_apply(&w)?;
        stats.extend(group_energies(&c));
    }
    stats.sort_by(f64::total_cmp);
    let rank = ((1.0 - pfa) * stats.len() as f64).ceil() as usize;
    let unit_quantile = stats[rank.clamp(1, stats.len()) - 1];
    Ok(OstCalibration { unit_quantile, pfa })
}

fn group_energies(c: &GroupedComplexVector) -> impl Iterator<Item = f64> + '_ {
    c.groups().map(|g| g.iter().map(|v| v.norm_sqr()).sum::<f64>())
}

/// Runs the detector. `calibration` is required for [`OstRule::NullQuantile`].
pub fn ost_detect(instance: &ProblemInstance, config: &OstConfig, calibration: Option<&OstCalibration>) -> Result<DetectionResult> {
    let c = instance.matrix.hermitian_apply(&instance.observation)?;
    let stats: Vec<f64> = group_energies(&c).collect();
    let mut detected: Vec<usize> = match config.rule {
        OstRule::NullQuantile { .. } => {
            let cal = calibration.ok_or_else(|| Error::param("null-quantile OST needs a calibration"))?;
            let tau = cal.unit_quantile * instance.noise_variance;
            (0..stats.len()).filter(|&g| stats[g] > tau).collect()
        }
        OstRule::TopK => {
            let k = instance.truth.active_groups.len();
            let mut order: Vec<usize> = (0..stats.len()).filter(|&g| stats[g] > 0.0).collect();
            order.sort_by(|&a, &b| stats[b].total_cmp(&stats[a]).then(a.cmp(&b)));
            order.truncate(k);
            order
        }
    };
    detected.sort_unstable();
    let mut beta_hat = GroupedComplexVector::zeros(c.partition());
    for &g in &detected {
        beta_hat.group_mut(g).copy_from_slice(c.group(g));
    }
    let mut result = DetectionResult::from_estimate(beta_hat, Vec::new(), true);
    // a detected group whose matched-filter block is exactly zero still counts
    result.detected_groups = detected;
    Ok(result)
}
