use std::sync::Arc;

use num_complex::Complex64;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::matrix::SensingMatrix;
use crate::types::GroupedComplexVector;

/// One multipath component of an active user, on the shift grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tap {
    pub delay_bin: usize,
    pub doppler_bin: i64,
    pub gain: Complex64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// Sorted, distinct group indices.
    pub active_groups: Vec<usize>,
    pub coefficients: GroupedComplexVector,
    /// Per active group (same order as `active_groups`).
    pub taps: Vec<Vec<Tap>>,
}

impl GroundTruth {
    pub fn empty(coefficients: GroupedComplexVector) -> Self {
        Self { active_groups: Vec::new(), coefficients, taps: Vec::new() }
    }
}

/// `y = X beta + w` together with the generating truth.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub matrix: Arc<SensingMatrix>,
    pub observation: Vec<Complex64>,
    pub noise_variance: f64,
    pub truth: GroundTruth,
}

impl ProblemInstance {
    pub fn new(matrix: Arc<SensingMatrix>, observation: Vec<Complex64>, noise_variance: f64, truth: GroundTruth) -> Result<Self> {
        if observation.len() != matrix.rows() {
            return Err(Error::DimensionMismatch { expected: matrix.rows(), actual: observation.len(), context: "observation length" });
        }
        if !(noise_variance >= 0.0 && noise_variance.is_finite()) {
            return Err(Error::param(format!("noise variance must be finite and >= 0, got {noise_variance}")));
        }
        if truth.coefficients.partition() != matrix.partition() {
            return Err(Error::DimensionMismatch {
                expected: matrix.cols(),
                actual: truth.coefficients.len(),
                context: "truth coefficients",
            });
        }
        Ok(Self { matrix, observation, noise_variance, truth })
    }

    /// Replaces the observation, keeping matrix and truth.
    pub fn with_observation(&self, observation: Vec<Complex64>, noise_variance: f64) -> Result<Self> {
        Self::new(self.matrix.clone(), observation, noise_variance, self.truth.clone())
    }

    /// SHA-256 over the observation, noise variance and truth, used to assert
    /// that every solver in a trial saw the same instance.
    pub fn digest(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update((self.matrix.rows() as u64).to_le_bytes());
        h.update((self.matrix.cols() as u64).to_le_bytes());
        for v in &self.observation {
            h.update(v.re.to_le_bytes());
            h.update(v.im.to_le_bytes());
        }
        h.update(self.noise_variance.to_le_bytes());
        for g in &self.truth.active_groups {
            h.update((*g as u64).to_le_bytes());
        }
        for v in self.truth.coefficients.values() {
            h.update(v.re.to_le_bytes());
            h.update(v.im.to_le_bytes());
        }
        h.finalize().into()
    }
}

/// Noise variance giving `snr_db = 10 log10(||X beta||^2 / (n sigma^2))`.
/// With no signal the reference power is that of one unit-energy user, `1/n`.
pub fn noise_variance_for_snr(signal_energy: f64, rows: usize, snr_db: f64) -> f64 {
    let energy = if signal_energy > 0.0 { signal_energy } else { 1.0 };
    energy / (rows as f64 * 10f64.powf(snr_db / 10.0))
}

/// `y = X beta + sigma * unit_noise` with `sigma` set by [`noise_variance_for_snr`].
/// `unit_noise` is a unit-variance complex Gaussian draw, so one draw can be
/// reused across SNR points.
pub fn observe(matrix: &Arc<SensingMatrix>, truth: GroundTruth, snr_db: f64, unit_noise: &[Complex64]) -> Result<ProblemInstance> {
    if !snr_db.is_finite() {
        return Err(Error::param(format!("SNR must be finite, got {snr_db}")));
    }
    if unit_noise.len() != matrix.rows() {
        return Err(Error::DimensionMismatch { expected: matrix.rows(), actual: unit_noise.len(), context: "noise length" });
    }
    let clean = matrix.forward_apply(&truth.coefficients)?;
    let energy: f64 = clean.iter().map(|v| v.norm_sqr()).sum();
    let noise_variance = noise_variance_for_snr(energy, matrix.rows(), snr_db);
    let sigma = noise_variance.sqrt();
    let observation = clean.iter().zip(unit_noise).map(|(s, w)| s + w * sigma).collect();
    ProblemInstance::new(matrix.clone(), observation, noise_variance, truth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{complex_gaussian_vec, seeded_rng};
    use crate::types::GroupPartition;

    fn small_system() -> (Arc<SensingMatrix>, GroundTruth) {
        let mut rng = seeded_rng(21);
        let part = GroupPartition::new(4, 3).unwrap();
        let x = Arc::new(SensingMatrix::normalized(8, part, complex_gaussian_vec(&mut rng, 96, 1.0)).unwrap());
        let mut beta = GroupedComplexVector::zeros(part);
        beta.group_mut(2)[1] = Complex64::new(1.0, 0.5);
        (x, GroundTruth { active_groups: vec![2], coefficients: beta, taps: vec![vec![]] })
    }

    #[test]
    fn snr_definition_holds() {
        let (x, truth) = small_system();
        let noise = complex_gaussian_vec(&mut seeded_rng(1), 8, 1.0);
        let inst = observe(&x, truth.clone(), 10.0, &noise).unwrap();
        let clean = x.forward_apply(&truth.coefficients).unwrap();
        let energy: f64 = clean.iter().map(|v| v.norm_sqr()).sum();
        let snr = 10.0 * (energy / (8.0 * inst.noise_variance)).log10();
        assert!((snr - 10.0).abs() < 1e-12);
    }

    #[test]
    fn noiseless_limit() {
        let (x, truth) = small_system();
        let noise = complex_gaussian_vec(&mut seeded_rng(1), 8, 1.0);
        let inst = observe(&x, truth.clone(), 400.0, &noise).unwrap();
        let clean = x.forward_apply(&truth.coefficients).unwrap();
        for (a, b) in inst.observation.iter().zip(&clean) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn noise_concentrates_on_variance() {
        let (x, truth) = small_system();
        let clean = x.forward_apply(&truth.coefficients).unwrap();
        let mut rng = seeded_rng(2);
        let mut total = 0.0;
        let mut var = 0.0;
        for _ in 0..1000 {
            let noise = complex_gaussian_vec(&mut rng, 8, 1.0);
            let inst = observe(&x, truth.clone(), 5.0, &noise).unwrap();
            total += inst.observation.iter().zip(&clean).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>() / 8.0;
            var = inst.noise_variance;
        }
        let mean = total / 1000.0;
        assert!((mean / var - 1.0).abs() < 0.05, "{mean} vs {var}");
    }

    #[test]
    fn digest_tracks_observation() {
        let (x, truth) = small_system();
        let noise = complex_gaussian_vec(&mut seeded_rng(1), 8, 1.0);
        let a = observe(&x, truth.clone(), 10.0, &noise).unwrap();
        let b = observe(&x, truth.clone(), 10.0, &noise).unwrap();
        let c = observe(&x, truth, 11.0, &noise).unwrap();
        assert_eq!(a.digest(), b.digest());
        assert_ne!(a.digest(), c.digest());
    }

    #[test]
    fn rejects_wrong_lengths() {
        let (x, truth) = small_system();
        assert!(observe(&x, truth.clone(), 10.0, &[Complex64::new(0.0, 0.0); 3]).is_err());
        assert!(ProblemInstance::new(x, vec![], 1.0, truth).is_err());
    }
}
