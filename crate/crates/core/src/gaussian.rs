//! I.i.d. complex Gaussian sensing model used as a construction-independent
//! sanity scenario.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix::SensingMatrix;
use crate::problem::GroundTruth;
use crate::rng::complex_gaussian_vec;
use crate::types::{GroupPartition, GroupedComplexVector};

/// `rows x partition.len()` matrix with i.i.d. CN(0, 1) entries and columns
/// rescaled to unit norm.
pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, partition: GroupPartition, rng: &mut R) -> Result<SensingMatrix> {
    let entries = complex_gaussian_vec(rng, rows * partition.len(), 1.0);
    SensingMatrix::normalized(rows, partition, entries)
}

/// `active` random groups, each with `nonzeros` random positions carrying
/// unit-modulus-phase gains of power `1 / nonzeros` (unit energy per group).
pub fn draw_group_sparse_truth<R: Rng + ?Sized>(
    matrix: &Arc<SensingMatrix>,
    active: usize,
    nonzeros: usize,
    rng: &mut R,
) -> Result<GroundTruth> {
    let partition = matrix.partition();
    if active > partition.num_groups() {
        return Err(Error::param(format!("K={active} exceeds G={}", partition.num_groups())));
    }
    if nonzeros == 0 || nonzeros > partition.group_size() {
        return Err(Error::param(format!("nonzeros per group must be in 1..={}, got {nonzeros}", partition.group_size())));
    }
    let mut active_groups = index::sample(rng, partition.num_groups(), active).into_vec();
    active_groups.sort_unstable();
    let mut coefficients = GroupedComplexVector::zeros(partition);
    let amplitude = (1.0 / nonzeros as f64).sqrt();
    for &g in &active_groups {
        let positions = index::sample(rng, partition.group_size(), nonzeros).into_vec();
        let block = coefficients.group_mut(g);
        for j in positions {
            block[j] = Complex64::from_polar(amplitude, rng.random_range(0.0..2.0 * PI));
        }
    }
    let taps = vec![Vec::new(); active_groups.len()];
    Ok(GroundTruth { active_groups, coefficients, taps })
}
