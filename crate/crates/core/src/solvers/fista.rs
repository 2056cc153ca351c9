//! Accelerated proximal gradient for
//! `||y - X beta||^2 + lambda1 ||beta||_1 + lambda2 sum_g ||beta_g||_2`,
//! with the CSGL denoiser as proximal map and function-value restarts.

use num_complex::Complex64;

use crate::denoise::{csgl_denoise, Thresholds};
use crate::error::Result;
use crate::matrix::SensingMatrix;
use crate::problem::ProblemInstance;
use crate::types::GroupedComplexVector;

/// Power-iteration estimate of the largest singular value squared of `X`.
pub fn spectral_norm_sqr(matrix: &SensingMatrix, iters: usize) -> f64 {
    let cols = matrix.cols();
    let mut v = vec![Complex64::new(1.0 / (cols as f64).sqrt(), 0.0); cols];
    let mut xv = vec![Complex64::new(0.0, 0.0); matrix.rows()];
    let mut w = vec![Complex64::new(0.0, 0.0); cols];
    let mut estimate = 0.0;
    for _ in 0..iters.max(1) {
        matrix.forward_apply_into(&v, &mut xv);
        matrix.hermitian_apply_into(&xv, &mut w).expect("conforming dimensions");
        let norm = w.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        estimate = norm;
        v.iter_mut().zip(&w).for_each(|(a, b)| *a = b / norm);
    }
    estimate
}

pub fn sgl_objective(instance: &ProblemInstance, beta: &GroupedComplexVector, lambda1: f64, lambda2: f64) -> f64 {
    let xb = instance.matrix.forward_apply(beta).expect("conforming partition");
    objective_from_fit(instance, &xb, beta, lambda1, lambda2)
}

fn objective_from_fit(instance: &ProblemInstance, xb: &[Complex64], beta: &GroupedComplexVector, lambda1: f64, lambda2: f64) -> f64 {
    let fit: f64 = instance.observation.iter().zip(xb).map(|(y, v)| (y - v).norm_sqr()).sum();
    let l1: f64 = beta.values().iter().map(|v| v.norm()).sum();
    let l2: f64 = beta.groups().map(|g| g.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()).sum();
    fit + lambda1 * l1 + lambda2 * l2
}

#[derive(Debug, Clone)]
pub struct FistaOutcome {
    pub beta: GroupedComplexVector,
    /// Objective after each iteration, starting with the value at `beta = 0`.
    pub objective: Vec<f64>,
}

/// Accelerated proximal gradient with restart-on-increase; the objective
/// sequence is non-increasing.
pub fn fista_sgl(instance: &ProblemInstance, lambda1: f64, lambda2: f64, iters: usize) -> Result<FistaOutcome> {
    Thresholds::new(lambda1, lambda2)?;
    let x = &*instance.matrix;
    let partition = x.partition();
    // gradient of ||y - X b||^2 is 2 X^H (X b - y); Lipschitz constant 2 ||X||^2
    let lip = 2.0 * spectral_norm_sqr(x, 100) * 1.01;
    let step = if lip > 0.0 { 1.0 / lip } else { 0.0 };
    let prox = Thresholds::new(lambda1 * step, lambda2 * step)?;

    let mut current = GroupedComplexVector::zeros(partition);
    let mut current_obj = objective_from_fit(instance, &vec![Complex64::new(0.0, 0.0); x.rows()], &current, lambda1, lambda2);
    let mut extrapolated = current.clone();
    let mut momentum = 1.0f64;
    let mut objective = vec![current_obj];
    let mut xv = vec![Complex64::new(0.0, 0.0); x.rows()];
    let mut grad = vec![Complex64::new(0.0, 0.0); x.cols()];

    let prox_step = |point: &GroupedComplexVector, xv: &mut Vec<Complex64>, grad: &mut Vec<Complex64>| {
        x.forward_apply_into(point.values(), xv);
        for (r, y) in xv.iter_mut().zip(&instance.observation) {
            *r -= y;
        }
        x.hermitian_apply_into(xv, grad).expect("conforming dimensions");
        let moved: Vec<Complex64> = point.values().iter().zip(grad.iter()).map(|(b, g)| b - g * (2.0 * step)).collect();
        let moved = GroupedComplexVector::from_vec(moved, partition).expect("same partition");
        csgl_denoise(&moved, &prox).result
    };

    for _ in 0..iters {
        let mut candidate = prox_step(&extrapolated, &mut xv, &mut grad);
        x.forward_apply_into(candidate.values(), &mut xv);
        let mut cand_obj = objective_from_fit(instance, &xv, &candidate, lambda1, lambda2);
        let mut next_momentum = (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt()) / 2.0;
        if cand_obj > current_obj {
            // restart: plain proximal-gradient step from the last accepted point
            candidate = prox_step(&current, &mut xv, &mut grad);
            x.forward_apply_into(candidate.values(), &mut xv);
            cand_obj = objective_from_fit(instance, &xv, &candidate, lambda1, lambda2);
            next_momentum = 1.0;
            if cand_obj > current_obj {
                candidate = current.clone();
                cand_obj = current_obj;
            }
        }
        let beta_coef = (momentum - 1.0) / next_momentum;
        let next_extrap: Vec<Complex64> = candidate.values().iter().zip(current.values()).map(|(c, p)| c + (c - p) * beta_coef).collect();
        extrapolated = GroupedComplexVector::from_vec(next_extrap, partition).expect("same partition");
        momentum = next_momentum;
        current = candidate;
        current_obj = cand_obj;
        objective.push(current_obj);
    }
    Ok(FistaOutcome { beta: current, objective })
}

/// Reference SGL solution after `iters` accelerated proximal-gradient steps.
pub fn run_fista_sgl(instance: &ProblemInstance, lambda1: f64, lambda2: f64, iters: usize) -> Result<GroupedComplexVector> {
    Ok(fista_sgl(instance, lambda1, lambda2, iters)?.beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{draw_group_sparse_truth, gaussian_matrix};
    use crate::problem::observe;
    use crate::rng::{complex_gaussian_vec, seeded_rng};
    use crate::solvers::{run_amp, SolverConfig};
    use crate::types::GroupPartition;
    use std::sync::Arc;

    fn instance(rows: usize, groups: usize, p: usize, seed: u64) -> ProblemInstance {
        let mut rng = seeded_rng(seed);
        let x = Arc::new(gaussian_matrix(rows, GroupPartition::new(groups, p).unwrap(), &mut rng).unwrap());
        let truth = draw_group_sparse_truth(&x, 1, 2.min(p), &mut rng).unwrap();
        let noise = complex_gaussian_vec(&mut rng, rows, 1.0);
        observe(&x, truth, 15.0, &noise).unwrap()
    }

    #[test]
    fn power_iteration_on_identity() {
        let part = GroupPartition::new(3, 1).unwrap();
        let mut e = vec![Complex64::new(0.0, 0.0); 9];
        for k in 0..3 {
            e[k * 3 + k] = Complex64::new(1.0, 0.0);
        }
        let x = SensingMatrix::from_columns(3, part, e).unwrap();
        assert!((spectral_norm_sqr(&x, 50) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unregularised_reaches_least_squares() {
        // overdetermined so the least-squares problem is well conditioned
        let inst = instance(24, 4, 2, 1);
        let beta = run_fista_sgl(&inst, 0.0, 0.0, 3000).unwrap();
        let xb = inst.matrix.forward_apply(&beta).unwrap();
        let res: Vec<Complex64> = inst.observation.iter().zip(&xb).map(|(y, v)| y - v).collect();
        let g = inst.matrix.hermitian_apply(&res).unwrap().norm();
        let g0 = inst.matrix.hermitian_apply(&inst.observation).unwrap().norm();
        assert!(g < 1e-6 * g0, "{g} vs {g0}");
    }

    #[test]
    fn huge_group_penalty_zeroes_everything() {
        let inst = instance(16, 6, 3, 2);
        let beta = run_fista_sgl(&inst, 0.0, 1e6, 50).unwrap();
        assert!(beta.values().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn objective_monotone_and_below_zero_start() {
        let inst = instance(16, 6, 3, 3);
        let out = fista_sgl(&inst, 0.05, 0.1, 400).unwrap();
        for w in out.objective.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
        assert!(out.objective.last().unwrap() <= &out.objective[0]);
    }

    #[test]
    fn not_worse_than_amp_fixed_point() {
        // toy 8 x 12
        let inst = instance(8, 4, 3, 4);
        let amp = run_amp(&inst, &SolverConfig { max_iters: 500, ..SolverConfig::default() }).unwrap();
        let last = amp.trace.last().unwrap();
        let (l1, l2) = (last.lambda1, last.lambda2);
        let fista = run_fista_sgl(&inst, l1, l2, 5000).unwrap();
        let f = sgl_objective(&inst, &fista, l1, l2);
        let a = sgl_objective(&inst, &amp.beta_hat, l1, l2);
        assert!(f <= a + 1e-6, "fista {f} vs amp {a}");
    }
}
