//! Complex proximal operators, the two-stage CSGL denoiser and its Onsager
//! divergence.
//!
//! For an active group `g` with `s_g = eta_st(r_g, lambda1)` and
//! `S_g = ||s_g||_2 > lambda2`, the denoiser is
//! `eta_g = (1 - lambda2 / S_g) s_g`, and the Wirtinger derivative
//! `d eta_{g,j} / d r_{g,j}` summed over the support `J_g` is
//!
//! ```text
//! |J_g| - A_g - (lambda2 / 2) (2|J_g| - 1 - 2 A_g) / S_g,   A_g = sum_{j in J_g} lambda1 / (2 |r_{g,j}|)
//! ```
//!
//! [`OnsagerForm::Compat`] keeps the variant with a single `A_g` in the
//! group term; it agrees with the above whenever `lambda1 = 0` or
//! `lambda2 = 0` and is retained for comparison runs only.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::types::GroupedComplexVector;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Element threshold `lambda1` and group threshold `lambda2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub lambda1: f64,
    pub lambda2: f64,
}

impl Thresholds {
    pub fn new(lambda1: f64, lambda2: f64) -> Result<Self> {
        for (name, v) in [("lambda1", lambda1), ("lambda2", lambda2)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::param(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(Self { lambda1, lambda2 })
    }

    pub const fn zero() -> Self {
        Self { lambda1: 0.0, lambda2: 0.0 }
    }
}

/// Which closed form to use for the divergence of the CSGL denoiser.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OnsagerForm {
    /// Exact Wirtinger derivative of the denoiser.
    #[default]
    Exact,
    /// Compatibility form with a single `lambda1` correction in the group term.
    Compat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenoiseOutput {
    pub result: GroupedComplexVector,
    /// Groups whose output block is nonzero, ascending.
    pub active_groups: Vec<usize>,
    /// Group-local support `J_g` of each active group, aligned with `active_groups`.
    pub nonzero_index_sets: Vec<Vec<usize>>,
    /// Average Wirtinger divergence `<eta'>`.
    pub divergence: f64,
}

/// `(1 - lambda/|v|) v` if `|v| > lambda`, else 0.
#[inline]
pub fn soft_threshold_complex(v: Complex64, lambda: f64) -> Complex64 {
    let mag = v.norm();
    if mag > lambda {
        v * (1.0 - lambda / mag)
    } else {
        ZERO
    }
}

/// Scales `block` by `(1 - lambda/||block||)` in place, or zeroes it when
/// `||block|| <= lambda`. Returns the pre-shrink norm when the block survives.
#[inline]
fn shrink_group(block: &mut [Complex64], lambda: f64) -> Option<f64> {
    let norm = block.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    if norm > lambda {
        let scale = 1.0 - lambda / norm;
        block.iter_mut().for_each(|v| *v *= scale);
        Some(norm)
    } else {
        block.iter_mut().for_each(|v| *v = ZERO);
        None
    }
}

/// CSGL denoiser on one group, written into `out`.
pub fn denoise_group(r: &[Complex64], t: &Thresholds, out: &mut [Complex64]) {
    for (o, v) in out.iter_mut().zip(r) {
        *o = soft_threshold_complex(*v, t.lambda1);
    }
    shrink_group(out, t.lambda2);
}

/// Two-stage CSGL denoiser with the exact Onsager divergence.
pub fn csgl_denoise(r: &GroupedComplexVector, t: &Thresholds) -> DenoiseOutput {
    csgl_denoise_with(r, t, OnsagerForm::Exact)
}

pub fn csgl_denoise_with(r: &GroupedComplexVector, t: &Thresholds, form: OnsagerForm) -> DenoiseOutput {
    let partition = r.partition();
    let mut result = GroupedComplexVector::zeros(partition);
    let mut active_groups = Vec::new();
    let mut nonzero_index_sets = Vec::new();
    for g in 0..partition.num_groups() {
        let out = result.group_mut(g);
        let rg = r.group(g);
        for (o, v) in out.iter_mut().zip(rg) {
            *o = soft_threshold_complex(*v, t.lambda1);
        }
        if shrink_group(out, t.lambda2).is_some() {
            active_groups.push(g);
            nonzero_index_sets.push(rg.iter().enumerate().filter(|(_, v)| v.norm() > t.lambda1).map(|(j, _)| j).collect());
        }
    }
    let divergence = onsager_closed_form(r, t, &active_groups, &nonzero_index_sets, form);
    DenoiseOutput { result, active_groups, nonzero_index_sets, divergence }
}

/// Single-expression evaluation
/// `eta_{g,j} = (1 - lambda2 / sqrt(sum_i (|r_{g,i}| - lambda1)_+^2))_+ (1 - lambda1/|r_{g,j}|)_+ r_{g,j}`.
pub fn compact_form(r: &GroupedComplexVector, t: &Thresholds) -> GroupedComplexVector {
    let mut out = GroupedComplexVector::zeros(r.partition());
    for g in 0..r.partition().num_groups() {
        let rg = r.group(g);
        let energy = rg.iter().map(|v| (v.norm() - t.lambda1).max(0.0).powi(2)).sum::<f64>().sqrt();
        if energy <= t.lambda2 {
            continue;
        }
        let group_scale = 1.0 - t.lambda2 / energy;
        for (o, v) in out.group_mut(g).iter_mut().zip(rg) {
            let mag = v.norm();
            if mag > t.lambda1 {
                *o = v * (group_scale * (1.0 - t.lambda1 / mag));
            }
        }
    }
    out
}

/// Closed-form average divergence over the active groups and their supports,
/// normalised by `N`.
pub fn onsager_closed_form(
    r: &GroupedComplexVector,
    t: &Thresholds,
    active_groups: &[usize],
    nonzero_index_sets: &[Vec<usize>],
    form: OnsagerForm,
) -> f64 {
    let mut total = 0.0;
    for (&g, support) in active_groups.iter().zip(nonzero_index_sets) {
        let rg = r.group(g);
        let card = support.len() as f64;
        let a: f64 = support.iter().map(|&j| t.lambda1 / (2.0 * rg[j].norm())).sum();
        let energy = rg.iter().map(|v| (v.norm() - t.lambda1).max(0.0).powi(2)).sum::<f64>().sqrt();
        let mut term = card - a;
        if t.lambda2 > 0.0 {
            let numerator = match form {
                OnsagerForm::Exact => 2.0 * card - 1.0 - 2.0 * a,
                OnsagerForm::Compat => 2.0 * card - 1.0 - a,
            };
            term -= 0.5 * t.lambda2 * numerator / energy;
        }
        total += term;
    }
    total / r.len() as f64
}

/// Pure elementwise complex soft thresholding (the `lambda2 = 0` special case).
pub fn soft_threshold_denoise(r: &GroupedComplexVector, lambda1: f64) -> DenoiseOutput {
    let partition = r.partition();
    let values: Vec<Complex64> = r.values().iter().map(|v| soft_threshold_complex(*v, lambda1)).collect();
    let result = GroupedComplexVector::from_vec(values, partition).expect("same partition");
    let mut divergence = 0.0;
    for v in r.values() {
        let mag = v.norm();
        if mag > lambda1 {
            divergence += 1.0 - lambda1 / (2.0 * mag);
        }
    }
    let active_groups = result.nonzero_groups();
    let nonzero_index_sets =
        active_groups.iter().map(|&g| (0..partition.group_size()).filter(|&j| result.group(g)[j] != ZERO).collect()).collect();
    DenoiseOutput { result, active_groups, nonzero_index_sets, divergence: divergence / r.len() as f64 }
}

/// Pure group shrinkage of the raw blocks (the `lambda1 = 0` special case).
pub fn group_shrink_denoise(r: &GroupedComplexVector, lambda2: f64) -> DenoiseOutput {
    let partition = r.partition();
    let mut result = r.clone();
    let mut active_groups = Vec::new();
    let mut nonzero_index_sets = Vec::new();
    let mut divergence = 0.0;
    for g in 0..partition.num_groups() {
        if let Some(norm) = shrink_group(result.group_mut(g), lambda2) {
            let support: Vec<usize> = (0..partition.group_size()).filter(|&j| r.group(g)[j] != ZERO).collect();
            let card = support.len() as f64;
            divergence += card - lambda2 * (card - 0.5) / norm;
            active_groups.push(g);
            nonzero_index_sets.push(support);
        }
    }
    DenoiseOutput { result, active_groups, nonzero_index_sets, divergence: divergence / r.len() as f64 }
}

/// Central-difference estimate of the average Wirtinger divergence
/// `(1/N) sum_{g,j} 1/2 (d/dRe - i d/dIm) eta_{g,j}`, real part.
///
/// Inputs closer than `10 * eps` to a non-differentiable set are rejected.
pub fn numerical_wirtinger_divergence(r: &GroupedComplexVector, t: &Thresholds, eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::param(format!("eps must be positive, got {eps}")));
    }
    let partition = r.partition();
    let p = partition.group_size();
    let margin = 10.0 * eps;
    let mut scratch = vec![ZERO; p];
    let mut out_plus = vec![ZERO; p];
    let mut out_minus = vec![ZERO; p];
    let mut total = ZERO;
    for g in 0..partition.num_groups() {
        let rg = r.group(g);
        if t.lambda1 > 0.0 {
            if let Some(j) = rg.iter().position(|v| (v.norm() - t.lambda1).abs() < margin) {
                return Err(Error::NearThreshold { group: g, index: j, margin });
            }
        }
        let energy = rg.iter().map(|v| (v.norm() - t.lambda1).max(0.0).powi(2)).sum::<f64>().sqrt();
        if energy > 0.0 && (energy - t.lambda2).abs() < margin {
            return Err(Error::NearThreshold { group: g, index: p, margin });
        }
        for j in 0..p {
            let mut partial = |delta: Complex64| {
                scratch.copy_from_slice(rg);
                scratch[j] = rg[j] + delta;
                denoise_group(&scratch, t, &mut out_plus);
                scratch[j] = rg[j] - delta;
                denoise_group(&scratch, t, &mut out_minus);
                (out_plus[j] - out_minus[j]) / (2.0 * eps)
            };
            let d_re = partial(Complex64::new(eps, 0.0));
            let d_im = partial(Complex64::new(0.0, eps));
            total += (d_re - Complex64::i() * d_im) * 0.5;
        }
    }
    let avg = total / r.len() as f64;
    debug_assert!(avg.im.abs() < 1e-6, "Wirtinger average has imaginary part {}", avg.im);
    Ok(avg.re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{complex_gaussian, seeded_rng};
    use crate::types::GroupPartition;
    use proptest::prelude::*;
    use rand::Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn grouped(values: Vec<Complex64>, p: usize) -> GroupedComplexVector {
        let part = GroupPartition::new(values.len() / p, p).unwrap();
        GroupedComplexVector::from_vec(values, part).unwrap()
    }

    #[test]
    fn scalar_threshold_cases() {
        assert_eq!(soft_threshold_complex(c(0.5, 0.0), 1.0), ZERO);
        let v = soft_threshold_complex(c(3.0, 4.0), 1.0);
        assert!((v - c(2.4, 3.2)).norm() < 1e-15);
        assert!((soft_threshold_complex(c(-2.0, 0.0), 0.5) - c(-1.5, 0.0)).norm() < 1e-15);
        assert_eq!(soft_threshold_complex(ZERO, 0.0), ZERO);
        // boundary takes the zero branch
        assert_eq!(soft_threshold_complex(c(3.0, 4.0), 5.0), ZERO);
    }

    #[test]
    fn thresholds_validated() {
        assert!(Thresholds::new(-1.0, 0.0).is_err());
        assert!(Thresholds::new(0.0, f64::NAN).is_err());
        assert!(Thresholds::new(0.0, f64::INFINITY).is_err());
        assert!(Thresholds::new(0.3, 0.0).is_ok());
    }

    #[test]
    fn worked_group_example() {
        let r = grouped(vec![c(3.0, 4.0), c(0.5, 0.0)], 2);
        let out = csgl_denoise(&r, &Thresholds::new(1.0, 2.0).unwrap());
        assert!((out.result.values()[0] - c(1.2, 1.6)).norm() < 1e-14);
        assert_eq!(out.result.values()[1], ZERO);
        assert_eq!(out.active_groups, vec![0]);
        assert_eq!(out.nonzero_index_sets, vec![vec![0]]);

        let killed = csgl_denoise(&r, &Thresholds::new(1.0, 5.0).unwrap());
        assert!(killed.result.values().iter().all(|v| *v == ZERO));
        assert!(killed.active_groups.is_empty());
        assert_eq!(killed.divergence, 0.0);
    }

    #[test]
    fn identity_when_thresholds_vanish() {
        let mut rng = seeded_rng(4);
        let r = grouped((0..12).map(|_| complex_gaussian(&mut rng, 1.0)).collect(), 3);
        let out = csgl_denoise(&r, &Thresholds::zero());
        assert_eq!(out.result, r);
        assert!((out.divergence - 1.0).abs() < 1e-15);
    }

    #[test]
    fn closed_form_values() {
        let r = grouped(vec![c(3.0, 4.0), c(0.5, 0.0)], 2);
        let t = Thresholds::new(1.0, 2.0).unwrap();
        let sets = vec![vec![0]];
        // hand evaluation: A = 0.1, S = 4
        let compat = onsager_closed_form(&r, &t, &[0], &sets, OnsagerForm::Compat);
        assert!((compat - 0.5 * (1.0 - 0.1 - 0.9 / 4.0)).abs() < 1e-15);
        assert!((compat - 0.3375).abs() < 1e-15);
        let exact = onsager_closed_form(&r, &t, &[0], &sets, OnsagerForm::Exact);
        assert!((exact - 0.5 * (1.0 - 0.1 - 0.8 / 4.0)).abs() < 1e-15);
        assert_eq!(onsager_closed_form(&r, &t, &[], &[], OnsagerForm::Exact), 0.0);
    }

    #[test]
    fn oracle_adjudicates_closed_form() {
        let r = grouped(vec![c(3.0, 4.0), c(0.5, 0.0)], 2);
        let t = Thresholds::new(1.0, 2.0).unwrap();
        let numeric = numerical_wirtinger_divergence(&r, &t, 1e-6).unwrap();
        let exact = csgl_denoise(&r, &t).divergence;
        let compat = csgl_denoise_with(&r, &t, OnsagerForm::Compat).divergence;
        assert!((numeric - exact).abs() / exact < 1e-6, "{numeric} vs {exact}");
        assert!((numeric - compat).abs() / numeric > 1e-2);
    }

    #[test]
    fn oracle_trivial_cases() {
        let mut rng = seeded_rng(8);
        let r = grouped((0..12).map(|_| complex_gaussian(&mut rng, 1.0)).collect(), 4);
        let id = numerical_wirtinger_divergence(&r, &Thresholds::zero(), 1e-6).unwrap();
        assert!((id - 1.0).abs() < 1e-6);

        let small = grouped(r.values().iter().map(|v| v * (0.5 / v.norm())).collect(), 4);
        let zero = numerical_wirtinger_divergence(&small, &Thresholds::new(1.0, 0.3).unwrap(), 1e-6).unwrap();
        assert!(zero.abs() < 1e-9);
    }

    #[test]
    fn oracle_rejects_inputs_near_thresholds() {
        let r = grouped(vec![c(1.0, 0.0), c(0.0, 0.2)], 2);
        let err = numerical_wirtinger_divergence(&r, &Thresholds::new(1.0 + 1e-7, 0.0).unwrap(), 1e-6);
        assert!(matches!(err, Err(Error::NearThreshold { group: 0, index: 0, .. })));
        // ||s|| = 2 - 1 = 1 = lambda2
        let r = grouped(vec![c(2.0, 0.0), c(0.0, 0.2)], 2);
        let err = numerical_wirtinger_divergence(&r, &Thresholds::new(1.0, 1.0).unwrap(), 1e-6);
        assert!(matches!(err, Err(Error::NearThreshold { index: 2, .. })));
    }

    #[test]
    fn compact_form_matches_pipeline() {
        let mut rng = seeded_rng(17);
        for _ in 0..10_000 {
            let p = rng.random_range(1..6);
            let r = grouped((0..p).map(|_| complex_gaussian(&mut rng, 2.0)).collect(), p);
            let t = Thresholds::new(rng.random_range(0.0..1.5), rng.random_range(0.0..1.5)).unwrap();
            let a = csgl_denoise(&r, &t).result;
            let b = compact_form(&r, &t);
            for (u, v) in a.values().iter().zip(b.values()) {
                assert!((u - v).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn special_cases_reduce() {
        let mut rng = seeded_rng(2);
        let r = grouped((0..40).map(|_| complex_gaussian(&mut rng, 1.0)).collect(), 5);
        let cl = csgl_denoise(&r, &Thresholds::new(0.7, 0.0).unwrap());
        let st = soft_threshold_denoise(&r, 0.7);
        assert_eq!(cl.result, st.result);
        assert!((cl.divergence - st.divergence).abs() < 1e-15);

        let cgl = csgl_denoise(&r, &Thresholds::new(0.0, 1.9).unwrap());
        let gs = group_shrink_denoise(&r, 1.9);
        assert_eq!(cgl.result, gs.result);
        assert_eq!(cgl.active_groups, gs.active_groups);
        assert!((cgl.divergence - gs.divergence).abs() < 1e-15);
    }

    #[test]
    fn support_matches_output() {
        let mut rng = seeded_rng(33);
        let r = grouped((0..60).map(|_| complex_gaussian(&mut rng, 1.0)).collect(), 6);
        let out = csgl_denoise(&r, &Thresholds::new(0.8, 0.9).unwrap());
        for g in 0..10 {
            let pos = out.active_groups.iter().position(|&a| a == g);
            for j in 0..6 {
                let nonzero = out.result.group(g)[j] != ZERO;
                let listed = pos.is_some_and(|k| out.nonzero_index_sets[k].contains(&j));
                assert_eq!(nonzero, listed);
            }
        }
        assert!(out.divergence.is_finite());
    }

    proptest! {
        #[test]
        fn phase_equivariance(
            vals in proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 8),
            phi in 0.0f64..std::f64::consts::TAU,
            l1 in 0.0f64..1.5, l2 in 0.0f64..1.5,
        ) {
            let r = grouped(vals.iter().map(|&(a, b)| c(a, b)).collect(), 4);
            let rot = Complex64::from_polar(1.0, phi);
            let rotated = grouped(r.values().iter().map(|v| v * rot).collect(), 4);
            let t = Thresholds::new(l1, l2).unwrap();
            let a = csgl_denoise(&rotated, &t).result;
            let b = csgl_denoise(&r, &t).result;
            for (u, v) in a.values().iter().zip(b.values()) {
                prop_assert!((u - v * rot).norm() < 1e-12);
            }
        }

        #[test]
        fn scalar_prox_non_expansive(
            a in (-5.0f64..5.0, -5.0f64..5.0), b in (-5.0f64..5.0, -5.0f64..5.0), lambda in 0.0f64..3.0,
        ) {
            let (a, b) = (c(a.0, a.1), c(b.0, b.1));
            let d = (soft_threshold_complex(a, lambda) - soft_threshold_complex(b, lambda)).norm();
            prop_assert!(d <= (a - b).norm() + 1e-12);
        }
    }
}
