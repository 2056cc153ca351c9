//! Column-grouped complex sensing matrices.
//!
//! Entries are stored densely, column-major. Matrices whose columns are
//! phase-modulated permutations of a small set of base sequences (the OTFS
//! construction) additionally carry a [`ShiftedBasis`] which evaluates the
//! same products without streaming the dense entries.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::types::{GroupPartition, GroupedComplexVector};

const UNIT_NORM_TOL: f64 = 1e-9;
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone)]
pub struct SensingMatrix {
    rows: usize,
    partition: GroupPartition,
    /// Column-major, `rows * partition.len()` entries.
    entries: Vec<Complex64>,
    basis: Option<Arc<ShiftedBasis>>,
}

impl SensingMatrix {
    /// Builds a matrix from column-major entries, rejecting any column whose
    /// norm is not 1 within 1e-9.
    pub fn from_columns(rows: usize, partition: GroupPartition, entries: Vec<Complex64>) -> Result<Self> {
        if rows == 0 {
            return Err(Error::param("sensing matrix needs at least one row"));
        }
        let cols = partition.len();
        if entries.len() != rows * cols {
            return Err(Error::DimensionMismatch { expected: rows * cols, actual: entries.len(), context: "matrix entries" });
        }
        for (j, col) in entries.chunks_exact(rows).enumerate() {
            let norm = col.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > UNIT_NORM_TOL {
                return Err(Error::ColumnNotUnitNorm { column: j, norm });
            }
        }
        Ok(Self { rows, partition, entries, basis: None })
    }

    /// Like [`from_columns`](Self::from_columns) but rescales every column to
    /// unit norm first. Zero columns are rejected.
    pub fn normalized(rows: usize, partition: GroupPartition, mut entries: Vec<Complex64>) -> Result<Self> {
        if rows == 0 || entries.len() != rows * partition.len() {
            return Self::from_columns(rows, partition, entries);
        }
        for (j, col) in entries.chunks_exact_mut(rows).enumerate() {
            let norm = col.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            if norm == 0.0 || !norm.is_finite() {
                return Err(Error::ColumnNotUnitNorm { column: j, norm });
            }
            col.iter_mut().for_each(|v| *v /= norm);
        }
        Self::from_columns(rows, partition, entries)
    }

    pub(crate) fn with_basis(mut self, basis: ShiftedBasis) -> Self {
        debug_assert_eq!(basis.len, self.rows);
        debug_assert_eq!(basis.num_bases * basis.shifts.len(), self.partition.len());
        self.basis = Some(Arc::new(basis));
        self
    }

    /// Drops the structured fast path so products use the dense entries.
    pub fn dense_only(&self) -> Self {
        Self { basis: None, ..self.clone() }
    }

    pub fn has_fast_path(&self) -> bool {
        self.basis.is_some()
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.partition.len()
    }

    #[inline]
    pub fn partition(&self) -> GroupPartition {
        self.partition
    }

    /// Measurement ratio `n / N`.
    pub fn delta(&self) -> f64 {
        self.rows as f64 / self.cols() as f64
    }

    #[inline]
    pub fn column(&self, j: usize) -> &[Complex64] {
        &self.entries[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.entries[col * self.rows + row]
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    /// `X^H z`.
    pub fn hermitian_apply(&self, z: &[Complex64]) -> Result<GroupedComplexVector> {
        let mut out = vec![ZERO; self.cols()];
        self.hermitian_apply_into(z, &mut out)?;
        GroupedComplexVector::from_vec(out, self.partition)
    }

    pub fn hermitian_apply_into(&self, z: &[Complex64], out: &mut [Complex64]) -> Result<()> {
        if z.len() != self.rows {
            return Err(Error::DimensionMismatch { expected: self.rows, actual: z.len(), context: "hermitian_apply input" });
        }
        if out.len() != self.cols() {
            return Err(Error::DimensionMismatch { expected: self.cols(), actual: out.len(), context: "hermitian_apply output" });
        }
        match &self.basis {
            Some(basis) => basis.adjoint(z, out),
            None => {
                for (o, col) in out.iter_mut().zip(self.entries.chunks_exact(self.rows)) {
                    *o = conj_dot(col, z);
                }
            }
        }
        Ok(())
    }

    /// `X b`.
    pub fn forward_apply(&self, b: &GroupedComplexVector) -> Result<Vec<Complex64>> {
        if b.partition() != self.partition {
            return Err(Error::DimensionMismatch { expected: self.cols(), actual: b.len(), context: "forward_apply partition" });
        }
        let mut out = vec![ZERO; self.rows];
        self.forward_apply_into(b.values(), &mut out);
        Ok(out)
    }

    /// `out = X b`. Zero coefficients are skipped.
    pub(crate) fn forward_apply_into(&self, b: &[Complex64], out: &mut [Complex64]) {
        out.iter_mut().for_each(|v| *v = ZERO);
        match &self.basis {
            Some(basis) => basis.forward(b, out),
            None => {
                for (coef, col) in b.iter().zip(self.entries.chunks_exact(self.rows)) {
                    if *coef == ZERO {
                        continue;
                    }
                    for (o, x) in out.iter_mut().zip(col) {
                        *o += coef * x;
                    }
                }
            }
        }
    }
}

/// `sum_k conj(a_k) b_k`, four-way unrolled.
#[inline]
pub(crate) fn conj_dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    let mut re = [0.0f64; 4];
    let mut im = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        for k in 0..4 {
            let x = a[4 * c + k];
            let y = b[4 * c + k];
            re[k] += x.re * y.re + x.im * y.im;
            im[k] += x.re * y.im - x.im * y.re;
        }
    }
    let mut acc = Complex64::new((re[0] + re[1]) + (re[2] + re[3]), (im[0] + im[1]) + (im[2] + im[3]));
    for k in 4 * chunks..a.len() {
        acc += a[k].conj() * b[k];
    }
    acc
}

/// Columns of the form `col[(b, c)][target_c[i]] = base_b[i] * phase_c[i]`,
/// ordered base-major (`column = b * num_shifts + c`).
#[derive(Debug, Clone)]
pub(crate) struct ShiftedBasis {
    len: usize,
    num_bases: usize,
    /// `num_bases * len`, base-major.
    base_re: Vec<f64>,
    base_im: Vec<f64>,
    shifts: Vec<ShiftMap>,
    chirp: Option<ChirpCorrelator>,
}

/// Correlation against every Zadoff-Chu root at once. With
/// `base_b[u] = exp(-j 2 pi r_b w(u) / L) / sqrt(L)` and `w(u) = u (u + 1) / 2 mod L`,
/// `sum_u conj(base_b[u]) v[u]` is the length-`L` inverse DFT of `v` binned
/// by `w`, read at index `r_b`.
#[derive(Clone)]
struct ChirpCorrelator {
    bins: Vec<u32>,
    roots: Vec<usize>,
    scale: f64,
    ifft: Arc<dyn Fft<f64>>,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for ChirpCorrelator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ChirpCorrelator").field("len", &self.bins.len()).field("roots", &self.roots).finish()
    }
}

#[derive(Debug, Clone)]
pub(crate) struct ShiftMap {
    pub target: Vec<u32>,
    pub phase: Vec<Complex64>,
}

impl ShiftedBasis {
    pub fn new(len: usize, bases: &[Vec<Complex64>], shifts: Vec<ShiftMap>) -> Self {
        let mut base_re = Vec::with_capacity(bases.len() * len);
        let mut base_im = Vec::with_capacity(bases.len() * len);
        for b in bases {
            assert_eq!(b.len(), len);
            base_re.extend(b.iter().map(|v| v.re));
            base_im.extend(b.iter().map(|v| v.im));
        }
        for s in &shifts {
            assert_eq!(s.target.len(), len);
            assert_eq!(s.phase.len(), len);
        }
        Self { len, num_bases: bases.len(), base_re, base_im, shifts, chirp: None }
    }

    /// Enables the FFT adjoint when every base is the odd-length Zadoff-Chu
    /// sequence of the given root (`1/sqrt(L)` scaling); left off otherwise.
    pub fn with_chirp_roots(mut self, roots: &[u64]) -> Self {
        let len = self.len;
        if roots.len() != self.num_bases || len.is_multiple_of(2) {
            return self;
        }
        let l = len as u64;
        let bins: Vec<u32> = (0..l).map(|u| ((u * (u + 1) / 2) % l) as u32).collect();
        let scale = 1.0 / (len as f64).sqrt();
        for (b, &r) in roots.iter().enumerate() {
            let matches = (0..len).all(|u| {
                let x = (r % l) * bins[u] as u64 % l;
                let expect = Complex64::from_polar(scale, -2.0 * std::f64::consts::PI * x as f64 / len as f64);
                let got = Complex64::new(self.base_re[b * len + u], self.base_im[b * len + u]);
                (got - expect).norm() < 1e-12
            });
            if !matches {
                return self;
            }
        }
        let mut planner = FftPlanner::new();
        self.chirp = Some(ChirpCorrelator {
            bins,
            roots: roots.iter().map(|&r| (r % l) as usize).collect(),
            scale,
            ifft: planner.plan_fft_inverse(len),
            fft: planner.plan_fft_forward(len),
        });
        self
    }

    fn adjoint(&self, z: &[Complex64], out: &mut [Complex64]) {
        match &self.chirp {
            Some(chirp) => self.adjoint_chirp(chirp, z, out),
            None => self.adjoint_direct(z, out),
        }
    }

    fn adjoint_chirp(&self, chirp: &ChirpCorrelator, z: &[Complex64], out: &mut [Complex64]) {
        let ns = self.shifts.len();
        let mut binned = vec![ZERO; self.len];
        let mut scratch = vec![ZERO; chirp.ifft.get_inplace_scratch_len()];
        for (c, shift) in self.shifts.iter().enumerate() {
            binned.iter_mut().for_each(|v| *v = ZERO);
            for ((&bin, &t), p) in chirp.bins.iter().zip(&shift.target).zip(&shift.phase) {
                binned[bin as usize] += p.conj() * z[t as usize];
            }
            chirp.ifft.process_with_scratch(&mut binned, &mut scratch);
            for (b, &r) in chirp.roots.iter().enumerate() {
                out[b * ns + c] = binned[r] * chirp.scale;
            }
        }
    }

    fn adjoint_direct(&self, z: &[Complex64], out: &mut [Complex64]) {
        let ns = self.shifts.len();
        let n = self.len;
        // Pull z back onto each shift's source layout, interleaved by shift so
        // the inner loop below runs over contiguous memory.
        let mut zt_re = vec![0.0f64; n * ns];
        let mut zt_im = vec![0.0f64; n * ns];
        for (c, shift) in self.shifts.iter().enumerate() {
            for i in 0..n {
                let v = shift.phase[i].conj() * z[shift.target[i] as usize];
                zt_re[i * ns + c] = v.re;
                zt_im[i * ns + c] = v.im;
            }
        }
        let mut acc_re = vec![0.0f64; ns];
        let mut acc_im = vec![0.0f64; ns];
        for b in 0..self.num_bases {
            acc_re.iter_mut().for_each(|v| *v = 0.0);
            acc_im.iter_mut().for_each(|v| *v = 0.0);
            let br_all = &self.base_re[b * n..(b + 1) * n];
            let bi_all = &self.base_im[b * n..(b + 1) * n];
            for i in 0..n {
                let br = br_all[i];
                let bi = bi_all[i];
                let zr = &zt_re[i * ns..(i + 1) * ns];
                let zi = &zt_im[i * ns..(i + 1) * ns];
                for c in 0..ns {
                    acc_re[c] += br * zr[c] + bi * zi[c];
                    acc_im[c] += br * zi[c] - bi * zr[c];
                }
            }
            for c in 0..ns {
                out[b * ns + c] = Complex64::new(acc_re[c], acc_im[c]);
            }
        }
    }

    fn forward(&self, coefs: &[Complex64], out: &mut [Complex64]) {
        if let Some(chirp) = &self.chirp {
            // one FFT per shift beats direct accumulation once a few
            // coefficients per shift are nonzero
            let nonzero = coefs.iter().filter(|c| **c != ZERO).count();
            if nonzero > 4 * self.shifts.len() {
                return self.forward_chirp(chirp, coefs, out);
            }
        }
        self.forward_direct(coefs, out);
    }

    fn forward_chirp(&self, chirp: &ChirpCorrelator, coefs: &[Complex64], out: &mut [Complex64]) {
        let ns = self.shifts.len();
        let mut spectrum = vec![ZERO; self.len];
        let mut scratch = vec![ZERO; chirp.fft.get_inplace_scratch_len()];
        for (c, shift) in self.shifts.iter().enumerate() {
            spectrum.iter_mut().for_each(|v| *v = ZERO);
            let mut any = false;
            for (b, &r) in chirp.roots.iter().enumerate() {
                let coef = coefs[b * ns + c];
                if coef != ZERO {
                    spectrum[r] += coef;
                    any = true;
                }
            }
            if !any {
                continue;
            }
            chirp.fft.process_with_scratch(&mut spectrum, &mut scratch);
            for ((&bin, &t), p) in chirp.bins.iter().zip(&shift.target).zip(&shift.phase) {
                out[t as usize] += p * spectrum[bin as usize] * chirp.scale;
            }
        }
    }

    fn forward_direct(&self, coefs: &[Complex64], out: &mut [Complex64]) {
        let ns = self.shifts.len();
        let n = self.len;
        for (idx, coef) in coefs.iter().enumerate() {
            if *coef == ZERO {
                continue;
            }
            let b = idx / ns;
            let shift = &self.shifts[idx % ns];
            let br = &self.base_re[b * n..(b + 1) * n];
            let bi = &self.base_im[b * n..(b + 1) * n];
            for i in 0..n {
                let v = coef * shift.phase[i] * Complex64::new(br[i], bi[i]);
                out[shift.target[i] as usize] += v;
            }
        }
    }
}
