//! OTFS random-access model: Zadoff-Chu preambles, the delay-Doppler shift
//! grid, the structured sensing matrix and synthetic observations.
//!
//! DD-domain sequences of length `M * N` are vectorised delay-major, i.e.
//! sample `(m, q)` lives at index `m * N + q`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix::{SensingMatrix, ShiftMap, ShiftedBasis};
use crate::problem::{observe, GroundTruth, ProblemInstance, Tap};
use crate::rng::complex_gaussian_vec;
use crate::types::{GroupPartition, GroupedComplexVector};

/// Delay-Doppler grid with delay shifts `0..=max_delay_shift` and Doppler
/// shifts `-max_doppler_shift..=max_doppler_shift`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DdGrid {
    pub delay_bins: usize,
    pub doppler_bins: usize,
    pub max_delay_shift: usize,
    pub max_doppler_shift: usize,
}

impl DdGrid {
    /// Samples per DD frame, `M * N`.
    pub fn frame_len(&self) -> usize {
        self.delay_bins * self.doppler_bins
    }

    pub fn doppler_shift_count(&self) -> usize {
        2 * self.max_doppler_shift + 1
    }

    /// `|S| = (K_tau + 1)(2 K_nu + 1)`.
    pub fn shift_count(&self) -> usize {
        (self.max_delay_shift + 1) * self.doppler_shift_count()
    }

    /// All shifts in delay-major order; position in this list is the
    /// group-local column index.
    pub fn shifts(&self) -> Vec<(usize, i64)> {
        let kn = self.max_doppler_shift as i64;
        (0..=self.max_delay_shift).flat_map(|k| (-kn..=kn).map(move |l| (k, l))).collect()
    }

    /// Group-local index of shift `(k, l)`.
    pub fn shift_index(&self, delay: usize, doppler: i64) -> Result<usize> {
        let kn = self.max_doppler_shift as i64;
        if delay > self.max_delay_shift || doppler.abs() > kn {
            return Err(Error::param(format!(
                "shift ({delay}, {doppler}) outside grid (K_tau={}, K_nu={})",
                self.max_delay_shift, self.max_doppler_shift
            )));
        }
        Ok(delay * self.doppler_shift_count() + (doppler + kn) as usize)
    }
}

pub fn build_dd_grid(delay_bins: usize, doppler_bins: usize, max_delay_shift: usize, max_doppler_shift: usize) -> Result<DdGrid> {
    if delay_bins == 0 || doppler_bins == 0 {
        return Err(Error::param("delay and Doppler bin counts must be positive"));
    }
    if max_delay_shift >= delay_bins {
        return Err(Error::param(format!("delay shift count K_tau={max_delay_shift} must be below M_dd={delay_bins}")));
    }
    if 2 * max_doppler_shift >= doppler_bins {
        return Err(Error::param(format!("Doppler shift count K_nu={max_doppler_shift} must be below N_dd/2 (N_dd={doppler_bins})")));
    }
    Ok(DdGrid { delay_bins, doppler_bins, max_delay_shift, max_doppler_shift })
}

/// A unit-norm DD-domain preamble.
#[derive(Debug, Clone, PartialEq)]
pub struct Preamble {
    pub samples: Vec<Complex64>,
    pub root: u64,
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// `s[m] = exp(-j pi u m (m + 1) / L) / sqrt(L)` for odd `L` and `gcd(u, L) = 1`.
pub fn zadoff_chu(root: u64, length: usize) -> Result<Preamble> {
    if length == 0 || length.is_multiple_of(2) {
        return Err(Error::param(format!("Zadoff-Chu length must be odd and positive, got {length}")));
    }
    let len = length as u64;
    if root == 0 || root >= len || gcd(root, len) != 1 {
        return Err(Error::param(format!("root {root} must be in [1, {len}) and coprime to {len}")));
    }
    let scale = 1.0 / (length as f64).sqrt();
    // exp(-j pi x / L) has period 2L in x; reduce exactly before going to floats.
    let period = 2 * len as u128;
    let samples = (0..len)
        .map(|m| {
            let x = (root as u128 * m as u128 * (m as u128 + 1)) % period;
            Complex64::from_polar(scale, -PI * x as f64 / len as f64)
        })
        .collect();
    Ok(Preamble { samples, root })
}

/// The first `count` roots `>= 1` coprime to `length`, as Zadoff-Chu preambles.
pub fn preamble_pool(count: usize, length: usize) -> Result<Vec<Preamble>> {
    let roots: Vec<u64> = (1..length as u64).filter(|r| gcd(*r, length as u64) == 1).take(count).collect();
    if roots.len() < count {
        return Err(Error::param(format!("only {} roots coprime to {length} exist, {count} requested", roots.len())));
    }
    roots.into_iter().map(|r| zadoff_chu(r, length)).collect()
}

/// Phase applied at output sample `(m, q)` by shift `(k, l)`.
fn shift_phase(grid: &DdGrid, m: usize, q: usize, delay: usize, doppler: i64) -> Complex64 {
    let mm = grid.delay_bins as i64;
    let nn = grid.doppler_bins as i64;
    let dm = m as i64 - delay as i64;
    let mut angle = 2.0 * PI * (doppler * dm) as f64 / (mm * nn) as f64;
    if dm < 0 {
        // quasi-periodic wrap in delay
        let dq = (q as i64 - doppler).rem_euclid(nn);
        angle -= 2.0 * PI * dq as f64 / nn as f64;
    }
    Complex64::from_polar(1.0, angle)
}

fn source_index(grid: &DdGrid, m: usize, q: usize, delay: usize, doppler: i64) -> usize {
    let mm = grid.delay_bins as i64;
    let nn = grid.doppler_bins as i64;
    let sm = (m as i64 - delay as i64).rem_euclid(mm) as usize;
    let sq = (q as i64 - doppler).rem_euclid(nn) as usize;
    sm * grid.doppler_bins + sq
}

/// Discrete twisted shift of `s` by `(delay, doppler)` bins:
///
/// `out[m, q] = s[(m-k) mod M, (q-l) mod N] * exp(j 2 pi l (m-k) / (M N)) * W`
///
/// with `W = exp(-j 2 pi (q-l) / N)` when `m < k` and `W = 1` otherwise. The
/// map is a phase-modulated permutation, so it preserves the norm of `s`.
pub fn twisted_shift(s: &Preamble, delay: usize, doppler: i64, grid: &DdGrid) -> Result<Vec<Complex64>> {
    if s.samples.len() != grid.frame_len() {
        return Err(Error::DimensionMismatch { expected: grid.frame_len(), actual: s.samples.len(), context: "preamble length" });
    }
    grid.shift_index(delay, doppler)?;
    let mut out = Vec::with_capacity(grid.frame_len());
    for m in 0..grid.delay_bins {
        for q in 0..grid.doppler_bins {
            let src = source_index(grid, m, q, delay, doppler);
            out.push(s.samples[src] * shift_phase(grid, m, q, delay, doppler));
        }
    }
    Ok(out)
}

fn shift_map(grid: &DdGrid, delay: usize, doppler: i64) -> ShiftMap {
    let n = grid.frame_len();
    let mut target = vec![0u32; n];
    let mut phase = vec![Complex64::new(0.0, 0.0); n];
    for m in 0..grid.delay_bins {
        for q in 0..grid.doppler_bins {
            let src = source_index(grid, m, q, delay, doppler);
            target[src] = (m * grid.doppler_bins + q) as u32;
            phase[src] = shift_phase(grid, m, q, delay, doppler);
        }
    }
    ShiftMap { target, phase }
}

/// Column `j * |S| + i` is `twisted_shift(preambles[j], shift_i)`.
pub fn build_sensing_matrix(preambles: &[Preamble], grid: &DdGrid) -> Result<SensingMatrix> {
    if preambles.is_empty() {
        return Err(Error::param("at least one preamble is required"));
    }
    let n = grid.frame_len();
    let shifts = grid.shifts();
    let partition = GroupPartition::new(preambles.len(), shifts.len())?;
    let mut entries = Vec::with_capacity(n * partition.len());
    for s in preambles {
        for &(k, l) in &shifts {
            entries.extend(twisted_shift(s, k, l, grid)?);
        }
    }
    let maps = shifts.iter().map(|&(k, l)| shift_map(grid, k, l)).collect();
    let bases: Vec<Vec<Complex64>> = preambles.iter().map(|p| p.samples.clone()).collect();
    let roots: Vec<u64> = preambles.iter().map(|p| p.root).collect();
    let basis = ShiftedBasis::new(n, &bases, maps).with_chirp_roots(&roots);
    Ok(SensingMatrix::from_columns(n, partition, entries)?.with_basis(basis))
}

/// Power-delay profile quantised to the grid's delay shifts.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelProfile {
    powers_db: Vec<f64>,
    relative_powers: Vec<f64>,
    delay_bins: Vec<usize>,
}

impl ChannelProfile {
    /// `powers_db` are relative tap powers in dB; they are normalised to unit
    /// total linear power.
    pub fn from_db(powers_db: &[f64], delay_bins: &[usize]) -> Result<Self> {
        if powers_db.is_empty() {
            return Err(Error::param("channel profile needs at least one tap"));
        }
        if powers_db.len() != delay_bins.len() {
            return Err(Error::param(format!("{} tap powers but {} delay bins", powers_db.len(), delay_bins.len())));
        }
        if powers_db.iter().any(|p| !p.is_finite()) {
            return Err(Error::param("tap powers must be finite"));
        }
        let linear: Vec<f64> = powers_db.iter().map(|db| 10f64.powf(db / 10.0)).collect();
        let total: f64 = linear.iter().sum();
        Ok(Self {
            powers_db: powers_db.to_vec(),
            relative_powers: linear.iter().map(|p| p / total).collect(),
            delay_bins: delay_bins.to_vec(),
        })
    }

    /// ITU Vehicular-A, six taps mapped onto four delay bins.
    pub fn vehicular_a() -> Self {
        Self::from_db(&VEH_A_POWERS_DB, &VEH_A_DELAY_BINS).expect("static profile")
    }

    pub fn tap_count(&self) -> usize {
        self.relative_powers.len()
    }

    /// The dB values the profile was built from.
    pub fn powers_db(&self) -> &[f64] {
        &self.powers_db
    }

    pub fn relative_powers(&self) -> &[f64] {
        &self.relative_powers
    }

    pub fn delay_bins(&self) -> &[usize] {
        &self.delay_bins
    }

    pub fn check_grid(&self, grid: &DdGrid) -> Result<()> {
        match self.delay_bins.iter().find(|&&k| k > grid.max_delay_shift) {
            Some(k) => Err(Error::param(format!("profile delay bin {k} exceeds grid delay shifts (K_tau={})", grid.max_delay_shift))),
            None => Ok(()),
        }
    }
}

pub const VEH_A_POWERS_DB: [f64; 6] = [0.0, -1.0, -9.0, -10.0, -15.0, -20.0];
pub const VEH_A_DELAY_BINS: [usize; 6] = [0, 1, 1, 2, 2, 3];

/// Draws one tap per profile entry: fixed delay bin, uniform Doppler bin,
/// gain `sqrt(power) * exp(j theta)` with uniform phase.
pub fn sample_channel<R: Rng + ?Sized>(profile: &ChannelProfile, grid: &DdGrid, rng: &mut R) -> Vec<Tap> {
    let kn = grid.max_doppler_shift as i64;
    profile
        .relative_powers
        .iter()
        .zip(&profile.delay_bins)
        .map(|(&p, &k)| {
            let doppler = rng.random_range(-kn..=kn);
            let theta = rng.random_range(0.0..2.0 * PI);
            Tap { delay_bin: k, doppler_bin: doppler, gain: Complex64::from_polar(p.sqrt(), theta) }
        })
        .collect()
}

/// Preamble pool, grid and the sensing matrix they induce.
#[derive(Debug, Clone)]
pub struct OtfsSystem {
    pub grid: DdGrid,
    pub preambles: Vec<Preamble>,
    pub matrix: Arc<SensingMatrix>,
}

impl OtfsSystem {
    /// `num_preambles` Zadoff-Chu preambles of length `M * N` on `grid`.
    pub fn new(grid: DdGrid, num_preambles: usize) -> Result<Self> {
        let preambles = preamble_pool(num_preambles, grid.frame_len())?;
        let matrix = Arc::new(build_sensing_matrix(&preambles, &grid)?);
        Ok(Self { grid, preambles, matrix })
    }

    pub fn num_groups(&self) -> usize {
        self.preambles.len()
    }

    /// Draws `active` distinct preambles and a channel for each; taps landing
    /// on the same shift add coherently.
    pub fn draw_truth<R: Rng + ?Sized>(&self, active: usize, profile: &ChannelProfile, rng: &mut R) -> Result<GroundTruth> {
        let groups = self.num_groups();
        if active > groups {
            return Err(Error::param(format!("K={active} exceeds G={groups}")));
        }
        profile.check_grid(&self.grid)?;
        let partition = self.matrix.partition();
        let mut active_groups = index::sample(rng, groups, active).into_vec();
        active_groups.sort_unstable();
        let mut coefficients = GroupedComplexVector::zeros(partition);
        let mut taps = Vec::with_capacity(active);
        for &g in &active_groups {
            let channel = sample_channel(profile, &self.grid, rng);
            let block = coefficients.group_mut(g);
            for tap in &channel {
                block[self.grid.shift_index(tap.delay_bin, tap.doppler_bin)?] += tap.gain;
            }
            taps.push(channel);
        }
        Ok(GroundTruth { active_groups, coefficients, taps })
    }

    /// One random-access observation at `snr_db`.
    pub fn synthesize<R: Rng + ?Sized>(
        &self,
        active: usize,
        profile: &ChannelProfile,
        snr_db: f64,
        rng: &mut R,
    ) -> Result<ProblemInstance> {
        let truth = self.draw_truth(active, profile, rng)?;
        let noise = complex_gaussian_vec(rng, self.matrix.rows(), 1.0);
        observe(&self.matrix, truth, snr_db, &noise)
    }
}
