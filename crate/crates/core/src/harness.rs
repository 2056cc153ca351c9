//! Monte Carlo experiments: SNR sweeps, validity-region sweeps and
//! threshold-multiplier calibration over synthetic OTFS or i.i.d. Gaussian
//! instances.
//!
//! Trial `t` of an experiment with seed `s` draws its support, gains and unit
//! noise from sub-stream `t` of `s`, independently of the SNR point, so every
//! SNR point and every solver sees the same underlying realisations (common
//! random numbers). Aggregation uses integer counters only, which makes the
//! results independent of the worker count.

use std::sync::Arc;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::gaussian::{draw_group_sparse_truth, gaussian_matrix};
use crate::matrix::SensingMatrix;
use crate::otfs::{build_dd_grid, ChannelProfile, OtfsSystem};
use crate::problem::{observe, ProblemInstance};
use crate::rng::{complex_gaussian_vec, purpose, substream};
use crate::solvers::{calibrate_ost, ost_detect, run_amp, DetectionResult, OstCalibration, OstConfig, OstRule, SolverConfig, Variant};
use crate::types::GroupPartition;

#[derive(Debug, Clone, PartialEq)]
pub struct OtfsScenario {
    pub delay_bins: usize,
    pub doppler_bins: usize,
    pub max_delay_shift: usize,
    pub max_doppler_shift: usize,
    /// Preamble pool size `G`.
    pub groups: usize,
    pub profile: ChannelProfile,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianScenario {
    pub rows: usize,
    pub groups: usize,
    pub group_size: usize,
    /// Nonzeros per active group.
    pub nonzeros: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Scenario {
    Otfs(OtfsScenario),
    Gaussian(GaussianScenario),
}

impl Scenario {
    pub fn rows(&self) -> usize {
        match self {
            Scenario::Otfs(o) => o.delay_bins * o.doppler_bins,
            Scenario::Gaussian(g) => g.rows,
        }
    }

    pub fn groups(&self) -> usize {
        match self {
            Scenario::Otfs(o) => o.groups,
            Scenario::Gaussian(g) => g.groups,
        }
    }

    pub fn group_size(&self) -> usize {
        match self {
            Scenario::Otfs(o) => (o.max_delay_shift + 1) * (2 * o.max_doppler_shift + 1),
            Scenario::Gaussian(g) => g.group_size,
        }
    }

    /// `n / N`.
    pub fn delta(&self) -> f64 {
        self.rows() as f64 / (self.groups() * self.group_size()) as f64
    }

    /// Same scenario with `G` replaced.
    pub fn with_groups(&self, groups: usize) -> Scenario {
        let mut s = self.clone();
        match &mut s {
            Scenario::Otfs(o) => o.groups = groups,
            Scenario::Gaussian(g) => g.groups = groups,
        }
        s
    }

    /// Pool size realising measurement ratio `delta` at fixed `n` and group
    /// size: `G = round(n / (p delta))`, at least 1.
    pub fn groups_for_delta(&self, delta: f64) -> usize {
        ((self.rows() as f64 / (self.group_size() as f64 * delta)).round() as usize).max(1)
    }

    fn validate(&self) -> Result<()> {
        match self {
            Scenario::Otfs(o) => {
                let grid = build_dd_grid(o.delay_bins, o.doppler_bins, o.max_delay_shift, o.max_doppler_shift)?;
                o.profile.check_grid(&grid)?;
                if o.groups == 0 {
                    return Err(Error::param("the preamble pool must be nonempty"));
                }
            }
            Scenario::Gaussian(g) => {
                if g.rows == 0 || g.groups == 0 || g.group_size == 0 {
                    return Err(Error::param("Gaussian scenario dimensions must be positive"));
                }
                if g.nonzeros == 0 || g.nonzeros > g.group_size {
                    return Err(Error::param(format!("nonzeros per group must be in [1, {}], got {}", g.group_size, g.nonzeros)));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolverKind {
    Amp(SolverConfig),
    Ost(OstConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSpec {
    /// Identifier written to the `solver` output column.
    pub name: String,
    pub kind: SolverKind,
}

impl SolverSpec {
    pub fn amp(config: SolverConfig) -> Self {
        Self { name: config.variant.name().to_string(), kind: SolverKind::Amp(config) }
    }

    pub fn ost(config: OstConfig) -> Self {
        let name = match config.rule {
            OstRule::NullQuantile { .. } => "ost",
            OstRule::TopK => "ost-topk",
        };
        Self { name: name.to_string(), kind: SolverKind::Ost(config) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    /// Active users `K`.
    pub active: usize,
    pub snr_points: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub solvers: Vec<SolverSpec>,
    /// Region sweeps only.
    pub target_pmd: f64,
    pub delta_grid: Vec<f64>,
    pub rho_grid: Vec<f64>,
    /// When false, `wall_time_ms` is reported as 0 so outputs are byte-stable.
    pub record_timing: bool,
}

impl ExperimentConfig {
    pub fn new(scenario: Scenario, active: usize, solvers: Vec<SolverSpec>) -> Self {
        Self {
            scenario,
            active,
            snr_points: vec![10.0],
            trials: 1000,
            seed: 1,
            solvers,
            target_pmd: 1e-2,
            delta_grid: Vec::new(),
            rho_grid: Vec::new(),
            record_timing: true,
        }
    }

    /// `K / G`.
    pub fn rho(&self) -> f64 {
        self.active as f64 / self.scenario.groups() as f64
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if self.trials == 0 {
            return Err(Error::param("trials must be at least 1"));
        }
        if self.active > self.scenario.groups() {
            return Err(Error::param(format!(
                "K = {} active users exceed G = {} groups (K <= G required)",
                self.active,
                self.scenario.groups()
            )));
        }
        if self.snr_points.is_empty() {
            return Err(Error::param("snr_points must not be empty"));
        }
        if let Some(bad) = self.snr_points.iter().find(|v| !v.is_finite()) {
            return Err(Error::param(format!("SNR point {bad} is not finite")));
        }
        if self.solvers.is_empty() {
            return Err(Error::param("at least one solver is required"));
        }
        for s in &self.solvers {
            match &s.kind {
                SolverKind::Amp(c) => c.validate()?,
                SolverKind::Ost(c) => {
                    if let OstRule::NullQuantile { pfa } = c.rule {
                        if !(pfa > 0.0 && pfa < 1.0) {
                            return Err(Error::param(format!("OST false-alarm target must be in (0, 1), got {pfa}")));
                        }
                        if c.calibration_draws == 0 {
                            return Err(Error::param("OST calibration needs at least one noise draw"));
                        }
                    }
                }
            }
        }
        for (i, a) in self.solvers.iter().enumerate() {
            if self.solvers[..i].iter().any(|b| b.name == a.name) {
                return Err(Error::param(format!("solver '{}' listed twice", a.name)));
            }
        }
        if !(0.0..=1.0).contains(&self.target_pmd) {
            return Err(Error::param(format!("target_pmd must be in [0, 1], got {}", self.target_pmd)));
        }
        check_grid("delta_grid", &self.delta_grid, |v| v > 0.0)?;
        check_grid("rho_grid", &self.rho_grid, |v| v > 0.0 && v <= 1.0)?;
        Ok(())
    }

    /// The configuration at one validity-region point: `G` set from `delta`
    /// and `K = round(rho G)` (at least 1, at most `G`).
    pub fn at_region_point(&self, delta: f64, rho: f64) -> ExperimentConfig {
        let groups = self.scenario.groups_for_delta(delta);
        let mut c = self.clone();
        c.scenario = self.scenario.with_groups(groups);
        c.active = ((rho * groups as f64).round() as usize).clamp(1, groups);
        c
    }
}

fn check_grid(name: &str, grid: &[f64], in_range: impl Fn(f64) -> bool) -> Result<()> {
    if let Some(bad) = grid.iter().find(|v| !(v.is_finite() && in_range(**v))) {
        return Err(Error::param(format!("{name} value {bad} is out of range")));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param(format!("{name} must be strictly increasing")));
    }
    Ok(())
}

/// Aggregate for one (solver, SNR) point.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub solver: String,
    pub snr_db: f64,
    /// `misdetected / (K trials)`.
    pub pmd: f64,
    /// `false_alarms / ((G - K) trials)`.
    pub pfa: f64,
    pub trials: usize,
    pub misdetected: usize,
    pub false_alarms: usize,
    /// Trials where the solver aborted; each counts `K` misdetections.
    pub failed: usize,
    pub wall_time_ms: f64,
}

impl MetricsRow {
    /// Binomial standard error of `pmd` over `K trials` opportunities.
    pub fn pmd_std_error(&self, active: usize) -> f64 {
        let opportunities = (active * self.trials) as f64;
        if opportunities == 0.0 {
            return 0.0;
        }
        (self.pmd * (1.0 - self.pmd) / opportunities).sqrt()
    }
}

/// One solver's outcome on one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub solver: String,
    /// Digest of the instance the solver was given.
    pub instance_digest: [u8; 32],
    pub detected: Vec<usize>,
    pub truth: Vec<usize>,
    pub misdetected: usize,
    pub false_alarms: usize,
    pub failed: bool,
    pub elapsed_ns: u64,
}

enum Sampler {
    Otfs { system: OtfsSystem, profile: ChannelProfile },
    Gaussian { matrix: Arc<SensingMatrix>, nonzeros: usize },
}

impl Sampler {
    fn new(scenario: &Scenario, seed: u64) -> Result<Self> {
        Ok(match scenario {
            Scenario::Otfs(o) => {
                let grid = build_dd_grid(o.delay_bins, o.doppler_bins, o.max_delay_shift, o.max_doppler_shift)?;
                Sampler::Otfs { system: OtfsSystem::new(grid, o.groups)?, profile: o.profile.clone() }
            }
            Scenario::Gaussian(g) => {
                let partition = GroupPartition::new(g.groups, g.group_size)?;
                let mut rng = substream(seed, purpose::MATRIX);
                Sampler::Gaussian { matrix: Arc::new(gaussian_matrix(g.rows, partition, &mut rng)?), nonzeros: g.nonzeros }
            }
        })
    }

    fn matrix(&self) -> &Arc<SensingMatrix> {
        match self {
            Sampler::Otfs { system, .. } => &system.matrix,
            Sampler::Gaussian { matrix, .. } => matrix,
        }
    }

    fn instance(&self, active: usize, snr_db: f64, seed: u64, trial: usize) -> Result<ProblemInstance> {
        let mut rng = substream(seed, trial as u64);
        let truth = match self {
            Sampler::Otfs { system, profile } => system.draw_truth(active, profile, &mut rng)?,
            Sampler::Gaussian { matrix, nonzeros } => draw_group_sparse_truth(matrix, active, *nonzeros, &mut rng)?,
        };
        let noise = complex_gaussian_vec(&mut rng, self.matrix().rows(), 1.0);
        observe(self.matrix(), truth, snr_db, &noise)
    }
}

/// Worker pool for trial-level parallelism; `threads = 0` picks the default.
pub struct Workers {
    #[cfg(feature = "parallel")]
    pool: rayon::ThreadPool,
}

impl Workers {
    pub fn new(threads: usize) -> Result<Self> {
        #[cfg(feature = "parallel")]
        {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| Error::param(format!("cannot start {threads} worker threads: {e}")))?;
            Ok(Self { pool })
        }
        #[cfg(not(feature = "parallel"))]
        {
            let _ = threads;
            Ok(Self {})
        }
    }

    pub fn threads(&self) -> usize {
        #[cfg(feature = "parallel")]
        {
            self.pool.current_num_threads()
        }
        #[cfg(not(feature = "parallel"))]
        {
            1
        }
    }

    /// `(0..count).map(f)` with results in index order.
    fn map<T: Send>(&self, count: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            self.pool.install(|| (0..count).into_par_iter().map(f).collect())
        }
        #[cfg(not(feature = "parallel"))]
        {
            (0..count).map(f).collect()
        }
    }
}

struct PreparedSolver {
    spec: SolverSpec,
    calibration: Option<OstCalibration>,
}

/// A scenario with its sensing matrix built and OST thresholds calibrated,
/// ready to run trials for a fixed `K`.
pub struct Experiment {
    sampler: Sampler,
    active: usize,
    seed: u64,
    solvers: Vec<PreparedSolver>,
    record_timing: bool,
}

impl Experiment {
    pub fn prepare(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        Self::with_solvers(config, &config.solvers)
    }

    fn with_solvers(config: &ExperimentConfig, specs: &[SolverSpec]) -> Result<Self> {
        let sampler = Sampler::new(&config.scenario, config.seed)?;
        let mut solvers: Vec<PreparedSolver> = Vec::with_capacity(specs.len());
        for spec in specs {
            let calibration = match spec.kind {
                SolverKind::Ost(OstConfig { rule: OstRule::NullQuantile { pfa }, calibration_draws }) => {
                    let cached = solvers.iter().filter_map(|s| s.calibration).find(|c| c.pfa == pfa);
                    match cached {
                        Some(c) => Some(c),
                        None => Some(calibrate_ost(sampler.matrix(), pfa, calibration_draws, config.seed)?),
                    }
                }
                _ => None,
            };
            solvers.push(PreparedSolver { spec: spec.clone(), calibration });
        }
        Ok(Self { sampler, active: config.active, seed: config.seed, solvers, record_timing: config.record_timing })
    }

    pub fn matrix(&self) -> &Arc<SensingMatrix> {
        self.sampler.matrix()
    }

    /// The instance trial `trial` sees at `snr_db`.
    pub fn instance(&self, snr_db: f64, trial: usize) -> Result<ProblemInstance> {
        self.sampler.instance(self.active, snr_db, self.seed, trial)
    }

    /// Runs every solver on the same instance. A solver abort is recorded as
    /// a failed trial with all users missed.
    pub fn run_trial(&self, snr_db: f64, trial: usize) -> Result<Vec<TrialRecord>> {
        let instance = self.instance(snr_db, trial)?;
        let digest = instance.digest();
        let truth = &instance.truth.active_groups;
        Ok(self
            .solvers
            .iter()
            .map(|s| {
                let start = self.record_timing.then(Instant::now);
                let outcome: Result<DetectionResult> = match &s.spec.kind {
                    SolverKind::Amp(cfg) => run_amp(&instance, cfg),
                    SolverKind::Ost(cfg) => ost_detect(&instance, cfg, s.calibration.as_ref()),
                };
                let elapsed_ns = start.map_or(0, |t| t.elapsed().as_nanos() as u64);
                let (detected, failed) = match outcome {
                    Ok(r) => (r.detected_groups, false),
                    Err(_) => (Vec::new(), true),
                };
                let misdetected = truth.iter().filter(|g| !detected.contains(g)).count();
                let false_alarms = detected.iter().filter(|g| !truth.contains(g)).count();
                TrialRecord {
                    solver: s.spec.name.clone(),
                    instance_digest: digest,
                    detected,
                    truth: truth.clone(),
                    misdetected,
                    false_alarms,
                    failed,
                    elapsed_ns,
                }
            })
            .collect())
    }

    /// One [`MetricsRow`] per solver at `snr_db`, in solver order.
    pub fn run_point(&self, snr_db: f64, trials: usize, workers: &Workers) -> Result<Vec<MetricsRow>> {
        let records = workers.map(trials, |t| self.run_trial(snr_db, t));
        let mut misdetected = vec![0usize; self.solvers.len()];
        let mut false_alarms = vec![0usize; self.solvers.len()];
        let mut failed = vec![0usize; self.solvers.len()];
        let mut elapsed = vec![0u128; self.solvers.len()];
        for trial in records {
            for (i, r) in trial?.into_iter().enumerate() {
                misdetected[i] += r.misdetected;
                false_alarms[i] += r.false_alarms;
                failed[i] += r.failed as usize;
                elapsed[i] += r.elapsed_ns as u128;
            }
        }
        let groups = self.matrix().partition().num_groups();
        let md_den = (self.active * trials) as f64;
        let fa_den = ((groups - self.active) * trials) as f64;
        Ok(self
            .solvers
            .iter()
            .enumerate()
            .map(|(i, s)| MetricsRow {
                solver: s.spec.name.clone(),
                snr_db,
                pmd: if md_den > 0.0 { misdetected[i] as f64 / md_den } else { 0.0 },
                pfa: if fa_den > 0.0 { false_alarms[i] as f64 / fa_den } else { 0.0 },
                trials,
                misdetected: misdetected[i],
                false_alarms: false_alarms[i],
                failed: failed[i],
                wall_time_ms: elapsed[i] as f64 / 1e6,
            })
            .collect())
    }
}

/// Free-standing form of [`Experiment::run_trial`]; rebuilds the matrix on
/// every call, so prefer [`Experiment`] in loops.
pub fn run_trial(config: &ExperimentConfig, snr_db: f64, trial: usize) -> Result<Vec<TrialRecord>> {
    Experiment::prepare(config)?.run_trial(snr_db, trial)
}

/// `P_md` versus SNR. Rows are ordered by solver (config order), then SNR.
pub fn snr_sweep(config: &ExperimentConfig, workers: &Workers) -> Result<Vec<MetricsRow>> {
    let experiment = Experiment::prepare(config)?;
    let mut by_snr = Vec::with_capacity(config.snr_points.len());
    for &snr in &config.snr_points {
        by_snr.push(experiment.run_point(snr, config.trials, workers)?);
    }
    let mut rows = Vec::with_capacity(config.solvers.len() * config.snr_points.len());
    for i in 0..config.solvers.len() {
        rows.extend(by_snr.iter().map(|point| point[i].clone()));
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionRow {
    pub solver: String,
    pub snr_db: f64,
    pub delta: f64,
    /// Largest grid `rho_G` meeting the target; `None` when even the smallest
    /// grid value misses it.
    pub rho_g_max: Option<f64>,
}

/// One evaluated (delta, rho) point of a region sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionPoint {
    pub delta: f64,
    pub rho: f64,
    pub groups: usize,
    pub active: usize,
    pub metrics: MetricsRow,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionResult {
    /// Ordered by solver, SNR, then delta.
    pub rows: Vec<RegionRow>,
    pub points: Vec<RegionPoint>,
}

/// Consecutive misses of the target after which a solver's rho scan stops.
pub const REGION_STOP_AFTER: usize = 2;

/// Validity-region boundary per solver and SNR. For each delta (realised by
/// changing `G` at fixed `n`), rho is scanned upward; a solver's scan ends
/// after [`REGION_STOP_AFTER`] consecutive misses and its boundary is the
/// largest rho seen with `P_md <= target_pmd`.
pub fn validity_region(config: &ExperimentConfig, workers: &Workers) -> Result<RegionResult> {
    config.validate()?;
    if config.delta_grid.is_empty() || config.rho_grid.is_empty() {
        return Err(Error::param("region sweeps need nonempty delta_grid and rho_grid"));
    }
    let ns = config.solvers.len();
    let nsnr = config.snr_points.len();
    // boundary[solver][snr][delta]
    let mut boundary = vec![vec![vec![None; config.delta_grid.len()]; nsnr]; ns];
    let mut points = Vec::new();
    for (di, &delta) in config.delta_grid.iter().enumerate() {
        for (si, &snr) in config.snr_points.iter().enumerate() {
            let mut misses = vec![0usize; ns];
            for &rho in &config.rho_grid {
                let alive: Vec<usize> = (0..ns).filter(|&i| misses[i] < REGION_STOP_AFTER).collect();
                if alive.is_empty() {
                    break;
                }
                let point = config.at_region_point(delta, rho);
                let specs: Vec<SolverSpec> = alive.iter().map(|&i| config.solvers[i].clone()).collect();
                let experiment = Experiment::with_solvers(&point, &specs)?;
                let rows = experiment.run_point(snr, config.trials, workers)?;
                for (&i, row) in alive.iter().zip(rows) {
                    if row.pmd <= config.target_pmd {
                        boundary[i][si][di] = Some(rho);
                        misses[i] = 0;
                    } else {
                        misses[i] += 1;
                    }
                    points.push(RegionPoint { delta, rho, groups: point.scenario.groups(), active: point.active, metrics: row });
                }
            }
        }
    }
    let mut rows = Vec::with_capacity(ns * nsnr * config.delta_grid.len());
    for (i, solver) in config.solvers.iter().enumerate() {
        for (si, &snr) in config.snr_points.iter().enumerate() {
            for (di, &delta) in config.delta_grid.iter().enumerate() {
                rows.push(RegionRow { solver: solver.name.clone(), snr_db: snr, delta, rho_g_max: boundary[i][si][di] });
            }
        }
    }
    Ok(RegionResult { rows, points })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationRow {
    pub solver: String,
    pub snr_db: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub pmd: f64,
    pub pfa: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult {
    /// Selected multipliers per (AMP solver, SNR).
    pub best: Vec<CalibrationRow>,
    /// Every evaluated grid point.
    pub grid: Vec<CalibrationRow>,
}

/// Grid search over `(alpha1, alpha2)` for every AMP solver in `config` at
/// every SNR point. Candidates with `pfa` above `pfa_cap` are discarded
/// (unless none remain); among the rest the lowest `pmd` wins, ties going to
/// lower `pfa`, then lower `alpha1`, then lower `alpha2`. The CL variant
/// ignores `alpha2` and CGL ignores `alpha1`, so those axes collapse to the
/// solver's configured value.
pub fn calibrate_thresholds(
    config: &ExperimentConfig,
    alpha1_grid: &[f64],
    alpha2_grid: &[f64],
    pfa_cap: Option<f64>,
    workers: &Workers,
) -> Result<CalibrationResult> {
    config.validate()?;
    if alpha1_grid.is_empty() || alpha2_grid.is_empty() {
        return Err(Error::param("calibration grids must be nonempty"));
    }
    // (solver name, candidate config) pairs
    let mut candidates: Vec<(String, SolverConfig)> = Vec::new();
    for spec in &config.solvers {
        let SolverKind::Amp(base) = spec.kind else { continue };
        let a1: &[f64] = if base.variant == Variant::Cgl { std::slice::from_ref(&base.alpha1) } else { alpha1_grid };
        let a2: &[f64] = if base.variant == Variant::Cl { std::slice::from_ref(&base.alpha2) } else { alpha2_grid };
        for &alpha1 in a1 {
            for &alpha2 in a2 {
                let cfg = SolverConfig { alpha1, alpha2, ..base };
                cfg.validate()?;
                candidates.push((spec.name.clone(), cfg));
            }
        }
    }
    if candidates.is_empty() {
        return Err(Error::param("calibration needs at least one AMP solver"));
    }
    let specs: Vec<SolverSpec> = candidates
        .iter()
        .enumerate()
        .map(|(i, (name, cfg))| SolverSpec { name: format!("{name}#{i}"), kind: SolverKind::Amp(*cfg) })
        .collect();
    let experiment = Experiment::with_solvers(config, &specs)?;

    let mut best = Vec::new();
    let mut grid = Vec::new();
    for &snr in &config.snr_points {
        let rows = experiment.run_point(snr, config.trials, workers)?;
        let evaluated: Vec<CalibrationRow> = candidates
            .iter()
            .zip(&rows)
            .map(|((name, cfg), row)| CalibrationRow {
                solver: name.clone(),
                snr_db: snr,
                alpha1: cfg.alpha1,
                alpha2: cfg.alpha2,
                pmd: row.pmd,
                pfa: row.pfa,
            })
            .collect();
        for spec in &config.solvers {
            let mine: Vec<&CalibrationRow> = evaluated.iter().filter(|r| r.solver == spec.name).collect();
            if let Some(pick) = select_calibration(&mine, pfa_cap) {
                best.push(pick.clone());
            }
        }
        grid.extend(evaluated);
    }
    Ok(CalibrationResult { best, grid })
}

fn select_calibration<'a>(rows: &[&'a CalibrationRow], pfa_cap: Option<f64>) -> Option<&'a CalibrationRow> {
    let within: Vec<&CalibrationRow> = match pfa_cap {
        Some(cap) => rows.iter().copied().filter(|r| r.pfa <= cap).collect(),
        None => rows.to_vec(),
    };
    let pool = if within.is_empty() { rows.to_vec() } else { within };
    pool.into_iter().min_by(|a, b| {
        a.pmd.total_cmp(&b.pmd).then(a.pfa.total_cmp(&b.pfa)).then(a.alpha1.total_cmp(&b.alpha1)).then(a.alpha2.total_cmp(&b.alpha2))
    })
}
