//! Complex sparse-group LASSO approximate message passing (CSGL-AMP).
//!
//! The crate is organised bottom-up:
//!
//! * [`types`], [`matrix`], [`problem`], [`rng`]: grouped complex vectors,
//!   sensing operators, problem instances and the deterministic random
//!   stream contract.
//! * [`otfs`]: Zadoff-Chu preambles, the delay-Doppler shift grid, the
//!   structured sensing matrix and synthetic random-access observations.
//! * [`denoise`]: complex soft thresholding, the two-stage CSGL denoiser and
//!   its Onsager divergence (closed form and numerical Wirtinger oracle).
//! * [`solvers`]: the AMP iteration and its CL/CGL special cases, a FISTA
//!   reference solver and the one-step thresholding baseline.
//! * [`harness`]: Monte Carlo SNR sweeps, validity-region sweeps and
//!   threshold calibration.

pub mod denoise;
pub mod error;
pub mod gaussian;
pub mod harness;
pub mod matrix;
pub mod oracle;
pub mod otfs;
pub mod problem;
pub mod rng;
pub mod solvers;
pub mod types;

pub use num_complex::Complex64;

pub use denoise::{csgl_denoise, soft_threshold_complex, DenoiseOutput, OnsagerForm, Thresholds};
pub use error::{Error, Result};
pub use matrix::SensingMatrix;
pub use problem::{GroundTruth, ProblemInstance, Tap};
pub use solvers::{DetectionResult, SolverConfig, Variant};
pub use types::{GroupPartition, GroupedComplexVector};
