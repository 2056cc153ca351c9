//! JSON sidecar describing how an output file was produced.

use serde::Serialize;
use sha2::{Digest, Sha256};

use csgl_amp::harness::ExperimentConfig;

use crate::config::serialize_config;

pub const SNR_DEFINITION: &str =
    "SNR(dB) = 10 log10(||X beta||^2 / (n sigma_n^2)): average received signal power per sample over the complex noise variance";
pub const DETECTION_RULE: &str = "AMP variants: a group is detected iff its final denoised block is nonzero. ost: group energy of X^H y above the (1 - pfa) pure-noise quantile. ost-topk: the K largest group energies.";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    /// SHA-256 of the canonical config text.
    pub config_digest: String,
    pub code_version: String,
    pub seed: u64,
    pub timestamp: String,
    pub snr_definition: String,
    pub detection_rule: String,
    pub command: String,
    pub output: String,
    pub worker_threads: usize,
    pub config: String,
    /// Solver aborts per output row, in row order; omitted when all zero.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub failed_trials: Vec<FailedTrials>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FailedTrials {
    pub solver: String,
    pub snr_db: f64,
    pub failed: usize,
}

pub fn config_digest(config: &ExperimentConfig) -> String {
    Sha256::digest(serialize_config(config).as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

impl RunManifest {
    pub fn new(command: &str, output: &str, config: &ExperimentConfig, worker_threads: usize) -> Self {
        Self {
            config_digest: config_digest(config),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: config.seed,
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            snr_definition: SNR_DEFINITION.to_string(),
            detection_rule: DETECTION_RULE.to_string(),
            command: command.to_string(),
            output: output.to_string(),
            worker_threads,
            config: serialize_config(config),
            failed_trials: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serialises") + "\n"
    }
}
