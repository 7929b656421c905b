use serde::{Deserialize, Serialize};

use prism_core::metrics::MetricsReport;
use prism_core::{KSolution, SamplerConfig};

/// Color entropy basis recorded with every report.
pub const ENTROPY_CONVENTION: &str = "shannon base-2 over exact 8-bit rgb bins";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputInfo {
    pub path: String,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputInfo {
    pub path: String,
    pub points: usize,
    pub format: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverInfo {
    pub predicted_size: u64,
    pub predicted_ratio: f64,
    pub segment: usize,
    pub above_target_at_min: bool,
}

impl From<&KSolution> for SolverInfo {
    fn from(s: &KSolution) -> Self {
        Self {
            predicted_size: s.predicted_size,
            predicted_ratio: s.predicted_ratio,
            segment: s.segment,
            above_target_at_min: s.above_target_at_min,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    /// Sampler wall time, file I/O excluded.
    pub sampling_s: f64,
    /// Read, sample and write.
    pub end_to_end_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub input: InputInfo,
    pub config: SamplerConfig,
    pub k_star: Option<u64>,
    pub solver: Option<SolverInfo>,
    pub bins_total: Option<usize>,
    pub voxel_size: Option<f64>,
    pub achieved_ratio: f64,
    pub output: OutputInfo,
    pub metrics: Option<MetricsReport>,
    pub entropy_convention: String,
    pub timestamp: String,
    pub timings: Timings,
}

impl RunManifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}
