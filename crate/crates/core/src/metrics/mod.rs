//! Geometric and color fidelity metrics for downsampled clouds.

mod color;
mod distance;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::index::NnIndex;
pub use color::{chroma_histogram, color_entropy, entropy_gain, hue_saturation, ChromaHistogram};
pub use distance::{
    chamfer, chamfer_hausdorff, chamfer_with, directed_max_distance, directed_mean_distance,
    hausdorff, hausdorff_with,
};

use crate::exec::Execution;
use crate::model::{PointCloud, SamplerConfig};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("cloud is empty")]
    EmptyCloud,
    #[error("cloud has no color information")]
    Colorless,
    #[error(
        "histogram needs at least one hue and one saturation bin (got {hue_bins} x {sat_bins})"
    )]
    InvalidBins { hue_bins: usize, sat_bins: usize },
}

/// Sampler parameters echoed into a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ReportParams {
    pub k: Option<u64>,
    pub bits: u8,
    pub chromaticity: bool,
    pub voxel_size: Option<f64>,
    pub seed: u64,
}

impl ReportParams {
    pub fn from_config(config: &SamplerConfig, k: Option<u64>, voxel_size: Option<f64>) -> Self {
        Self {
            k,
            bits: config.quant_bits,
            chromaticity: config.chromaticity,
            voxel_size,
            seed: config.seed,
        }
    }
}

/// Fidelity of a downsampled cloud relative to its reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub method: String,
    /// `100 * |candidate| / |reference|`.
    pub ratio_pct: f64,
    pub cd: f64,
    pub hd: f64,
    pub entropy_gain: f64,
    pub time_s: f64,
    pub params: ReportParams,
}

impl MetricsReport {
    /// Compares `candidate` against `reference`. Both must be non-empty and
    /// colored.
    pub fn evaluate(
        reference: &PointCloud,
        candidate: &PointCloud,
        method: impl Into<String>,
        params: ReportParams,
        time_s: f64,
        exec: Execution,
    ) -> Result<Self, MetricsError> {
        let (cd, hd) = chamfer_hausdorff(reference, candidate, exec)?;
        let entropy_gain = entropy_gain(reference, candidate)?;
        Ok(Self {
            method: method.into(),
            ratio_pct: 100.0 * candidate.len() as f64 / reference.len() as f64,
            cd,
            hd,
            entropy_gain,
            time_s,
            params,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
