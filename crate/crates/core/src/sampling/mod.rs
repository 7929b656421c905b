//! Downsampling methods: color-stratified PRISM and the random, voxel grid and
//! normal-space baselines.
//!
//! Every sampler is a pure function of its input cloud, its parameters and a
//! 64-bit seed. Randomness inside a stratum (color bin, normal bucket) comes
//! from a generator seeded by mixing the global seed with the stratum id, so
//! results do not depend on iteration order or thread schedule.

mod normals;
mod nss;
mod prism;
mod quantize;
mod random;
mod voxel;

use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use normals::{estimate_normals, estimate_normals_with, NormalEstimate};
pub use nss::{normal_space_sample, octahedral_bucket, NssGrid};
pub use prism::{bin_counts, prism_sample, prism_sample_with};
pub use quantize::{quantize_color, Quantizer, ACHROMATIC_SUM};
pub use random::random_sample;
pub use voxel::{
    voxel_grid_sample, voxel_grid_sample_to_ratio, VoxelMode, VOXEL_SEARCH_ITERATIONS,
};

use crate::exec::Execution;
use crate::ksolver::{KSolution, SolveError};
use crate::model::{Method, ModelError, PointCloud, SamplerConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SampleError {
    #[error("cloud has no color information")]
    Colorless,
    #[error("cloud has no normals")]
    MissingNormals,
    #[error("ratio {0} outside (0, 1]")]
    InvalidRatio(f64),
    #[error("voxel size {0} must be positive and finite")]
    InvalidVoxelSize(f64),
    #[error(
        "normal estimation needs knn >= 3 and at least knn points (knn = {knn}, points = {points})"
    )]
    InvalidKnn { knn: usize, points: usize },
    #[error("nss bucket count {0} must be at least 2")]
    InvalidBuckets(usize),
    #[error(transparent)]
    Config(#[from] ModelError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// Output of one sampler run.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleResult {
    pub cloud: PointCloud,
    /// Input index of every output point, ascending. `None` when output
    /// points are synthesized (voxel centroids).
    pub source_indices: Option<Vec<usize>>,
    /// `|output| / |input|`, 0 for an empty input.
    pub achieved_ratio: f64,
    /// Capacity used by PRISM.
    pub k_used: Option<u64>,
    /// Solver output when PRISM derived `k` from a target ratio.
    pub k_solution: Option<KSolution>,
    /// Number of non-empty color bins (PRISM).
    pub bins_total: Option<usize>,
    /// Voxel edge used by the voxel sampler.
    pub voxel_size: Option<f64>,
    pub wall_time: Duration,
}

impl SampleResult {
    pub(crate) fn new(cloud: PointCloud, input_len: usize, start: Instant) -> Self {
        let achieved_ratio = if input_len == 0 {
            0.0
        } else {
            cloud.len() as f64 / input_len as f64
        };
        Self {
            cloud,
            source_indices: None,
            achieved_ratio,
            k_used: None,
            k_solution: None,
            bins_total: None,
            voxel_size: None,
            wall_time: start.elapsed(),
        }
    }

    pub(crate) fn subset(input: &PointCloud, indices: Vec<usize>, start: Instant) -> Self {
        let mut result = Self::new(input.select(&indices), input.len(), start);
        result.source_indices = Some(indices);
        result
    }

    pub(crate) fn empty(start: Instant) -> Self {
        Self::new(PointCloud::default(), 0, start)
    }
}

pub(crate) fn check_ratio(ratio: f64) -> Result<(), SampleError> {
    if ratio > 0.0 && ratio <= 1.0 {
        Ok(())
    } else {
        Err(SampleError::InvalidRatio(ratio))
    }
}

/// `round(ratio * n)`, halves away from zero.
pub(crate) fn target_count(ratio: f64, n: usize) -> usize {
    ((ratio * n as f64).round() as usize).min(n)
}

#[inline]
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Generator for one stratum of one sampler, derived from the global seed.
pub(crate) fn stratum_rng(seed: u64, domain: u64, stratum: u64) -> ChaCha8Rng {
    let s = splitmix64(seed ^ splitmix64(domain ^ splitmix64(stratum)));
    ChaCha8Rng::seed_from_u64(s)
}

pub(crate) const DOMAIN_PRISM: u64 = 0x5052_4953_4d00_0000;
pub(crate) const DOMAIN_RANDOM: u64 = 0x5241_4e44_0000_0000;
pub(crate) const DOMAIN_NSS: u64 = 0x4e53_5300_0000_0000;

/// Runs the method selected by `config`.
///
/// Voxel sampling uses `config.voxel_size` when set and otherwise searches
/// for the size closest to `config.target_ratio`. NSS estimates normals
/// with `config.knn` neighbors when the cloud has none; that time is included
/// in the result.
pub fn sample(cloud: &PointCloud, config: &SamplerConfig) -> Result<SampleResult, SampleError> {
    sample_with(cloud, config, Execution::default())
}

pub fn sample_with(
    cloud: &PointCloud,
    config: &SamplerConfig,
    exec: Execution,
) -> Result<SampleResult, SampleError> {
    config.validate()?;
    match config.method {
        Method::Prism => prism_sample_with(cloud, config, exec),
        Method::Random => random_sample(cloud, config.target_ratio, config.seed),
        Method::Voxel => match config.voxel_size {
            Some(size) => voxel_grid_sample(cloud, size, VoxelMode::default()),
            None => voxel_grid_sample_to_ratio(cloud, config.target_ratio, VoxelMode::default()),
        },
        Method::Nss => {
            let start = Instant::now();
            if cloud.is_empty() {
                return Ok(SampleResult::empty(start));
            }
            let mut result = if cloud.normals().is_some() {
                normal_space_sample(cloud, config.target_ratio, config.nss_buckets, config.seed)?
            } else {
                let estimate = estimate_normals_with(cloud, config.knn, exec)?;
                normal_space_sample(
                    &estimate.cloud,
                    config.target_ratio,
                    config.nss_buckets,
                    config.seed,
                )?
            };
            result.wall_time = start.elapsed();
            Ok(result)
        }
    }
}
