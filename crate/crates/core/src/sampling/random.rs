//! Uniform random subsampling.

use std::time::Instant;

use rand::seq::index;

use super::{check_ratio, stratum_rng, target_count, SampleError, SampleResult, DOMAIN_RANDOM};
use crate::model::PointCloud;

/// Keeps `round(ratio * N)` points drawn uniformly without replacement, in
/// input order.
pub fn random_sample(
    cloud: &PointCloud,
    ratio: f64,
    seed: u64,
) -> Result<SampleResult, SampleError> {
    let start = Instant::now();
    check_ratio(ratio)?;
    if cloud.is_empty() {
        return Ok(SampleResult::empty(start));
    }
    let n = cloud.len();
    let m = target_count(ratio, n);
    let mut rng = stratum_rng(seed, DOMAIN_RANDOM, 0);
    let mut indices = index::sample(&mut rng, n, m).into_vec();
    indices.sort_unstable();
    Ok(SampleResult::subset(cloud, indices, start))
}
