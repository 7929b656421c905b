//! Normal-space sampling over an octahedral grid of directions.

use std::time::Instant;

use rand::seq::SliceRandom;

use super::{check_ratio, stratum_rng, target_count, SampleError, SampleResult, DOMAIN_NSS};
use crate::model::PointCloud;

/// Square grid over the octahedral map of the unit sphere.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NssGrid {
    side: usize,
}

impl NssGrid {
    /// Smallest square grid with at least `buckets` cells.
    pub fn new(buckets: usize) -> Result<Self, SampleError> {
        if buckets < 2 {
            return Err(SampleError::InvalidBuckets(buckets));
        }
        let mut side = (buckets as f64).sqrt().ceil() as usize;
        while side * side < buckets {
            side += 1;
        }
        while side > 1 && (side - 1) * (side - 1) >= buckets {
            side -= 1;
        }
        Ok(Self { side })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn cells(&self) -> usize {
        self.side * self.side
    }

    pub fn bucket(&self, normal: [f64; 3]) -> usize {
        octahedral_bucket(normal, self.side)
    }
}

/// Cell of `normal` in a `side` by `side` grid over the octahedral
/// parameterization, row-major. `normal` need not be unit length.
pub fn octahedral_bucket(normal: [f64; 3], side: usize) -> usize {
    let [x, y, z] = normal;
    let l1 = x.abs() + y.abs() + z.abs();
    let (mut u, mut v) = if l1 > 0.0 {
        (x / l1, y / l1)
    } else {
        (0.0, 0.0)
    };
    if z < 0.0 {
        let (pu, pv) = (u, v);
        u = (1.0 - pv.abs()) * sign(pu);
        v = (1.0 - pu.abs()) * sign(pv);
    }
    let cell = |t: f64| (((t + 1.0) * 0.5 * side as f64).floor() as usize).min(side - 1);
    cell(v) * side + cell(u)
}

fn sign(t: f64) -> f64 {
    if t < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Selects `round(target_ratio * N)` points by drawing one point from each
/// non-empty normal bucket in turn. Within a bucket, points are drawn in a
/// seeded random order. Output is in input order.
pub fn normal_space_sample(
    cloud: &PointCloud,
    target_ratio: f64,
    nss_buckets: usize,
    seed: u64,
) -> Result<SampleResult, SampleError> {
    let start = Instant::now();
    check_ratio(target_ratio)?;
    let grid = NssGrid::new(nss_buckets)?;
    let normals = cloud.normals().ok_or(SampleError::MissingNormals)?;
    if cloud.is_empty() {
        return Ok(SampleResult::empty(start));
    }

    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); grid.cells()];
    for (i, n) in normals.iter().enumerate() {
        buckets[grid.bucket(*n)].push(i);
    }
    let mut queues: Vec<Vec<usize>> = buckets
        .into_iter()
        .enumerate()
        .filter(|(_, members)| !members.is_empty())
        .map(|(b, mut members)| {
            members.shuffle(&mut stratum_rng(seed, DOMAIN_NSS, b as u64));
            members.reverse();
            members
        })
        .collect();

    let want = target_count(target_ratio, cloud.len());
    let mut indices = Vec::with_capacity(want);
    while indices.len() < want {
        for queue in queues.iter_mut() {
            if indices.len() == want {
                break;
            }
            if let Some(i) = queue.pop() {
                indices.push(i);
            }
        }
        queues.retain(|q| !q.is_empty());
    }
    indices.sort_unstable();
    Ok(SampleResult::subset(cloud, indices, start))
}
