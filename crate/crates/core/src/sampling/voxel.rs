//! Voxel grid downsampling.

use std::time::Instant;

use super::{check_ratio, SampleError, SampleResult};
use crate::index::squared_distance;
use crate::model::{ColoredPoint, PointCloud};

/// Bisection steps used by [`voxel_grid_sample_to_ratio`].
pub const VOXEL_SEARCH_ITERATIONS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VoxelMode {
    /// Mean position and mean color of each voxel.
    Centroid,
    /// The input point closest to each voxel's mean position.
    #[default]
    NearestToCentroid,
}

type VoxelKey = [i64; 3];

#[inline]
fn voxel_key(p: [f64; 3], size: f64) -> VoxelKey {
    p.map(|c| (c / size).floor() as i64)
}

/// Input indices grouped by voxel. Groups are ordered by key, indices within
/// a group ascending.
fn group(cloud: &PointCloud, size: f64) -> Vec<Vec<usize>> {
    let mut keyed: Vec<(VoxelKey, usize)> = cloud
        .points()
        .iter()
        .enumerate()
        .map(|(i, p)| (voxel_key(p.position(), size), i))
        .collect();
    keyed.sort_unstable();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut last = None;
    for (key, i) in keyed {
        if last != Some(key) {
            groups.push(Vec::new());
            last = Some(key);
        }
        groups.last_mut().unwrap().push(i);
    }
    groups
}

fn occupied_voxels(cloud: &PointCloud, size: f64) -> usize {
    let mut keys: Vec<VoxelKey> = cloud
        .points()
        .iter()
        .map(|p| voxel_key(p.position(), size))
        .collect();
    keys.sort_unstable();
    keys.dedup();
    keys.len()
}

fn check_size(size: f64) -> Result<(), SampleError> {
    if size > 0.0 && size.is_finite() {
        Ok(())
    } else {
        Err(SampleError::InvalidVoxelSize(size))
    }
}

/// One representative per occupied voxel of edge `voxel_size`.
///
/// In [`VoxelMode::NearestToCentroid`] the output is a subset of the input in
/// input order (ties broken toward the lower index). In
/// [`VoxelMode::Centroid`] voxels are emitted in order of their first input
/// point.
pub fn voxel_grid_sample(
    cloud: &PointCloud,
    voxel_size: f64,
    mode: VoxelMode,
) -> Result<SampleResult, SampleError> {
    let start = Instant::now();
    check_size(voxel_size)?;
    if cloud.is_empty() {
        return Ok(SampleResult::empty(start));
    }
    let points = cloud.points();
    let groups = group(cloud, voxel_size);
    let mean = |members: &[usize]| {
        let mut pos = [0.0; 3];
        let mut col = [0.0; 3];
        for &i in members {
            let p = &points[i];
            for d in 0..3 {
                pos[d] += p.position()[d];
                col[d] += p.color()[d];
            }
        }
        let n = members.len() as f64;
        (pos.map(|v| v / n), col.map(|v| v / n))
    };

    let mut result = match mode {
        VoxelMode::NearestToCentroid => {
            let mut indices: Vec<usize> = groups
                .iter()
                .map(|members| {
                    let (centroid, _) = mean(members);
                    let mut best = (members[0], f64::INFINITY);
                    for &i in members {
                        let d = squared_distance(&points[i].position(), &centroid);
                        if d < best.1 {
                            best = (i, d);
                        }
                    }
                    best.0
                })
                .collect();
            indices.sort_unstable();
            SampleResult::subset(cloud, indices, start)
        }
        VoxelMode::Centroid => {
            let mut ordered: Vec<&Vec<usize>> = groups.iter().collect();
            ordered.sort_unstable_by_key(|g| g[0]);
            let centroids: Vec<ColoredPoint> = ordered
                .into_iter()
                .map(|members| {
                    let (pos, col) = mean(members);
                    ColoredPoint::new(pos, col).expect("mean of finite points is finite")
                })
                .collect();
            let out = if cloud.is_colorless() {
                PointCloud::new_colorless(centroids)
            } else {
                PointCloud::new(centroids)
            };
            SampleResult::new(out, cloud.len(), start)
        }
    };
    result.voxel_size = Some(voxel_size);
    result.wall_time = start.elapsed();
    Ok(result)
}

/// Voxel sampling with the edge length chosen to bring the ratio close to
/// `target_ratio`.
///
/// Runs [`VOXEL_SEARCH_ITERATIONS`] steps of bisection on the logarithm of
/// the voxel size between `1e-6` and `2` times the largest bounding-box
/// extent, and keeps the size whose ratio was closest to the target.
pub fn voxel_grid_sample_to_ratio(
    cloud: &PointCloud,
    target_ratio: f64,
    mode: VoxelMode,
) -> Result<SampleResult, SampleError> {
    let start = Instant::now();
    check_ratio(target_ratio)?;
    if cloud.is_empty() {
        return Ok(SampleResult::empty(start));
    }
    let mut lo_corner = [f64::INFINITY; 3];
    let mut hi_corner = [f64::NEG_INFINITY; 3];
    for p in cloud.points() {
        let q = p.position();
        for d in 0..3 {
            lo_corner[d] = lo_corner[d].min(q[d]);
            hi_corner[d] = hi_corner[d].max(q[d]);
        }
    }
    let extent = (0..3)
        .map(|d| hi_corner[d] - lo_corner[d])
        .fold(0.0, f64::max);
    let best_size = if extent == 0.0 {
        1.0
    } else {
        let n = cloud.len() as f64;
        let (mut lo, mut hi) = ((extent * 1e-6).ln(), (extent * 2.0).ln());
        let mut best = (hi.exp(), f64::INFINITY);
        for _ in 0..VOXEL_SEARCH_ITERATIONS {
            let mid = 0.5 * (lo + hi);
            let size = mid.exp();
            let ratio = occupied_voxels(cloud, size) as f64 / n;
            let err = (ratio - target_ratio).abs();
            if err < best.1 {
                best = (size, err);
            }
            if ratio > target_ratio {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        best.0
    };
    let mut result = voxel_grid_sample(cloud, best_size, mode)?;
    result.wall_time = start.elapsed();
    Ok(result)
}
