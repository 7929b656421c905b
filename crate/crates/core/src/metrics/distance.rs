//! Chamfer and Hausdorff distances with exact nearest neighbors.

use super::MetricsError;
use crate::exec::{self, Execution};
use crate::index::NnIndex;
use crate::model::PointCloud;

fn nearest_distances(from: &[[f64; 3]], to: &NnIndex, exec: Execution) -> Vec<f64> {
    exec::map_slice(exec, from, |p| {
        to.nearest(p).map_or(f64::INFINITY, |(_, d)| d)
    })
}

type Positions = Vec<[f64; 3]>;

fn prepare(p: &PointCloud, q: &PointCloud) -> Result<(Positions, Positions), MetricsError> {
    if p.is_empty() || q.is_empty() {
        return Err(MetricsError::EmptyCloud);
    }
    Ok((p.positions(), q.positions()))
}

/// Mean distance from each point of `from` to its nearest point in `to`.
pub fn directed_mean_distance(
    from: &PointCloud,
    to: &PointCloud,
    exec: Execution,
) -> Result<f64, MetricsError> {
    let (a, b) = prepare(from, to)?;
    Ok(directed_mean(&a, &NnIndex::new(&b), exec))
}

/// Largest distance from a point of `from` to its nearest point in `to`.
pub fn directed_max_distance(
    from: &PointCloud,
    to: &PointCloud,
    exec: Execution,
) -> Result<f64, MetricsError> {
    let (a, b) = prepare(from, to)?;
    Ok(directed_max(&a, &NnIndex::new(&b), exec))
}

fn directed_mean(from: &[[f64; 3]], to: &NnIndex, exec: Execution) -> f64 {
    exec::chunked_sum(exec, &nearest_distances(from, to, exec)) / from.len() as f64
}

fn directed_max(from: &[[f64; 3]], to: &NnIndex, exec: Execution) -> f64 {
    exec::max(exec, &nearest_distances(from, to, exec)).unwrap_or(0.0)
}

pub fn chamfer(p: &PointCloud, q: &PointCloud) -> Result<f64, MetricsError> {
    chamfer_with(p, q, Execution::default())
}

/// Sum of the two directed mean nearest-neighbor distances.
pub fn chamfer_with(p: &PointCloud, q: &PointCloud, exec: Execution) -> Result<f64, MetricsError> {
    let (a, b) = prepare(p, q)?;
    let (ia, ib) = (NnIndex::new(&a), NnIndex::new(&b));
    Ok(directed_mean(&a, &ib, exec) + directed_mean(&b, &ia, exec))
}

pub fn hausdorff(p: &PointCloud, q: &PointCloud) -> Result<f64, MetricsError> {
    hausdorff_with(p, q, Execution::default())
}

/// Larger of the two directed maximum nearest-neighbor distances.
pub fn hausdorff_with(
    p: &PointCloud,
    q: &PointCloud,
    exec: Execution,
) -> Result<f64, MetricsError> {
    let (a, b) = prepare(p, q)?;
    let (ia, ib) = (NnIndex::new(&a), NnIndex::new(&b));
    Ok(directed_max(&a, &ib, exec).max(directed_max(&b, &ia, exec)))
}

/// Chamfer and Hausdorff distances from one pair of index builds.
pub fn chamfer_hausdorff(
    p: &PointCloud,
    q: &PointCloud,
    exec: Execution,
) -> Result<(f64, f64), MetricsError> {
    let (a, b) = prepare(p, q)?;
    let (ia, ib) = (NnIndex::new(&a), NnIndex::new(&b));
    let ab = nearest_distances(&a, &ib, exec);
    let ba = nearest_distances(&b, &ia, exec);
    let cd = exec::chunked_sum(exec, &ab) / a.len() as f64
        + exec::chunked_sum(exec, &ba) / b.len() as f64;
    let hd = exec::max(exec, &ab)
        .unwrap_or(0.0)
        .max(exec::max(exec, &ba).unwrap_or(0.0));
    Ok((cd, hd))
}
