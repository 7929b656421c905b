//! Per-point normals from local principal component analysis.

use nalgebra::{Matrix3, SymmetricEigen};

use super::SampleError;
use crate::exec::{self, Execution};
use crate::index::NnIndex;
use crate::model::PointCloud;

/// Relative size of the middle covariance eigenvalue below which a
/// neighborhood is treated as rank deficient.
const RANK_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct NormalEstimate {
    /// Input cloud with normals attached.
    pub cloud: PointCloud,
    /// Points whose neighborhood was collinear or coincident. Their normal
    /// is some unit vector orthogonal to the neighborhood, not a surface
    /// normal.
    pub degenerate: Vec<bool>,
}

impl NormalEstimate {
    pub fn degenerate_count(&self) -> usize {
        self.degenerate.iter().filter(|&&d| d).count()
    }
}

pub fn estimate_normals(cloud: &PointCloud, knn: usize) -> Result<NormalEstimate, SampleError> {
    estimate_normals_with(cloud, knn, Execution::default())
}

/// Normal of each point from the covariance of its `knn` nearest neighbors,
/// the point itself included. The normal is the eigenvector of the smallest
/// eigenvalue, with its largest-magnitude component made positive.
pub fn estimate_normals_with(
    cloud: &PointCloud,
    knn: usize,
    exec: Execution,
) -> Result<NormalEstimate, SampleError> {
    if knn < 3 || cloud.len() < knn {
        return Err(SampleError::InvalidKnn {
            knn,
            points: cloud.len(),
        });
    }
    let positions = cloud.positions();
    let index = NnIndex::new(&positions);
    let fitted = exec::map_slice(exec, &positions, |p| {
        let neighbors = index.k_nearest(p, knn);
        fit_normal(neighbors.iter().map(|&(i, _)| positions[i]))
    });
    let (normals, degenerate): (Vec<[f64; 3]>, Vec<bool>) = fitted.into_iter().unzip();
    let cloud = cloud.clone().with_normals(normals)?;
    Ok(NormalEstimate { cloud, degenerate })
}

fn fit_normal(points: impl Iterator<Item = [f64; 3]> + Clone) -> ([f64; 3], bool) {
    let mut mean = [0.0; 3];
    let mut n = 0.0;
    for p in points.clone() {
        for d in 0..3 {
            mean[d] += p[d];
        }
        n += 1.0;
    }
    let mean = mean.map(|v| v / n);
    let mut cov = Matrix3::<f64>::zeros();
    for p in points {
        let q = [p[0] - mean[0], p[1] - mean[1], p[2] - mean[2]];
        for r in 0..3 {
            for c in 0..3 {
                cov[(r, c)] += q[r] * q[c];
            }
        }
    }
    let eigen = SymmetricEigen::new(cov / n);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eigen.eigenvalues[a].total_cmp(&eigen.eigenvalues[b]));
    let largest = eigen.eigenvalues[order[2]];
    let middle = eigen.eigenvalues[order[1]];
    let degenerate = largest <= 0.0 || middle <= RANK_TOLERANCE * largest;

    let v = eigen.eigenvectors.column(order[0]);
    let norm = v.norm();
    let mut normal = if norm > 0.0 {
        [v[0] / norm, v[1] / norm, v[2] / norm]
    } else {
        [0.0, 0.0, 1.0]
    };
    let dominant = (0..3).fold(0, |best, d| {
        if normal[d].abs() > normal[best].abs() {
            d
        } else {
            best
        }
    });
    if normal[dominant] < 0.0 {
        normal = normal.map(|c| -c);
    }
    (normal, degenerate)
}
