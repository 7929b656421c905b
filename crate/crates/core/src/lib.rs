//! Color-stratified point cloud downsampling.
//!
//! [`sampling`] holds the PRISM sampler and the random, voxel grid and
//! normal-space baselines, [`metrics`] the Chamfer, Hausdorff and color
//! entropy measures, [`colorizer`] the camera projection used to attach image
//! colors to points, and [`io`] PLY and CSV support.

pub mod colorizer;
pub mod exec;
pub mod index;
pub mod io;
pub mod ksolver;
pub mod metrics;
pub mod model;
pub mod sampling;

pub use exec::Execution;
pub use ksolver::{brute_force_k, output_size, solve_k, KSolution};
pub use model::{BinCounts, ColorBin, ColoredPoint, Method, ModelError, PointCloud, SamplerConfig};
pub use sampling::{sample, sample_with, SampleError, SampleResult};
