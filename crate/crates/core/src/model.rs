//! Domain types shared by every module: points, clouds, color strata and the
//! sampler configuration.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("non-finite coordinate {0:?}")]
    NonFiniteCoordinate([f64; 3]),
    #[error("NaN color channel {0:?}")]
    NanColor([f64; 3]),
    #[error("normals length {normals} does not match point count {points}")]
    NormalsLength { normals: usize, points: usize },
    #[error("normal {index} has norm {norm}, expected 1")]
    NonUnitNormal { index: usize, norm: f64 },
    #[error("invalid sampler configuration: {0}")]
    InvalidConfig(String),
}

/// A 3D position in meters with a unit-range RGB color.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColoredPoint {
    position: [f64; 3],
    color: [f64; 3],
}

impl ColoredPoint {
    /// Builds a point. Colors outside `[0, 1]` are clamped; non-finite
    /// coordinates and NaN colors are rejected.
    pub fn new(position: [f64; 3], color: [f64; 3]) -> Result<Self, ModelError> {
        if position.iter().any(|c| !c.is_finite()) {
            return Err(ModelError::NonFiniteCoordinate(position));
        }
        if color.iter().any(|c| c.is_nan()) {
            return Err(ModelError::NanColor(color));
        }
        Ok(Self {
            position,
            color: color.map(|c| c.clamp(0.0, 1.0)),
        })
    }

    /// A point with color `(0, 0, 0)`.
    pub fn uncolored(position: [f64; 3]) -> Result<Self, ModelError> {
        Self::new(position, [0.0; 3])
    }

    /// Builds a point from 8-bit color channels, mapped by `v / 255`.
    pub fn from_rgb8(position: [f64; 3], rgb: [u8; 3]) -> Result<Self, ModelError> {
        Self::new(position, rgb.map(|v| f64::from(v) / 255.0))
    }

    #[inline]
    pub fn position(&self) -> [f64; 3] {
        self.position
    }

    #[inline]
    pub fn color(&self) -> [f64; 3] {
        self.color
    }

    /// Same position, new (clamped) color. NaN channels become 0.
    pub fn with_color(self, color: [f64; 3]) -> Self {
        Self {
            position: self.position,
            color: color.map(|c| if c.is_nan() { 0.0 } else { c.clamp(0.0, 1.0) }),
        }
    }

    /// Color as 8-bit channels, `round(c * 255)` with halves rounded away
    /// from zero.
    #[inline]
    pub fn color_bytes(&self) -> [u8; 3] {
        self.color.map(unit_to_byte)
    }
}

#[inline]
pub fn unit_to_byte(c: f64) -> u8 {
    (c * 255.0).round().clamp(0.0, 255.0) as u8
}

/// An ordered set of colored points with optional unit normals.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    points: Vec<ColoredPoint>,
    normals: Option<Vec<[f64; 3]>>,
    colorless: bool,
}

const NORMAL_TOLERANCE: f64 = 1e-6;

impl PointCloud {
    pub fn new(points: Vec<ColoredPoint>) -> Self {
        Self {
            points,
            normals: None,
            colorless: false,
        }
    }

    /// A cloud whose source carried no color. All colors are zero and color
    /// based samplers refuse it.
    pub fn new_colorless(points: Vec<ColoredPoint>) -> Self {
        Self {
            points,
            normals: None,
            colorless: true,
        }
    }

    /// Attaches per-point normals. Each must have unit norm within 1e-6.
    pub fn with_normals(mut self, normals: Vec<[f64; 3]>) -> Result<Self, ModelError> {
        if normals.len() != self.points.len() {
            return Err(ModelError::NormalsLength {
                normals: normals.len(),
                points: self.points.len(),
            });
        }
        for (index, n) in normals.iter().enumerate() {
            let norm = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
            if norm.is_nan() || (norm - 1.0).abs() > NORMAL_TOLERANCE {
                return Err(ModelError::NonUnitNormal { index, norm });
            }
        }
        self.normals = Some(normals);
        Ok(self)
    }

    pub fn without_normals(mut self) -> Self {
        self.normals = None;
        self
    }

    #[inline]
    pub fn points(&self) -> &[ColoredPoint] {
        &self.points
    }

    pub fn into_points(self) -> Vec<ColoredPoint> {
        self.points
    }

    pub fn normals(&self) -> Option<&[[f64; 3]]> {
        self.normals.as_deref()
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_colorless(&self) -> bool {
        self.colorless
    }

    pub fn positions(&self) -> Vec<[f64; 3]> {
        self.points.iter().map(|p| p.position).collect()
    }

    /// The sub-cloud at `indices`, in the given order. Normals and the
    /// colorless flag carry over.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            normals: self
                .normals
                .as_ref()
                .map(|n| indices.iter().map(|&i| n[i]).collect()),
            colorless: self.colorless,
        }
    }
}

impl FromIterator<ColoredPoint> for PointCloud {
    fn from_iter<I: IntoIterator<Item = ColoredPoint>>(iter: I) -> Self {
        PointCloud::new(iter.into_iter().collect())
    }
}

/// A quantized color stratum.
///
/// Channels hold the already-shifted values. The `achromatic` flag marks the
/// dedicated near-black stratum used by chromaticity binning; its channels are
/// always zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ColorBin {
    channels: [u8; 3],
    achromatic: bool,
}

const ACHROMATIC_BIT: u32 = 1 << 24;

impl ColorBin {
    pub const ACHROMATIC: ColorBin = ColorBin {
        channels: [0; 3],
        achromatic: true,
    };

    pub const fn rgb(r: u8, g: u8, b: u8) -> Self {
        Self {
            channels: [r, g, b],
            achromatic: false,
        }
    }

    pub fn channels(&self) -> [u8; 3] {
        self.channels
    }

    pub fn is_achromatic(&self) -> bool {
        self.achromatic
    }

    /// Dense 25-bit key: channels packed as `0xRRGGBB`, bit 24 for the
    /// achromatic stratum.
    #[inline]
    pub fn key(&self) -> u32 {
        if self.achromatic {
            ACHROMATIC_BIT
        } else {
            (u32::from(self.channels[0]) << 16)
                | (u32::from(self.channels[1]) << 8)
                | u32::from(self.channels[2])
        }
    }

    #[inline]
    pub fn from_key(key: u32) -> Self {
        if key & ACHROMATIC_BIT != 0 {
            Self::ACHROMATIC
        } else {
            Self::rgb((key >> 16) as u8, (key >> 8) as u8, key as u8)
        }
    }
}

/// Stratum-size histogram: every stored bin has a positive count and the
/// counts sum to [`BinCounts::total`].
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BinCounts {
    // sorted by bin key
    entries: Vec<(ColorBin, u64)>,
    total: u64,
}

impl BinCounts {
    pub fn from_bins<I: IntoIterator<Item = ColorBin>>(bins: I) -> Self {
        let mut keys: Vec<u32> = bins.into_iter().map(|b| b.key()).collect();
        keys.sort_unstable();
        Self::from_sorted_keys(&keys)
    }

    /// Counts runs of equal keys; `keys` must be sorted ascending.
    pub fn from_sorted_keys(keys: &[u32]) -> Self {
        debug_assert!(keys.windows(2).all(|w| w[0] <= w[1]));
        let mut entries = Vec::new();
        let mut start = 0;
        while start < keys.len() {
            let key = keys[start];
            let mut end = start + 1;
            while end < keys.len() && keys[end] == key {
                end += 1;
            }
            entries.push((ColorBin::from_key(key), (end - start) as u64));
            start = end;
        }
        Self {
            entries,
            total: keys.len() as u64,
        }
    }

    /// Builds counts from `(bin key, count)` pairs sorted by key. Zero counts
    /// are dropped.
    pub fn from_sorted_key_counts<I: IntoIterator<Item = (u32, u64)>>(pairs: I) -> Self {
        let entries: Vec<(ColorBin, u64)> = pairs
            .into_iter()
            .filter(|p| p.1 > 0)
            .map(|(k, n)| (ColorBin::from_key(k), n))
            .collect();
        debug_assert!(entries.windows(2).all(|w| w[0].0.key() < w[1].0.key()));
        let total = entries.iter().map(|e| e.1).sum();
        Self { entries, total }
    }

    /// Builds counts from explicit bin sizes, assigning each a distinct
    /// synthetic bin. Zero sizes are dropped.
    pub fn from_sizes(sizes: &[u64]) -> Self {
        let entries: Vec<(ColorBin, u64)> = sizes
            .iter()
            .filter(|&&n| n > 0)
            .enumerate()
            .map(|(i, &n)| (ColorBin::from_key(i as u32 & 0x00FF_FFFF), n))
            .collect();
        assert!(
            entries.len() <= 1 << 24,
            "at most 2^24 synthetic bins are addressable"
        );
        let total = entries.iter().map(|e| e.1).sum();
        Self { entries, total }
    }

    /// Number of points `N`.
    pub fn total(&self) -> u64 {
        self.total
    }

    /// Number of non-empty bins `|B|`.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, bin: ColorBin) -> u64 {
        self.entries
            .binary_search_by_key(&bin.key(), |e| e.0.key())
            .map(|i| self.entries[i].1)
            .unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ColorBin, u64)> + '_ {
        self.entries.iter().copied()
    }

    pub fn sizes(&self) -> impl Iterator<Item = u64> + '_ {
        self.entries.iter().map(|e| e.1)
    }

    pub fn max_count(&self) -> u64 {
        self.sizes().max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Prism,
    Random,
    Voxel,
    Nss,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Random, Method::Voxel, Method::Nss, Method::Prism];

    pub fn name(self) -> &'static str {
        match self {
            Method::Prism => "prism",
            Method::Random => "random",
            Method::Voxel => "voxel",
            Method::Nss => "nss",
        }
    }

    /// Methods that stratify on color and therefore need a colored cloud.
    pub fn uses_color(self) -> bool {
        matches!(self, Method::Prism)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "prism" => Ok(Method::Prism),
            "random" => Ok(Method::Random),
            "voxel" => Ok(Method::Voxel),
            "nss" => Ok(Method::Nss),
            other => Err(ModelError::InvalidConfig(format!(
                "unknown method {other:?}"
            ))),
        }
    }
}

/// Allowed values of [`SamplerConfig::quant_bits`]: low bits dropped per
/// 8-bit channel before binning.
pub const QUANT_BITS: [u8; 4] = [0, 1, 2, 4];

pub const DEFAULT_NSS_BUCKETS: usize = 64;
pub const DEFAULT_KNN: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub method: Method,
    pub target_ratio: f64,
    /// Fixed per-bin capacity for PRISM; overrides `target_ratio` when set.
    pub explicit_k: Option<u64>,
    pub quant_bits: u8,
    pub chromaticity: bool,
    /// Fixed voxel edge in meters. When unset the voxel sampler searches for
    /// the size whose ratio is closest to `target_ratio`.
    pub voxel_size: Option<f64>,
    pub nss_buckets: usize,
    pub knn: usize,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            method: Method::Prism,
            target_ratio: 0.01,
            explicit_k: None,
            quant_bits: 0,
            chromaticity: false,
            voxel_size: None,
            nss_buckets: DEFAULT_NSS_BUCKETS,
            knn: DEFAULT_KNN,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }

    pub fn with_target_ratio(mut self, ratio: f64) -> Self {
        self.target_ratio = ratio;
        self
    }

    pub fn with_k(mut self, k: u64) -> Self {
        self.explicit_k = Some(k);
        self
    }

    pub fn with_quant_bits(mut self, bits: u8) -> Self {
        self.quant_bits = bits;
        self
    }

    pub fn with_chromaticity(mut self, on: bool) -> Self {
        self.chromaticity = on;
        self
    }

    pub fn with_voxel_size(mut self, size: f64) -> Self {
        self.voxel_size = Some(size);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: String| Err(ModelError::InvalidConfig(msg));
        if !(self.target_ratio > 0.0 && self.target_ratio <= 1.0) {
            return bad(format!("target ratio {} outside (0, 1]", self.target_ratio));
        }
        if !QUANT_BITS.contains(&self.quant_bits) {
            return bad(format!(
                "quant_bits {} not one of {QUANT_BITS:?}",
                self.quant_bits
            ));
        }
        if self.explicit_k == Some(0) {
            return bad("k must be positive".into());
        }
        if let Some(s) = self.voxel_size {
            if !(s > 0.0 && s.is_finite()) {
                return bad(format!("voxel size {s} must be positive"));
            }
        }
        if self.nss_buckets < 2 {
            return bad(format!(
                "nss_buckets {} must be at least 2",
                self.nss_buckets
            ));
        }
        if self.knn == 0 {
            return bad("knn must be positive".into());
        }
        Ok(())
    }
}
