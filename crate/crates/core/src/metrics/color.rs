//! Color entropy and the hue/saturation histogram.

use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::model::PointCloud;
use crate::sampling::{bin_counts, Quantizer};

fn check_colored(cloud: &PointCloud) -> Result<(), MetricsError> {
    if cloud.is_empty() {
        Err(MetricsError::EmptyCloud)
    } else if cloud.is_colorless() {
        Err(MetricsError::Colorless)
    } else {
        Ok(())
    }
}

/// Shannon entropy in bits of the exact 8-bit color bins of `cloud`.
pub fn color_entropy(cloud: &PointCloud) -> Result<f64, MetricsError> {
    check_colored(cloud)?;
    let counts = bin_counts(cloud, Quantizer::EXACT);
    let total = counts.total() as f64;
    Ok(counts
        .sizes()
        .map(|n| {
            let p = n as f64 / total;
            -p * p.log2()
        })
        .sum::<f64>()
        .max(0.0))
}

/// `color_entropy(output) - color_entropy(input)`.
pub fn entropy_gain(input: &PointCloud, output: &PointCloud) -> Result<f64, MetricsError> {
    Ok(color_entropy(output)? - color_entropy(input)?)
}

/// Hexcone hue in degrees `[0, 360)` and saturation in `[0, 1]`. Gray has
/// hue 0 and saturation 0.
pub fn hue_saturation(rgb: [f64; 3]) -> (f64, f64) {
    let [r, g, b] = rgb;
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    if delta <= 0.0 || max <= 0.0 {
        return (0.0, 0.0);
    }
    let sector = if max == r {
        ((g - b) / delta).rem_euclid(6.0)
    } else if max == g {
        (b - r) / delta + 2.0
    } else {
        (r - g) / delta + 4.0
    };
    ((sector * 60.0).rem_euclid(360.0), delta / max)
}

/// Point counts on a hue by saturation grid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChromaHistogram {
    pub hue_bins: usize,
    pub sat_bins: usize,
    /// Row-major, `counts[h * sat_bins + s]`.
    pub counts: Vec<u64>,
    /// Rendering hint only; not part of the JSON form.
    #[serde(skip, default = "default_log_scale")]
    pub log_scale: bool,
}

fn default_log_scale() -> bool {
    true
}

impl ChromaHistogram {
    pub fn get(&self, hue_bin: usize, sat_bin: usize) -> u64 {
        self.counts[hue_bin * self.sat_bins + sat_bin]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn max_count(&self) -> u64 {
        self.counts.iter().copied().max().unwrap_or(0)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("histogram serializes")
    }
}

pub fn chroma_histogram(
    cloud: &PointCloud,
    hue_bins: usize,
    sat_bins: usize,
) -> Result<ChromaHistogram, MetricsError> {
    if hue_bins == 0 || sat_bins == 0 {
        return Err(MetricsError::InvalidBins { hue_bins, sat_bins });
    }
    check_colored(cloud)?;
    let mut counts = vec![0u64; hue_bins * sat_bins];
    for p in cloud.points() {
        let (h, s) = hue_saturation(p.color());
        let hb = ((h / 360.0 * hue_bins as f64).floor() as usize).min(hue_bins - 1);
        let sb = ((s * sat_bins as f64).floor() as usize).min(sat_bins - 1);
        counts[hb * sat_bins + sb] += 1;
    }
    Ok(ChromaHistogram {
        hue_bins,
        sat_bins,
        counts,
        log_scale: true,
    })
}
