//! Color-stratified sampling with a per-bin capacity.

use std::time::Instant;

use rand::seq::index;

use super::quantize::Quantizer;
use super::{stratum_rng, SampleError, SampleResult, DOMAIN_PRISM};
use crate::exec::{self, Execution};
use crate::ksolver::solve_k;
use crate::model::{BinCounts, PointCloud, SamplerConfig};

/// Per-point stratum key in the high half, input index in the low half.
/// Sorting groups strata and keeps each stratum in input order.
fn sorted_keys(cloud: &PointCloud, quantizer: Quantizer, exec: Execution) -> Vec<u64> {
    let points = cloud.points();
    let mut keys = exec::map_range(exec, points.len(), |i| {
        (u64::from(quantizer.bin(&points[i]).key()) << 32) | i as u64
    });
    exec::sort_unstable(exec, &mut keys);
    keys
}

/// `[start, end)` ranges of equal stratum keys.
fn runs(keys: &[u64]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    while start < keys.len() {
        let bin = keys[start] >> 32;
        let mut end = start + 1;
        while end < keys.len() && keys[end] >> 32 == bin {
            end += 1;
        }
        out.push((start, end));
        start = end;
    }
    out
}

/// Stratum sizes of `cloud` under the given binning.
pub fn bin_counts(cloud: &PointCloud, quantizer: Quantizer) -> BinCounts {
    let bins: Vec<u32> = {
        let mut b: Vec<u32> = cloud
            .points()
            .iter()
            .map(|p| quantizer.bin(p).key())
            .collect();
        b.sort_unstable();
        b
    };
    BinCounts::from_sorted_keys(&bins)
}

pub fn prism_sample(
    cloud: &PointCloud,
    config: &SamplerConfig,
) -> Result<SampleResult, SampleError> {
    prism_sample_with(cloud, config, Execution::default())
}

/// Caps every color stratum at `k` points.
///
/// `k` is `config.explicit_k` when set, otherwise the solver's choice for
/// `config.target_ratio`. Strata larger than `k` keep `k` points drawn
/// uniformly without replacement; smaller strata are kept whole. The output
/// is in input order.
pub fn prism_sample_with(
    cloud: &PointCloud,
    config: &SamplerConfig,
    exec: Execution,
) -> Result<SampleResult, SampleError> {
    let start = Instant::now();
    config.validate()?;
    if cloud.is_colorless() {
        return Err(SampleError::Colorless);
    }
    if cloud.is_empty() {
        return Ok(SampleResult::empty(start));
    }

    let quantizer = Quantizer::new(config.quant_bits, config.chromaticity);
    let keys = sorted_keys(cloud, quantizer, exec);
    let runs = runs(&keys);
    let counts = BinCounts::from_sorted_key_counts(
        runs.iter()
            .map(|&(s, e)| ((keys[s] >> 32) as u32, (e - s) as u64)),
    );

    let (k, solution) = match config.explicit_k {
        Some(k) => (k, None),
        None => {
            let s = solve_k(&counts, config.target_ratio)?;
            (s.k_star, Some(s))
        }
    };

    enum Kept {
        All,
        Some(Vec<usize>),
    }
    let cap = usize::try_from(k).unwrap_or(usize::MAX);
    let selections = exec::map_slice(exec, &runs, |&(s, e)| {
        let n = e - s;
        if n <= cap {
            return Kept::All;
        }
        let bin = keys[s] >> 32;
        let mut rng = stratum_rng(config.seed, DOMAIN_PRISM, bin);
        let picked = index::sample(&mut rng, n, cap)
            .into_iter()
            .map(|offset| (keys[s + offset] & 0xFFFF_FFFF) as usize)
            .collect();
        Kept::Some(picked)
    });

    let mut indices = Vec::new();
    for (&(s, e), kept) in runs.iter().zip(selections) {
        match kept {
            Kept::All => indices.extend(keys[s..e].iter().map(|k| (k & 0xFFFF_FFFF) as usize)),
            Kept::Some(v) => indices.extend(v),
        }
    }
    exec::sort_unstable(exec, &mut indices);

    let mut result = SampleResult::subset(cloud, indices, start);
    result.k_used = Some(k);
    result.k_solution = solution;
    result.bins_total = Some(counts.len());
    result.wall_time = start.elapsed();
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ksolver::output_size;
    use crate::model::{ColoredPoint, Method};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn palette_cloud(seed: u64, n: usize, colors: usize) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                // skewed: low palette indices are far more common
                let c = (rng.random::<f64>().powi(3) * colors as f64) as usize;
                let rgb = [(c % 256) as u8, (c / 256) as u8, 7];
                ColoredPoint::from_rgb8([rng.random(), rng.random(), rng.random()], rgb).unwrap()
            })
            .collect()
    }

    fn config() -> SamplerConfig {
        SamplerConfig::new(Method::Prism)
    }

    #[test]
    fn single_stratum_capped() {
        let cloud: PointCloud = (0..1000)
            .map(|i| ColoredPoint::new([i as f64, 0.0, 0.0], [0.3, 0.6, 0.9]).unwrap())
            .collect();
        let r = prism_sample(&cloud, &config().with_k(1)).unwrap();
        assert_eq!(r.cloud.len(), 1);
        assert_eq!(r.bins_total, Some(1));
    }

    #[test]
    fn m_colors_times_k() {
        let cloud: PointCloud = (0..600)
            .map(|i| {
                ColoredPoint::from_rgb8([i as f64, 0.0, 0.0], [(i % 12) as u8 * 20, 0, 0]).unwrap()
            })
            .collect();
        let r = prism_sample(&cloud, &config().with_k(5)).unwrap();
        assert_eq!(r.cloud.len(), 60);
    }

    #[test]
    fn recount_matches_capped_counts() {
        let cloud = palette_cloud(3, 20_000, 400);
        let q = Quantizer::EXACT;
        let input = bin_counts(&cloud, q);
        for k in [1, 3, 17, 1000] {
            let r = prism_sample(&cloud, &config().with_k(k)).unwrap();
            let output = bin_counts(&r.cloud, q);
            for (bin, n) in input.iter() {
                assert_eq!(output.get(bin), n.min(k));
            }
            assert_eq!(r.cloud.len() as u64, output_size(&input, k));
        }
    }

    #[test]
    fn solver_drives_k_from_ratio() {
        let cloud = palette_cloud(4, 10_000, 300);
        let r = prism_sample(&cloud, &config().with_target_ratio(0.05)).unwrap();
        let sol = r.k_solution.unwrap();
        assert_eq!(Some(sol.k_star), r.k_used);
        assert_eq!(sol.predicted_size, r.cloud.len() as u64);
        assert_eq!(r.achieved_ratio, r.cloud.len() as f64 / cloud.len() as f64);
    }

    #[test]
    fn deterministic_and_order_preserving() {
        let cloud = palette_cloud(5, 5_000, 50);
        let cfg = config().with_k(4).with_seed(9);
        let a = prism_sample_with(&cloud, &cfg, Execution::Sequential).unwrap();
        let b = prism_sample_with(&cloud, &cfg, Execution::Parallel).unwrap();
        assert_eq!(a.source_indices, b.source_indices);
        let idx = a.source_indices.unwrap();
        assert!(idx.windows(2).all(|w| w[0] < w[1]));
        let c = prism_sample(&cloud, &cfg.clone().with_seed(10)).unwrap();
        assert_ne!(Some(idx), c.source_indices);
    }

    #[test]
    fn rejects_colorless_and_passes_empty() {
        let colorless = PointCloud::new_colorless(vec![ColoredPoint::uncolored([0.0; 3]).unwrap()]);
        assert_eq!(
            prism_sample(&colorless, &config()),
            Err(SampleError::Colorless)
        );
        let r = prism_sample(&PointCloud::default(), &config()).unwrap();
        assert!(r.cloud.is_empty());
        assert_eq!(r.achieved_ratio, 0.0);
    }
}
