use std::path::{Path, PathBuf};
use std::time::Instant;

use prism_core::colorizer::{
    colorize as colorize_cloud, CalibrationParams, ColorizeOptions, RgbImage,
};
use prism_core::io::{atomic_write, read_cloud, write_csv, write_ply, PlyFormat, PlyWriteOptions};
use prism_core::metrics::{chroma_histogram, MetricsReport, ReportParams};
use prism_core::{sample_with, Execution, Method, PointCloud, SamplerConfig};

use crate::error::{code, CliError, CliResult};
use crate::manifest::{
    InputInfo, OutputInfo, RunManifest, SolverInfo, Timings, ENTROPY_CONVENTION,
};
use crate::{ColorizeArgs, HistogramArgs, MetricsArgs, SampleArgs, SamplerFlags};

pub fn load(path: &Path) -> CliResult<PointCloud> {
    read_cloud(path).map_err(|e| CliError::format(path, e))
}

fn is_csv(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Writes PLY, or CSV for a `.csv` path. Empty clouds are allowed.
pub fn store(cloud: &PointCloud, path: &Path, format: PlyFormat) -> CliResult {
    let written = if is_csv(path) {
        write_csv(cloud, path)
    } else {
        write_ply(
            cloud,
            path,
            PlyWriteOptions {
                format,
                allow_empty: true,
            },
        )
    };
    written.map_err(|e| CliError::format(path, e))
}

pub fn write_text(path: &Path, text: &str) -> CliResult {
    atomic_write(path, |w| {
        use std::io::Write;
        w.write_all(text.as_bytes())?;
        w.write_all(b"\n")
    })
    .map_err(|e| CliError::format(path, e))
}

pub fn require_color(cloud: &PointCloud, method: Method, path: &Path) -> CliResult {
    if method.uses_color() && cloud.is_colorless() {
        return Err(CliError::new(
            code::COLORLESS,
            format!(
                "{}: {} needs a colored cloud",
                path.display(),
                method.name()
            ),
        ));
    }
    Ok(())
}

pub fn apply_flags(config: SamplerConfig, flags: &SamplerFlags) -> SamplerConfig {
    let mut config = config
        .with_quant_bits(flags.bits)
        .with_chromaticity(flags.chromaticity.is_on());
    config.nss_buckets = flags.nss_buckets;
    config.knn = flags.knn;
    config
}

fn sample_config(args: &SampleArgs) -> CliResult<SamplerConfig> {
    let method: Method = args.method.into();
    if args.k.is_some() && method != Method::Prism {
        return Err(CliError::usage(format!(
            "--k applies only to --method prism, not {method}"
        )));
    }
    if args.voxel_size.is_some() && method != Method::Voxel {
        return Err(CliError::usage(format!(
            "--voxel-size applies only to --method voxel, not {method}"
        )));
    }
    if args.target_ratio.is_none() && args.k.is_none() && args.voxel_size.is_none() {
        return Err(CliError::usage("one of --target-ratio or --k is required"));
    }
    let mut config = apply_flags(
        SamplerConfig::new(method).with_seed(args.seed),
        &args.sampler,
    );
    if let Some(r) = args.target_ratio {
        config = config.with_target_ratio(r);
    }
    if let Some(k) = args.k {
        config = config.with_k(k);
    }
    if let Some(s) = args.voxel_size {
        config = config.with_voxel_size(s);
    }
    config
        .validate()
        .map_err(|e| CliError::usage(e.to_string()))?;
    Ok(config)
}

fn default_manifest_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

pub fn sample(args: &SampleArgs, exec: Execution) -> CliResult {
    let started = Instant::now();
    let config = sample_config(args)?;
    let cloud = load(&args.input)?;
    require_color(&cloud, config.method, &args.input)?;
    eprintln!("read {} points from {}", cloud.len(), args.input.display());

    let result =
        sample_with(&cloud, &config, exec).map_err(|e| CliError::sample(&args.input, e))?;
    let format: PlyFormat = args.format.into();
    store(&result.cloud, &args.output, format)?;

    let sampling_s = result.wall_time.as_secs_f64();
    let metrics = if args.metrics {
        let params = ReportParams::from_config(&config, result.k_used, result.voxel_size);
        let report = MetricsReport::evaluate(
            &cloud,
            &result.cloud,
            config.method.name(),
            params,
            sampling_s,
            exec,
        )
        .map_err(|e| CliError::metrics(&args.output, e))?;
        Some(report)
    } else {
        None
    };

    let manifest = RunManifest {
        tool: "prism".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        input: InputInfo {
            path: args.input.display().to_string(),
            points: cloud.len(),
        },
        config: config.clone(),
        k_star: result.k_used,
        solver: result.k_solution.as_ref().map(SolverInfo::from),
        bins_total: result.bins_total,
        voxel_size: result.voxel_size,
        achieved_ratio: result.achieved_ratio,
        output: OutputInfo {
            path: args.output.display().to_string(),
            points: result.cloud.len(),
            format: if is_csv(&args.output) {
                "csv".into()
            } else {
                format.header_name().into()
            },
        },
        metrics,
        entropy_convention: ENTROPY_CONVENTION.into(),
        timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        timings: Timings {
            sampling_s,
            end_to_end_s: started.elapsed().as_secs_f64(),
        },
    };
    let manifest_path = args
        .manifest
        .clone()
        .unwrap_or_else(|| default_manifest_path(&args.output));
    write_text(&manifest_path, &manifest.to_json())?;

    if result.k_solution.is_some_and(|s| s.above_target_at_min) {
        eprintln!("warning: the number of color bins alone exceeds the target size; using k = 1");
    }
    println!("points: {} -> {}", cloud.len(), result.cloud.len());
    println!("achieved_ratio: {}", result.achieved_ratio);
    match result.k_used {
        Some(k) => println!("k*: {k}"),
        None => println!("k*: n/a"),
    }
    Ok(())
}

pub fn metrics(args: &MetricsArgs, exec: Execution) -> CliResult {
    let reference = load(&args.reference)?;
    let candidate = load(&args.cmp)?;
    let report = MetricsReport::evaluate(
        &reference,
        &candidate,
        args.method.clone(),
        ReportParams::default(),
        0.0,
        exec,
    )
    .map_err(|e| {
        let path = if reference.is_empty() || reference.is_colorless() {
            &args.reference
        } else {
            &args.cmp
        };
        CliError::metrics(path, e)
    })?;
    write_text(&args.report, &report.to_json())?;
    println!("ratio_pct: {}", report.ratio_pct);
    println!("cd: {}", report.cd);
    println!("hd: {}", report.hd);
    println!("entropy_gain: {}", report.entropy_gain);
    Ok(())
}

pub fn histogram(args: &HistogramArgs) -> CliResult {
    let cloud = load(&args.input)?;
    let hist = chroma_histogram(&cloud, args.hue_bins, args.sat_bins)
        .map_err(|e| CliError::metrics(&args.input, e))?;
    write_text(&args.out, &hist.to_json())?;
    println!("points: {}", hist.total());
    println!(
        "nonzero_cells: {}",
        hist.counts.iter().filter(|&&c| c > 0).count()
    );
    println!("max_cell: {}", hist.max_count());
    Ok(())
}

pub fn colorize(args: &ColorizeArgs, exec: Execution) -> CliResult {
    let text = std::fs::read_to_string(&args.calib).map_err(|e| CliError::io(&args.calib, e))?;
    let calib =
        CalibrationParams::from_json(&text).map_err(|e| CliError::calibration(&args.calib, e))?;
    let decoded = image::open(&args.image)
        .map_err(|e| CliError::io(&args.image, e))?
        .to_rgb8();
    let (width, height) = decoded.dimensions();
    if calib.image_size() != (width, height) {
        let (cw, ch) = calib.image_size();
        return Err(CliError::new(
            code::CALIBRATION,
            format!(
                "{}: calibration is for a {cw}x{ch} image but {} is {width}x{height}",
                args.calib.display(),
                args.image.display()
            ),
        ));
    }
    let image = RgbImage::from_rgb8(width, height, decoded.into_raw())
        .expect("decoded buffer matches its dimensions");
    let cloud = load(&args.points)?;
    let options = ColorizeOptions {
        keep_uncolored: args.keep_uncolored,
        execution: exec,
    };
    let out = colorize_cloud(&cloud, &image, &calib, options);
    if out.kept == 0 {
        eprintln!("warning: no point projects into the image");
    }
    store(&out.cloud, &args.output, args.format.into())?;
    println!("kept: {}", out.kept);
    println!("dropped: {}", out.dropped);
    Ok(())
}
