use std::path::Path;

use serde::Serialize;

use prism_core::io::atomic_write;
use prism_core::metrics::{MetricsReport, ReportParams};
use prism_core::{sample_with, Execution, Method, PointCloud, SampleResult, SamplerConfig};

use crate::commands::{apply_flags, load, require_color};
use crate::error::{code, CliError, CliResult};
use crate::{AblateArgs, BenchArgs};

#[derive(Debug, Clone, Serialize)]
struct BenchRow {
    method: String,
    seed: String,
    ratio_pct: f64,
    cd: f64,
    hd: f64,
    entropy_gain: f64,
    time_s: f64,
}

#[derive(Debug, Clone, Serialize)]
struct AblationRow {
    quant_bits: u8,
    chromaticity: &'static str,
    ratio_pct: f64,
    cd: f64,
    hd: f64,
    entropy_gain: f64,
    time_s: f64,
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> CliResult {
    atomic_write(path, |w| {
        let mut writer = csv::Writer::from_writer(w);
        for row in rows {
            writer.serialize(row)?;
        }
        writer.flush()
    })
    .map_err(|e| CliError::format(path, e))
}

fn run(
    cloud: &PointCloud,
    config: &SamplerConfig,
    input: &Path,
    exec: Execution,
) -> CliResult<(SampleResult, MetricsReport)> {
    let result = sample_with(cloud, config, exec).map_err(|e| CliError::sample(input, e))?;
    let params = ReportParams::from_config(config, result.k_used, result.voxel_size);
    let report = MetricsReport::evaluate(
        cloud,
        &result.cloud,
        config.method.name(),
        params,
        result.wall_time.as_secs_f64(),
        exec,
    )
    .map_err(|e| CliError::metrics(input, e))?;
    Ok((result, report))
}

fn check_input(cloud: &PointCloud, path: &Path) -> CliResult {
    if cloud.is_empty() {
        return Err(CliError::new(
            code::EMPTY,
            format!("{}: cloud is empty", path.display()),
        ));
    }
    require_color(cloud, Method::Prism, path)
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

pub fn bench(args: &BenchArgs, exec: Execution) -> CliResult {
    let cloud = load(&args.input)?;
    check_input(&cloud, &args.input)?;
    std::fs::create_dir_all(&args.out_dir).map_err(|e| CliError::io(&args.out_dir, e))?;
    eprintln!(
        "benchmarking {} points from {}",
        cloud.len(),
        args.input.display()
    );

    let mut rows = Vec::new();
    let mut means = Vec::new();
    for method in Method::ALL {
        let mut per_seed = Vec::new();
        for seed in 0..args.seeds {
            let config = apply_flags(
                SamplerConfig::new(method)
                    .with_target_ratio(args.target_ratio)
                    .with_seed(seed),
                &args.sampler,
            );
            let (_, report) = run(&cloud, &config, &args.input, exec)?;
            per_seed.push(BenchRow {
                method: method.name().into(),
                seed: seed.to_string(),
                ratio_pct: report.ratio_pct,
                cd: report.cd,
                hd: report.hd,
                entropy_gain: report.entropy_gain,
                time_s: report.time_s,
            });
        }
        means.push(BenchRow {
            method: method.name().into(),
            seed: "mean".into(),
            ratio_pct: mean(per_seed.iter().map(|r| r.ratio_pct)),
            cd: mean(per_seed.iter().map(|r| r.cd)),
            hd: mean(per_seed.iter().map(|r| r.hd)),
            entropy_gain: mean(per_seed.iter().map(|r| r.entropy_gain)),
            time_s: mean(per_seed.iter().map(|r| r.time_s)),
        });
        rows.extend(per_seed);
    }
    rows.extend(means.iter().cloned());
    let out = args.out_dir.join("bench.csv");
    write_rows(&out, &rows)?;

    println!(
        "{:<8} {:>10} {:>12} {:>12} {:>12} {:>10}",
        "method", "ratio_pct", "cd", "hd", "entropy_gain", "time_s"
    );
    for m in &means {
        println!(
            "{:<8} {:>10.4} {:>12.6} {:>12.6} {:>12.4} {:>10.3}",
            m.method, m.ratio_pct, m.cd, m.hd, m.entropy_gain, m.time_s
        );
    }
    println!("wrote {}", out.display());
    if let Some(reference) = &args.reference {
        compare_with_reference(reference, &means)?;
    }
    Ok(())
}

/// Prints our mean rows next to matching rows of a reference CSV. The
/// reference needs a `method` column; any of the numeric bench columns it
/// carries are compared.
fn compare_with_reference(path: &Path, means: &[BenchRow]) -> CliResult {
    let mut reader = csv::Reader::from_path(path).map_err(|e| CliError::io(path, e))?;
    let headers = reader.headers().map_err(|e| CliError::io(path, e))?.clone();
    let method_col = headers
        .iter()
        .position(|h| h == "method")
        .ok_or_else(|| CliError::io(path, "reference CSV has no `method` column"))?;
    println!("comparison with {}", path.display());
    for record in reader.records() {
        let record = record.map_err(|e| CliError::io(path, e))?;
        let name = record
            .get(method_col)
            .unwrap_or_default()
            .trim()
            .to_ascii_lowercase();
        let Some(ours) = means.iter().find(|m| m.method == name) else {
            continue;
        };
        let label: Vec<&str> = headers
            .iter()
            .zip(record.iter())
            .filter(|(h, _)| {
                !matches!(
                    *h,
                    "method" | "ratio_pct" | "cd" | "hd" | "entropy_gain" | "time_s"
                )
            })
            .map(|(_, v)| v)
            .collect();
        for (column, value) in [
            ("ratio_pct", ours.ratio_pct),
            ("cd", ours.cd),
            ("hd", ours.hd),
            ("entropy_gain", ours.entropy_gain),
            ("time_s", ours.time_s),
        ] {
            let Some(i) = headers.iter().position(|h| h == column) else {
                continue;
            };
            let Ok(theirs) = record.get(i).unwrap_or_default().trim().parse::<f64>() else {
                continue;
            };
            println!(
                "  {name:<6} {:<12} {column:<12} ours {value:>12.6}  reference {theirs:>12.6}  diff {:>+12.6}",
                label.join(" "),
                value - theirs
            );
        }
    }
    Ok(())
}

pub fn ablate(args: &AblateArgs, exec: Execution) -> CliResult {
    let cloud = load(&args.input)?;
    check_input(&cloud, &args.input)?;
    let mut rows = Vec::new();
    for bits in [1u8, 2, 4] {
        for chroma in [false, true] {
            let config = SamplerConfig::new(Method::Prism)
                .with_k(args.k)
                .with_quant_bits(bits)
                .with_chromaticity(chroma)
                .with_seed(args.seed);
            let (_, report) = run(&cloud, &config, &args.input, exec)?;
            rows.push(AblationRow {
                quant_bits: bits,
                chromaticity: if chroma { "on" } else { "off" },
                ratio_pct: report.ratio_pct,
                cd: report.cd,
                hd: report.hd,
                entropy_gain: report.entropy_gain,
                time_s: report.time_s,
            });
        }
    }
    write_rows(&args.out, &rows)?;
    println!(
        "{:>4} {:>6} {:>10} {:>12} {:>12} {:>12}",
        "bits", "chroma", "ratio_pct", "cd", "hd", "entropy_gain"
    );
    for r in &rows {
        println!(
            "{:>4} {:>6} {:>10.4} {:>12.6} {:>12.6} {:>12.4}",
            r.quant_bits, r.chromaticity, r.ratio_pct, r.cd, r.hd, r.entropy_gain
        );
    }
    println!("wrote {}", args.out.display());
    Ok(())
}
