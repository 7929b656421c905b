use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use prism_core::colorizer::CalibrationParams;
use prism_core::io::{read_ply, write_csv, write_ply, PlyFormat};
use prism_core::metrics::{chamfer, entropy_gain, hausdorff};
use prism_core::sampling::{bin_counts, Quantizer};
use prism_core::{solve_k, ColoredPoint, PointCloud};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use tempfile::TempDir;

fn prism(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_prism"))
        .args(args)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Heavy-tailed palette: a few colors hold most points.
fn skewed_cloud(n: usize, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let palette: Vec<[u8; 3]> = (0..400)
        .map(|_| [rng.random(), rng.random(), rng.random()])
        .collect();
    (0..n)
        .map(|_| {
            let c = (rng.random::<f64>().powi(4) * palette.len() as f64) as usize;
            ColoredPoint::from_rgb8(
                [
                    rng.random_range(0.0..10.0),
                    rng.random_range(0.0..10.0),
                    rng.random_range(0.0..1.0),
                ],
                palette[c],
            )
            .unwrap()
        })
        .collect()
}

fn scene(dir: &TempDir, name: &str, cloud: &PointCloud) -> PathBuf {
    let path = dir.path().join(name);
    if name.ends_with(".csv") {
        write_csv(cloud, &path).unwrap();
    } else {
        write_ply(cloud, &path, PlyFormat::BinaryLittleEndian).unwrap();
    }
    path
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn manifest_reports_solver_k() {
    let dir = TempDir::new().unwrap();
    let cloud = skewed_cloud(20_000, 1);
    let input = scene(&dir, "in.ply", &cloud);
    let output = dir.path().join("out.ply");
    let out = prism(&[
        "sample",
        "--input",
        p(&input),
        "--output",
        p(&output),
        "--method",
        "prism",
        "--target-ratio",
        "0.05",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let manifest = json(&dir.path().join("out.ply.manifest.json"));
    let solved = solve_k(&bin_counts(&cloud, Quantizer::EXACT), 0.05).unwrap();
    assert_eq!(manifest["k_star"].as_u64(), Some(solved.k_star));
    let written = read_ply(&output).unwrap();
    assert_eq!(written.len() as u64, solved.predicted_size);
    assert_eq!(
        manifest["output"]["points"].as_u64(),
        Some(written.len() as u64)
    );
    assert_eq!(manifest["input"]["points"].as_u64(), Some(20_000));
    assert!(manifest["timestamp"].is_string());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(
        stdout.contains(&format!("k*: {}", solved.k_star)),
        "{stdout}"
    );
}

#[test]
fn random_at_full_ratio_keeps_everything() {
    let dir = TempDir::new().unwrap();
    let input = scene(&dir, "in.csv", &skewed_cloud(3_000, 2));
    let output = dir.path().join("out.csv");
    let manifest = dir.path().join("m.json");
    let out = prism(&[
        "sample",
        "--input",
        p(&input),
        "--output",
        p(&output),
        "--method",
        "random",
        "--target-ratio",
        "1.0",
        "--manifest",
        p(&manifest),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(prism_core::io::read_csv(&output).unwrap().len(), 3_000);
    assert_eq!(json(&manifest)["achieved_ratio"].as_f64(), Some(1.0));
    assert!(json(&manifest)["k_star"].is_null());
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let input = scene(&dir, "in.ply", &skewed_cloud(500, 3));
    let out_path = dir.path().join("o.ply");
    let sample = |extra: &[&str]| {
        let mut args = vec!["sample", "--input", p(&input), "--output", p(&out_path)];
        args.extend_from_slice(extra);
        prism(&args)
    };

    let missing = prism(&[
        "sample",
        "--input",
        "/nonexistent/x.ply",
        "--output",
        p(&out_path),
        "--method",
        "prism",
        "--k",
        "3",
    ]);
    assert_eq!(code(&missing), 1);
    assert!(stderr(&missing).contains("/nonexistent/x.ply"));

    assert_eq!(
        code(&sample(&["--method", "prism", "--target-ratio", "0"])),
        2
    );
    assert_eq!(
        code(&sample(&["--method", "prism", "--target-ratio", "1.5"])),
        2
    );
    assert_eq!(
        code(&sample(&[
            "--method",
            "prism",
            "--target-ratio",
            "0.1",
            "--k",
            "3"
        ])),
        2
    );
    assert_eq!(code(&sample(&["--method", "random", "--k", "3"])), 2);
    assert_eq!(
        code(&sample(&[
            "--method",
            "prism",
            "--k",
            "3",
            "--voxel-size",
            "0.1"
        ])),
        2
    );
    assert_eq!(
        code(&sample(&["--method", "prism", "--bits", "9", "--k", "3"])),
        2
    );
    assert_eq!(code(&sample(&["--method", "prism"])), 2);
    assert_eq!(
        code(&sample(&[
            "--method",
            "nss",
            "--target-ratio",
            "0.1",
            "--knn",
            "2"
        ])),
        2
    );

    let colorless: PointCloud = PointCloud::new_colorless(
        (0..50)
            .map(|i| ColoredPoint::uncolored([i as f64, 0.0, 0.0]).unwrap())
            .collect(),
    );
    let gray = scene(&dir, "colorless.ply", &colorless);
    let out = prism(&[
        "sample",
        "--input",
        p(&gray),
        "--output",
        p(&out_path),
        "--method",
        "prism",
        "--k",
        "2",
    ]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    assert_eq!(
        code(&prism(&[
            "histogram",
            "--input",
            p(&gray),
            "--out",
            p(&dir.path().join("h.json"))
        ])),
        3
    );
    // geometry-only methods accept it
    let out = prism(&[
        "sample",
        "--input",
        p(&gray),
        "--output",
        p(&out_path),
        "--method",
        "random",
        "--target-ratio",
        "0.5",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let empty = scene(&dir, "empty.csv", &PointCloud::default());
    let report = dir.path().join("r.json");
    assert_eq!(
        code(&prism(&[
            "metrics",
            "--ref",
            p(&empty),
            "--cmp",
            p(&input),
            "--report",
            p(&report)
        ])),
        4
    );
    assert_eq!(
        code(&prism(&[
            "bench",
            "--input",
            p(&empty),
            "--out-dir",
            p(dir.path()),
            "--seeds",
            "1"
        ])),
        4
    );

    assert!(!out_path.with_extension("tmp").exists());
}

fn calibration_json(det_sign: f64) -> String {
    let mut v: Value = serde_json::from_str(
        &CalibrationParams::pinhole([4.0, 4.0, 2.0, 1.0], 4, 2)
            .unwrap()
            .to_json(),
    )
    .unwrap();
    v["R"][8] = Value::from(det_sign);
    v.to_string()
}

/// 4x2 image, left half red, right half blue.
fn split_image(dir: &TempDir) -> PathBuf {
    let mut bytes = b"P6\n4 2\n255\n".to_vec();
    for _ in 0..2 {
        for u in 0..4 {
            bytes.extend_from_slice(if u < 2 { &[255, 0, 0] } else { &[0, 0, 255] });
        }
    }
    let path = dir.path().join("img.ppm");
    std::fs::write(&path, bytes).unwrap();
    path
}

#[test]
fn colorize_split_image() {
    let dir = TempDir::new().unwrap();
    let image = split_image(&dir);
    let calib = dir.path().join("calib.json");
    std::fs::write(&calib, calibration_json(1.0)).unwrap();
    // u = 4 x / z + 2
    let pts = PointCloud::new_colorless(
        [
            [-0.5, 0.0, 1.0],
            [0.25, 0.0, 1.0],
            [-0.375, 0.125, 2.0],
            [0.0, 0.0, -1.0],
            [5.0, 0.0, 1.0],
        ]
        .iter()
        .map(|&p| ColoredPoint::uncolored(p).unwrap())
        .collect(),
    );
    let points = scene(&dir, "pts.ply", &pts);
    let output = dir.path().join("colored.ply");
    let out = prism(&[
        "colorize",
        "--points",
        p(&points),
        "--image",
        p(&image),
        "--calib",
        p(&calib),
        "--output",
        p(&output),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let colored = read_ply(&output).unwrap();
    let got: Vec<([f64; 3], [u8; 3])> = colored
        .points()
        .iter()
        .map(|q| (q.position(), q.color_bytes()))
        .collect();
    assert_eq!(
        got,
        vec![
            ([-0.5, 0.0, 1.0], [255, 0, 0]),
            ([0.25, 0.0, 1.0], [0, 0, 255]),
            ([-0.375, 0.125, 2.0], [255, 0, 0])
        ]
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(
        stdout.contains("kept: 3") && stdout.contains("dropped: 2"),
        "{stdout}"
    );

    let kept = dir.path().join("kept.ply");
    let out = prism(&[
        "colorize",
        "--points",
        p(&points),
        "--image",
        p(&image),
        "--calib",
        p(&calib),
        "--output",
        p(&kept),
        "--keep-uncolored",
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(read_ply(&kept).unwrap().len(), 5);

    let behind = PointCloud::new_colorless(
        (0..4)
            .map(|i| ColoredPoint::uncolored([0.0, 0.0, -1.0 - i as f64]).unwrap())
            .collect(),
    );
    let behind = scene(&dir, "behind.ply", &behind);
    let none = dir.path().join("none.ply");
    let out = prism(&[
        "colorize",
        "--points",
        p(&behind),
        "--image",
        p(&image),
        "--calib",
        p(&calib),
        "--output",
        p(&none),
    ]);
    assert_eq!(code(&out), 0);
    assert!(stderr(&out).contains("warning"), "{}", stderr(&out));

    let reflected = dir.path().join("reflected.json");
    std::fs::write(&reflected, calibration_json(-1.0)).unwrap();
    let out = prism(&[
        "colorize",
        "--points",
        p(&points),
        "--image",
        p(&image),
        "--calib",
        p(&reflected),
        "--output",
        p(&none),
    ]);
    assert_eq!(code(&out), 5, "{}", stderr(&out));
}

#[test]
fn metrics_match_library() {
    let dir = TempDir::new().unwrap();
    let input = scene(&dir, "in.ply", &skewed_cloud(5_000, 4));
    // positions as stored
    let cloud = read_ply(&input).unwrap();
    let report = dir.path().join("self.json");
    assert_eq!(
        code(&prism(&[
            "metrics",
            "--ref",
            p(&input),
            "--cmp",
            p(&input),
            "--report",
            p(&report)
        ])),
        0
    );
    let r = json(&report);
    assert_eq!((r["cd"].as_f64(), r["hd"].as_f64()), (Some(0.0), Some(0.0)));
    assert_eq!(r["ratio_pct"].as_f64(), Some(100.0));

    let sampled = dir.path().join("s.ply");
    let out = prism(&[
        "sample",
        "--input",
        p(&input),
        "--output",
        p(&sampled),
        "--method",
        "prism",
        "--k",
        "4",
    ]);
    assert_eq!(code(&out), 0);
    let out = prism(&[
        "metrics",
        "--ref",
        p(&input),
        "--cmp",
        p(&sampled),
        "--report",
        p(&report),
        "--method",
        "prism",
    ]);
    assert_eq!(code(&out), 0);
    let r = json(&report);
    let cmp = read_ply(&sampled).unwrap();
    assert_eq!(r["cd"].as_f64(), Some(chamfer(&cloud, &cmp).unwrap()));
    assert_eq!(r["hd"].as_f64(), Some(hausdorff(&cloud, &cmp).unwrap()));
    assert_eq!(
        r["entropy_gain"].as_f64(),
        Some(entropy_gain(&cloud, &cmp).unwrap())
    );
    assert_eq!(r["method"], "prism");
    let keys: Vec<&String> = r.as_object().unwrap().keys().collect();
    assert_eq!(
        keys,
        [
            "cd",
            "entropy_gain",
            "hd",
            "method",
            "params",
            "ratio_pct",
            "time_s"
        ]
    );
}

#[test]
fn bench_and_ablate_tables() {
    let dir = TempDir::new().unwrap();
    let input = scene(&dir, "in.ply", &skewed_cloud(20_000, 5));
    let out = prism(&[
        "bench",
        "--input",
        p(&input),
        "--out-dir",
        p(dir.path()),
        "--seeds",
        "3",
        "--target-ratio",
        "0.02",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let mut reader = csv::Reader::from_path(dir.path().join("bench.csv")).unwrap();
    assert_eq!(
        reader.headers().unwrap(),
        vec![
            "method",
            "seed",
            "ratio_pct",
            "cd",
            "hd",
            "entropy_gain",
            "time_s"
        ]
    );
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 16);
    let means: Vec<&csv::StringRecord> = rows.iter().filter(|r| &r[1] == "mean").collect();
    assert_eq!(means.len(), 4);
    let best = means
        .iter()
        .max_by(|a, b| {
            a[5].parse::<f64>()
                .unwrap()
                .total_cmp(&b[5].parse().unwrap())
        })
        .unwrap();
    assert_eq!(&best[0], "prism");

    let table = dir.path().join("ablation.csv");
    let out = prism(&[
        "ablate",
        "--input",
        p(&input),
        "--out",
        p(&table),
        "--k",
        "10",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let mut reader = csv::Reader::from_path(&table).unwrap();
    assert_eq!(
        reader.headers().unwrap(),
        vec![
            "quant_bits",
            "chromaticity",
            "ratio_pct",
            "cd",
            "hd",
            "entropy_gain",
            "time_s"
        ]
    );
    assert_eq!(reader.records().count(), 6);
}

#[test]
fn histogram_counts() {
    let dir = TempDir::new().unwrap();
    let cloud = skewed_cloud(4_000, 6);
    let input = scene(&dir, "in.ply", &cloud);
    let hist = dir.path().join("h.json");
    assert_eq!(
        code(&prism(&[
            "histogram",
            "--input",
            p(&input),
            "--out",
            p(&hist)
        ])),
        0
    );
    let h = json(&hist);
    assert_eq!(
        (h["hue_bins"].as_u64(), h["sat_bins"].as_u64()),
        (Some(36), Some(8))
    );
    let counts: Vec<u64> = h["counts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c.as_u64().unwrap())
        .collect();
    assert_eq!(counts.len(), 288);
    assert_eq!(counts.iter().sum::<u64>(), 4_000);

    let red: PointCloud = (0..100)
        .map(|i| ColoredPoint::from_rgb8([i as f64, 0.0, 0.0], [255, 0, 0]).unwrap())
        .collect();
    let red = scene(&dir, "red.csv", &red);
    assert_eq!(
        code(&prism(&[
            "histogram",
            "--input",
            p(&red),
            "--out",
            p(&hist),
            "--hue-bins",
            "12",
            "--sat-bins",
            "4"
        ])),
        0
    );
    let counts: Vec<u64> = json(&hist)["counts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c.as_u64().unwrap())
        .collect();
    let nonzero: Vec<(usize, u64)> = counts
        .iter()
        .copied()
        .enumerate()
        .filter(|&(_, c)| c > 0)
        .collect();
    // hue 0, full saturation
    assert_eq!(nonzero, vec![(3, 100)]);
}

#[test]
fn prism_flattens_gray_dominated_histogram() {
    let dir = TempDir::new().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let cloud: PointCloud = (0..20_000)
        .map(|i| {
            let rgb = if i % 10 == 0 {
                [rng.random(), rng.random(), rng.random()]
            } else {
                [120, 120, 120]
            };
            ColoredPoint::from_rgb8(
                [rng.random_range(0.0..5.0), rng.random_range(0.0..5.0), 0.0],
                rgb,
            )
            .unwrap()
        })
        .collect();
    let input = scene(&dir, "in.ply", &cloud);
    let sampled = dir.path().join("s.ply");
    let out = prism(&[
        "sample",
        "--input",
        p(&input),
        "--output",
        p(&sampled),
        "--method",
        "prism",
        "--target-ratio",
        "0.1",
    ]);
    assert_eq!(code(&out), 0);
    let share_of_gray = |path: &Path| {
        let hist = dir.path().join("h.json");
        assert_eq!(
            code(&prism(&[
                "histogram",
                "--input",
                p(path),
                "--out",
                p(&hist)
            ])),
            0
        );
        let h = json(&hist);
        let counts: Vec<f64> = h["counts"]
            .as_array()
            .unwrap()
            .iter()
            .map(|c| c.as_f64().unwrap())
            .collect();
        counts[0] / counts.iter().sum::<f64>()
    };
    let (before, after) = (share_of_gray(&input), share_of_gray(&sampled));
    assert!(
        before > 0.85 && after < 0.2,
        "gray share {before} -> {after}"
    );
}
