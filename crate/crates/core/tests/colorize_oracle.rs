use prism_core::colorizer::{
    colorize, project, to_camera_frame, CalibrationParams, ColorizeOptions, Projection, RgbImage,
};
use prism_core::{ColoredPoint, Execution, PointCloud};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LEFT: [u8; 3] = [200, 30, 30];
const RIGHT: [u8; 3] = [20, 40, 220];

fn random_rotation(rng: &mut ChaCha8Rng) -> [[f64; 3]; 3] {
    let mut q: [f64; 4] = [
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    ];
    let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    q = q.map(|v| v / n);
    let [w, x, y, z] = q;
    [
        [
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
        ],
        [
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
        ],
        [
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        ],
    ]
}

/// Hand projection, written out per coordinate.
fn reference_pixel(
    p: [f64; 3],
    [fx, fy, cx, cy]: [f64; 4],
    r: [[f64; 3]; 3],
    t: [f64; 3],
    [w, h]: [u32; 2],
) -> Option<(u32, u32)> {
    let xc = r[0][0] * p[0] + r[0][1] * p[1] + r[0][2] * p[2] + t[0];
    let yc = r[1][0] * p[0] + r[1][1] * p[1] + r[1][2] * p[2] + t[1];
    let zc = r[2][0] * p[0] + r[2][1] * p[1] + r[2][2] * p[2] + t[2];
    if zc <= 1e-6 {
        return None;
    }
    let u = (fx * xc / zc + cx).round();
    let v = (fy * yc / zc + cy).round();
    if u < 0.0 || v < 0.0 || u >= f64::from(w) || v >= f64::from(h) {
        return None;
    }
    Some((u as u32, v as u32))
}

#[test]
fn split_image_scene() {
    let (w, h) = (640u32, 480u32);
    let calib = CalibrationParams::pinhole([400.0, 400.0, 320.0, 240.0], w, h).unwrap();
    let image = RgbImage::from_fn(w, h, |u, _| if u < 320 { LEFT } else { RIGHT });
    let mut points = Vec::new();
    for i in 0..21 {
        for j in 0..15 {
            for k in 1..6 {
                points.push([
                    (i as f64 - 10.0) * 0.37,
                    (j as f64 - 7.0) * 0.29,
                    k as f64 * 1.3,
                ]);
            }
        }
    }
    let cloud: PointCloud = points
        .iter()
        .map(|&p| ColoredPoint::uncolored(p).unwrap())
        .collect();
    let out = colorize(&cloud, &image, &calib, ColorizeOptions::default());
    let identity = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let expected: Vec<([f64; 3], [u8; 3])> = points
        .iter()
        .filter_map(|&p| {
            reference_pixel(p, [400.0, 400.0, 320.0, 240.0], identity, [0.0; 3], [w, h])
                .map(|(u, _)| (p, if u < 320 { LEFT } else { RIGHT }))
        })
        .collect();
    assert_eq!(out.kept, expected.len());
    assert_eq!(out.dropped, points.len() - expected.len());
    for (got, (p, c)) in out.cloud.points().iter().zip(&expected) {
        assert_eq!(got.position(), *p);
        assert_eq!(got.color_bytes(), *c);
    }
    // left of the optical axis reads the left half
    assert!(out
        .cloud
        .points()
        .iter()
        .filter(|p| p.position()[0] < -0.01)
        .all(|p| p.color_bytes() == LEFT));
    assert!(out
        .cloud
        .points()
        .iter()
        .filter(|p| p.position()[0] > 0.01)
        .all(|p| p.color_bytes() == RIGHT));
}

#[test]
fn random_calibration_matches_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let (w, h) = (320u32, 240u32);
    for round in 0..5 {
        let r = random_rotation(&mut rng);
        let t = [
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ];
        let (fx, fy) = (
            rng.random_range(100.0..600.0),
            rng.random_range(100.0..600.0),
        );
        let (cx, cy) = (
            rng.random_range(0.0..f64::from(w)),
            rng.random_range(0.0..f64::from(h)),
        );
        let calib = CalibrationParams::new([fx, fy, cx, cy], r, t, w, h).unwrap();
        let image = RgbImage::from_fn(w, h, |u, v| {
            [(u % 251) as u8, (v % 241) as u8, ((u + v) % 7) as u8]
        });
        let points: Vec<[f64; 3]> = (0..10_000)
            .map(|_| {
                [
                    rng.random_range(-5.0..5.0),
                    rng.random_range(-5.0..5.0),
                    rng.random_range(-5.0..5.0),
                ]
            })
            .collect();
        let cloud: PointCloud = points
            .iter()
            .map(|&p| ColoredPoint::uncolored(p).unwrap())
            .collect();
        let exec = if round % 2 == 0 {
            Execution::Sequential
        } else {
            Execution::Parallel
        };
        let out = colorize(
            &cloud,
            &image,
            &calib,
            ColorizeOptions {
                keep_uncolored: false,
                execution: exec,
            },
        );
        let expected: Vec<([f64; 3], (u32, u32))> = points
            .iter()
            .filter_map(|&p| reference_pixel(p, [fx, fy, cx, cy], r, t, [w, h]).map(|px| (p, px)))
            .collect();
        assert_eq!(out.cloud.len(), expected.len());
        for (got, (p, (u, v))) in out.cloud.points().iter().zip(&expected) {
            assert_eq!(got.position(), *p);
            assert_eq!(got.color_bytes(), image.rgb8(*u, *v).unwrap());
        }
    }
}

#[test]
fn unit_intrinsics_reduce_to_perspective_division() {
    let calib = CalibrationParams::pinhole([1.0, 1.0, 0.0, 0.0], 1_000_000, 1_000_000).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..1000 {
        let p = [
            rng.random_range(0.0..1.0e4),
            rng.random_range(0.0..1.0e4),
            rng.random_range(1.0..100.0),
        ];
        let cam = to_camera_frame(p, &calib);
        assert_eq!(cam, p);
        match project(cam, &calib) {
            Projection::Pixel { u, v } => {
                assert_eq!(f64::from(u), (p[0] / p[2]).round());
                assert_eq!(f64::from(v), (p[1] / p[2]).round());
            }
            other => panic!("{other:?}"),
        }
    }
}

#[test]
fn keep_uncolored_preserves_order_and_count() {
    let calib = CalibrationParams::pinhole([10.0, 10.0, 5.0, 5.0], 10, 10).unwrap();
    let image = RgbImage::from_fn(10, 10, |_, _| [0, 255, 0]);
    let cloud: PointCloud = [
        [0.0, 0.0, 1.0],
        [0.0, 0.0, -1.0],
        [0.1, 0.1, 1.0],
        [50.0, 0.0, 1.0],
    ]
    .iter()
    .map(|&p| ColoredPoint::uncolored(p).unwrap())
    .collect();
    let out = colorize(
        &cloud,
        &image,
        &calib,
        ColorizeOptions {
            keep_uncolored: true,
            ..Default::default()
        },
    );
    assert_eq!(out.cloud.len(), 4);
    assert_eq!((out.kept, out.dropped), (2, 2));
    let colors: Vec<[u8; 3]> = out.cloud.points().iter().map(|p| p.color_bytes()).collect();
    assert_eq!(colors, [[0, 255, 0], [0, 0, 0], [0, 255, 0], [0, 0, 0]]);
}
