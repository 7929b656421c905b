//! Camera–LiDAR colorization: rigid transform into the camera frame, pinhole
//! projection, nearest-pixel color lookup.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{self, Execution};
use crate::model::{ColoredPoint, PointCloud};

/// Points at or closer than this depth (meters) are treated as behind the
/// camera.
pub const NEAR_PLANE: f64 = 1e-6;

const ROTATION_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalibrationError {
    #[error("rotation is not orthonormal (max |R^T R - I| = {0:e})")]
    NotOrthonormal(f64),
    #[error("rotation has determinant {0}, expected +1")]
    NotProper(f64),
    #[error("focal lengths must be positive (fx = {fx}, fy = {fy})")]
    Focal { fx: f64, fy: f64 },
    #[error("principal point ({cx}, {cy}) outside the {width}x{height} image")]
    PrincipalPoint {
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
    },
    #[error("non-finite calibration value")]
    NonFinite,
    #[error("calibration JSON: {0}")]
    Json(String),
}

#[derive(Debug, Serialize, Deserialize)]
struct CalibrationFile {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    #[serde(rename = "R")]
    rotation: [f64; 9],
    t: [f64; 3],
    width: u32,
    height: u32,
}

/// Validated pinhole intrinsics plus LiDAR-to-camera extrinsics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CalibrationFile", into = "CalibrationFile")]
pub struct CalibrationParams {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    rotation: [[f64; 3]; 3],
    translation: [f64; 3],
    width: u32,
    height: u32,
}

impl TryFrom<CalibrationFile> for CalibrationParams {
    type Error = CalibrationError;

    fn try_from(f: CalibrationFile) -> Result<Self, Self::Error> {
        let r = f.rotation;
        CalibrationParams::new(
            [f.fx, f.fy, f.cx, f.cy],
            [[r[0], r[1], r[2]], [r[3], r[4], r[5]], [r[6], r[7], r[8]]],
            f.t,
            f.width,
            f.height,
        )
    }
}

impl From<CalibrationParams> for CalibrationFile {
    fn from(c: CalibrationParams) -> Self {
        let r = c.rotation;
        CalibrationFile {
            fx: c.fx,
            fy: c.fy,
            cx: c.cx,
            cy: c.cy,
            rotation: [
                r[0][0], r[0][1], r[0][2], r[1][0], r[1][1], r[1][2], r[2][0], r[2][1], r[2][2],
            ],
            t: c.translation,
            width: c.width,
            height: c.height,
        }
    }
}

impl CalibrationParams {
    /// `intrinsics` is `[fx, fy, cx, cy]`; `rotation` is row-major.
    pub fn new(
        intrinsics: [f64; 4],
        rotation: [[f64; 3]; 3],
        translation: [f64; 3],
        width: u32,
        height: u32,
    ) -> Result<Self, CalibrationError> {
        let [fx, fy, cx, cy] = intrinsics;
        let finite = intrinsics
            .iter()
            .chain(rotation.iter().flatten())
            .chain(translation.iter())
            .all(|v| v.is_finite());
        if !finite {
            return Err(CalibrationError::NonFinite);
        }
        if !(fx > 0.0 && fy > 0.0) {
            return Err(CalibrationError::Focal { fx, fy });
        }
        if !(cx >= 0.0 && cx < f64::from(width) && cy >= 0.0 && cy < f64::from(height)) {
            return Err(CalibrationError::PrincipalPoint {
                cx,
                cy,
                width,
                height,
            });
        }
        check_rotation(&rotation)?;
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            rotation,
            translation,
            width,
            height,
        })
    }

    /// Identity extrinsics.
    pub fn pinhole(
        intrinsics: [f64; 4],
        width: u32,
        height: u32,
    ) -> Result<Self, CalibrationError> {
        Self::new(
            intrinsics,
            [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            [0.0; 3],
            width,
            height,
        )
    }

    pub fn from_json(text: &str) -> Result<Self, CalibrationError> {
        let file: CalibrationFile =
            serde_json::from_str(text).map_err(|e| CalibrationError::Json(e.to_string()))?;
        Self::try_from(file)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("calibration serializes")
    }

    pub fn intrinsics(&self) -> [f64; 4] {
        [self.fx, self.fy, self.cx, self.cy]
    }

    pub fn rotation(&self) -> [[f64; 3]; 3] {
        self.rotation
    }

    pub fn translation(&self) -> [f64; 3] {
        self.translation
    }

    pub fn image_size(&self) -> (u32, u32) {
        (self.width, self.height)
    }
}

fn check_rotation(r: &[[f64; 3]; 3]) -> Result<(), CalibrationError> {
    let mut worst: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            let dot: f64 = (0..3).map(|k| r[k][i] * r[k][j]).sum();
            let expected = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((dot - expected).abs());
        }
    }
    if worst > ROTATION_TOLERANCE {
        return Err(CalibrationError::NotOrthonormal(worst));
    }
    let det = r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1])
        - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
        + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0]);
    if (det - 1.0).abs() > ROTATION_TOLERANCE {
        return Err(CalibrationError::NotProper(det));
    }
    Ok(())
}

/// `R p + t`.
#[inline]
pub fn to_camera_frame(p: [f64; 3], calib: &CalibrationParams) -> [f64; 3] {
    let r = &calib.rotation;
    let t = &calib.translation;
    [
        r[0][0] * p[0] + r[0][1] * p[1] + r[0][2] * p[2] + t[0],
        r[1][0] * p[0] + r[1][1] * p[1] + r[1][2] * p[2] + t[1],
        r[2][0] * p[0] + r[2][1] * p[1] + r[2][2] * p[2] + t[2],
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Projection {
    Pixel { u: u32, v: u32 },
    Behind,
    OutOfFrame,
}

/// Projects a camera-frame point to the nearest integer pixel.
#[inline]
pub fn project(p_cam: [f64; 3], calib: &CalibrationParams) -> Projection {
    let [x, y, z] = p_cam;
    if z <= NEAR_PLANE {
        return Projection::Behind;
    }
    let u = (calib.fx * x / z + calib.cx).round();
    let v = (calib.fy * y / z + calib.cy).round();
    if u >= 0.0 && u < f64::from(calib.width) && v >= 0.0 && v < f64::from(calib.height) {
        Projection::Pixel {
            u: u as u32,
            v: v as u32,
        }
    } else {
        Projection::OutOfFrame
    }
}

/// An 8-bit RGB raster; channels are exposed in unit range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl RgbImage {
    /// `data` is row-major RGB8; returns `None` when its length is not
    /// `3 * width * height`.
    pub fn from_rgb8(width: u32, height: u32, data: Vec<u8>) -> Option<Self> {
        (data.len() == 3 * width as usize * height as usize).then_some(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: u32, height: u32, f: impl Fn(u32, u32) -> [u8; 3]) -> Self {
        let mut data = Vec::with_capacity(3 * width as usize * height as usize);
        for v in 0..height {
            for u in 0..width {
                data.extend_from_slice(&f(u, v));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn rgb8(&self, u: u32, v: u32) -> Option<[u8; 3]> {
        if u >= self.width || v >= self.height {
            return None;
        }
        let i = 3 * (v as usize * self.width as usize + u as usize);
        Some([self.data[i], self.data[i + 1], self.data[i + 2]])
    }

    /// Unit-range color at `(u, v)`; `None` outside the image.
    pub fn pixel(&self, u: u32, v: u32) -> Option<[f64; 3]> {
        self.rgb8(u, v).map(|c| c.map(|x| f64::from(x) / 255.0))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Colorized {
    pub cloud: PointCloud,
    /// Points that received an image color.
    pub kept: usize,
    /// Points behind the camera or outside the frame.
    pub dropped: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ColorizeOptions {
    /// Keep unprojectable points with color `(0, 0, 0)` instead of dropping
    /// them.
    pub keep_uncolored: bool,
    pub execution: Execution,
}

/// Colors each point from the image pixel it projects to. The input colors
/// are ignored. Output order follows input order.
pub fn colorize(
    cloud: &PointCloud,
    image: &RgbImage,
    calib: &CalibrationParams,
    options: ColorizeOptions,
) -> Colorized {
    let colors = exec::map_slice(options.execution, cloud.points(), |p| {
        match project(to_camera_frame(p.position(), calib), calib) {
            Projection::Pixel { u, v } => image.pixel(u, v),
            _ => None,
        }
    });
    let kept = colors.iter().filter(|c| c.is_some()).count();
    let dropped = colors.len() - kept;
    let points: Vec<ColoredPoint> = cloud
        .points()
        .iter()
        .zip(&colors)
        .filter_map(|(p, c)| match c {
            Some(c) => Some(p.with_color(*c)),
            None if options.keep_uncolored => Some(p.with_color([0.0; 3])),
            None => None,
        })
        .collect();
    Colorized {
        cloud: PointCloud::new(points),
        kept,
        dropped,
    }
}
