//! Point cloud file formats: PLY (ascii and binary little-endian) and a flat
//! `x,y,z,r,g,b` CSV used for fixtures.

mod ply;

pub use ply::{
    encode_ply, parse_ply, read_ply, write_ply, PlyFormat, PlyHeader, PlyWriteOptions, ScalarType,
};

use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ColoredPoint, ModelError, PointCloud};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed PLY header: {0}")]
    MalformedHeader(String),
    #[error("unsupported PLY {0}")]
    Unsupported(String),
    #[error("missing vertex property {0:?}")]
    MissingCoordinate(&'static str),
    #[error("truncated payload: {declared} vertices declared, {found} present")]
    Truncated { declared: usize, found: usize },
    #[error("malformed record {record}: {message}")]
    MalformedRecord { record: usize, message: String },
    #[error("invalid point {index}: {source}")]
    InvalidPoint { index: usize, source: ModelError },
    #[error("refusing to write an empty cloud")]
    EmptyCloud,
}

impl FormatError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        FormatError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// True for failures of the underlying filesystem rather than content.
    pub fn is_io(&self) -> bool {
        matches!(self, FormatError::Io { .. })
    }
}

/// Writes through a temporary file in the destination directory, then
/// renames it over `path`.
pub fn atomic_write<F>(path: &Path, write: F) -> Result<(), FormatError>
where
    F: FnOnce(&mut BufWriter<&std::fs::File>) -> std::io::Result<()>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let err = |e| FormatError::io(path, e);
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(err)?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        write(&mut w).map_err(err)?;
        w.flush().map_err(err)?;
    }
    tmp.persist(path).map_err(|e| err(e.error))?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    x: f64,
    y: f64,
    z: f64,
    r: f64,
    g: f64,
    b: f64,
}

/// Reads a `x,y,z,r,g,b` CSV with unit-range colors.
pub fn read_csv(path: impl AsRef<Path>) -> Result<PointCloud, FormatError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| FormatError::io(path, e))?;
    let mut reader = csv::Reader::from_reader(std::io::BufReader::new(file));
    let mut points = Vec::new();
    for (record, row) in reader.deserialize::<CsvRow>().enumerate() {
        let row = row.map_err(|e| FormatError::MalformedRecord {
            record,
            message: e.to_string(),
        })?;
        let point =
            ColoredPoint::new([row.x, row.y, row.z], [row.r, row.g, row.b]).map_err(|source| {
                FormatError::InvalidPoint {
                    index: record,
                    source,
                }
            })?;
        points.push(point);
    }
    Ok(PointCloud::new(points))
}

/// Writes a `x,y,z,r,g,b` CSV. Values use shortest round-trip formatting.
pub fn write_csv(cloud: &PointCloud, path: impl AsRef<Path>) -> Result<(), FormatError> {
    let path = path.as_ref();
    atomic_write(path, |w| {
        let mut writer = csv::Writer::from_writer(w);
        for p in cloud.points() {
            let [x, y, z] = p.position();
            let [r, g, b] = p.color();
            writer.serialize(CsvRow { x, y, z, r, g, b })?;
        }
        // header only for empty clouds
        if cloud.is_empty() {
            writer.write_record(["x", "y", "z", "r", "g", "b"])?;
        }
        writer.flush()?;
        Ok(())
    })
}

/// Reads `.ply` or `.csv` by extension.
pub fn read_cloud(path: impl AsRef<Path>) -> Result<PointCloud, FormatError> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("csv") => read_csv(path),
        _ => read_ply(path),
    }
}
