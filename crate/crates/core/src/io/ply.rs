//! PLY reading and writing for colored point clouds.
//!
//! Only the `vertex` element is interpreted. Other elements are skipped when
//! they precede it and ignored when they follow it. Vertex properties may
//! appear in any order; unknown ones are skipped. `x`, `y`, `z` are
//! mandatory, `red`, `green`, `blue` optional (a cloud without all three is
//! returned flagged colorless).
//!
//! Written files always use `float` coordinates and `uchar` colors.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use super::{atomic_write, FormatError};
use crate::model::{ColoredPoint, PointCloud};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
}

impl PlyFormat {
    pub fn header_name(self) -> &'static str {
        match self {
            PlyFormat::Ascii => "ascii",
            PlyFormat::BinaryLittleEndian => "binary_little_endian",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalarType {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl ScalarType {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => ScalarType::I8,
            "uchar" | "uint8" => ScalarType::U8,
            "short" | "int16" => ScalarType::I16,
            "ushort" | "uint16" => ScalarType::U16,
            "int" | "int32" => ScalarType::I32,
            "uint" | "uint32" => ScalarType::U32,
            "float" | "float32" => ScalarType::F32,
            "double" | "float64" => ScalarType::F64,
            _ => return None,
        })
    }

    pub fn size(self) -> usize {
        match self {
            ScalarType::I8 | ScalarType::U8 => 1,
            ScalarType::I16 | ScalarType::U16 => 2,
            ScalarType::I32 | ScalarType::U32 | ScalarType::F32 => 4,
            ScalarType::F64 => 8,
        }
    }

    #[inline]
    fn decode_le(self, b: &[u8]) -> f64 {
        match self {
            ScalarType::I8 => f64::from(b[0] as i8),
            ScalarType::U8 => f64::from(b[0]),
            ScalarType::I16 => f64::from(i16::from_le_bytes([b[0], b[1]])),
            ScalarType::U16 => f64::from(u16::from_le_bytes([b[0], b[1]])),
            ScalarType::I32 => f64::from(i32::from_le_bytes([b[0], b[1], b[2], b[3]])),
            ScalarType::U32 => f64::from(u32::from_le_bytes([b[0], b[1], b[2], b[3]])),
            ScalarType::F32 => f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])),
            ScalarType::F64 => f64::from_le_bytes([b[0], b[1], b[2], b[3], b[4], b[5], b[6], b[7]]),
        }
    }

    /// Divisor mapping a stored color value to unit range.
    fn color_scale(self) -> Option<f64> {
        match self {
            ScalarType::U8 => Some(255.0),
            ScalarType::U16 => Some(65535.0),
            ScalarType::F32 | ScalarType::F64 => Some(1.0),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum PropertyKind {
    Scalar(ScalarType),
    List { count: ScalarType, item: ScalarType },
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<(String, PropertyKind)>,
}

/// Parsed header, restricted to what the vertex reader needs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlyHeader {
    pub format: PlyFormat,
    pub vertex_count: usize,
    /// Vertex properties in file order.
    pub properties: Vec<(String, ScalarType)>,
    elements: Vec<Element>,
    body_offset: usize,
}

impl PlyHeader {
    pub fn has_color(&self) -> bool {
        ["red", "green", "blue"]
            .iter()
            .all(|c| self.properties.iter().any(|(n, _)| n == c))
    }

    /// Parses the header at the start of `bytes`.
    pub fn parse(bytes: &[u8]) -> Result<Self, FormatError> {
        let malformed = |m: &str| FormatError::MalformedHeader(m.to_string());
        let end = find_end_header(bytes).ok_or_else(|| malformed("no end_header line"))?;
        let text = std::str::from_utf8(&bytes[..end.0])
            .map_err(|_| malformed("header is not valid UTF-8"))?;
        let mut lines = text.lines().map(str::trim);
        if lines.next() != Some("ply") {
            return Err(malformed("missing 'ply' magic line"));
        }

        let mut format = None;
        let mut elements: Vec<Element> = Vec::new();
        for line in lines {
            let mut tok = line.split_whitespace();
            match tok.next() {
                None | Some("comment") | Some("obj_info") => {}
                Some("format") => {
                    format = Some(match tok.next() {
                        Some("ascii") => PlyFormat::Ascii,
                        Some("binary_little_endian") => PlyFormat::BinaryLittleEndian,
                        Some(other) => {
                            return Err(FormatError::Unsupported(format!("format {other}")))
                        }
                        None => return Err(malformed("empty format line")),
                    });
                }
                Some("element") => {
                    let name = tok
                        .next()
                        .ok_or_else(|| malformed("element without name"))?;
                    let count = tok
                        .next()
                        .and_then(|c| c.parse::<usize>().ok())
                        .ok_or_else(|| malformed("element without a valid count"))?;
                    elements.push(Element {
                        name: name.to_string(),
                        count,
                        properties: Vec::new(),
                    });
                }
                Some("property") => {
                    let element = elements
                        .last_mut()
                        .ok_or_else(|| malformed("property before any element"))?;
                    let ty = tok
                        .next()
                        .ok_or_else(|| malformed("property without type"))?;
                    let scalar = |name: &str| {
                        ScalarType::parse(name)
                            .ok_or_else(|| FormatError::Unsupported(format!("scalar type {name}")))
                    };
                    let kind = if ty == "list" {
                        let count = scalar(tok.next().unwrap_or(""))?;
                        let item = scalar(tok.next().unwrap_or(""))?;
                        PropertyKind::List { count, item }
                    } else {
                        PropertyKind::Scalar(scalar(ty)?)
                    };
                    let name = tok
                        .next()
                        .ok_or_else(|| malformed("property without name"))?;
                    element.properties.push((name.to_string(), kind));
                }
                Some(other) => {
                    return Err(malformed(&format!("unknown header keyword {other:?}")));
                }
            }
        }

        let format = format.ok_or_else(|| malformed("missing format line"))?;
        let vertex = elements
            .iter()
            .find(|e| e.name == "vertex")
            .ok_or_else(|| malformed("no vertex element"))?;
        let mut properties = Vec::with_capacity(vertex.properties.len());
        for (name, kind) in &vertex.properties {
            match kind {
                PropertyKind::Scalar(t) => properties.push((name.clone(), *t)),
                PropertyKind::List { .. } => {
                    return Err(FormatError::Unsupported(format!(
                        "list property {name:?} on vertex element"
                    )))
                }
            }
        }
        for axis in ["x", "y", "z"] {
            if !properties.iter().any(|(n, _)| n == axis) {
                return Err(FormatError::MissingCoordinate(axis));
            }
        }
        Ok(Self {
            format,
            vertex_count: vertex.count,
            properties,
            elements,
            body_offset: end.1,
        })
    }
}

/// Returns (end of header text, start of body).
fn find_end_header(bytes: &[u8]) -> Option<(usize, usize)> {
    const TAG: &[u8] = b"end_header";
    let mut line_start = 0;
    while line_start < bytes.len() {
        let nl = bytes[line_start..].iter().position(|&b| b == b'\n');
        let line_end = nl.map_or(bytes.len(), |p| line_start + p);
        let line = &bytes[line_start..line_end];
        let line = line.strip_suffix(b"\r").unwrap_or(line);
        if line == TAG {
            return Some((line_start, (line_end + 1).min(bytes.len())));
        }
        line_start = line_end + 1;
    }
    None
}

struct VertexLayout {
    // index into the property list for x, y, z and optional r, g, b
    xyz: [usize; 3],
    rgb: Option<[usize; 3]>,
}

impl VertexLayout {
    fn new(header: &PlyHeader) -> Result<Self, FormatError> {
        let find = |n: &str| header.properties.iter().position(|(p, _)| p == n);
        let xyz = [find("x").unwrap(), find("y").unwrap(), find("z").unwrap()];
        let rgb = if header.has_color() {
            let idx = [
                find("red").unwrap(),
                find("green").unwrap(),
                find("blue").unwrap(),
            ];
            for &i in &idx {
                let (name, ty) = &header.properties[i];
                if ty.color_scale().is_none() {
                    return Err(FormatError::Unsupported(format!(
                        "color property {name:?} of type {ty:?}"
                    )));
                }
            }
            Some(idx)
        } else {
            None
        };
        Ok(Self { xyz, rgb })
    }

    fn point(
        &self,
        header: &PlyHeader,
        values: &[f64],
        index: usize,
    ) -> Result<ColoredPoint, FormatError> {
        let position = self.xyz.map(|i| values[i]);
        let color = match self.rgb {
            Some(idx) => idx.map(|i| values[i] / header.properties[i].1.color_scale().unwrap()),
            None => [0.0; 3],
        };
        ColoredPoint::new(position, color)
            .map_err(|source| FormatError::InvalidPoint { index, source })
    }
}

/// Reads a PLY file.
pub fn read_ply(path: impl AsRef<Path>) -> Result<PointCloud, FormatError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| FormatError::io(path, e))?;
    parse_ply(&bytes)
}

/// Parses an in-memory PLY file.
pub fn parse_ply(bytes: &[u8]) -> Result<PointCloud, FormatError> {
    let header = PlyHeader::parse(bytes)?;
    let layout = VertexLayout::new(&header)?;
    let body = &bytes[header.body_offset..];
    let points = match header.format {
        PlyFormat::BinaryLittleEndian => read_binary_vertices(&header, &layout, body)?,
        PlyFormat::Ascii => read_ascii_vertices(&header, &layout, body)?,
    };
    Ok(if layout.rgb.is_some() {
        PointCloud::new(points)
    } else {
        PointCloud::new_colorless(points)
    })
}

fn read_binary_vertices(
    header: &PlyHeader,
    layout: &VertexLayout,
    body: &[u8],
) -> Result<Vec<ColoredPoint>, FormatError> {
    let mut offset = 0usize;
    for element in header.elements.iter().take_while(|e| e.name != "vertex") {
        for _ in 0..element.count {
            offset = skip_binary_record(element, body, offset).ok_or(FormatError::Truncated {
                declared: header.vertex_count,
                found: 0,
            })?;
        }
    }

    let mut offsets = Vec::with_capacity(header.properties.len());
    let mut stride = 0;
    for (_, ty) in &header.properties {
        offsets.push(stride);
        stride += ty.size();
    }
    let available = body.len().saturating_sub(offset) / stride.max(1);
    if available < header.vertex_count {
        return Err(FormatError::Truncated {
            declared: header.vertex_count,
            found: available,
        });
    }

    let mut values = vec![0.0; header.properties.len()];
    let mut points = Vec::with_capacity(header.vertex_count);
    for (index, record) in body[offset..]
        .chunks_exact(stride)
        .take(header.vertex_count)
        .enumerate()
    {
        for (slot, ((_, ty), &at)) in header.properties.iter().zip(&offsets).enumerate() {
            values[slot] = ty.decode_le(&record[at..]);
        }
        points.push(layout.point(header, &values, index)?);
    }
    Ok(points)
}

fn skip_binary_record(element: &Element, body: &[u8], mut offset: usize) -> Option<usize> {
    for (_, kind) in &element.properties {
        match kind {
            PropertyKind::Scalar(t) => offset += t.size(),
            PropertyKind::List { count, item } => {
                let n = count.decode_le(body.get(offset..offset + count.size())?);
                if n.is_nan() || n < 0.0 {
                    return None;
                }
                offset += count.size() + n as usize * item.size();
            }
        }
        if offset > body.len() {
            return None;
        }
    }
    Some(offset)
}

fn read_ascii_vertices(
    header: &PlyHeader,
    layout: &VertexLayout,
    body: &[u8],
) -> Result<Vec<ColoredPoint>, FormatError> {
    let text = std::str::from_utf8(body).map_err(|_| FormatError::MalformedRecord {
        record: 0,
        message: "body is not valid UTF-8".into(),
    })?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    for element in header.elements.iter().take_while(|e| e.name != "vertex") {
        for _ in 0..element.count {
            if lines.next().is_none() {
                return Err(FormatError::Truncated {
                    declared: header.vertex_count,
                    found: 0,
                });
            }
        }
    }

    let mut values = vec![0.0; header.properties.len()];
    let mut points = Vec::with_capacity(header.vertex_count);
    for index in 0..header.vertex_count {
        let line = lines.next().ok_or(FormatError::Truncated {
            declared: header.vertex_count,
            found: index,
        })?;
        let mut tokens = line.split_whitespace();
        for (slot, (name, ty)) in header.properties.iter().enumerate() {
            let token = tokens.next().ok_or_else(|| FormatError::MalformedRecord {
                record: index,
                message: format!("missing value for {name:?}"),
            })?;
            let parsed = match ty {
                ScalarType::F32 => token.parse::<f32>().map(f64::from),
                _ => token.parse::<f64>(),
            };
            values[slot] = parsed.map_err(|_| FormatError::MalformedRecord {
                record: index,
                message: format!("cannot parse {token:?} as a number"),
            })?;
        }
        points.push(layout.point(header, &values, index)?);
    }
    Ok(points)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlyWriteOptions {
    pub format: PlyFormat,
    /// Write a header-only file for an empty cloud instead of failing.
    pub allow_empty: bool,
}

impl From<PlyFormat> for PlyWriteOptions {
    fn from(format: PlyFormat) -> Self {
        Self {
            format,
            allow_empty: false,
        }
    }
}

/// Serializes `cloud` to PLY bytes. Colorless clouds are written without
/// color properties.
pub fn encode_ply(
    cloud: &PointCloud,
    options: impl Into<PlyWriteOptions>,
) -> Result<Vec<u8>, FormatError> {
    let options = options.into();
    if cloud.is_empty() && !options.allow_empty {
        return Err(FormatError::EmptyCloud);
    }
    let colored = !cloud.is_colorless();
    let mut header = String::new();
    let _ = writeln!(header, "ply");
    let _ = writeln!(header, "format {} 1.0", options.format.header_name());
    let _ = writeln!(header, "element vertex {}", cloud.len());
    for axis in ["x", "y", "z"] {
        let _ = writeln!(header, "property float {axis}");
    }
    if colored {
        for c in ["red", "green", "blue"] {
            let _ = writeln!(header, "property uchar {c}");
        }
    }
    let _ = writeln!(header, "end_header");

    let record = if colored { 15 } else { 12 };
    let mut out = Vec::with_capacity(header.len() + cloud.len() * record);
    out.extend_from_slice(header.as_bytes());
    match options.format {
        PlyFormat::BinaryLittleEndian => {
            for p in cloud.points() {
                for c in p.position() {
                    out.extend_from_slice(&(c as f32).to_le_bytes());
                }
                if colored {
                    out.extend_from_slice(&p.color_bytes());
                }
            }
        }
        PlyFormat::Ascii => {
            let mut line = String::new();
            for p in cloud.points() {
                line.clear();
                let [x, y, z] = p.position();
                let _ = write!(line, "{} {} {}", x as f32, y as f32, z as f32);
                if colored {
                    let [r, g, b] = p.color_bytes();
                    let _ = write!(line, " {r} {g} {b}");
                }
                line.push('\n');
                out.extend_from_slice(line.as_bytes());
            }
        }
    }
    Ok(out)
}

/// Writes `cloud` to `path` atomically.
pub fn write_ply(
    cloud: &PointCloud,
    path: impl AsRef<Path>,
    options: impl Into<PlyWriteOptions>,
) -> Result<(), FormatError> {
    let bytes = encode_ply(cloud, options)?;
    atomic_write(path.as_ref(), |w| w.write_all(&bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ascii(body: &str, props: &str, n: usize) -> Vec<u8> {
        format!("ply\nformat ascii 1.0\nelement vertex {n}\n{props}end_header\n{body}").into_bytes()
    }

    const XYZRGB: &str = "property float x\nproperty float y\nproperty float z\n\
                          property uchar red\nproperty uchar green\nproperty uchar blue\n";

    #[test]
    fn single_red_vertex() {
        let cloud = parse_ply(&ascii("0 0 0 255 0 0\n", XYZRGB, 1)).unwrap();
        assert_eq!(cloud.len(), 1);
        assert!(!cloud.is_colorless());
        assert_eq!(cloud.points()[0].color(), [1.0, 0.0, 0.0]);
    }

    #[test]
    fn missing_color_flags_colorless() {
        let props = "property float x\nproperty float y\nproperty float z\n";
        let cloud = parse_ply(&ascii("1 2 3\n", props, 1)).unwrap();
        assert!(cloud.is_colorless());
        assert_eq!(cloud.points()[0].color(), [0.0; 3]);
        assert_eq!(cloud.points()[0].position(), [1.0, 2.0, 3.0]);
    }

    #[test]
    fn property_order_and_unknown_properties() {
        let props = "property uchar blue\nproperty float intensity\nproperty double z\n\
                     property uchar red\nproperty float y\nproperty uchar green\nproperty float x\n";
        let cloud = parse_ply(&ascii("51 7.5 3 255 2 0 1\n", props, 1)).unwrap();
        let p = cloud.points()[0];
        assert_eq!(p.position(), [1.0, 2.0, 3.0]);
        assert_eq!(p.color_bytes(), [255, 0, 51]);
    }

    #[test]
    fn skips_leading_elements() {
        let text = "ply\nformat ascii 1.0\nelement camera 1\nproperty float f\n\
                    element vertex 1\nproperty float x\nproperty float y\nproperty float z\n\
                    element face 1\nproperty list uchar int vertex_indices\nend_header\n\
                    9.0\n1 2 3\n3 0 0 0\n";
        let cloud = parse_ply(text.as_bytes()).unwrap();
        assert_eq!(cloud.points()[0].position(), [1.0, 2.0, 3.0]);

        let mut bin = b"ply\nformat binary_little_endian 1.0\nelement face 1\n\
                        property list uchar int idx\nelement vertex 1\n\
                        property float x\nproperty float y\nproperty float z\nend_header\n"
            .to_vec();
        bin.push(2);
        bin.extend_from_slice(&7i32.to_le_bytes());
        bin.extend_from_slice(&8i32.to_le_bytes());
        for v in [4.0f32, 5.0, 6.0] {
            bin.extend_from_slice(&v.to_le_bytes());
        }
        let cloud = parse_ply(&bin).unwrap();
        assert_eq!(cloud.points()[0].position(), [4.0, 5.0, 6.0]);
    }

    #[test]
    fn header_errors() {
        assert!(matches!(
            parse_ply(b"plx\nformat ascii 1.0\nend_header\n"),
            Err(FormatError::MalformedHeader(_))
        ));
        assert!(matches!(
            parse_ply(b"ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\n"),
            Err(FormatError::MalformedHeader(_))
        ));
        let props = "property float x\nproperty float y\n";
        assert!(matches!(
            parse_ply(&ascii("1 2\n", props, 1)),
            Err(FormatError::MissingCoordinate("z"))
        ));
        let props = "property float x\nproperty float y\nproperty float128 z\n";
        assert!(matches!(
            parse_ply(&ascii("1 2 3\n", props, 1)),
            Err(FormatError::Unsupported(_))
        ));
        assert!(matches!(
            parse_ply(b"ply\nformat binary_big_endian 1.0\nelement vertex 0\nend_header\n"),
            Err(FormatError::Unsupported(_))
        ));
    }

    #[test]
    fn truncated_payloads() {
        assert!(matches!(
            parse_ply(&ascii("0 0 0 1 1 1\n", XYZRGB, 2)),
            Err(FormatError::Truncated {
                declared: 2,
                found: 1
            })
        ));
        let mut bin = b"ply\nformat binary_little_endian 1.0\nelement vertex 2\n\
                        property float x\nproperty float y\nproperty float z\nend_header\n"
            .to_vec();
        bin.extend_from_slice(&[0u8; 12 + 5]);
        assert!(matches!(
            parse_ply(&bin),
            Err(FormatError::Truncated {
                declared: 2,
                found: 1
            })
        ));
    }

    #[test]
    fn crlf_headers_are_accepted() {
        let text = "ply\r\nformat ascii 1.0\r\nelement vertex 1\r\nproperty float x\r\n\
                    property float y\r\nproperty float z\r\nend_header\r\n1 2 3\r\n";
        let cloud = parse_ply(text.as_bytes()).unwrap();
        assert_eq!(cloud.points()[0].position(), [1.0, 2.0, 3.0]);
    }

    #[test]
    fn empty_cloud_needs_permission() {
        let empty = PointCloud::default();
        assert!(matches!(
            encode_ply(&empty, PlyFormat::Ascii),
            Err(FormatError::EmptyCloud)
        ));
        let bytes = encode_ply(
            &empty,
            PlyWriteOptions {
                format: PlyFormat::BinaryLittleEndian,
                allow_empty: true,
            },
        )
        .unwrap();
        let text = String::from_utf8_lossy(&bytes);
        assert!(text.contains("element vertex 0"));
        assert_eq!(parse_ply(&bytes).unwrap().len(), 0);
    }

    #[test]
    fn color_half_writes_128() {
        let p = ColoredPoint::new([0.0; 3], [0.5, 0.5, 0.5]).unwrap();
        let bytes = encode_ply(&PointCloud::new(vec![p]), PlyFormat::Ascii).unwrap();
        assert!(String::from_utf8(bytes)
            .unwrap()
            .ends_with("0 0 0 128 128 128\n"));
    }
}
