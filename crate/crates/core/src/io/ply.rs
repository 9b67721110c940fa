//! PLY point-cloud reader/writer. Reads ascii and binary little-endian
//! files with float32/float64 vertex x/y/z (other properties and elements
//! are skipped); writes float64 so round trips are bit-exact.

use nalgebra::Point3;

use crate::error::{Error, Result};
use crate::geometry::PointCloud;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PlyEncoding {
    #[default]
    BinaryLittleEndian,
    Ascii,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ScalarType {
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
    fn parse(token: &str) -> Option<ScalarType> {
        Some(match token {
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

    fn size(self) -> usize {
        match self {
            ScalarType::I8 | ScalarType::U8 => 1,
            ScalarType::I16 | ScalarType::U16 => 2,
            ScalarType::I32 | ScalarType::U32 | ScalarType::F32 => 4,
            ScalarType::F64 => 8,
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar { ty: ScalarType, name: String },
    List { count_ty: ScalarType, item_ty: ScalarType },
}

#[derive(Debug, Clone)]
struct ElementDecl {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

struct Header {
    encoding: PlyEncoding,
    elements: Vec<ElementDecl>,
    payload_offset: usize,
}

fn parse_err(msg: impl Into<String>, offset: usize) -> Error {
    Error::PlyParse {
        msg: msg.into(),
        offset: Some(offset as u64),
    }
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    let mut offset = 0usize;
    let mut next_line = || -> Result<(String, usize)> {
        let start = offset;
        if start >= bytes.len() {
            return Err(parse_err("header ended before end_header", start));
        }
        let rest = &bytes[start..];
        let end = rest
            .iter()
            .position(|&b| b == b'\n')
            .map(|p| start + p)
            .unwrap_or(bytes.len());
        let line = std::str::from_utf8(&bytes[start..end])
            .map_err(|_| parse_err("header is not valid UTF-8", start))?
            .trim_end_matches('\r')
            .to_string();
        offset = (end + 1).min(bytes.len() + 1);
        Ok((line, start))
    };

    let (magic, at) = next_line()?;
    if magic.trim() != "ply" {
        return Err(parse_err("missing 'ply' magic", at));
    }

    let mut encoding: Option<PlyEncoding> = None;
    let mut elements: Vec<ElementDecl> = Vec::new();
    loop {
        let (line, at) = next_line()?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.first().copied() {
            None => continue,
            Some("comment") | Some("obj_info") => continue,
            Some("format") => {
                if tokens.len() < 2 {
                    return Err(parse_err("malformed format line", at));
                }
                encoding = Some(match tokens[1] {
                    "ascii" => PlyEncoding::Ascii,
                    "binary_little_endian" => PlyEncoding::BinaryLittleEndian,
                    "binary_big_endian" => {
                        return Err(Error::PlyUnsupported(
                            "binary_big_endian is not supported".into(),
                        ))
                    }
                    other => {
                        return Err(parse_err(format!("unknown format '{other}'"), at));
                    }
                });
            }
            Some("element") => {
                if tokens.len() != 3 {
                    return Err(parse_err("malformed element line", at));
                }
                let count: usize = tokens[2]
                    .parse()
                    .map_err(|_| parse_err("element count is not an integer", at))?;
                elements.push(ElementDecl {
                    name: tokens[1].to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            Some("property") => {
                let element = elements
                    .last_mut()
                    .ok_or_else(|| parse_err("property before any element", at))?;
                if tokens.get(1).copied() == Some("list") {
                    if tokens.len() != 5 {
                        return Err(parse_err("malformed list property", at));
                    }
                    let count_ty = ScalarType::parse(tokens[2])
                        .ok_or_else(|| parse_err("unknown list count type", at))?;
                    let item_ty = ScalarType::parse(tokens[3])
                        .ok_or_else(|| parse_err("unknown list item type", at))?;
                    element.properties.push(Property::List { count_ty, item_ty });
                } else {
                    if tokens.len() != 3 {
                        return Err(parse_err("malformed property line", at));
                    }
                    let ty = ScalarType::parse(tokens[1])
                        .ok_or_else(|| parse_err("unknown property type", at))?;
                    element.properties.push(Property::Scalar {
                        ty,
                        name: tokens[2].to_string(),
                    });
                }
            }
            Some("end_header") => break,
            Some(other) => {
                return Err(parse_err(format!("unexpected header keyword '{other}'"), at));
            }
        }
    }

    Ok(Header {
        encoding: encoding.ok_or_else(|| parse_err("header has no format line", 0))?,
        elements,
        payload_offset: offset.min(bytes.len()),
    })
}

fn xyz_columns(element: &ElementDecl) -> Result<[usize; 3]> {
    let mut cols = [usize::MAX; 3];
    for (i, p) in element.properties.iter().enumerate() {
        if let Property::Scalar { ty, name } = p {
            let slot = match name.as_str() {
                "x" => 0,
                "y" => 1,
                "z" => 2,
                _ => continue,
            };
            if !matches!(ty, ScalarType::F32 | ScalarType::F64) {
                return Err(Error::PlyUnsupported(format!(
                    "vertex property '{name}' must be float or double"
                )));
            }
            cols[slot] = i;
        }
    }
    if cols.contains(&usize::MAX) {
        return Err(Error::PlyParse {
            msg: "vertex element lacks x/y/z properties".into(),
            offset: None,
        });
    }
    Ok(cols)
}

pub fn read_ply(bytes: &[u8]) -> Result<PointCloud> {
    let header = parse_header(bytes)?;
    let vertex_pos = header
        .elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| Error::PlyParse {
            msg: "no vertex element".into(),
            offset: None,
        })?;
    let cols = xyz_columns(&header.elements[vertex_pos])?;

    match header.encoding {
        PlyEncoding::BinaryLittleEndian => {
            read_binary_vertices(bytes, &header, vertex_pos, cols)
        }
        PlyEncoding::Ascii => read_ascii_vertices(bytes, &header, vertex_pos, cols),
    }
}

fn take<'a>(bytes: &'a [u8], pos: &mut usize, n: usize) -> Result<&'a [u8]> {
    let start = *pos;
    let end = start
        .checked_add(n)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| parse_err("payload truncated", start))?;
    *pos = end;
    Ok(&bytes[start..end])
}

fn read_count(bytes: &[u8], pos: &mut usize, ty: ScalarType) -> Result<usize> {
    let raw = take(bytes, pos, ty.size())?;
    Ok(match ty {
        ScalarType::I8 => raw[0] as i8 as usize,
        ScalarType::U8 => raw[0] as usize,
        ScalarType::I16 => i16::from_le_bytes(raw.try_into().unwrap()) as usize,
        ScalarType::U16 => u16::from_le_bytes(raw.try_into().unwrap()) as usize,
        ScalarType::I32 => i32::from_le_bytes(raw.try_into().unwrap()) as usize,
        ScalarType::U32 => u32::from_le_bytes(raw.try_into().unwrap()) as usize,
        ScalarType::F32 => f32::from_le_bytes(raw.try_into().unwrap()) as usize,
        ScalarType::F64 => f64::from_le_bytes(raw.try_into().unwrap()) as usize,
    })
}

fn read_binary_vertices(
    bytes: &[u8],
    header: &Header,
    vertex_pos: usize,
    cols: [usize; 3],
) -> Result<PointCloud> {
    let mut pos = header.payload_offset;
    let mut points: Vec<Point3<f64>> = Vec::new();
    for (ei, element) in header.elements.iter().enumerate() {
        if ei > vertex_pos {
            break;
        }
        let is_vertex = ei == vertex_pos;
        if is_vertex {
            points.reserve(element.count);
        }
        for _ in 0..element.count {
            let mut coords = [0.0f64; 3];
            for (pi, prop) in element.properties.iter().enumerate() {
                match prop {
                    Property::Scalar { ty, .. } => {
                        if is_vertex && cols.contains(&pi) {
                            let slot = cols.iter().position(|&c| c == pi).unwrap();
                            let raw = take(bytes, &mut pos, ty.size())?;
                            coords[slot] = match ty {
                                ScalarType::F32 => {
                                    f32::from_le_bytes(raw.try_into().unwrap()) as f64
                                }
                                ScalarType::F64 => f64::from_le_bytes(raw.try_into().unwrap()),
                                _ => unreachable!("xyz columns are float typed"),
                            };
                        } else {
                            take(bytes, &mut pos, ty.size())?;
                        }
                    }
                    Property::List { count_ty, item_ty } => {
                        let n = read_count(bytes, &mut pos, *count_ty)?;
                        take(bytes, &mut pos, n * item_ty.size())?;
                    }
                }
            }
            if is_vertex {
                points.push(Point3::new(coords[0], coords[1], coords[2]));
            }
        }
    }
    PointCloud::new(points)
}

fn read_ascii_vertices(
    bytes: &[u8],
    header: &Header,
    vertex_pos: usize,
    cols: [usize; 3],
) -> Result<PointCloud> {
    let payload = std::str::from_utf8(&bytes[header.payload_offset..])
        .map_err(|_| parse_err("ascii payload is not valid UTF-8", header.payload_offset))?;
    let base = header.payload_offset;
    // Token offsets recovered from subslice positions within the payload.
    let tokens: Vec<(&str, usize)> = payload
        .split_whitespace()
        .map(|t| (t, t.as_ptr() as usize - payload.as_ptr() as usize + base))
        .collect();
    let mut cursor = 0usize;
    let mut next_token = |what: &str| -> Result<(&str, usize)> {
        let item = tokens.get(cursor).copied().ok_or_else(|| {
            parse_err(format!("payload truncated, expected {what}"), bytes.len())
        })?;
        cursor += 1;
        Ok(item)
    };

    let mut points: Vec<Point3<f64>> = Vec::new();
    for (ei, element) in header.elements.iter().enumerate() {
        if ei > vertex_pos {
            break;
        }
        let is_vertex = ei == vertex_pos;
        for _ in 0..element.count {
            let mut coords = [0.0f64; 3];
            for (pi, prop) in element.properties.iter().enumerate() {
                match prop {
                    Property::Scalar { .. } => {
                        let (tok, at) = next_token("a scalar value")?;
                        if is_vertex && cols.contains(&pi) {
                            let slot = cols.iter().position(|&c| c == pi).unwrap();
                            coords[slot] = tok
                                .parse::<f64>()
                                .map_err(|_| parse_err("invalid float", at))?;
                        }
                    }
                    Property::List { .. } => {
                        let (tok, at) = next_token("a list count")?;
                        let n: usize = tok
                            .parse()
                            .map_err(|_| parse_err("invalid list count", at))?;
                        for _ in 0..n {
                            next_token("a list item")?;
                        }
                    }
                }
            }
            if is_vertex {
                points.push(Point3::new(coords[0], coords[1], coords[2]));
            }
        }
    }
    PointCloud::new(points)
}

pub fn write_ply(pc: &PointCloud, encoding: PlyEncoding) -> Vec<u8> {
    let format = match encoding {
        PlyEncoding::Ascii => "ascii",
        PlyEncoding::BinaryLittleEndian => "binary_little_endian",
    };
    let mut out = format!(
        "ply\nformat {format} 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nend_header\n",
        pc.len()
    )
    .into_bytes();
    match encoding {
        PlyEncoding::Ascii => {
            for p in pc.iter() {
                out.extend_from_slice(format!("{} {} {}\n", p.x, p.y, p.z).as_bytes());
            }
        }
        PlyEncoding::BinaryLittleEndian => {
            for p in pc.iter() {
                out.extend_from_slice(&p.x.to_le_bytes());
                out.extend_from_slice(&p.y.to_le_bytes());
                out.extend_from_slice(&p.z.to_le_bytes());
            }
        }
    }
    out
}
