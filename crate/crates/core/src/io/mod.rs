//! File I/O: point clouds (PLY and whitespace XYZ text), result records and
//! generic JSON documents.

pub mod ply;
pub mod result;

pub use ply::{read_ply, write_ply, PlyEncoding};
pub use result::{ConfigEcho, RegistrationRecord};

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::PointCloud;

/// Reads a point cloud, sniffing the format: a `ply` magic selects the PLY
/// parser, anything else is treated as whitespace-separated XYZ text.
pub fn read_point_cloud(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(b"ply\n") || bytes.starts_with(b"ply\r\n") {
        read_ply(&bytes)
    } else {
        read_xyz_text(&bytes)
    }
}

/// Parses `x y z` per line; blank lines and `#` comments are skipped, extra
/// columns are ignored.
pub fn read_xyz_text(bytes: &[u8]) -> Result<PointCloud> {
    let text = std::str::from_utf8(bytes).map_err(|_| Error::TextParse {
        msg: "file is not valid UTF-8".into(),
        line: 0,
    })?;
    let mut coords = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut values = [0.0f64; 3];
        let mut tokens = line.split_whitespace();
        for value in values.iter_mut() {
            let tok = tokens.next().ok_or_else(|| Error::TextParse {
                msg: "expected 3 coordinates".into(),
                line: i + 1,
            })?;
            *value = tok.parse().map_err(|_| Error::TextParse {
                msg: format!("invalid float '{tok}'"),
                line: i + 1,
            })?;
        }
        coords.push(values);
    }
    PointCloud::from_coords(coords)
}

pub fn write_point_cloud(
    path: impl AsRef<Path>,
    pc: &PointCloud,
    encoding: PlyEncoding,
) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, write_ply(pc, encoding)).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_slice(&bytes)?)
}
