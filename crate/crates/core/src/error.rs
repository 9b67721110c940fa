//! Error type shared by all modules.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty point cloud")]
    EmptyCloud,

    #[error("non-finite coordinate at point {index}")]
    NonFinite { index: usize },

    #[error("degenerate geometry: all {count} points are identical")]
    DegenerateGeometry { count: usize },

    #[error("cloud not positive-shifted: point {index} has coordinate {value} on axis {axis}")]
    NotPositiveShifted {
        index: usize,
        axis: usize,
        value: f64,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "volume budget exceeded: padded volume needs {cells} cells (cap {cap}); \
         retry with voxel resolution >= {suggested_vr:.4} m"
    )]
    VolumeBudget {
        cells: usize,
        cap: usize,
        suggested_vr: f64,
    },

    #[error("target volume exceeds padded source on axis {axis}: {target_dim} > {source_dim}")]
    TargetTooLarge {
        axis: usize,
        target_dim: usize,
        source_dim: usize,
    },

    #[error("rotation grid bound undefined for a single-candidate grid")]
    BoundUndefined,

    #[error("no overlap at initialization")]
    NoOverlapAtInit,

    #[error("non-rotation input: {0}")]
    NonRotation(String),

    #[error("evaluation mismatch: {0}")]
    EvalMismatch(String),

    #[error("point {index} coincides with the viewpoint")]
    PointAtViewpoint { index: usize },

    #[error("no usable viewpoints")]
    NoUsableViewpoints,

    #[error("benchmark generation produced zero pairs")]
    NoPairs,

    #[error("malformed PLY{}: {msg}", offset_suffix(.offset))]
    PlyParse { msg: String, offset: Option<u64> },

    #[error("unsupported PLY format: {0}")]
    PlyUnsupported(String),

    #[error("malformed point file at line {line}: {msg}")]
    TextParse { msg: String, line: usize },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

fn offset_suffix(offset: &Option<u64>) -> String {
    match offset {
        Some(o) => format!(" at byte {o}"),
        None => String::new(),
    }
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
