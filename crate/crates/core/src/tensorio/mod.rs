//! File formats: FMAP tensors, OBJ/PLY meshes and dataset manifests.

mod fmap;
mod keyvalue;
mod manifest;
mod mesh_io;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use fmap::{read_fmap, write_fmap, FeatureTensor};
pub use keyvalue::parse_key_values;
pub use manifest::{parse_manifest_lines, read_manifest, DatasetManifest, Label, ManifestEntry};
pub use mesh_io::{obj_string, parse_obj, parse_ply, read_mesh, write_obj};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("not an FMAP file (bad magic)")]
    BadMagic,
    #[error("unsupported FMAP version {0}")]
    UnsupportedVersion(u32),
    #[error("FMAP header is truncated")]
    TruncatedHeader,
    #[error("invalid tensor extents {0:?}")]
    BadDims(Vec<usize>),
    #[error("tensor header declares {expected} values but the payload holds {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("non-finite value at flat index {index}")]
    NonFiniteValue { index: usize },
    #[error("expected a rank-{expected} tensor, got rank {found}")]
    UnexpectedRank { expected: usize, found: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: face has {corners} corners, only triangles are supported")]
    NonTriangleFace { line: usize, corners: usize },
    #[error("line {line}: face index {index} does not name a vertex")]
    DanglingIndex { line: usize, index: i64 },
    #[error("binary PLY ({0}) is not supported, convert to ascii")]
    BinaryPly(String),
    #[error("line {line}: duplicate sample id {sample_id:?}")]
    DuplicateSampleId { line: usize, sample_id: String },
    #[error("line {line}: unknown expression label {label:?}")]
    UnknownLabel { line: usize, label: String },
    #[error("line {line}: missing field {field}")]
    MissingField { line: usize, field: &'static str },
    #[error("line {line}: path {path:?} referenced twice")]
    DuplicatePath { line: usize, path: PathBuf },
}

impl FormatError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        FormatError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
