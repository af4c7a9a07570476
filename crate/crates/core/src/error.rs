//! Crate-wide error type and the CLI exit-code mapping.

use crate::bof::BofError;
use crate::classify::ClassifyError;
use crate::covpool::PoolError;
use crate::meshgeom::GeometryError;
use crate::pipeline::PipelineError;
use crate::shallowfeat::PatchError;
use crate::spdnet::SpdError;
use crate::tensorio::FormatError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Patch(#[from] PatchError),
    #[error(transparent)]
    Pool(#[from] PoolError),
    #[error(transparent)]
    Spd(#[from] SpdError),
    #[error(transparent)]
    Bof(#[from] BofError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

impl Error {
    /// Process exit code. Each error family has its own code:
    ///
    /// | code | family |
    /// |------|--------|
    /// | 2 | usage, configuration |
    /// | 3 | file formats, I/O |
    /// | 4 | mesh geometry, patches |
    /// | 5 | SPD math, pooling |
    /// | 6 | codebooks |
    /// | 7 | classifier |
    /// | 8 | cross-validation setup |
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 2,
            Error::Format(_) => 3,
            Error::Geometry(_) | Error::Patch(_) => 4,
            Error::Spd(_) | Error::Pool(_) => 5,
            Error::Bof(_) => 6,
            Error::Classify(_) => 7,
            Error::Pipeline(p) => match p.root() {
                PipelineError::BadConfig(_) => 2,
                PipelineError::Io { .. } | PipelineError::BadSummary { .. } | PipelineError::Format(_) => 3,
                PipelineError::Geometry(_) | PipelineError::Patch(_) => 4,
                PipelineError::Spd(_) | PipelineError::Pool(_) => 5,
                PipelineError::Bof(_) => 6,
                PipelineError::Classify(_) => 7,
                PipelineError::TooFewSubjects { .. }
                | PipelineError::MissingStreamArtifacts { .. }
                | PipelineError::Sample { .. } => 8,
            },
        }
    }
}
