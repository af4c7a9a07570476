//! End-to-end orchestration: run configuration, per-sample descriptor
//! extraction, subject-disjoint cross-validation, codebook sweeps, reports
//! and a synthetic dataset generator.

mod config;
mod cv;
mod features;
mod model;
mod report;
mod synth;

use std::path::PathBuf;

use thiserror::Error;

pub use config::{RunConfig, SHALLOW_STREAM};
pub use cv::{assign_folds, run_cv, run_cv_on, sweep_codebooks, sweep_codebooks_on, CvResult, FoldReport, Prediction};
pub use features::{
    deep_descriptors, extract_descriptors, shallow_descriptors_for_mesh, shallow_spd_descriptors, DescriptorSet,
};
pub use model::{evaluate, load_trained, save_trained, train_full, TrainedModel};
pub use report::{format_fold, format_report, format_sweep, parse_summary, summary_text, write_summary};
pub use synth::{generate_synthetic, SynthParams, SYNTH_STREAM};

use crate::bof::BofError;
use crate::classify::ClassifyError;
use crate::covpool::PoolError;
use crate::meshgeom::GeometryError;
use crate::shallowfeat::PatchError;
use crate::spdnet::SpdError;
use crate::tensorio::FormatError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{subjects} subjects cannot fill {folds} folds")]
    TooFewSubjects { subjects: usize, folds: usize },
    #[error("sample {sample_id} has no artifact for stream `{stream}`")]
    MissingStreamArtifacts { sample_id: String, stream: String },
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error("summary line {line}: {message}")]
    BadSummary { line: usize, message: String },
    #[error("sample {sample_id}: {source}")]
    Sample {
        sample_id: String,
        #[source]
        source: Box<PipelineError>,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
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
}

impl PipelineError {
    /// Innermost error, looking through per-sample context.
    pub fn root(&self) -> &PipelineError {
        match self {
            PipelineError::Sample { source, .. } => source.root(),
            other => other,
        }
    }
}
