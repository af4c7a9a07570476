use std::fs;
use std::path::Path;

use super::{extract_descriptors, DescriptorSet, FoldReport, PipelineError, Prediction, RunConfig, SHALLOW_STREAM};
use crate::bof::{fuse, load_codebook, save_codebook, Codebook, CodebookKind, KMeansParams};
use crate::classify::{load_model, save_model, train_with_layout, LinearModel, SvmParams};
use crate::tensorio::{DatasetManifest, FormatError, Label};

/// Codebooks for every stream plus the classifier over their fused
/// histograms.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub config: RunConfig,
    pub codebooks: Vec<Codebook>,
    pub svm: LinearModel,
}

impl TrainedModel {
    /// Fused, per-block L1-normalized histogram of one sample's descriptors
    /// (`sample[stream][descriptor]`).
    pub fn fused(&self, sample: &[Vec<Vec<f64>>]) -> Result<Vec<f64>, PipelineError> {
        fuse_sample(&self.config.streams, &self.codebooks, sample)
    }

    pub fn predict(&self, sample: &[Vec<Vec<f64>>]) -> Result<Label, PipelineError> {
        Ok(self.svm.predict(&self.fused(sample)?)?)
    }
}

fn fuse_sample(layout: &[String], codebooks: &[Codebook], sample: &[Vec<Vec<f64>>]) -> Result<Vec<f64>, PipelineError> {
    let named = codebooks
        .iter()
        .zip(sample)
        .map(|(cb, descs)| Ok((cb.stream.clone(), cb.quantize(descs)?)))
        .collect::<Result<Vec<_>, PipelineError>>()?;
    Ok(fuse(layout, &named)?)
}

fn kmeans_seed(config: &RunConfig, stream: usize) -> u64 {
    config.kmeans_seed ^ (stream as u64).wrapping_mul(0xA076_1D64_78BD_642F)
}

/// Trains codebooks and the SVM on the samples at `train`.
pub(crate) fn fit(
    manifest: &DatasetManifest,
    descriptors: &DescriptorSet,
    train: &[usize],
    config: &RunConfig,
) -> Result<TrainedModel, PipelineError> {
    let codebooks = config
        .streams
        .iter()
        .enumerate()
        .map(|(s, name)| {
            let kind = if name == SHALLOW_STREAM {
                CodebookKind::Shallow
            } else {
                CodebookKind::Deep
            };
            let params = KMeansParams {
                restarts: config.kmeans_restarts,
                ..KMeansParams::new(config.codebook_size, kmeans_seed(config, s))
            };
            Ok(Codebook::train(
                kind,
                name.clone(),
                &descriptors.pooled(s, train),
                &params,
            )?)
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;
    let samples = train
        .iter()
        .map(|&i| {
            let x = fuse_sample(&config.streams, &codebooks, &descriptors.per_sample[i])?;
            Ok((x, manifest.entries[i].label))
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;
    let params = SvmParams {
        c: config.svm_c,
        seed: config.seed,
        ..SvmParams::default()
    };
    let svm = train_with_layout(&samples, &params, config.streams.clone())?;
    Ok(TrainedModel {
        config: config.clone(),
        codebooks,
        svm,
    })
}

/// Trains on every sample of `manifest`.
pub fn train_full(manifest: &DatasetManifest, config: &RunConfig) -> Result<TrainedModel, PipelineError> {
    let descriptors = extract_descriptors(manifest, config)?;
    let all: Vec<usize> = (0..manifest.len()).collect();
    fit(manifest, &descriptors, &all, config)
}

/// Scores a trained model on every sample of `manifest`, as fold 0.
pub fn evaluate(model: &TrainedModel, manifest: &DatasetManifest) -> Result<FoldReport, PipelineError> {
    let descriptors = extract_descriptors(manifest, &model.config)?;
    let predictions = manifest
        .entries
        .iter()
        .zip(&descriptors.per_sample)
        .map(|(e, d)| {
            Ok(Prediction {
                sample_id: e.sample_id.clone(),
                truth: e.label,
                predicted: model.predict(d)?,
            })
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;
    let mut classes = manifest.classes();
    classes.extend(model.svm.classes.iter().copied());
    classes.sort();
    classes.dedup();
    let mut subjects: Vec<String> = manifest.entries.iter().map(|e| e.subject_id.clone()).collect();
    subjects.sort();
    subjects.dedup();
    Ok(FoldReport::new(0, classes, subjects, predictions))
}

/// Writes `config.txt`, `stream<i>.codebook.*` and `model.svm.*` into `dir`.
pub fn save_trained(model: &TrainedModel, dir: &Path) -> Result<(), PipelineError> {
    fs::create_dir_all(dir).map_err(|e| FormatError::io(dir, e))?;
    let path = dir.join("config.txt");
    fs::write(&path, model.config.to_text()).map_err(|e| FormatError::io(&path, e))?;
    for (i, cb) in model.codebooks.iter().enumerate() {
        save_codebook(cb, &dir.join(format!("stream{i}")))?;
    }
    save_model(&model.svm, &dir.join("model"))?;
    Ok(())
}

/// Inverse of [`save_trained`]. Codebooks and weights come back at f32
/// precision.
pub fn load_trained(dir: &Path) -> Result<TrainedModel, PipelineError> {
    let config = RunConfig::read(&dir.join("config.txt"))?;
    let codebooks = (0..config.streams.len())
        .map(|i| load_codebook(&dir.join(format!("stream{i}"))))
        .collect::<Result<Vec<_>, _>>()?;
    for (cb, name) in codebooks.iter().zip(&config.streams) {
        if &cb.stream != name {
            return Err(PipelineError::BadConfig(format!(
                "codebook for `{}` found where `{name}` was expected",
                cb.stream
            )));
        }
    }
    let svm = load_model(&dir.join("model"))?;
    if svm.layout != config.streams {
        return Err(PipelineError::BadConfig(format!(
            "classifier was trained on streams {:?}, config lists {:?}",
            svm.layout, config.streams
        )));
    }
    Ok(TrainedModel { config, codebooks, svm })
}
