use rayon::prelude::*;

use super::{PipelineError, RunConfig, SHALLOW_STREAM};
use crate::bof::flatten;
use crate::covpool::{pool_regions, RegionSpec};
use crate::meshgeom::{estimate_curvatures, preprocess, PreprocessParams, TriMesh};
use crate::shallowfeat::{shallow_descriptors, PatchParams};
use crate::spdnet::{logeig, SpdChain, SpdMatrix};
use crate::tensorio::{read_fmap, read_mesh, DatasetManifest, FeatureTensor};

/// Flattened log-domain descriptors for every sample and stream:
/// `per_sample[sample][stream][descriptor]`, streams in `streams` order.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorSet {
    pub streams: Vec<String>,
    pub per_sample: Vec<Vec<Vec<Vec<f64>>>>,
}

impl DescriptorSet {
    /// Descriptors of one stream for the given samples, concatenated.
    pub fn pooled(&self, stream: usize, samples: &[usize]) -> Vec<Vec<f64>> {
        samples
            .iter()
            .flat_map(|&s| self.per_sample[s][stream].iter().cloned())
            .collect()
    }
}

/// 40 patch covariances of a raw scan: preprocessing, centring at the
/// vertex centroid, curvature estimation, patch sampling.
pub fn shallow_spd_descriptors(mesh: &TriMesh) -> Result<Vec<SpdMatrix>, PipelineError> {
    let cleaned = preprocess(mesh, &PreprocessParams::default())?;
    let c = cleaned.centroid();
    let identity = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let centred = cleaned.transformed(&identity, 1.0, [-c[0], -c[1], -c[2]]);
    let curved = estimate_curvatures(&centred)?;
    Ok(shallow_descriptors(&curved, &PatchParams::default())?)
}

/// Shallow stream descriptors: matrix logarithm of each ridge-regularized
/// patch covariance, flattened.
pub fn shallow_descriptors_for_mesh(mesh: &TriMesh) -> Result<Vec<Vec<f64>>, PipelineError> {
    shallow_spd_descriptors(mesh)?
        .iter()
        .map(|m| Ok(flatten(&logeig(m)?)))
        .collect()
}

/// Deep stream descriptors: region covariances reduced by `chain`, flattened.
pub fn deep_descriptors(
    tensor: &FeatureTensor,
    regions: &RegionSpec,
    chain: &SpdChain,
) -> Result<Vec<Vec<f64>>, PipelineError> {
    pool_regions(tensor, regions)?
        .iter()
        .map(|m| Ok(flatten(&chain.reduce(m)?)))
        .collect()
}

/// Reads every artifact named by `config.streams` and computes its
/// descriptors. Samples are processed in parallel; the result is in
/// manifest order and does not depend on the thread count.
pub fn extract_descriptors(manifest: &DatasetManifest, config: &RunConfig) -> Result<DescriptorSet, PipelineError> {
    config.validate()?;
    // one chain per deep stream, built from the first sample's channel count
    let mut chains: Vec<Option<SpdChain>> = Vec::with_capacity(config.streams.len());
    for stream in &config.streams {
        if stream == SHALLOW_STREAM {
            chains.push(None);
            continue;
        }
        let chain = match manifest.entries.first() {
            Some(first) => {
                let path = first
                    .tensor_paths
                    .get(stream)
                    .ok_or_else(|| PipelineError::MissingStreamArtifacts {
                        sample_id: first.sample_id.clone(),
                        stream: stream.clone(),
                    })?;
                let (c, _, _) = read_fmap(path)?.chw()?;
                Some(SpdChain::seeded(config.spd_schedule(c)?, config.seed)?)
            }
            None => None,
        };
        chains.push(chain);
    }
    let per_sample = manifest
        .entries
        .par_iter()
        .map(|entry| {
            config
                .streams
                .iter()
                .zip(&chains)
                .map(|(stream, chain)| {
                    if stream == SHALLOW_STREAM {
                        let path = entry
                            .mesh_path
                            .as_ref()
                            .ok_or_else(|| PipelineError::MissingStreamArtifacts {
                                sample_id: entry.sample_id.clone(),
                                stream: stream.clone(),
                            })?;
                        shallow_descriptors_for_mesh(&read_mesh(path)?)
                    } else {
                        let path =
                            entry
                                .tensor_paths
                                .get(stream)
                                .ok_or_else(|| PipelineError::MissingStreamArtifacts {
                                    sample_id: entry.sample_id.clone(),
                                    stream: stream.clone(),
                                })?;
                        let chain = chain.as_ref().expect("deep stream has a chain");
                        deep_descriptors(&read_fmap(path)?, &config.regions, chain)
                    }
                })
                .collect::<Result<Vec<_>, PipelineError>>()
                .map_err(|e| PipelineError::Sample {
                    sample_id: entry.sample_id.clone(),
                    source: Box::new(e),
                })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(DescriptorSet {
        streams: config.streams.clone(),
        per_sample,
    })
}
