use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::PipelineError;
use crate::bof::CODEBOOK_SIZES;
use crate::covpool::RegionSpec;
use crate::spdnet::{SpdChainConfig, DEFAULT_EPSILON};
use crate::tensorio::parse_key_values;

/// Stream name of the mesh-based covariance descriptors.
pub const SHALLOW_STREAM: &str = "shallow";

/// Everything a cross-validation run depends on.
///
/// On disk this is a `key=value` file with `#` comments:
///
/// ```text
/// streams=vgg.depth,shallow
/// codebook_size=512
/// regions=1,2
/// spd_dims=auto
/// spd_epsilon=0.0001
/// seed=0
/// kmeans_seed=0
/// svm_c=1.0
/// folds=10
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Fused in this order. `shallow` reads the mesh; any other name is a
    /// deep stream read from the manifest's tensor of that name.
    pub streams: Vec<String>,
    pub codebook_size: usize,
    pub regions: RegionSpec,
    /// Explicit SPD schedule for deep streams; `None` picks the VGG or
    /// AlexNet schedule from the channel count (degenerate otherwise).
    pub spd_dims: Option<Vec<usize>>,
    pub spd_epsilon: f64,
    /// Seeds the fold shuffle, BiMap weights and SVM coordinate order.
    pub seed: u64,
    pub kmeans_seed: u64,
    pub kmeans_restarts: usize,
    pub svm_c: f64,
    pub folds: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            streams: vec![SHALLOW_STREAM.to_string()],
            codebook_size: 512,
            regions: RegionSpec::global(),
            spd_dims: None,
            spd_epsilon: DEFAULT_EPSILON,
            seed: 0,
            kmeans_seed: 0,
            kmeans_restarts: 1,
            svm_c: 1.0,
            folds: 10,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::BadConfig(m));
        if self.streams.is_empty() {
            return bad("at least one stream is required".into());
        }
        for (i, s) in self.streams.iter().enumerate() {
            if s.is_empty() || !s.chars().all(|c| c.is_ascii_alphanumeric() || "._-".contains(c)) {
                return bad(format!("stream name {s:?} must be non-empty [A-Za-z0-9._-]"));
            }
            if self.streams[..i].contains(s) {
                return bad(format!("stream {s} listed twice"));
            }
        }
        if !CODEBOOK_SIZES.contains(&self.codebook_size) {
            return bad(format!(
                "codebook size {} is not one of {CODEBOOK_SIZES:?}",
                self.codebook_size
            ));
        }
        if self.folds < 2 {
            return bad(format!("fold count {} must be at least 2", self.folds));
        }
        if !(self.svm_c > 0.0 && self.svm_c.is_finite()) {
            return bad(format!("svm_c {} must be positive", self.svm_c));
        }
        if self.kmeans_restarts == 0 {
            return bad("kmeans_restarts must be at least 1".into());
        }
        if let Some(dims) = &self.spd_dims {
            SpdChainConfig::new(dims.clone(), self.spd_epsilon)?;
        } else if !(self.spd_epsilon > 0.0 && self.spd_epsilon.is_finite()) {
            return bad(format!("spd_epsilon {} must be positive", self.spd_epsilon));
        }
        Ok(())
    }

    /// SPD schedule for a deep stream with `channels` input channels.
    pub fn spd_schedule(&self, channels: usize) -> Result<SpdChainConfig, PipelineError> {
        match &self.spd_dims {
            Some(dims) if dims[0] != channels => Err(PipelineError::BadConfig(format!(
                "spd_dims start at {} but the tensor has {channels} channels",
                dims[0]
            ))),
            Some(dims) => Ok(SpdChainConfig::new(dims.clone(), self.spd_epsilon)?),
            None => Ok(SpdChainConfig::for_channels(channels, self.spd_epsilon)?),
        }
    }

    pub fn parse(text: &str) -> Result<Self, PipelineError> {
        let kv = parse_key_values(text).map_err(PipelineError::BadConfig)?;
        let mut cfg = RunConfig::default();
        for (key, value) in &kv {
            let bad = |what: &str| PipelineError::BadConfig(format!("{key}={value}: {what}"));
            match key.as_str() {
                "streams" => cfg.streams = value.split(',').map(|s| s.trim().to_string()).collect(),
                "codebook_size" => cfg.codebook_size = value.parse().map_err(|_| bad("not an integer"))?,
                "regions" => cfg.regions = value.parse().map_err(|_| bad("expected levels like 1,2"))?,
                "spd_dims" => {
                    cfg.spd_dims = if value == "auto" {
                        None
                    } else {
                        Some(
                            value
                                .split(',')
                                .map(|d| d.trim().parse::<usize>())
                                .collect::<Result<_, _>>()
                                .map_err(|_| bad("expected `auto` or a list like 512,250,100,50"))?,
                        )
                    }
                }
                "spd_epsilon" => cfg.spd_epsilon = value.parse().map_err(|_| bad("not a number"))?,
                "seed" => cfg.seed = value.parse().map_err(|_| bad("not an integer"))?,
                "kmeans_seed" => cfg.kmeans_seed = value.parse().map_err(|_| bad("not an integer"))?,
                "kmeans_restarts" => cfg.kmeans_restarts = value.parse().map_err(|_| bad("not an integer"))?,
                "svm_c" => cfg.svm_c = value.parse().map_err(|_| bad("not a number"))?,
                "folds" => cfg.folds = value.parse().map_err(|_| bad("not an integer"))?,
                _ => return Err(bad("unknown key")),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path).map_err(|source| PipelineError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# facecov run configuration\n");
        let _ = writeln!(out, "streams={}", self.streams.join(","));
        let _ = writeln!(out, "codebook_size={}", self.codebook_size);
        let _ = writeln!(out, "regions={}", self.regions);
        match &self.spd_dims {
            Some(d) => {
                let parts: Vec<String> = d.iter().map(|v| v.to_string()).collect();
                let _ = writeln!(out, "spd_dims={}", parts.join(","));
            }
            None => out.push_str("spd_dims=auto\n"),
        }
        let _ = writeln!(out, "spd_epsilon={:?}", self.spd_epsilon);
        let _ = writeln!(out, "seed={}", self.seed);
        let _ = writeln!(out, "kmeans_seed={}", self.kmeans_seed);
        let _ = writeln!(out, "kmeans_restarts={}", self.kmeans_restarts);
        let _ = writeln!(out, "svm_c={:?}", self.svm_c);
        let _ = writeln!(out, "folds={}", self.folds);
        out
    }
}
