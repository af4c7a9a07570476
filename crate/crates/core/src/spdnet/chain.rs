use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{bimap, logeig, reeig, SpdError, SpdMatrix, SymMatrix};
use crate::tensorio::{read_fmap, write_fmap, FeatureTensor, FormatError};

/// Default ReEig threshold.
pub const DEFAULT_EPSILON: f64 = 1e-4;

const STIEFEL_TOL: f64 = 1e-9;

/// One BiMap weight matrix `W` (`d_out x d_in`) with orthonormal rows.
#[derive(Debug, Clone, PartialEq)]
pub struct BiMapLayer {
    weights: DMatrix<f64>,
}

impl BiMapLayer {
    /// Accepts `w` if `||W W^T - I||_F <= 1e-9`.
    pub fn new(weights: DMatrix<f64>) -> Result<Self, SpdError> {
        let (d_out, d_in) = weights.shape();
        if d_out == 0 || d_out > d_in {
            return Err(SpdError::BadShape { d_out, d_in });
        }
        let error = (&weights * weights.transpose() - DMatrix::identity(d_out, d_out)).norm();
        if error > STIEFEL_TOL {
            return Err(SpdError::NotStiefel { error });
        }
        Ok(Self { weights })
    }

    /// Projects an arbitrary full-rank `d_out x d_in` matrix onto the
    /// Stiefel manifold (orthonormalizes its rows).
    pub fn orthonormalized(m: DMatrix<f64>) -> Result<Self, SpdError> {
        let (d_out, d_in) = m.shape();
        if d_out == 0 || d_out > d_in {
            return Err(SpdError::BadShape { d_out, d_in });
        }
        let qr = m.transpose().qr();
        let r = qr.r();
        let mut q = qr.q();
        for j in 0..d_out {
            if r[(j, j)] < 0.0 {
                q.column_mut(j).neg_mut();
            }
        }
        Self::new(q.transpose())
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn d_out(&self) -> usize {
        self.weights.nrows()
    }

    pub fn d_in(&self) -> usize {
        self.weights.ncols()
    }
}

/// Semi-orthogonal `d_out x d_in` weights from the QR factorization of a
/// seeded Gaussian matrix. Deterministic per seed.
pub fn init_stiefel(d_out: usize, d_in: usize, seed: u64) -> Result<BiMapLayer, SpdError> {
    if d_out == 0 || d_out > d_in {
        return Err(SpdError::BadShape { d_out, d_in });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(d_out, d_in, |_, _| StandardNormal.sample(&mut rng));
    BiMapLayer::orthonormalized(g)
}

/// Dimension schedule `d_0 > d_1 > ... > d_L` and ReEig threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdChainConfig {
    pub dims: Vec<usize>,
    pub epsilon: f64,
}

impl SpdChainConfig {
    pub fn new(dims: Vec<usize>, epsilon: f64) -> Result<Self, SpdError> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(SpdError::BadSchedule(format!(
                "{dims:?} must be non-empty and positive"
            )));
        }
        if dims.windows(2).any(|w| w[1] >= w[0]) {
            return Err(SpdError::BadSchedule(format!("{dims:?} is not strictly decreasing")));
        }
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(SpdError::BadSchedule(format!("epsilon {epsilon} must be positive")));
        }
        Ok(Self { dims, epsilon })
    }

    /// 512 -> 250 -> 100 -> 50, for VGG-16 `conv5` activations.
    pub fn vgg() -> Self {
        Self::new(vec![512, 250, 100, 50], DEFAULT_EPSILON).unwrap()
    }

    /// 256 -> 150 -> 100 -> 50, for AlexNet `conv5` activations.
    pub fn alexnet() -> Self {
        Self::new(vec![256, 150, 100, 50], DEFAULT_EPSILON).unwrap()
    }

    /// The VGG or AlexNet schedule for 512 or 256 channels, otherwise the
    /// degenerate schedule `[channels]` (ReEig and LogEig only).
    pub fn for_channels(channels: usize, epsilon: f64) -> Result<Self, SpdError> {
        let dims = match channels {
            512 => Self::vgg().dims,
            256 => Self::alexnet().dims,
            c => vec![c],
        };
        Self::new(dims, epsilon)
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }
}

/// Frozen BiMap weights for every stage of a schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdChain {
    pub config: SpdChainConfig,
    pub layers: Vec<BiMapLayer>,
}

impl SpdChain {
    pub fn new(config: SpdChainConfig, layers: Vec<BiMapLayer>) -> Result<Self, SpdError> {
        if layers.len() + 1 != config.dims.len() {
            return Err(SpdError::BadSchedule(format!(
                "{} stages need {} layers, got {}",
                config.dims.len(),
                config.dims.len() - 1,
                layers.len()
            )));
        }
        for (k, layer) in layers.iter().enumerate() {
            if layer.d_in() != config.dims[k] || layer.d_out() != config.dims[k + 1] {
                return Err(SpdError::ShapeMismatch {
                    expected: format!("{}x{}", config.dims[k + 1], config.dims[k]),
                    found: format!("{}x{}", layer.d_out(), layer.d_in()),
                });
            }
        }
        Ok(Self { config, layers })
    }

    /// Seeded Stiefel weights; stage `k` uses a seed derived from `seed` and `k`.
    pub fn seeded(config: SpdChainConfig, seed: u64) -> Result<Self, SpdError> {
        let layers = config
            .dims
            .windows(2)
            .enumerate()
            .map(|(k, w)| init_stiefel(w[1], w[0], layer_seed(seed, k)))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(config, layers)
    }

    pub fn reduce(&self, x: &SpdMatrix) -> Result<SymMatrix, SpdError> {
        spd_reduce(x, &self.config, &self.layers)
    }
}

fn layer_seed(seed: u64, k: usize) -> u64 {
    seed ^ (k as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// BiMap then ReEig per stage, LogEig once at the end. With a single-entry
/// schedule this is `logeig(reeig(x))`.
pub fn spd_reduce(x: &SpdMatrix, config: &SpdChainConfig, layers: &[BiMapLayer]) -> Result<SymMatrix, SpdError> {
    if x.dim() != config.input_dim() {
        return Err(SpdError::DimMismatch {
            a: x.dim(),
            b: config.input_dim(),
        });
    }
    if layers.len() + 1 != config.dims.len() {
        return Err(SpdError::BadSchedule(format!(
            "{} layers for schedule {:?}",
            layers.len(),
            config.dims
        )));
    }
    let mut current = reeig_if_unreduced(x, config, layers)?;
    for layer in layers {
        let projected = bimap(&current, layer)?;
        current = reeig(projected.as_sym(), config.epsilon)?;
    }
    logeig(&current)
}

fn reeig_if_unreduced(x: &SpdMatrix, config: &SpdChainConfig, layers: &[BiMapLayer]) -> Result<SpdMatrix, SpdError> {
    if layers.is_empty() {
        reeig(x.as_sym(), config.epsilon)
    } else {
        Ok(x.clone())
    }
}

/// Writes `<stem>.layer<k>.fmap` per stage plus a `<stem>.spd.txt` sidecar
/// holding the schedule and threshold.
pub fn save_chain(chain: &SpdChain, dir: &Path, stem: &str) -> Result<(), SpdError> {
    fs::create_dir_all(dir).map_err(|e| FormatError::io(dir, e))?;
    let mut sidecar = String::new();
    let dims: Vec<String> = chain.config.dims.iter().map(|d| d.to_string()).collect();
    let _ = writeln!(sidecar, "dims={}", dims.join(","));
    let _ = writeln!(sidecar, "epsilon={:?}", chain.config.epsilon);
    for (k, layer) in chain.layers.iter().enumerate() {
        let w = layer.weights();
        // FMAP is row-major
        let data: Vec<f64> = (0..w.nrows())
            .flat_map(|r| (0..w.ncols()).map(move |c| w[(r, c)]))
            .collect();
        let t = FeatureTensor::from_f64(vec![w.nrows(), w.ncols()], &data)?;
        let name = format!("{stem}.layer{k}.fmap");
        write_fmap(&t, dir.join(&name))?;
        let _ = writeln!(sidecar, "layer{k}={name}");
    }
    let path = dir.join(format!("{stem}.spd.txt"));
    fs::write(&path, sidecar).map_err(|e| FormatError::io(&path, e))?;
    Ok(())
}

/// Inverse of [`save_chain`]. Weights pass through `f32` on disk, so rows are
/// re-orthonormalized on load.
pub fn load_chain(dir: &Path, stem: &str) -> Result<SpdChain, SpdError> {
    let path = dir.join(format!("{stem}.spd.txt"));
    let text = fs::read_to_string(&path).map_err(|e| FormatError::io(&path, e))?;
    let mut dims = None;
    let mut epsilon = None;
    let mut files = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#')) {
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| SpdError::BadSchedule(format!("bad sidecar line {line:?}")))?;
        let bad = |_| SpdError::BadSchedule(format!("bad sidecar value {line:?}"));
        match key {
            "dims" => {
                dims = Some(
                    value
                        .split(',')
                        .map(|d| d.trim().parse::<usize>())
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(|_| SpdError::BadSchedule(format!("bad dims {value:?}")))?,
                )
            }
            "epsilon" => epsilon = Some(value.parse::<f64>().map_err(bad)?),
            k if k.starts_with("layer") => files.push(value.to_string()),
            _ => {}
        }
    }
    let config = SpdChainConfig::new(
        dims.ok_or_else(|| SpdError::BadSchedule("sidecar lacks dims".into()))?,
        epsilon.ok_or_else(|| SpdError::BadSchedule("sidecar lacks epsilon".into()))?,
    )?;
    let layers = files
        .iter()
        .map(|f| {
            let t = read_fmap(dir.join(f))?;
            let (rows, cols) = match t.dims() {
                &[r, c] => (r, c),
                other => {
                    return Err(SpdError::ShapeMismatch {
                        expected: "rank-2 weight tensor".into(),
                        found: format!("{other:?}"),
                    })
                }
            };
            let m = DMatrix::from_row_iterator(rows, cols, t.data().iter().map(|&v| v as f64));
            BiMapLayer::orthonormalized(m)
        })
        .collect::<Result<Vec<_>, _>>()?;
    SpdChain::new(config, layers)
}
