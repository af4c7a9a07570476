//! One-vs-one linear SVM.
//!
//! Each class pair is an L1-loss (hinge) SVM solved in the dual by
//! coordinate descent, with the bias folded in as a constant extra feature.
//! Every coordinate step minimizes the dual exactly, so the dual objective
//! never increases. Training stops once the duality gap, primal plus dual,
//! falls below `tolerance` times the primal objective.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::tensorio::{parse_key_values, read_fmap, write_fmap, FeatureTensor, FormatError, Label};

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("training data has a single class ({0})")]
    SingleClass(Label),
    #[error("no training samples")]
    NoSamples,
    #[error("all training vectors are identical, classes cannot be separated")]
    DegenerateFeatures,
    #[error("vector length {found} does not match model length {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("C must be positive and finite, got {0}")]
    BadC(f64),
    #[error("model sidecar {path}: {message}")]
    Sidecar { path: PathBuf, message: String },
    #[error(transparent)]
    Format(#[from] FormatError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmParams {
    pub c: f64,
    pub seed: u64,
    /// Relative duality gap that ends training.
    pub tolerance: f64,
    pub max_epochs: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            seed: 0,
            tolerance: 1e-6,
            max_epochs: 2000,
        }
    }
}

/// Binary model for the pair `(positive, negative)` of class indices.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryModel {
    pub positive: usize,
    pub negative: usize,
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Dual objective `1/2 ||w||^2 - sum(alpha)` (bias included in `w`)
    /// at the end of each epoch.
    pub dual_trace: Vec<f64>,
}

impl BinaryModel {
    pub fn decision(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.bias
    }

    /// `1/2 (||w||^2 + b^2) + C * sum(hinge)` over the pair's samples.
    pub fn primal_objective(&self, samples: &[(Vec<f64>, Label)], classes: &[Label], c: f64) -> f64 {
        let reg = 0.5 * (dot(&self.weights, &self.weights) + self.bias * self.bias);
        let loss: f64 = samples
            .iter()
            .filter_map(|(x, l)| {
                if *l == classes[self.positive] {
                    Some((x, 1.0))
                } else if *l == classes[self.negative] {
                    Some((x, -1.0))
                } else {
                    None
                }
            })
            .map(|(x, y)| (1.0 - y * self.decision(x)).max(0.0))
            .sum();
        reg + c * loss
    }
}

/// One binary model per class pair `(i, j)`, `i < j`, in lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub classes: Vec<Label>,
    pub c: f64,
    /// Names of the fused streams, in block order.
    pub layout: Vec<String>,
    pub pairs: Vec<BinaryModel>,
    dim: usize,
}

impl LinearModel {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Majority vote; ties go to the larger summed signed margin, then to
    /// the earlier class.
    pub fn predict(&self, x: &[f64]) -> Result<Label, ClassifyError> {
        Ok(self.classes[self.predict_index(x)?])
    }

    pub fn predict_index(&self, x: &[f64]) -> Result<usize, ClassifyError> {
        if x.len() != self.dim {
            return Err(ClassifyError::LengthMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        let k = self.classes.len();
        let mut votes = vec![0usize; k];
        let mut margins = vec![0.0; k];
        for m in &self.pairs {
            let f = m.decision(x);
            if f > 0.0 {
                votes[m.positive] += 1;
            } else if f < 0.0 {
                votes[m.negative] += 1;
            }
            margins[m.positive] += f;
            margins[m.negative] -= f;
        }
        let mut best = 0;
        for i in 1..k {
            if votes[i] > votes[best] || (votes[i] == votes[best] && margins[i] > margins[best]) {
                best = i;
            }
        }
        Ok(best)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Trains the one-vs-one model. Classes are ordered by [`Label`] order.
pub fn train(samples: &[(Vec<f64>, Label)], params: &SvmParams) -> Result<LinearModel, ClassifyError> {
    train_with_layout(samples, params, Vec::new())
}

pub fn train_with_layout(
    samples: &[(Vec<f64>, Label)],
    params: &SvmParams,
    layout: Vec<String>,
) -> Result<LinearModel, ClassifyError> {
    if !(params.c > 0.0 && params.c.is_finite()) {
        return Err(ClassifyError::BadC(params.c));
    }
    let Some((first, _)) = samples.first() else {
        return Err(ClassifyError::NoSamples);
    };
    let dim = first.len();
    if let Some((x, _)) = samples.iter().find(|(x, _)| x.len() != dim) {
        return Err(ClassifyError::LengthMismatch {
            expected: dim,
            found: x.len(),
        });
    }
    let mut classes: Vec<Label> = samples.iter().map(|s| s.1).collect();
    classes.sort();
    classes.dedup();
    if classes.len() < 2 {
        return Err(ClassifyError::SingleClass(classes[0]));
    }
    if samples.iter().all(|(x, _)| x == first) {
        return Err(ClassifyError::DegenerateFeatures);
    }
    let pair_list: Vec<(usize, usize)> = (0..classes.len())
        .flat_map(|i| (i + 1..classes.len()).map(move |j| (i, j)))
        .collect();
    let pairs = pair_list
        .par_iter()
        .enumerate()
        .map(|(p, &(i, j))| {
            let subset: Vec<(&[f64], f64)> = samples
                .iter()
                .filter_map(|(x, l)| {
                    if *l == classes[i] {
                        Some((x.as_slice(), 1.0))
                    } else if *l == classes[j] {
                        Some((x.as_slice(), -1.0))
                    } else {
                        None
                    }
                })
                .collect();
            let seed = params.seed ^ (p as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            let (w, b, dual_trace) = dual_cd(&subset, dim, params, seed);
            BinaryModel {
                positive: i,
                negative: j,
                weights: w,
                bias: b,
                dual_trace,
            }
        })
        .collect();
    Ok(LinearModel {
        classes,
        c: params.c,
        layout,
        pairs,
        dim,
    })
}

/// Dual coordinate descent for one binary problem; returns `(w, b, trace)`.
fn dual_cd(data: &[(&[f64], f64)], dim: usize, params: &SvmParams, seed: u64) -> (Vec<f64>, f64, Vec<f64>) {
    let n = data.len();
    let c = params.c;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut alpha = vec![0.0; n];
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    // diagonal of Q with the bias feature
    let qii: Vec<f64> = data.iter().map(|(x, _)| dot(x, x) + 1.0).collect();
    let mut order: Vec<usize> = (0..n).collect();
    let mut trace = Vec::new();
    for _ in 0..params.max_epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let (x, y) = data[i];
            let g = y * (dot(&w, x) + b) - 1.0;
            let pg = if alpha[i] == 0.0 {
                g.min(0.0)
            } else if alpha[i] == c {
                g.max(0.0)
            } else {
                g
            };
            if pg == 0.0 {
                continue;
            }
            let new = (alpha[i] - g / qii[i]).clamp(0.0, c);
            let delta = (new - alpha[i]) * y;
            alpha[i] = new;
            if delta != 0.0 {
                for (wk, xk) in w.iter_mut().zip(x.iter()) {
                    *wk += delta * xk;
                }
                b += delta;
            }
        }
        let reg = 0.5 * (dot(&w, &w) + b * b);
        let dual = reg - alpha.iter().sum::<f64>();
        trace.push(dual);
        let hinge: f64 = data.iter().map(|(x, y)| (1.0 - y * (dot(&w, x) + b)).max(0.0)).sum();
        let primal = reg + c * hinge;
        // weak duality keeps the gap non-negative up to rounding
        if primal + dual <= params.tolerance * primal.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    (w, b, trace)
}

fn sidecar_path(stem: &Path) -> PathBuf {
    stem.with_extension("svm.txt")
}

fn tensor_path(stem: &Path) -> PathBuf {
    stem.with_extension("svm.fmap")
}

/// Writes `<stem>.svm.fmap` (`[pairs, dim + 1]`, bias last, f32) and a
/// `<stem>.svm.txt` sidecar with classes, C and the stream layout.
pub fn save_model(model: &LinearModel, stem: &Path) -> Result<(), ClassifyError> {
    let mut data = Vec::with_capacity(model.pairs.len() * (model.dim + 1));
    for p in &model.pairs {
        data.extend_from_slice(&p.weights);
        data.push(p.bias);
    }
    let tensor = FeatureTensor::from_f64(vec![model.pairs.len(), model.dim + 1], &data)?;
    write_fmap(&tensor, tensor_path(stem))?;
    let classes: Vec<&str> = model.classes.iter().map(|l| l.code()).collect();
    let mut text = String::new();
    let _ = writeln!(text, "classes={}", classes.join(","));
    let _ = writeln!(text, "c={:?}", model.c);
    let _ = writeln!(text, "dim={}", model.dim);
    let _ = writeln!(text, "layout={}", model.layout.join(","));
    let path = sidecar_path(stem);
    fs::write(&path, text).map_err(|e| FormatError::io(&path, e))?;
    Ok(())
}

/// Inverse of [`save_model`]; weights come back at f32 precision and the
/// training traces are empty.
pub fn load_model(stem: &Path) -> Result<LinearModel, ClassifyError> {
    let path = sidecar_path(stem);
    let text = fs::read_to_string(&path).map_err(|e| FormatError::io(&path, e))?;
    let bad = |message: String| ClassifyError::Sidecar {
        path: path.clone(),
        message,
    };
    let kv = parse_key_values(&text).map_err(bad)?;
    let get = |key: &str| kv.get(key).cloned().ok_or_else(|| bad(format!("missing `{key}`")));
    let classes = get("classes")?
        .split(',')
        .map(|s| s.parse::<Label>().map_err(bad))
        .collect::<Result<Vec<_>, _>>()?;
    let c: f64 = get("c")?.parse().map_err(|e| bad(format!("c: {e}")))?;
    let dim: usize = get("dim")?.parse().map_err(|e| bad(format!("dim: {e}")))?;
    let layout_text = get("layout")?;
    let layout = if layout_text.is_empty() {
        Vec::new()
    } else {
        layout_text.split(',').map(str::to_string).collect()
    };
    let tensor = read_fmap(tensor_path(stem))?;
    let k = classes.len();
    let n_pairs = k * k.saturating_sub(1) / 2;
    if tensor.dims() != [n_pairs, dim + 1] {
        return Err(bad(format!(
            "weight tensor dims {:?}, expected [{n_pairs}, {}]",
            tensor.dims(),
            dim + 1
        )));
    }
    let mut rows = tensor.data().chunks(dim + 1);
    let mut pairs = Vec::with_capacity(n_pairs);
    for i in 0..k {
        for j in i + 1..k {
            let row: Vec<f64> = rows.next().unwrap().iter().map(|&v| v as f64).collect();
            pairs.push(BinaryModel {
                positive: i,
                negative: j,
                weights: row[..dim].to_vec(),
                bias: row[dim],
                dual_trace: Vec::new(),
            });
        }
    }
    Ok(LinearModel {
        classes,
        c,
        layout,
        pairs,
        dim,
    })
}
