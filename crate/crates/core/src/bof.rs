//! Bag-of-Features: flattening of symmetric matrices, k-means codebooks,
//! histogram quantization and stream fusion.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::spdnet::{SpdError, SymMatrix};
use crate::tensorio::{read_fmap, write_fmap, FeatureTensor, FormatError};

/// Codebook sizes accepted by run configurations.
pub const CODEBOOK_SIZES: [usize; 7] = [16, 32, 64, 128, 256, 512, 1024];
/// Lloyd iteration cap.
pub const MAX_ITERATIONS: usize = 300;

#[derive(Debug, Error)]
pub enum BofError {
    #[error(transparent)]
    Spd(#[from] SpdError),
    #[error("need at least {k} distinct descriptors, got {count}")]
    TooFewDescriptors { count: usize, k: usize },
    #[error("descriptor {index} has length {found}, expected {expected}")]
    InconsistentLength {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("cannot quantize an empty descriptor list")]
    EmptyInput,
    #[error("descriptor length {found} does not match codebook length {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("stream `{0}` is missing")]
    MissingStream(String),
    #[error("vector of length {0} is not a packed upper triangle")]
    NotTriangular(usize),
    #[error("k must be positive")]
    ZeroClusters,
    #[error("codebook sidecar {path}: {message}")]
    Sidecar { path: PathBuf, message: String },
    #[error(transparent)]
    Format(#[from] FormatError),
}

/// Number of packed entries of a `d x d` symmetric matrix.
pub fn flat_len(d: usize) -> usize {
    d * (d + 1) / 2
}

/// Row-major upper triangle including the diagonal, off-diagonal entries
/// scaled by `sqrt(2)` so the Euclidean norm equals the Frobenius norm.
pub fn flatten(m: &SymMatrix) -> Vec<f64> {
    let a = m.as_matrix();
    let d = a.nrows();
    let mut out = Vec::with_capacity(flat_len(d));
    for i in 0..d {
        out.push(a[(i, i)]);
        for j in i + 1..d {
            out.push(std::f64::consts::SQRT_2 * a[(i, j)]);
        }
    }
    out
}

/// [`flatten`] for an unchecked dense matrix.
pub fn flatten_dense(m: &DMatrix<f64>) -> Result<Vec<f64>, BofError> {
    Ok(flatten(&SymMatrix::new(m.clone())?))
}

/// Inverse of [`flatten`].
pub fn unflatten(v: &[f64]) -> Result<SymMatrix, BofError> {
    // d (d + 1) / 2 = len
    let d = ((((8 * v.len() + 1) as f64).sqrt() - 1.0) / 2.0).round() as usize;
    if flat_len(d) != v.len() {
        return Err(BofError::NotTriangular(v.len()));
    }
    let mut m = DMatrix::zeros(d, d);
    let mut k = 0;
    for i in 0..d {
        m[(i, i)] = v[k];
        k += 1;
        for j in i + 1..d {
            let x = v[k] / std::f64::consts::SQRT_2;
            m[(i, j)] = x;
            m[(j, i)] = x;
            k += 1;
        }
    }
    Ok(SymMatrix::new(m)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CodebookKind {
    Deep,
    Shallow,
}

impl CodebookKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CodebookKind::Deep => "deep",
            CodebookKind::Shallow => "shallow",
        }
    }
}

impl FromStr for CodebookKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "deep" => Ok(CodebookKind::Deep),
            "shallow" => Ok(CodebookKind::Shallow),
            other => Err(format!("unknown codebook kind `{other}`")),
        }
    }
}

/// k-means settings. `restarts` independent k-means++ runs are made from
/// seeds derived from `seed`; the lowest final objective wins (first on ties).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansParams {
    pub k: usize,
    pub seed: u64,
    pub max_iterations: usize,
    pub restarts: usize,
}

impl KMeansParams {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            seed,
            max_iterations: MAX_ITERATIONS,
            restarts: 1,
        }
    }
}

/// Result of one k-means fit.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub centroids: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    /// Objective after the k-means++ seeding, then after every Lloyd step.
    pub trace: Vec<f64>,
    /// Whether the assignment reached a fixpoint before the cap.
    pub converged: bool,
}

impl KMeansFit {
    pub fn objective(&self) -> f64 {
        *self.trace.last().unwrap()
    }

    pub fn initial_objective(&self) -> f64 {
        self.trace[0]
    }
}

/// k-means++ seeding followed by Lloyd iterations, single run.
pub fn train_codebook(descriptors: &[Vec<f64>], k: usize, seed: u64) -> Result<KMeansFit, BofError> {
    kmeans(descriptors, &KMeansParams::new(k, seed))
}

/// k-means with explicit parameters.
pub fn kmeans(descriptors: &[Vec<f64>], params: &KMeansParams) -> Result<KMeansFit, BofError> {
    let k = params.k;
    if k == 0 {
        return Err(BofError::ZeroClusters);
    }
    let len = uniform_length(descriptors)?;
    let distinct = descriptors
        .iter()
        .map(|d| d.iter().map(|v| v.to_bits()).collect::<Vec<_>>())
        .collect::<HashSet<_>>()
        .len();
    if descriptors.len() < k || distinct < k {
        return Err(BofError::TooFewDescriptors { count: distinct, k });
    }
    let mut best: Option<KMeansFit> = None;
    for r in 0..params.restarts.max(1) {
        let seed = params.seed.wrapping_add((r as u64).wrapping_mul(0xD1B5_4A32_D192_ED03));
        let fit = lloyd(descriptors, len, k, seed, params.max_iterations);
        if best.as_ref().is_none_or(|b| fit.objective() < b.objective()) {
            best = Some(fit);
        }
    }
    Ok(best.unwrap())
}

fn uniform_length(descriptors: &[Vec<f64>]) -> Result<usize, BofError> {
    let Some(first) = descriptors.first() else {
        return Err(BofError::EmptyInput);
    };
    let expected = first.len();
    for (index, d) in descriptors.iter().enumerate() {
        if d.len() != expected {
            return Err(BofError::InconsistentLength {
                index,
                expected,
                found: d.len(),
            });
        }
    }
    Ok(expected)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid and its squared distance; ties go to the lowest index.
fn nearest(x: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(x, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn assign(points: &[Vec<f64>], centroids: &[Vec<f64>]) -> Vec<(usize, f64)> {
    points.par_iter().map(|x| nearest(x, centroids)).collect()
}

fn seed_plus_plus(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centroids = vec![points[rng.random_range(0..n)].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        // last point with positive weight guards against round-off at the top end
        let mut pick = d2.iter().rposition(|&d| d > 0.0).unwrap();
        for (i, &d) in d2.iter().enumerate() {
            acc += d;
            if d > 0.0 && acc > target {
                pick = i;
                break;
            }
        }
        let c = points[pick].clone();
        for (p, d) in points.iter().zip(d2.iter_mut()) {
            *d = d.min(sq_dist(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

fn lloyd(points: &[Vec<f64>], len: usize, k: usize, seed: u64, max_iterations: usize) -> KMeansFit {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = seed_plus_plus(points, k, &mut rng);
    let mut current = assign(points, &centroids);
    let mut trace = vec![current.iter().map(|a| a.1).sum::<f64>()];
    let mut converged = false;
    for _ in 0..max_iterations {
        // sequential update in point order keeps the sums bit-reproducible
        let mut sums = vec![vec![0.0; len]; k];
        let mut counts = vec![0usize; k];
        for (p, &(j, _)) in points.iter().zip(&current) {
            counts[j] += 1;
            for (s, v) in sums[j].iter_mut().zip(p) {
                *s += v;
            }
        }
        let mut taken: HashSet<usize> = HashSet::new();
        for j in 0..k {
            if counts[j] > 0 {
                let inv = 1.0 / counts[j] as f64;
                centroids[j] = sums[j].iter().map(|s| s * inv).collect();
            } else {
                // re-seed at the point farthest from its assigned centroid
                let far = (0..points.len())
                    .filter(|i| !taken.contains(i))
                    .max_by(|&a, &b| current[a].1.total_cmp(&current[b].1).then(b.cmp(&a)))
                    .unwrap();
                taken.insert(far);
                centroids[j] = points[far].clone();
            }
        }
        let next = assign(points, &centroids);
        trace.push(next.iter().map(|a| a.1).sum());
        let unchanged = next.iter().zip(&current).all(|(a, b)| a.0 == b.0);
        current = next;
        if unchanged {
            converged = true;
            break;
        }
    }
    KMeansFit {
        centroids,
        assignments: current.into_iter().map(|a| a.0).collect(),
        trace,
        converged,
    }
}

/// Trained centroids for one named stream.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    pub kind: CodebookKind,
    pub stream: String,
    pub seed: u64,
    centroids: Vec<Vec<f64>>,
}

impl Codebook {
    pub fn new(
        kind: CodebookKind,
        stream: impl Into<String>,
        seed: u64,
        centroids: Vec<Vec<f64>>,
    ) -> Result<Self, BofError> {
        if centroids.is_empty() {
            return Err(BofError::ZeroClusters);
        }
        uniform_length(&centroids)?;
        Ok(Self {
            kind,
            stream: stream.into(),
            seed,
            centroids,
        })
    }

    /// Fits `k` centroids to `descriptors` (see [`kmeans`]).
    pub fn train(
        kind: CodebookKind,
        stream: impl Into<String>,
        descriptors: &[Vec<f64>],
        params: &KMeansParams,
    ) -> Result<Self, BofError> {
        let fit = kmeans(descriptors, params)?;
        Self::new(kind, stream, params.seed, fit.centroids)
    }

    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    pub fn descriptor_len(&self) -> usize {
        self.centroids[0].len()
    }

    pub fn centroids(&self) -> &[Vec<f64>] {
        &self.centroids
    }

    /// L1-normalized hard-assignment histogram.
    pub fn quantize(&self, descriptors: &[Vec<f64>]) -> Result<Histogram, BofError> {
        quantize(descriptors, self)
    }
}

/// Bin weights of one stream.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub bins: Vec<f64>,
}

impl Histogram {
    pub fn l1(&self) -> f64 {
        self.bins.iter().map(|b| b.abs()).sum()
    }
}

/// Counts nearest-centroid assignments (ties to the lowest index) and
/// divides by the descriptor count.
pub fn quantize(descriptors: &[Vec<f64>], codebook: &Codebook) -> Result<Histogram, BofError> {
    if descriptors.is_empty() {
        return Err(BofError::EmptyInput);
    }
    let expected = codebook.descriptor_len();
    if let Some(d) = descriptors.iter().find(|d| d.len() != expected) {
        return Err(BofError::LengthMismatch {
            expected,
            found: d.len(),
        });
    }
    let mut counts = vec![0usize; codebook.k()];
    for d in descriptors {
        counts[nearest(d, &codebook.centroids).0] += 1;
    }
    let n = descriptors.len() as f64;
    Ok(Histogram {
        bins: counts.into_iter().map(|c| c as f64 / n).collect(),
    })
}

/// Concatenates histograms in `layout` order, looked up by stream name.
pub fn fuse(layout: &[String], histograms: &[(String, Histogram)]) -> Result<Vec<f64>, BofError> {
    let mut out = Vec::new();
    for name in layout {
        let (_, h) = histograms
            .iter()
            .find(|(n, _)| n == name)
            .ok_or_else(|| BofError::MissingStream(name.clone()))?;
        out.extend_from_slice(&h.bins);
    }
    Ok(out)
}

fn sidecar_path(stem: &Path) -> PathBuf {
    stem.with_extension("codebook.txt")
}

fn tensor_path(stem: &Path) -> PathBuf {
    stem.with_extension("codebook.fmap")
}

/// Writes `<stem>.codebook.fmap` (`[k, len]`, f32) and `<stem>.codebook.txt`.
pub fn save_codebook(codebook: &Codebook, stem: &Path) -> Result<(), BofError> {
    let flat: Vec<f64> = codebook.centroids.iter().flatten().copied().collect();
    let tensor = FeatureTensor::from_f64(vec![codebook.k(), codebook.descriptor_len()], &flat)?;
    write_fmap(&tensor, tensor_path(stem))?;
    let mut text = String::new();
    let _ = writeln!(text, "kind={}", codebook.kind.as_str());
    let _ = writeln!(text, "stream={}", codebook.stream);
    let _ = writeln!(text, "seed={}", codebook.seed);
    let _ = writeln!(text, "k={}", codebook.k());
    let _ = writeln!(text, "len={}", codebook.descriptor_len());
    let path = sidecar_path(stem);
    fs::write(&path, text).map_err(|e| FormatError::io(&path, e))?;
    Ok(())
}

/// Reads a codebook written by [`save_codebook`]. Centroids come back at
/// f32 precision.
pub fn load_codebook(stem: &Path) -> Result<Codebook, BofError> {
    let path = sidecar_path(stem);
    let text = fs::read_to_string(&path).map_err(|e| FormatError::io(&path, e))?;
    let bad = |message: String| BofError::Sidecar {
        path: path.clone(),
        message,
    };
    let fields = crate::tensorio::parse_key_values(&text).map_err(bad)?;
    let get = |key: &str| fields.get(key).cloned().ok_or_else(|| bad(format!("missing `{key}`")));
    let kind: CodebookKind = get("kind")?.parse().map_err(bad)?;
    let stream = get("stream")?;
    let seed: u64 = get("seed")?.parse().map_err(|e| bad(format!("seed: {e}")))?;
    let k: usize = get("k")?.parse().map_err(|e| bad(format!("k: {e}")))?;
    let len: usize = get("len")?.parse().map_err(|e| bad(format!("len: {e}")))?;
    let tensor = read_fmap(tensor_path(stem))?;
    if tensor.dims() != [k, len] {
        return Err(bad(format!(
            "tensor dims {:?} do not match k={k}, len={len}",
            tensor.dims()
        )));
    }
    let centroids = tensor
        .data()
        .chunks(len)
        .map(|row| row.iter().map(|&v| v as f64).collect())
        .collect();
    Codebook::new(kind, stream, seed, centroids)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    fn blobs(seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pts = Vec::new();
        for centre in [[0.0, 0.0], [10.0, 10.0]] {
            for _ in 0..3 {
                pts.push(
                    centre
                        .iter()
                        .map(|c| {
                            let e: f64 = StandardNormal.sample(&mut rng);
                            c + 0.1 * e
                        })
                        .collect(),
                );
            }
        }
        pts
    }

    #[test]
    fn flatten_examples() {
        let m = SymMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 3.0])).unwrap();
        let v = flatten(&m);
        assert_eq!(v, vec![1.0, 2.0 * 2f64.sqrt(), 3.0]);
        assert!((v.iter().map(|x| x * x).sum::<f64>() - 18.0).abs() < 1e-12);
        assert_eq!(flatten(&SymMatrix::zeros(6)), vec![0.0; 21]);
        assert_eq!(unflatten(&v).unwrap(), m);
        assert!(matches!(unflatten(&[1.0, 2.0]), Err(BofError::NotTriangular(2))));
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(matches!(
            flatten_dense(&asym),
            Err(BofError::Spd(SpdError::AsymmetricInput { .. }))
        ));
    }

    #[test]
    fn k_equals_n_zero_objective() {
        let pts = blobs(1);
        let fit = train_codebook(&pts, pts.len(), 3).unwrap();
        assert_eq!(fit.objective(), 0.0);
        let mut got: Vec<_> = fit.centroids.clone();
        let mut want = pts.clone();
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        want.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(got, want);
    }

    #[test]
    fn two_blobs_and_monotone_trace() {
        let pts = blobs(2);
        let fit = train_codebook(&pts, 2, 9).unwrap();
        let a = &fit.assignments;
        assert!(a[0] == a[1] && a[1] == a[2] && a[3] == a[4] && a[4] == a[5] && a[0] != a[3]);
        assert!(fit.trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(fit.converged);
    }

    #[test]
    fn too_few_and_inconsistent() {
        let pts = vec![vec![1.0, 1.0], vec![1.0, 1.0], vec![2.0, 2.0]];
        assert!(matches!(
            train_codebook(&pts, 3, 0),
            Err(BofError::TooFewDescriptors { count: 2, k: 3 })
        ));
        let bad = vec![vec![1.0], vec![1.0, 2.0]];
        assert!(matches!(
            train_codebook(&bad, 1, 0),
            Err(BofError::InconsistentLength { index: 1, .. })
        ));
    }

    #[test]
    fn quantize_rules() {
        let cb = Codebook::new(
            CodebookKind::Shallow,
            "shallow",
            0,
            vec![vec![0.0], vec![1.0], vec![2.0]],
        )
        .unwrap();
        let h = cb.quantize(&[vec![0.1], vec![-3.0]]).unwrap();
        assert_eq!(h.bins, vec![1.0, 0.0, 0.0]);
        // exact midpoint goes to the lower index
        assert_eq!(cb.quantize(&[vec![0.5]]).unwrap().bins, vec![1.0, 0.0, 0.0]);
        let descs: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64 / 20.0]).collect();
        let h = cb.quantize(&descs).unwrap();
        assert!((h.l1() - 1.0).abs() < 1e-12);
        assert!(h.bins.iter().all(|b| ((b * 40.0).round() - b * 40.0).abs() < 1e-12));
        let doubled: Vec<Vec<f64>> = descs.iter().chain(&descs).cloned().collect();
        assert_eq!(cb.quantize(&doubled).unwrap(), h);
        assert!(matches!(cb.quantize(&[]), Err(BofError::EmptyInput)));
        assert!(matches!(
            cb.quantize(&[vec![1.0, 2.0]]),
            Err(BofError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn fuse_by_name() {
        let a = Histogram {
            bins: vec![1.0 / 16.0; 16],
        };
        let b = Histogram {
            bins: (0..16).map(|i| if i == 3 { 1.0 } else { 0.0 }).collect(),
        };
        let named = vec![("a".to_string(), a.clone()), ("b".to_string(), b.clone())];
        let v = fuse(&["a".into(), "b".into()], &named).unwrap();
        assert_eq!(v.len(), 32);
        assert!((v.iter().sum::<f64>() - 2.0).abs() < 1e-12);
        let swapped = fuse(&["b".into(), "a".into()], &named).unwrap();
        assert_eq!(&swapped[..16], &b.bins[..]);
        assert!(matches!(fuse(&["c".into()], &named), Err(BofError::MissingStream(s)) if s == "c"));
    }

    #[test]
    fn save_load_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let cb = Codebook::new(
            CodebookKind::Deep,
            "vgg.depth",
            7,
            vec![vec![0.5, 1.0], vec![-2.0, 4.0]],
        )
        .unwrap();
        let stem = dir.path().join("cb");
        save_codebook(&cb, &stem).unwrap();
        assert_eq!(load_codebook(&stem).unwrap(), cb);
    }
}
