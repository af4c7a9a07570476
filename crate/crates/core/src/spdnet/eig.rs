use nalgebra::{DMatrix, DVector};

use super::{SpdError, SymMatrix};

/// Sweep cap for the cyclic Jacobi iteration.
pub const MAX_SWEEPS: usize = 100;
/// Convergence: largest off-diagonal magnitude relative to the Frobenius norm.
pub const OFF_DIAGONAL_TOL: f64 = 1e-12;

/// Eigen-decomposition `X = U diag(values) U^T` of a symmetric matrix.
///
/// Eigenvalues are sorted descending and column `i` of `vectors` belongs to
/// `values[i]`. Every column is sign-normalized so that its largest-magnitude
/// entry (first one on ties) is non-negative.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl EigenPair {
    /// `U f(diag) U^T`, symmetrized.
    pub fn recompose(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let mut scaled = self.vectors.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= f(self.values[j]);
        }
        SymMatrix::symmetrized(&scaled * self.vectors.transpose())
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Checks symmetry (relative Frobenius 1e-10) before decomposing.
pub fn sym_eig_checked(m: &DMatrix<f64>) -> Result<EigenPair, SpdError> {
    let sym = SymMatrix::new(m.clone())?;
    sym_eig(&sym)
}

/// Cyclic Jacobi eigen-decomposition.
///
/// Runs cyclic sweeps (round-robin order) until the largest off-diagonal entry is at most
/// `1e-12 * ||X||_F`. Single-threaded and free of data-dependent ordering
/// other than the input bits, so the result is bit-reproducible.
pub fn sym_eig(x: &SymMatrix) -> Result<EigenPair, SpdError> {
    let n = x.dim();
    let mut a: Vec<f64> = x.as_matrix().as_slice().to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let fro = a.iter().map(|e| e * e).sum::<f64>().sqrt();
    let tol = OFF_DIAGONAL_TOL * fro;

    let mut converged = false;
    let mut pairs = Vec::with_capacity(n / 2);
    let mut rots = Vec::with_capacity(n / 2);
    let rounds = (n + n % 2).saturating_sub(1);
    for _ in 0..=MAX_SWEEPS {
        if max_off_diagonal(&a, n) <= tol {
            converged = true;
            break;
        }
        for round in 0..rounds {
            round_robin_pairs(n, round, &mut pairs);
            rots.clear();
            rots.extend(
                pairs
                    .iter()
                    .filter_map(|&(p, q)| Rotation::annihilating(&a, n, p, q, tol)),
            );
            if !rots.is_empty() {
                apply_round(&mut a, &mut v, n, &rots);
            }
        }
        symmetrize(&mut a, n);
    }
    if !converged {
        return Err(SpdError::NoConvergence { sweeps: MAX_SWEEPS });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j * n + j].total_cmp(&a[i * n + i]).then(i.cmp(&j)));
    let values = DVector::from_iterator(n, order.iter().map(|&i| a[i * n + i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let col = &v[src * n..(src + 1) * n];
        let mut pivot = 0;
        for (r, e) in col.iter().enumerate() {
            if e.abs() > col[pivot].abs() {
                pivot = r;
            }
        }
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        for (r, e) in col.iter().enumerate() {
            vectors[(r, dst)] = sign * e;
        }
    }
    Ok(EigenPair { values, vectors })
}

fn max_off_diagonal(a: &[f64], n: usize) -> f64 {
    let mut m = 0.0f64;
    for q in 1..n {
        for p in 0..q {
            m = m.max(a[q * n + p].abs());
        }
    }
    m
}

/// Pairs of round `round` of a round-robin tournament over `0..n`
/// (circle method). Every pair `p < q` occurs exactly once per sweep of
/// `n - 1` (or `n` for odd `n`) rounds, and the pairs of one round are
/// disjoint.
fn round_robin_pairs(n: usize, round: usize, out: &mut Vec<(usize, usize)>) {
    out.clear();
    let m = n + n % 2;
    let player = |pos: usize| if pos == 0 { 0 } else { 1 + (pos - 1 + round) % (m - 1) };
    for i in 0..m / 2 {
        let (x, y) = (player(i), player(m - 1 - i));
        if x < n && y < n {
            out.push((x.min(y), x.max(y)));
        }
    }
}

/// Givens rotation that zeroes `a[p, q]`.
struct Rotation {
    p: usize,
    q: usize,
    c: f64,
    s: f64,
    app: f64,
    aqq: f64,
}

impl Rotation {
    fn annihilating(a: &[f64], n: usize, p: usize, q: usize, tol: f64) -> Option<Self> {
        let apq = a[q * n + p];
        if apq.abs() <= tol {
            return None;
        }
        let app = a[p * n + p];
        let aqq = a[q * n + q];
        let theta = (aqq - app) / (2.0 * apq);
        let t = if theta.abs() > 1e150 {
            0.5 / theta
        } else {
            let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
            sign / (theta.abs() + (theta * theta + 1.0).sqrt())
        };
        let c = 1.0 / (t * t + 1.0).sqrt();
        Some(Self {
            p,
            q,
            c,
            s: t * c,
            app: app - t * apq,
            aqq: aqq + t * apq,
        })
    }
}

/// `A <- J^T A J`, `V <- V J` for a set of disjoint rotations `J`. Storage
/// is column-major, so both passes walk contiguous columns.
fn apply_round(a: &mut [f64], v: &mut [f64], n: usize, rots: &[Rotation]) {
    for r in rots {
        rotate_columns(a, n, r);
        rotate_columns(v, n, r);
    }
    for col in a.chunks_exact_mut(n) {
        for r in rots {
            let (x, y) = (col[r.p], col[r.q]);
            col[r.p] = r.c * x - r.s * y;
            col[r.q] = r.s * x + r.c * y;
        }
    }
    // the 2x2 blocks only see their own rotation; use the exact values
    for r in rots {
        a[r.p * n + r.p] = r.app;
        a[r.q * n + r.q] = r.aqq;
        a[r.q * n + r.p] = 0.0;
        a[r.p * n + r.q] = 0.0;
    }
}

fn rotate_columns(m: &mut [f64], n: usize, r: &Rotation) {
    let (left, right) = m.split_at_mut(r.q * n);
    let cp = &mut left[r.p * n..(r.p + 1) * n];
    let cq = &mut right[..n];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (xp, yq) = (*x, *y);
        *x = r.c * xp - r.s * yq;
        *y = r.s * xp + r.c * yq;
    }
}

/// Averages mirrored entries; the two passes round differently.
fn symmetrize(a: &mut [f64], n: usize) {
    for q in 1..n {
        for p in 0..q {
            let m = 0.5 * (a[q * n + p] + a[p * n + q]);
            a[q * n + p] = m;
            a[p * n + q] = m;
        }
    }
}
