//! Covariance pooling of `c x h x w` feature tensors.
//!
//! Every pixel of a region is one observation in `R^c` (its value across all
//! channels); the descriptor is the population covariance of those
//! observations plus a small trace-relative ridge.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::spdnet::{SpdMatrix, SymMatrix};
use crate::tensorio::{FeatureTensor, FormatError};

/// Relative ridge added to deep covariances: `lambda = RIDGE * trace / c + 1e-12`.
pub const RIDGE: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum PoolError {
    #[error("region rows {rows:?} cols {cols:?} outside a {h}x{w} map")]
    RegionOutOfBounds {
        rows: (usize, usize),
        cols: (usize, usize),
        h: usize,
        w: usize,
    },
    #[error("region holds {pixels} pixels, need at least 2")]
    RegionTooSmall { pixels: usize },
    #[error("grid level {level} on a {h}x{w} map gives tiles narrower than 2 pixels")]
    TileTooSmall { level: usize, h: usize, w: usize },
    #[error("invalid region spec: {0}")]
    BadSpec(String),
    #[error(transparent)]
    Format(#[from] FormatError),
}

/// Half-open pixel rectangle `rows.0..rows.1 x cols.0..cols.1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Region {
    pub rows: (usize, usize),
    pub cols: (usize, usize),
}

impl Region {
    pub fn full(h: usize, w: usize) -> Self {
        Self {
            rows: (0, h),
            cols: (0, w),
        }
    }

    pub fn pixel_count(&self) -> usize {
        self.rows.1.saturating_sub(self.rows.0) * self.cols.1.saturating_sub(self.cols.0)
    }
}

/// Spatial pyramid: for each level `g`, the map is split into `g x g`
/// near-equal tiles. Level 1 (the global region) is always present and first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionSpec {
    levels: Vec<usize>,
}

impl RegionSpec {
    /// Sorts and dedups `levels`, inserting level 1 when missing.
    pub fn new(levels: &[usize]) -> Result<Self, PoolError> {
        if levels.contains(&0) {
            return Err(PoolError::BadSpec("grid level must be >= 1".into()));
        }
        let mut levels = levels.to_vec();
        levels.push(1);
        levels.sort_unstable();
        levels.dedup();
        Ok(Self { levels })
    }

    pub fn global() -> Self {
        Self { levels: vec![1] }
    }

    pub fn levels(&self) -> &[usize] {
        &self.levels
    }

    /// Number of descriptors produced per tensor.
    pub fn tile_count(&self) -> usize {
        self.levels.iter().map(|g| g * g).sum()
    }

    /// Tiles for an `h x w` map: global first, then each level row-major.
    pub fn tiles(&self, h: usize, w: usize) -> Result<Vec<Region>, PoolError> {
        let mut out = Vec::with_capacity(self.tile_count());
        for &g in &self.levels {
            if h / g < 2 || w / g < 2 {
                return Err(PoolError::TileTooSmall { level: g, h, w });
            }
            let rb = balanced_bounds(h, g);
            let cb = balanced_bounds(w, g);
            for r in 0..g {
                for c in 0..g {
                    out.push(Region {
                        rows: (rb[r], rb[r + 1]),
                        cols: (cb[c], cb[c + 1]),
                    });
                }
            }
        }
        Ok(out)
    }
}

impl std::str::FromStr for RegionSpec {
    type Err = PoolError;

    /// Parses `"1,2,4"`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let levels = s
            .split(',')
            .map(|t| t.trim().parse::<usize>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| PoolError::BadSpec(format!("cannot parse {s:?}")))?;
        Self::new(&levels)
    }
}

impl std::fmt::Display for RegionSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.levels.iter().map(|g| g.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

/// Boundaries `floor(i * len / parts)` for `i = 0..=parts`.
fn balanced_bounds(len: usize, parts: usize) -> Vec<usize> {
    (0..=parts).map(|i| i * len / parts).collect()
}

/// Two-pass population covariance of the pixels in `region`, without ridge.
pub fn region_covariance(tensor: &FeatureTensor, region: Region) -> Result<SymMatrix, PoolError> {
    let (c, h, w) = tensor.chw()?;
    if region.rows.0 >= region.rows.1 || region.cols.0 >= region.cols.1 || region.rows.1 > h || region.cols.1 > w {
        return Err(PoolError::RegionOutOfBounds {
            rows: region.rows,
            cols: region.cols,
            h,
            w,
        });
    }
    let n = region.pixel_count();
    if n < 2 {
        return Err(PoolError::RegionTooSmall { pixels: n });
    }
    let data = tensor.data();
    // centred observations, one contiguous row of n pixels per channel
    let mut centred = vec![0.0f64; c * n];
    for ch in 0..c {
        let plane = &data[ch * h * w..(ch + 1) * h * w];
        let row = &mut centred[ch * n..(ch + 1) * n];
        let mut k = 0;
        for r in region.rows.0..region.rows.1 {
            for col in region.cols.0..region.cols.1 {
                row[k] = plane[r * w + col] as f64;
                k += 1;
            }
        }
        let first = row[0];
        let mean = first + row.iter().map(|v| v - first).sum::<f64>() / n as f64;
        for v in row.iter_mut() {
            *v -= mean;
        }
    }
    let inv_n = 1.0 / n as f64;
    let mut cov = DMatrix::zeros(c, c);
    for a in 0..c {
        let ra = &centred[a * n..(a + 1) * n];
        for b in a..c {
            let rb = &centred[b * n..(b + 1) * n];
            let s: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
            cov[(a, b)] = s * inv_n;
            cov[(b, a)] = s * inv_n;
        }
    }
    Ok(SymMatrix::new(cov).expect("covariance is symmetric by construction"))
}

/// Adds `lambda I` with `lambda = ridge * trace / d + 1e-12`.
pub fn add_ridge(cov: &SymMatrix, ridge: f64) -> SpdMatrix {
    let d = cov.dim();
    let lambda = ridge * cov.trace() / d as f64 + 1e-12;
    let mut m = cov.as_matrix().clone();
    for i in 0..d {
        m[(i, i)] += lambda;
    }
    SpdMatrix::from_sym_unchecked(SymMatrix::new(m).expect("ridge keeps symmetry"))
}

/// Pooled covariance of one region with the deep ridge applied.
pub fn pool_covariance(tensor: &FeatureTensor, region: Region) -> Result<SpdMatrix, PoolError> {
    Ok(add_ridge(&region_covariance(tensor, region)?, RIDGE))
}

/// One pooled descriptor per tile of `spec`, in tile order.
pub fn pool_regions(tensor: &FeatureTensor, spec: &RegionSpec) -> Result<Vec<SpdMatrix>, PoolError> {
    let (_, h, w) = tensor.chw()?;
    spec.tiles(h, w)?
        .into_iter()
        .map(|r| pool_covariance(tensor, r))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_pixels_give_zero() {
        let t = FeatureTensor::new(vec![3, 2, 2], vec![1., 1., 1., 1., -2., -2., -2., -2., 5., 5., 5., 5.]).unwrap();
        let cov = region_covariance(&t, Region::full(2, 2)).unwrap();
        assert!(cov.as_matrix().iter().all(|&v| v == 0.0));
        let pooled = pool_covariance(&t, Region::full(2, 2)).unwrap();
        assert_eq!(pooled.as_matrix()[(0, 0)], 1e-12);
    }

    #[test]
    fn two_pixel_hand_example() {
        // pixel 0 = (0, 0), pixel 1 = (2, 0)
        let t = FeatureTensor::new(vec![2, 1, 2], vec![0., 2., 0., 0.]).unwrap();
        let cov = region_covariance(&t, Region::full(1, 2)).unwrap();
        assert_eq!(cov.as_matrix(), &DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));
    }

    #[test]
    fn region_errors() {
        let t = FeatureTensor::zeros(vec![2, 4, 4]).unwrap();
        let out = Region {
            rows: (0, 5),
            cols: (0, 2),
        };
        assert!(matches!(
            region_covariance(&t, out),
            Err(PoolError::RegionOutOfBounds { .. })
        ));
        let one = Region {
            rows: (1, 2),
            cols: (1, 2),
        };
        assert!(matches!(
            region_covariance(&t, one),
            Err(PoolError::RegionTooSmall { pixels: 1 })
        ));
        let flat = FeatureTensor::zeros(vec![8]).unwrap();
        assert!(region_covariance(&flat, Region::full(1, 1)).is_err());
    }

    #[test]
    fn tiling() {
        assert_eq!(RegionSpec::new(&[1]).unwrap().tiles(14, 14).unwrap().len(), 1);
        let spec: RegionSpec = "1,2".parse().unwrap();
        let tiles = spec.tiles(14, 14).unwrap();
        assert_eq!(tiles.len(), 5);
        assert_eq!(tiles[0], Region::full(14, 14));
        assert!(tiles[1..].iter().all(|t| t.pixel_count() == 49));
        assert_eq!(
            tiles[2],
            Region {
                rows: (0, 7),
                cols: (7, 14)
            }
        );

        let spec = RegionSpec::new(&[4, 2]).unwrap();
        assert_eq!(spec.levels(), &[1, 2, 4]);
        let tiles = spec.tiles(14, 14).unwrap();
        assert_eq!(tiles.len(), 21);
        for t in &tiles[5..] {
            for side in [t.rows.1 - t.rows.0, t.cols.1 - t.cols.0] {
                assert!(side == 3 || side == 4);
            }
        }
        assert!(matches!(
            RegionSpec::new(&[8]).unwrap().tiles(14, 14),
            Err(PoolError::TileTooSmall { .. })
        ));
        assert!(RegionSpec::new(&[0]).is_err());
        assert_eq!(spec.to_string(), "1,2,4");
    }
}
