use std::fs;
use std::path::Path;

use super::FormatError;

const MAGIC: &[u8; 4] = b"FMAP";
const VERSION: u32 = 1;

/// Dense real tensor, row-major with the first extent outermost.
///
/// For CNN activations the extents are `[c, h, w]`; descriptor stacks use
/// `[n, d, d]` and weight matrices `[rows, cols]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    dims: Vec<usize>,
    data: Vec<f32>,
}

impl FeatureTensor {
    pub fn new(dims: Vec<usize>, data: Vec<f32>) -> Result<Self, FormatError> {
        let expected = checked_product(&dims)?;
        if expected != data.len() {
            return Err(FormatError::DimMismatch {
                expected,
                found: data.len(),
            });
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(FormatError::NonFiniteValue { index });
        }
        Ok(Self { dims, data })
    }

    /// Builds a tensor from `f64` values, rounding each to `f32`.
    pub fn from_f64(dims: Vec<usize>, data: &[f64]) -> Result<Self, FormatError> {
        Self::new(dims, data.iter().map(|&v| v as f32).collect())
    }

    pub fn zeros(dims: Vec<usize>) -> Result<Self, FormatError> {
        let n = checked_product(&dims)?;
        Self::new(dims, vec![0.0; n])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Interprets the tensor as `[c, h, w]`.
    pub fn chw(&self) -> Result<(usize, usize, usize), FormatError> {
        match self.dims.as_slice() {
            &[c, h, w] => Ok((c, h, w)),
            other => Err(FormatError::UnexpectedRank {
                expected: 3,
                found: other.len(),
            }),
        }
    }

    /// Serializes to the FMAP byte layout.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + 4 * self.dims.len() + 4 * self.data.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dims.len() as u32).to_le_bytes());
        for &d in &self.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Parses the FMAP byte layout.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, FormatError> {
        if bytes.len() < 4 || &bytes[..4] != MAGIC {
            return Err(FormatError::BadMagic);
        }
        let mut cursor = 4;
        let mut next_u32 = || -> Result<u32, FormatError> {
            let chunk = bytes.get(cursor..cursor + 4).ok_or(FormatError::TruncatedHeader)?;
            cursor += 4;
            Ok(u32::from_le_bytes(chunk.try_into().unwrap()))
        };
        let version = next_u32()?;
        if version != VERSION {
            return Err(FormatError::UnsupportedVersion(version));
        }
        let ndim = next_u32()? as usize;
        let mut dims = Vec::with_capacity(ndim.min(64));
        for _ in 0..ndim {
            dims.push(next_u32()? as usize);
        }
        let header = 12 + 4 * ndim;
        let expected = checked_product(&dims)?;
        let payload = &bytes[header..];
        if payload.len() != expected * 4 {
            return Err(FormatError::DimMismatch {
                expected,
                found: payload.len() / 4,
            });
        }
        let data: Vec<f32> = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::new(dims, data)
    }
}

fn checked_product(dims: &[usize]) -> Result<usize, FormatError> {
    if dims.is_empty() || dims.iter().any(|&d| d == 0 || d > u32::MAX as usize) {
        return Err(FormatError::BadDims(dims.to_vec()));
    }
    dims.iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| FormatError::BadDims(dims.to_vec()))
}

pub fn read_fmap(path: impl AsRef<Path>) -> Result<FeatureTensor, FormatError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| FormatError::io(path, e))?;
    FeatureTensor::from_bytes(&bytes)
}

/// Writes `tensor` to `path`. The tensor constructor already rejects
/// non-finite values, so every written file is loadable.
pub fn write_fmap(tensor: &FeatureTensor, path: impl AsRef<Path>) -> Result<(), FormatError> {
    let path = path.as_ref();
    fs::write(path, tensor.to_bytes()).map_err(|e| FormatError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn header(dims: &[u32]) -> Vec<u8> {
        let mut b = b"FMAP".to_vec();
        b.extend_from_slice(&1u32.to_le_bytes());
        b.extend_from_slice(&(dims.len() as u32).to_le_bytes());
        for d in dims {
            b.extend_from_slice(&d.to_le_bytes());
        }
        b
    }

    #[test]
    fn minimal_tensor() {
        let mut bytes = header(&[1, 1, 1]);
        bytes.extend_from_slice(&0f32.to_le_bytes());
        let t = FeatureTensor::from_bytes(&bytes).unwrap();
        assert_eq!(t.dims(), &[1, 1, 1]);
        assert_eq!(t.data(), &[0.0]);
        assert_eq!(t.to_bytes(), bytes);
    }

    #[test]
    fn vgg_sized_tensor() {
        let t = FeatureTensor::zeros(vec![512, 14, 14]).unwrap();
        let back = FeatureTensor::from_bytes(&t.to_bytes()).unwrap();
        assert_eq!(back.len(), 100_352);
        assert_eq!(back.chw().unwrap(), (512, 14, 14));
    }

    #[test]
    fn truncated_payload() {
        let mut bytes = header(&[2, 2, 2]);
        bytes.extend_from_slice(&[0u8; 4 * 7]);
        assert!(matches!(
            FeatureTensor::from_bytes(&bytes),
            Err(FormatError::DimMismatch { expected: 8, found: 7 })
        ));
    }

    #[test]
    fn header_errors() {
        assert!(matches!(FeatureTensor::from_bytes(b"FMA"), Err(FormatError::BadMagic)));
        assert!(matches!(
            FeatureTensor::from_bytes(b"PAMF\x01\0\0\0"),
            Err(FormatError::BadMagic)
        ));
        let mut v2 = b"FMAP".to_vec();
        v2.extend_from_slice(&2u32.to_le_bytes());
        assert!(matches!(
            FeatureTensor::from_bytes(&v2),
            Err(FormatError::UnsupportedVersion(2))
        ));
        let mut cut = header(&[3, 3]);
        cut.truncate(cut.len() - 2);
        assert!(matches!(
            FeatureTensor::from_bytes(&cut),
            Err(FormatError::TruncatedHeader)
        ));
    }

    #[test]
    fn nan_payload_rejected() {
        let mut bytes = header(&[2]);
        bytes.extend_from_slice(&1f32.to_le_bytes());
        bytes.extend_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(
            FeatureTensor::from_bytes(&bytes),
            Err(FormatError::NonFiniteValue { index: 1 })
        ));
        assert!(FeatureTensor::new(vec![1], vec![f32::INFINITY]).is_err());
    }

    #[test]
    fn file_roundtrip_3x4x5() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data: Vec<f32> = (0..60).map(|_| rng.random_range(-1.0..1.0)).collect();
        let t = FeatureTensor::new(vec![3, 4, 5], data).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.fmap");
        write_fmap(&t, &p).unwrap();
        let back = read_fmap(&p).unwrap();
        assert_eq!(back, t);
        assert_eq!(std::fs::read(&p).unwrap(), t.to_bytes());
    }

    proptest! {
        #[test]
        fn byte_roundtrip(dims in proptest::collection::vec(1usize..5, 1..4), seed in any::<u64>()) {
            let n: usize = dims.iter().product();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let data: Vec<f32> = (0..n).map(|_| f32::from_bits(rng.random::<u32>() & 0xBF7F_FFFF)).collect();
            let t = FeatureTensor::new(dims, data).unwrap();
            let bytes = t.to_bytes();
            let back = FeatureTensor::from_bytes(&bytes).unwrap();
            prop_assert_eq!(back.to_bytes(), bytes);
        }
    }
}
