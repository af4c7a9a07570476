//! Covariance-descriptor pipeline for 3D facial expression recognition.
//!
//! The crate turns 3D face scans and CNN activation tensors into symmetric
//! positive-definite covariance descriptors, reduces them on the SPD manifold
//! (bilinear projection, eigenvalue rectification, matrix logarithm),
//! quantizes them into Bag-of-Features histograms and classifies the fused
//! histograms with a one-vs-one linear SVM.
//!
//! Module map:
//!
//! - [`tensorio`]: FMAP tensors, OBJ/PLY meshes, dataset manifests.
//! - [`meshgeom`]: mesh preprocessing, principal curvatures, map rendering.
//! - [`shallowfeat`]: surface patches and their 6x6 geometric covariances.
//! - [`covpool`]: covariance pooling of `c x h x w` feature tensors.
//! - [`spdnet`]: Jacobi eigensolver, BiMap / ReEig / LogEig, affine-invariant distance.
//! - [`bof`]: flattening, k-means codebooks, histograms, fusion.
//! - [`classify`]: one-vs-one linear SVM.
//! - [`pipeline`]: cross-validation harness, codebook sweeps, synthetic data.

// `!(x > 0.0)` is written on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bof;
pub mod classify;
pub mod covpool;
pub mod error;
pub mod meshgeom;
pub mod pipeline;
pub mod shallowfeat;
pub mod spdnet;
pub mod tensorio;

pub use error::{Error, Result};
pub use meshgeom::TriMesh;
pub use spdnet::{SpdMatrix, SymMatrix};
pub use tensorio::{DatasetManifest, FeatureTensor, Label};
