//! Shallow geometric covariance descriptors.
//!
//! Each surface patch is summarized by the 6x6 covariance of the per-vertex
//! features `[x, y, z, C, M, D]` (position, curvedness, mean curvature and
//! distance from the origin).

use nalgebra::DMatrix;
use thiserror::Error;

use crate::covpool::add_ridge;
use crate::meshgeom::{dist, GeometryError, Point3, TriMesh};
use crate::spdnet::{SpdMatrix, SymMatrix};

/// Patches per mesh.
pub const PATCH_COUNT: usize = 40;
/// Patch radius as a fraction of the bounding-sphere radius.
pub const PATCH_RADIUS_FRACTION: f64 = 0.15;
/// Minimum vertices per patch for a usable 6x6 covariance.
pub const MIN_PATCH_POINTS: usize = 12;
/// Relative ridge for shallow covariances.
pub const RIDGE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum PatchError {
    #[error("mesh has {vertices} vertices, cannot place {count} patches")]
    TooFewVertices { vertices: usize, count: usize },
    #[error("patch around vertex {center_vertex} holds {points} points, need at least {MIN_PATCH_POINTS}")]
    PatchTooSmall { center_vertex: usize, points: usize },
    #[error("feature set is empty")]
    EmptyFeatures,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Spherical neighbourhood of a reference vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub center_vertex: usize,
    pub center: Point3,
    pub radius: f64,
    pub point_ids: Vec<usize>,
}

/// Per-vertex feature vector `[x, y, z, C, M, D]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointFeature {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub curvedness: f64,
    pub mean_curvature: f64,
    pub distance: f64,
}

impl PointFeature {
    pub fn new(p: Point3, curvedness: f64, mean_curvature: f64) -> Self {
        Self {
            x: p[0],
            y: p[1],
            z: p[2],
            curvedness,
            mean_curvature,
            distance: (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt(),
        }
    }

    pub fn as_array(&self) -> [f64; 6] {
        [
            self.x,
            self.y,
            self.z,
            self.curvedness,
            self.mean_curvature,
            self.distance,
        ]
    }
}

/// Sampling parameters for [`sample_patch_centers`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchParams {
    pub count: usize,
    pub radius_fraction: f64,
    /// Seed point for farthest-point sampling; the nearest vertex starts the
    /// sequence. `None` uses the nose proxy of the mesh.
    pub seed_point: Option<Point3>,
}

impl Default for PatchParams {
    fn default() -> Self {
        Self {
            count: PATCH_COUNT,
            radius_fraction: PATCH_RADIUS_FRACTION,
            seed_point: None,
        }
    }
}

/// Farthest-point sampling of `params.count` patch centres.
///
/// The first centre is the vertex nearest the seed point; each following one
/// maximizes the distance to the centres chosen so far (lowest index on
/// ties). Patch radius is `radius_fraction` times the bounding-sphere radius.
pub fn sample_patch_centers(mesh: &TriMesh, params: &PatchParams) -> Result<Vec<Patch>, PatchError> {
    let n = mesh.vertex_count();
    if n < params.count || params.count == 0 {
        return Err(PatchError::TooFewVertices {
            vertices: n,
            count: params.count,
        });
    }
    let anchor = params
        .seed_point
        .unwrap_or_else(|| crate::meshgeom::nose_proxy(mesh, 0.1));
    let first = nearest_vertex(mesh, &anchor);
    let radius = params.radius_fraction * mesh.bounding_radius();

    let mut chosen = vec![first];
    let mut nearest: Vec<f64> = mesh.vertices.iter().map(|v| dist(v, &mesh.vertices[first])).collect();
    while chosen.len() < params.count {
        let mut best = 0;
        for i in 1..n {
            if nearest[i] > nearest[best] {
                best = i;
            }
        }
        chosen.push(best);
        let c = mesh.vertices[best];
        for (d, v) in nearest.iter_mut().zip(&mesh.vertices) {
            *d = d.min(dist(v, &c));
        }
    }
    Ok(chosen
        .into_iter()
        .map(|center_vertex| {
            let center = mesh.vertices[center_vertex];
            let point_ids = (0..n).filter(|&i| dist(&mesh.vertices[i], &center) <= radius).collect();
            Patch {
                center_vertex,
                center,
                radius,
                point_ids,
            }
        })
        .collect())
}

fn nearest_vertex(mesh: &TriMesh, p: &Point3) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, v) in mesh.vertices.iter().enumerate() {
        let d = dist(v, p);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

/// Population covariance (divisor `n`) of a feature set, without ridge.
pub fn feature_covariance(features: &[PointFeature]) -> Result<SymMatrix, PatchError> {
    if features.is_empty() {
        return Err(PatchError::EmptyFeatures);
    }
    let n = features.len() as f64;
    let rows: Vec<[f64; 6]> = features.iter().map(PointFeature::as_array).collect();
    // shifted by the first row so that constant columns give an exact zero
    let origin = rows[0];
    let mut mean = [0.0; 6];
    for r in &rows {
        for k in 0..6 {
            mean[k] += r[k] - origin[k];
        }
    }
    for k in 0..6 {
        mean[k] = origin[k] + mean[k] / n;
    }
    let mut cov = DMatrix::zeros(6, 6);
    for a in 0..6 {
        for b in a..6 {
            let s: f64 = rows.iter().map(|r| (r[a] - mean[a]) * (r[b] - mean[b])).sum();
            cov[(a, b)] = s / n;
            cov[(b, a)] = s / n;
        }
    }
    Ok(SymMatrix::new(cov).expect("covariance is symmetric by construction"))
}

/// Features of every vertex; requires estimated curvatures.
pub fn point_features(mesh: &TriMesh) -> Result<Vec<PointFeature>, PatchError> {
    if mesh.curvatures.is_none() {
        return Err(GeometryError::CurvaturesMissing.into());
    }
    Ok((0..mesh.vertex_count())
        .map(|i| {
            PointFeature::new(
                mesh.vertices[i],
                mesh.curvedness(i).unwrap(),
                mesh.mean_curvature(i).unwrap(),
            )
        })
        .collect())
}

/// 6x6 patch covariance with ridge `1e-6 * trace / 6 + 1e-12`.
pub fn patch_covariance(mesh: &TriMesh, patch: &Patch) -> Result<SpdMatrix, PatchError> {
    if patch.point_ids.len() < MIN_PATCH_POINTS {
        return Err(PatchError::PatchTooSmall {
            center_vertex: patch.center_vertex,
            points: patch.point_ids.len(),
        });
    }
    if mesh.curvatures.is_none() {
        return Err(GeometryError::CurvaturesMissing.into());
    }
    let features: Vec<PointFeature> = patch
        .point_ids
        .iter()
        .map(|&i| {
            PointFeature::new(
                mesh.vertices[i],
                mesh.curvedness(i).unwrap(),
                mesh.mean_curvature(i).unwrap(),
            )
        })
        .collect();
    Ok(add_ridge(&feature_covariance(&features)?, RIDGE))
}

/// All patch descriptors of a preprocessed, curvature-bearing mesh.
pub fn shallow_descriptors(mesh: &TriMesh, params: &PatchParams) -> Result<Vec<SpdMatrix>, PatchError> {
    sample_patch_centers(mesh, params)?
        .iter()
        .map(|p| patch_covariance(mesh, p))
        .collect()
}
