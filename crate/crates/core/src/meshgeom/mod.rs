//! Triangle meshes: preprocessing, principal curvatures and 2D map rendering.

mod curvature;
mod preprocess;
mod raster;
pub mod shapes;

use std::collections::HashMap;

use thiserror::Error;

pub use curvature::{estimate_curvatures, estimate_curvatures_with_radius};
pub use preprocess::{nose_proxy, preprocess, CropParams, PreprocessParams};
pub use raster::{render_curvature_map, render_depth_map, MapImage, MapKind, MAP_SIZE};

pub type Point3 = [f64; 3];

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("crop removed all geometry")]
    EmptyAfterCrop,
    #[error("mesh has no faces")]
    EmptyMesh,
    #[error("curvatures have not been estimated for this mesh")]
    CurvaturesMissing,
    #[error("vertex {vertex} has only {neighbors} neighbors, need at least 5 for a surface fit")]
    DegenerateNeighborhood { vertex: usize, neighbors: usize },
    #[error("face {face} references vertex {index} but the mesh has {vertex_count} vertices")]
    DanglingIndex {
        face: usize,
        index: usize,
        vertex_count: usize,
    },
}

/// Per-vertex principal curvatures, `k1 >= k2`, in inverse length units.
#[derive(Debug, Clone, PartialEq)]
pub struct Curvatures {
    pub k1: Vec<f64>,
    pub k2: Vec<f64>,
}

/// Indexed triangle mesh with optional per-vertex normals and curvatures.
///
/// Mean curvature and curvedness are derived from `k1`/`k2` on demand, so
/// they always agree with the principal curvatures.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Point3>,
    pub faces: Vec<[usize; 3]>,
    pub normals: Option<Vec<Point3>>,
    pub curvatures: Option<Curvatures>,
}

impl TriMesh {
    pub fn new(vertices: Vec<Point3>, faces: Vec<[usize; 3]>) -> Result<Self, GeometryError> {
        let vertex_count = vertices.len();
        for (face, f) in faces.iter().enumerate() {
            if let Some(&index) = f.iter().find(|&&i| i >= vertex_count) {
                return Err(GeometryError::DanglingIndex {
                    face,
                    index,
                    vertex_count,
                });
            }
        }
        Ok(Self {
            vertices,
            faces,
            normals: None,
            curvatures: None,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    /// Mean curvature `(k1 + k2) / 2` of vertex `i`.
    pub fn mean_curvature(&self, i: usize) -> Option<f64> {
        self.curvatures.as_ref().map(|c| 0.5 * (c.k1[i] + c.k2[i]))
    }

    /// Curvedness `sqrt((k1^2 + k2^2) / 2)` of vertex `i`.
    pub fn curvedness(&self, i: usize) -> Option<f64> {
        self.curvatures
            .as_ref()
            .map(|c| (0.5 * (c.k1[i] * c.k1[i] + c.k2[i] * c.k2[i])).sqrt())
    }

    /// Unique undirected edges, each as `(min, max)`, in first-seen order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut seen = HashMap::new();
        let mut out = Vec::new();
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                if seen.insert(key, ()).is_none() {
                    out.push(key);
                }
            }
        }
        out
    }

    /// `V - E + F`.
    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edges().len() as i64 + self.faces.len() as i64
    }

    /// Sorted one-ring neighbor lists.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }

    /// Vertices incident to an edge that belongs to exactly one face.
    pub fn boundary_vertices(&self) -> Vec<bool> {
        let mut count: HashMap<(usize, usize), u32> = HashMap::new();
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                *count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        let mut boundary = vec![false; self.vertices.len()];
        for ((a, b), n) in count {
            if n == 1 {
                boundary[a] = true;
                boundary[b] = true;
            }
        }
        boundary
    }

    pub fn median_edge_length(&self) -> f64 {
        let mut lengths: Vec<f64> = self
            .edges()
            .into_iter()
            .map(|(a, b)| dist(&self.vertices[a], &self.vertices[b]))
            .collect();
        if lengths.is_empty() {
            return 0.0;
        }
        lengths.sort_by(f64::total_cmp);
        lengths[lengths.len() / 2]
    }

    pub fn centroid(&self) -> Point3 {
        let n = self.vertices.len().max(1) as f64;
        let mut c = [0.0; 3];
        for v in &self.vertices {
            for k in 0..3 {
                c[k] += v[k];
            }
        }
        c.map(|x| x / n)
    }

    /// Radius of the sphere centred at the vertex centroid that encloses
    /// every vertex.
    pub fn bounding_radius(&self) -> f64 {
        let c = self.centroid();
        self.vertices.iter().map(|v| dist(v, &c)).fold(0.0, f64::max)
    }

    pub fn bbox(&self) -> (Point3, Point3) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for v in &self.vertices {
            for k in 0..3 {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        (lo, hi)
    }

    pub fn bbox_diagonal(&self) -> f64 {
        let (lo, hi) = self.bbox();
        dist(&lo, &hi)
    }

    /// Area-weighted vertex normals following the face winding
    /// (counter-clockwise faces point their normal outward).
    pub fn compute_normals(&mut self) {
        let mut normals = vec![[0.0; 3]; self.vertices.len()];
        for f in &self.faces {
            let n = cross(
                &sub(&self.vertices[f[1]], &self.vertices[f[0]]),
                &sub(&self.vertices[f[2]], &self.vertices[f[0]]),
            );
            for &i in f {
                for k in 0..3 {
                    normals[i][k] += n[k];
                }
            }
        }
        for n in &mut normals {
            let len = norm(n);
            if len > 0.0 {
                *n = n.map(|x| x / len);
            }
        }
        self.normals = Some(normals);
    }

    /// Applies `p -> rotation * p * scale + translation` to every vertex and
    /// drops derived fields.
    pub fn transformed(&self, rotation: &[[f64; 3]; 3], scale: f64, translation: Point3) -> TriMesh {
        let vertices = self
            .vertices
            .iter()
            .map(|p| {
                let mut q = [0.0; 3];
                for r in 0..3 {
                    q[r] = scale * (rotation[r][0] * p[0] + rotation[r][1] * p[1] + rotation[r][2] * p[2])
                        + translation[r];
                }
                q
            })
            .collect();
        TriMesh {
            vertices,
            faces: self.faces.clone(),
            normals: None,
            curvatures: None,
        }
    }

    pub(crate) fn face_area(&self, f: &[usize; 3]) -> f64 {
        let n = cross(
            &sub(&self.vertices[f[1]], &self.vertices[f[0]]),
            &sub(&self.vertices[f[2]], &self.vertices[f[0]]),
        );
        0.5 * norm(&n)
    }
}

pub(crate) fn sub(a: &Point3, b: &Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn dot(a: &Point3, b: &Point3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross(a: &Point3, b: &Point3) -> Point3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn norm(a: &Point3) -> f64 {
    dot(a, a).sqrt()
}

pub fn dist(a: &Point3, b: &Point3) -> f64 {
    norm(&sub(a, b))
}
