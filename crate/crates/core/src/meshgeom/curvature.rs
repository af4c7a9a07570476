//! Principal curvatures by local cubic fitting.
//!
//! Around every vertex the surface is written as a height function over the
//! tangent plane,
//!
//! `h(x, y) = A/2 x^2 + B xy + C/2 y^2 + D x^3 + E x^2 y + F x y^2 + G y^3`,
//!
//! and fitted by least squares to the neighbour positions and to the
//! neighbour normals (through `h_x = -n_x/n_z`, `h_y = -n_y/n_z`). The
//! principal curvatures are the eigenvalues of `-[[A, B], [B, C]]`, so a
//! sphere seen from outside with outward normals has positive curvature.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::{cross, dist, dot, norm, sub, Curvatures, GeometryError, Point3, TriMesh};

/// Neighbourhood radius in units of the median edge length.
pub const DEFAULT_RING_FACTOR: f64 = 2.5;
const CUBIC_MIN_NEIGHBORS: usize = 9;
const QUADRATIC_MIN_NEIGHBORS: usize = 5;
/// Gaussian fit weight width, as a fraction of the neighbourhood radius.
const WEIGHT_WIDTH: f64 = 0.3;

/// Estimates curvatures with the default neighbourhood radius
/// (2.5 x median edge length).
pub fn estimate_curvatures(mesh: &TriMesh) -> Result<TriMesh, GeometryError> {
    let radius = DEFAULT_RING_FACTOR * mesh.median_edge_length();
    estimate_curvatures_with_radius(mesh, radius)
}

/// Estimates `k1 >= k2` per vertex using the two-ring plus every vertex
/// reachable through edges within `ring_radius` of the centre.
pub fn estimate_curvatures_with_radius(mesh: &TriMesh, ring_radius: f64) -> Result<TriMesh, GeometryError> {
    if mesh.faces.is_empty() {
        return Err(GeometryError::EmptyMesh);
    }
    let mut out = mesh.clone();
    if out.normals.is_none() {
        out.compute_normals();
    }
    let normals = out.normals.as_ref().unwrap();
    let adj = out.adjacency();
    let scale = if ring_radius > 0.0 { ring_radius } else { 1.0 };

    let fitted: Vec<(f64, f64)> = (0..out.vertex_count())
        .into_par_iter()
        .map(|i| {
            let nbrs = neighborhood(&out.vertices, &adj, i, ring_radius);
            fit_vertex(&out.vertices, normals, i, &nbrs, scale)
        })
        .collect::<Result<_, _>>()?;
    let (k1, k2) = fitted.into_iter().unzip();
    out.curvatures = Some(Curvatures { k1, k2 });
    Ok(out)
}

fn neighborhood(vertices: &[Point3], adj: &[Vec<usize>], center: usize, radius: f64) -> Vec<usize> {
    let mut seen = vec![center];
    let mut result = Vec::new();
    let push = |v: usize, seen: &mut Vec<usize>, result: &mut Vec<usize>| {
        if !seen.contains(&v) {
            seen.push(v);
            result.push(v);
            true
        } else {
            false
        }
    };
    // two-ring
    for &a in &adj[center] {
        push(a, &mut seen, &mut result);
    }
    for &a in &adj[center] {
        for &b in &adj[a] {
            push(b, &mut seen, &mut result);
        }
    }
    // radius-limited flood
    let p = vertices[center];
    let mut queue: VecDeque<usize> = result
        .iter()
        .copied()
        .filter(|&v| dist(&vertices[v], &p) <= radius)
        .collect();
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if dist(&vertices[w], &p) <= radius && push(w, &mut seen, &mut result) {
                queue.push_back(w);
            }
        }
    }
    result.sort_unstable();
    result
}

fn tangent_frame(n: &Point3) -> (Point3, Point3) {
    let axis = if n[0].abs() <= n[1].abs() && n[0].abs() <= n[2].abs() {
        [1.0, 0.0, 0.0]
    } else if n[1].abs() <= n[2].abs() {
        [0.0, 1.0, 0.0]
    } else {
        [0.0, 0.0, 1.0]
    };
    let u = cross(n, &axis);
    let len = norm(&u);
    let u = u.map(|x| x / len);
    let v = cross(n, &u);
    (u, v)
}

fn fit_vertex(
    vertices: &[Point3],
    normals: &[Point3],
    i: usize,
    nbrs: &[usize],
    scale: f64,
) -> Result<(f64, f64), GeometryError> {
    let cubic = if nbrs.len() >= CUBIC_MIN_NEIGHBORS {
        true
    } else if nbrs.len() >= QUADRATIC_MIN_NEIGHBORS {
        false
    } else {
        return Err(GeometryError::DegenerateNeighborhood {
            vertex: i,
            neighbors: nbrs.len(),
        });
    };
    let n = normals[i];
    if norm(&n) == 0.0 {
        return Err(GeometryError::DegenerateNeighborhood {
            vertex: i,
            neighbors: 0,
        });
    }
    let (u, v) = tangent_frame(&n);
    let cols = if cubic { 7 } else { 3 };
    let mut rows: Vec<[f64; 7]> = Vec::with_capacity(3 * nbrs.len());
    let mut rhs: Vec<f64> = Vec::with_capacity(3 * nbrs.len());
    for &j in nbrs {
        let d = sub(&vertices[j], &vertices[i]);
        let (x, y, z) = (dot(&d, &u) / scale, dot(&d, &v) / scale, dot(&d, &n) / scale);
        // far neighbours carry more higher-order bias, so they count less
        let w = (-(x * x + y * y + z * z) / (2.0 * WEIGHT_WIDTH * WEIGHT_WIDTH))
            .exp()
            .sqrt();
        rows.push(
            [
                0.5 * x * x,
                x * y,
                0.5 * y * y,
                x * x * x,
                x * x * y,
                x * y * y,
                y * y * y,
            ]
            .map(|e| w * e),
        );
        rhs.push(w * z);
        let nj = normals[j];
        let (a, b, c) = (dot(&nj, &u), dot(&nj, &v), dot(&nj, &n));
        if c > 0.1 {
            rows.push([x, y, 0.0, 3.0 * x * x, 2.0 * x * y, y * y, 0.0].map(|e| w * e));
            rhs.push(-w * a / c);
            rows.push([0.0, x, y, 0.0, x * x, 2.0 * x * y, 3.0 * y * y].map(|e| w * e));
            rhs.push(-w * b / c);
        }
    }
    let design = DMatrix::from_fn(rows.len(), cols, |r, c| rows[r][c]);
    let target = DVector::from_vec(rhs);
    let normal_matrix = design.transpose() * &design;
    let moment = design.transpose() * target;
    let coeffs =
        match normal_matrix.clone().cholesky() {
            Some(ch) => ch.solve(&moment),
            None => normal_matrix.svd(true, true).solve(&moment, 1e-14).map_err(|_| {
                GeometryError::DegenerateNeighborhood {
                    vertex: i,
                    neighbors: nbrs.len(),
                }
            })?,
        };
    // shape operator -[[A, B], [B, C]], back to mesh units
    let (a, b, c) = (-coeffs[0] / scale, -coeffs[1] / scale, -coeffs[2] / scale);
    let mean = 0.5 * (a + c);
    let radius = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    Ok((mean + radius, mean - radius))
}
