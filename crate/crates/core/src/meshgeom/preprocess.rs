use std::collections::{BTreeMap, HashSet};

use super::shapes::compact;
use super::{dist, GeometryError, Point3, TriMesh};

/// Sphere crop. Without an explicit centre the crop is anchored at the nose
/// proxy: the centroid of the `top_fraction` of vertices with largest `z`.
/// Without an explicit radius it is `radius_fraction` times the largest
/// vertex distance from the centre.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CropParams {
    pub center: Option<Point3>,
    pub radius: Option<f64>,
    pub top_fraction: f64,
    pub radius_fraction: f64,
}

impl Default for CropParams {
    fn default() -> Self {
        Self {
            center: None,
            radius: None,
            top_fraction: 0.1,
            radius_fraction: 0.95,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreprocessParams {
    /// Uniform Laplacian smoothing passes.
    pub smoothing_iterations: usize,
    /// Step towards the neighbour average per pass, in `[0, 1]`.
    pub smoothing_weight: f64,
    pub crop: Option<CropParams>,
    /// Boundary loops with at most this many edges are filled; the longest
    /// loop is the outer boundary and is never filled. Zero disables.
    pub hole_max_edges: usize,
    /// One-ring median passes over vertex depth (`z`).
    pub median_passes: usize,
}

impl Default for PreprocessParams {
    fn default() -> Self {
        Self {
            smoothing_iterations: 2,
            smoothing_weight: 0.7,
            crop: Some(CropParams::default()),
            hole_max_edges: 12,
            median_passes: 1,
        }
    }
}

impl PreprocessParams {
    /// Configuration under which a clean mesh passes through unchanged.
    pub fn identity() -> Self {
        Self {
            smoothing_iterations: 0,
            smoothing_weight: 0.7,
            crop: None,
            hole_max_edges: 12,
            median_passes: 0,
        }
    }
}

/// Centroid of the `fraction` of vertices with the largest `z` (at least one).
pub fn nose_proxy(mesh: &TriMesh, fraction: f64) -> Point3 {
    let mut order: Vec<usize> = (0..mesh.vertex_count()).collect();
    order.sort_by(|&a, &b| mesh.vertices[b][2].total_cmp(&mesh.vertices[a][2]).then(a.cmp(&b)));
    let take = ((mesh.vertex_count() as f64 * fraction).round() as usize).clamp(1, mesh.vertex_count().max(1));
    let mut c = [0.0; 3];
    for &i in order.iter().take(take) {
        for (ck, v) in c.iter_mut().zip(&mesh.vertices[i]) {
            *ck += v;
        }
    }
    c.map(|x| x / take as f64)
}

/// Smoothing, crop, hole filling and median filtering, in that order.
/// Zero-area faces and unreferenced vertices are dropped. Normals and
/// curvatures of the input are discarded.
pub fn preprocess(mesh: &TriMesh, params: &PreprocessParams) -> Result<TriMesh, GeometryError> {
    if mesh.faces.is_empty() {
        return Err(GeometryError::EmptyMesh);
    }
    let mut vertices = mesh.vertices.clone();
    if params.smoothing_iterations > 0 {
        let adj = mesh.adjacency();
        for _ in 0..params.smoothing_iterations {
            vertices = laplacian_step(&vertices, &adj, params.smoothing_weight);
        }
    }
    let mut faces = mesh.faces.clone();

    if let Some(crop) = &params.crop {
        let probe = TriMesh {
            vertices: vertices.clone(),
            faces: faces.clone(),
            normals: None,
            curvatures: None,
        };
        let center = crop.center.unwrap_or_else(|| nose_proxy(&probe, crop.top_fraction));
        let radius = crop
            .radius
            .unwrap_or_else(|| crop.radius_fraction * vertices.iter().map(|v| dist(v, &center)).fold(0.0, f64::max));
        let inside: Vec<bool> = vertices.iter().map(|v| dist(v, &center) <= radius).collect();
        faces.retain(|f| f.iter().any(|&i| inside[i]));
        if faces.is_empty() {
            return Err(GeometryError::EmptyAfterCrop);
        }
    }

    let mut out = compact(&vertices, &faces);
    if params.hole_max_edges >= 3 {
        fill_holes(&mut out, params.hole_max_edges);
    }
    for _ in 0..params.median_passes {
        median_depth(&mut out);
    }
    let cleaned: Vec<[usize; 3]> = out
        .faces
        .iter()
        .copied()
        .filter(|f| f[0] != f[1] && f[1] != f[2] && f[0] != f[2] && out.face_area(f) > 0.0)
        .collect();
    if cleaned.is_empty() {
        return Err(GeometryError::EmptyMesh);
    }
    if cleaned.len() == out.faces.len() {
        return Ok(out);
    }
    Ok(compact(&out.vertices, &cleaned))
}

fn laplacian_step(vertices: &[Point3], adj: &[Vec<usize>], weight: f64) -> Vec<Point3> {
    vertices
        .iter()
        .zip(adj)
        .map(|(v, nbrs)| {
            if nbrs.is_empty() {
                return *v;
            }
            let mut avg = [0.0; 3];
            for &j in nbrs {
                for k in 0..3 {
                    avg[k] += vertices[j][k];
                }
            }
            let inv = 1.0 / nbrs.len() as f64;
            [0, 1, 2].map(|k| v[k] + weight * (avg[k] * inv - v[k]))
        })
        .collect()
}

/// Boundary loops as vertex sequences `v0 -> v1 -> ... -> v0` following the
/// direction of the boundary half-edges.
pub(crate) fn boundary_loops(mesh: &TriMesh) -> Vec<Vec<usize>> {
    let directed: HashSet<(usize, usize)> = mesh
        .faces
        .iter()
        .flat_map(|f| (0..3).map(move |k| (f[k], f[(k + 1) % 3])))
        .collect();
    let mut outgoing: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &(a, b) in &directed {
        if !directed.contains(&(b, a)) {
            outgoing.entry(a).or_default().push(b);
        }
    }
    for targets in outgoing.values_mut() {
        targets.sort_unstable();
    }
    let mut loops = Vec::new();
    while let Some((&start, _)) = outgoing.iter().find(|(_, t)| !t.is_empty()) {
        let mut cycle = vec![start];
        let mut current = start;
        let closed = loop {
            let Some(next) = outgoing
                .get_mut(&current)
                .and_then(|t| (!t.is_empty()).then(|| t.remove(0)))
            else {
                break false;
            };
            if next == start {
                break true;
            }
            cycle.push(next);
            current = next;
        };
        if closed && cycle.len() >= 3 {
            loops.push(cycle);
        }
    }
    loops
}

fn fill_holes(mesh: &mut TriMesh, max_edges: usize) {
    let loops = boundary_loops(mesh);
    if loops.len() < 2 {
        return;
    }
    let perimeter = |l: &Vec<usize>| -> f64 {
        (0..l.len())
            .map(|i| dist(&mesh.vertices[l[i]], &mesh.vertices[l[(i + 1) % l.len()]]))
            .sum()
    };
    let outer = (0..loops.len())
        .max_by(|&a, &b| perimeter(&loops[a]).total_cmp(&perimeter(&loops[b])).then(b.cmp(&a)))
        .unwrap();
    for (i, cycle) in loops.iter().enumerate() {
        if i == outer || cycle.len() > max_edges {
            continue;
        }
        for k in 1..cycle.len() - 1 {
            mesh.faces.push([cycle[0], cycle[k + 1], cycle[k]]);
        }
    }
}

fn median_depth(mesh: &mut TriMesh) {
    let adj = mesh.adjacency();
    let z: Vec<f64> = mesh.vertices.iter().map(|v| v[2]).collect();
    let mut window = Vec::new();
    for (i, nbrs) in adj.iter().enumerate() {
        if nbrs.is_empty() {
            continue;
        }
        window.clear();
        window.push(z[i]);
        window.extend(nbrs.iter().map(|&j| z[j]));
        window.sort_by(f64::total_cmp);
        let m = window.len();
        mesh.vertices[i][2] = if m % 2 == 1 {
            window[m / 2]
        } else {
            0.5 * (window[m / 2 - 1] + window[m / 2])
        };
    }
}
