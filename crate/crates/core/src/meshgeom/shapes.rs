//! Procedural meshes used as fixtures and as the base of synthetic faces.
//! All generators wind faces counter-clockwise when seen from the side the
//! surface normal points to.

use std::collections::HashMap;

use super::{Point3, TriMesh};

/// Unit icosphere; `subdivisions = 3` gives 642 vertices.
pub fn icosphere(subdivisions: u32) -> TriMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Point3> = vec![
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ];
    for v in &mut vertices {
        *v = normalize(*v);
    }
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        let mut mid = |a: usize, b: usize, vertices: &mut Vec<Point3>| -> usize {
            *midpoints.entry((a.min(b), a.max(b))).or_insert_with(|| {
                let (p, q) = (vertices[a], vertices[b]);
                vertices.push(normalize([
                    (p[0] + q[0]) * 0.5,
                    (p[1] + q[1]) * 0.5,
                    (p[2] + q[2]) * 0.5,
                ]));
                vertices.len() - 1
            })
        };
        for &[a, b, c] in &faces {
            let ab = mid(a, b, &mut vertices);
            let bc = mid(b, c, &mut vertices);
            let ca = mid(c, a, &mut vertices);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    TriMesh::new(vertices, faces).expect("icosphere indices are valid")
}

/// Regular `nx x ny` vertex grid in the plane `z = 0`, facing `+z`.
pub fn flat_grid(nx: usize, ny: usize, spacing: f64) -> TriMesh {
    height_field(nx, ny, spacing, |_, _| 0.0)
}

/// Grid over `[0, (nx-1)*spacing] x [0, (ny-1)*spacing]` with `z = f(x, y)`.
pub fn height_field(nx: usize, ny: usize, spacing: f64, f: impl Fn(f64, f64) -> f64) -> TriMesh {
    let mut vertices = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (x, y) = (i as f64 * spacing, j as f64 * spacing);
            vertices.push([x, y, f(x, y)]);
        }
    }
    let mut faces = Vec::new();
    for j in 0..ny.saturating_sub(1) {
        for i in 0..nx.saturating_sub(1) {
            let a = j * nx + i;
            let (b, c, d) = (a + 1, a + nx, a + nx + 1);
            faces.push([a, b, d]);
            faces.push([a, d, c]);
        }
    }
    TriMesh::new(vertices, faces).expect("grid indices are valid")
}

/// Open cylinder around the z axis with outward-facing triangles.
pub fn cylinder(radius: f64, length: f64, around: usize, along: usize) -> TriMesh {
    let mut vertices = Vec::with_capacity(around * along);
    for j in 0..along {
        let z = length * j as f64 / (along - 1) as f64 - 0.5 * length;
        for i in 0..around {
            // alternate rows are staggered by half a step to keep triangles well shaped
            let phi = std::f64::consts::TAU * (i as f64 + 0.5 * (j % 2) as f64) / around as f64;
            vertices.push([radius * phi.cos(), radius * phi.sin(), z]);
        }
    }
    let mut faces = Vec::new();
    for j in 0..along - 1 {
        for i in 0..around {
            let a = j * around + i;
            let b = j * around + (i + 1) % around;
            let c = (j + 1) * around + i;
            let d = (j + 1) * around + (i + 1) % around;
            if j % 2 == 0 {
                faces.push([a, b, c]);
                faces.push([b, d, c]);
            } else {
                faces.push([a, d, c]);
                faces.push([a, b, d]);
            }
        }
    }
    TriMesh::new(vertices, faces).expect("cylinder indices are valid")
}

/// Part of the unit icosphere with `z >= z_min`, facing outward.
pub fn sphere_cap(subdivisions: u32, z_min: f64) -> TriMesh {
    let sphere = icosphere(subdivisions);
    let faces: Vec<[usize; 3]> = sphere
        .faces
        .iter()
        .copied()
        .filter(|f| f.iter().all(|&i| sphere.vertices[i][2] >= z_min - 1e-12))
        .collect();
    compact(&sphere.vertices, &faces)
}

/// Drops vertices not referenced by any face and reindexes.
pub(crate) fn compact(vertices: &[Point3], faces: &[[usize; 3]]) -> TriMesh {
    let mut remap = vec![usize::MAX; vertices.len()];
    let mut kept = Vec::new();
    for f in faces {
        for &i in f {
            if remap[i] == usize::MAX {
                remap[i] = kept.len();
                kept.push(i);
            }
        }
    }
    // preserve original vertex order
    kept.sort_unstable();
    for (new, &old) in kept.iter().enumerate() {
        remap[old] = new;
    }
    let new_vertices = kept.iter().map(|&i| vertices[i]).collect();
    let new_faces = faces.iter().map(|f| f.map(|i| remap[i])).collect();
    TriMesh::new(new_vertices, new_faces).expect("compacted indices are valid")
}

fn normalize(v: Point3) -> Point3 {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn icosphere_counts() {
        for s in 0..4 {
            let m = icosphere(s);
            assert_eq!(m.vertex_count(), 10 * 4usize.pow(s) + 2);
            assert_eq!(m.euler_characteristic(), 2);
        }
    }

    #[test]
    fn grid_counts() {
        let m = flat_grid(4, 3, 0.5);
        assert_eq!(m.vertex_count(), 12);
        assert_eq!(m.face_count(), 12);
        assert_eq!(m.euler_characteristic(), 1);
    }

    #[test]
    fn cap_is_open_disc() {
        let m = sphere_cap(3, 0.0);
        assert_eq!(m.euler_characteristic(), 1);
        assert!(m.vertices.iter().all(|v| v[2] >= -1e-12));
    }
}
