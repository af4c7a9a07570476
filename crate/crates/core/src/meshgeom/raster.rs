//! Orthographic z-buffer rendering of depth and principal-curvature maps.
//!
//! The view looks down the `-z` axis, so the surface point with the largest
//! `z` wins a pixel. The frame is the square that bounds the mesh's `xy`
//! extent, centred on it; row 0 is the top of the image (largest `y`).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{GeometryError, TriMesh};
use crate::tensorio::{FeatureTensor, FormatError};

/// Side length of every rendered map.
pub const MAP_SIZE: usize = 224;

/// Curvatures with magnitude below `FLAT_FLOOR / R` (R the bounding radius)
/// are treated as flat when choosing the curvature map scale.
const FLAT_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapKind {
    Depth,
    PrincipalCurvature,
}

/// A rendered single-channel map, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MapImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
    /// `true` where a triangle covers the pixel.
    pub foreground: Vec<bool>,
    pub kind: MapKind,
}

impl MapImage {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.width + col]
    }

    pub fn foreground_count(&self) -> usize {
        self.foreground.iter().filter(|&&f| f).count()
    }

    /// `[1, height, width]` tensor.
    pub fn to_tensor(&self) -> FeatureTensor {
        FeatureTensor::from_f64(vec![1, self.height, self.width], &self.pixels)
            .expect("map pixels are finite and sized to the image")
    }

    /// Binary 8-bit PGM (`P5`, max value 255).
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut header = String::new();
        let _ = write!(header, "P5\n{} {}\n255\n", self.width, self.height);
        let mut out = header.into_bytes();
        out.extend(self.pixels.iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
        out
    }

    pub fn write_pgm(&self, path: &Path) -> Result<(), FormatError> {
        fs::write(path, self.to_pgm()).map_err(|e| FormatError::io(path, e))
    }
}

/// Depth map: front-most `z`, min-max scaled to `[0, 1]` over the
/// foreground (nearest surface is 1). A constant-depth foreground, up to a
/// relative 1e-9, maps to 1.
/// Background pixels are exactly 0.
pub fn render_depth_map(mesh: &TriMesh) -> Result<MapImage, GeometryError> {
    let z: Vec<f64> = mesh.vertices.iter().map(|v| v[2]).collect();
    let (mut pixels, foreground) = rasterize(mesh, &z)?;
    let (lo, hi) = foreground_range(&pixels, &foreground);
    // interpolation round-off on a constant depth is not a real range
    let flat = hi - lo <= 1e-9 * lo.abs().max(hi.abs());
    for (p, &fg) in pixels.iter_mut().zip(&foreground) {
        *p = if !fg {
            0.0
        } else if !flat {
            (*p - lo) / (hi - lo)
        } else {
            1.0
        };
    }
    Ok(image(pixels, foreground, MapKind::Depth))
}

/// Curvature map of `k1`, mapped by `0.5 + k1 / (2 s)` with `s` the largest
/// foreground `|k1|` (floored so numerically flat surfaces stay at 0.5).
/// Zero curvature is always 0.5 and the map is an affine function of `k1`
/// with range inside `[0, 1]`. Background pixels are 0.
pub fn render_curvature_map(mesh: &TriMesh) -> Result<MapImage, GeometryError> {
    let curv = mesh.curvatures.as_ref().ok_or(GeometryError::CurvaturesMissing)?;
    let (mut pixels, foreground) = rasterize(mesh, &curv.k1)?;
    let (lo, hi) = foreground_range(&pixels, &foreground);
    let floor = FLAT_FLOOR / mesh.bounding_radius().max(f64::MIN_POSITIVE);
    let scale = lo.abs().max(hi.abs()).max(floor);
    for (p, &fg) in pixels.iter_mut().zip(&foreground) {
        *p = if fg {
            (0.5 + *p / (2.0 * scale)).clamp(0.0, 1.0)
        } else {
            0.0
        };
    }
    Ok(image(pixels, foreground, MapKind::PrincipalCurvature))
}

fn image(pixels: Vec<f64>, foreground: Vec<bool>, kind: MapKind) -> MapImage {
    MapImage {
        width: MAP_SIZE,
        height: MAP_SIZE,
        pixels,
        foreground,
        kind,
    }
}

fn foreground_range(pixels: &[f64], foreground: &[bool]) -> (f64, f64) {
    pixels
        .iter()
        .zip(foreground)
        .filter(|(_, &f)| f)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (&p, _)| {
            (lo.min(p), hi.max(p))
        })
}

/// Per-pixel value of `attr` interpolated on the front-most triangle.
fn rasterize(mesh: &TriMesh, attr: &[f64]) -> Result<(Vec<f64>, Vec<bool>), GeometryError> {
    if mesh.faces.is_empty() {
        return Err(GeometryError::EmptyMesh);
    }
    let (lo, hi) = mesh.bbox();
    let side = (hi[0] - lo[0]).max(hi[1] - lo[1]);
    let side = if side > 0.0 { side } else { 1.0 };
    let cx = 0.5 * (lo[0] + hi[0]);
    let cy = 0.5 * (lo[1] + hi[1]);
    let n = MAP_SIZE as f64;
    // continuous pixel coordinates: column from x, row from y (flipped)
    let to_px = |p: &[f64; 3]| ((p[0] - cx) / side * n + 0.5 * n, (cy - p[1]) / side * n + 0.5 * n);

    let mut depth = vec![f64::NEG_INFINITY; MAP_SIZE * MAP_SIZE];
    let mut value = vec![0.0; MAP_SIZE * MAP_SIZE];
    for f in &mesh.faces {
        let p = f.map(|i| to_px(&mesh.vertices[i]));
        let z = f.map(|i| mesh.vertices[i][2]);
        let a = f.map(|i| attr[i]);
        let area = (p[1].0 - p[0].0) * (p[2].1 - p[0].1) - (p[2].0 - p[0].0) * (p[1].1 - p[0].1);
        if area.abs() < 1e-14 {
            continue;
        }
        let tol = 1e-9 * area.abs();
        let xmin = p.iter().map(|q| q.0).fold(f64::INFINITY, f64::min);
        let xmax = p.iter().map(|q| q.0).fold(f64::NEG_INFINITY, f64::max);
        let ymin = p.iter().map(|q| q.1).fold(f64::INFINITY, f64::min);
        let ymax = p.iter().map(|q| q.1).fold(f64::NEG_INFINITY, f64::max);
        let c0 = ((xmin - 0.5).ceil().max(0.0)) as usize;
        let c1 = ((xmax - 0.5).floor().min(n - 1.0)).max(-1.0);
        let r0 = ((ymin - 0.5).ceil().max(0.0)) as usize;
        let r1 = ((ymax - 0.5).floor().min(n - 1.0)).max(-1.0);
        if c1 < 0.0 || r1 < 0.0 {
            continue;
        }
        for row in r0..=r1 as usize {
            let y = row as f64 + 0.5;
            for col in c0..=c1 as usize {
                let x = col as f64 + 0.5;
                let w0 = (p[1].0 - x) * (p[2].1 - y) - (p[2].0 - x) * (p[1].1 - y);
                let w1 = (p[2].0 - x) * (p[0].1 - y) - (p[0].0 - x) * (p[2].1 - y);
                let w2 = (p[0].0 - x) * (p[1].1 - y) - (p[1].0 - x) * (p[0].1 - y);
                let (w0, w1, w2) = if area > 0.0 { (w0, w1, w2) } else { (-w0, -w1, -w2) };
                if w0 < -tol || w1 < -tol || w2 < -tol {
                    continue;
                }
                let s = w0 + w1 + w2;
                let (b0, b1, b2) = (w0 / s, w1 / s, w2 / s);
                let zi = b0 * z[0] + b1 * z[1] + b2 * z[2];
                let idx = row * MAP_SIZE + col;
                if zi > depth[idx] {
                    depth[idx] = zi;
                    value[idx] = b0 * a[0] + b1 * a[1] + b2 * a[2];
                }
            }
        }
    }
    let foreground: Vec<bool> = depth.iter().map(|d| d.is_finite()).collect();
    Ok((value, foreground))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meshgeom::{estimate_curvatures, shapes};

    #[test]
    fn constant_plane_depth() {
        let mut m = shapes::flat_grid(11, 11, 0.2);
        m.vertices.iter_mut().for_each(|v| v[2] = 5.0);
        let img = render_depth_map(&m).unwrap();
        assert_eq!((img.width, img.height), (224, 224));
        // a square grid fills the whole frame
        assert_eq!(img.foreground_count(), 224 * 224);
        assert!(img.pixels.iter().all(|&p| p == 1.0));
    }

    #[test]
    fn hemisphere_peak_at_centre() {
        let m = shapes::sphere_cap(4, 0.0);
        let img = render_depth_map(&m).unwrap();
        let (mut best, mut at) = (f64::NEG_INFINITY, (0, 0));
        for r in 0..224 {
            for c in 0..224 {
                if img.get(r, c) > best {
                    best = img.get(r, c);
                    at = (r, c);
                }
            }
        }
        assert!(at.0.abs_diff(111) <= 1 && at.0.abs_diff(112) <= 1, "{at:?}");
        assert!(at.1.abs_diff(111) <= 1 && at.1.abs_diff(112) <= 1, "{at:?}");
        // radial symmetry: four-fold mirror images agree closely
        for (r, c) in [(60, 100), (40, 130), (150, 90)] {
            let v = img.get(r, c);
            assert!((v - img.get(223 - r, c)).abs() < 0.02);
            assert!((v - img.get(r, 223 - c)).abs() < 0.02);
            assert!((v - img.get(c, r)).abs() < 0.02);
        }
        assert!(img.pixels.iter().all(|&p| (0.0..=1.0).contains(&p)));
        assert_eq!(img.get(0, 0), 0.0);
    }

    #[test]
    fn empty_and_missing() {
        let m = TriMesh::new(vec![[0.0; 3]; 3], vec![]).unwrap();
        assert!(matches!(render_depth_map(&m), Err(GeometryError::EmptyMesh)));
        let g = shapes::flat_grid(4, 4, 1.0);
        assert!(matches!(
            render_curvature_map(&g),
            Err(GeometryError::CurvaturesMissing)
        ));
    }

    #[test]
    fn flat_curvature_map_constant() {
        let g = estimate_curvatures(&shapes::flat_grid(15, 15, 0.1)).unwrap();
        let img = render_curvature_map(&g).unwrap();
        let fg: Vec<f64> = (0..img.pixels.len())
            .filter(|&i| img.foreground[i])
            .map(|i| img.pixels[i])
            .collect();
        assert!(!fg.is_empty());
        assert!(fg.iter().all(|&v| (v - 0.5).abs() < 1e-3));
    }

    #[test]
    fn sphere_curvature_map_spread() {
        let m = estimate_curvatures(&shapes::icosphere(4)).unwrap();
        let img = render_curvature_map(&m).unwrap();
        let (lo, hi) = foreground_range(&img.pixels, &img.foreground);
        assert!(hi - lo <= 0.05 * hi, "spread {lo}..{hi}");
    }

    #[test]
    fn deterministic_and_exports() {
        let m = shapes::sphere_cap(3, 0.1);
        let a = render_depth_map(&m).unwrap();
        let b = render_depth_map(&m).unwrap();
        assert_eq!(a, b);
        let t = a.to_tensor();
        assert_eq!(t.dims(), &[1, 224, 224]);
        let pgm = a.to_pgm();
        assert!(pgm.starts_with(b"P5\n224 224\n255\n"));
        assert_eq!(pgm.len(), 15 + 224 * 224);
    }
}
