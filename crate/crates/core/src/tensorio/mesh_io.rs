//! Wavefront OBJ and ascii PLY triangle meshes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::FormatError;
use crate::meshgeom::{Point3, TriMesh};

/// Reads an OBJ or ascii PLY mesh, choosing the parser by file extension
/// (falling back to content sniffing for unknown extensions).
pub fn read_mesh(path: impl AsRef<Path>) -> Result<TriMesh, FormatError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| FormatError::io(path, e))?;
    let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
    let is_ply = match ext.as_deref() {
        Some("ply") => true,
        Some("obj") => false,
        _ => bytes.starts_with(b"ply"),
    };
    if is_ply {
        parse_ply(&bytes)
    } else {
        let text = std::str::from_utf8(&bytes).map_err(|_| FormatError::Parse {
            line: 0,
            message: "OBJ file is not valid UTF-8".into(),
        })?;
        parse_obj(text)
    }
}

pub fn parse_obj(text: &str) -> Result<TriMesh, FormatError> {
    let mut vertices: Vec<Point3> = Vec::new();
    let mut faces: Vec<([usize; 3], usize)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let coords: Vec<f64> = tokens
                    .take(3)
                    .map(|t| parse_f64(t, line_no))
                    .collect::<Result<_, _>>()?;
                if coords.len() != 3 {
                    return Err(FormatError::Parse {
                        line: line_no,
                        message: "vertex needs three coordinates".into(),
                    });
                }
                vertices.push([coords[0], coords[1], coords[2]]);
            }
            Some("f") => {
                let refs: Vec<&str> = tokens.collect();
                if refs.len() != 3 {
                    return Err(FormatError::NonTriangleFace {
                        line: line_no,
                        corners: refs.len(),
                    });
                }
                let mut face = [0usize; 3];
                for (slot, r) in face.iter_mut().zip(&refs) {
                    // "v", "v/vt", "v//vn", "v/vt/vn"
                    let head = r.split('/').next().unwrap_or("");
                    let i: i64 = head.parse().map_err(|_| FormatError::Parse {
                        line: line_no,
                        message: format!("bad face index {r:?}"),
                    })?;
                    let resolved = if i > 0 {
                        i - 1
                    } else if i < 0 {
                        vertices.len() as i64 + i
                    } else {
                        -1
                    };
                    if resolved < 0 {
                        return Err(FormatError::DanglingIndex {
                            line: line_no,
                            index: i,
                        });
                    }
                    *slot = resolved as usize;
                }
                faces.push((face, line_no));
            }
            _ => {}
        }
    }
    finish(vertices, faces)
}

fn finish(vertices: Vec<Point3>, faces: Vec<([usize; 3], usize)>) -> Result<TriMesh, FormatError> {
    for (face, line) in &faces {
        if let Some(&bad) = face.iter().find(|&&i| i >= vertices.len()) {
            return Err(FormatError::DanglingIndex {
                line: *line,
                index: bad as i64 + 1,
            });
        }
    }
    if vertices.len() < 3 {
        return Err(FormatError::Parse {
            line: 0,
            message: format!("mesh has {} vertices, need at least 3", vertices.len()),
        });
    }
    let faces = faces.into_iter().map(|(f, _)| f).collect();
    TriMesh::new(vertices, faces).map_err(|e| FormatError::Parse {
        line: 0,
        message: e.to_string(),
    })
}

pub fn parse_ply(bytes: &[u8]) -> Result<TriMesh, FormatError> {
    let text = String::from_utf8_lossy(bytes);
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, "ply")) => {}
        _ => {
            return Err(FormatError::Parse {
                line: 1,
                message: "missing 'ply' signature".into(),
            })
        }
    }
    let mut vertex_count = None;
    let mut face_count = None;
    let mut vertex_props: Vec<String> = Vec::new();
    let mut current: Option<&str> = None;
    loop {
        let (line_no, line) = lines.next().ok_or(FormatError::Parse {
            line: 0,
            message: "unterminated PLY header".into(),
        })?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            ["format", "ascii", ..] => {}
            ["format", other, ..] => return Err(FormatError::BinaryPly(other.to_string())),
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", "vertex", n] => {
                vertex_count = Some(parse_usize(n, line_no)?);
                current = Some("vertex");
            }
            ["element", "face", n] => {
                face_count = Some(parse_usize(n, line_no)?);
                current = Some("face");
            }
            ["element", _, _] => {
                return Err(FormatError::Parse {
                    line: line_no,
                    message: "only vertex and face elements are supported".into(),
                })
            }
            ["property", "list", ..] if current == Some("face") => {}
            ["property", _, name] if current == Some("vertex") => vertex_props.push(name.to_string()),
            ["property", ..] => {}
            ["end_header"] => break,
            _ => {
                return Err(FormatError::Parse {
                    line: line_no,
                    message: format!("unexpected header line {line:?}"),
                })
            }
        }
    }
    let axis = |name: &str| {
        vertex_props
            .iter()
            .position(|p| p == name)
            .ok_or_else(|| FormatError::Parse {
                line: 0,
                message: format!("vertex property {name} missing"),
            })
    };
    let (ix, iy, iz) = (axis("x")?, axis("y")?, axis("z")?);
    let vertex_count = vertex_count.unwrap_or(0);
    let face_count = face_count.unwrap_or(0);

    let mut body = lines.filter(|(_, l)| !l.is_empty());
    let mut vertices = Vec::with_capacity(vertex_count);
    for _ in 0..vertex_count {
        let (line_no, line) = body.next().ok_or(FormatError::Parse {
            line: 0,
            message: "fewer vertex lines than declared".into(),
        })?;
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| parse_f64(t, line_no))
            .collect::<Result<_, _>>()?;
        if vals.len() < vertex_props.len() {
            return Err(FormatError::Parse {
                line: line_no,
                message: "vertex line shorter than its property list".into(),
            });
        }
        vertices.push([vals[ix], vals[iy], vals[iz]]);
    }
    let mut faces = Vec::with_capacity(face_count);
    for _ in 0..face_count {
        let (line_no, line) = body.next().ok_or(FormatError::Parse {
            line: 0,
            message: "fewer face lines than declared".into(),
        })?;
        let vals: Vec<usize> = line
            .split_whitespace()
            .map(|t| parse_usize(t, line_no))
            .collect::<Result<_, _>>()?;
        let corners = vals.first().copied().unwrap_or(0);
        if corners != 3 || vals.len() < 4 {
            return Err(FormatError::NonTriangleFace { line: line_no, corners });
        }
        faces.push(([vals[1], vals[2], vals[3]], line_no));
    }
    // PLY indices are zero based; `finish` reports them one based like OBJ
    finish(vertices, faces)
}

fn parse_f64(t: &str, line: usize) -> Result<f64, FormatError> {
    let v: f64 = t.parse().map_err(|_| FormatError::Parse {
        line,
        message: format!("bad number {t:?}"),
    })?;
    if !v.is_finite() {
        return Err(FormatError::Parse {
            line,
            message: format!("non-finite value {t:?}"),
        });
    }
    Ok(v)
}

fn parse_usize(t: &str, line: usize) -> Result<usize, FormatError> {
    t.parse().map_err(|_| FormatError::Parse {
        line,
        message: format!("bad count {t:?}"),
    })
}

/// OBJ text with shortest round-trip float formatting.
pub fn obj_string(mesh: &TriMesh) -> String {
    let mut out = String::with_capacity(mesh.vertex_count() * 40 + mesh.face_count() * 20);
    for v in &mesh.vertices {
        let _ = writeln!(out, "v {:?} {:?} {:?}", v[0], v[1], v[2]);
    }
    for f in &mesh.faces {
        let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    out
}

pub fn write_obj(mesh: &TriMesh, path: impl AsRef<Path>) -> Result<(), FormatError> {
    let path = path.as_ref();
    fs::write(path, obj_string(mesh)).map_err(|e| FormatError::io(path, e))
}
