use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::PipelineError;
use crate::meshgeom::shapes::sphere_cap;
use crate::meshgeom::{Point3, TriMesh};
use crate::tensorio::{write_fmap, write_obj, DatasetManifest, FeatureTensor, FormatError, Label, ManifestEntry};

/// Stream name of the synthetic activation tensors.
pub const SYNTH_STREAM: &str = "synthetic-deep";

const CHANNELS: usize = 48;
const SIDE: usize = 14;
const CLASS_RANK: usize = 4;

/// Shape of a synthetic dataset: `subjects` x `classes` samples, one scan
/// and one `48 x 14 x 14` tensor each.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthParams {
    pub seed: u64,
    pub subjects: usize,
    /// Leading classes of the canonical label order, at most 7.
    pub classes: usize,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            seed: 0,
            subjects: 30,
            classes: 6,
        }
    }
}

fn rng_for(seed: u64, tag: u64, a: usize, b: usize) -> ChaCha8Rng {
    let mixed = seed
        ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (a as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
        ^ (b as u64).wrapping_mul(0x1656_67B1_9E37_79F9);
    ChaCha8Rng::seed_from_u64(mixed)
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn unit(theta: f64, phi: f64) -> Point3 {
    [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]
}

/// Gaussian bump on the unit sphere: `(direction, amplitude, angular width)`.
type Bump = (Point3, f64, f64);

fn class_bumps(class: usize) -> Vec<Bump> {
    let phi = 2.0 * PI * class as f64 / 7.0;
    vec![(unit(0.55, phi), 0.08, 0.25), (unit(0.95, phi + 2.4), -0.06, 0.25)]
}

fn subject_bumps(seed: u64, subject: usize) -> (f64, Vec<Bump>) {
    let mut rng = rng_for(seed, 1, subject, 0);
    let scale = 1.0 + 0.05 * gauss(&mut rng);
    let bumps = (0..3)
        .map(|_| {
            let theta = rng.random_range(0.0..1.2);
            let phi = rng.random_range(0.0..2.0 * PI);
            (unit(theta, phi), 0.02 * gauss(&mut rng), 0.3)
        })
        .collect();
    (scale, bumps)
}

fn synth_mesh(base: &TriMesh, seed: u64, subject: usize, class: usize) -> TriMesh {
    let (scale, mut bumps) = subject_bumps(seed, subject);
    bumps.extend(class_bumps(class));
    let mut rng = rng_for(seed, 2, subject, class);
    let vertices = base
        .vertices
        .iter()
        .map(|v| {
            let mut r = 1.0;
            for (d, amp, width) in &bumps {
                let cos = (v[0] * d[0] + v[1] * d[1] + v[2] * d[2]).clamp(-1.0, 1.0);
                let ang = cos.acos();
                r += amp * (-ang * ang / (2.0 * width * width)).exp();
            }
            r += 0.001 * gauss(&mut rng);
            v.map(|x| x * r * scale)
        })
        .collect();
    TriMesh::new(vertices, base.faces.clone()).expect("same connectivity as the base cap")
}

/// Random `CHANNELS x r` basis.
fn basis(rng: &mut ChaCha8Rng, r: usize) -> Vec<[f64; CHANNELS]> {
    (0..r)
        .map(|_| {
            let mut col = [0.0; CHANNELS];
            for x in &mut col {
                *x = gauss(rng);
            }
            col
        })
        .collect()
}

/// Activations whose channel covariance is a class-specific low-rank term
/// plus a subject-specific term plus isotropic noise.
fn synth_tensor(seed: u64, subject: usize, class: usize) -> FeatureTensor {
    let class_basis = basis(&mut rng_for(seed, 3, class, 0), CLASS_RANK);
    let subject_basis = basis(&mut rng_for(seed, 4, subject, 0), 2);
    let mut rng = rng_for(seed, 5, subject, class);
    let class_gain: Vec<f64> = (0..CLASS_RANK).map(|_| 1.0 + 0.2 * gauss(&mut rng)).collect();
    let hw = SIDE * SIDE;
    let mut data = vec![0.0; CHANNELS * hw];
    for p in 0..hw {
        let mut x = [0.0; CHANNELS];
        for (col, g) in class_basis.iter().zip(&class_gain) {
            let z = g * gauss(&mut rng);
            for (xi, ci) in x.iter_mut().zip(col) {
                *xi += z * ci;
            }
        }
        for col in &subject_basis {
            let z = 0.5 * gauss(&mut rng);
            for (xi, ci) in x.iter_mut().zip(col) {
                *xi += z * ci;
            }
        }
        for (c, xi) in x.iter().enumerate() {
            data[c * hw + p] = xi + 0.3 * gauss(&mut rng);
        }
    }
    FeatureTensor::from_f64(vec![CHANNELS, SIDE, SIDE], &data).expect("dims match data")
}

/// Writes a labelled synthetic dataset under `dir`: `meshes/<id>.obj`,
/// `tensors/<id>.synthetic-deep.fmap` and `manifest.tsv` with relative
/// paths. Returns the manifest with paths resolved against `dir`.
///
/// Expressions are encoded as class-dependent radial bumps on a spherical
/// cap (plus per-subject shape variation and noise) and as class-dependent
/// channel correlations in the tensors. Output depends only on `params`.
pub fn generate_synthetic(dir: &Path, params: &SynthParams) -> Result<DatasetManifest, PipelineError> {
    if params.classes < 2 || params.classes > Label::ALL.len() {
        return Err(PipelineError::BadConfig(format!(
            "synthetic class count {} must be in 2..=7",
            params.classes
        )));
    }
    if params.subjects == 0 {
        return Err(PipelineError::BadConfig(
            "synthetic subject count must be positive".into(),
        ));
    }
    let mesh_dir = dir.join("meshes");
    let tensor_dir = dir.join("tensors");
    for d in [&mesh_dir, &tensor_dir] {
        fs::create_dir_all(d).map_err(|e| FormatError::io(d, e))?;
    }
    let base = sphere_cap(5, 0.2);
    let jobs: Vec<(usize, usize)> = (0..params.subjects)
        .flat_map(|s| (0..params.classes).map(move |c| (s, c)))
        .collect();
    let entries = jobs
        .par_iter()
        .map(|&(s, c)| {
            let label = Label::ALL[c];
            let sample_id = format!("p{s:03}_{}", label.code());
            let mesh_rel = PathBuf::from("meshes").join(format!("{sample_id}.obj"));
            let tensor_rel = PathBuf::from("tensors").join(format!("{sample_id}.{SYNTH_STREAM}.fmap"));
            write_obj(&synth_mesh(&base, params.seed, s, c), dir.join(&mesh_rel))?;
            write_fmap(&synth_tensor(params.seed, s, c), dir.join(&tensor_rel))?;
            Ok(ManifestEntry {
                sample_id,
                subject_id: format!("p{s:03}"),
                label,
                mesh_path: Some(mesh_rel),
                tensor_paths: BTreeMap::from([(SYNTH_STREAM.to_string(), tensor_rel)]),
            })
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;
    let manifest = DatasetManifest { entries };
    let path = dir.join("manifest.tsv");
    fs::write(&path, manifest.to_text()).map_err(|e| FormatError::io(&path, e))?;
    let mut resolved = manifest;
    resolved.resolve_paths(dir);
    Ok(resolved)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_labelled() {
        let a = synth_tensor(7, 3, 2);
        assert_eq!(a, synth_tensor(7, 3, 2));
        assert_ne!(a, synth_tensor(7, 3, 1));
        assert_eq!(a.dims(), &[CHANNELS, SIDE, SIDE]);
        let base = sphere_cap(3, 0.2);
        let m = synth_mesh(&base, 7, 3, 2);
        assert_eq!(m, synth_mesh(&base, 7, 3, 2));
        assert_eq!(m.faces, base.faces);
    }

    #[test]
    fn rejects_bad_params() {
        let dir = std::env::temp_dir();
        let p = SynthParams {
            classes: 8,
            ..SynthParams::default()
        };
        assert!(generate_synthetic(&dir, &p).is_err());
    }
}
