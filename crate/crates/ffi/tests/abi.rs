use std::ffi::{CStr, CString};
use std::ptr;

use facecov::pipeline::{generate_synthetic, save_trained, train_full, RunConfig, SynthParams};
use facecov::spdnet::{affine_distance, SpdChain, SpdChainConfig};
use facecov::SpdMatrix;
use facecov_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(fc_last_error_message()) }
        .to_string_lossy()
        .into_owned()
}

fn matrix(d: usize, data: &[f64]) -> *mut FcMatrix {
    let mut m = ptr::null_mut();
    assert_eq!(
        unsafe { fc_matrix_new(d, data.as_ptr(), &mut m) },
        FcStatus::Ok,
        "{}",
        last_error()
    );
    m
}

fn copy(m: *const FcMatrix) -> Vec<f64> {
    let d = unsafe { fc_matrix_dim(m) };
    let mut buf = vec![0.0; d * d];
    assert_eq!(unsafe { fc_matrix_copy(m, buf.as_mut_ptr(), buf.len()) }, FcStatus::Ok);
    buf
}

/// `[c, h, w]` tensor whose channels are distinct smooth patterns.
fn tensor(c: usize, h: usize, w: usize) -> *mut FcTensor {
    let data: Vec<f32> = (0..c * h * w)
        .map(|i| {
            let (ch, px) = (i / (h * w), i % (h * w));
            ((ch + 1) as f32 * 0.37 * px as f32).sin() + 0.1 * ch as f32
        })
        .collect();
    let dims = [c, h, w];
    let mut t = ptr::null_mut();
    let status = unsafe { fc_tensor_new(dims.as_ptr(), 3, data.as_ptr(), data.len(), &mut t) };
    assert_eq!(status, FcStatus::Ok, "{}", last_error());
    t
}

#[test]
fn tensor_dims_and_pooling() {
    let t = tensor(6, 5, 4);
    let mut dims = [0usize; 3];
    assert_eq!(unsafe { fc_tensor_dims(t, dims.as_mut_ptr(), 3) }, 3);
    assert_eq!(dims, [6, 5, 4]);

    let mut global = ptr::null_mut();
    assert_eq!(unsafe { fc_pool_global(t, &mut global) }, FcStatus::Ok);
    let mut region = ptr::null_mut();
    assert_eq!(unsafe { fc_pool_region(t, 0, 5, 0, 4, &mut region) }, FcStatus::Ok);
    assert_eq!(unsafe { fc_matrix_dim(global) }, 6);
    assert_eq!(copy(global), copy(region));

    let mut bad = ptr::null_mut();
    assert_eq!(unsafe { fc_pool_region(t, 0, 9, 0, 4, &mut bad) }, FcStatus::Spd);
    assert!(bad.is_null());
    assert!(!last_error().is_empty());
    unsafe {
        fc_matrix_free(global);
        fc_matrix_free(region);
        fc_tensor_free(t);
    }
}

#[test]
fn spd_operations_agree_with_the_library() {
    let a_data = [4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0];
    let b_data = [2.0, -0.3, 0.0, -0.3, 1.0, 0.1, 0.0, 0.1, 5.0];
    let (a, b) = (matrix(3, &a_data), matrix(3, &b_data));
    let mut dist = 0.0;
    assert_eq!(unsafe { fc_affine_distance(a, b, &mut dist) }, FcStatus::Ok);
    let spd = |v: &[f64]| SpdMatrix::new(nalgebra::DMatrix::from_row_slice(3, 3, v)).unwrap();
    assert_eq!(dist, affine_distance(&spd(&a_data), &spd(&b_data)).unwrap());

    let mut log = ptr::null_mut();
    assert_eq!(unsafe { fc_logeig(a, &mut log) }, FcStatus::Ok);
    let mut floored = ptr::null_mut();
    assert_eq!(unsafe { fc_reeig(log, 1.0, &mut floored) }, FcStatus::Ok);
    // log(A) has eigenvalues below 1, so flooring changes it
    assert_ne!(copy(floored), copy(log));

    // not positive definite
    let neg = matrix(2, &[-1.0, 0.0, 0.0, -1.0]);
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { fc_logeig(neg, &mut out) }, FcStatus::Spd);
    assert!(out.is_null());
    unsafe {
        for m in [a, b, log, floored, neg] {
            fc_matrix_free(m);
        }
    }
}

#[test]
fn chain_matches_the_library() {
    let dims = [6usize, 4, 2];
    let mut chain = ptr::null_mut();
    assert_eq!(
        unsafe { fc_chain_seeded(dims.as_ptr(), 3, 1e-4, 9, &mut chain) },
        FcStatus::Ok
    );
    assert_eq!(unsafe { fc_chain_output_dim(chain) }, 2);
    let t = tensor(6, 5, 5);
    let mut cov = ptr::null_mut();
    assert_eq!(unsafe { fc_pool_global(t, &mut cov) }, FcStatus::Ok);
    let mut reduced = ptr::null_mut();
    assert_eq!(unsafe { fc_chain_reduce(chain, cov, &mut reduced) }, FcStatus::Ok);

    let native = SpdChain::seeded(SpdChainConfig::new(dims.to_vec(), 1e-4).unwrap(), 9).unwrap();
    let input = SpdMatrix::new(nalgebra::DMatrix::from_row_slice(6, 6, &copy(cov))).unwrap();
    let want = native.reduce(&input).unwrap();
    let got = copy(reduced);
    for i in 0..2 {
        for j in 0..2 {
            assert_eq!(got[i * 2 + j], want.as_matrix()[(i, j)]);
        }
    }

    let increasing = [2usize, 4];
    let mut none = ptr::null_mut();
    assert_eq!(
        unsafe { fc_chain_seeded(increasing.as_ptr(), 2, 1e-4, 0, &mut none) },
        FcStatus::Spd
    );
    unsafe {
        fc_matrix_free(reduced);
        fc_matrix_free(cov);
        fc_tensor_free(t);
        fc_chain_free(chain);
    }
}

#[test]
fn errors_are_reported_not_raised() {
    let mut t = ptr::null_mut();
    assert_eq!(unsafe { fc_tensor_read(ptr::null(), &mut t) }, FcStatus::NullArgument);
    let missing = CString::new("/nonexistent/dir/x.fmap").unwrap();
    assert_eq!(unsafe { fc_tensor_read(missing.as_ptr(), &mut t) }, FcStatus::Format);
    assert!(last_error().contains("x.fmap"), "{}", last_error());
    assert!(t.is_null());

    let asym = [1.0, 2.0, 0.0, 1.0];
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { fc_matrix_new(2, asym.as_ptr(), &mut m) }, FcStatus::Spd);
    assert_eq!(
        unsafe { fc_matrix_new(0, asym.as_ptr(), &mut m) },
        FcStatus::InvalidArgument
    );
    assert!(m.is_null());

    let dims = [2usize, 2];
    let short = [1.0f32; 3];
    assert_eq!(
        unsafe { fc_tensor_new(dims.as_ptr(), 2, short.as_ptr(), 3, &mut t) },
        FcStatus::Format
    );
    unsafe {
        fc_tensor_free(ptr::null_mut());
        fc_matrix_free(ptr::null_mut());
    }
    assert_eq!(
        unsafe { CStr::from_ptr(fc_label_code(FcLabel::Surprise)) }
            .to_str()
            .unwrap(),
        "SU"
    );
    assert!(!unsafe { CStr::from_ptr(fc_version()) }.to_bytes().is_empty());
}

#[test]
fn model_predicts_from_artifact_files() {
    let dir = tempfile::tempdir().unwrap();
    let params = SynthParams {
        seed: 4,
        subjects: 4,
        classes: 3,
    };
    let manifest = generate_synthetic(&dir.path().join("data"), &params).unwrap();
    let config = RunConfig {
        codebook_size: 16,
        folds: 2,
        ..RunConfig::default()
    };
    let trained = train_full(&manifest, &config).unwrap();
    let model_dir = dir.path().join("model");
    save_trained(&trained, &model_dir).unwrap();

    let mut model = ptr::null_mut();
    let c_dir = CString::new(model_dir.to_str().unwrap()).unwrap();
    assert_eq!(
        unsafe { fc_model_load(c_dir.as_ptr(), &mut model) },
        FcStatus::Ok,
        "{}",
        last_error()
    );
    assert_eq!(unsafe { fc_model_stream_count(model) }, 1);
    let name = unsafe { CStr::from_ptr(fc_model_stream_name(model, 0)) };
    assert_eq!(name.to_str().unwrap(), "shallow");
    assert!(unsafe { fc_model_stream_name(model, 1) }.is_null());

    for entry in &manifest.entries {
        let mesh = CString::new(entry.mesh_path.as_ref().unwrap().to_str().unwrap()).unwrap();
        let paths = [mesh.as_ptr()];
        let mut label = FcLabel::Neutral;
        assert_eq!(
            unsafe { fc_model_predict(model, paths.as_ptr(), 1, &mut label) },
            FcStatus::Ok
        );
        let descs = facecov::pipeline::shallow_descriptors_for_mesh(
            &facecov::tensorio::read_mesh(entry.mesh_path.as_ref().unwrap()).unwrap(),
        )
        .unwrap();
        assert_eq!(label, FcLabel::from(trained.predict(&[descs]).unwrap()));
    }
    let mut label = FcLabel::Neutral;
    assert_eq!(
        unsafe { fc_model_predict(model, ptr::null(), 0, &mut label) },
        FcStatus::InvalidArgument
    );
    unsafe { fc_model_free(model) };
}
