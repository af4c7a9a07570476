use std::fs;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use facecov::meshgeom::shapes::icosphere;
use facecov::tensorio::{
    obj_string, parse_manifest_lines, parse_obj, read_fmap, read_mesh, write_fmap, write_obj, DatasetManifest,
    FeatureTensor, FormatError, Label,
};

fn sha256(bytes: &[u8]) -> Vec<u8> {
    Sha256::digest(bytes).to_vec()
}

#[test]
fn alexnet_sized_tensor_roundtrips_bit_for_bit() {
    let mut rng = ChaCha8Rng::seed_from_u64(256 * 13 * 13);
    let data: Vec<f32> = (0..256 * 13 * 13).map(|_| rng.random_range(-4.0f32..4.0)).collect();
    let t = FeatureTensor::new(vec![256, 13, 13], data).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.fmap");
    write_fmap(&t, &path).unwrap();
    let bytes = fs::read(&path).unwrap();
    assert_eq!(sha256(&bytes), sha256(&t.to_bytes()));
    let back = read_fmap(&path).unwrap();
    assert_eq!(sha256(&back.to_bytes()), sha256(&bytes));
    let bits = |t: &FeatureTensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&back), bits(&t));
}

#[test]
fn icosphere_obj_has_euler_characteristic_two() {
    let mesh = icosphere(3);
    assert_eq!(mesh.vertex_count(), 642);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ico.obj");
    write_obj(&mesh, &path).unwrap();
    let parsed = read_mesh(&path).unwrap();
    assert_eq!(parsed.vertex_count(), 642);
    assert_eq!(parsed.euler_characteristic(), 2);
    assert_eq!(parsed.vertices, mesh.vertices);
}

fn dims_strategy() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..6, 1..4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fmap_bytes_roundtrip(dims in dims_strategy(), seed in any::<u64>()) {
        let n: usize = dims.iter().product();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f32> = (0..n).map(|_| f32::from_bits(rng.random::<u32>() & 0xBFFF_FFFF)).collect();
        let data: Vec<f32> = data.into_iter().map(|v| if v.is_finite() { v } else { 0.5 }).collect();
        let t = FeatureTensor::new(dims, data).unwrap();
        let bytes = t.to_bytes();
        let back = FeatureTensor::from_bytes(&bytes).unwrap();
        prop_assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn loader_never_returns_non_finite(dims in dims_strategy(), pos in any::<prop::sample::Index>(), bad in prop::sample::select(vec![f32::NAN, f32::INFINITY, f32::NEG_INFINITY])) {
        let n: usize = dims.iter().product();
        let t = FeatureTensor::new(dims, vec![1.0; n]).unwrap();
        let mut bytes = t.to_bytes();
        let header = bytes.len() - 4 * n;
        let at = header + 4 * pos.index(n);
        bytes[at..at + 4].copy_from_slice(&bad.to_le_bytes());
        let is_non_finite = matches!(FeatureTensor::from_bytes(&bytes), Err(FormatError::NonFiniteValue { .. }));
        prop_assert!(is_non_finite);
    }

    #[test]
    fn manifest_parsing_is_total_and_ordered(lines in prop::collection::vec(manifest_line(), 0..20)) {
        let text = lines.join("\n");
        let parsed = parse_manifest_lines(&text);
        let expected: Vec<usize> = lines
            .iter()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
            .map(|(i, _)| i + 1)
            .collect();
        let got: Vec<usize> = parsed.iter().map(|(line, _)| *line).collect();
        prop_assert_eq!(got, expected);
        for (line, r) in &parsed {
            if let Ok(entry) = r {
                prop_assert!(lines[line - 1].starts_with(&entry.sample_id));
            }
        }
    }

    #[test]
    fn obj_text_roundtrip(sub in 0u32..3) {
        let mesh = icosphere(sub);
        let back = parse_obj(&obj_string(&mesh)).unwrap();
        prop_assert_eq!(back.vertices, mesh.vertices);
        prop_assert_eq!(back.faces, mesh.faces);
    }
}

fn manifest_line() -> impl Strategy<Value = String> {
    let label = prop::sample::select(vec!["HA", "SA", "DI", "SU", "FE", "AN", "NE", "XX"]);
    prop_oneof![
        (0u32..50, 0u32..5, label).prop_map(|(s, p, l)| format!("s{s}\tp{p}\t{l}\tmesh=m{s}.obj")),
        (0u32..50).prop_map(|s| format!("s{s}\tp0")),
        Just("# comment".to_string()),
        Just(String::new()),
    ]
}

#[test]
fn manifest_text_roundtrip_keeps_order() {
    let text = "a\tp1\tHA\tmesh=a.obj\tvgg.depth=a.fmap\nb\tp2\tNE\tmesh=-\n";
    let m = DatasetManifest::parse(text).unwrap();
    assert_eq!(m.entries[0].label, Label::Happy);
    assert_eq!(m.entries[1].mesh_path, None);
    assert_eq!(DatasetManifest::parse(&m.to_text()).unwrap(), m);
}
