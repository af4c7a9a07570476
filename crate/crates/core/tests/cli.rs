use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn facecov(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_facecov")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn bad_configuration_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "streams=shallow\ncodebook_size=100\n").unwrap();
    let manifest = dir.path().join("m.tsv");
    fs::write(&manifest, "").unwrap();
    let out = facecov(&["eval", "--manifest", path(&manifest), "--config", path(&cfg)]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("codebook"));

    let out = facecov(&[
        "train",
        "--manifest",
        path(&manifest),
        "--out",
        "x",
        "--codebook-size",
        "17",
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn missing_input_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.fmap");
    let out = facecov(&[
        "pool",
        "--tensor",
        path(&missing),
        "--out",
        path(&dir.path().join("o.fmap")),
    ]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.fmap"));
}

#[test]
fn synth_then_cross_validate() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let out = facecov(&[
        "synth",
        "--out",
        path(&data),
        "--subjects",
        "4",
        "--classes",
        "3",
        "--seed",
        "2",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = data.join("manifest.tsv");
    assert_eq!(
        fs::read_to_string(&manifest)
            .unwrap()
            .lines()
            .filter(|l| !l.starts_with('#'))
            .count(),
        12
    );

    // four subjects cannot fill ten folds
    let out = facecov(&["eval", "--manifest", path(&manifest), "--codebook-size", "16"]);
    assert_eq!(code(&out), 8, "{}", String::from_utf8_lossy(&out.stderr));

    let summary = dir.path().join("summary.tsv");
    let args = [
        "eval",
        "--manifest",
        path(&manifest),
        "--codebook-size",
        "16",
        "--folds",
        "2",
        "--summary",
        path(&summary),
    ];
    let out = facecov(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = String::from_utf8_lossy(&out.stdout);
    assert!(report.contains("Mean accuracy:"), "{report}");
    let first = fs::read_to_string(&summary).unwrap();
    facecov::pipeline::parse_summary(&first).unwrap();
    // same flags, same bytes
    assert!(facecov(&args).status.success());
    assert_eq!(fs::read_to_string(&summary).unwrap(), first);

    let model = dir.path().join("model");
    let out = facecov(&[
        "train",
        "--manifest",
        path(&manifest),
        "--out",
        path(&model),
        "--codebook-size",
        "16",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = facecov(&["eval", "--manifest", path(&manifest), "--model", path(&model)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
