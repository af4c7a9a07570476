//! The generated header must compile as C and as C++, declare every
//! exported symbol, and link against the static library.

use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include "facecov.h"

int use_api(void) {
    FcTensor *t = NULL;
    FcMatrix *m = NULL;
    FcChain *c = NULL;
    FcModel *model = NULL;
    size_t dims[3] = {4, 2, 2};
    FcStatus s = fc_tensor_read("x.fmap", &t);
    s = fc_pool_global(t, &m);
    s = fc_chain_seeded(dims, 1, 1e-4, 0, &c);
    s = fc_model_load("model", &model);
    FcLabel label = FC_LABEL_NEUTRAL;
    const char *paths[1] = {"a.obj"};
    s = fc_model_predict(model, paths, 1, &label);
    fc_matrix_free(m);
    fc_tensor_free(t);
    fc_chain_free(c);
    fc_model_free(model);
    return s == FC_STATUS_OK ? 0 : (int)fc_last_error_message()[0];
}
"#;

fn include_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include")
}

fn compile(compiler: &str, lang: &str) {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(&src, PROGRAM).unwrap();
    let out = Command::new(compiler)
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang, "-I"])
        .arg(include_dir())
        .arg(&src)
        .output()
        .unwrap_or_else(|e| panic!("{compiler} not runnable: {e}"));
    assert!(
        out.status.success(),
        "{compiler}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn compiles_as_c() {
    compile("cc", "c");
}

#[test]
fn compiles_as_cpp() {
    compile("c++", "c++");
}

#[test]
fn declares_every_export() {
    let header = std::fs::read_to_string(include_dir().join("facecov.h")).unwrap();
    let source = std::fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("src/lib.rs")).unwrap();
    let exports: Vec<&str> = source
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 20, "{exports:?}");
    for name in exports {
        assert!(header.contains(&format!("{name}(")), "{name} missing from the header");
    }
}

const RUNNABLE: &str = r#"
#include <math.h>
#include <stdio.h>
#include <string.h>
#include "facecov.h"

int main(void) {
    double e2[4] = {2.718281828459045, 0.0, 0.0, 7.38905609893065};
    FcMatrix *m = NULL, *log = NULL;
    if (fc_matrix_new(2, e2, &m) != FC_STATUS_OK) return 1;
    if (fc_logeig(m, &log) != FC_STATUS_OK) return 2;
    double out[4];
    if (fc_matrix_copy(log, out, 4) != FC_STATUS_OK) return 3;
    if (fabs(out[0] - 1.0) > 1e-12 || fabs(out[3] - 2.0) > 1e-12 || out[1] != 0.0) return 4;
    FcTensor *t = NULL;
    if (fc_tensor_read("/nonexistent.fmap", &t) != FC_STATUS_FORMAT || t != NULL) return 5;
    if (strstr(fc_last_error_message(), "nonexistent") == NULL) return 6;
    printf("%s %s\n", fc_version(), fc_label_code(FC_LABEL_HAPPY));
    fc_matrix_free(log);
    fc_matrix_free(m);
    return 0;
}
"#;

#[test]
fn links_and_runs_from_c() {
    // integration test binaries sit next to the library artifacts
    let deps = std::env::current_exe().unwrap().parent().unwrap().to_path_buf();
    let lib = deps.join("libfacecov_ffi.a");
    assert!(lib.exists(), "static library not found at {}", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    let exe = dir.path().join("main");
    std::fs::write(&src, RUNNABLE).unwrap();
    let out = Command::new("cc")
        .arg("-I")
        .arg(include_dir())
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .output()
        .unwrap();
    assert!(out.status.success(), "link: {}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&exe).output().unwrap();
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    assert_eq!(
        String::from_utf8_lossy(&run.stdout).trim(),
        format!("{} HA", env!("CARGO_PKG_VERSION"))
    );
}
