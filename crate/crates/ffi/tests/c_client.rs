//! Compiles a C program against the generated header and runs it.

use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include <math.h>
#include <stdio.h>
#include "robust_l1.h"

int main(void) {
    double v = 0.0;
    if (rl_psi(RL_TRUNCATION_SATURATING, 5.0, &v) != RL_STATUS_OK || fabs(v - log(2.0)) > 1e-15) return 1;
    if (rl_psi(99, 1.0, &v) != RL_STATUS_INVALID_ARGUMENT) return 2;
    char msg[128];
    if (rl_last_error_message(msg, sizeof msg) == 0) return 3;

    double x[6] = {1.0, 0.0, 0.0, 1.0, 1.0, 1.0};
    double y[3] = {0.5, -0.25, 0.25};
    RlDataset *data = NULL;
    if (rl_dataset_new(2, 3, x, y, &data) != RL_STATUS_OK || rl_dataset_n(data) != 3) return 4;

    RlSolverConfig cfg;
    rl_solver_config_default(&cfg);
    cfg.iterations = 500;
    double w[2];
    RlFitResult res;
    if (rl_fit(data, RL_ESTIMATOR_ERM_L1, 1.0, 0.0, 0.05, RL_TRUNCATION_LOGQUAD, 0.0, &cfg, w, 2, &res) != RL_STATUS_OK) return 5;
    if (res.objective_value > 1e-4) return 6;
    rl_dataset_free(data);

    RlBoundInputs in = {10000, 1, 1.0, 0.05, 0.0, 1.0, 1.0, 1.0};
    if (rl_theorem1_bound(&in, &v) != RL_STATUS_OK || !(v > 0.0)) return 7;
    printf("ok %s\n", rl_version());
    return 0;
}
"#;

#[test]
fn c_program_links_and_runs() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let include = manifest.join("include");
    assert!(include.join("robust_l1.h").exists());
    // tests live in target/<profile>/deps; the shared library one level up
    let exe = std::env::current_exe().unwrap();
    let lib_dir = exe.parent().unwrap().parent().unwrap().to_path_buf();
    if !lib_dir.join("librobust_l1_ffi.so").exists() && !lib_dir.join("librobust_l1_ffi.dylib").exists() {
        panic!("shared library not found in {}", lib_dir.display());
    }
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler available; skipping");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("client.c");
    let bin = dir.path().join("client");
    std::fs::write(&src, PROGRAM).unwrap();
    let status = Command::new(cc)
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(&include)
        .arg(&src)
        .arg("-o")
        .arg(&bin)
        .arg(format!("-L{}", lib_dir.display()))
        .arg(format!("-Wl,-rpath,{}", lib_dir.display()))
        .arg("-lrobust_l1_ffi")
        .arg("-lm")
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "client exited with {:?}", out.status.code());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}

fn which_cc() -> Result<&'static str, ()> {
    for cc in ["cc", "gcc", "clang"] {
        if Command::new(cc).arg("--version").output().is_ok_and(|o| o.status.success()) {
            return Ok(cc);
        }
    }
    Err(())
}
