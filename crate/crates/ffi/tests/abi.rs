use std::ffi::{c_char, CStr, CString};
use std::ptr;

use robust_l1_ffi::*;

fn last_error() -> String {
    let len = unsafe { rl_last_error_message(ptr::null_mut(), 0) };
    let mut buf = vec![0 as c_char; len + 1];
    unsafe { rl_last_error_message(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap().to_owned()
}

fn realizable(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = Vec::with_capacity(2 * n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let a = ((i * 7) % 13) as f64 / 13.0 - 0.5;
        let b = ((i * 5) % 11) as f64 / 11.0 - 0.5;
        x.extend([a, b]);
        y.push(0.3 * a - 0.6 * b);
    }
    (x, y)
}

fn new_dataset(d: usize, x: &[f64], y: &[f64]) -> *mut RlDataset {
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { rl_dataset_new(d, y.len(), x.as_ptr(), y.as_ptr(), &mut h) }, RlStatus::Ok);
    assert!(!h.is_null());
    h
}

#[test]
fn psi_values() {
    let mut v = f64::NAN;
    unsafe {
        assert_eq!(rl_psi(RL_TRUNCATION_SATURATING, 2.0, &mut v), RlStatus::Ok);
        assert_eq!(v, std::f64::consts::LN_2);
        assert_eq!(rl_psi(RL_TRUNCATION_LOGQUAD, -1.0, &mut v), RlStatus::Ok);
        assert!((v + 2.5f64.ln()).abs() < 1e-15);
        assert_eq!(rl_psi_derivative(RL_TRUNCATION_LOGQUAD, 0.0, &mut v), RlStatus::Ok);
        assert_eq!(v, 1.0);

        let before = v;
        assert_eq!(rl_psi(7, 1.0, &mut v), RlStatus::InvalidArgument);
        assert_eq!(v, before);
        assert!(last_error().contains("truncation kind"));
        assert_eq!(rl_psi(RL_TRUNCATION_LOGQUAD, f64::NAN, &mut v), RlStatus::InvalidArgument);
        assert_eq!(rl_psi(RL_TRUNCATION_LOGQUAD, 1.0, ptr::null_mut()), RlStatus::NullPointer);
        assert_eq!(rl_psi(RL_TRUNCATION_LOGQUAD, 1.0, &mut v), RlStatus::Ok);
        assert_eq!(last_error(), "");
    }
}

#[test]
fn catoni_mean() {
    let mut v = 0.0;
    let values = [0.0, 1.0, 2.0, 3.0, 4.0];
    unsafe {
        assert_eq!(rl_catoni_mean(values.as_ptr(), 5, RL_TRUNCATION_SATURATING, 1e-8, &mut v), RlStatus::Ok);
        assert!((v - 2.0).abs() < 1e-6);
        let sym = [-5.0, 5.0];
        assert_eq!(rl_catoni_mean(sym.as_ptr(), 2, RL_TRUNCATION_LOGQUAD, 0.0, &mut v), RlStatus::Ok);
        assert_eq!(v, 0.0);
        assert_eq!(rl_catoni_mean(values.as_ptr(), 0, RL_TRUNCATION_LOGQUAD, 0.0, &mut v), RlStatus::InvalidArgument);
        assert_eq!(rl_catoni_mean(ptr::null(), 3, RL_TRUNCATION_LOGQUAD, 0.0, &mut v), RlStatus::NullPointer);
    }
}

#[test]
fn dataset_lifecycle() {
    let (x, y) = realizable(20);
    let h = new_dataset(2, &x, &y);
    unsafe {
        assert_eq!(rl_dataset_n(h), 20);
        assert_eq!(rl_dataset_dim(h), 2);
        rl_dataset_free(h);
        rl_dataset_free(ptr::null_mut());
        assert_eq!(rl_dataset_n(ptr::null()), 0);

        let mut h = ptr::null_mut();
        assert_eq!(rl_dataset_new(0, 20, x.as_ptr(), y.as_ptr(), &mut h), RlStatus::InvalidArgument);
        assert_eq!(rl_dataset_new(2, 0, x.as_ptr(), y.as_ptr(), &mut h), RlStatus::InvalidArgument);
        let bad_y = [1.0, f64::NAN];
        assert_eq!(rl_dataset_new(1, 2, x.as_ptr(), bad_y.as_ptr(), &mut h), RlStatus::InvalidArgument);
        assert!(last_error().contains("finite"));
        assert!(h.is_null());
        assert_eq!(rl_dataset_new(2, 20, x.as_ptr(), y.as_ptr(), ptr::null_mut()), RlStatus::NullPointer);
        assert_eq!(rl_dataset_new(usize::MAX, 2, x.as_ptr(), y.as_ptr(), &mut h), RlStatus::InvalidArgument);
    }
}

#[test]
fn csv_loading() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    std::fs::write(&path, "x1,y\n1,2\n2,4\n3,6.5\n").unwrap();
    let c_path = CString::new(path.to_str().unwrap()).unwrap();
    let mut h = ptr::null_mut();
    unsafe {
        assert_eq!(rl_dataset_read_csv(c_path.as_ptr(), true, &mut h), RlStatus::Ok);
        assert_eq!((rl_dataset_n(h), rl_dataset_dim(h)), (3, 1));
        rl_dataset_free(h);
        let mut h = ptr::null_mut();
        assert_eq!(rl_dataset_read_csv(c_path.as_ptr(), false, &mut h), RlStatus::Parse);
        let missing = CString::new("/no/such/file.csv").unwrap();
        assert_eq!(rl_dataset_read_csv(missing.as_ptr(), false, &mut h), RlStatus::Io);
        assert!(last_error().contains("/no/such/file.csv"));
        assert_eq!(rl_dataset_read_csv(ptr::null(), false, &mut h), RlStatus::NullPointer);
    }
}

#[test]
fn fitting() {
    let (x, y) = realizable(100);
    let h = new_dataset(2, &x, &y);
    let mut cfg = RlSolverConfig {
        iterations: 0,
        restarts: 0,
        step_scale: 0.0,
        seed: 0,
        polish: false,
        elemental_starts: 0,
    };
    let mut w = [0.0; 2];
    let mut res = RlFitResult::default();
    unsafe {
        assert_eq!(rl_solver_config_default(&mut cfg), RlStatus::Ok);
        assert_eq!((cfg.iterations, cfg.restarts, cfg.polish), (2000, 16, true));

        assert_eq!(rl_fit(h, RL_ESTIMATOR_ERM_L1, 1.0, 0.0, 0.05, 0, 0.0, &cfg, w.as_mut_ptr(), 2, &mut res), RlStatus::Ok);
        assert!(res.objective_value <= 1e-4);
        assert!(res.alpha.is_nan());
        assert!((w[0] - 0.3).abs() < 1e-3 && (w[1] + 0.6).abs() < 1e-3);

        cfg.iterations = 300;
        cfg.restarts = 4;
        assert_eq!(
            rl_fit(h, RL_ESTIMATOR_TRUNC_L1, 1.0, 0.0, 0.1, RL_TRUNCATION_LOGQUAD, 0.0, &cfg, w.as_mut_ptr(), 2, &mut res),
            RlStatus::Ok
        );
        let inputs = RlBoundInputs {
            n: 100,
            d: 2,
            radius: 1.0,
            delta: 0.1,
            epsilon: 0.0,
            mean_norm: 0.0,
            mean_sq_norm: 0.0,
            sup_l2_risk: 0.0,
        };
        let mut alpha = 0.0;
        assert_eq!(rl_default_alpha(&inputs, &mut alpha), RlStatus::Ok);
        assert_eq!(res.alpha, alpha);
        assert!((alpha - 0.41712143910880894).abs() < 1e-12);
        let mut value = 0.0;
        assert_eq!(rl_truncated_l1_value(h, w.as_ptr(), 2, res.alpha, RL_TRUNCATION_LOGQUAD, &mut value), RlStatus::Ok);
        assert!((value - res.objective_value).abs() < 1e-10);

        assert_eq!(rl_fit(h, RL_ESTIMATOR_MINMAX_L2, 1.0, 0.5, 0.05, 0, 0.1, &cfg, w.as_mut_ptr(), 2, &mut res), RlStatus::Ok);
        assert_eq!(res.alpha, 0.5);
        assert_eq!(rl_fit(h, RL_ESTIMATOR_ERM_L2, 1.0, 0.0, 0.05, 0, 0.0, ptr::null(), w.as_mut_ptr(), 2, &mut res), RlStatus::Ok);
        assert!(res.objective_value < 1e-12);

        assert_eq!(rl_fit(h, 9, 1.0, 0.0, 0.05, 0, 0.0, &cfg, w.as_mut_ptr(), 2, &mut res), RlStatus::InvalidArgument);
        assert_eq!(rl_fit(h, RL_ESTIMATOR_ERM_L1, 1.0, 0.0, 0.05, 0, 0.0, &cfg, w.as_mut_ptr(), 3, &mut res), RlStatus::DimensionMismatch);
        assert_eq!(rl_fit(h, RL_ESTIMATOR_ERM_L1, -1.0, 0.0, 0.05, 0, 0.0, &cfg, w.as_mut_ptr(), 2, &mut res), RlStatus::InvalidArgument);
        assert_eq!(rl_fit(h, RL_ESTIMATOR_TRUNC_L1, 1.0, 0.0, 0.7, 0, 0.0, &cfg, w.as_mut_ptr(), 2, &mut res), RlStatus::InvalidArgument);
        assert_eq!(rl_fit(ptr::null(), RL_ESTIMATOR_ERM_L1, 1.0, 0.0, 0.05, 0, 0.0, &cfg, w.as_mut_ptr(), 2, &mut res), RlStatus::NullPointer);
        assert_eq!(rl_fit(h, RL_ESTIMATOR_ERM_L1, 1.0, 0.0, 0.05, 0, 0.0, &cfg, ptr::null_mut(), 2, &mut res), RlStatus::NullPointer);
        cfg.restarts = 0;
        assert_eq!(rl_fit(h, RL_ESTIMATOR_ERM_L1, 1.0, 0.0, 0.05, 0, 0.0, &cfg, w.as_mut_ptr(), 2, &mut res), RlStatus::InvalidArgument);
        rl_dataset_free(h);
    }
}

#[test]
fn bounds() {
    let inputs = RlBoundInputs {
        n: 100,
        d: 2,
        radius: 1.0,
        delta: 0.1,
        epsilon: 0.01,
        mean_norm: 1.0,
        mean_sq_norm: 1.0,
        sup_l2_risk: 2.0,
    };
    let mut v = 0.0;
    unsafe {
        assert_eq!(rl_theorem1_bound(&inputs, &mut v), RlStatus::Ok);
        assert!((v - 1.6885274685791465).abs() < 1e-12);
        assert_eq!(rl_erm_bound(1.0, 1.0, 10_000, 0.05, &mut v), RlStatus::Ok);
        assert!((v - 0.08895493661361634).abs() < 1e-14);
        let bad = RlBoundInputs { delta: 0.7, ..inputs };
        assert_eq!(rl_theorem1_bound(&bad, &mut v), RlStatus::InvalidArgument);
        assert_eq!(rl_default_alpha(ptr::null(), &mut v), RlStatus::NullPointer);
        assert_eq!(rl_erm_bound(1.0, 1.0, 0, 0.05, &mut v), RlStatus::InvalidArgument);
    }
}

#[test]
fn error_message_truncation() {
    let mut v = 0.0;
    unsafe {
        assert_eq!(rl_psi(42, 0.0, &mut v), RlStatus::InvalidArgument);
        let full = last_error();
        let mut small = [1 as c_char; 5];
        assert_eq!(rl_last_error_message(small.as_mut_ptr(), 5), full.len());
        assert_eq!(CStr::from_ptr(small.as_ptr()).to_str().unwrap(), &full[..4]);
    }
    let version = unsafe { CStr::from_ptr(rl_version()) }.to_str().unwrap();
    assert_eq!(version, env!("CARGO_PKG_VERSION"));
}
