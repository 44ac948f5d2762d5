use std::ffi::{CStr, CString};
use std::ptr;

use mlq_ffi::*;

fn last_error() -> String {
    let p = mlq_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn potential(json: &str) -> *mut MlqPotential {
    let j = CString::new(json).unwrap();
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { mlq_potential_from_json(j.as_ptr(), &mut p) }, MlqStatus::Ok);
    assert!(!p.is_null());
    p
}

#[test]
fn version_is_nul_terminated() {
    let v = unsafe { CStr::from_ptr(mlq_version()) }.to_str().unwrap();
    assert_eq!(v, mlq::VERSION);
}

#[test]
fn torus_xi_coefficients() {
    let p = potential(r#"{"family": "torus"}"#);
    let mut xi = [0.0; 8];
    assert_eq!(unsafe { mlq_potential_xi(p, 0.3, 0.1, 1.0, 0.0, xi.as_mut_ptr()) }, MlqStatus::Ok);
    assert_eq!(xi, [0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
    unsafe { mlq_potential_free(p) };
}

#[test]
fn invalid_potential_reports_usage() {
    let j = CString::new(r#"{"family": "trinoid", "lambda0": [1.0, 0.0], "v0": 1, "v1": 1, "v_inf": 1}"#).unwrap();
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { mlq_potential_from_json(j.as_ptr(), &mut p) }, MlqStatus::Usage);
    assert!(p.is_null());
    assert!(last_error().contains("lambda0"), "{}", last_error());
    let bad = CString::new("not json").unwrap();
    assert_eq!(unsafe { mlq_potential_from_json(bad.as_ptr(), &mut p) }, MlqStatus::Usage);
    assert_eq!(unsafe { mlq_potential_from_json(ptr::null(), &mut p) }, MlqStatus::InvalidArgument);
}

#[test]
fn sphere_sample_and_report() {
    let p = potential(r#"{"family": "sphere"}"#);
    let mut ev = ptr::null_mut();
    assert_eq!(unsafe { mlq_evaluator_new(p, 1.0, 0.0, 16, &mut ev) }, MlqStatus::Ok);
    unsafe { mlq_potential_free(p) };

    let mut s = MlqSample::default();
    assert_eq!(unsafe { mlq_evaluator_sample(ev, 0.3, -0.2, &mut s) }, MlqStatus::Ok);
    let norm: f64 = s.q2.iter().map(|x| x * x).sum();
    assert!((norm - 1.0).abs() < 1e-12);
    for v in [s.phi, s.psi] {
        assert!((v.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
    }

    let mut json = ptr::null_mut();
    assert_eq!(unsafe { mlq_evaluator_report_json(ev, 0.3, -0.2, 1e-3, &mut json) }, MlqStatus::Ok);
    let text = unsafe { CStr::from_ptr(json) }.to_str().unwrap().to_owned();
    unsafe { mlq_string_free(json) };
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert!(v["geometry"]["lagrangian_residual"].as_f64().unwrap() < 1e-6);
    unsafe { mlq_evaluator_free(ev) };
}

#[test]
fn evaluator_rejects_bad_lambda() {
    let p = potential(r#"{"family": "sphere"}"#);
    let mut ev = ptr::null_mut();
    assert_eq!(unsafe { mlq_evaluator_new(p, 2.0, 0.0, 16, &mut ev) }, MlqStatus::Usage);
    assert!(ev.is_null());
    assert_eq!(unsafe { mlq_evaluator_new(p, 1.0, 0.0, 0, &mut ev) }, MlqStatus::Usage);
    unsafe { mlq_potential_free(p) };
}

#[test]
fn closing_and_psi() {
    let mut c = MlqClosing::default();
    assert_eq!(unsafe { mlq_cylinder_closing(0.75, 0.25, 0.0, 1.0, 0.0, &mut c) }, MlqStatus::Ok);
    assert!(c.closes_q2 && (c.mu1 - 2.0).abs() < 1e-12 && (c.mu2 - 1.0).abs() < 1e-12);

    let id = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0];
    let mut m = [0.0; 16];
    assert_eq!(unsafe { mlq_psi_so4(id.as_ptr(), id.as_ptr(), m.as_mut_ptr()) }, MlqStatus::Ok);
    for i in 0..4 {
        for j in 0..4 {
            assert_eq!(m[4 * i + j], if i == j { 1.0 } else { 0.0 });
        }
    }
    let bad = [2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.5, 0.0];
    assert_eq!(unsafe { mlq_psi_so4(bad.as_ptr(), id.as_ptr(), m.as_mut_ptr()) }, MlqStatus::Usage);
}

#[test]
fn run_command_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(
        &cfg,
        r#"{"schema": 1, "potential": {"family": "equivariant", "a": 0.75, "b": 0.25},
            "grid": {"re_min": 0.9, "re_max": 1.1, "im_min": -0.1, "im_max": 0.1, "n_re": 2, "n_im": 2}}"#,
    )
    .unwrap();
    let c = |s: &str| CString::new(s).unwrap();
    let path = c(cfg.to_str().unwrap());
    let out = c(dir.path().join("out").to_str().unwrap());
    let code = unsafe { mlq_run_command(c("closing").as_ptr(), path.as_ptr(), out.as_ptr(), 1) };
    assert_eq!(code, 0);
    assert!(dir.path().join("out/closing.json").exists());
    assert_eq!(unsafe { mlq_run_command(c("bogus").as_ptr(), path.as_ptr(), ptr::null(), 1) }, 2);
    assert_eq!(unsafe { mlq_run_command(c("generate").as_ptr(), c("/nonexistent.json").as_ptr(), ptr::null(), 1) }, 2);
    assert_eq!(unsafe { mlq_run_command(ptr::null(), path.as_ptr(), ptr::null(), 1) }, -1);
}

#[test]
fn header_declares_api_and_compiles() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let header = std::fs::read_to_string(dir.join("mlq.h")).unwrap();
    for sym in ["mlq_potential_from_json", "mlq_evaluator_sample", "mlq_last_error_message", "MlqStatus", "MlqSample"] {
        assert!(header.contains(sym), "{sym} missing from header");
    }
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("t.c");
    std::fs::write(
        &src,
        "#include \"mlq.h\"\nint main(void) { MlqPotential *p = 0; MlqStatus s = mlq_potential_from_json(\"{}\", &p); return (int)s; }\n",
    )
    .unwrap();
    match std::process::Command::new(&cc).arg("-fsyntax-only").arg("-I").arg(&dir).arg(&src).output() {
        Ok(o) => assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr)),
        Err(e) => eprintln!("skipping C compile check: {cc} unavailable ({e})"),
    }
}
