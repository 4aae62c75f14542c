use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use eaptop_ffi::*;

const TINY: &str = "max_iters = 3
source_patch_length = 0.2
[mesh]
design_nx = 4
design_ny = 4
freespace_extent_factor = 2.0
";

fn last_error() -> String {
    let p = eap_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn tiny_config() -> *mut EapConfig {
    let text = CString::new(TINY).unwrap();
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { eap_config_from_toml(text.as_ptr(), &mut cfg) }, EapStatus::Ok);
    assert!(!cfg.is_null());
    cfg
}

#[test]
fn null_arguments_are_rejected() {
    unsafe {
        assert_eq!(eap_config_new(ptr::null_mut()), EapStatus::NullPointer);
        assert!(last_error().contains("out"));
        let mut cfg = ptr::null_mut();
        assert_eq!(eap_config_from_toml(ptr::null(), &mut cfg), EapStatus::NullPointer);
        assert!(cfg.is_null());
        assert_eq!(eap_config_set_max_iters(ptr::null_mut(), 3), EapStatus::NullPointer);
        let mut run = ptr::null_mut();
        assert_eq!(eap_run(ptr::null(), &mut run), EapStatus::NullPointer);
        let mut s = EapSummary::default();
        assert_eq!(eap_run_summary(ptr::null(), &mut s), EapStatus::NullPointer);
        assert_eq!(eap_verify(ptr::null_mut()), EapStatus::NullPointer);
        // freeing null is a no-op
        eap_config_free(ptr::null_mut());
        eap_run_free(ptr::null_mut());
    }
}

#[test]
fn config_errors_map_to_status_codes() {
    unsafe {
        let mut cfg = ptr::null_mut();
        let bad = CString::new("no_such_key = 1").unwrap();
        assert_eq!(eap_config_from_toml(bad.as_ptr(), &mut cfg), EapStatus::Config);
        assert!(cfg.is_null());
        assert!(last_error().contains("no_such_key"));

        let invalid = [0xffu8, 0xfe, 0];
        assert_eq!(eap_config_from_toml(invalid.as_ptr().cast(), &mut cfg), EapStatus::InvalidUtf8);

        assert_eq!(eap_config_new(&mut cfg), EapStatus::Ok);
        assert_eq!(eap_config_set_max_iters(cfg, 0), EapStatus::OutOfRange);
        assert_eq!(eap_config_set_direction(cfg, 7), EapStatus::OutOfRange);
        assert_eq!(eap_config_set_direction(cfg, 1), EapStatus::Ok);
        assert_eq!(eap_config_set_design_mesh(cfg, 0, 4), EapStatus::Mesh);
        assert_eq!(eap_config_set_design_mesh(cfg, 8, 8), EapStatus::Ok);
        // a successful call clears the message
        assert!(eap_last_error_message().is_null());
        eap_config_free(cfg);
    }
}

#[test]
fn tiny_run_through_the_c_interface() {
    unsafe {
        let cfg = tiny_config();
        let mut run = ptr::null_mut();
        assert_eq!(eap_run(cfg, &mut run), EapStatus::Ok, "{}", last_error());

        let mut s = EapSummary::default();
        assert_eq!(eap_run_summary(run, &mut s), EapStatus::Ok);
        assert_eq!(s.converged, 0);
        assert_eq!(s.iterations, 3);
        assert!(s.g0.is_finite() && s.g1.is_finite() && s.g2.is_finite());

        let mut len = 0;
        assert_eq!(eap_run_history_len(run, &mut len), EapStatus::Ok);
        assert_eq!(len, 3);
        let mut row = EapHistoryRow::default();
        for i in 0..len {
            assert_eq!(eap_run_history_row(run, i, &mut row), EapStatus::Ok);
            assert_eq!(row.iteration, i);
            assert!(row.newton_iters > 0);
        }
        assert_eq!(row.g0, s.g0);
        assert_eq!(row.g1, s.g1);
        assert_eq!(eap_run_history_row(run, 3, &mut row), EapStatus::OutOfRange);

        let mut buf = vec![f64::NAN; 16];
        let mut n = 0;
        assert_eq!(eap_run_design(run, 2, buf.as_mut_ptr(), 16, &mut n), EapStatus::Ok);
        assert_eq!(n, 16);
        assert!(buf.iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(eap_run_design(run, 1, buf.as_mut_ptr(), 5, &mut n), EapStatus::OutOfRange);
        assert_eq!(n, 16);
        assert_eq!(eap_run_design(run, 3, buf.as_mut_ptr(), 16, &mut n), EapStatus::OutOfRange);

        let dir = tempfile::tempdir().unwrap();
        let d = CString::new(dir.path().to_str().unwrap()).unwrap();
        assert_eq!(eap_run_write_outputs(run, d.as_ptr()), EapStatus::Ok, "{}", last_error());
        for f in ["design.vtk", "design_deformed.vtk", "history.csv", "summary.toml"] {
            assert!(dir.path().join(f).is_file(), "{f}");
        }
        let history = std::fs::read_to_string(dir.path().join("history.csv")).unwrap();
        assert_eq!(history.lines().count(), 4);

        let blocker = dir.path().join("summary.toml").join("sub");
        let b = CString::new(blocker.to_str().unwrap()).unwrap();
        assert_eq!(eap_run_write_outputs(run, b.as_ptr()), EapStatus::Io);

        eap_run_free(run);
        eap_config_free(cfg);
    }
}

#[test]
fn verify_reports_no_failures() {
    let mut failed = usize::MAX;
    assert_eq!(unsafe { eap_verify(&mut failed) }, EapStatus::Ok);
    assert_eq!(failed, 0);
}

fn header() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include").join("eaptop.h")
}

#[test]
fn header_declares_the_interface() {
    let text = std::fs::read_to_string(header()).unwrap();
    for name in [
        "eap_last_error_message",
        "eap_config_new",
        "eap_config_from_toml",
        "eap_config_free",
        "eap_config_set_design_mesh",
        "eap_config_set_max_iters",
        "eap_config_set_direction",
        "eap_run(",
        "eap_run_free",
        "eap_run_summary",
        "eap_run_history_len",
        "eap_run_history_row",
        "eap_run_design",
        "eap_run_write_outputs",
        "eap_verify",
        "typedef struct EapConfig EapConfig",
        "typedef struct EapRun EapRun",
        "EAP_STATUS_OK = 0",
        "EAP_STATUS_PANIC = 10",
    ] {
        assert!(text.contains(name), "{name} missing from header");
    }
}

/// Directory holding the shared library built for this test run.
fn library_dir() -> Option<PathBuf> {
    let exe = std::env::current_exe().ok()?;
    // target/<profile>/deps/ffi-<hash>
    let profile = exe.parent()?.parent()?;
    let lib = if cfg!(target_os = "macos") { "libeaptop_ffi.dylib" } else { "libeaptop_ffi.so" };
    profile.join(lib).is_file().then(|| profile.to_path_buf())
}

#[test]
#[cfg(unix)]
fn c_program_links_and_runs() {
    let Ok(cc) = Command::new("cc").arg("--version").output() else {
        eprintln!("no C compiler on PATH; C link check not run");
        return;
    };
    assert!(cc.status.success());
    let Some(libdir) = library_dir() else {
        eprintln!("shared library not found next to the test binary; C link check not run");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let src = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/c/smoke.c");
    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&exe)
        .arg(&src)
        .arg("-I")
        .arg(header().parent().unwrap())
        .arg("-L")
        .arg(&libdir)
        .arg(format!("-Wl,-rpath,{}", libdir.display()))
        .arg("-leaptop_ffi")
        .status()
        .unwrap();
    assert!(status.success(), "C smoke program failed to build");
    let out = Command::new(&exe).output().unwrap();
    assert!(
        out.status.success(),
        "{}{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("iterations 2"));
}
