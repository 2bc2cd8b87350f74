//! Calls through the exported C ABI, the way a foreign caller would.

use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use transduce_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(transduce_last_error()) }.to_string_lossy().into_owned()
}

fn reference() -> *mut TransduceDevice {
    let mut dev = ptr::null_mut();
    assert_eq!(unsafe { transduce_device_reference(&mut dev) }, TransduceStatus::Ok);
    assert!(!dev.is_null());
    dev
}

#[test]
fn budget_and_stage_factors() {
    let dev = reference();
    let (mut total, mut el, mut op) = (0.0, 0.0, 0.0);
    let s = unsafe { transduce_budget(dev, &mut total, &mut el, &mut op) };
    assert_eq!(s, TransduceStatus::Ok, "{}", last_error());
    assert!((total / 6.8e-8 - 1.0).abs() < 0.03, "{total}");
    assert!(el > 0.0 && op > 0.0 && total <= el * op);
    assert_eq!(last_error(), "");

    // Optional stage pointers may be NULL.
    let mut again = 0.0;
    let s = unsafe { transduce_budget(dev, &mut again, ptr::null_mut(), ptr::null_mut()) };
    assert_eq!(s, TransduceStatus::Ok);
    assert_eq!(again, total);

    let mut n = 0usize;
    assert_eq!(unsafe { transduce_device_mode_count(dev, &mut n) }, TransduceStatus::Ok);
    assert_eq!(n, 2);
    unsafe { transduce_device_free(dev) };
}

#[test]
fn per_mode_quantities() {
    let dev = reference();
    let mode = CString::new("2.799GHz").unwrap();
    let (mut c0, mut c_om) = (0.0, 0.0);
    let s = unsafe { transduce_cooperativity(dev, mode.as_ptr(), 148.0, &mut c0, &mut c_om) };
    assert_eq!(s, TransduceStatus::Ok, "{}", last_error());
    assert!((c0 / 7.0e-3 - 1.0).abs() < 0.01, "{c0}");
    assert!((c_om - 148.0 * c0).abs() < 1e-12);

    let mut p = 0.0;
    let s = unsafe { transduce_swap_probability(dev, mode.as_ptr(), 0.0, 26e-9, &mut p) };
    assert_eq!(s, TransduceStatus::Ok);
    assert_eq!(p, 0.0);

    let mut eta = 0.0;
    let s = unsafe { transduce_electromechanical_efficiency(dev, mode.as_ptr(), f64::NAN, &mut eta) };
    assert_eq!(s, TransduceStatus::Ok, "{}", last_error());
    assert!(eta > 0.0 && eta <= 1.0);

    let missing = CString::new("no-such-mode").unwrap();
    let s = unsafe { transduce_cooperativity(dev, missing.as_ptr(), 1.0, &mut c0, ptr::null_mut()) };
    assert_eq!(s, TransduceStatus::Invalid);
    assert!(last_error().contains("no-such-mode"), "{}", last_error());
    unsafe { transduce_device_free(dev) };
}

#[test]
fn null_and_invalid_inputs_report_status() {
    let mut total = 0.0;
    let s = unsafe { transduce_budget(ptr::null(), &mut total, ptr::null_mut(), ptr::null_mut()) };
    assert_eq!(s, TransduceStatus::NullPointer);
    assert!(last_error().contains("device"));

    assert_eq!(unsafe { transduce_device_reference(ptr::null_mut()) }, TransduceStatus::NullPointer);

    let mut dev = ptr::null_mut();
    let bad = CString::new("{\"device\": 1}").unwrap();
    assert_eq!(unsafe { transduce_device_from_json(bad.as_ptr(), &mut dev) }, TransduceStatus::Invalid);
    assert!(dev.is_null(), "out-pointer untouched on failure");
    assert!(!last_error().is_empty());

    let bytes = [0xffu8, 0xfe, 0];
    let s = unsafe { transduce_device_from_json(bytes.as_ptr().cast(), &mut dev) };
    assert_eq!(s, TransduceStatus::InvalidUtf8);

    let path = CString::new("/nonexistent/transduce.json").unwrap();
    assert_eq!(unsafe { transduce_device_load(path.as_ptr(), &mut dev) }, TransduceStatus::Io);

    let (mut n, mut sd) = (0.0, 0.0);
    assert_eq!(unsafe { transduce_thermal_occupation(-1.0, 1.0, &mut n, &mut sd) }, TransduceStatus::Invalid);

    // Freeing NULL is a no-op.
    unsafe {
        transduce_device_free(ptr::null_mut());
        transduce_fit_free(ptr::null_mut());
        transduce_string_free(ptr::null_mut());
    }
}

#[test]
fn device_from_json_matches_builtin() {
    let json = CString::new(transduce::io::config::REFERENCE_DEVICE_JSON).unwrap();
    let mut dev = ptr::null_mut();
    assert_eq!(unsafe { transduce_device_from_json(json.as_ptr(), &mut dev) }, TransduceStatus::Ok);
    let builtin = reference();
    let (mut a, mut b) = (0.0, 0.0);
    unsafe {
        transduce_budget(dev, &mut a, ptr::null_mut(), ptr::null_mut());
        transduce_budget(builtin, &mut b, ptr::null_mut(), ptr::null_mut());
        transduce_device_free(dev);
        transduce_device_free(builtin);
    }
    assert_eq!(a, b);
}

#[test]
fn thermal_occupation_inverts_ratio() {
    let (mut n, mut sd) = (0.0, 0.0);
    let s = unsafe { transduce_thermal_occupation(1000.0, 3000.0, &mut n, &mut sd) };
    assert_eq!(s, TransduceStatus::Ok);
    assert!((n - 0.5).abs() < 1e-12, "{n}");
    assert!(sd > 0.0);
}

#[test]
fn piezo_tensor_layout() {
    let mut out = [f64::NAN; 18];
    assert_eq!(unsafe { transduce_piezo_tensor(0.0, -0.1, out.as_mut_ptr()) }, TransduceStatus::Ok);
    // Row-major 3x6: index 2*6 + 0 is e31, and e31 = -e32 = -e14/2 here.
    assert!((out[12] - 0.05).abs() < 1e-15, "{out:?}");
    assert!((out[13] + 0.05).abs() < 1e-15);
    // Away from symmetry angles only the structural zeros remain.
    assert_eq!(unsafe { transduce_piezo_tensor(0.3, -0.1, out.as_mut_ptr()) }, TransduceStatus::Ok);
    assert_eq!(out.iter().filter(|v| **v == 0.0).count(), 11, "{out:?}");
}

#[test]
fn lorentzian_fit_through_handle() {
    let (f0, w) = (2.799e9, 67e3);
    let x: Vec<f64> = (0..201).map(|i| f0 - 300e3 + 3e3 * i as f64).collect();
    let y: Vec<f64> = x.iter().map(|&f| transduce::extraction::lorentzian(f, f0, w, 1.0, 0.02)).collect();
    let mut fit = ptr::null_mut();
    let s = unsafe { transduce_fit_lorentzian(x.as_ptr(), y.as_ptr(), x.len(), &mut fit) };
    assert_eq!(s, TransduceStatus::Ok, "{}", last_error());

    let name = CString::new("fwhm").unwrap();
    let (mut v, mut sd) = (0.0, f64::NAN);
    assert_eq!(unsafe { transduce_fit_param(fit, name.as_ptr(), &mut v, &mut sd) }, TransduceStatus::Ok);
    assert!((v / w - 1.0).abs() < 1e-9, "{v}");

    let (mut res, mut conv) = (f64::NAN, false);
    assert_eq!(unsafe { transduce_fit_quality(fit, &mut res, &mut conv) }, TransduceStatus::Ok);
    assert!(conv && res < 1e-9);

    let bogus = CString::new("width").unwrap();
    assert_eq!(unsafe { transduce_fit_param(fit, bogus.as_ptr(), &mut v, ptr::null_mut()) }, TransduceStatus::Invalid);

    let mut text = ptr::null_mut();
    assert_eq!(unsafe { transduce_fit_to_json(fit, &mut text) }, TransduceStatus::Ok);
    let json: serde_json::Value = serde_json::from_str(unsafe { CStr::from_ptr(text) }.to_str().unwrap()).unwrap();
    assert!((json["params"]["center"].as_f64().unwrap() - f0).abs() < 1.0);
    unsafe {
        transduce_string_free(text);
        transduce_fit_free(fit);
    }

    // Too few points is an error, not a panic.
    let s = unsafe { transduce_fit_lorentzian(x.as_ptr(), y.as_ptr(), 2, &mut fit) };
    assert!(matches!(s, TransduceStatus::Invalid | TransduceStatus::NotConverged), "{s:?}");
}

#[test]
fn errors_are_per_thread() {
    let mut total = 0.0;
    unsafe { transduce_budget(ptr::null(), &mut total, ptr::null_mut(), ptr::null_mut()) };
    assert!(!last_error().is_empty());
    let other = std::thread::spawn(last_error).join().unwrap();
    assert_eq!(other, "");
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(transduce_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(crate_dir().join("include/transduce.h")).unwrap();
    let src = std::fs::read_to_string(crate_dir().join("src/lib.rs")).unwrap();
    let exports: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 20, "{exports:?}");
    for name in exports {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
    assert!(header.contains("TRANSDUCE_STATUS_NOT_CONVERGED = 4"));
}

/// Compiles the C demo against the generated header and, when a C compiler is
/// available, links it against the static library and runs it.
#[test]
fn c_demo_builds_and_runs() {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler `{cc}`");
        return;
    }
    let include = crate_dir().join("include");
    let demo = crate_dir().join("examples/demo.c");
    let ok = Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(&include)
        .arg(&demo)
        .status()
        .unwrap();
    assert!(ok.success(), "header and demo must compile cleanly");

    // The static library sits next to the test binary's parent directory.
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|d| d.parent()).unwrap();
    let lib = profile_dir.join("libtransduce_ffi.a");
    if !lib.exists() {
        eprintln!("skipping link step: {} not built", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let bin = dir.path().join("demo");
    let out = Command::new(&cc)
        .args(["-std=c99", "-I"])
        .arg(&include)
        .arg(&demo)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .output()
        .unwrap();
    assert!(out.status.success(), "link failed: {}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&bin).output().unwrap();
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(run.status.success(), "demo failed: {stdout}{}", String::from_utf8_lossy(&run.stderr));
    assert!(stdout.contains("budget total"), "{stdout}");
}
