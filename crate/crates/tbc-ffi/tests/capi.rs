use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use tbc_ffi::*;

const SMALL: &str = "n = 16\ndomain = [-6.0, 6.0, -6.0, 6.0]\nt_max = 0.01\ndt = 1e-3\nc0 = 0.0\n";

fn new_handle(text: &str) -> (TbcStatus, *mut TbcHandle) {
    let c = CString::new(text).unwrap();
    let mut h = ptr::null_mut();
    let status = unsafe { tbc_handle_new(c.as_ptr(), &mut h) };
    (status, h)
}

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    let needed = unsafe { tbc_last_error(buf.as_mut_ptr(), buf.len()) };
    assert!(needed > 0);
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

#[test]
fn lifecycle_steps_and_reports() {
    let (status, h) = new_handle(SMALL);
    assert_eq!(status, TbcStatus::Ok);
    assert!(!h.is_null());
    unsafe {
        let label = CStr::from_ptr(tbc_handle_label(h)).to_str().unwrap();
        assert_eq!(label, "NP30-TR");
        assert_eq!(tbc_handle_step(h, 10), TbcStatus::Ok);
        let (mut steps, mut t, mut e, mut size) = (0usize, 0.0f64, 0.0f64, 0usize);
        assert_eq!(tbc_handle_steps(h, &mut steps), TbcStatus::Ok);
        assert_eq!(tbc_handle_time(h, &mut t), TbcStatus::Ok);
        assert_eq!(tbc_handle_relative_error(h, &mut e), TbcStatus::Ok);
        assert_eq!(tbc_handle_state_size(h, &mut size), TbcStatus::Ok);
        assert_eq!(steps, 10);
        assert!((t - 0.01).abs() < 1e-15);
        assert!(e.is_finite() && e < 1e-2, "error {e}");
        assert!(size > 0);
        tbc_handle_free(h);
    }
}

#[test]
fn field_copy_checks_the_buffer_length() {
    let (_, h) = new_handle(SMALL);
    unsafe {
        let (mut r, mut c) = (0usize, 0usize);
        assert_eq!(tbc_handle_field_shape(h, &mut r, &mut c), TbcStatus::Ok);
        assert_eq!((r, c), (17, 17));
        let mut re = vec![0.0; r * c];
        let mut im = vec![0.0; r * c];
        assert_eq!(tbc_handle_field(h, re.as_mut_ptr(), im.as_mut_ptr(), r * c), TbcStatus::Ok);
        assert!(re.iter().any(|v| *v != 0.0));
        assert_eq!(
            tbc_handle_field(h, re.as_mut_ptr(), im.as_mut_ptr(), r * c - 1),
            TbcStatus::Dimension
        );
        tbc_handle_free(h);
    }
}

#[test]
fn invalid_configurations_map_to_config_status() {
    let (status, h) = new_handle("engine = \"tbc\"\nstepper = \"bdf2\"\n");
    assert_eq!(status, TbcStatus::Config);
    assert!(h.is_null());
    assert!(last_error().contains("bdf1 and tr"));
    let (status, _) = new_handle("not toml at all [");
    assert_eq!(status, TbcStatus::Config);
}

#[test]
fn null_pointers_are_rejected() {
    unsafe {
        assert_eq!(tbc_handle_step(ptr::null_mut(), 1), TbcStatus::InvalidArgument);
        let mut x = 0.0;
        assert_eq!(tbc_handle_time(ptr::null(), &mut x), TbcStatus::InvalidArgument);
        assert_eq!(tbc_handle_new(ptr::null(), ptr::null_mut()), TbcStatus::InvalidArgument);
        assert!(tbc_handle_label(ptr::null()).is_null());
        tbc_handle_free(ptr::null_mut());
    }
}

#[test]
fn weights_match_the_core_library() {
    let mut out = vec![0.0; 32];
    let status = unsafe { tbc_cq_weights(TbcStepper::Tr, -0.5, 32, 1e-2, out.as_mut_ptr()) };
    assert_eq!(status, TbcStatus::Ok);
    let w = tbc_core::rational::cq_weights(tbc_core::rational::Stepper::Tr, -0.5, 32, 1e-2).unwrap();
    assert_eq!(out, w.omega);
    let status = unsafe { tbc_cq_weights(TbcStepper::Bdf1, 0.3, 4, 1e-2, out.as_mut_ptr()) };
    assert_eq!(status, TbcStatus::Config);
}

#[test]
fn error_message_is_truncated_and_terminated() {
    let (status, _) = new_handle("n = 1\n");
    assert_eq!(status, TbcStatus::Config);
    let mut buf = [0x7f as c_char; 8];
    let needed = unsafe { tbc_last_error(buf.as_mut_ptr(), buf.len()) };
    assert!(needed > buf.len());
    assert_eq!(buf[7], 0);
}

#[test]
fn status_names_and_version_are_static_strings() {
    let name = unsafe { CStr::from_ptr(tbc_status_name(TbcStatus::Singular)) };
    assert_eq!(name.to_str().unwrap(), "singular system");
    let v = unsafe { CStr::from_ptr(tbc_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_the_api_and_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/tbc.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in [
        "tbc_handle_new",
        "tbc_handle_free",
        "tbc_handle_step",
        "tbc_handle_field",
        "tbc_last_error",
        "typedef struct TbcHandle TbcHandle",
        "TBC_STATUS_CONFIG = 2",
    ] {
        assert!(text.contains(name), "header lacks {name}");
    }
    let Ok(out) = Command::new("cc").args(["-std=c99", "-fsyntax-only", "-x", "c"]).arg(&header).output() else {
        eprintln!("no C compiler found; syntax check skipped");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
