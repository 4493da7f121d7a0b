use std::ffi::{CStr, CString};
use std::ptr;

use deep_ffi::*;

fn new_net(seed: u64) -> *mut DeepNetwork {
    let mut net = ptr::null_mut();
    let status = unsafe { deep_network_new_complete(8, 2, 1, 0.5, seed, &mut net) };
    assert_eq!(status, DeepStatus::Ok);
    assert!(!net.is_null());
    net
}

fn last_error() -> String {
    let p = deep_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn counts_of_complete_network() {
    let net = new_net(3);
    unsafe {
        assert_eq!(deep_network_n_total(net), 8);
        assert_eq!(deep_network_n_input(net), 2);
        assert_eq!(deep_network_parameter_count(net), 48);
        let mut s = -1.0;
        assert_eq!(deep_network_sparsity(net, &mut s), DeepStatus::Ok);
        assert_eq!(s, 0.0);
        deep_network_free(net);
    }
}

#[test]
fn null_handles_are_reported() {
    unsafe {
        assert_eq!(deep_network_n_total(ptr::null()), 0);
        let mut s = 0.0;
        assert_eq!(
            deep_network_sparsity(ptr::null(), &mut s),
            DeepStatus::NullPointer
        );
        assert!(last_error().contains("net"));
        deep_network_free(ptr::null_mut());
    }
}

#[test]
fn invalid_construction_sets_message() {
    let mut net = ptr::null_mut();
    let status = unsafe { deep_network_new_complete(2, 2, 1, 0.5, 0, &mut net) };
    assert_eq!(status, DeepStatus::InvalidArgument);
    assert!(net.is_null());
    assert!(!last_error().is_empty());
}

#[test]
fn save_load_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("n.net").to_str().unwrap()).unwrap();
    let net = new_net(11);
    unsafe {
        assert_eq!(deep_network_save(net, path.as_ptr()), DeepStatus::Ok);
        let mut loaded = ptr::null_mut();
        assert_eq!(
            deep_network_load(path.as_ptr(), &mut loaded),
            DeepStatus::Ok
        );

        let (mut a, mut b) = (vec![0.0; 8], vec![0.0; 8]);
        let x = [1.0, 0.0];
        assert_eq!(
            deep_network_free_equilibrium(net, x.as_ptr(), 2, a.as_mut_ptr(), 8),
            DeepStatus::Ok
        );
        assert_eq!(
            deep_network_free_equilibrium(loaded, x.as_ptr(), 2, b.as_mut_ptr(), 8),
            DeepStatus::Ok
        );
        assert_eq!(a, b);
        assert_eq!(&a[..2], &x);
        assert!(a.iter().all(|v| (0.0..=1.0).contains(v)));
        deep_network_free(net);
        deep_network_free(loaded);
    }
}

#[test]
fn missing_and_corrupt_files() {
    let dir = tempfile::tempdir().unwrap();
    let missing = CString::new(dir.path().join("none.net").to_str().unwrap()).unwrap();
    let mut net = ptr::null_mut();
    unsafe {
        assert_eq!(
            deep_network_load(missing.as_ptr(), &mut net),
            DeepStatus::Io
        );
        let bad = dir.path().join("bad.net");
        std::fs::write(
            &bad,
            "DEEP v1 N=3 P=1 roles=IHO\n. 0.1 .\n. . x\n. . .\n. 0 0\n",
        )
        .unwrap();
        let bad = CString::new(bad.to_str().unwrap()).unwrap();
        assert_eq!(deep_network_load(bad.as_ptr(), &mut net), DeepStatus::Parse);
        let msg = last_error();
        assert!(msg.contains("line 3, column 5"), "{msg}");
    }
}

#[test]
fn wrong_buffer_length_is_rejected() {
    let net = new_net(1);
    let mut state = vec![0.0; 3];
    let x = [0.0, 1.0];
    unsafe {
        let status = deep_network_free_equilibrium(net, x.as_ptr(), 2, state.as_mut_ptr(), 3);
        assert_eq!(status, DeepStatus::InvalidArgument);
        deep_network_free(net);
    }
}

#[test]
fn certificate_flag() {
    let net = new_net(5);
    let mut flag = -1;
    unsafe {
        assert_eq!(deep_network_certified(net, &mut flag), DeepStatus::Ok);
        deep_network_free(net);
    }
    assert!(flag == 0 || flag == 1);
}

#[test]
fn training_changes_network_and_reports_mse() {
    let net = new_net(0);
    let task = CString::new("and").unwrap();
    let rule = CString::new("deep").unwrap();
    let mut mse = f64::NAN;
    unsafe {
        let status = deep_train(net, task.as_ptr(), rule.as_ptr(), 3, 0, 0, &mut mse);
        assert_eq!(status, DeepStatus::Ok);
        deep_network_free(net);
    }
    assert!(mse.is_finite() && mse >= 0.0);
}

#[test]
fn unknown_task_is_invalid_argument() {
    let net = new_net(0);
    let task = CString::new("nand").unwrap();
    let rule = CString::new("deep").unwrap();
    unsafe {
        let status = deep_train(net, task.as_ptr(), rule.as_ptr(), 1, 0, 0, ptr::null_mut());
        assert_eq!(status, DeepStatus::InvalidArgument);
        deep_network_free(net);
    }
    assert!(last_error().contains("and, or, xor"));
}

#[test]
fn generated_header_declares_api() {
    let header = include_str!("../include/deep.h");
    for name in [
        "typedef struct DeepNetwork DeepNetwork;",
        "DEEP_STATUS_OK = 0",
        "deep_last_error_message",
        "deep_network_new_complete",
        "deep_network_load",
        "deep_network_save",
        "deep_network_free",
        "deep_network_free_equilibrium",
        "deep_network_certified",
        "deep_train",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}
