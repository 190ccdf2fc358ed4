use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use spikeq_ffi::*;

fn last_error() -> String {
    let p = spikeq_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn preset(name: &str) -> *mut SpikeqConfig {
    let name = CString::new(name).unwrap();
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { spikeq_config_preset(name.as_ptr(), &mut cfg) }, SpikeqStatus::Ok);
    assert!(!cfg.is_null());
    cfg
}

fn set_eq(cfg: *mut SpikeqConfig, name: &str) {
    let name = CString::new(name).unwrap();
    assert_eq!(unsafe { spikeq_config_set_equalizer(cfg, name.as_ptr()) }, SpikeqStatus::Ok);
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(spikeq_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn null_arguments_are_reported() {
    let status = unsafe { spikeq_config_preset(ptr::null(), ptr::null_mut()) };
    assert_eq!(status, SpikeqStatus::NullPointer);
    assert!(last_error().contains("NULL"));
    unsafe {
        spikeq_config_free(ptr::null_mut());
        spikeq_equalizer_free(ptr::null_mut());
        spikeq_string_free(ptr::null_mut());
    }
}

#[test]
fn config_round_trip_and_errors() {
    let cfg = preset("proakis-c");
    let mut toml = ptr::null_mut();
    assert_eq!(unsafe { spikeq_config_to_toml(cfg, &mut toml) }, SpikeqStatus::Ok);
    let text = unsafe { CStr::from_ptr(toml) }.to_owned();
    unsafe { spikeq_string_free(toml) };
    let mut again = ptr::null_mut();
    assert_eq!(unsafe { spikeq_config_from_toml(text.as_ptr(), &mut again) }, SpikeqStatus::Ok);
    let hash = |c: *const SpikeqConfig| {
        let mut h = ptr::null_mut();
        assert_eq!(unsafe { spikeq_config_hash(c, &mut h) }, SpikeqStatus::Ok);
        let s = unsafe { CStr::from_ptr(h) }.to_string_lossy().into_owned();
        unsafe { spikeq_string_free(h) };
        s
    };
    assert_eq!(hash(cfg), hash(again));
    assert_eq!(hash(cfg).len(), 64);

    let bad = CString::new("[training]\nepochs = \"many\"\n").unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { spikeq_config_from_toml(bad.as_ptr(), &mut out) }, SpikeqStatus::Config);
    assert!(last_error().contains("line 2"), "{}", last_error());
    assert_eq!(unsafe { spikeq_config_set_epochs(cfg, 0) }, SpikeqStatus::Config);
    let name = CString::new("rake").unwrap();
    assert_eq!(unsafe { spikeq_config_set_equalizer(cfg, name.as_ptr()) }, SpikeqStatus::Config);
    unsafe {
        spikeq_config_free(cfg);
        spikeq_config_free(again);
    }
}

#[test]
fn transmit_and_equalize_noiseless_identity() {
    let cfg = preset("identity");
    set_eq(cfg, "dfe");
    let n = 64;
    let mut tx = vec![0u32; n];
    let mut rx = vec![0f64; 2 * n];
    let st = unsafe { spikeq_transmit(cfg, 300.0, 9, n, tx.as_mut_ptr(), rx.as_mut_ptr()) };
    assert_eq!(st, SpikeqStatus::Ok);
    let mut eq = ptr::null_mut();
    assert_eq!(unsafe { spikeq_equalizer_load(cfg, ptr::null(), &mut eq) }, SpikeqStatus::Ok);
    let mut est = vec![0u32; n];
    let mut delay = usize::MAX;
    let st = unsafe { spikeq_equalizer_run(eq, 300.0, rx.as_ptr(), n, est.as_mut_ptr(), &mut delay) };
    assert_eq!(st, SpikeqStatus::Ok);
    assert_eq!(&est[delay..], &tx[..n - delay]);
    unsafe {
        spikeq_equalizer_free(eq);
        spikeq_config_free(cfg);
    }
}

#[test]
fn receiver_errors_map_to_status_codes() {
    let cfg = preset("proakis-a");
    set_eq(cfg, "map");
    let mut eq = ptr::null_mut();
    assert_eq!(unsafe { spikeq_equalizer_load(cfg, ptr::null(), &mut eq) }, SpikeqStatus::Ok);
    let rx = [0.0; 8];
    let mut out = [0u32; 4];
    let st = unsafe { spikeq_equalizer_run(eq, 10.0, rx.as_ptr(), 4, out.as_mut_ptr(), ptr::null_mut()) };
    assert_eq!(st, SpikeqStatus::MapInfeasible);
    unsafe { spikeq_equalizer_free(eq) };

    set_eq(cfg, "snn_dfe");
    let st = unsafe { spikeq_equalizer_load(cfg, ptr::null(), &mut eq) };
    assert_eq!(st, SpikeqStatus::MissingCheckpoint);
    unsafe { spikeq_config_free(cfg) };
}

#[test]
fn ternary_encode_through_abi() {
    let mut out = [9i8; 4];
    let st = unsafe { spikeq_ternary_encode(-1.1, 4, 2.0, out.as_mut_ptr(), out.len()) };
    assert_eq!(st, SpikeqStatus::Ok);
    assert_eq!(out, [-1, 0, 0, -1]);
    let st = unsafe { spikeq_ternary_encode(1.0, 8, 2.0, out.as_mut_ptr(), out.len()) };
    assert_eq!(st, SpikeqStatus::InvalidArgument);
}

#[test]
fn train_and_sweep_write_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = preset("proakis-b");
    assert_eq!(unsafe { spikeq_config_set_epochs(cfg, 3) }, SpikeqStatus::Ok);
    let grid = [10.0];
    assert_eq!(unsafe { spikeq_config_set_sweep_grid(cfg, grid.as_ptr(), 1) }, SpikeqStatus::Ok);
    let out = CString::new(dir.path().to_str().unwrap()).unwrap();
    let mut loss = f64::NAN;
    assert_eq!(unsafe { spikeq_train(cfg, out.as_ptr(), ptr::null(), &mut loss) }, SpikeqStatus::Ok);
    assert!(loss.is_finite());
    assert!(dir.path().join("checkpoint_snn_dfe_proakis-b.bin").exists());
    set_eq(cfg, "zf");
    assert_eq!(unsafe { spikeq_sweep(cfg, ptr::null(), out.as_ptr()) }, SpikeqStatus::Ok);
    assert!(dir.path().join("curve_zf_proakis-b.csv").exists());
    unsafe { spikeq_config_free(cfg) };
}

fn header() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include").join("spikeq.h")
}

#[test]
fn header_declares_every_export() {
    let h = std::fs::read_to_string(header()).unwrap();
    let src = std::fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("src/lib.rs")).unwrap();
    let mut n = 0;
    for line in src.lines() {
        if let Some(rest) = line.split("extern \"C\" fn ").nth(1) {
            let name = rest.split('(').next().unwrap();
            assert!(h.contains(&format!("{name}(")), "{name} missing from header");
            n += 1;
        }
    }
    assert!(n >= 15);
    assert!(h.contains("typedef struct SpikeqConfig SpikeqConfig;"));
    assert!(h.contains("SPIKEQ_STATUS_MAP_INFEASIBLE = 5"));
}

#[test]
fn header_compiles_as_c_and_cpp() {
    for (cc, lang) in [("cc", "c"), ("c++", "c++")] {
        let Ok(o) = Command::new(cc)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang])
            .arg(header())
            .output()
        else {
            eprintln!("{cc} not available, skipped");
            continue;
        };
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
}
