use std::ffi::{CStr, CString};
use std::ptr;

use ecat_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(ecat_last_error_message()) }.to_string_lossy().into_owned()
}

const SMALL: &str = r#"
[world]
n_users = 120
n_items = 60
latent_dim = 4
scene_flip_dims = 1
[volume]
target_records = 150
source_ratio = 4.0
seq_len = 5
[model]
embedding_dim = 8
tower = [16]
adapter_hidden = 8
discriminator_hidden = 8
[gst]
max_expanded_nodes = 40
[train]
window_count = 1
batch_size = 64
source_epochs = 1
"#;

#[test]
fn auc_through_the_abi() {
    let scores = [0.1, 0.4, 0.35, 0.8];
    let labels = [0u8, 0, 1, 1];
    let mut out = 0.0;
    assert_eq!(unsafe { ecat_auc(scores.as_ptr(), labels.as_ptr(), 4, &mut out) }, EcatStatus::Ok);
    assert_eq!(out, 0.75);
    assert_eq!(last_error(), "");

    let one_class = [1u8, 1, 1, 1];
    assert_eq!(unsafe { ecat_auc(scores.as_ptr(), one_class.as_ptr(), 4, &mut out) }, EcatStatus::Numeric);
    assert!(last_error().contains("4 positive"), "{}", last_error());

    assert_eq!(unsafe { ecat_auc(ptr::null(), labels.as_ptr(), 4, &mut out) }, EcatStatus::NullPointer);
}

#[test]
fn config_errors_are_reported() {
    let cfg = ecat_config_default();
    let bad = CString::new("train.no_such_field=1").unwrap();
    assert_eq!(unsafe { ecat_config_set(cfg, bad.as_ptr()) }, EcatStatus::Config);
    assert!(last_error().contains("no_such_field"), "{}", last_error());
    let good = CString::new("train.loss.alpha=0.25").unwrap();
    assert_eq!(unsafe { ecat_config_set(cfg, good.as_ptr()) }, EcatStatus::Ok);
    unsafe { ecat_config_free(cfg) };

    let mut out = ptr::null_mut();
    let text = CString::new("[train]\nwindow_count = 0\n").unwrap();
    assert_eq!(unsafe { ecat_config_from_toml(text.as_ptr(), &mut out) }, EcatStatus::Config);
    assert!(out.is_null());
    let bad_kind = CString::new("nope").unwrap();
    let seeds = [0u64];
    let cfg = ecat_config_default();
    assert_eq!(
        unsafe { ecat_run_suite(cfg, bad_kind.as_ptr(), seeds.as_ptr(), 1, &mut ptr::null_mut()) },
        EcatStatus::Config
    );
    unsafe { ecat_config_free(cfg) };
    unsafe { ecat_config_free(ptr::null_mut()) };
    unsafe { ecat_metrics_free(ptr::null_mut()) };
}

#[test]
fn run_and_write_metrics() {
    let text = CString::new(SMALL).unwrap();
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { ecat_config_from_toml(text.as_ptr(), &mut cfg) }, EcatStatus::Ok, "{}", last_error());
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { ecat_run_experiment(cfg, &mut m) }, EcatStatus::Ok, "{}", last_error());
    assert_eq!(unsafe { ecat_metrics_len(m) }, 1);
    let mut auc = -1.0;
    assert_eq!(unsafe { ecat_metrics_auc(m, 0, &mut auc) }, EcatStatus::Ok);
    assert!((0.0..=1.0).contains(&auc));
    assert_eq!(unsafe { ecat_metrics_auc(m, 5, &mut auc) }, EcatStatus::OutOfRange);

    let dir = tempfile::tempdir().unwrap();
    let csv = CString::new(dir.path().join("m.csv").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { ecat_metrics_write(m, csv.as_ptr()) }, EcatStatus::Ok);
    let written = std::fs::read_to_string(dir.path().join("m.csv")).unwrap();
    assert_eq!(written.lines().count(), 2);
    let txt = CString::new(dir.path().join("m.txt").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { ecat_metrics_write(m, txt.as_ptr()) }, EcatStatus::Format);
    let missing = CString::new("/nonexistent-dir/m.csv").unwrap();
    assert_eq!(unsafe { ecat_metrics_write(m, missing.as_ptr()) }, EcatStatus::Io);

    unsafe {
        ecat_metrics_free(m);
        ecat_config_free(cfg);
    }
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/ecat.h")).unwrap();
    for name in [
        "ecat_last_error_message",
        "ecat_version",
        "ecat_config_default",
        "ecat_config_from_toml",
        "ecat_config_set",
        "ecat_config_free",
        "ecat_run_experiment",
        "ecat_run_suite",
        "ecat_metrics_len",
        "ecat_metrics_auc",
        "ecat_metrics_write",
        "ecat_metrics_free",
        "ecat_auc",
        "ECAT_STATUS_OK = 0",
        "typedef struct EcatConfig EcatConfig",
    ] {
        assert!(header.contains(name), "missing {name}");
    }
    let v = unsafe { CStr::from_ptr(ecat_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

/// Compile and run a small C program against the header and static library.
#[test]
fn c_program_links_and_runs() {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if std::process::Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler");
        return;
    }
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|d| d.parent()).unwrap();
    let lib = profile_dir.join("libecat_ffi.a");
    if !lib.exists() {
        eprintln!("skipping: {} not built", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(
        &src,
        r#"
#include <stdio.h>
#include "ecat.h"
int main(void) {
    double scores[4] = {0.1, 0.4, 0.35, 0.8};
    unsigned char labels[4] = {0, 0, 1, 1};
    double out = 0.0;
    if (ecat_auc(scores, labels, 4, &out) != ECAT_STATUS_OK) return 1;
    if (out != 0.75) return 2;
    EcatConfig *cfg = ecat_config_default();
    if (ecat_config_set(cfg, "train.bogus=1") != ECAT_STATUS_CONFIG) return 3;
    if (ecat_last_error_message()[0] == '\0') return 4;
    ecat_config_free(cfg);
    printf("ok %s\n", ecat_version());
    return 0;
}
"#,
    )
    .unwrap();
    let bin = dir.path().join("smoke");
    let status = std::process::Command::new(&cc)
        .arg(&src)
        .arg("-I")
        .arg(concat!(env!("CARGO_MANIFEST_DIR"), "/include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let out = std::process::Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "C program exited with {:?}", out.status);
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}
