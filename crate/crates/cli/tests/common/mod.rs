#![allow(dead_code)]

#[path = "../../../testsuite/src/fixtures.rs"]
mod fixtures;

use std::process::{Command, Output};

pub use fixtures::*;

pub fn spadsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spadsim")).args(args).env_remove("SPADSIM_JOBS").output().expect("spawn spadsim")
}

/// Runs the binary and panics with its stderr unless it exits 0.
pub fn spadsim_ok(args: &[&str]) -> String {
    let out = spadsim(args);
    assert!(
        out.status.success(),
        "spadsim {args:?} failed with {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}
