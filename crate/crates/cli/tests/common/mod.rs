#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

pub fn spiralres(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spiralres"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

pub fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

pub fn ok(o: &Output) {
    assert!(
        o.status.success(),
        "exit {:?}\nstderr:\n{}",
        o.status.code(),
        String::from_utf8_lossy(&o.stderr)
    );
}

pub fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

pub fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

/// Synthesizes a dataset from `config` text into `dir/name`.
pub fn synth(dir: &Path, name: &str, config: &str, seed: u64) -> PathBuf {
    let cfg = write(dir, &format!("{name}.cfg"), config);
    let out = dir.join(name);
    ok(&spiralres(&["synth", "--manifest", s(&cfg), "--out", s(&out), "--seed", &seed.to_string()]));
    out
}

pub const TEMPERATURE_CONFIG: &str = "\
sweep_kind = temperature
device = chip
resonator = r3
tls_law = off
grid_k = 0.03,0.05,0.1,0.2,0.5,0.8,1.0,1.2,1.4,1.6,1.8,2.0,2.2,2.4,2.6,2.8,3.0,3.2,3.4,3.6,3.8,4.0,4.2,4.5
";

pub fn param(section: &Value, name: &str) -> f64 {
    section["parameters"][name].as_f64().unwrap_or_else(|| panic!("{name} missing"))
}
