mod common;

use common::*;

#[test]
fn empty_manifest_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(dir.path(), "m.txt", "# nothing here\n\n");
    let out = dir.path().join("out");
    for cmd in ["fit-temp", "fit-power", "fit-field", "report"] {
        let o = spiralres(&[cmd, "--manifest", s(&m), "--out", s(&out)]);
        assert_eq!(code(&o), 2, "{cmd}");
        assert!(String::from_utf8_lossy(&o.stderr).contains("empty"));
        assert!(!out.exists(), "{cmd} created output");
    }
    let o = spiralres(&["synth", "--manifest", s(&m), "--out", s(&out)]);
    assert_eq!(code(&o), 2);
    assert!(!out.exists());
}

#[test]
fn unitless_and_unknown_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "a.csv", "freq_hz,re,im\n5e9,1,0\n");
    let base = "sweep_kind = temperature\npoint.0.file = a.csv\npoint.0.temperature_k = 0.1\n";
    let unitless = write(dir.path(), "u.txt", &format!("{base}attenuation = 60\n"));
    let o = spiralres(&["fit-temp", "--manifest", s(&unitless)]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("unit suffix"));
    let unknown = write(dir.path(), "k.txt", &format!("{base}colour = blue\n"));
    let o = spiralres(&["fit-temp", "--manifest", s(&unknown)]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown key"));
}

#[test]
fn missing_point_file_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(
        dir.path(),
        "m.txt",
        "sweep_kind = temperature\npoint.0.file = nope.csv\npoint.0.temperature_k = 0.1\n",
    );
    let out = dir.path().join("out");
    let o = spiralres(&["fit-temp", "--manifest", s(&m), "--out", s(&out)]);
    assert_eq!(code(&o), 2);
    assert!(!out.exists());
}

#[test]
fn malformed_trace_reports_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let t = write(dir.path(), "t.csv", "freq_hz,re,im\n5e9,1,0\n5.1e9,x,0\n");
    let o = spiralres(&["fit-trace", s(&t)]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("t.csv:3"));
}

#[test]
fn unreadable_input_exits_with_io_code() {
    let o = spiralres(&["fit-trace", "/nonexistent/trace.csv"]);
    assert_eq!(code(&o), 4);
    let o = spiralres(&["report", "--manifest", "/nonexistent/manifest.txt"]);
    assert_eq!(code(&o), 4);
}

#[test]
fn too_many_failed_traces_abort_with_summary() {
    let dir = tempfile::tempdir().unwrap();
    let ds = synth(dir.path(), "temp", TEMPERATURE_CONFIG, 8);
    // replace five of 24 traces by featureless background
    let flat: String = std::iter::once("freq_hz,re,im\n".to_string())
        .chain((0..200).map(|i| format!("{:e},0.5,0.25\n", 5.9e9 + 1e4 * i as f64)))
        .collect();
    for i in [1, 4, 9, 15, 20] {
        std::fs::write(ds.join(format!("point_{i:04}.csv")), &flat).unwrap();
    }
    let out = dir.path().join("out");
    let o = spiralres(&["fit-temp", "--manifest", s(&ds.join("manifest.txt")), "--out", s(&out)]);
    assert_eq!(code(&o), 3);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("5 of 24"), "{err}");
    assert!(err.contains("point_0015.csv"));
    assert!(!out.exists());

    // four failures stay under the limit and are listed in the report
    let fresh = synth(dir.path(), "temp_b", TEMPERATURE_CONFIG, 8);
    for i in [1, 4, 9, 15] {
        std::fs::write(fresh.join(format!("point_{i:04}.csv")), &flat).unwrap();
    }
    let o = spiralres(&["fit-temp", "--manifest", s(&fresh.join("manifest.txt"))]);
    ok(&o);
    let r: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["sweeps"][0]["failed_traces_count"], 4.0);
    assert!(r["sweeps"][0]["traces"][15]["error"].is_string());
}

#[test]
fn out_of_range_tolerance_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let t = write(dir.path(), "t.csv", "freq_hz,re,im\n5e9,1,0\n");
    let o = spiralres(&["fit-trace", s(&t), "--tolerance", "2"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn wrong_sweep_kind_for_command() {
    let dir = tempfile::tempdir().unwrap();
    let ds = synth(dir.path(), "temp", TEMPERATURE_CONFIG, 8);
    let o = spiralres(&["fit-power", "--manifest", s(&ds.join("manifest.txt"))]);
    assert_eq!(code(&o), 2);
    let o = spiralres(&["fit-combined", "--manifest", s(&ds.join("manifest.txt"))]);
    assert_eq!(code(&o), 2);
}

#[test]
fn design_needs_exactly_one_sizing_rule() {
    let dir = tempfile::tempdir().unwrap();
    let both = write(
        dir.path(),
        "d.cfg",
        "pitch_um = 1\nwire_width_um = 0.5\ninner_diameter_um = 10\nturns_count = 43\ntarget_fg_ghz = 6\n",
    );
    assert_eq!(code(&spiralres(&["design", "--manifest", s(&both)])), 2);
    let twice = write(dir.path(), "e.cfg", "pitch_um = 1\npitch_m = 1e-6\n");
    assert_eq!(code(&spiralres(&["design", "--manifest", s(&twice)])), 2);
}
