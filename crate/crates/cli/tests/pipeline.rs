mod common;

use std::path::Path;

use common::*;
use serde_json::Value;
use spiralres_cli::manifest::has_unit_suffix;

#[test]
fn temperature_dataset_recovers_alpha_and_tc() {
    let dir = tempfile::tempdir().unwrap();
    let ds = synth(dir.path(), "temp", TEMPERATURE_CONFIG, 7);
    let out = dir.path().join("report");
    ok(&spiralres(&["fit-temp", "--manifest", s(&ds.join("manifest.txt")), "--out", s(&out)]));
    let r = read_json(&out.join("report.json"));
    let a = &r["sweeps"][0]["analysis"];
    for channel in ["frequency_channel", "quality_channel"] {
        let alpha = param(&a[channel], "alpha_dimensionless");
        let tc = param(&a[channel], "tc_k");
        assert!((alpha / 0.055 - 1.0).abs() < 0.05, "{channel}: alpha {alpha}");
        assert!((tc / 7.9 - 1.0).abs() < 0.02, "{channel}: tc {tc}");
    }
    assert_eq!(r["sweeps"][0]["failed_traces_count"], 0.0);
    assert!(out.join("sweep0_temperature_model.csv").is_file());
}

const FIELD_CONFIG: &str = "\
sweep_kind = field
f0_ghz = 4.04, 4.53, 5.0
esr_g_dimensionless = 1.97
grid_start_mt = 0
grid_stop_mt = 400
grid_points_count = 161
";

#[test]
fn field_dataset_reports_g() {
    let dir = tempfile::tempdir().unwrap();
    let ds = synth(dir.path(), "field", FIELD_CONFIG, 5);
    let manifests: Vec<String> = (0..3)
        .map(|j| s(&ds.join(format!("resonator_{j}/manifest.txt"))).to_string())
        .collect();
    let out = dir.path().join("report");
    let mut args = vec!["fit-field"];
    for m in &manifests {
        args.extend(["--manifest", m.as_str()]);
    }
    args.extend(["--out", s(&out)]);
    ok(&spiralres(&args));
    let r = read_json(&out.join("report.json"));
    let g = param(&r["zeeman"]["fit"], "g_dimensionless");
    assert!((g - 1.97).abs() < 0.02, "g = {g}");
    assert_eq!(r["zeeman"]["features_count"], 3.0);
    for sweep in r["sweeps"].as_array().unwrap() {
        assert_eq!(sweep["analysis"]["esr_features"].as_array().unwrap().len(), 1);
        assert_eq!(sweep["analysis"]["vortex_onset"]["found"], false);
    }
}

#[test]
fn single_field_sweep_reports_missing_features() {
    let dir = tempfile::tempdir().unwrap();
    let ds = synth(dir.path(), "field", FIELD_CONFIG.replace("4.04, 4.53, 5.0", "5.0").as_str(), 5);
    let o = spiralres(&["fit-field", "--manifest", s(&ds.join("manifest.txt"))]);
    ok(&o);
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["zeeman"]["features_count"], 1.0);
    assert!(r["zeeman"]["error"].as_str().unwrap().contains("ESR"));
    let single = r["sweeps"][0]["analysis"]["esr_features"][0]["single_resonator_g_dimensionless"]
        .as_f64()
        .unwrap();
    assert!((single - 1.97).abs() < 0.02);
}

#[test]
fn power_dataset_recovers_tls_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let config = "\
sweep_kind = power
tls_law = power_law
grid_start_dimensionless = 0.1
grid_stop_dimensionless = 1e6
grid_points_count = 41
grid_spacing = log
";
    let ds = synth(dir.path(), "power", config, 2);
    let o = spiralres(&["fit-power", "--manifest", s(&ds.join("manifest.txt"))]);
    ok(&o);
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    let fit = &r["sweeps"][0]["analysis"]["fit"];
    for (name, truth, tol) in [
        ("q_tls0_dimensionless", 2.3e5, 0.05),
        ("n_c_dimensionless", 50.0, 0.1),
        ("beta_dimensionless", 0.4, 0.05),
        ("q_other_dimensionless", 5e5, 0.05),
    ] {
        let v = param(fit, name);
        assert!((v / truth - 1.0).abs() < tol, "{name}: {v}");
    }
}

#[test]
fn combined_fit_recovers_tls_quality() {
    let dir = tempfile::tempdir().unwrap();
    let t = synth(dir.path(), "t", &TEMPERATURE_CONFIG.replace("tls_law = off\n", ""), 3);
    let power = "\
sweep_kind = power
grid_start_dimensionless = 0.1
grid_stop_dimensionless = 1e6
grid_points_count = 31
grid_spacing = log
";
    let p = synth(dir.path(), "p", power, 4);
    let o = spiralres(&[
        "fit-combined",
        "--manifest",
        s(&t.join("manifest.txt")),
        "--manifest",
        s(&p.join("manifest.txt")),
    ]);
    ok(&o);
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    let c = &r["combined"];
    for channel in ["frequency_channel", "quality_channel"] {
        let q = param(&c[channel], "q_tls0_dimensionless");
        assert!((q / 2.3e5 - 1.0).abs() < 0.05, "{channel}: {q}");
    }
    assert!(c["dual_channel"]["q_tls0"]["discrepancy_sigma_dimensionless"].is_number());
}

fn run_to(dir: &Path, manifest: &Path, name: &str, threads: &str) -> std::path::PathBuf {
    let out = dir.join(name);
    ok(&spiralres(&["report", "--threads", threads, "--manifest", s(manifest), "--out", s(&out)]));
    out
}

#[test]
fn identical_inputs_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let ds = synth(dir.path(), "temp", TEMPERATURE_CONFIG, 9);
    let m = ds.join("manifest.txt");
    let a = run_to(dir.path(), &m, "a", "1");
    let b = run_to(dir.path(), &m, "b", "4");
    for f in ["report.json", "sweep0_temperature_model.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let again = synth(dir.path(), "temp2", TEMPERATURE_CONFIG, 9);
    for f in ["manifest.txt", "point_0000.csv", "point_0023.csv", "truth.json"] {
        assert_eq!(std::fs::read(ds.join(f)).unwrap(), std::fs::read(again.join(f)).unwrap(), "{f}");
    }
}

fn check_keys(v: &Value, path: &str, bad: &mut Vec<String>) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                let numeric = x.is_number()
                    || x.as_array().is_some_and(|a| !a.is_empty() && a.iter().all(|e| e.is_number() || e.is_null()));
                if numeric && !has_unit_suffix(k) {
                    bad.push(format!("{path}.{k}"));
                }
                check_keys(x, &format!("{path}.{k}"), bad);
            }
        }
        Value::Array(a) => a.iter().for_each(|x| check_keys(x, path, bad)),
        _ => {}
    }
}

fn significant_digits(x: f64) -> usize {
    let s = format!("{:e}", x.abs());
    let mantissa = s.split('e').next().unwrap();
    mantissa.chars().filter(|c| c.is_ascii_digit()).count()
}

fn check_numbers(v: &Value, bad: &mut Vec<f64>) {
    match v {
        Value::Number(n) => {
            let x = n.as_f64().unwrap();
            if significant_digits(x) > 12 {
                bad.push(x);
            }
        }
        Value::Object(m) => m.values().for_each(|x| check_numbers(x, bad)),
        Value::Array(a) => a.iter().for_each(|x| check_numbers(x, bad)),
        _ => {}
    }
}

#[test]
fn every_number_has_a_unit_and_twelve_digits() {
    let dir = tempfile::tempdir().unwrap();
    let t = synth(dir.path(), "t", TEMPERATURE_CONFIG, 1);
    let f = synth(dir.path(), "f", FIELD_CONFIG, 1);
    let out = dir.path().join("r");
    let mut args = vec!["report".to_string(), "--manifest".into(), s(&t.join("manifest.txt")).into()];
    for j in 0..3 {
        args.push("--manifest".into());
        args.push(s(&f.join(format!("resonator_{j}/manifest.txt"))).into());
    }
    args.extend(["--out".into(), s(&out).into()]);
    ok(&spiralres(&args.iter().map(String::as_str).collect::<Vec<_>>()));
    let r = read_json(&out.join("report.json"));
    let mut bad = Vec::new();
    check_keys(&r, "", &mut bad);
    assert!(bad.is_empty(), "keys without unit suffix: {bad:?}");
    let mut long = Vec::new();
    check_numbers(&r, &mut long);
    assert!(long.is_empty(), "over-long numbers: {long:?}");
    assert!(r["zeeman"]["fit"].is_object());

    let trace = dir.path().join("trace_report");
    ok(&spiralres(&["fit-trace", s(&t.join("point_0000.csv")), "--out", s(&trace)]));
    let mut bad = Vec::new();
    check_keys(&read_json(&trace.join("report.json")), "", &mut bad);
    assert!(bad.is_empty(), "{bad:?}");
}

#[test]
fn plot_csv_matches_report_arrays() {
    let dir = tempfile::tempdir().unwrap();
    let ds = synth(dir.path(), "temp", TEMPERATURE_CONFIG, 4);
    let out = dir.path().join("r");
    ok(&spiralres(&["fit-temp", "--manifest", s(&ds.join("manifest.txt")), "--out", s(&out)]));
    let r = read_json(&out.join("report.json"));
    let plot = &r["sweeps"][0]["analysis"]["plot"];
    let mut reader = csv::Reader::from_path(out.join("sweep0_temperature_model.csv")).unwrap();
    let headers = reader.headers().unwrap().clone();
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 24);
    for (j, h) in headers.iter().enumerate() {
        let col = plot[h].as_array().unwrap_or_else(|| panic!("{h} not in report"));
        for (row, v) in rows.iter().zip(col) {
            assert_eq!(row[j].parse::<f64>().unwrap(), v.as_f64().unwrap());
        }
    }
}

#[test]
fn design_matches_core() {
    use spiralres_core::design::design;
    use spiralres_core::{MaterialModel, SpiralGeometry};

    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "d.cfg",
        "pitch_um = 1.0\nwire_width_um = 0.5\ninner_diameter_um = 10\nturns_count = 43\nalpha_dimensionless = 0.055\n",
    );
    let o = spiralres(&["design", "--manifest", s(&cfg)]);
    ok(&o);
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    let g = SpiralGeometry::new(1e-6, 0.5e-6, 43, 10e-6).unwrap();
    let d = design(&g, &MaterialModel::niobium(8.0).with_alpha(0.055)).unwrap();
    let res = &r["result"];
    for (k, v) in [("lg_h", d.lg_h), ("fg_hz", d.fg_hz), ("zc_ohm", d.zc_ohm), ("lk_h", d.lk_h)] {
        assert!((res[k].as_f64().unwrap() / v - 1.0).abs() < 1e-11, "{k}");
    }
    assert!((res["zc_kohm"].as_f64().unwrap() - d.zc_ohm / 1e3).abs() < 1e-9);

    let solve = write(
        dir.path(),
        "s.cfg",
        "pitch_um = 0.3\nwire_width_um = 0.15\ninner_diameter_um = 10\ntarget_fg_ghz = 4.61\n",
    );
    let o = spiralres(&["design", "--manifest", s(&solve)]);
    ok(&o);
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    let miss = r["solver"]["relative_miss_dimensionless"].as_f64().unwrap();
    assert!(miss.abs() < 0.02, "{miss}");
}
