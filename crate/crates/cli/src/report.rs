//! JSON report assembly. Keys are kept sorted by serde_json's map, every
//! number is rounded to 12 significant digits, and every numeric key ends
//! in a unit suffix.

use std::path::Path;

use serde_json::{Map, Value};
use spiralres_core::FitResult;

use crate::error::{CliError, Result};
use crate::manifest::{has_unit_suffix, UNIT_SUFFIXES};

/// Rounds to 12 significant digits; non-finite values become `null`.
pub fn round12(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    let r: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
    Value::from(r)
}

/// `q_int_dimensionless` → `q_int_sigma_dimensionless`.
pub fn sigma_key(key: &str) -> String {
    let suffix = UNIT_SUFFIXES
        .iter()
        .find(|s| key.ends_with(*s))
        .unwrap_or_else(|| panic!("key without unit suffix: {key}"));
    format!("{}_sigma{suffix}", &key[..key.len() - suffix.len()])
}

#[derive(Debug, Default, Clone)]
pub struct Obj(Map<String, Value>);

impl Obj {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num(mut self, key: &str, x: f64) -> Self {
        assert!(
            has_unit_suffix(key),
            "numeric key without unit suffix: {key}"
        );
        self.0.insert(key.to_string(), round12(x));
        self
    }

    pub fn opt_num(self, key: &str, x: Option<f64>) -> Self {
        match x {
            Some(v) => self.num(key, v),
            None => self.null(key),
        }
    }

    pub fn with_sigma(self, key: &str, x: f64, sigma: f64) -> Self {
        let sk = sigma_key(key);
        self.num(key, x).num(&sk, sigma)
    }

    pub fn nums(mut self, key: &str, xs: &[f64]) -> Self {
        assert!(
            has_unit_suffix(key),
            "numeric key without unit suffix: {key}"
        );
        self.0.insert(
            key.to_string(),
            Value::Array(xs.iter().map(|&x| round12(x)).collect()),
        );
        self
    }

    pub fn text(mut self, key: &str, s: impl Into<String>) -> Self {
        self.0.insert(key.to_string(), Value::String(s.into()));
        self
    }

    pub fn flag(mut self, key: &str, b: bool) -> Self {
        self.0.insert(key.to_string(), Value::Bool(b));
        self
    }

    pub fn null(mut self, key: &str) -> Self {
        self.0.insert(key.to_string(), Value::Null);
        self
    }

    pub fn value(mut self, key: &str, v: impl Into<Value>) -> Self {
        self.0.insert(key.to_string(), v.into());
        self
    }

    pub fn build(self) -> Value {
        Value::Object(self.0)
    }
}

impl From<Obj> for Value {
    fn from(o: Obj) -> Value {
        o.build()
    }
}

/// Parameters with one-sigma errors plus fit diagnostics.
pub fn fit_json(fit: &FitResult) -> Value {
    let mut params = Obj::new();
    for (i, name) in fit.names.iter().enumerate() {
        params = params.with_sigma(name, fit.values[i], fit.covariance[(i, i)].max(0.0).sqrt());
    }
    Obj::new()
        .value("parameters", params)
        .flag("converged", fit.converged)
        .flag("ill_conditioned", fit.ill_conditioned)
        .num("condition_dimensionless", fit.condition)
        .num("dof_count", fit.dof as f64)
        .num("iterations_count", fit.iterations as f64)
        .num("reduced_chi2_dimensionless", fit.reduced_chi2())
        .build()
}

/// Two estimates of one quantity and their separation in combined sigma.
pub fn comparison(key: &str, a: (f64, f64), b: (f64, f64)) -> Value {
    let s = (a.1 * a.1 + b.1 * b.1).sqrt();
    Obj::new()
        .with_sigma(&format!("frequency_channel_{key}"), a.0, a.1)
        .with_sigma(&format!("quality_channel_{key}"), b.0, b.1)
        .num("discrepancy_sigma_dimensionless", (a.0 - b.0).abs() / s)
        .build()
}

/// Value compared against an expected band.
pub fn band(key: &str, x: f64, lo: f64, hi: f64) -> Value {
    let (stem, unit) = strip(key);
    Obj::new()
        .num(key, x)
        .num(&format!("{stem}_lower{unit}"), lo)
        .num(&format!("{stem}_upper{unit}"), hi)
        .flag("within_band", x >= lo && x <= hi)
        .build()
}

fn strip(key: &str) -> (&str, &str) {
    let suffix = UNIT_SUFFIXES
        .iter()
        .find(|s| key.ends_with(*s))
        .expect("unit suffix");
    (&key[..key.len() - suffix.len()], suffix)
}

/// Columnar model-curve data written as CSV beside the report.
#[derive(Debug, Clone)]
pub struct PlotTable {
    pub name: String,
    pub columns: Vec<(String, Vec<f64>)>,
}

impl PlotTable {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            columns: Vec::new(),
        }
    }

    pub fn column(mut self, key: &str, xs: Vec<f64>) -> Self {
        assert!(has_unit_suffix(key), "column without unit suffix: {key}");
        self.columns.push((key.to_string(), xs));
        self
    }

    pub fn to_json(&self) -> Value {
        let mut o = Obj::new();
        for (k, v) in &self.columns {
            o = o.nums(k, v);
        }
        o.build()
    }

    pub fn write_csv(&self, dir: &Path) -> Result<()> {
        let path = dir.join(format!("{}.csv", self.name));
        let io = |e: csv::Error| CliError::io(&path, e.into());
        let mut w = csv::Writer::from_path(&path).map_err(io)?;
        w.write_record(self.columns.iter().map(|(k, _)| k.as_str()))
            .map_err(io)?;
        let rows = self.columns.first().map_or(0, |c| c.1.len());
        for i in 0..rows {
            w.write_record(self.columns.iter().map(|(_, v)| match round12(v[i]) {
                Value::Null => String::new(),
                x => x.to_string(),
            }))
            .map_err(io)?;
        }
        w.flush().map_err(|e| CliError::io(&path, e))
    }
}

/// Complete output of one subcommand.
#[derive(Debug, Clone)]
pub struct Report {
    pub body: Value,
    pub plots: Vec<PlotTable>,
}

impl Report {
    pub fn to_string_pretty(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.body).expect("report serializes");
        s.push('\n');
        s
    }

    /// Writes `report.json` and one CSV per plot table into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let path = dir.join("report.json");
        std::fs::write(&path, self.to_string_pretty()).map_err(|e| CliError::io(&path, e))?;
        for p in &self.plots {
            p.write_csv(dir)?;
        }
        Ok(())
    }
}
