//! Flat `key = value` configuration files. Every numeric key names its
//! unit as a suffix; there is no nesting beyond dotted key prefixes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use spiralres_core::sweeps::SweepKind;
use spiralres_core::tls::TlsParams;
use spiralres_core::MaterialModel;

use crate::error::{CliError, Result};

/// Unit suffixes accepted on numeric keys. Where one suffix ends another
/// the longer comes first.
pub const UNIT_SUFFIXES: [&str; 20] = [
    "_dimensionless",
    "_hz_per_t2",
    "_per_t",
    "_count",
    "_kohm",
    "_dbm",
    "_ohm",
    "_rad",
    "_ghz",
    "_hz",
    "_um",
    "_mt",
    "_db",
    "_k",
    "_t",
    "_s",
    "_m",
    "_h",
    "_w",
    "_j",
];

pub fn has_unit_suffix(key: &str) -> bool {
    UNIT_SUFFIXES.iter().any(|s| key.ends_with(s))
}

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
    used: std::cell::Cell<bool>,
}

/// Parsed key–value file. Keys must be consumed through the typed getters;
/// [`KeyValues::finish`] rejects any that were not.
#[derive(Debug)]
pub struct KeyValues {
    path: PathBuf,
    entries: BTreeMap<String, Entry>,
}

impl KeyValues {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(path, &text)
    }

    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (k, v) = content.split_once('=').ok_or_else(|| {
                CliError::parse(
                    path,
                    line,
                    format!("expected `key = value`, got `{content}`"),
                )
            })?;
            let key = k.trim().to_string();
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(CliError::parse(
                    path,
                    line,
                    format!("invalid key `{}`", k.trim()),
                ));
            }
            let entry = Entry {
                value: v.trim().to_string(),
                line,
                used: std::cell::Cell::new(false),
            };
            if let Some(prev) = entries.insert(key.clone(), entry) {
                return Err(CliError::parse(
                    path,
                    line,
                    format!("duplicate key `{key}` (first on line {})", prev.line),
                ));
            }
        }
        Ok(Self {
            path: path.to_path_buf(),
            entries,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(|k| k.as_str())
    }

    fn entry(&self, key: &str) -> Option<&Entry> {
        let e = self.entries.get(key)?;
        e.used.set(true);
        Some(e)
    }

    pub fn text(&self, key: &str) -> Option<String> {
        self.entry(key).map(|e| e.value.clone())
    }

    pub fn required_text(&self, key: &str) -> Result<String> {
        self.text(key).ok_or_else(|| {
            CliError::Validation(format!("{}: missing key `{key}`", self.path.display()))
        })
    }

    fn number_at(&self, key: &str, e: &Entry, s: &str) -> Result<f64> {
        let x: f64 = s.trim().parse().map_err(|_| {
            CliError::parse(
                &self.path,
                e.line,
                format!("`{key}`: `{s}` is not a number"),
            )
        })?;
        if !x.is_finite() {
            return Err(CliError::parse(
                &self.path,
                e.line,
                format!("`{key}` must be finite"),
            ));
        }
        Ok(x)
    }

    pub fn number(&self, key: &str) -> Result<Option<f64>> {
        debug_assert!(has_unit_suffix(key), "numeric key without unit: {key}");
        match self.entry(key) {
            None => Ok(None),
            Some(e) => self.number_at(key, e, &e.value).map(Some),
        }
    }

    pub fn number_or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.number(key)?.unwrap_or(default))
    }

    pub fn required_number(&self, key: &str) -> Result<f64> {
        self.number(key)?.ok_or_else(|| {
            CliError::Validation(format!("{}: missing key `{key}`", self.path.display()))
        })
    }

    /// Comma-separated list of numbers.
    pub fn numbers(&self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.entry(key) {
            None => Ok(None),
            Some(e) => e
                .value
                .split(',')
                .map(|s| self.number_at(key, e, s))
                .collect::<Result<Vec<_>>>()
                .map(Some),
        }
    }

    /// A quantity that may be given in SI or in a lab unit, e.g.
    /// `pitch_m` or `pitch_um`. Returns SI.
    pub fn quantity(&self, stem: &str, units: &[(&str, f64)]) -> Result<Option<f64>> {
        let mut found = None;
        for &(suffix, factor) in units {
            let key = format!("{stem}{suffix}");
            if let Some(x) = self.number(&key)? {
                if found.is_some() {
                    return Err(CliError::Validation(format!(
                        "{}: `{stem}` given more than once",
                        self.path.display()
                    )));
                }
                found = Some(x * factor);
            }
        }
        Ok(found)
    }

    pub fn count(&self, key: &str) -> Result<Option<usize>> {
        match self.number(key)? {
            None => Ok(None),
            Some(x) if x >= 0.0 && x.fract() == 0.0 => Ok(Some(x as usize)),
            Some(x) => Err(CliError::parse(
                &self.path,
                self.entries[key].line,
                format!("`{key}` must be a non-negative integer, got {x}"),
            )),
        }
    }

    /// Fails on keys that no getter asked for; numeric-looking keys
    /// without a unit suffix are reported as unit errors.
    pub fn finish(&self) -> Result<()> {
        for (k, e) in &self.entries {
            if e.used.get() {
                continue;
            }
            let last = k.rsplit('.').next().unwrap_or(k);
            if !has_unit_suffix(last) && e.value.trim().parse::<f64>().is_ok() {
                return Err(CliError::unit(
                    &self.path,
                    format!("line {}: key `{k}` carries no unit suffix", e.line),
                ));
            }
            return Err(CliError::Validation(format!(
                "{}:{}: unknown key `{k}`",
                self.path.display(),
                e.line
            )));
        }
        Ok(())
    }
}

pub const LENGTH_UNITS: [(&str, f64); 2] = [("_m", 1.0), ("_um", 1e-6)];
pub const FREQUENCY_UNITS: [(&str, f64); 2] = [("_hz", 1.0), ("_ghz", 1e9)];
pub const FIELD_UNITS: [(&str, f64); 2] = [("_t", 1.0), ("_mt", 1e-3)];

/// One measured point of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSpec {
    pub index: usize,
    pub file: PathBuf,
    pub temperature: f64,
    pub drive_power_dbm: Option<f64>,
    pub field: f64,
}

#[derive(Debug, Clone)]
pub struct SweepManifest {
    pub path: PathBuf,
    pub device: String,
    pub resonator: String,
    pub kind: SweepKind,
    pub attenuation_db: Option<f64>,
    pub points: Vec<PointSpec>,
    pub material: MaterialModel,
    pub tls: TlsParams,
}

/// Starting values used when a manifest gives no guesses.
pub fn default_tls_guess() -> TlsParams {
    TlsParams {
        q_tls0: 2e5,
        n_c: 50.0,
        beta: 0.4,
        d: 100.0,
        beta1: 1.0,
        beta2: 0.5,
        q_other: 5e5,
    }
}

fn material_guess(kv: &KeyValues) -> Result<MaterialModel> {
    let m = MaterialModel::niobium(kv.number_or("guess.tc_k", 8.5)?)
        .with_alpha(kv.number_or("guess.alpha_dimensionless", 0.03)?);
    let m = MaterialModel {
        gap_ratio: kv.number_or("guess.gap_ratio_dimensionless", m.gap_ratio)?,
        ..m
    };
    m.validate()?;
    Ok(m)
}

fn tls_guess(kv: &KeyValues) -> Result<TlsParams> {
    let d = default_tls_guess();
    let t = TlsParams {
        q_tls0: kv.number_or("guess.q_tls0_dimensionless", d.q_tls0)?,
        n_c: kv.number_or("guess.n_c_dimensionless", d.n_c)?,
        beta: kv.number_or("guess.beta_dimensionless", d.beta)?,
        d: kv.number_or("guess.d_dimensionless", d.d)?,
        beta1: kv.number_or("guess.beta1_dimensionless", d.beta1)?,
        beta2: kv.number_or("guess.beta2_dimensionless", d.beta2)?,
        q_other: kv.number_or("guess.q_other_dimensionless", d.q_other)?,
    };
    t.validate()?;
    Ok(t)
}

impl SweepManifest {
    pub fn read(path: &Path) -> Result<Self> {
        let kv = KeyValues::read(path)?;
        Self::from_key_values(&kv)
    }

    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        let path = kv.path().to_path_buf();
        if kv.is_empty() {
            return Err(CliError::Validation(format!(
                "{}: manifest is empty",
                path.display()
            )));
        }
        let kind: SweepKind =
            kv.required_text("sweep_kind")?
                .parse()
                .map_err(|e: spiralres_core::Error| {
                    CliError::Validation(format!("{}: {e}", path.display()))
                })?;
        let device = kv.text("device").unwrap_or_default();
        let resonator = kv.text("resonator").unwrap_or_default();
        let attenuation_db = kv.number("attenuation_db")?;
        let fixed_t = kv.number("temperature_k")?;
        let fixed_p = kv.number("drive_power_dbm")?;
        let fixed_b = kv.quantity("field", &FIELD_UNITS)?;

        let mut indices: Vec<usize> = kv
            .keys()
            .filter_map(|k| k.strip_prefix("point."))
            .filter_map(|rest| rest.split_once('.'))
            .map(|(i, _)| {
                i.parse::<usize>().map_err(|_| {
                    CliError::Validation(format!("{}: bad point index `{i}`", path.display()))
                })
            })
            .collect::<Result<_>>()?;
        indices.sort_unstable();
        indices.dedup();
        if indices.is_empty() {
            return Err(CliError::Validation(format!(
                "{}: manifest lists no points",
                path.display()
            )));
        }
        let base = path.parent().unwrap_or(Path::new("."));
        let mut points = Vec::with_capacity(indices.len());
        for i in indices {
            let key = |name: &str| format!("point.{i}.{name}");
            let file = base.join(kv.required_text(&key("file"))?);
            if !file.is_file() {
                return Err(CliError::Validation(format!(
                    "{}: point {i} references missing file {}",
                    path.display(),
                    file.display()
                )));
            }
            let temperature = kv
                .number(&key("temperature_k"))?
                .or(fixed_t)
                .ok_or_else(|| {
                    CliError::Validation(format!(
                        "{}: point {i} has no temperature_k",
                        path.display()
                    ))
                })?;
            let drive_power_dbm = kv.number(&key("drive_power_dbm"))?.or(fixed_p);
            let field = kv
                .quantity(&key("field"), &FIELD_UNITS)?
                .or(fixed_b)
                .unwrap_or(0.0);
            if drive_power_dbm.is_some() && attenuation_db.is_none() {
                return Err(CliError::Validation(format!(
                    "{}: drive powers need `attenuation_db`",
                    path.display()
                )));
            }
            points.push(PointSpec {
                index: i,
                file,
                temperature,
                drive_power_dbm,
                field,
            });
        }
        let material = material_guess(kv)?;
        let tls = tls_guess(kv)?;
        kv.finish()?;
        Ok(Self {
            path,
            device,
            resonator,
            kind,
            attenuation_db,
            points,
            material,
            tls,
        })
    }
}
