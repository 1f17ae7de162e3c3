//! Sweep-level analyses: one fitted resonance per condition in, physics
//! parameters out.

mod combined;
mod field;
mod power;
mod temperature;

pub use combined::{fit_combined, CombinedFit, COMBINED_FREQUENCY_PARAMETERS, COMBINED_QUALITY_PARAMETERS};
pub use field::{
    detect_esr, fit_field_quadratic, fit_zeeman, zeeman_field, EsrFeature, FieldAnalysis, Onset, ESR_DEPTH,
    ESR_WINDOW, ONSET_FACTOR,
};
pub use power::{fit_power_sweep_tls, PowerFit, POWER_PARAMETERS};
pub use temperature::{fit_temperature_sweep_qp, QpSweepFit, QP_FREQUENCY_PARAMETERS, QP_QUALITY_PARAMETERS};

use serde::Serialize;

use crate::constants::HBAR;
use crate::error::{Error, Result};
use crate::resfit::S11Fit;
use crate::types::FitResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepKind {
    Temperature,
    Power,
    Field,
}

impl SweepKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepKind::Temperature => "temperature",
            SweepKind::Power => "power",
            SweepKind::Field => "field",
        }
    }
}

impl std::str::FromStr for SweepKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "temperature" => Ok(SweepKind::Temperature),
            "power" => Ok(SweepKind::Power),
            "field" => Ok(SweepKind::Field),
            other => Err(Error::InvalidSweep(format!("unknown sweep kind '{other}'"))),
        }
    }
}

/// One fitted resonance together with the conditions it was measured at.
/// `kind` names the condition that varies across the sweep; the others are
/// fixed co-conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRecord {
    pub kind: SweepKind,
    /// Fridge temperature, K.
    pub temperature: f64,
    /// On-chip drive power, dBm.
    pub drive_power_dbm: Option<f64>,
    pub photon_number: Option<f64>,
    /// In-plane field, T.
    pub field: f64,
    pub f0: f64,
    pub q_int: f64,
    /// One-sigma uncertainties; zero when unknown.
    pub f0_sigma: f64,
    pub q_int_sigma: f64,
}

impl SweepRecord {
    /// Value of the varying condition (K, dBm or T).
    pub fn condition(&self) -> f64 {
        match self.kind {
            SweepKind::Temperature => self.temperature,
            SweepKind::Power => self.drive_power_dbm.or(self.photon_number).unwrap_or(f64::NAN),
            SweepKind::Field => self.field,
        }
    }
}

/// Checks that all records share one kind and sorts them by condition.
pub fn sorted_sweep(records: &[SweepRecord], kind: SweepKind) -> Result<Vec<SweepRecord>> {
    if let Some(r) = records.iter().find(|r| r.kind != kind) {
        return Err(Error::InvalidSweep(format!(
            "expected a {} sweep, found a {} record",
            kind.as_str(),
            r.kind.as_str()
        )));
    }
    for r in records {
        if !(r.f0 > 0.0 && r.q_int > 0.0 && r.f0.is_finite() && r.q_int.is_finite()) {
            return Err(Error::InvalidSweep("f0 and Q_int must be finite and > 0".into()));
        }
    }
    let mut out = records.to_vec();
    let key = |r: &SweepRecord| match kind {
        SweepKind::Power => r.photon_number.unwrap_or(f64::NAN),
        _ => r.condition(),
    };
    out.sort_by(|a, b| key(a).total_cmp(&key(b)));
    Ok(out)
}

/// Power at the device in watts from a source level and attenuation chain.
pub fn on_chip_power_w(power_dbm: f64, attenuation_db: f64) -> f64 {
    1e-3 * 10f64.powf((power_dbm - attenuation_db) / 10.0)
}

/// Average intracavity photon number
/// `⟨n⟩ = 2·P_in·Q_l² / (|Q_e|·ħ·ω0²)` in reflection geometry.
pub fn photon_number_from(p_in_w: f64, f0: f64, q_loaded: f64, q_ext: f64) -> f64 {
    let w0 = 2.0 * std::f64::consts::PI * f0;
    2.0 * p_in_w * q_loaded * q_loaded / (q_ext * HBAR * w0 * w0)
}

/// Inverse of [`photon_number_from`], returning the on-chip power in W.
pub fn power_for_photons(n: f64, f0: f64, q_loaded: f64, q_ext: f64) -> f64 {
    let w0 = 2.0 * std::f64::consts::PI * f0;
    n * q_ext * HBAR * w0 * w0 / (2.0 * q_loaded * q_loaded)
}

/// Photon number for a converged reflection fit.
pub fn photon_number(power_dbm: f64, attenuation_db: f64, fit: &S11Fit) -> Result<f64> {
    if !fit.fit.converged {
        return Err(Error::InvalidParameter("photon number needs a converged fit".into()));
    }
    let m = &fit.model;
    Ok(photon_number_from(
        on_chip_power_w(power_dbm, attenuation_db),
        m.f0,
        m.q_loaded(),
        m.q_ext,
    ))
}

/// True when every record carries a usable uncertainty, in which case fits
/// report covariances on the absolute scale of those uncertainties.
pub(crate) fn known_sigmas(sigmas: &[f64]) -> bool {
    sigmas.iter().all(|s| s.is_finite() && *s > 0.0)
}

/// Per-point residual scales. Missing uncertainties fall back to a uniform
/// relative scale so the fit stays well posed.
pub(crate) fn scales(values: &[f64], sigmas: &[f64], fallback_rel: f64) -> Vec<f64> {
    if known_sigmas(sigmas) {
        return sigmas.to_vec();
    }
    let mut v: Vec<f64> = values.iter().map(|x| x.abs()).collect();
    v.sort_by(f64::total_cmp);
    let typical = v[v.len() / 2];
    vec![fallback_rel * typical; values.len()]
}

/// Maps a fit done in internal coordinates to physical values, with `jac`
/// the diagonal derivative of physical with respect to internal.
pub(crate) fn to_physical(internal: FitResult, values: Vec<f64>, jac: &[f64]) -> FitResult {
    let covariance = internal
        .covariance
        .map_with_location(|i, j, c| if c == 0.0 { 0.0 } else { jac[i] * jac[j] * c });
    FitResult {
        values,
        covariance,
        ..internal
    }
}

pub(crate) fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
