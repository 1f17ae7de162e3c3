//! Domain types shared by every analysis stage. All quantities are SI.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::constants::{EPS_SILICON, KB};
use crate::error::{Error, Result};

/// Square planar spiral described by its declared dimensions. The outer
/// diameter, fill ratio and average diameter are derived on every access.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpiralGeometry {
    pitch: f64,
    wire_width: f64,
    turns: u32,
    inner_diameter: f64,
}

impl SpiralGeometry {
    /// Validates and builds a geometry. Lengths in metres.
    pub fn new(pitch: f64, wire_width: f64, turns: u32, inner_diameter: f64) -> Result<Self> {
        let g = Self {
            pitch,
            wire_width,
            turns,
            inner_diameter,
        };
        g.check()?;
        Ok(g)
    }

    fn check(&self) -> Result<()> {
        for (name, v) in [
            ("pitch", self.pitch),
            ("wire width", self.wire_width),
            ("inner diameter", self.inner_diameter),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidGeometry(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        if self.turns < 1 {
            return Err(Error::InvalidGeometry("turns must be >= 1".into()));
        }
        if self.wire_width >= self.pitch {
            return Err(Error::InvalidGeometry(format!(
                "wire width {} must be smaller than pitch {}",
                self.wire_width, self.pitch
            )));
        }
        Ok(())
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn wire_width(&self) -> f64 {
        self.wire_width
    }

    pub fn turns(&self) -> u32 {
        self.turns
    }

    pub fn inner_diameter(&self) -> f64 {
        self.inner_diameter
    }

    /// Gap between adjacent turns, `p - w`.
    pub fn gap(&self) -> f64 {
        self.pitch - self.wire_width
    }

    pub fn outer_diameter(&self) -> f64 {
        self.inner_diameter + 2.0 * self.turns as f64 * self.pitch
    }

    pub fn fill_ratio(&self) -> f64 {
        let (d_in, d_out) = (self.inner_diameter, self.outer_diameter());
        (d_out - d_in) / (d_out + d_in)
    }

    pub fn average_diameter(&self) -> f64 {
        0.5 * (self.inner_diameter + self.outer_diameter())
    }

    /// True when the gap exceeds three wire widths, where the current-sheet
    /// inductance estimate is no longer bounded to ~8% error.
    pub fn accuracy_warning(&self) -> bool {
        self.gap() > 3.0 * self.wire_width
    }

    pub fn summary(&self) -> GeometrySummary {
        GeometrySummary {
            pitch_m: self.pitch,
            wire_width_m: self.wire_width,
            gap_m: self.gap(),
            turns_dimensionless: self.turns,
            inner_diameter_m: self.inner_diameter,
            outer_diameter_m: self.outer_diameter(),
            fill_ratio_dimensionless: self.fill_ratio(),
            average_diameter_m: self.average_diameter(),
            accuracy_warning: self.accuracy_warning(),
        }
    }
}

/// Flattened geometry with every derived field, for reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeometrySummary {
    pub pitch_m: f64,
    pub wire_width_m: f64,
    pub gap_m: f64,
    pub turns_dimensionless: u32,
    pub inner_diameter_m: f64,
    pub outer_diameter_m: f64,
    pub fill_ratio_dimensionless: f64,
    pub average_diameter_m: f64,
    pub accuracy_warning: bool,
}

/// Checks a geometry and returns it together with its derived fields.
pub fn validate_geometry(g: &SpiralGeometry) -> Result<GeometrySummary> {
    g.check()?;
    Ok(g.summary())
}

/// Superconducting film and substrate parameters.
///
/// The zero-temperature gap is stored as the ratio `Δ0 / (kB·Tc)` so that it
/// tracks `Tc` while `Tc` is being fitted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MaterialModel {
    pub tc: f64,
    pub gap_ratio: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub eps_eff: f64,
    /// Normal-state conductivity, S/m. Conductivities are handled as ratios
    /// to this value, so it never enters a computation.
    pub sigma_n: Option<f64>,
}

pub const DEFAULT_GAP_RATIO: f64 = 1.76;

impl MaterialModel {
    /// Thin-film niobium defaults: `Δ0 = 1.76 kB Tc`, `γ = -1`,
    /// `ε_eff = (ε_Si + 1)/2`, no kinetic inductance.
    pub fn niobium(tc: f64) -> Self {
        Self {
            tc,
            gap_ratio: DEFAULT_GAP_RATIO,
            alpha: 0.0,
            gamma: -1.0,
            eps_eff: default_eps_eff(),
            sigma_n: None,
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_tc(mut self, tc: f64) -> Self {
        self.tc = tc;
        self
    }

    pub fn with_eps_eff(mut self, eps_eff: f64) -> Self {
        self.eps_eff = eps_eff;
        self
    }

    /// Zero-temperature gap energy, J.
    pub fn gap0(&self) -> f64 {
        self.gap_ratio * KB * self.tc
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tc.is_finite() && self.tc > 0.0) {
            return Err(Error::InvalidParameter(format!("Tc must be > 0, got {}", self.tc)));
        }
        if !(self.gap_ratio.is_finite() && self.gap_ratio > 0.0) {
            return Err(Error::InvalidParameter("gap ratio must be > 0".into()));
        }
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(Error::InvalidParameter(format!("alpha must be in [0,1), got {}", self.alpha)));
        }
        if !self.gamma.is_finite() {
            return Err(Error::InvalidParameter("gamma must be finite".into()));
        }
        if !(self.eps_eff.is_finite() && self.eps_eff > 1.0) {
            return Err(Error::InvalidParameter(format!("eps_eff must be > 1, got {}", self.eps_eff)));
        }
        Ok(())
    }
}

/// Half-space average of silicon and vacuum.
pub fn default_eps_eff() -> f64 {
    0.5 * (EPS_SILICON + 1.0)
}

/// Frequency-indexed complex reflection samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrum {
    frequencies: Vec<f64>,
    values: Vec<Complex64>,
    pub drive_power_dbm: Option<f64>,
    pub attenuation_db: Option<f64>,
}

/// Minimum number of samples accepted by any fit.
pub const MIN_FIT_SAMPLES: usize = 16;

impl ComplexSpectrum {
    pub fn new(frequencies: Vec<f64>, values: Vec<Complex64>) -> Result<Self> {
        if frequencies.len() != values.len() {
            return Err(Error::InvalidSpectrum(format!(
                "{} frequencies but {} values",
                frequencies.len(),
                values.len()
            )));
        }
        if let Some(i) = frequencies.iter().position(|f| !f.is_finite()) {
            return Err(Error::InvalidSpectrum(format!("non-finite frequency at index {i}")));
        }
        if let Some(i) = values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::InvalidSpectrum(format!("non-finite sample at index {i}")));
        }
        if let Some(i) = frequencies.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidSpectrum(format!(
                "frequencies not strictly increasing at index {}",
                i + 1
            )));
        }
        Ok(Self {
            frequencies,
            values,
            drive_power_dbm: None,
            attenuation_db: None,
        })
    }

    pub fn with_drive(mut self, power_dbm: Option<f64>, attenuation_db: Option<f64>) -> Self {
        self.drive_power_dbm = power_dbm;
        self.attenuation_db = attenuation_db;
        self
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn check_fittable(&self) -> Result<()> {
        if self.len() < MIN_FIT_SAMPLES {
            return Err(Error::InvalidSpectrum(format!(
                "need at least {MIN_FIT_SAMPLES} samples, got {}",
                self.len()
            )));
        }
        Ok(())
    }
}

/// Outcome of any least-squares fit.
///
/// Parameter names carry their unit as a suffix (`_hz`, `_k`,
/// `_dimensionless`, ...) so reports can use them verbatim as keys.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub names: Vec<String>,
    pub values: Vec<f64>,
    /// Parameter covariance. Unidentifiable directions have `+inf` on the
    /// diagonal.
    pub covariance: DMatrix<f64>,
    /// Final weighted sum of squared residuals.
    pub residual_norm: f64,
    pub dof: usize,
    pub converged: bool,
    pub iterations: usize,
    pub ill_conditioned: bool,
    /// Condition number of the column-scaled normal matrix.
    pub condition: f64,
}

impl FitResult {
    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Value of the named parameter. Panics on unknown names, which are
    /// programming errors.
    pub fn value(&self, name: &str) -> f64 {
        let i = self.index(name).unwrap_or_else(|| panic!("unknown parameter {name}"));
        self.values[i]
    }

    /// One-sigma uncertainty of the named parameter.
    pub fn sigma(&self, name: &str) -> f64 {
        let i = self.index(name).unwrap_or_else(|| panic!("unknown parameter {name}"));
        self.covariance[(i, i)].sqrt()
    }

    pub fn correlation(&self, a: &str, b: &str) -> f64 {
        let (i, j) = (self.index(a).unwrap(), self.index(b).unwrap());
        let c = self.covariance[(i, j)];
        let d = (self.covariance[(i, i)] * self.covariance[(j, j)]).sqrt();
        if d > 0.0 && d.is_finite() {
            c / d
        } else {
            0.0
        }
    }

    /// Reduced chi-square, `residual_norm / dof`.
    pub fn reduced_chi2(&self) -> f64 {
        if self.dof == 0 {
            f64::NAN
        } else {
            self.residual_norm / self.dof as f64
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const UM: f64 = 1e-6;

    #[test]
    fn derived_fields_for_one_micron_pitch() {
        let g = SpiralGeometry::new(1.0 * UM, 0.5 * UM, 43, 10.0 * UM).unwrap();
        assert!((g.outer_diameter() - 96.0 * UM).abs() < 1e-15);
        assert!((g.fill_ratio() - 86.0 / 106.0).abs() < 1e-12);
        assert!((g.fill_ratio() - 0.811).abs() < 1e-3);
        assert!((g.average_diameter() - 53.0 * UM).abs() < 1e-15);
        assert!(!g.accuracy_warning());
    }

    #[test]
    fn wide_gap_sets_accuracy_warning() {
        let g = SpiralGeometry::new(1.0 * UM, 0.2 * UM, 10, 10.0 * UM).unwrap();
        assert!((g.gap() - 0.8 * UM).abs() < 1e-15);
        assert!(g.accuracy_warning());
    }

    #[test]
    fn equal_gap_and_wire_no_warning() {
        let g = SpiralGeometry::new(0.3 * UM, 0.15 * UM, 100, 10.0 * UM).unwrap();
        assert!(!g.accuracy_warning());
        let s = validate_geometry(&g).unwrap();
        assert!(!s.accuracy_warning);
        assert!((s.gap_m - s.wire_width_m).abs() < 1e-18);
    }

    #[test]
    fn rejects_bad_geometry() {
        assert!(SpiralGeometry::new(1.0 * UM, 0.5 * UM, 10, 0.0).is_err());
        assert!(SpiralGeometry::new(1.0 * UM, 0.5 * UM, 10, -1.0).is_err());
        assert!(SpiralGeometry::new(1.0 * UM, 0.5 * UM, 0, 10.0 * UM).is_err());
        assert!(SpiralGeometry::new(0.0, 0.5 * UM, 10, 10.0 * UM).is_err());
        assert!(SpiralGeometry::new(1.0 * UM, 1.0 * UM, 10, 10.0 * UM).is_err());
        assert!(SpiralGeometry::new(f64::NAN, 0.5 * UM, 10, 10.0 * UM).is_err());
    }

    #[test]
    fn derived_fields_idempotent() {
        let g = SpiralGeometry::new(0.5 * UM, 0.25 * UM, 57, 12.0 * UM).unwrap();
        assert_eq!(validate_geometry(&g).unwrap(), validate_geometry(&g).unwrap());
    }

    #[test]
    fn niobium_defaults() {
        let m = MaterialModel::niobium(8.0);
        assert!((m.gap0() / (KB * 8.0) - 1.76).abs() < 1e-15);
        assert_eq!(m.gamma, -1.0);
        assert!((m.eps_eff - 6.35).abs() < 1e-12);
        m.validate().unwrap();
        assert!(m.with_alpha(1.0).validate().is_err());
    }

    #[test]
    fn spectrum_validation() {
        let c = Complex64::new(1.0, 0.0);
        assert!(ComplexSpectrum::new(vec![1.0, 2.0], vec![c]).is_err());
        assert!(ComplexSpectrum::new(vec![2.0, 1.0], vec![c, c]).is_err());
        assert!(ComplexSpectrum::new(vec![1.0, 2.0], vec![c, Complex64::new(f64::NAN, 0.0)]).is_err());
        let s = ComplexSpectrum::new(vec![1.0, 2.0], vec![c, c]).unwrap();
        assert!(s.check_fittable().is_err());
    }
}
