//! Forward spiral design equations and inverse geometry reconstruction.
//!
//! The geometric inductance follows the current-sheet approximation for a
//! square spiral,
//!
//! ```text
//! L_g = μ0 n² d_av / 2 · ( ln(2.5/ρ) + 0.2 ρ² )
//! ```
//!
//! and the fundamental self-resonance of a planar spiral is
//!
//! ```text
//! f_g = ξ · c0/√ε_eff · 2p / (π (d_in + 2np)²),   ξ = 0.81
//! ```
//!
//! Kinetic inductance lowers the loaded frequency to `f_g·√(L_g/(L_g+L_k))`.

use serde::Serialize;
use std::f64::consts::PI;

use crate::constants::{C0, MU0};
use crate::error::{Error, Result};
use crate::types::{MaterialModel, SpiralGeometry};

/// Shape constant for planar spirals. Not fittable.
pub const SHAPE_CONSTANT: f64 = 0.81;

/// Current-sheet inductance from turn count, average diameter and fill ratio.
pub fn current_sheet_inductance(turns: f64, average_diameter: f64, fill_ratio: f64) -> Result<f64> {
    if !(fill_ratio > 0.0 && fill_ratio < 1.0) {
        return Err(Error::InvalidGeometry(format!("fill ratio {fill_ratio} outside (0,1)")));
    }
    if !(turns > 0.0 && average_diameter > 0.0) {
        return Err(Error::InvalidGeometry("turns and average diameter must be > 0".into()));
    }
    let shape = (2.5 / fill_ratio).ln() + 0.2 * fill_ratio * fill_ratio;
    Ok(0.5 * MU0 * turns * turns * average_diameter * shape)
}

/// Geometric inductance of a validated spiral, H.
pub fn geometric_inductance(g: &SpiralGeometry) -> Result<f64> {
    current_sheet_inductance(g.turns() as f64, g.average_diameter(), g.fill_ratio())
}

fn frequency_for(pitch: f64, outer_diameter: f64, eps_eff: f64) -> f64 {
    SHAPE_CONSTANT * C0 / eps_eff.sqrt() * 2.0 * pitch / (PI * outer_diameter * outer_diameter)
}

/// Outer diameter that places the fundamental exactly at `fg`.
fn outer_diameter_for(pitch: f64, fg: f64, eps_eff: f64) -> f64 {
    (SHAPE_CONSTANT * C0 / eps_eff.sqrt() * 2.0 * pitch / (PI * fg)).sqrt()
}

/// Fundamental (geometric) resonance frequency, Hz.
pub fn fundamental_frequency(g: &SpiralGeometry, m: &MaterialModel) -> Result<f64> {
    if !(m.eps_eff > 1.0) {
        return Err(Error::InvalidParameter(format!("eps_eff must be > 1, got {}", m.eps_eff)));
    }
    Ok(frequency_for(g.pitch(), g.outer_diameter(), m.eps_eff))
}

/// `Z_c = 2π f_g L_g`, Ω.
pub fn characteristic_impedance(lg: f64, fg: f64) -> f64 {
    2.0 * PI * fg * lg
}

/// Loaded resonance including kinetic inductance.
pub fn predict_loaded_frequency(fg: f64, lg: f64, lk: f64) -> Result<f64> {
    check_inductances(lg, lk)?;
    Ok(fg * (lg / (lk + lg)).sqrt())
}

/// Inverse of [`predict_loaded_frequency`]: the geometric frequency implied
/// by a measured resonance.
pub fn geometric_frequency_from_loaded(f0: f64, lg: f64, lk: f64) -> Result<f64> {
    check_inductances(lg, lk)?;
    Ok(f0 / (lg / (lk + lg)).sqrt())
}

/// Same inverse expressed through the kinetic fraction, `f0/√(1-α)`.
pub fn geometric_frequency_from_alpha(f0: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(f0 / (1.0 - alpha).sqrt())
}

fn check_inductances(lg: f64, lk: f64) -> Result<()> {
    if !(lg > 0.0) || !(lk >= 0.0) {
        return Err(Error::InvalidParameter(format!("need Lg > 0 and Lk >= 0, got {lg}, {lk}")));
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::InvalidParameter(format!("alpha must be in [0,1), got {alpha}")));
    }
    Ok(())
}

/// `L_k = L_g·α/(1-α)`.
pub fn kinetic_from_alpha(alpha: f64, lg: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(lg * alpha / (1.0 - alpha))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DesignResult {
    pub lg_h: f64,
    pub fg_hz: f64,
    pub zc_ohm: f64,
    pub f0_predicted_hz: f64,
    pub lk_h: f64,
}

/// Full forward design for a geometry and material (kinetic fraction taken
/// from `m.alpha`).
pub fn design(g: &SpiralGeometry, m: &MaterialModel) -> Result<DesignResult> {
    let lg = geometric_inductance(g)?;
    let fg = fundamental_frequency(g, m)?;
    let lk = kinetic_from_alpha(m.alpha, lg)?;
    Ok(DesignResult {
        lg_h: lg,
        fg_hz: fg,
        zc_ohm: characteristic_impedance(lg, fg),
        f0_predicted_hz: predict_loaded_frequency(fg, lg, lk)?,
        lk_h: lk,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometrySolution {
    pub geometry: SpiralGeometry,
    pub achieved_fg: f64,
    /// `(achieved - target) / target`.
    pub relative_miss: f64,
}

const MAX_TURNS: u32 = 1_000_000;
const MAX_MISS: f64 = 0.2;

fn check_target(target_fg: f64) -> Result<()> {
    if !(target_fg > 0.1e9 && target_fg < 50e9) {
        return Err(Error::InvalidParameter(format!(
            "target frequency {target_fg} Hz outside (0.1, 50) GHz"
        )));
    }
    Ok(())
}

/// Integer turn count whose fundamental lies closest to `target_fg` for a
/// fixed pitch, wire width and inner diameter.
pub fn solve_geometry(
    target_fg: f64,
    pitch: f64,
    wire_width: f64,
    inner_diameter: f64,
    m: &MaterialModel,
) -> Result<GeometrySolution> {
    check_target(target_fg)?;
    // validates pitch / width / d_in up front
    SpiralGeometry::new(pitch, wire_width, 1, inner_diameter)?;

    // f_g is strictly decreasing in n, so the best integer brackets the
    // continuous solution.
    let d_out = outer_diameter_for(pitch, target_fg, m.eps_eff);
    let n_cont = (d_out - inner_diameter) / (2.0 * pitch);
    let lo = n_cont.floor().clamp(1.0, MAX_TURNS as f64) as u32;
    let hi = (lo + 1).min(MAX_TURNS);

    let mut best: Option<GeometrySolution> = None;
    for n in [lo, hi] {
        let g = SpiralGeometry::new(pitch, wire_width, n, inner_diameter)?;
        let fg = fundamental_frequency(&g, m)?;
        let miss = (fg - target_fg) / target_fg;
        if best.map_or(true, |b| miss.abs() < b.relative_miss.abs()) {
            best = Some(GeometrySolution {
                geometry: g,
                achieved_fg: fg,
                relative_miss: miss,
            });
        }
    }
    let best = best.expect("at least one candidate");
    if best.relative_miss.abs() > MAX_MISS {
        return Err(Error::NoGeometrySolution {
            target_hz: target_fg,
            best_hz: best.achieved_fg,
        });
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reconstruction {
    pub geometry: SpiralGeometry,
    pub lg: f64,
    pub fg: f64,
}

/// Joint reconstruction of `(n, d_in)` from a target frequency and target
/// geometric inductance. For each integer `n` the inner diameter is chosen so
/// the fundamental hits `target_fg` exactly; the `n` whose inductance lies
/// closest to `target_lg` wins.
pub fn reconstruct_geometry(
    target_fg: f64,
    target_lg: f64,
    pitch: f64,
    wire_width: f64,
    m: &MaterialModel,
) -> Result<Reconstruction> {
    check_target(target_fg)?;
    if !(target_lg > 0.0) {
        return Err(Error::InvalidParameter("target inductance must be > 0".into()));
    }
    let d_out = outer_diameter_for(pitch, target_fg, m.eps_eff);
    let mut best: Option<Reconstruction> = None;
    for n in 1..MAX_TURNS {
        let d_in = d_out - 2.0 * n as f64 * pitch;
        if d_in <= 0.0 {
            break;
        }
        let g = SpiralGeometry::new(pitch, wire_width, n, d_in)?;
        let lg = geometric_inductance(&g)?;
        let cand = Reconstruction {
            geometry: g,
            lg,
            fg: fundamental_frequency(&g, m)?,
        };
        if best.map_or(true, |b| (lg - target_lg).abs() < (b.lg - target_lg).abs()) {
            best = Some(cand);
        }
    }
    best.ok_or(Error::NoGeometrySolution {
        target_hz: target_fg,
        best_hz: f64::NAN,
    })
}
