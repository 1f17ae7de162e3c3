//! Thermal Mattis–Bardeen conductivity and the quasiparticle frequency and
//! loss shifts that follow from it.
//!
//! Energies are handled internally in kelvin (`E/kB`), which keeps the
//! integrands O(1) for niobium-scale gaps.

use serde::Serialize;
use std::sync::Once;

use crate::constants::{H, KB};
use crate::error::{Error, Result};
use crate::quad;
use crate::types::MaterialModel;

/// Temperature standing in for T = 0 in shift definitions, K.
pub const REFERENCE_TEMPERATURE: f64 = 0.010;

/// Default relative tolerance of the conductivity integrals.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConductivityPoint {
    /// σ1/σn
    pub sigma1: f64,
    /// σ2/σn
    pub sigma2: f64,
    pub temperature: f64,
    pub frequency: f64,
    /// Δ(T), J
    pub gap: f64,
}

/// Superconducting gap via the interpolation
/// `Δ(T) = Δ0·tanh(1.74·√(Tc/T − 1))`.
pub fn gap_at_temperature(m: &MaterialModel, t: f64) -> f64 {
    let gap0 = m.gap0();
    if t <= 0.0 {
        gap0
    } else if t >= m.tc {
        0.0
    } else {
        gap0 * (1.74 * (m.tc / t - 1.0).sqrt()).tanh()
    }
}

fn ln_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

fn ln_sinh(x: f64) -> f64 {
    if x < 20.0 {
        x.sinh().ln()
    } else {
        x - std::f64::consts::LN_2 + (-(-2.0 * x).exp()).ln_1p()
    }
}

/// `f(E) − f(E+w)` for the Fermi function at temperature `t`, evaluated
/// without cancellation or overflow. All arguments in kelvin.
fn fermi_difference(e: f64, w: f64, t: f64) -> f64 {
    (ln_sinh(0.5 * w / t) - std::f64::consts::LN_2 - ln_cosh(0.5 * e / t) - ln_cosh(0.5 * (e + w) / t)).exp()
}

/// σ1/σn from the thermal quasiparticle integral. Arguments in kelvin:
/// gap `d`, photon energy `w`, temperature `t`.
fn sigma1_ratio(d: f64, w: f64, t: f64, rel_tol: f64) -> f64 {
    // E = d + x² removes the square-root singularity at the gap edge;
    // the Fermi factor has decayed by e^-60 at x² = 60 t.
    let x_max = (60.0 * t).sqrt();
    let integrand = |x: f64| {
        let e = d + x * x;
        let ew = e + w;
        let num = e * e + d * d + w * e;
        let den = (2.0 * d + x * x).sqrt() * ((ew - d) * (ew + d)).sqrt();
        fermi_difference(e, w, t) * num * 2.0 / den
    };
    let r = quad::integrate(integrand, 0.0, x_max, rel_tol, 1e-300);
    2.0 / w * r.value
}

/// σ2/σn over the window `[d − w, d]`. The substitution
/// `E = d − (w/2)(1 + cos θ)` cancels both endpoint square roots.
fn sigma2_ratio(d: f64, w: f64, t: f64, rel_tol: f64) -> f64 {
    let integrand = |theta: f64| {
        let e = d - 0.5 * w * (1.0 + theta.cos());
        let num = e * e + d * d + w * e;
        (0.5 * (e + w) / t).tanh() * num / ((d + e) * (e + w + d)).sqrt()
    };
    let r = quad::integrate(integrand, 0.0, std::f64::consts::PI, rel_tol, 1e-300);
    r.value / w
}

/// Complex conductivity ratios at `(T, f)` with the default tolerance.
pub fn mattis_bardeen(m: &MaterialModel, t: f64, f: f64) -> Result<ConductivityPoint> {
    mattis_bardeen_with_tolerance(m, t, f, DEFAULT_TOLERANCE)
}

pub fn mattis_bardeen_with_tolerance(m: &MaterialModel, t: f64, f: f64, rel_tol: f64) -> Result<ConductivityPoint> {
    if !(t > 0.0) {
        return Err(Error::OutOfModel(format!("temperature must be > 0, got {t}")));
    }
    if t >= m.tc {
        return Err(Error::OutOfModel(format!("T = {t} K is not below Tc = {} K", m.tc)));
    }
    if !(f > 0.0) {
        return Err(Error::OutOfModel(format!("frequency must be > 0, got {f}")));
    }
    let gap = gap_at_temperature(m, t);
    let d = gap / KB;
    let w = H * f / KB;
    if w >= 2.0 * d {
        return Err(Error::OutOfModel(format!(
            "photon energy hf = {:.3e} J exceeds 2Δ(T) = {:.3e} J",
            H * f,
            2.0 * gap
        )));
    }
    Ok(ConductivityPoint {
        sigma1: sigma1_ratio(d, w, t, rel_tol),
        sigma2: sigma2_ratio(d, w, t, rel_tol),
        temperature: t,
        frequency: f,
        gap,
    })
}

/// Frequency and inverse-Q shifts relative to the reference temperature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QpShift {
    /// δf(T)/f0(0)
    pub df_over_f: f64,
    /// δQ⁻¹(T)
    pub dq_inv: f64,
}

static SIGN_NOTICE: Once = Once::new();

fn shift_from(m: &MaterialModel, reference: &ConductivityPoint, at: &ConductivityPoint) -> QpShift {
    let ag = m.alpha * m.gamma;
    let d_sigma1 = at.sigma1 - reference.sigma1;
    let d_sigma2 = at.sigma2 - reference.sigma2;
    // Physical orientation: frequency softens and loss grows as σ2 falls and
    // σ1 rises. The magnitude comes from αγ, the sign from the conductivity.
    let df_over_f = 0.5 * ag.abs() * d_sigma2 / at.sigma2;
    let dq_inv = ag.abs() * d_sigma1 / at.sigma2;
    let literal_dq = ag * d_sigma1 / at.sigma2;
    if literal_dq != 0.0 && literal_dq.signum() != dq_inv.signum() {
        SIGN_NOTICE.call_once(|| {
            log::info!(
                "alpha*gamma*dsigma1/sigma2 evaluates with negative sign for gamma = {}; using its magnitude as a loss",
                m.gamma
            )
        });
    }
    QpShift { df_over_f, dq_inv }
}

/// Quasiparticle shifts at one temperature.
pub fn qp_shift(m: &MaterialModel, f0: f64, t: f64) -> Result<QpShift> {
    let reference = mattis_bardeen(m, REFERENCE_TEMPERATURE, f0)?;
    let at = mattis_bardeen(m, t, f0)?;
    Ok(shift_from(m, &reference, &at))
}

/// Quasiparticle shifts over many temperatures sharing one reference
/// evaluation.
pub fn qp_shifts(m: &MaterialModel, f0: f64, temperatures: &[f64]) -> Result<Vec<QpShift>> {
    let reference = mattis_bardeen(m, REFERENCE_TEMPERATURE, f0)?;
    temperatures
        .iter()
        .map(|&t| Ok(shift_from(m, &reference, &mattis_bardeen(m, t, f0)?)))
        .collect()
}

/// `δf(T)/f0(0) = −(αγ/2)·δσ2/σ2`.
pub fn qp_frequency_shift(m: &MaterialModel, f0: f64, t: f64) -> Result<f64> {
    Ok(qp_shift(m, f0, t)?.df_over_f)
}

/// `δQ⁻¹(T) = αγ·δσ1/σ2`, oriented so that loss grows with temperature.
pub fn qp_quality_shift(m: &MaterialModel, t: f64, f: f64) -> Result<f64> {
    Ok(qp_shift(m, f, t)?.dq_inv)
}
