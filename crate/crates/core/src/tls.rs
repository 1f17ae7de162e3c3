//! Two-level-system loss and frequency-shift models, and their combination
//! with the quasiparticle channel.

use serde::Serialize;
use std::f64::consts::PI;

use crate::bcs::{self, QpShift};
use crate::constants::{H, KB};
use crate::digamma;
use crate::error::{Error, Result};
use crate::types::MaterialModel;

/// Arguments of `tanh(hf/2kT)` above this are treated as saturated.
const TANH_CAP: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TlsParams {
    pub q_tls0: f64,
    /// Critical photon number of the power-law model.
    pub n_c: f64,
    /// Power-law saturation exponent.
    pub beta: f64,
    /// Saturation scale; `n^β2 / (D·T^β1)` is dimensionless with T in kelvin.
    pub d: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub q_other: f64,
}

impl TlsParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("Q_TLS,0", self.q_tls0),
            ("Q_other", self.q_other),
            ("n_c", self.n_c),
            ("D", self.d),
        ] {
            if !(v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")));
            }
        }
        for (name, v) in [("beta", self.beta), ("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(v > 0.0 && v <= 3.0) {
                return Err(Error::InvalidParameter(format!("{name} must be in (0, 3], got {v}")));
            }
        }
        Ok(())
    }
}

fn check_temperature(t: f64) -> Result<()> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!("temperature must be > 0, got {t}")));
    }
    Ok(())
}

/// `tanh(hf/2kT)` with the overflow guard.
pub fn thermal_factor(f0: f64, t: f64) -> f64 {
    let x = H * f0 / (2.0 * KB * t);
    if x > TANH_CAP {
        1.0
    } else {
        x.tanh()
    }
}

/// `Re Ψ(½ + i·y)` with `y = hf/(2π kB T)`.
pub fn complex_digamma_real(y: f64) -> f64 {
    digamma::re_digamma_half(y)
}

/// Resonant TLS frequency shift
/// `(1/(π Q_TLS,0))·[Re Ψ(½ + i·hf/(2πkT)) − ln(hf/(2πkT))]`.
pub fn tls_frequency_shift(q_tls0: f64, f0: f64, t: f64) -> Result<f64> {
    check_temperature(t)?;
    if !(f0 > 0.0 && q_tls0 > 0.0) {
        return Err(Error::InvalidParameter("f0 and Q_TLS,0 must be > 0".into()));
    }
    let y = H * f0 / (2.0 * PI * KB * t);
    Ok(digamma::tls_bracket(y) / (PI * q_tls0))
}

/// Temperature- and power-dependent TLS quality factor
/// `Q_TLS,0·√(1 + n^β2/(D T^β1)·tanh)/tanh`.
pub fn tls_quality(p: &TlsParams, n_phot: f64, f0: f64, t: f64) -> Result<f64> {
    check_temperature(t)?;
    if !(n_phot >= 0.0) {
        return Err(Error::InvalidParameter(format!("photon number must be >= 0, got {n_phot}")));
    }
    let th = thermal_factor(f0, t);
    let saturation = n_phot.powf(p.beta2) / (p.d * t.powf(p.beta1));
    Ok(p.q_tls0 * (1.0 + saturation * th).sqrt() / th)
}

/// Power-law TLS model
/// `Q_int⁻¹ = Q_TLS,0⁻¹·tanh/(1 + n/n_c)^β + Q_other⁻¹`.
pub fn power_law_loss(p: &TlsParams, n_phot: f64, f0: f64, t: f64) -> Result<f64> {
    check_temperature(t)?;
    if !(n_phot >= 0.0) {
        return Err(Error::InvalidParameter(format!("photon number must be >= 0, got {n_phot}")));
    }
    Ok(thermal_factor(f0, t) / (p.q_tls0 * (1.0 + n_phot / p.n_c).powf(p.beta)) + 1.0 / p.q_other)
}

/// Channel-resolved output of [`combined_loss_model`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CombinedLoss {
    pub q_int_inv: f64,
    pub q_tls_inv: f64,
    pub q_qp_inv: f64,
    pub q_other_inv: f64,
    pub df_over_f: f64,
    pub df_tls: f64,
    pub df_qp: f64,
}

fn combine(p: &TlsParams, n_phot: f64, f0: f64, t: f64, qp: QpShift) -> Result<CombinedLoss> {
    let q_tls_inv = if p.q_tls0.is_infinite() {
        0.0
    } else {
        1.0 / tls_quality(p, n_phot, f0, t)?
    };
    let df_tls = if p.q_tls0.is_infinite() {
        0.0
    } else {
        tls_frequency_shift(p.q_tls0, f0, t)?
    };
    let q_other_inv = 1.0 / p.q_other;
    Ok(CombinedLoss {
        q_int_inv: q_tls_inv + qp.dq_inv + q_other_inv,
        q_tls_inv,
        q_qp_inv: qp.dq_inv,
        q_other_inv,
        df_over_f: df_tls + qp.df_over_f,
        df_tls,
        df_qp: qp.df_over_f,
    })
}

/// TLS + quasiparticle + residual loss and frequency shift at one point.
/// The quasiparticle loss is referenced to the reference temperature, so any
/// zero-temperature quasiparticle loss is absorbed into `Q_other`.
pub fn combined_loss_model(m: &MaterialModel, p: &TlsParams, n_phot: f64, t: f64, f0: f64) -> Result<CombinedLoss> {
    let qp = bcs::qp_shift(m, f0, t)?;
    combine(p, n_phot, f0, t, qp)
}

/// Batched form over `(n, T)` points sharing one conductivity reference.
pub fn combined_loss_many(m: &MaterialModel, p: &TlsParams, f0: f64, points: &[(f64, f64)]) -> Result<Vec<CombinedLoss>> {
    let temps: Vec<f64> = points.iter().map(|&(_, t)| t).collect();
    let qp = bcs::qp_shifts(m, f0, &temps)?;
    points
        .iter()
        .zip(qp)
        .map(|(&(n, t), s)| combine(p, n, f0, t, s))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> TlsParams {
        TlsParams {
            q_tls0: 2e5,
            n_c: 50.0,
            beta: 0.4,
            d: 150.0,
            beta1: 1.0,
            beta2: 0.5,
            q_other: 5e5,
        }
    }

    #[test]
    fn frequency_shift_limits() {
        // T → 0 drives y → ∞ and the bracket cancels
        assert!(tls_frequency_shift(2.3e5, 5.95e9, 1e-5).unwrap().abs() < 1e-14);
        assert!(tls_frequency_shift(1e300, 5.95e9, 0.3).unwrap().abs() < 1e-299);
        let s = tls_frequency_shift(2.3e5, 5.95e9, 0.3).unwrap();
        assert!(s > 0.0);
        assert!(tls_frequency_shift(2.3e5, 5.95e9, 0.0).is_err());
    }

    #[test]
    fn quality_at_zero_photons() {
        let p = params();
        for t in [0.02, 0.06, 0.3, 1.0] {
            let q = tls_quality(&p, 0.0, 5e9, t).unwrap();
            let expected = p.q_tls0 / thermal_factor(5e9, t);
            assert_eq!(q, expected);
        }
        let cold = tls_quality(&p, 0.0, 5e9, 1e-4).unwrap();
        assert_eq!(cold, p.q_tls0);
    }

    #[test]
    fn quality_increases_with_photons() {
        let p = params();
        let mut prev = 0.0;
        for k in 0..=60 {
            let n = 10f64.powf(k as f64 * 0.1);
            let q = tls_quality(&p, n, 5e9, 0.06).unwrap();
            assert!(q > prev);
            prev = q;
        }
    }

    #[test]
    fn power_law_limits() {
        // residual TLS share at 1e6·n_c is (Q_other/Q_TLS,0)·1e6^-β
        let p = TlsParams { beta: 0.8, ..params() };
        let high = power_law_loss(&p, 1e6 * p.n_c, 5e9, 0.06).unwrap();
        assert!((high * p.q_other - 1.0).abs() < 1e-3);
        let low = power_law_loss(&p, 0.0, 5e9, 1e-4).unwrap();
        assert!((low - (1.0 / p.q_tls0 + 1.0 / p.q_other)).abs() < 1e-20);
    }

    #[test]
    fn power_law_s_curve() {
        let p = params();
        let qs: Vec<f64> = (0..=70)
            .map(|k| 1.0 / power_law_loss(&p, 10f64.powf(k as f64 * 0.1), 5e9, 0.06).unwrap())
            .collect();
        for w in qs.windows(2) {
            assert!(w[1] > w[0]);
        }
        // flat at both ends, steep in the middle
        let slope = |i: usize| (qs[i + 10] / qs[i]).ln();
        assert!(slope(0) < slope(25));
        assert!(slope(60) < slope(25));
    }

    #[test]
    fn tls_only_channel_off() {
        let m = MaterialModel::niobium(7.9);
        let mut p = params();
        p.q_tls0 = f64::INFINITY;
        for &(n, t) in &[(1.0, 0.05), (1e4, 1.0), (1e6, 3.0)] {
            let c = combined_loss_model(&m, &p, n, t, 5.95e9).unwrap();
            assert_eq!(c.q_int_inv, 1.0 / p.q_other);
            assert_eq!(c.df_over_f, 0.0);
        }
    }

    #[test]
    fn decomposition_is_exact() {
        let m = MaterialModel::niobium(7.9).with_alpha(0.055);
        let p = params();
        let pts: Vec<(f64, f64)> = vec![(1.0, 0.05), (100.0, 0.5), (1e5, 2.5), (1e6, 4.0)];
        for c in combined_loss_many(&m, &p, 5.95e9, &pts).unwrap() {
            assert_eq!(c.q_int_inv - (c.q_tls_inv + c.q_qp_inv + c.q_other_inv), 0.0);
            assert_eq!(c.df_over_f - (c.df_tls + c.df_qp), 0.0);
        }
    }
}
