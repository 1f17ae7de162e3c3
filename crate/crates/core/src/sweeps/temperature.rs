use crate::bcs;
use crate::error::{Error, Result};
use crate::lm::{lm_minimize, Bound, LmOptions};
use crate::types::{FitResult, MaterialModel};

use super::{known_sigmas, scales, sorted_sweep, SweepKind, SweepRecord};

pub const QP_FREQUENCY_PARAMETERS: [&str; 3] = ["f0_zero_hz", "alpha_dimensionless", "tc_k"];
pub const QP_QUALITY_PARAMETERS: [&str; 3] = ["q_int_zero_dimensionless", "alpha_dimensionless", "tc_k"];

const MIN_RECORDS: usize = 6;
const ALPHA_MAX: f64 = 0.5;
const TC_MAX: f64 = 30.0;

/// Both quasiparticle fits of one temperature sweep, kept side by side.
#[derive(Debug, Clone, PartialEq)]
pub struct QpSweepFit {
    pub frequency: FitResult,
    pub quality: FitResult,
}

impl QpSweepFit {
    /// Difference of the two α estimates in units of their combined
    /// one-sigma uncertainty.
    pub fn alpha_discrepancy_sigma(&self) -> f64 {
        let a = "alpha_dimensionless";
        let d = self.frequency.value(a) - self.quality.value(a);
        let s = (self.frequency.sigma(a).powi(2) + self.quality.sigma(a).powi(2)).sqrt();
        d.abs() / s
    }
}

fn check_span(records: &[SweepRecord], tc_guess: f64) -> Result<()> {
    if records.len() < MIN_RECORDS {
        return Err(Error::InsufficientSpan(format!(
            "need at least {MIN_RECORDS} temperatures, got {}",
            records.len()
        )));
    }
    let lo = records.first().unwrap().temperature;
    let hi = records.last().unwrap().temperature;
    if lo > 0.1 * tc_guess || hi < 0.35 * tc_guess {
        return Err(Error::InsufficientSpan(format!(
            "temperatures [{lo}, {hi}] K do not cover [{:.3}, {:.3}] K",
            0.1 * tc_guess,
            0.35 * tc_guess
        )));
    }
    Ok(())
}

/// Fits the frequency channel `f0(T) = f0(0)·(1 + δf/f0)` and the quality
/// channel `1/Q_int(T) = 1/Q_int(0) + δQ⁻¹` independently, each over
/// `(baseline, α, Tc)`.
pub fn fit_temperature_sweep_qp(records: &[SweepRecord], m0: &MaterialModel) -> Result<QpSweepFit> {
    m0.validate()?;
    let recs = sorted_sweep(records, SweepKind::Temperature)?;
    check_span(&recs, m0.tc)?;
    let temps: Vec<f64> = recs.iter().map(|r| r.temperature).collect();
    let f_data: Vec<f64> = recs.iter().map(|r| r.f0).collect();
    let q_data: Vec<f64> = recs.iter().map(|r| r.q_int).collect();
    let f_sig: Vec<f64> = recs.iter().map(|r| r.f0_sigma).collect();
    let q_sig: Vec<f64> = recs.iter().map(|r| r.q_int_sigma).collect();
    let f_scale = scales(&f_data, &f_sig, 1e-7);
    let q_scale = scales(&q_data, &q_sig, 1e-2);
    let t_max = *temps.last().unwrap();
    // resonance frequency at the lowest temperature stands in for f0(0)
    let f_ref = f_data[0];

    let tc_lower = t_max * 1.001;
    let tc0 = if m0.tc > tc_lower { m0.tc } else { 1.2 * t_max };
    let alpha0 = m0.alpha.clamp(0.01, ALPHA_MAX);
    let model_at = |alpha: f64, tc: f64| MaterialModel {
        alpha,
        tc,
        ..*m0
    };
    let opts_for = |sig: &[f64]| LmOptions {
        absolute_sigma: known_sigmas(sig),
        ..LmOptions::default()
    };

    let freq_res = |p: &[f64]| -> Result<Vec<f64>> {
        let shifts = bcs::qp_shifts(&model_at(p[1], p[2]), p[0], &temps)?;
        Ok(shifts
            .iter()
            .zip(&f_data)
            .zip(&f_scale)
            .map(|((s, f), sc)| (p[0] * (1.0 + s.df_over_f) - f) / sc)
            .collect())
    };
    let f00 = f_ref;
    let frequency = lm_minimize(
        freq_res,
        &[f00, alpha0, tc0],
        &[
            Bound::new(0.5 * f00, 2.0 * f00),
            Bound::new(0.0, ALPHA_MAX),
            Bound::new(tc_lower, TC_MAX),
        ],
        &QP_FREQUENCY_PARAMETERS,
        &opts_for(&f_sig),
    )?;

    let qual_res = |p: &[f64]| -> Result<Vec<f64>> {
        let shifts = bcs::qp_shifts(&model_at(p[1], p[2]), f_ref, &temps)?;
        Ok(shifts
            .iter()
            .zip(&q_data)
            .zip(&q_scale)
            .map(|((s, q), sc)| (1.0 / (1.0 / p[0] + s.dq_inv) - q) / sc)
            .collect())
    };
    let q00 = q_data[0];
    let quality = lm_minimize(
        qual_res,
        &[q00, alpha0, tc0],
        &[
            Bound::new(1e-3 * q00, 1e3 * q00),
            Bound::new(0.0, ALPHA_MAX),
            Bound::new(tc_lower, TC_MAX),
        ],
        &QP_QUALITY_PARAMETERS,
        &opts_for(&q_sig),
    )?;
    Ok(QpSweepFit { frequency, quality })
}
