use crate::bcs;
use crate::error::{Error, Result};
use crate::lm::{lm_minimize, Bound, LmOptions};
use crate::tls::{tls_frequency_shift, tls_quality, TlsParams};
use crate::types::{FitResult, MaterialModel};

use super::{known_sigmas, scales, sorted_sweep, to_physical, SweepKind, SweepRecord};

pub const COMBINED_FREQUENCY_PARAMETERS: [&str; 4] =
    ["q_tls0_dimensionless", "alpha_dimensionless", "tc_k", "f0_zero_hz"];
pub const COMBINED_QUALITY_PARAMETERS: [&str; 7] = [
    "q_tls0_dimensionless",
    "alpha_dimensionless",
    "tc_k",
    "d_dimensionless",
    "beta1_dimensionless",
    "beta2_dimensionless",
    "q_other_dimensionless",
];

/// |corr(α, Q_TLS,0)| above which the two are reported as not separately
/// identifiable.
pub const IDENTIFIABILITY_LIMIT: f64 = 0.99;

const LN_Q: (f64, f64) = (1.0, 20.723_265_836_946_41); // ln 1e9

#[derive(Debug, Clone, PartialEq)]
pub struct CombinedFit {
    pub frequency: FitResult,
    pub quality: FitResult,
    pub identifiability_warning: bool,
}

struct Point {
    n: f64,
    t: f64,
    f0: f64,
    q: f64,
}

fn shifts_at(m: &MaterialModel, f_ref: f64, temps: &[f64], unique: &[f64]) -> Result<Vec<bcs::QpShift>> {
    let s = bcs::qp_shifts(m, f_ref, unique)?;
    Ok(temps
        .iter()
        .map(|t| {
            let i = unique.partition_point(|u| u < t);
            s[i]
        })
        .collect())
}

fn alpha_tls_correlation(fit: &FitResult) -> f64 {
    fit.correlation("alpha_dimensionless", "q_tls0_dimensionless")
}

/// Joint fit of a temperature sweep and a power sweep with the combined
/// TLS + quasiparticle + residual model. The frequency channel uses
/// `(Q_TLS,0, α, Tc, f0(0))`, the quality channel all seven loss
/// parameters; both are reported.
pub fn fit_combined(
    temperature_records: &[SweepRecord],
    power_records: &[SweepRecord],
    m0: &MaterialModel,
    t0: &TlsParams,
) -> Result<CombinedFit> {
    m0.validate()?;
    t0.validate()?;
    let temp = sorted_sweep(temperature_records, SweepKind::Temperature)?;
    let power = sorted_sweep(power_records, SweepKind::Power)?;
    if temp.is_empty() || power.is_empty() {
        return Err(Error::InvalidSweep("combined fit needs both a temperature and a power sweep".into()));
    }
    let mut pts = Vec::new();
    for r in temp.iter().chain(&power) {
        let n = r
            .photon_number
            .ok_or_else(|| Error::InvalidSweep("combined fit needs photon numbers on every record".into()))?;
        pts.push(Point {
            n,
            t: r.temperature,
            f0: r.f0,
            q: r.q_int,
        });
    }
    let temps: Vec<f64> = pts.iter().map(|p| p.t).collect();
    let mut unique = temps.clone();
    unique.sort_by(f64::total_cmp);
    unique.dedup();
    let t_max = *unique.last().unwrap();
    let f_data: Vec<f64> = pts.iter().map(|p| p.f0).collect();
    let q_data: Vec<f64> = pts.iter().map(|p| p.q).collect();
    let records: Vec<&SweepRecord> = temp.iter().chain(&power).collect();
    let f_sig: Vec<f64> = records.iter().map(|r| r.f0_sigma).collect();
    let q_sig: Vec<f64> = records.iter().map(|r| r.q_int_sigma).collect();
    let f_scale = scales(&f_data, &f_sig, 1e-7);
    let q_scale = scales(&q_data, &q_sig, 1e-2);

    let tc_lower = t_max * 1.001;
    let tc0 = if m0.tc > tc_lower { m0.tc } else { 1.2 * t_max };
    let alpha0 = m0.alpha.clamp(0.01, 0.5);
    let material = |alpha: f64, tc: f64| MaterialModel { alpha, tc, ..*m0 };
    let opts_for = |sig: &[f64]| LmOptions {
        absolute_sigma: known_sigmas(sig),
        ..LmOptions::default()
    };
    let ln_q = Bound::new(LN_Q.0, LN_Q.1);

    let freq_res = |p: &[f64]| -> Result<Vec<f64>> {
        let q_tls0 = p[0].exp();
        let shifts = shifts_at(&material(p[1], p[2]), p[3], &temps, &unique)?;
        pts.iter()
            .zip(&shifts)
            .zip(&f_scale)
            .map(|((pt, s), sc)| {
                let tls = tls_frequency_shift(q_tls0, p[3], pt.t)?;
                Ok((p[3] * (1.0 + tls + s.df_over_f) - pt.f0) / sc)
            })
            .collect()
    };
    let f00 = f_data[temps.iter().enumerate().fold(0, |b, (i, &t)| if t < temps[b] { i } else { b })];
    let f_ref = f00;
    let internal_f = lm_minimize(
        freq_res,
        &[t0.q_tls0.ln().clamp(LN_Q.0, LN_Q.1), alpha0, tc0, f00],
        &[
            ln_q,
            Bound::new(0.0, 0.5),
            Bound::new(tc_lower, 30.0),
            Bound::new(0.5 * f00, 2.0 * f00),
        ],
        &COMBINED_FREQUENCY_PARAMETERS,
        &opts_for(&f_sig),
    )?;
    let v = &internal_f.values;
    let fvals = vec![v[0].exp(), v[1], v[2], v[3]];
    let frequency = to_physical(internal_f, fvals.clone(), &[fvals[0], 1.0, 1.0, 1.0]);

    let build = |p: &[f64]| TlsParams {
        q_tls0: p[0].exp(),
        d: p[3].exp(),
        beta1: p[4],
        beta2: p[5],
        q_other: p[6].exp(),
        ..*t0
    };
    let qual_res = |p: &[f64]| -> Result<Vec<f64>> {
        let tp = build(p);
        let shifts = shifts_at(&material(p[1], p[2]), f_ref, &temps, &unique)?;
        pts.iter()
            .zip(&shifts)
            .zip(&q_scale)
            .map(|((pt, s), sc)| {
                let inv = 1.0 / tls_quality(&tp, pt.n, f_ref, pt.t)? + s.dq_inv + 1.0 / tp.q_other;
                Ok((1.0 / inv - pt.q) / sc)
            })
            .collect()
    };
    let exponent = Bound::new(0.01, 3.0);
    let internal_q = lm_minimize(
        qual_res,
        &[
            t0.q_tls0.ln().clamp(LN_Q.0, LN_Q.1),
            alpha0,
            tc0,
            t0.d.ln(),
            t0.beta1.clamp(0.01, 3.0),
            t0.beta2.clamp(0.01, 3.0),
            t0.q_other.ln().clamp(LN_Q.0, LN_Q.1),
        ],
        &[
            ln_q,
            Bound::new(0.0, 0.5),
            Bound::new(tc_lower, 30.0),
            Bound::new(-50.0, 50.0),
            exponent,
            exponent,
            ln_q,
        ],
        &COMBINED_QUALITY_PARAMETERS,
        &opts_for(&q_sig),
    )?;
    let tp = build(&internal_q.values);
    let q = &internal_q.values;
    let qvals = vec![tp.q_tls0, q[1], q[2], tp.d, tp.beta1, tp.beta2, tp.q_other];
    let quality = to_physical(
        internal_q,
        qvals,
        &[tp.q_tls0, 1.0, 1.0, tp.d, 1.0, 1.0, tp.q_other],
    );
    let identifiability_warning = alpha_tls_correlation(&frequency).abs() > IDENTIFIABILITY_LIMIT
        || alpha_tls_correlation(&quality).abs() > IDENTIFIABILITY_LIMIT;
    if identifiability_warning {
        log::warn!("alpha and Q_TLS,0 are strongly correlated; treat them as jointly determined");
    }
    Ok(CombinedFit {
        frequency,
        quality,
        identifiability_warning,
    })
}
