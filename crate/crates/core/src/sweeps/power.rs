use crate::error::{Error, Result};
use crate::lm::{lm_minimize, Bound, LmOptions};
use crate::tls::{power_law_loss, thermal_factor, TlsParams};
use crate::types::FitResult;

use super::{known_sigmas, median, scales, to_physical, sorted_sweep, SweepKind, SweepRecord};

pub const POWER_PARAMETERS: [&str; 4] = [
    "q_tls0_dimensionless",
    "n_c_dimensionless",
    "beta_dimensionless",
    "q_other_dimensionless",
];

const MIN_DECADES: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
pub struct PowerFit {
    pub fit: FitResult,
    pub params: TlsParams,
    /// Model `Q_int` at one photon.
    pub single_photon_q_int: f64,
    pub temperature: f64,
}

/// Fits the power-law TLS model to `Q_int(⟨n⟩)` at the sweep's fixed
/// temperature. `guess` supplies starting values; without it they are
/// read off the data.
pub fn fit_power_sweep_tls(records: &[SweepRecord], guess: Option<&TlsParams>) -> Result<PowerFit> {
    let recs = sorted_sweep(records, SweepKind::Power)?;
    if recs.iter().any(|r| r.photon_number.is_none_or(|n| !(n > 0.0))) {
        return Err(Error::InvalidSweep("every power record needs a photon number > 0".into()));
    }
    let n: Vec<f64> = recs.iter().map(|r| r.photon_number.unwrap()).collect();
    let q: Vec<f64> = recs.iter().map(|r| r.q_int).collect();
    let (n_lo, n_hi) = (n[0], *n.last().unwrap());
    if (n_hi / n_lo).log10() < MIN_DECADES {
        return Err(Error::InsufficientSpan(format!(
            "photon numbers span {:.2} decades, need {MIN_DECADES}",
            (n_hi / n_lo).log10()
        )));
    }
    let temps: Vec<f64> = recs.iter().map(|r| r.temperature).collect();
    let t = median(&temps);
    if temps.iter().any(|&x| (x - t).abs() > 1e-6 * t.max(1e-3)) {
        return Err(Error::InvalidSweep("power sweep must be at one fixed temperature".into()));
    }
    let f0 = median(&recs.iter().map(|r| r.f0).collect::<Vec<_>>());
    let sigmas: Vec<f64> = recs.iter().map(|r| r.q_int_sigma).collect();
    let scale = scales(&q, &sigmas, 1e-2);

    // plateau check: the low- and high-power ends must differ beyond noise
    let k = (n.len() / 5).max(2).min(n.len() / 2);
    let q_lo = q[..k].iter().sum::<f64>() / k as f64;
    let q_hi = q[n.len() - k..].iter().sum::<f64>() / k as f64;
    let rel_noise = median(&scale.iter().zip(&q).map(|(s, v)| s / v).collect::<Vec<_>>()) / (k as f64).sqrt();
    if (q_hi - q_lo) / q_lo < 3.0 * rel_noise || q_hi <= q_lo {
        return Err(Error::DegenerateSaturation { nc_lower_bound: n_hi });
    }

    let th = thermal_factor(f0, t);
    let initial = match guess {
        Some(g) => *g,
        None => {
            let q_other = 1.05 * q_hi;
            let inv_tls = (1.0 / q_lo - 1.0 / q_other).max(1e-3 / q_lo) / th;
            // n_c where the loss is halfway between the plateaus
            let mid = 0.5 * (1.0 / q_lo + 1.0 / q_hi);
            let i = q.iter().position(|&v| 1.0 / v < mid).unwrap_or(n.len() / 2);
            TlsParams {
                q_tls0: 1.0 / inv_tls,
                n_c: n[i].max(n_lo),
                beta: 0.5,
                d: 1.0,
                beta1: 1.0,
                beta2: 1.0,
                q_other,
            }
        }
    };
    let build = |p: &[f64]| TlsParams {
        q_tls0: p[0].exp(),
        n_c: p[1].exp(),
        beta: p[2],
        q_other: p[3].exp(),
        ..initial
    };
    let residuals = |p: &[f64]| -> Result<Vec<f64>> {
        let tp = build(p);
        n.iter()
            .zip(&q)
            .zip(&scale)
            .map(|((&ni, &qi), &s)| Ok((1.0 / power_law_loss(&tp, ni, f0, t)? - qi) / s))
            .collect()
    };
    let ln_q = Bound::new(1.0, 1e9f64.ln());
    let x0 = [
        initial.q_tls0.ln().clamp(1.0, 1e9f64.ln()),
        initial.n_c.ln(),
        initial.beta.clamp(0.01, 3.0),
        initial.q_other.ln().clamp(1.0, 1e9f64.ln()),
    ];
    let internal = lm_minimize(
        residuals,
        &x0,
        &[
            ln_q,
            Bound::new((1e-3 * n_lo).ln(), (1e3 * n_hi).ln()),
            Bound::new(0.01, 3.0),
            ln_q,
        ],
        &POWER_PARAMETERS,
        &LmOptions {
            absolute_sigma: known_sigmas(&sigmas),
            ..LmOptions::default()
        },
    )?;
    let params = build(&internal.values);
    if params.n_c >= n_hi {
        return Err(Error::DegenerateSaturation { nc_lower_bound: n_hi });
    }
    let jac = [params.q_tls0, params.n_c, 1.0, params.q_other];
    let fit = to_physical(
        internal,
        vec![params.q_tls0, params.n_c, params.beta, params.q_other],
        &jac,
    );
    Ok(PowerFit {
        single_photon_q_int: 1.0 / power_law_loss(&params, 1.0, f0, t)?,
        fit,
        params,
        temperature: t,
    })
}
