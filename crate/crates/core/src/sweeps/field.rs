use nalgebra::DMatrix;
use serde::Serialize;

use crate::constants::{H, MU_B};
use crate::error::{Error, Result};
use crate::lm::{lm_minimize, Bound, LmOptions};
use crate::types::FitResult;

use super::{known_sigmas, median, scales, sorted_sweep, SweepKind, SweepRecord};

/// A collapse is confirmed once `Q_int` falls below this fraction of the
/// low-field median.
pub const ONSET_FACTOR: f64 = 0.5;
/// Fields below this define the low-field reference, T.
pub const LOW_FIELD: f64 = 0.05;
/// ESR search window, T.
pub const ESR_WINDOW: (f64, f64) = (0.05, 0.3);
/// Minimum fractional `Q_int` reduction below the local median.
pub const ESR_DEPTH: f64 = 0.2;
/// Coarsest grid spacing accepted inside the ESR window, T.
pub const ESR_MAX_STEP: f64 = 0.010;
/// Half-width of the neighbourhood defining the local median, T.
const ESR_MEDIAN_HALF_WIDTH: f64 = 0.05;
const MIN_PREFIX: usize = 10;

pub const FIELD_PARAMETERS: [&str; 2] = ["f0_zero_hz", "c2_hz_per_t2"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EsrFeature {
    pub b_dip: f64,
    pub f0: f64,
    /// Fractional `Q_int` reduction relative to the local median.
    pub dip_depth: f64,
    pub window: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Onset {
    Found { field: f64, index: usize },
    /// `Q_int` never collapsed; carries the largest field in the sweep.
    NotFound { sweep_max: f64 },
}

impl Onset {
    pub fn field(&self) -> Option<f64> {
        match self {
            Onset::Found { field, .. } => Some(*field),
            Onset::NotFound { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldAnalysis {
    /// `f0(B) = f0(0) − c2·B²` on the records below the onset; `None` when
    /// that prefix is too short.
    pub quadratic: Option<FitResult>,
    pub onset: Onset,
    pub prefix_len: usize,
    pub prefix_too_short: bool,
    /// RMS deviation from the quadratic beyond the onset divided by the RMS
    /// inside the prefix. Large values confirm the onset.
    pub residual_blowup: Option<f64>,
    pub esr: Vec<EsrFeature>,
}

/// Zeeman resonance field `h·f0/(g·μB)`, T.
pub fn zeeman_field(f0: f64, g: f64) -> f64 {
    H * f0 / (g * MU_B)
}

fn in_windows(b: f64, features: &[EsrFeature]) -> bool {
    features.iter().any(|e| b >= e.window.0 && b <= e.window.1)
}

/// Per-point noise of a smooth sequence from the MAD of its second
/// differences, which are blind to a linear trend.
fn second_difference_noise(q: &[f64]) -> f64 {
    if q.len() < 3 {
        return 0.0;
    }
    let d: Vec<f64> = q.windows(3).map(|w| (w[2] - 2.0 * w[1] + w[0]).abs()).collect();
    1.4826 * median(&d) / 6f64.sqrt()
}

/// Whether `q` falls along `b` by more than four standard errors of a
/// straight-line fit.
fn falling(b: &[f64], q: &[f64]) -> bool {
    let n = b.len();
    if n < 4 {
        return false;
    }
    let bm = b.iter().sum::<f64>() / n as f64;
    let qm = q.iter().sum::<f64>() / n as f64;
    let sxx: f64 = b.iter().map(|x| (x - bm).powi(2)).sum();
    let sxy: f64 = b.iter().zip(q).map(|(x, y)| (x - bm) * (y - qm)).sum();
    if sxx == 0.0 {
        return false;
    }
    let slope = sxy / sxx;
    let ss: f64 = b.iter().zip(q).map(|(x, y)| (y - qm - slope * (x - bm)).powi(2)).sum();
    let se = (ss / (n - 2) as f64 / sxx).sqrt();
    slope < 0.0 && -slope > 4.0 * se
}

/// The onset is the last point still on the low-field plateau before the
/// collapse below `ONSET_FACTOR` of it. Data that fall from the first
/// points on have no plateau and put the onset at the lowest field.
fn find_onset(recs: &[SweepRecord], esr: &[EsrFeature]) -> Onset {
    let sweep_max = recs.last().map(|r| r.field).unwrap_or(0.0);
    let candidates: Vec<usize> = (0..recs.len()).filter(|&i| !in_windows(recs[i].field, esr)).collect();
    if candidates.is_empty() {
        return Onset::NotFound { sweep_max };
    }
    let q: Vec<f64> = candidates.iter().map(|&i| recs[i].q_int).collect();
    let b: Vec<f64> = candidates.iter().map(|&i| recs[i].field).collect();
    let n_low = b.iter().filter(|&&x| x < LOW_FIELD).count().max(4).min(q.len());
    let (b_low, q_low) = (&b[..n_low], &q[..n_low]);
    if falling(b_low, q_low) {
        let index = candidates[0];
        return Onset::Found {
            field: recs[index].field,
            index,
        };
    }
    let reference = median(q_low);
    let noise = second_difference_noise(q_low);
    let Some(pos) = q.iter().position(|&v| v < ONSET_FACTOR * reference) else {
        return Onset::NotFound { sweep_max };
    };
    // walk back while the points stay clearly below the plateau
    let mut k = pos;
    while k > 0 && q[k - 1] < reference - 3.0 * noise {
        k -= 1;
    }
    let index = candidates[k.saturating_sub(1)];
    Onset::Found {
        field: recs[index].field,
        index,
    }
}

fn quadratic_fit(b: &[f64], f: &[f64], sigma: &[f64]) -> Result<FitResult> {
    let scale = scales(f, sigma, 1e-9);
    let f00 = f[0];
    let residuals = |p: &[f64]| -> Result<Vec<f64>> {
        Ok(b.iter()
            .zip(f)
            .zip(&scale)
            .map(|((&bi, &fi), &s)| (p[0] - p[1] * bi * bi - fi) / s)
            .collect())
    };
    let span = b.iter().fold(0.0f64, |m, &x| m.max(x * x));
    let c2_0 = if span > 0.0 { (f00 - f[f.len() - 1]) / span } else { 0.0 };
    lm_minimize(
        residuals,
        &[f00, c2_0],
        &[Bound::FREE, Bound::FREE],
        &FIELD_PARAMETERS,
        &LmOptions {
            absolute_sigma: known_sigmas(sigma),
            ..LmOptions::default()
        },
    )
}

/// Detects the vortex onset and fits the quadratic frequency shift below it.
pub fn fit_field_quadratic(records: &[SweepRecord]) -> Result<FieldAnalysis> {
    let recs = sorted_sweep(records, SweepKind::Field)?;
    if recs.is_empty() {
        return Err(Error::InvalidSweep("empty field sweep".into()));
    }
    let esr = detect_esr(&recs);
    let onset = find_onset(&recs, &esr);
    let prefix_len = match onset {
        Onset::Found { index, .. } => index,
        Onset::NotFound { .. } => recs.len(),
    };
    let prefix_too_short = prefix_len < MIN_PREFIX;
    let mut quadratic = None;
    let mut residual_blowup = None;
    if !prefix_too_short {
        let b: Vec<f64> = recs[..prefix_len].iter().map(|r| r.field).collect();
        let f: Vec<f64> = recs[..prefix_len].iter().map(|r| r.f0).collect();
        let s: Vec<f64> = recs[..prefix_len].iter().map(|r| r.f0_sigma).collect();
        let fit = quadratic_fit(&b, &f, &s)?;
        if prefix_len < recs.len() {
            let (f00, c2) = (fit.values[0], fit.values[1]);
            let rms = |rs: &[SweepRecord]| {
                (rs.iter().map(|r| (f00 - c2 * r.field * r.field - r.f0).powi(2)).sum::<f64>() / rs.len() as f64)
                    .sqrt()
            };
            let inside = rms(&recs[..prefix_len]);
            let beyond = rms(&recs[prefix_len..]);
            residual_blowup = Some(if inside > 0.0 { beyond / inside } else { f64::INFINITY });
        }
        quadratic = Some(fit);
    }
    Ok(FieldAnalysis {
        quadratic,
        onset,
        prefix_len,
        prefix_too_short,
        residual_blowup,
        esr,
    })
}

/// Finds `Q_int` dips inside the ESR search window. Records need not be
/// sorted; non-field records are ignored.
pub fn detect_esr(records: &[SweepRecord]) -> Vec<EsrFeature> {
    let mut recs: Vec<SweepRecord> = records.iter().filter(|r| r.kind == SweepKind::Field).copied().collect();
    recs.sort_by(|a, b| a.field.total_cmp(&b.field));
    let n = recs.len();
    let b: Vec<f64> = recs.iter().map(|r| r.field).collect();
    let q: Vec<f64> = recs.iter().map(|r| r.q_int).collect();
    let in_search = |x: f64| x >= ESR_WINDOW.0 && x <= ESR_WINDOW.1;
    let coarse = b
        .windows(2)
        .any(|w| (in_search(w[0]) || in_search(w[1])) && w[1] - w[0] > ESR_MAX_STEP * (1.0 + 1e-9));
    if coarse {
        log::warn!("field grid coarser than {ESR_MAX_STEP} T inside the ESR window; dips may be missed");
    }
    let local_median: Vec<f64> = (0..n)
        .map(|i| {
            let nb: Vec<f64> = (0..n)
                .filter(|&j| j != i && (b[j] - b[i]).abs() <= ESR_MEDIAN_HALF_WIDTH)
                .map(|j| q[j])
                .collect();
            if nb.is_empty() {
                q[i]
            } else {
                median(&nb)
            }
        })
        .collect();
    let below: Vec<bool> = (0..n)
        .map(|i| in_search(b[i]) && q[i] < (1.0 - ESR_DEPTH) * local_median[i])
        .collect();

    let mut features = Vec::new();
    let mut i = 0;
    while i < n {
        if !below[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i < n && below[i] {
            i += 1;
        }
        let run = start..i;
        let k = run.clone().min_by(|&a, &c| q[a].total_cmp(&q[c])).unwrap();
        let reference = local_median[k];
        let depth = 1.0 - q[k] / reference;
        let b_dip = if k > 0 && k + 1 < n {
            parabolic_vertex((b[k - 1], q[k - 1]), (b[k], q[k]), (b[k + 1], q[k + 1])).unwrap_or(b[k])
        } else {
            b[k]
        };
        // window: contiguous points deeper than half the dip, plus one each side
        let half = reference * (1.0 - 0.5 * depth);
        let mut lo = k;
        while lo > 0 && q[lo - 1] < half {
            lo -= 1;
        }
        let mut hi = k;
        while hi + 1 < n && q[hi + 1] < half {
            hi += 1;
        }
        let lo = lo.saturating_sub(1);
        let hi = (hi + 1).min(n - 1);
        features.push(EsrFeature {
            b_dip,
            f0: recs[k].f0,
            dip_depth: depth,
            window: (b[lo], b[hi]),
        });
    }
    features
}

/// Vertex of the parabola through three points, if it lies between the
/// outer two.
fn parabolic_vertex(p0: (f64, f64), p1: (f64, f64), p2: (f64, f64)) -> Option<f64> {
    let (x0, y0) = p0;
    let (x1, y1) = p1;
    let (x2, y2) = p2;
    let d = (x0 - x1) * (x0 - x2) * (x1 - x2);
    if d == 0.0 {
        return None;
    }
    let a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / d;
    let bb = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / d;
    if a <= 0.0 {
        return None;
    }
    let v = -bb / (2.0 * a);
    (v >= x0 && v <= x2).then_some(v)
}

/// Fits `h·f0 = g·μB·B` through the origin.
pub fn fit_zeeman(features: &[EsrFeature]) -> Result<FitResult> {
    if features.len() < 2 {
        return Err(Error::InsufficientFeatures {
            needed: 2,
            got: features.len(),
        });
    }
    let x: Vec<f64> = features.iter().map(|e| MU_B * e.b_dip).collect();
    let y: Vec<f64> = features.iter().map(|e| H * e.f0).collect();
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
    let g = sxy / sxx;
    let ss: f64 = x.iter().zip(&y).map(|(a, b)| (b - g * a).powi(2)).sum();
    let dof = features.len() - 1;
    let variance = ss / dof as f64 / sxx;
    Ok(FitResult {
        names: vec!["g_dimensionless".into()],
        values: vec![g],
        covariance: DMatrix::from_element(1, 1, variance),
        residual_norm: ss,
        dof,
        converged: true,
        iterations: 1,
        ill_conditioned: false,
        condition: 1.0,
    })
}
