//! Reflection (S11) lineshape with complex coupling and the single-trace
//! resonance fitter.
//!
//! ```text
//! S11(f) = a·e^{iθ}·e^{−2πifτ}·[1 − (2Q_l/|Q_e|)·e^{iφ} / (1 + 2iQ_l(f − f0)/f0)]
//! 1/Q_l  = 1/Q_int + cos φ/|Q_e|
//! ```

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::lm::{lm_minimize, Bound, LmOptions};
use crate::types::{ComplexSpectrum, FitResult};

pub const Q_MIN: f64 = 10.0;
pub const Q_MAX: f64 = 1e9;
/// Largest electrical delay accepted by the fitter, s.
pub const TAU_MAX: f64 = 100e-9;
/// Required ratio of dip depth to the off-resonant noise level.
pub const DIP_THRESHOLD: f64 = 3.0;
/// Fraction of samples at each end of the span treated as off-resonant.
const EDGE_FRACTION: f64 = 0.15;
const PHI_LIMIT: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct S11Model {
    pub f0: f64,
    pub q_int: f64,
    /// Magnitude of the complex external quality factor.
    pub q_ext: f64,
    /// Coupling (mismatch) phase, rad.
    pub phi: f64,
    pub a: f64,
    /// Background phase at zero frequency, rad.
    pub theta: f64,
    /// Electrical delay, s.
    pub tau: f64,
}

impl S11Model {
    /// Critically matched background with no delay.
    pub fn ideal(f0: f64, q_int: f64, q_ext: f64) -> Self {
        Self {
            f0,
            q_int,
            q_ext,
            phi: 0.0,
            a: 1.0,
            theta: 0.0,
            tau: 0.0,
        }
    }

    /// Effective coupling quality factor `|Q_e|/cos φ`.
    pub fn q_coupling(&self) -> f64 {
        self.q_ext / self.phi.cos()
    }

    pub fn q_loaded(&self) -> f64 {
        1.0 / (1.0 / self.q_int + self.phi.cos() / self.q_ext)
    }

    pub fn overcoupled(&self) -> bool {
        self.q_int > self.q_ext
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f0 > 0.0 && self.q_int > 0.0 && self.q_ext > 0.0) {
            return Err(Error::InvalidParameter("f0, Q_int and |Q_e| must be > 0".into()));
        }
        if !(self.q_loaded() > 0.0) {
            return Err(Error::InvalidParameter("loaded Q must be > 0".into()));
        }
        Ok(())
    }

    /// Resonant factor in brackets, without background.
    fn resonance(&self, f: f64) -> Complex64 {
        let ql = self.q_loaded();
        let coupling = Complex64::from_polar(2.0 * ql / self.q_ext, self.phi);
        let lorentz = Complex64::new(1.0, 2.0 * ql * (f - self.f0) / self.f0);
        Complex64::new(1.0, 0.0) - coupling / lorentz
    }

    fn background(&self, f: f64) -> Complex64 {
        Complex64::from_polar(self.a, self.theta - 2.0 * PI * f * self.tau)
    }
}

/// Evaluates the reflection model at one frequency.
pub fn s11_forward(m: &S11Model, f: f64) -> Complex64 {
    m.background(f) * m.resonance(f)
}

pub fn s11_forward_many(m: &S11Model, freqs: &[f64]) -> Vec<Complex64> {
    freqs.iter().map(|&f| s11_forward(m, f)).collect()
}

/// Result of [`fit_s11`].
#[derive(Debug, Clone, PartialEq)]
pub struct S11Fit {
    pub model: S11Model,
    /// Parameters in physical units. The background phase is reported at
    /// `f_ref`, which decorrelates it from the delay.
    pub fit: FitResult,
    pub f_ref: f64,
    /// Robust per-component noise estimate of the off-resonant samples.
    pub noise_sigma: f64,
    /// Unwrapped phase winding of the background-normalized data, rad.
    pub phase_winding: f64,
    pub durbin_watson: f64,
}

impl S11Fit {
    pub fn q_loaded(&self) -> f64 {
        self.model.q_loaded()
    }

    /// A full 2π winding of the normalized data.
    pub fn winds_full_circle(&self) -> bool {
        self.phase_winding.abs() > PI
    }
}

pub const S11_PARAMETERS: [&str; 7] = [
    "f0_hz",
    "q_int_dimensionless",
    "q_ext_dimensionless",
    "phi_rad",
    "a_dimensionless",
    "theta_ref_rad",
    "tau_s",
];

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median absolute deviation scaled to a Gaussian standard deviation.
pub fn mad_sigma(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    let m = median(&mut v);
    let mut dev: Vec<f64> = values.iter().map(|x| (x - m).abs()).collect();
    1.482_602_218_505_602 * median(&mut dev)
}

fn unwrap(phases: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(phases.len());
    let mut offset = 0.0;
    for (i, &p) in phases.iter().enumerate() {
        if i > 0 {
            let d = p - phases[i - 1];
            if d > PI {
                offset -= 2.0 * PI;
            } else if d < -PI {
                offset += 2.0 * PI;
            }
        }
        out.push(p + offset);
    }
    out
}

/// Total unwrapped phase change across a sequence of complex samples.
pub fn phase_winding(values: &[Complex64]) -> f64 {
    let phases: Vec<f64> = values.iter().map(|v| v.arg()).collect();
    let u = unwrap(&phases);
    match (u.first(), u.last()) {
        (Some(a), Some(b)) => b - a,
        _ => 0.0,
    }
}

/// Durbin–Watson statistic of a residual sequence.
pub fn durbin_watson(residuals: &[f64]) -> f64 {
    let ss: f64 = residuals.iter().map(|r| r * r).sum();
    if ss == 0.0 {
        return 2.0;
    }
    let diff: f64 = residuals.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    diff / ss
}

fn linear_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx > 0.0 {
        sxy / sxx
    } else {
        0.0
    }
}

struct Background {
    a: f64,
    theta_ref: f64,
    tau: f64,
}

impl Background {
    fn at(&self, f: f64, f_ref: f64) -> Complex64 {
        Complex64::from_polar(self.a, self.theta_ref - 2.0 * PI * (f - f_ref) * self.tau)
    }
}

fn edge_indices(n: usize) -> Vec<usize> {
    let k = ((n as f64 * EDGE_FRACTION).ceil() as usize).max(3).min(n / 2);
    (0..k).chain(n - k..n).collect()
}

fn estimate_background(freqs: &[f64], values: &[Complex64], f_ref: f64) -> Background {
    let n = freqs.len();
    let k = ((n as f64 * EDGE_FRACTION).ceil() as usize).max(3).min(n / 2);
    let mut slopes = Vec::new();
    for range in [0..k, n - k..n] {
        let f: Vec<f64> = freqs[range.clone()].to_vec();
        let ph = unwrap(&values[range].iter().map(|v| v.arg()).collect::<Vec<_>>());
        slopes.push(linear_slope(&f, &ph));
    }
    let slope = 0.5 * (slopes[0] + slopes[1]);
    let tau = (-slope / (2.0 * PI)).clamp(-TAU_MAX, TAU_MAX);
    let edges = edge_indices(n);
    let mut sum = Complex64::new(0.0, 0.0);
    for &i in &edges {
        sum += values[i] * Complex64::from_polar(1.0, 2.0 * PI * (freqs[i] - f_ref) * tau);
    }
    let mean = sum / edges.len() as f64;
    let a = edges.iter().map(|&i| values[i].norm()).sum::<f64>() / edges.len() as f64;
    Background {
        a,
        theta_ref: mean.arg(),
        tau,
    }
}

/// Initial guess: background from the span edges, f0 at the deepest point
/// of the normalized trace, and Q_l from the half-width of `|1 − z|²`.
struct Initial {
    bg: Background,
    f0: f64,
    q_loaded: f64,
    q_int: f64,
    q_ext: f64,
    phi: f64,
    noise: f64,
}

fn initialize(freqs: &[f64], values: &[Complex64], f_ref: f64) -> Result<Initial> {
    let n = freqs.len();
    let bg = estimate_background(freqs, values, f_ref);
    let z: Vec<Complex64> = freqs.iter().zip(values).map(|(&f, &v)| v / bg.at(f, f_ref)).collect();
    let dev: Vec<Complex64> = z.iter().map(|v| Complex64::new(1.0, 0.0) - v).collect();

    let edges = edge_indices(n);
    let edge_parts: Vec<f64> = edges.iter().flat_map(|&i| [dev[i].re, dev[i].im]).collect();
    let noise = mad_sigma(&edge_parts);

    // light smoothing keeps single noisy samples from posing as a dip
    let smooth: Vec<f64> = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(2);
            let hi = (i + 3).min(n);
            let s: Complex64 = dev[lo..hi].iter().sum();
            (s / (hi - lo) as f64).norm()
        })
        .collect();
    let (peak, depth) = smooth
        .iter()
        .enumerate()
        .fold((0, 0.0), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    let baseline = {
        let mut e: Vec<f64> = edges.iter().map(|&i| smooth[i]).collect();
        median(&mut e)
    };
    let contrast = depth - baseline;
    if !(contrast > DIP_THRESHOLD * noise) || !(contrast > 1e-9) || peak < 2 || peak + 3 > n {
        return Err(Error::NoDipFound { depth: contrast, noise });
    }

    let power: Vec<f64> = dev.iter().map(|d| d.norm_sqr()).collect();
    let half = 0.5 * power[peak];
    let crossing = |range: &mut dyn Iterator<Item = usize>| -> Option<f64> {
        let mut prev = peak;
        for i in range {
            if power[i] < half {
                let (p0, p1) = (power[prev], power[i]);
                let t = (p0 - half) / (p0 - p1);
                return Some(freqs[prev] + t * (freqs[i] - freqs[prev]));
            }
            prev = i;
        }
        None
    };
    let left = crossing(&mut (0..peak).rev());
    let right = crossing(&mut (peak + 1..n));
    let f0 = freqs[peak];
    let span = freqs[n - 1] - freqs[0];
    let fwhm = match (left, right) {
        (Some(l), Some(r)) => r - l,
        (Some(l), None) => 2.0 * (f0 - l),
        (None, Some(r)) => 2.0 * (r - f0),
        (None, None) => span / 4.0,
    };
    let q_loaded = (f0 / fwhm.max(span / n as f64)).clamp(2.0 * Q_MIN, Q_MAX / 2.0);

    // circle diameter 2Q_l/|Q_e| sets the coupling; its phase sets φ
    let k = dev[peak].norm().max(1e-6);
    let phi = dev[peak].arg().clamp(-PHI_LIMIT + 0.1, PHI_LIMIT - 0.1);
    let q_ext = (2.0 * q_loaded / k).clamp(Q_MIN, Q_MAX);
    let inv_int = 1.0 / q_loaded - phi.cos() / q_ext;
    let q_int = if inv_int > 0.0 {
        (1.0 / inv_int).clamp(Q_MIN, Q_MAX)
    } else {
        (20.0 * q_ext).min(Q_MAX)
    };
    Ok(Initial {
        bg,
        f0,
        q_loaded,
        q_int,
        q_ext,
        phi,
        noise,
    })
}

/// Fits the reflection model to one spectrum.
pub fn fit_s11(spec: &ComplexSpectrum) -> Result<S11Fit> {
    fit_s11_with(spec, &LmOptions::default())
}

pub fn fit_s11_with(spec: &ComplexSpectrum, opts: &LmOptions) -> Result<S11Fit> {
    spec.check_fittable()?;
    let freqs = spec.frequencies();
    let data = spec.values();
    let n = freqs.len();
    let f_ref = 0.5 * (freqs[0] + freqs[n - 1]);
    let span = freqs[n - 1] - freqs[0];
    let init = initialize(freqs, data, f_ref)?;

    // Internal coordinates: detuning in initial linewidths, log Q's, delay
    // in turns of phase across the span.
    let width = init.f0 / init.q_loaded;
    let f_c = init.f0;
    let unpack = |x: &[f64]| -> (S11Model, f64) {
        let tau = x[6] / span;
        let m = S11Model {
            f0: f_c + width * x[0],
            q_int: x[1].exp(),
            q_ext: x[2].exp(),
            phi: x[3],
            a: x[4],
            theta: x[5] + 2.0 * PI * f_ref * tau,
            tau,
        };
        (m, x[5])
    };
    let residuals = |x: &[f64]| -> Result<Vec<f64>> {
        let (m, theta_ref) = unpack(x);
        let mut r = Vec::with_capacity(2 * n);
        for (&f, &d) in freqs.iter().zip(data) {
            let bg = Complex64::from_polar(m.a, theta_ref - 2.0 * PI * (f - f_ref) * m.tau);
            let v = bg * m.resonance(f) - d;
            r.push(v.re);
            r.push(v.im);
        }
        Ok(r)
    };
    let x0 = [
        0.0,
        init.q_int.ln(),
        init.q_ext.ln(),
        init.phi,
        init.bg.a,
        init.bg.theta_ref,
        init.bg.tau * span,
    ];
    let half_span_widths = span / width;
    let bounds = [
        Bound::new(
            (freqs[0] - f_c) / width - half_span_widths,
            (freqs[n - 1] - f_c) / width + half_span_widths,
        ),
        Bound::new(Q_MIN.ln(), Q_MAX.ln()),
        Bound::new(Q_MIN.ln(), Q_MAX.ln()),
        Bound::new(-PHI_LIMIT, PHI_LIMIT),
        Bound::new(1e-9, f64::INFINITY),
        Bound::FREE,
        Bound::new(-TAU_MAX * span, TAU_MAX * span),
    ];
    let internal = lm_minimize(residuals, &x0, &bounds, &S11_PARAMETERS, opts)?;
    if internal.ill_conditioned {
        return Err(Error::IllConditioned {
            condition: internal.condition,
        });
    }
    let x = &internal.values;
    let (mut model, theta_ref) = unpack(x);
    model.theta = model.theta.rem_euclid(2.0 * PI);

    // diagonal map from internal to physical coordinates
    let jac = [width, model.q_int, model.q_ext, 1.0, 1.0, 1.0, 1.0 / span];
    let cov = DMatrix::from_fn(7, 7, |i, j| {
        let c = internal.covariance[(i, j)];
        if c == 0.0 {
            0.0
        } else {
            jac[i] * jac[j] * c
        }
    });
    let values = vec![
        model.f0,
        model.q_int,
        model.q_ext,
        model.phi,
        model.a,
        theta_ref,
        model.tau,
    ];
    let normalized: Vec<Complex64> = freqs
        .iter()
        .zip(data)
        .map(|(&f, &d)| d / model.background(f))
        .collect();
    let residual_re: Vec<f64> = freqs
        .iter()
        .zip(data)
        .map(|(&f, &d)| (d - s11_forward(&model, f)).re)
        .collect();
    Ok(S11Fit {
        model,
        fit: FitResult {
            values,
            covariance: cov,
            ..internal
        },
        f_ref,
        noise_sigma: init.noise,
        phase_winding: phase_winding(&normalized),
        durbin_watson: durbin_watson(&residual_re),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(f0: f64, ql: f64, widths: f64, n: usize) -> Vec<f64> {
        let half = widths * f0 / ql;
        (0..n).map(|i| f0 - half + 2.0 * half * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn critical_coupling_nulls() {
        let m = S11Model::ideal(5e9, 1e5, 1e5);
        assert!(s11_forward(&m, 5e9).norm() < 1e-15);
    }

    #[test]
    fn far_detuning_returns_background() {
        let m = S11Model {
            a: 0.8,
            theta: 0.3,
            tau: 2e-9,
            ..S11Model::ideal(5e9, 1e5, 2e4)
        };
        let f = 5.5e9;
        // residual resonant term is k/(2Q_l·Δf/f0) ≈ 5e-4 here
        let diff = s11_forward(&m, f) - m.background(f);
        assert!(diff.norm() < 1e-3);
        assert!((s11_forward(&m, 50e9) - m.background(50e9)).norm() < 1e-4);
    }

    #[test]
    fn overcoupled_winds_two_pi() {
        let m = S11Model::ideal(5e9, 1e5, 1e4);
        let f = grid(5e9, m.q_loaded(), 20.0, 801);
        let w = phase_winding(&s11_forward_many(&m, &f));
        assert!((w.abs() - 2.0 * PI).abs() < 0.1, "{w}");
        let under = S11Model::ideal(5e9, 1e4, 1e5);
        assert!(phase_winding(&s11_forward_many(&under, &f)).abs() < PI);
    }

    #[test]
    fn noiseless_recovery() {
        let truth = S11Model {
            phi: 0.1,
            a: 0.9,
            theta: 1.0,
            tau: 1e-9,
            ..S11Model::ideal(5e9, 1e5, 2e4)
        };
        let f = grid(5e9, truth.q_loaded(), 8.0, 401);
        let spec = ComplexSpectrum::new(f.clone(), s11_forward_many(&truth, &f)).unwrap();
        let r = fit_s11(&spec).unwrap();
        assert!((r.model.f0 / truth.f0 - 1.0).abs() < 1e-10);
        assert!((r.model.q_int / truth.q_int - 1.0).abs() < 1e-10, "{}", r.model.q_int);
        assert!((r.model.q_ext / truth.q_ext - 1.0).abs() < 1e-10);
        assert!((r.model.tau - truth.tau).abs() < 1e-15);
        assert!(r.fit.converged);
    }

    #[test]
    fn flat_trace_has_no_dip() {
        let f: Vec<f64> = (0..200).map(|i| 5e9 + i as f64 * 1e3).collect();
        let v = vec![Complex64::new(1.0, 0.0); 200];
        let spec = ComplexSpectrum::new(f, v).unwrap();
        assert!(matches!(fit_s11(&spec), Err(Error::NoDipFound { .. })));
    }

    #[test]
    fn too_short_spectrum() {
        let f: Vec<f64> = (0..10).map(|i| 5e9 + i as f64).collect();
        let v = vec![Complex64::new(1.0, 0.0); 10];
        assert!(fit_s11(&ComplexSpectrum::new(f, v).unwrap()).is_err());
    }

    #[test]
    fn mad_of_gaussian_like_set() {
        let v = [-1.0, -0.5, 0.0, 0.5, 1.0];
        assert!((mad_sigma(&v) - 1.482_602_218_505_602 * 0.5).abs() < 1e-15);
    }
}
