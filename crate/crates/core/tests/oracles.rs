//! Library routines checked against slow, independently written
//! reference evaluations.

use num_complex::Complex64;
use spiralres_core::bcs::{gap_at_temperature, mattis_bardeen};
use spiralres_core::constants::{EULER_GAMMA, H, HBAR, KB};
use spiralres_core::digamma::{digamma, re_digamma_half, tls_bracket};
use spiralres_core::MaterialModel;
use std::f64::consts::{LN_2, PI};

fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// σ1/σn with `E = Δ·cosh u`, composite Simpson.
fn sigma1_brute(d: f64, w: f64, t: f64) -> f64 {
    let fermi = |e: f64| 1.0 / ((e / t).exp() + 1.0);
    let u_max = ((d + 60.0 * t) / d).acosh();
    let integrand = |u: f64| {
        let e = d * u.cosh();
        let num = e * e + d * d + w * e;
        (fermi(e) - fermi(e + w)) * num / ((e + w).powi(2) - d * d).sqrt()
    };
    2.0 / w * simpson(integrand, 0.0, u_max, 400_000)
}

/// σ2/σn by Gauss–Chebyshev quadrature, whose weight absorbs both
/// endpoint singularities of the window `[Δ − ħω, Δ]`.
fn sigma2_brute(d: f64, w: f64, t: f64) -> f64 {
    let (a, b) = (d - w, d);
    let n = 20_000;
    let mut s = 0.0;
    for k in 1..=n {
        let x = ((2 * k - 1) as f64 * PI / (2 * n) as f64).cos();
        let e = 0.5 * (a + b) + 0.5 * (b - a) * x;
        let num = e * e + d * d + w * e;
        s += (0.5 * (e + w) / t).tanh() * num / ((d + e) * (e + w + d)).sqrt();
    }
    s * PI / n as f64 / w
}

#[test]
fn mattis_bardeen_matches_brute_force() {
    let m = MaterialModel::niobium(8.0);
    for &(t, f) in &[(2.0, 5e9), (1.0, 5e9), (4.0, 6e9), (0.5, 4e9)] {
        let p = mattis_bardeen(&m, t, f).unwrap();
        let d = gap_at_temperature(&m, t) / KB;
        let w = H * f / KB;
        let s1 = sigma1_brute(d, w, t);
        let s2 = sigma2_brute(d, w, t);
        assert!((p.sigma1 / s1 - 1.0).abs() < 1e-7, "σ1 at {t} K: {} vs {s1}", p.sigma1);
        assert!((p.sigma2 / s2 - 1.0).abs() < 1e-9, "σ2 at {t} K: {} vs {s2}", p.sigma2);
    }
}

#[test]
fn sigma2_zero_temperature_limit() {
    let m = MaterialModel::niobium(8.0);
    let f = 5e9;
    let p = mattis_bardeen(&m, 0.02, f).unwrap();
    let analytic = PI * m.gap0() / (HBAR * 2.0 * PI * f);
    assert!((p.sigma2 / analytic - 1.0).abs() < 5e-3, "{} vs {analytic}", p.sigma2);
    assert!(p.sigma1 < 1e-12 * p.sigma2);
}

/// Δ(T) from the weak-coupling BCS gap equation written in its
/// cutoff-free form `∫₀^∞ [tanh(E/2T)/E − 1/√(ξ² + Δ0²)] dξ = 0`.
fn bcs_gap(delta0: f64, t: f64) -> f64 {
    let residual = |delta: f64| {
        let g = |xi: f64| {
            let e = (xi * xi + delta * delta).sqrt();
            (0.5 * e / t).tanh() / e - 1.0 / (xi * xi + delta0 * delta0).sqrt()
        };
        // ξ = Δ0·sinh v maps the slowly decaying tail onto a short interval
        simpson(|v| g(delta0 * v.sinh()) * delta0 * v.cosh(), 0.0, 30.0, 60_000)
    };
    let (mut lo, mut hi) = (1e-9 * delta0, delta0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if residual(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn gap_interpolation_tracks_bcs_gap_equation() {
    let m = MaterialModel::niobium(8.0);
    let d0 = m.gap0() / KB;
    for &t in &[2.0, 4.0, 6.0] {
        let exact = bcs_gap(d0, t) / d0;
        let interp = gap_at_temperature(&m, t) / m.gap0();
        assert!((interp / exact - 1.0).abs() < 0.02, "{t} K: {interp} vs {exact}");
    }
}

/// `ψ(z) = −γ + Σₖ (1/(k+1) − 1/(k+z))` with an Euler–Maclaurin tail.
fn digamma_series(z: Complex64) -> Complex64 {
    let n = 1_000_000u32;
    let term = |k: f64| 1.0 / (k + 1.0) - (z + k).inv();
    let mut sum = Complex64::new(0.0, 0.0);
    let mut c = Complex64::new(0.0, 0.0);
    for k in 0..n {
        let y = term(k as f64) - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    let nf = n as f64;
    let integral = ((z + nf) / (nf + 1.0)).ln();
    let derivative = -1.0 / (nf + 1.0).powi(2) + (z + nf).powi(2).inv();
    let tail = integral + 0.5 * term(nf) - derivative / 12.0;
    -EULER_GAMMA + sum + tail
}

#[test]
fn digamma_matches_series() {
    for z in [Complex64::new(0.5, 1.0), Complex64::new(0.5, 0.1), Complex64::new(2.3, -4.0)] {
        let d = digamma(z) - digamma_series(z);
        assert!(d.norm() < 1e-12, "{z}: {}", d.norm());
    }
    assert!((re_digamma_half(0.0) + EULER_GAMMA + 2.0 * LN_2).abs() < 1e-12);
}

#[test]
fn bracket_at_large_argument_follows_asymptote() {
    for y in [30.0, 100.0, 1000.0] {
        let expected = -1.0 / (24.0 * y * y);
        assert!((tls_bracket(y) / expected - 1.0).abs() < 1e-2);
    }
}
