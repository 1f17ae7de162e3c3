//! Complex digamma function for `Re z > 0`.
//!
//! Arguments with `|z| < 10` are shifted upward with `ψ(z) = ψ(z+1) − 1/z`
//! and the asymptotic series
//! `ψ(w) − ln w = −1/(2w) − Σ B₂ₖ/(2k·w²ᵏ)` is summed to eight terms.
//! Working with `ψ(z) − ln z` avoids the cancellation that appears when the
//! TLS bracket `Re ψ(½ + iy) − ln y` is evaluated at large `y`.

use num_complex::Complex64;

// B_{2k} / (2k), k = 1..=8
const ASYMPTOTIC: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
    -3617.0 / 8160.0,
];

const SHIFT_RADIUS: f64 = 10.0;

fn asymptotic_minus_log(w: Complex64) -> Complex64 {
    let inv = w.inv();
    let inv2 = inv * inv;
    let mut term = inv2;
    let mut sum = Complex64::new(0.0, 0.0);
    for c in ASYMPTOTIC {
        sum += term * c;
        term *= inv2;
    }
    -0.5 * inv - sum
}

/// `ψ(z) − ln z` for `Re z > 0`.
pub fn digamma_minus_log(z: Complex64) -> Complex64 {
    debug_assert!(z.re > 0.0, "digamma_minus_log requires Re z > 0");
    let mut w = z;
    let mut recurrence = Complex64::new(0.0, 0.0);
    while w.norm() < SHIFT_RADIUS {
        recurrence += w.inv();
        w += 1.0;
    }
    if w == z {
        asymptotic_minus_log(z)
    } else {
        asymptotic_minus_log(w) + w.ln() - z.ln() - recurrence
    }
}

/// Complex digamma `ψ(z)` for `Re z > 0`.
pub fn digamma(z: Complex64) -> Complex64 {
    digamma_minus_log(z) + z.ln()
}

/// `Re ψ(½ + iy)`.
pub fn re_digamma_half(y: f64) -> f64 {
    digamma(Complex64::new(0.5, y)).re
}

/// `Re ψ(½ + iy) − ln y` for `y > 0`. Positive for small `y`, it changes
/// sign near `y ≈ 0.179` and approaches zero from below as `−1/(24y²)`.
pub fn tls_bracket(y: f64) -> f64 {
    let z = Complex64::new(0.5, y);
    // Re ln(½ + iy) − ln y = ½·ln(1 + 1/(4y²))
    digamma_minus_log(z).re + 0.5 * (0.25 / (y * y)).ln_1p()
}
