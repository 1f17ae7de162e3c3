//! Forward simulation of reflection traces and sweeps from known parameters.
//!
//! Randomness comes from ChaCha8 seeded with `seed_from_u64(seed)`; each
//! product uses its own stream (`set_stream`): 0 for traces, 1/2/3 for
//! temperature/power/field sweeps. Gaussian deviates use the Box–Muller
//! transform on pairs of uniforms `u1 = 1 − U`, `u2 = U` with `U` in
//! [0, 1), yielding `√(−2 ln u1)·(cos 2πu2, sin 2πu2)`. Scalar draws use the
//! cosine branch only.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::f64::consts::PI;

use crate::bcs;
use crate::error::{Error, Result};
use crate::resfit::{s11_forward, S11Model};
use crate::sweeps::{photon_number_from, power_for_photons, zeeman_field, SweepKind, SweepRecord};
use crate::tls::{self, TlsParams};
use crate::types::{ComplexSpectrum, MaterialModel};

/// Phenomenological field response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FieldTruth {
    /// Quadratic frequency pull, Hz/T².
    pub c2: f64,
    /// Field where vortex losses set in, T.
    pub vortex_onset: f64,
    /// Beyond the onset `Q_int` is multiplied by `exp(−rate·(B − B_on))`
    /// with B in tesla.
    pub collapse_rate: f64,
    pub esr_g: f64,
    /// Fractional `Q_int` reduction at the dip centre; 0 disables the dip.
    pub esr_depth: f64,
    /// Full width at half maximum of the dip in `Q_int⁻¹`, T.
    pub esr_width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct NoiseSpec {
    /// Per-component standard deviation of complex trace noise.
    pub complex_sigma: f64,
    pub q_int_rel_sigma: f64,
    pub f0_rel_sigma: f64,
    /// Frequency noise proportional to the shift `|f0 − f0(0)|`.
    pub f0_shift_rel_sigma: f64,
}

/// Which TLS loss law generates `Q_int`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TlsLaw {
    /// Temperature- and power-dependent saturation form.
    Saturation,
    /// Power-law form with `(1 + n/n_c)^β`.
    PowerLaw,
    /// No TLS loss or frequency shift.
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GroundTruth {
    /// Reflection model; `f0` and `q_int` double as the zero-temperature,
    /// zero-field resonance for field sweeps.
    pub s11: S11Model,
    pub material: MaterialModel,
    pub tls: TlsParams,
    pub tls_law: TlsLaw,
    pub field: FieldTruth,
    pub noise: NoiseSpec,
    pub seed: u64,
    /// Fridge temperature for power and field sweeps, K.
    pub base_temperature: f64,
    /// Photon number held during temperature and field sweeps.
    pub base_photons: f64,
}

impl GroundTruth {
    /// An R3-like device: 5.95 GHz, α = 5.5%, Tc = 7.9 K, overcoupled.
    pub fn example(seed: u64) -> Self {
        Self {
            s11: S11Model::ideal(5.95e9, 1e5, 2e4),
            material: MaterialModel::niobium(7.9).with_alpha(0.055),
            tls: TlsParams {
                q_tls0: 2.3e5,
                n_c: 50.0,
                beta: 0.4,
                d: 150.0,
                beta1: 1.0,
                beta2: 0.5,
                q_other: 5e5,
            },
            tls_law: TlsLaw::Saturation,
            field: FieldTruth {
                c2: 2e6,
                vortex_onset: 0.9,
                collapse_rate: 20.0,
                esr_g: 1.97,
                esr_depth: 0.5,
                esr_width: 0.004,
            },
            noise: NoiseSpec::default(),
            seed,
            base_temperature: 0.06,
            base_photons: 1.0,
        }
    }
}

pub(crate) struct Gaussian {
    rng: ChaCha8Rng,
}

impl Gaussian {
    pub(crate) fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng }
    }

    pub(crate) fn pair(&mut self) -> (f64, f64) {
        let u1 = 1.0 - self.rng.random::<f64>();
        let u2 = self.rng.random::<f64>();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (2.0 * PI * u2).sin_cos();
        (r * c, r * s)
    }

    pub(crate) fn next(&mut self) -> f64 {
        self.pair().0
    }
}

const TRACE_STREAM: u64 = 0;

fn stream_for(kind: SweepKind) -> u64 {
    match kind {
        SweepKind::Temperature => 1,
        SweepKind::Power => 2,
        SweepKind::Field => 3,
    }
}

/// Reflection model on `grid` plus complex Gaussian noise.
pub fn synth_trace(gt: &GroundTruth, grid: &[f64]) -> Result<ComplexSpectrum> {
    gt.s11.validate()?;
    let mut g = Gaussian::new(gt.seed, TRACE_STREAM);
    let sigma = gt.noise.complex_sigma;
    let values = grid
        .iter()
        .map(|&f| {
            let clean = s11_forward(&gt.s11, f);
            if sigma > 0.0 {
                let (a, b) = g.pair();
                clean + Complex64::new(sigma * a, sigma * b)
            } else {
                clean
            }
        })
        .collect();
    ComplexSpectrum::new(grid.to_vec(), values)
}

/// Uniform frequency grid of `n` points spanning `widths` loaded linewidths
/// on either side of the resonance.
pub fn linewidth_grid(m: &S11Model, widths: f64, n: usize) -> Vec<f64> {
    let half = widths * m.f0 / m.q_loaded();
    (0..n)
        .map(|i| m.f0 - half + 2.0 * half * i as f64 / (n - 1) as f64)
        .collect()
}

/// Noiseless `(f0, Q_int)` at one temperature and photon number.
pub fn resonance_at(gt: &GroundTruth, n_phot: f64, t: f64, qp: bcs::QpShift) -> Result<(f64, f64)> {
    let f00 = gt.s11.f0;
    let (tls_inv, tls_shift) = match gt.tls_law {
        TlsLaw::Saturation => (
            1.0 / tls::tls_quality(&gt.tls, n_phot, f00, t)? + 1.0 / gt.tls.q_other,
            tls::tls_frequency_shift(gt.tls.q_tls0, f00, t)?,
        ),
        TlsLaw::PowerLaw => (
            tls::power_law_loss(&gt.tls, n_phot, f00, t)?,
            tls::tls_frequency_shift(gt.tls.q_tls0, f00, t)?,
        ),
        TlsLaw::Off => (1.0 / gt.tls.q_other, 0.0),
    };
    let q = 1.0 / (tls_inv + qp.dq_inv);
    Ok((f00 * (1.0 + tls_shift + qp.df_over_f), q))
}

fn field_point(gt: &GroundTruth, b: f64) -> (f64, f64) {
    let ft = &gt.field;
    let f00 = gt.s11.f0;
    let f0 = f00 - ft.c2 * b * b;
    let mut q_inv = 1.0 / gt.s11.q_int;
    if ft.esr_depth > 0.0 {
        // resonance field solves B = h·f0(B)/(g·μB)
        let mut b_esr = zeeman_field(f00, ft.esr_g);
        for _ in 0..50 {
            b_esr = zeeman_field(f00 - ft.c2 * b_esr * b_esr, ft.esr_g);
        }
        let amplitude = ft.esr_depth / (gt.s11.q_int * (1.0 - ft.esr_depth));
        let hw = 0.5 * ft.esr_width;
        q_inv += amplitude * hw * hw / ((b - b_esr).powi(2) + hw * hw);
    }
    let mut q = 1.0 / q_inv;
    if b > ft.vortex_onset {
        q *= (-ft.collapse_rate * (b - ft.vortex_onset)).exp();
    }
    (f0, q)
}

/// Generates one sweep. `grid` holds temperatures (K), photon numbers, or
/// fields (T) according to `kind`.
pub fn synth_sweep(gt: &GroundTruth, kind: SweepKind, grid: &[f64]) -> Result<Vec<SweepRecord>> {
    if grid.is_empty() {
        return Err(Error::InvalidSweep("empty sweep grid".into()));
    }
    let mut g = Gaussian::new(gt.seed, stream_for(kind));
    let noise = gt.noise;
    let q_ext = gt.s11.q_ext;
    let clean: Vec<(f64, f64, f64, f64, f64)> = match kind {
        SweepKind::Temperature => {
            let shifts = bcs::qp_shifts(&gt.material, gt.s11.f0, grid)?;
            grid.iter()
                .zip(shifts)
                .map(|(&t, s)| {
                    let (f0, q) = resonance_at(gt, gt.base_photons, t, s)?;
                    Ok((t, gt.base_photons, 0.0, f0, q))
                })
                .collect::<Result<_>>()?
        }
        SweepKind::Power => {
            let t = gt.base_temperature;
            let s = bcs::qp_shift(&gt.material, gt.s11.f0, t)?;
            grid.iter()
                .map(|&n| {
                    let (f0, q) = resonance_at(gt, n, t, s)?;
                    Ok((t, n, 0.0, f0, q))
                })
                .collect::<Result<_>>()?
        }
        SweepKind::Field => grid
            .iter()
            .map(|&b| {
                let (f0, q) = field_point(gt, b);
                (gt.base_temperature, gt.base_photons, b, f0, q)
            })
            .collect(),
    };
    Ok(clean
        .into_iter()
        .map(|(t, n, b, f0, q)| {
            let f_sigma = noise.f0_rel_sigma * f0 + noise.f0_shift_rel_sigma * (f0 - gt.s11.f0).abs();
            let f_noisy = f0 + f_sigma * g.next();
            let q_noisy = q * (1.0 + noise.q_int_rel_sigma * g.next());
            let ql = 1.0 / (1.0 / q + 1.0 / q_ext);
            let p_w = power_for_photons(n, f0, ql, q_ext);
            debug_assert!((photon_number_from(p_w, f0, ql, q_ext) / n - 1.0).abs() < 1e-9);
            SweepRecord {
                kind,
                temperature: t,
                drive_power_dbm: Some(10.0 * (p_w / 1e-3).log10()),
                photon_number: Some(n),
                field: b,
                f0: f_noisy,
                q_int: q_noisy,
                f0_sigma: f_sigma,
                q_int_sigma: noise.q_int_rel_sigma * q,
            }
        })
        .collect())
}
