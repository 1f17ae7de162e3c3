#![allow(dead_code)]

use spiralres_core::resfit::{fit_s11, S11Model};
use spiralres_core::synth::{linewidth_grid, synth_trace, GroundTruth};

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Overcoupled 5 GHz resonance on a mismatched, delayed background.
pub fn s11_truth(seed: u64, sigma: f64) -> GroundTruth {
    let mut gt = GroundTruth::example(seed);
    gt.s11 = S11Model {
        phi: 0.15,
        a: 0.8,
        theta: 1.0,
        tau: 3e-9,
        ..S11Model::ideal(5e9, 1e5, 2e4)
    };
    gt.noise.complex_sigma = sigma;
    gt
}

pub struct S11Ensemble {
    pub f0_errors: Vec<f64>,
    pub q_int_rel_errors: Vec<f64>,
    pub full_windings: usize,
    pub durbin_watson: Vec<f64>,
    pub failures: usize,
}

pub fn s11_ensemble(realizations: u64, sigma: f64) -> S11Ensemble {
    let mut e = S11Ensemble {
        f0_errors: vec![],
        q_int_rel_errors: vec![],
        full_windings: 0,
        durbin_watson: vec![],
        failures: 0,
    };
    for seed in 0..realizations {
        let gt = s11_truth(seed, sigma);
        let grid = linewidth_grid(&gt.s11, 4.0, 2001);
        let spec = synth_trace(&gt, &grid).unwrap();
        match fit_s11(&spec) {
            Ok(fit) => {
                e.f0_errors.push((fit.model.f0 - gt.s11.f0).abs());
                e.q_int_rel_errors.push((fit.model.q_int / gt.s11.q_int - 1.0).abs());
                e.full_windings += fit.winds_full_circle() as usize;
                e.durbin_watson.push(fit.durbin_watson);
            }
            Err(_) => e.failures += 1,
        }
    }
    e
}

/// 30 temperatures: log-spaced through the TLS region, then linear up to
/// 4.5 K.
pub fn temperature_grid() -> Vec<f64> {
    let mut t: Vec<f64> = (0..10).map(|i| 0.03 * (0.5f64 / 0.03).powf(i as f64 / 9.0)).collect();
    t.extend((1..=20).map(|i| 0.5 + i as f64 * 0.2));
    t
}

/// `n` photon numbers log-spaced over `decades` starting at one photon.
pub fn photon_grid(decades: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| 10f64.powf(decades * i as f64 / (n - 1) as f64)).collect()
}

pub fn field_grid(max: f64, step: f64) -> Vec<f64> {
    let n = (max / step).round() as usize;
    (0..=n).map(|i| i as f64 * step).collect()
}

/// Sweep noise at the 2% level: `Q_int` relative, and `f0` relative to
/// its own shift on top of a 0.1 ppm floor.
pub fn with_sweep_noise(mut gt: GroundTruth) -> GroundTruth {
    gt.noise.q_int_rel_sigma = 0.02;
    gt.noise.f0_shift_rel_sigma = 0.02;
    gt.noise.f0_rel_sigma = 1e-7;
    gt
}
