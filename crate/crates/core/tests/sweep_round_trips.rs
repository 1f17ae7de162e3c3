mod common;

use common::{photon_grid, temperature_grid, with_sweep_noise};
use spiralres_core::sweeps::{
    fit_combined, fit_power_sweep_tls, fit_temperature_sweep_qp, SweepKind,
};
use spiralres_core::synth::{synth_sweep, GroundTruth, TlsLaw};
use spiralres_core::tls::{tls_quality, TlsParams};
use spiralres_core::{Error, MaterialModel};

const A: &str = "alpha_dimensionless";
const TC: &str = "tc_k";

fn rel(got: f64, want: f64) -> f64 {
    (got / want - 1.0).abs()
}

fn start_material() -> MaterialModel {
    MaterialModel::niobium(8.5).with_alpha(0.03)
}

fn tls_free(seed: u64) -> GroundTruth {
    let mut gt = GroundTruth::example(seed);
    gt.tls_law = TlsLaw::Off;
    gt
}

fn power_law_truth(seed: u64) -> GroundTruth {
    let mut gt = GroundTruth::example(seed);
    gt.tls_law = TlsLaw::PowerLaw;
    gt
}

fn perturbed(t: &TlsParams) -> TlsParams {
    TlsParams {
        q_tls0: 1.5 * t.q_tls0,
        d: 2.0 * t.d,
        beta1: 0.8,
        beta2: 0.7,
        q_other: 0.8 * t.q_other,
        ..*t
    }
}

#[test]
fn temperature_fit_is_exact_without_noise() {
    let gt = tls_free(0);
    let recs = synth_sweep(&gt, SweepKind::Temperature, &temperature_grid()).unwrap();
    let fit = fit_temperature_sweep_qp(&recs, &start_material()).unwrap();
    for f in [&fit.frequency, &fit.quality] {
        assert!(rel(f.value(A), 0.055) < 1e-6, "{:?}", f.values);
        assert!(rel(f.value(TC), 7.9) < 1e-6, "{:?}", f.values);
    }
    assert!(rel(fit.frequency.value("f0_zero_hz"), 5.95e9) < 1e-12);
    assert!(rel(fit.quality.value("q_int_zero_dimensionless"), 5e5) < 1e-6);
}

#[test]
fn temperature_fit_tolerates_two_percent_noise() {
    for seed in 0..10 {
        let gt = with_sweep_noise(tls_free(seed));
        let recs = synth_sweep(&gt, SweepKind::Temperature, &temperature_grid()).unwrap();
        let fit = fit_temperature_sweep_qp(&recs, &start_material()).unwrap();
        for f in [&fit.frequency, &fit.quality] {
            assert!(rel(f.value(A), 0.055) < 0.15, "seed {seed}: {:?}", f.values);
            assert!(rel(f.value(TC), 7.9) < 0.05, "seed {seed}: {:?}", f.values);
        }
    }
}

#[test]
fn zero_kinetic_fraction_is_consistent_with_zero() {
    for seed in 0..5 {
        let mut gt = with_sweep_noise(tls_free(seed));
        gt.material.alpha = 0.0;
        gt.noise.f0_rel_sigma = 1e-6;
        let recs = synth_sweep(&gt, SweepKind::Temperature, &temperature_grid()).unwrap();
        let fit = fit_temperature_sweep_qp(&recs, &start_material()).unwrap();
        for f in [&fit.frequency, &fit.quality] {
            let (a, s) = (f.value(A), f.sigma(A));
            assert!(a <= 2.0 * s, "seed {seed}: α = {a} ± {s}");
        }
    }
}

#[test]
fn temperature_sweep_needs_a_wide_span() {
    let gt = tls_free(0);
    let grid: Vec<f64> = (0..12).map(|i| 0.05 + 0.05 * i as f64).collect();
    let recs = synth_sweep(&gt, SweepKind::Temperature, &grid).unwrap();
    let err = fit_temperature_sweep_qp(&recs, &start_material()).unwrap_err();
    assert!(matches!(err, Error::InsufficientSpan(_)), "{err:?}");
}

#[test]
fn power_fit_is_exact_without_noise() {
    let gt = power_law_truth(0);
    let recs = synth_sweep(&gt, SweepKind::Power, &photon_grid(5.0, 51)).unwrap();
    let p = fit_power_sweep_tls(&recs, None).unwrap().params;
    let t = gt.tls;
    for (got, want) in [(p.q_tls0, t.q_tls0), (p.n_c, t.n_c), (p.beta, t.beta), (p.q_other, t.q_other)] {
        assert!(rel(got, want) < 1e-6, "{got} vs {want}");
    }
}

#[test]
fn power_fit_tolerates_two_percent_noise() {
    let runs = 200;
    let mut good = 0;
    for seed in 0..runs {
        let gt = with_sweep_noise(power_law_truth(seed));
        let recs = synth_sweep(&gt, SweepKind::Power, &photon_grid(5.0, 401)).unwrap();
        let p = fit_power_sweep_tls(&recs, None).unwrap().params;
        let t = gt.tls;
        let worst = [(p.q_tls0, t.q_tls0), (p.n_c, t.n_c), (p.beta, t.beta), (p.q_other, t.q_other)]
            .iter()
            .map(|&(g, w)| rel(g, w))
            .fold(0.0, f64::max);
        good += (worst < 0.10) as usize;
    }
    assert!(good * 100 >= 95 * runs as usize, "{good}/{runs} within 10%");
}

#[test]
fn flat_power_sweep_is_degenerate() {
    let mut gt = with_sweep_noise(GroundTruth::example(2));
    gt.tls_law = TlsLaw::Off;
    let recs = synth_sweep(&gt, SweepKind::Power, &photon_grid(5.0, 51)).unwrap();
    let err = fit_power_sweep_tls(&recs, None).unwrap_err();
    assert!(matches!(err, Error::DegenerateSaturation { .. }), "{err:?}");
}

#[test]
fn power_sweep_needs_three_decades() {
    let gt = power_law_truth(0);
    let recs = synth_sweep(&gt, SweepKind::Power, &photon_grid(2.0, 41)).unwrap();
    let err = fit_power_sweep_tls(&recs, None).unwrap_err();
    assert!(matches!(err, Error::InsufficientSpan(_)), "{err:?}");
}

#[test]
fn combined_fit_is_exact_without_noise() {
    let gt = GroundTruth::example(0);
    let tr = synth_sweep(&gt, SweepKind::Temperature, &temperature_grid()).unwrap();
    let pr = synth_sweep(&gt, SweepKind::Power, &photon_grid(5.0, 26)).unwrap();
    let c = fit_combined(&tr, &pr, &start_material(), &perturbed(&gt.tls)).unwrap();
    let q = &c.quality;
    let t = gt.tls;
    for (name, want) in [
        ("q_tls0_dimensionless", t.q_tls0),
        (A, 0.055),
        (TC, 7.9),
        ("d_dimensionless", t.d),
        ("beta1_dimensionless", t.beta1),
        ("beta2_dimensionless", t.beta2),
        ("q_other_dimensionless", t.q_other),
    ] {
        assert!(rel(q.value(name), want) < 1e-5, "{name}: {} vs {want}", q.value(name));
    }
    for (name, want) in [("q_tls0_dimensionless", t.q_tls0), (A, 0.055), (TC, 7.9)] {
        assert!(rel(c.frequency.value(name), want) < 1e-5, "{name}: {}", c.frequency.value(name));
    }
}

#[test]
fn combined_fit_tolerates_two_percent_noise() {
    for seed in 0..8 {
        let mut gt = with_sweep_noise(GroundTruth::example(seed));
        gt.tls.q_tls0 = 3.6e4;
        let tr = synth_sweep(&gt, SweepKind::Temperature, &temperature_grid()).unwrap();
        let pr = synth_sweep(&gt, SweepKind::Power, &photon_grid(5.0, 26)).unwrap();
        let c = fit_combined(&tr, &pr, &start_material(), &perturbed(&gt.tls)).unwrap();
        for f in [&c.frequency, &c.quality] {
            assert!(rel(f.value("q_tls0_dimensionless"), 3.6e4) < 0.20, "seed {seed}: {:?}", f.values);
            assert!(rel(f.value(A), 0.055) < 0.20, "seed {seed}: {:?}", f.values);
            assert!(rel(f.value(TC), 7.9) < 0.05, "seed {seed}: {:?}", f.values);
        }
    }
}

#[test]
fn tls_free_combined_fit_matches_quasiparticle_fit() {
    for seed in 0..5 {
        let gt = with_sweep_noise(tls_free(seed));
        let tr = synth_sweep(&gt, SweepKind::Temperature, &temperature_grid()).unwrap();
        let pr = synth_sweep(&gt, SweepKind::Power, &photon_grid(5.0, 26)).unwrap();
        let qp = fit_temperature_sweep_qp(&tr, &start_material()).unwrap();
        let c = fit_combined(&tr, &pr, &start_material(), &GroundTruth::example(0).tls).unwrap();
        let d = (c.quality.value(A) - qp.quality.value(A)).abs();
        assert!(d < qp.quality.sigma(A), "seed {seed}: Δα = {d}, σ = {}", qp.quality.sigma(A));
        // the TLS term may vanish through Q_TLS,0 or through saturation; either
        // way its share of the loss must stay at the level of the point noise
        let q = &c.quality;
        let tp = TlsParams {
            q_tls0: q.value("q_tls0_dimensionless"),
            d: q.value("d_dimensionless"),
            beta1: q.value("beta1_dimensionless"),
            beta2: q.value("beta2_dimensionless"),
            q_other: q.value("q_other_dimensionless"),
            ..gt.tls
        };
        for r in tr.iter().chain(&pr) {
            let share = r.q_int / tls_quality(&tp, r.photon_number.unwrap(), 5.95e9, r.temperature).unwrap();
            assert!(share < 0.05, "seed {seed}: TLS share {share} at {} K", r.temperature);
        }
    }
}
