//! CODATA 2018 physical constants (SI).

/// Vacuum permeability, H/m.
pub const MU0: f64 = 1.256_637_062_12e-6;
/// Speed of light in vacuum, m/s (exact).
pub const C0: f64 = 299_792_458.0;
/// Boltzmann constant, J/K (exact).
pub const KB: f64 = 1.380_649e-23;
/// Planck constant, J·s (exact).
pub const H: f64 = 6.626_070_15e-34;
/// Reduced Planck constant, J·s.
pub const HBAR: f64 = H / (2.0 * std::f64::consts::PI);
/// Bohr magneton, J/T.
pub const MU_B: f64 = 9.274_010_078_3e-24;
/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Relative permittivity of intrinsic silicon at cryogenic temperature.
pub const EPS_SILICON: f64 = 11.7;

/// Grouped view of the constants for callers that want to pass them around
/// as a value (reports, debugging dumps).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct PhysicalConstants {
    pub mu0: f64,
    pub c0: f64,
    pub kb: f64,
    pub h: f64,
    pub hbar: f64,
    pub mu_b: f64,
    pub euler_gamma: f64,
}

pub const CODATA_2018: PhysicalConstants = PhysicalConstants {
    mu0: MU0,
    c0: C0,
    kb: KB,
    h: H,
    hbar: HBAR,
    mu_b: MU_B,
    euler_gamma: EULER_GAMMA,
};
