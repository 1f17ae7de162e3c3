use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),

    /// Requested point lies outside the validity domain of the conductivity
    /// model (T >= Tc or photon energy above the pair-breaking threshold).
    #[error("outside model validity: {0}")]
    OutOfModel(String),

    #[error("no n in [1, 1e6] reaches {target_hz:.6e} Hz within 20% (best {best_hz:.6e} Hz)")]
    NoGeometrySolution { target_hz: f64, best_hz: f64 },

    #[error("no resonance dip found (depth {depth:.3e} vs noise {noise:.3e})")]
    NoDipFound { depth: f64, noise: f64 },

    #[error("fit did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("fit is ill-conditioned (condition number {condition:.3e})")]
    IllConditioned { condition: f64 },

    #[error("initial parameter {index} = {value} outside bounds [{lower}, {upper}]")]
    BoundsViolation {
        index: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("insufficient span: {0}")]
    InsufficientSpan(String),

    /// Power sweep never leaves the low-power plateau; only a lower bound on
    /// the critical photon number is available.
    #[error("degenerate saturation: n_c > {nc_lower_bound:.3e}")]
    DegenerateSaturation { nc_lower_bound: f64 },

    #[error("need at least {needed} ESR features, got {got}")]
    InsufficientFeatures { needed: usize, got: usize },

    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
}
