//! Design equations, loss models and fitting machinery for high-impedance
//! superconducting spiral resonators.

pub mod bcs;
pub mod constants;
pub mod design;
pub mod digamma;
pub mod error;
pub mod lm;
pub mod quad;
pub mod resfit;
pub mod sweeps;
pub mod synth;
pub mod tls;
pub mod types;

pub use error::{Error, Result};
pub use types::{validate_geometry, ComplexSpectrum, FitResult, MaterialModel, SpiralGeometry};
