//! Claw-free functions, a computational Bell-test verifier and the tooling around it.

pub mod bits;
pub mod circuits;
pub mod extractor;
pub mod postselect;
pub mod protocol;
pub mod provers;
pub mod scalar;
mod serde_dec;
pub mod tcf;
pub mod wire;

pub use bits::BitString;
pub use scalar::Real;

/// Angle model in double precision.
pub type AngleModelF64 = provers::AngleModel<f64>;
/// Angle model in single precision.
pub type AngleModelF32 = provers::AngleModel<f32>;
