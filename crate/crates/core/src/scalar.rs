//! Floating-point abstraction used by the angle and Born-probability code.

use num_traits::{Float, FloatConst, FromPrimitive};

/// Real scalar usable by the measurement-angle model.
pub trait Real: Float + FloatConst + FromPrimitive + core::fmt::Debug + Send + Sync + 'static {
    /// Converts an `f64` literal, panicking only for types that cannot represent it.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }
}

impl Real for f32 {}
impl Real for f64 {}
