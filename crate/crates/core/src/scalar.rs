use num_traits::{FromPrimitive, ToPrimitive};

/// Scalar type the library is generic over: `f32` or `f64`.
///
/// `nalgebra::RealField` supplies the field operations and elementary
/// functions, `FromPrimitive` the conversions from literal constants.
pub trait Real: nalgebra::RealField + FromPrimitive + ToPrimitive + Copy {
    /// Converts an `f64` constant into the scalar type.
    fn scalar(value: f64) -> Self {
        Self::from_f64(value).expect("constant not representable in scalar type")
    }

    /// Smallest magnitude treated as a nonzero disagreement; below this the
    /// log-linear rate fit would only see floating-point noise.
    fn underflow_floor() -> Self;
}

impl Real for f32 {
    fn underflow_floor() -> Self {
        1e-30
    }
}

impl Real for f64 {
    fn underflow_floor() -> Self {
        1e-280
    }
}
