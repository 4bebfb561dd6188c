//! Scalar abstraction shared by the numerical core and the agents.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point types the tape, parameter stores and agents can run on.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Copy + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` literal; every supported type can represent it (possibly rounded).
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
