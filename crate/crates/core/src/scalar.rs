use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point element type accepted by the numerical modules.
///
/// Implemented for `f32` and `f64`. The `ryu::Float` bound gives every
/// scalar a shortest round-trip decimal rendering, which the CSV and SVG
/// writers rely on for byte-stable output.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + ryu::Float + 'static
{
    /// Converts an `f64` literal, panicking only for values the type cannot hold at all.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Shortest decimal string that parses back to the same value.
    fn shortest(self) -> String {
        let mut buf = ryu::Buffer::new();
        buf.format(self).to_owned()
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
