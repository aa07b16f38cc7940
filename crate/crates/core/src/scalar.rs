use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point type usable as a probability: `f32` or `f64`.
pub trait Probability:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts a literal constant. Panics only for values the type cannot represent.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("constant representable in probability type")
    }

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in probability type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Probability for f32 {}
impl Probability for f64 {}
