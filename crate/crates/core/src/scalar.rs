use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar used by the exact engine.
///
/// Implemented for `f32` and `f64`. Environment rates are stored as `f64`
/// and converted on entry with [`Scalar::of`].
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` constant. Finite inputs always succeed for the
    /// implementing types.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 converts")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Tolerance below which a total rate counts as zero.
    fn rate_epsilon() -> Self;
}

impl Scalar for f32 {
    fn rate_epsilon() -> Self {
        1e-6
    }
}

impl Scalar for f64 {
    fn rate_epsilon() -> Self {
        1e-14
    }
}
