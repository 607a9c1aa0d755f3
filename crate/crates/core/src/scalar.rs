//! Floating-point scalar abstraction shared by the criteria and the models.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar used for log-likelihoods and probabilities (`f32` or `f64`).
///
/// Counts stay integral everywhere; only derived quantities go through this trait.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` constant. Panics only on values the type cannot hold.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("constant representable in scalar type")
    }

    fn count(n: u64) -> Self {
        Self::from_u64(n).expect("count representable in scalar type")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Smallest criterion gain treated as a real improvement at magnitude `scale`.
    fn gain_tolerance(scale: Self) -> Self {
        let rel = Self::of(1e-9).max(Self::epsilon() * Self::of(16.0));
        rel * (Self::one() + scale.abs())
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `n * ln(n)` with `0 * ln 0 = 0`.
pub fn n_log_n<F: Real>(n: u64) -> F {
    if n == 0 {
        F::zero()
    } else {
        let x = F::count(n);
        x * x.ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn n_log_n_zero_is_zero() {
        assert_eq!(n_log_n::<f64>(0), 0.0);
        assert_eq!(n_log_n::<f64>(1), 0.0);
        assert!((n_log_n::<f64>(3) - 3.0 * 3f64.ln()).abs() < 1e-15);
        assert!((n_log_n::<f32>(3) - 3.0 * 3f32.ln()).abs() < 1e-6);
    }

    #[test]
    fn tolerance_scales_with_magnitude() {
        assert!(f64::gain_tolerance(1e6) > f64::gain_tolerance(1.0));
        assert!(f32::gain_tolerance(0.0) >= 16.0 * f32::EPSILON);
    }
}
