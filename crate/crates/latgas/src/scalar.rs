//! Field abstraction so the exact checks can run in rationals.

use num_rational::Ratio;
use num_traits::{Float, One, Zero};
use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

pub type Rational = Ratio<i128>;

pub trait Scalar:
    Clone
    + Debug
    + PartialEq
    + Send
    + Sync
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + 'static
{
    /// Exact for dyadic inputs in the rational implementation.
    fn from_f64(x: f64) -> Self;
    fn to_f64(&self) -> f64;
    fn from_int(n: i64) -> Self;

    fn is_negligible(&self, tol: f64) -> bool {
        self.to_f64().abs() <= tol
    }
}

impl Scalar for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn from_int(n: i64) -> Self {
        n as f64
    }
}

impl Scalar for Rational {
    fn from_f64(x: f64) -> Self {
        assert!(x.is_finite(), "non-finite value {x}");
        if x == 0.0 {
            return Rational::zero();
        }
        let (mant, exp, sign) = Float::integer_decode(x);
        let mant = mant as i128 * sign as i128;
        if exp >= 0 {
            assert!(exp < 64, "value {x} too large for an exact rational");
            Rational::from_integer(mant << exp)
        } else {
            let e = (-exp) as u32;
            // strip common powers of two first so the denominator fits
            let tz = (mant.unsigned_abs().trailing_zeros()).min(e);
            let (m, e) = (mant >> tz, e - tz);
            assert!(e < 126, "value {x} needs a denominator beyond i128");
            Rational::new(m, 1i128 << e)
        }
    }
    fn to_f64(&self) -> f64 {
        *self.numer() as f64 / *self.denom() as f64
    }
    fn from_int(n: i64) -> Self {
        Rational::from_integer(n as i128)
    }
    fn is_negligible(&self, _tol: f64) -> bool {
        self.is_zero()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dyadic_conversion_is_exact() {
        assert_eq!(Rational::from_f64(1.5), Rational::new(3, 2));
        assert_eq!(Rational::from_f64(-0.25), Rational::new(-1, 4));
        assert_eq!(Rational::from_f64(3.0), Rational::from_integer(3));
        assert_eq!(Rational::from_f64(0.0), Rational::zero());
        let x = 0.1f64;
        assert_eq!(Rational::from_f64(x).to_f64(), x);
    }
}
