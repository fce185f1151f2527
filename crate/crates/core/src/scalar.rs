//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, NumCast, One, Zero};

/// Real scalar usable as both domain point and codomain coordinate.
pub trait Scalar:
    Float + FromPrimitive + NumCast + Debug + Display + Send + Sync + 'static
{
    /// Bit pattern that identifies the value exactly; used as a memo key.
    fn key_bits(self) -> (u64, u64);

    fn of(v: f64) -> Self {
        <Self as NumCast>::from(v).expect("f64 is representable in every Scalar")
    }

    fn lossy_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn of_int(v: i64) -> Self {
        <Self as NumCast>::from(v).expect("small integers are representable")
    }

    /// `|base|^e` with the convention `0^e = 0` for `e > 0` and `z^0 = 1`.
    fn pow_abs(self, e: Self) -> Self {
        let b = self.abs();
        if e == Self::zero() {
            Self::one()
        } else if b == Self::zero() {
            Self::zero()
        } else if e == Self::one() {
            b
        } else {
            b.powf(e)
        }
    }

    /// Approximate unit roundoff, used to size floating-point slack.
    fn roundoff() -> Self {
        Self::epsilon()
    }
}

impl Scalar for f64 {
    fn key_bits(self) -> (u64, u64) {
        // +0 and -0 must share a cache slot
        let v = if self == 0.0 { 0.0 } else { self };
        (v.to_bits(), 0)
    }
}

impl Scalar for f32 {
    fn key_bits(self) -> (u64, u64) {
        let v = if self == 0.0 { 0.0 } else { self };
        (<u64 as From<u32>>::from(v.to_bits()), 0)
    }
}

impl Scalar for twofloat::TwoFloat {
    fn key_bits(self) -> (u64, u64) {
        let (hi, lo) = (self.hi(), self.lo());
        let hi = if hi == 0.0 { 0.0 } else { hi };
        let lo = if lo == 0.0 { 0.0 } else { lo };
        (hi.to_bits(), lo.to_bits())
    }

    fn lossy_f64(self) -> f64 {
        self.hi() + self.lo()
    }

    /// The crate's `powf` goes through its own exp/ln and loses up to ~1e-11
    /// relative. Integer exponents are multiplied out; others use f64 `powf`.
    fn pow_abs(self, e: Self) -> Self {
        let b = self.abs();
        if e == Self::zero() {
            return Self::one();
        }
        if b == Self::zero() {
            return Self::zero();
        }
        if e == e.trunc() && e.abs() <= <Self as From<f64>>::from(64.0) {
            let n = e.abs().lossy_f64() as u32;
            let mut acc = Self::one();
            for _ in 0..n {
                acc *= b;
            }
            return if e < Self::zero() { acc.recip() } else { acc };
        }
        <Self as From<f64>>::from(b.lossy_f64().powf(e.lossy_f64()))
    }

    fn roundoff() -> Self {
        // 2^-104; the crate's EPSILON is the f64 one
        <Self as From<f64>>::from(2f64.powi(-104))
    }
}
