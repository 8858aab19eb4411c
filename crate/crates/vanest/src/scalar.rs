//! Scalar abstraction shared by the tensor, polynomial and complex types.
//!
//! Exact work (structure constants, differentials, rank computations) runs
//! over [`Rat`], a thin wrapper around an arbitrary-precision rational.
//! Group-side evaluation, which has to go through `exp`/`sin`/`cos`, runs
//! over `f64`. Code that only needs ring operations is generic over
//! [`Scalar`] so both backends share one implementation.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::ToPrimitive;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

/// Ring operations needed by the generic tensor/form code.
///
/// `approx_f64` is only used for reporting residual magnitudes and for
/// pruning floating-point noise; exact code paths never branch on it.
pub trait Scalar:
    Clone
    + PartialEq
    + fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + AddAssign
{
    fn zero() -> Self;
    fn one() -> Self;
    fn from_int(n: i64) -> Self;
    /// Exact fraction `n/d`; panics if `d == 0`.
    fn from_ratio(n: i64, d: i64) -> Self;
    /// Conversion from an exact rational; lossless for [`Rat`], rounded
    /// for `f64`.
    fn from_rat(r: &Rat) -> Self;
    fn is_zero(&self) -> bool;
    fn approx_f64(&self) -> f64;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_int(n: i64) -> Self {
        n as f64
    }
    fn from_ratio(n: i64, d: i64) -> Self {
        assert!(d != 0, "zero denominator");
        n as f64 / d as f64
    }
    fn from_rat(r: &Rat) -> Self {
        r.approx_f64()
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn approx_f64(&self) -> f64 {
        *self
    }
}

/// Exact rational number.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rat(pub BigRational);

impl Rat {
    pub fn new(n: i64, d: i64) -> Self {
        assert!(d != 0, "zero denominator");
        Rat(BigRational::new(BigInt::from(n), BigInt::from(d)))
    }

    pub fn int(n: i64) -> Self {
        Rat(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }
}

impl fmt::Debug for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Add for Rat {
    type Output = Rat;
    fn add(self, rhs: Rat) -> Rat {
        Rat(self.0 + rhs.0)
    }
}

impl Sub for Rat {
    type Output = Rat;
    fn sub(self, rhs: Rat) -> Rat {
        Rat(self.0 - rhs.0)
    }
}

impl Mul for Rat {
    type Output = Rat;
    fn mul(self, rhs: Rat) -> Rat {
        Rat(self.0 * rhs.0)
    }
}

impl Neg for Rat {
    type Output = Rat;
    fn neg(self) -> Rat {
        Rat(-self.0)
    }
}

impl AddAssign for Rat {
    fn add_assign(&mut self, rhs: Rat) {
        let lhs = std::mem::replace(self, Rat::int(0));
        *self = lhs + rhs;
    }
}

impl Scalar for Rat {
    fn zero() -> Self {
        Rat::int(0)
    }
    fn one() -> Self {
        Rat::int(1)
    }
    fn from_int(n: i64) -> Self {
        Rat::int(n)
    }
    fn from_ratio(n: i64, d: i64) -> Self {
        Rat::new(n, d)
    }
    fn from_rat(r: &Rat) -> Self {
        r.clone()
    }
    fn is_zero(&self) -> bool {
        self.0.numer().sign() == num::bigint::Sign::NoSign
    }
    fn approx_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }
}

impl Rat {
    /// Exact division; panics on division by zero.
    pub fn div(&self, rhs: &Rat) -> Rat {
        assert!(!rhs.is_zero(), "division by zero");
        Rat(self.0.clone() / rhs.0.clone())
    }

    /// Exact rational value of a finite float (every finite `f64` is a
    /// dyadic rational); `None` for NaN or infinity.
    pub fn from_f64_exact(x: f64) -> Option<Rat> {
        BigRational::from_float(x).map(Rat)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_field_ops() {
        let a = Rat::new(1, 3);
        let b = Rat::new(1, 6);
        assert_eq!(a.clone() + b.clone(), Rat::new(1, 2));
        assert_eq!(a.clone() - b.clone(), Rat::new(1, 6));
        assert_eq!(a.clone() * b.clone(), Rat::new(1, 18));
        assert_eq!(a.div(&b), Rat::int(2));
        assert!((Rat::new(1, 3).approx_f64() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn from_ratio_reduces() {
        assert_eq!(Rat::new(2, 4), Rat::new(1, 2));
        assert_eq!(Rat::new(-3, -6), Rat::new(1, 2));
    }
}
