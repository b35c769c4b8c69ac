//! Scalar abstraction shared by the double and extended-precision code paths.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use num_bigint::BigInt;
use num_rational::BigRational;

use crate::mp::Mp;

pub trait Real:
    Clone
    + Debug
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
{
    fn from_f64(v: f64) -> Self;
    fn from_i64(v: i64) -> Self;
    fn from_bigint(v: &BigInt) -> Self;
    fn to_f64(&self) -> f64;
    /// `ln|x|`, finite even when `x` is outside the double range.
    fn ln_abs(&self) -> f64;
    fn abs(&self) -> Self;
    fn sqrt(&self) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
    fn powi(&self, e: i64) -> Self;
    fn pi() -> Self;
    /// Unit roundoff of the type (for `Mp`, of the current working precision).
    fn epsilon() -> Self;
    fn is_zero(&self) -> bool;

    fn zero() -> Self {
        Self::from_i64(0)
    }
    fn one() -> Self {
        Self::from_i64(1)
    }
    fn from_ratio(r: &BigRational) -> Self {
        Self::from_bigint(r.numer()) / Self::from_bigint(r.denom())
    }
    fn is_negative(&self) -> bool {
        *self < Self::zero()
    }
    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }
}

impl Real for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn from_i64(v: i64) -> Self {
        v as f64
    }
    fn from_bigint(v: &BigInt) -> Self {
        crate::exact::bigint_to_f64(v)
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn ln_abs(&self) -> f64 {
        f64::abs(*self).ln()
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn ln(&self) -> Self {
        f64::ln(*self)
    }
    fn powi(&self, e: i64) -> Self {
        match i32::try_from(e) {
            Ok(e) => f64::powi(*self, e),
            Err(_) => f64::powf(*self, e as f64),
        }
    }
    fn pi() -> Self {
        std::f64::consts::PI
    }
    fn epsilon() -> Self {
        f64::EPSILON / 2.0
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn from_ratio(r: &BigRational) -> Self {
        crate::exact::ratio_to_f64(r)
    }
}

impl Real for Mp {
    fn from_f64(v: f64) -> Self {
        Mp::from_f64(v)
    }
    fn from_i64(v: i64) -> Self {
        Mp::from_i64(v)
    }
    fn from_bigint(v: &BigInt) -> Self {
        Mp::from_bigint(v)
    }
    fn to_f64(&self) -> f64 {
        Mp::to_f64(self)
    }
    fn ln_abs(&self) -> f64 {
        self.ln_abs_f64()
    }
    fn abs(&self) -> Self {
        Mp::abs(self)
    }
    fn sqrt(&self) -> Self {
        Mp::sqrt(self)
    }
    fn sin(&self) -> Self {
        Mp::sin(self)
    }
    fn cos(&self) -> Self {
        Mp::cos(self)
    }
    fn exp(&self) -> Self {
        Mp::exp(self)
    }
    fn ln(&self) -> Self {
        Mp::ln(self)
    }
    fn powi(&self, e: i64) -> Self {
        Mp::powi(self, e)
    }
    fn pi() -> Self {
        Mp::pi()
    }
    fn epsilon() -> Self {
        Mp::one().ldexp(-(crate::mp::precision() as i32))
    }
    fn is_zero(&self) -> bool {
        Mp::is_zero(self)
    }
}
