//! Extended-precision reals.
//!
//! `Mp` wraps an `astro_float::BigFloat`. Every arithmetic result is rounded
//! to the thread's working precision, set with [`with_precision`]. Values
//! created under one precision stay valid under another; they simply get
//! rounded on their next operation.

use std::cell::{Cell, RefCell};
use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use astro_float::{BigFloat, Consts, RoundingMode, Sign};
use num_bigint::{BigInt, Sign as BigSign};
use num_rational::BigRational;
use num_traits::{One, Zero};

pub const DEFAULT_BITS: usize = 256;

const RM: RoundingMode = RoundingMode::ToEven;

thread_local! {
    static PREC: Cell<usize> = const { Cell::new(DEFAULT_BITS) };
    static CONSTS: RefCell<Consts> = RefCell::new(Consts::new().expect("astro-float constant cache"));
}

/// Current working precision in mantissa bits.
pub fn precision() -> usize {
    PREC.with(|p| p.get())
}

/// Run `f` with the working precision set to `bits`, restoring the previous
/// value afterwards (also on unwind).
pub fn with_precision<R>(bits: usize, f: impl FnOnce() -> R) -> R {
    struct Restore(usize);
    impl Drop for Restore {
        fn drop(&mut self) {
            PREC.with(|p| p.set(self.0));
        }
    }
    let prev = PREC.with(|p| p.replace(bits.max(64)));
    let _guard = Restore(prev);
    f()
}

fn with_consts<R>(f: impl FnOnce(&mut Consts) -> R) -> R {
    CONSTS.with(|c| f(&mut c.borrow_mut()))
}

#[derive(Clone)]
pub struct Mp(BigFloat);

impl Mp {
    pub fn from_f64(v: f64) -> Self {
        Mp(BigFloat::from_f64(v, precision().max(64)))
    }

    pub fn from_i64(v: i64) -> Self {
        Mp(BigFloat::from_i64(v, precision().max(64)))
    }

    pub fn from_bigint(v: &BigInt) -> Self {
        let (sign, digits) = v.to_u64_digits();
        if digits.is_empty() {
            return Mp::from_i64(0);
        }
        let p = precision();
        let base = BigFloat::from_u64(1, p).mul(&BigFloat::from_u64(1 << 32, p), p, RM);
        let base = base.mul(&base, p, RM);
        let mut acc = BigFloat::from_u64(0, p);
        for d in digits.iter().rev() {
            acc = acc.mul(&base, p, RM).add(&BigFloat::from_u64(*d, p), p, RM);
        }
        if sign == BigSign::Minus {
            acc.inv_sign();
        }
        Mp(acc)
    }

    pub fn zero() -> Self {
        Mp::from_i64(0)
    }

    pub fn one() -> Self {
        Mp::from_i64(1)
    }

    pub fn pi() -> Self {
        let p = precision();
        Mp(with_consts(|cc| cc.pi(p, RM)))
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_finite(&self) -> bool {
        !self.0.is_nan() && !self.0.is_inf()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative() && !self.0.is_zero()
    }

    pub fn abs(&self) -> Self {
        Mp(self.0.abs())
    }

    pub fn sqrt(&self) -> Self {
        Mp(self.0.sqrt(precision(), RM))
    }

    pub fn exp(&self) -> Self {
        let p = precision();
        Mp(with_consts(|cc| self.0.exp(p, RM, cc)))
    }

    pub fn ln(&self) -> Self {
        let p = precision();
        Mp(with_consts(|cc| self.0.ln(p, RM, cc)))
    }

    pub fn sin(&self) -> Self {
        let p = precision();
        Mp(with_consts(|cc| self.0.sin(p, RM, cc)))
    }

    pub fn cos(&self) -> Self {
        let p = precision();
        Mp(with_consts(|cc| self.0.cos(p, RM, cc)))
    }

    pub fn powi(&self, e: i64) -> Self {
        let p = precision();
        let mag = BigFloat::powi(&self.0, e.unsigned_abs() as usize, p + 32, RM);
        if e < 0 {
            Mp(BigFloat::from_u64(1, p).div(&mag, p, RM))
        } else {
            Mp(mag.clone()).round_to_working()
        }
    }

    fn round_to_working(mut self) -> Self {
        let _ = self.0.set_precision(precision(), RM);
        self
    }

    /// Binary exponent `e` with `|self| = m * 2^e`, `m` in `[1/2, 1)`.
    pub fn exponent(&self) -> Option<i32> {
        if self.0.is_zero() {
            None
        } else {
            self.0.exponent()
        }
    }

    /// Multiply by `2^k` exactly.
    pub fn ldexp(&self, k: i32) -> Self {
        if self.0.is_zero() || k == 0 {
            return self.clone();
        }
        let mut r = self.0.clone();
        let e = r.exponent().expect("finite value");
        r.set_exponent(e + k);
        Mp(r)
    }

    /// Nearest `f64` (truncated to 128 bits of mantissa first), saturating to
    /// infinity or zero outside the double range.
    pub fn to_f64(&self) -> f64 {
        if self.0.is_nan() {
            return f64::NAN;
        }
        if self.0.is_inf() {
            return if self.0.is_inf_pos() {
                f64::INFINITY
            } else {
                f64::NEG_INFINITY
            };
        }
        let Some((words, _, sign, e, _)) = self.0.as_raw_parts() else {
            return f64::NAN;
        };
        if words.iter().all(|w| *w == 0) {
            return 0.0;
        }
        let top = words[words.len() - 1] as f64;
        let next = if words.len() > 1 {
            words[words.len() - 2] as f64
        } else {
            0.0
        };
        // mantissa fraction in [1/2, 1)
        let frac = (top + next * 2f64.powi(-64)) * 2f64.powi(-64);
        let mag = scale2(frac, e);
        if sign == Sign::Neg {
            -mag
        } else {
            mag
        }
    }

    /// `ln|self|` as an `f64`, valid far outside the double range.
    pub fn ln_abs_f64(&self) -> f64 {
        if self.0.is_zero() {
            return f64::NEG_INFINITY;
        }
        let e = self.0.exponent().expect("finite value");
        let m = self.ldexp(-e).abs().to_f64();
        m.ln() + f64::from(e) * std::f64::consts::LN_2
    }

    pub fn to_lognum(&self) -> crate::lognum::LogNum {
        if self.0.is_zero() {
            crate::lognum::LogNum::zero()
        } else {
            crate::lognum::LogNum::new(if self.is_negative() { -1 } else { 1 }, self.ln_abs_f64())
        }
    }

    pub fn max(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    pub fn trunc(&self) -> Self {
        Mp(self.0.int())
    }

    /// Exact rational value (finite values only).
    pub fn to_rational(&self) -> BigRational {
        if self.is_zero() {
            return BigRational::zero();
        }
        let e = self.exponent().expect("finite value");
        let bits = self.0.precision().unwrap_or(precision()) as i32 + 8;
        // self = (self * 2^{bits-e}) * 2^{e-bits}; the first factor is an integer
        let int = self.ldexp(bits - e).trunc_to_bigint();
        let shift = e - bits;
        if shift >= 0 {
            BigRational::from_integer(int << shift as usize)
        } else {
            BigRational::new(int, BigInt::one() << (-shift) as usize)
        }
    }

    /// Integer part as a `BigInt`.
    pub fn trunc_to_bigint(&self) -> BigInt {
        let neg = self.is_negative();
        let mut v = self.abs().trunc();
        let e = v.exponent().unwrap_or(0);
        let mut acc = BigInt::zero();
        // peel 48-bit chunks from the top
        let mut consumed = 0;
        v = v.ldexp(-e);
        while consumed < e {
            let take = (e - consumed).min(48);
            v = v.ldexp(take);
            let head = v.trunc();
            acc = (acc << take as usize) + BigInt::from(head.to_f64() as u64);
            v -= head;
            consumed += take;
        }
        if neg {
            -acc
        } else {
            acc
        }
    }

    pub fn inner(&self) -> &BigFloat {
        &self.0
    }
}

fn scale2(x: f64, e: i32) -> f64 {
    // split to avoid intermediate overflow of 2^e
    let mut r = x;
    let mut e = e;
    while e > 1000 {
        r *= 2f64.powi(1000);
        e -= 1000;
        if r.is_infinite() {
            return r;
        }
    }
    while e < -1000 {
        r *= 2f64.powi(-1000);
        e += 1000;
        if r == 0.0 {
            return r;
        }
    }
    r * 2f64.powi(e)
}

impl fmt::Debug for Mp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Mp({})", self)
    }
}

impl fmt::Display for Mp {
    /// Decimal scientific notation with as many digits as the precision supports.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let digits = f.precision().unwrap_or_else(|| {
            let bits = self.0.precision().unwrap_or(precision());
            (bits as f64 * std::f64::consts::LOG10_2).floor() as usize
        });
        write!(f, "{}", to_decimal(self, digits.max(1)))
    }
}

/// `d.ddd…e±x` with `digits` significant digits.
fn to_decimal(x: &Mp, digits: usize) -> String {
    if x.0.is_nan() {
        return "NaN".into();
    }
    if x.0.is_inf() {
        return if x.0.is_inf_pos() {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    if x.is_zero() {
        return format!("{:.*}e0", digits - 1, 0.0);
    }
    let bits = ((digits as f64 + 10.0) / std::f64::consts::LOG10_2) as usize + 64;
    with_precision(bits.max(precision()), || {
        let neg = x.is_negative();
        let a = x.abs();
        let mut e10 = (a.ln_abs_f64() / std::f64::consts::LN_10).floor() as i64;
        let ten = Mp::from_i64(10);
        // a / 10^(e10 - digits + 1), rounded to an integer with `digits` digits
        let mut scaled = a.clone() * ten.powi(digits as i64 - 1 - e10);
        let limit = ten.powi(digits as i64);
        if scaled >= limit {
            e10 += 1;
            scaled = a.clone() * ten.powi(digits as i64 - 1 - e10);
        }
        let half = Mp::from_f64(0.5);
        let mut s = (scaled + half).trunc_to_bigint().to_string();
        if s.len() > digits {
            s.truncate(digits);
            e10 += 1;
        }
        while s.len() < digits {
            s.push('0');
        }
        let (head, tail) = s.split_at(1);
        let sign = if neg { "-" } else { "" };
        if tail.is_empty() {
            format!("{sign}{head}e{e10}")
        } else {
            format!("{sign}{head}.{tail}e{e10}")
        }
    })
}

impl PartialEq for Mp {
    fn eq(&self, other: &Self) -> bool {
        self.0.cmp(&other.0) == Some(0)
    }
}

impl PartialOrd for Mp {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.0.cmp(&other.0).map(|c| c.cmp(&0))
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident, $atr:ident, $am:ident, $op:ident) => {
        impl $tr<Mp> for Mp {
            type Output = Mp;
            fn $m(self, rhs: Mp) -> Mp {
                Mp(self.0.$op(&rhs.0, precision(), RM))
            }
        }
        impl $tr<&Mp> for Mp {
            type Output = Mp;
            fn $m(self, rhs: &Mp) -> Mp {
                Mp(self.0.$op(&rhs.0, precision(), RM))
            }
        }
        impl $tr<&Mp> for &Mp {
            type Output = Mp;
            fn $m(self, rhs: &Mp) -> Mp {
                Mp(self.0.$op(&rhs.0, precision(), RM))
            }
        }
        impl $tr<Mp> for &Mp {
            type Output = Mp;
            fn $m(self, rhs: Mp) -> Mp {
                Mp(self.0.$op(&rhs.0, precision(), RM))
            }
        }
        impl $atr<Mp> for Mp {
            fn $am(&mut self, rhs: Mp) {
                self.0 = self.0.$op(&rhs.0, precision(), RM);
            }
        }
        impl $atr<&Mp> for Mp {
            fn $am(&mut self, rhs: &Mp) {
                self.0 = self.0.$op(&rhs.0, precision(), RM);
            }
        }
    };
}

binop!(Add, add, AddAssign, add_assign, add);
binop!(Sub, sub, SubAssign, sub_assign, sub);
binop!(Mul, mul, MulAssign, mul_assign, mul);
binop!(Div, div, DivAssign, div_assign, div);

impl Neg for Mp {
    type Output = Mp;
    fn neg(mut self) -> Mp {
        self.0.inv_sign();
        self
    }
}

impl Neg for &Mp {
    type Output = Mp;
    fn neg(self) -> Mp {
        self.clone().neg()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f64_round_trip() {
        for v in [
            1.0,
            -2.5,
            0.1,
            1e-300,
            3.7e250,
            std::f64::consts::PI,
            -7.25e-12,
        ] {
            assert_eq!(Mp::from_f64(v).to_f64(), v);
        }
        assert_eq!(Mp::zero().to_f64(), 0.0);
    }

    #[test]
    fn precision_scope_restores() {
        let before = precision();
        with_precision(512, || assert_eq!(precision(), 512));
        assert_eq!(precision(), before);
    }

    #[test]
    fn pi_digits() {
        let s = with_precision(256, || format!("{:.30}", Mp::pi()));
        assert_eq!(s, "3.14159265358979323846264338328e0");
    }

    #[test]
    fn tiny_values_survive() {
        with_precision(256, || {
            let x = Mp::from_i64(10).powi(-400);
            let l = x.ln_abs_f64();
            assert!((l + 400.0 * std::f64::consts::LN_10).abs() < 1e-9);
            assert_eq!(x.to_f64(), 0.0);
        });
    }

    #[test]
    fn bigint_conversion() {
        let b: BigInt = "-123456789012345678901234567890".parse().unwrap();
        let s = with_precision(256, || format!("{:.30}", Mp::from_bigint(&b)));
        assert_eq!(s, "-1.23456789012345678901234567890e29");
    }

    #[test]
    fn transcendental_identities() {
        with_precision(200, || {
            let x = Mp::from_f64(0.7);
            let s = x.sin();
            let c = x.cos();
            let one = s.clone() * &s + c.clone() * &c;
            assert!((one - Mp::one()).abs().ln_abs_f64() < -120.0);
            let y = x.exp().ln();
            assert!((y - x).abs().ln_abs_f64() < -120.0);
        });
    }
}
