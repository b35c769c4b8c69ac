//! Conversions out of exact arithmetic.

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::lognum::LogNum;

pub type Rational = BigRational;

pub fn rat(n: i64, d: i64) -> Rational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> Rational {
    BigRational::from_integer(BigInt::from(n))
}

/// `x^e` for integer `e` (negative allowed for nonzero `x`).
pub fn rpow(x: &Rational, e: i64) -> Rational {
    let p = num_traits::pow(x.clone(), e.unsigned_abs() as usize);
    if e < 0 {
        p.recip()
    } else {
        p
    }
}

/// Correctly scaled `2^e * x` for doubles, without intermediate overflow.
pub fn ldexp(x: f64, e: i64) -> f64 {
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
    r * 2f64.powi(e as i32)
}

/// Leading 64 bits of `|v|` and the binary shift: `|v| ≈ m * 2^s`.
fn top_bits(v: &BigInt) -> (u64, i64) {
    let bits = v.bits() as i64;
    if bits <= 64 {
        return (v.abs().to_u64().unwrap_or(0), 0);
    }
    let shift = bits - 64;
    (
        (v.abs() >> shift as usize).to_u64().unwrap_or(u64::MAX),
        shift,
    )
}

pub fn bigint_to_f64(v: &BigInt) -> f64 {
    let (m, s) = top_bits(v);
    let x = ldexp(m as f64, s);
    if v.sign() == Sign::Minus {
        -x
    } else {
        x
    }
}

/// Quotient `num/den` as `(q, s)` with `q` holding ~64 significant bits and
/// `|num/den| ≈ q * 2^-s`.
fn scaled_quotient(r: &Rational) -> (f64, i64) {
    let nb = r.numer().bits() as i64;
    let db = r.denom().bits() as i64;
    let s = 64 - (nb - db);
    let q = if s >= 0 {
        (r.numer().abs() << s as usize).div_floor(r.denom())
    } else {
        r.numer().abs().div_floor(&(r.denom() << (-s) as usize))
    };
    (q.to_f64().unwrap_or(f64::INFINITY), s)
}

pub fn ratio_to_f64(r: &Rational) -> f64 {
    if r.is_zero() {
        return 0.0;
    }
    let (q, s) = scaled_quotient(r);
    let x = ldexp(q, -s);
    if r.is_negative() {
        -x
    } else {
        x
    }
}

pub fn ratio_to_lognum(r: &Rational) -> LogNum {
    if r.is_zero() {
        return LogNum::zero();
    }
    let (q, s) = scaled_quotient(r);
    let ln = q.ln() - s as f64 * std::f64::consts::LN_2;
    LogNum::new(if r.is_negative() { -1 } else { 1 }, ln)
}

/// Binomial coefficient as an exact integer; zero outside `0 ≤ k ≤ n`.
pub fn binomial(n: i64, k: i64) -> BigInt {
    if k < 0 || n < 0 || k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn huge_ratio_to_f64() {
        let big = num_traits::pow(BigInt::from(3), 2000);
        let r = BigRational::new(big.clone() + 1, big * 2);
        assert!((ratio_to_f64(&r) - 0.5).abs() < 1e-15);
        let ln = ratio_to_lognum(&rpow(&rat(2, 5), 1500));
        assert!((ln.ln_abs - 1500.0 * (0.4f64).ln()).abs() < 1e-9);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(10, 3), BigInt::from(120));
        assert_eq!(binomial(5, 7), BigInt::zero());
        assert_eq!(binomial(5, -1), BigInt::zero());
    }

    #[test]
    fn negative_power() {
        assert_eq!(rpow(&rat(2, 5), -2), rat(25, 4));
    }
}
