//! Signed numbers stored as `(sign, ln|x|)`.
//!
//! Used for quantities that leave the double range: expansion coefficients
//! and purity deviations at large `t`.

use std::cmp::Ordering;
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogNum {
    /// -1, 0 or +1
    pub sign: i8,
    pub ln_abs: f64,
}

impl LogNum {
    pub fn new(sign: i8, ln_abs: f64) -> Self {
        if sign == 0 {
            Self::zero()
        } else {
            LogNum {
                sign: sign.signum(),
                ln_abs,
            }
        }
    }

    pub fn zero() -> Self {
        LogNum {
            sign: 0,
            ln_abs: f64::NEG_INFINITY,
        }
    }

    pub fn from_f64(x: f64) -> Self {
        if x == 0.0 {
            Self::zero()
        } else {
            LogNum {
                sign: if x < 0.0 { -1 } else { 1 },
                ln_abs: x.abs().ln(),
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.sign == 0
    }

    /// Value as a double; may overflow to ±inf or underflow to 0.
    pub fn to_f64(&self) -> f64 {
        f64::from(self.sign) * self.ln_abs.exp()
    }

    /// `Some(value)` only when it is a normal double.
    pub fn to_f64_checked(&self) -> Option<f64> {
        let v = self.to_f64();
        (v == 0.0 && self.is_zero() || v.is_normal()).then_some(v)
    }

    pub fn mul(&self, o: &LogNum) -> LogNum {
        LogNum::new(self.sign * o.sign, self.ln_abs + o.ln_abs)
    }

    pub fn div(&self, o: &LogNum) -> LogNum {
        assert!(!o.is_zero(), "LogNum division by zero");
        LogNum::new(self.sign * o.sign, self.ln_abs - o.ln_abs)
    }

    pub fn neg(&self) -> LogNum {
        LogNum {
            sign: -self.sign,
            ln_abs: self.ln_abs,
        }
    }

    pub fn add(&self, o: &LogNum) -> LogNum {
        if self.is_zero() {
            return *o;
        }
        if o.is_zero() {
            return *self;
        }
        let (big, small) = if self.ln_abs >= o.ln_abs {
            (self, o)
        } else {
            (o, self)
        };
        let r = (small.ln_abs - big.ln_abs).exp();
        let f = if big.sign == small.sign {
            1.0 + r
        } else {
            1.0 - r
        };
        if f == 0.0 {
            return LogNum::zero();
        }
        LogNum::new(big.sign, big.ln_abs + f.ln())
    }

    /// `|self - o| / |o|`, the relative difference used in comparisons.
    pub fn rel_diff(&self, o: &LogNum) -> f64 {
        if o.is_zero() {
            return if self.is_zero() { 0.0 } else { f64::INFINITY };
        }
        self.add(&o.neg()).div(o).to_f64().abs()
    }

    pub fn powi(&self, e: i64) -> LogNum {
        if e == 0 {
            return LogNum::new(1, 0.0);
        }
        let sign = if self.sign < 0 && e % 2 != 0 {
            -1
        } else {
            self.sign
        };
        LogNum::new(sign, self.ln_abs * e as f64)
    }

    /// `log10|x|`, `-inf` for zero.
    pub fn log10_abs(&self) -> f64 {
        self.ln_abs / std::f64::consts::LN_10
    }
}

impl PartialOrd for LogNum {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        match self.sign.cmp(&o.sign) {
            Ordering::Equal => match self.sign {
                0 => Some(Ordering::Equal),
                1 => self.ln_abs.partial_cmp(&o.ln_abs),
                _ => o.ln_abs.partial_cmp(&self.ln_abs),
            },
            c => Some(c),
        }
    }
}

impl fmt::Display for LogNum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        // ln|x| carries an absolute error of ~1e-16 |ln|x||, so print 11 digits
        let l10 = self.log10_abs();
        let mut e = l10.floor();
        let mut m = format!("{:.10}", 10f64.powf(l10 - e));
        if m.starts_with("10") {
            e += 1.0;
            m = format!("{:.10}", 10f64.powf(l10 - e));
        }
        let s = if self.sign < 0 { "-" } else { "" };
        write!(f, "{s}{m}e{e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn display_far_out_of_range() {
        let x = LogNum::new(-1, 1000.0 * std::f64::consts::LN_10);
        assert_eq!(format!("{x}"), "-1.0000000000e1000");
    }

    proptest! {
        #[test]
        fn add_matches_f64(a in -1e6f64..1e6, b in -1e6f64..1e6) {
            let s = LogNum::from_f64(a).add(&LogNum::from_f64(b)).to_f64();
            prop_assert!((s - (a + b)).abs() <= 1e-9 * (a.abs() + b.abs() + 1.0));
        }

        #[test]
        fn mul_div_round_trip(a in 1e-3f64..1e3, b in -1e3f64..-1e-3) {
            let x = LogNum::from_f64(a).mul(&LogNum::from_f64(b)).div(&LogNum::from_f64(b));
            prop_assert!((x.to_f64() - a).abs() < 1e-12 * a);
        }
    }
}
