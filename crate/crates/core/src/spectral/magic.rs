//! Magic sums `f_k(p)` and their companions `h_r(p)`.
//!
//! Three independent routes:
//! * a root-of-unity filter that turns the sum into binomial coefficients,
//!   exact for `p >= 1` and `p + k` odd (the case the series needs);
//! * exact evaluation in the cyclotomic field for any `p` (see
//!   [`super::cyclotomic`]);
//! * direct trigonometric sums, compensated in doubles or in extended
//!   precision.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::exact::{binomial, ratio_to_f64, ratio_to_lognum, Rational};
use crate::lognum::LogNum;
use crate::mp::{with_precision, Mp};

use super::cyclotomic::magic_sum_cyclotomic;

/// Relative threshold under which a compensated sum counts as an exact zero.
pub const ZERO_THRESHOLD: f64 = 1e-13;

fn check_n(n: usize) -> Result<()> {
    if n < 4 || n % 2 == 1 {
        return Err(Error::InvalidParams(format!(
            "n must be even and at least 4 (got {n})"
        )));
    }
    Ok(())
}

fn check_k(n: usize, k: usize) -> Result<()> {
    check_n(n)?;
    if k < 2 || k + 1 > n {
        return Err(Error::InvalidParams(format!(
            "k must satisfy 2 <= k <= n-1 (got k={k}, n={n})"
        )));
    }
    Ok(())
}

/// `n 2^{-(p+1)} sum_t C(p,t) [delta(p-2t+r) + delta(p-2t-r)]` times
/// `2^{p+1}`, i.e. the integer part; `delta(m) = 1` iff `m = n (mod 2n)`.
fn filter_count(n: usize, r: i64, p: i64) -> BigInt {
    let n_i = n as i64;
    let mut acc = BigInt::zero();
    for sgn in [1i64, -1] {
        // p - 2t + sgn*r = n (mod 2n)  <=>  2t = p + sgn*r - n (mod 2n)
        let m = p + sgn * r - n_i;
        if m.rem_euclid(2) != 0 {
            continue;
        }
        let t0 = (m / 2).rem_euclid(n_i);
        let mut t = t0;
        while t <= p {
            acc += binomial(p, t);
            t += n_i;
        }
    }
    acc * BigInt::from(n)
}

/// Exact `f_k(p)` for `p >= 1` with `p + k` odd, `None` otherwise.
pub fn magic_sum_binomial_exact(n: usize, k: usize, p: i64) -> Option<Rational> {
    if p < 1 || (p + k as i64) % 2 == 0 {
        return None;
    }
    let k = k as i64;
    // f = (F_{k+1} - F_{k-1}) / 4 with F_r = count_r / 2^{p+1}
    let diff = filter_count(n, k + 1, p) - filter_count(n, k - 1, p);
    Some(Rational::new(diff, BigInt::one() << (p as usize + 3)))
}

/// `f_k(p)` exactly as a rational. Uses the binomial form when it applies and
/// the cyclotomic field otherwise; errors when the value is irrational.
pub fn magic_sum_exact(n: usize, k: usize, p: i64) -> Result<Rational> {
    check_k(n, k)?;
    if let Some(v) = magic_sum_binomial_exact(n, k, p) {
        return Ok(v);
    }
    magic_sum_cyclotomic(n, k as i64, p)
}

/// A compensated trigonometric sum and the magnitude of its largest term.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrigSum {
    pub value: f64,
    pub scale: f64,
}

impl TrigSum {
    pub fn is_zero(&self) -> bool {
        self.value.abs() <= ZERO_THRESHOLD * self.scale
    }
}

fn kahan<I: Iterator<Item = f64>>(terms: I) -> TrigSum {
    let (mut s, mut c, mut scale) = (0.0f64, 0.0f64, 0.0f64);
    for x in terms {
        scale = scale.max(x.abs());
        let y = x - c;
        let t = s + y;
        c = (t - s) - y;
        s = t;
    }
    TrigSum { value: s, scale }
}

/// `f_k(p)` by a Kahan-compensated sum in doubles. Valid for any `k >= 0`.
pub fn magic_sum_kahan(n: usize, k: usize, p: i64) -> TrigSum {
    let nf = n as f64;
    kahan((1..n / 2).map(|j| {
        let ph = std::f64::consts::PI * j as f64 / nf;
        let sgn = if j % 2 == 0 { -1.0 } else { 1.0 };
        sgn * ph.cos().powi(p as i32) * ph.sin() * (k as f64 * ph).sin()
    }))
}

/// `h_r(p) = sum_{j=1}^{n/2-1} (-1)^j cos^p(phi_j) cos(r phi_j)`, Kahan.
pub fn magic_h_kahan(n: usize, r: usize, p: i64) -> TrigSum {
    let nf = n as f64;
    kahan((1..n / 2).map(|j| {
        let ph = std::f64::consts::PI * j as f64 / nf;
        let sgn = if j % 2 == 0 { 1.0 } else { -1.0 };
        sgn * ph.cos().powi(p as i32) * (r as f64 * ph).cos()
    }))
}

/// `f_k(p)` in extended precision at the current working precision.
pub fn magic_sum_mp(n: usize, k: usize, p: i64) -> Mp {
    let mut acc = Mp::zero();
    let nn = Mp::from_i64(n as i64);
    for j in 1..n / 2 {
        let ph = Mp::pi() * Mp::from_i64(j as i64) / nn.clone();
        let term = ph.cos().powi(p) * ph.sin() * (ph.clone() * Mp::from_i64(k as i64)).sin();
        if j % 2 == 0 {
            acc -= term;
        } else {
            acc += term;
        }
    }
    acc
}

/// Working precision for the extended-precision sum: enough to absorb the
/// growth of `cos^p` at the smallest cosine when `p < 0`.
fn mp_bits(n: usize, p: i64) -> usize {
    let growth = if p < 0 {
        (p.unsigned_abs() as f64 * (n as f64).log2()).ceil() as usize
    } else {
        0
    };
    192 + growth
}

/// Above this power the binomial form gets expensive and the trigonometric
/// sum has no cancellation left (all zeros sit at `p < n`).
const BINOMIAL_MAX_P: i64 = 4096;

/// `f_k(p)` as `(sign, ln|f|)`, never underflowing.
pub fn magic_sum_lognum(n: usize, k: usize, p: i64) -> Result<LogNum> {
    check_k(n, k)?;
    if p <= BINOMIAL_MAX_P {
        if let Some(v) = magic_sum_binomial_exact(n, k, p) {
            return Ok(ratio_to_lognum(&v));
        }
    }
    Ok(with_precision(mp_bits(n, p), || {
        magic_sum_mp(n, k, p).to_lognum()
    }))
}

/// `f_k(p)` as a double. Exact (binomial) when `p >= 1` and `p + k` odd;
/// otherwise an extended-precision trigonometric sum, snapped to zero below
/// the relative threshold.
pub fn magic_sum_f(n: usize, k: usize, p: i64) -> Result<f64> {
    check_k(n, k)?;
    if p <= BINOMIAL_MAX_P {
        if let Some(v) = magic_sum_binomial_exact(n, k, p) {
            return Ok(ratio_to_f64(&v));
        }
    }
    Ok(with_precision(mp_bits(n, p), || {
        magic_sum_mp(n, k, p).to_f64()
    }))
}

/// Bits for the table's trigonometric sums at `p > 2n`. All zeros of `f_k`
/// sit at `p < n`, and there the `j = 1` term dominates.
const TABLE_TRIG_BITS: usize = 192;

/// Cache of `f_k(p)` for one `(n, k)`. Small `p` use the exact forms, large
/// `p` a trigonometric sum over cached `cos(phi_j)` and weights.
#[derive(Clone, Debug)]
pub struct MagicSumTable {
    n: usize,
    k: usize,
    values: HashMap<i64, LogNum>,
    /// `(cos phi_j, (-1)^{j+1} sin phi_j sin k phi_j)`.
    trig: Option<Vec<(Mp, Mp)>>,
}

impl MagicSumTable {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        check_k(n, k)?;
        Ok(MagicSumTable {
            n,
            k,
            values: HashMap::new(),
            trig: None,
        })
    }

    fn trig_sum(&mut self, p: i64) -> LogNum {
        let (n, k) = (self.n, self.k);
        with_precision(TABLE_TRIG_BITS, || {
            let terms = self.trig.get_or_insert_with(|| {
                let nn = Mp::from_i64(n as i64);
                (1..n / 2)
                    .map(|j| {
                        let ph = Mp::pi() * Mp::from_i64(j as i64) / nn.clone();
                        let w = ph.sin() * (ph.clone() * Mp::from_i64(k as i64)).sin();
                        (ph.cos(), if j % 2 == 0 { -w } else { w })
                    })
                    .collect()
            });
            terms
                .iter()
                .fold(Mp::zero(), |acc, (c, w)| acc + c.powi(p) * w.clone())
                .to_lognum()
        })
    }

    pub fn get(&mut self, p: i64) -> f64 {
        self.get_log(p).to_f64()
    }

    pub fn get_log(&mut self, p: i64) -> LogNum {
        if let Some(v) = self.values.get(&p) {
            return *v;
        }
        let v = if p > 2 * self.n as i64 {
            self.trig_sum(p)
        } else {
            magic_sum_lognum(self.n, self.k, p).expect("validated (n, k)")
        };
        self.values.insert(p, v);
        v
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }
}

/// Ranges of `p` on which the zero identities hold, for bipartition `k`.
pub fn zero_pattern(n: usize, k: usize) -> Vec<i64> {
    if k.is_multiple_of(2) {
        let r = (k / 2) as i64;
        (1..=(n as i64 / 2 - r - 1)).map(|p| 2 * p - 1).collect()
    } else {
        let r = k.div_ceil(2) as i64;
        (1..=(n as i64 / 2 - r - 1)).map(|p| 2 * p).collect()
    }
}
