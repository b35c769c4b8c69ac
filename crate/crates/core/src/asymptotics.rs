//! Jacobi theta functions and the closed-form transition curves of the
//! effective rate for `k = 2` and `k = n/2`.
//!
//! Conventions: `theta4(z, q) = 1 + 2 sum (-1)^j q^{j^2} cos(2jz)` and
//! `theta1(z, q) = 2 q^{1/4} sum (-1)^k q^{k(k+1)} sin((2k+1)z)`. A prime is a
//! `q`-derivative, a bracketed superscript a `z`-derivative.
//!
//! Close to `q = 1` both series cancel catastrophically (`theta4(0, q)` is of
//! order `exp(-pi^2 / (4 |ln q|))`). Double-precision values there come from
//! the Poisson-resummed (modular) series, the `theta1` log-derivative from
//! its lattice sum; the direct series is kept as an extended-precision
//! cross-check.

use std::f64::consts::{LN_2, PI};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::mp::{with_precision, Mp};
use crate::real::Real;

/// Relative size of the last retained term.
pub const SERIES_TOL: f64 = 1e-18;
pub const MIN_TERMS: usize = 5;
/// Above this nome the `theta4` derivatives switch to the modular series.
pub const MODULAR_SWITCH_Q: f64 = 0.5;
const MAX_BITS: usize = 1 << 18;
const MAX_LATTICE_TERMS: usize = 100_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ThetaMethod {
    Series,
    Modular,
    Extended,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThetaEval {
    pub q: f64,
    pub z: f64,
    pub value: f64,
    pub dq: f64,
    pub dqq: Option<f64>,
    /// Number of series terms retained.
    pub terms: usize,
    pub method: ThetaMethod,
}

/// `z`-derivatives of `theta4` at `z = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThetaZ {
    pub q: f64,
    pub value: f64,
    pub d2: f64,
    pub d4: f64,
    pub terms: usize,
}

fn check_q(q: f64) -> Result<()> {
    if !(0.0..1.0).contains(&q) || q.is_nan() {
        return Err(Error::Domain(format!(
            "nome must satisfy 0 <= q < 1 (got {q})"
        )));
    }
    Ok(())
}

fn done(j: usize, term: f64, partial: f64) -> bool {
    j >= MIN_TERMS && term.abs() < SERIES_TOL * partial.abs()
}

/// `(theta4, theta4', theta4'')` at `z = 0`.
pub fn theta4_dq(q: f64) -> Result<ThetaEval> {
    check_q(q)?;
    if q <= MODULAR_SWITCH_Q {
        let (mut v, mut d1, mut d2) = (1.0f64, 0.0f64, 0.0f64);
        let mut j = 1usize;
        loop {
            let jj = (j * j) as f64;
            let sgn = if j.is_multiple_of(2) { 2.0 } else { -2.0 };
            let t0 = sgn * q.powf(jj);
            let t1 = sgn * jj * q.powf(jj - 1.0);
            let t2 = if j == 1 {
                0.0
            } else {
                sgn * jj * (jj - 1.0) * q.powf(jj - 2.0)
            };
            v += t0;
            d1 += t1;
            d2 += t2;
            let small = |t: f64, s: f64| t == 0.0 || done(j, t, s);
            if j >= MIN_TERMS && small(t0, v) && small(t1, d1) && small(t2, d2) {
                break;
            }
            j += 1;
        }
        return Ok(ThetaEval {
            q,
            z: 0.0,
            value: v,
            dq: d1,
            dqq: Some(d2),
            terms: j,
            method: ThetaMethod::Series,
        });
    }
    let lnq = q.ln();
    let s = -lnq / PI;
    let m = modular_sums(lnq, false);
    let pre = s.powf(-0.5);
    // theta4 = 2 s^{-1/2} P0, sum_{j>=1} (-1)^j j^2 q^{j^2} = -s^{-1/2} P2,
    // sum (-1)^j j^4 q^{j^2} = s^{-1/2} P4
    let s2 = -pre * m.p2;
    let s4 = pre * m.p4;
    Ok(ThetaEval {
        q,
        z: 0.0,
        value: 2.0 * pre * m.p0,
        dq: 2.0 * s2 / q,
        dqq: Some(2.0 * (s4 - s2) / (q * q)),
        terms: m.terms,
        method: ThetaMethod::Modular,
    })
}

struct Modular {
    p0: f64,
    p2: f64,
    p4: f64,
    terms: usize,
}

/// One-sided Poisson sums `sum_{m>=1} g(y_m) exp(-a y_m^2)`, `y_m = (2m-1) pi`,
/// `a = 1/(4|ln q|)`, for `g = 1`, the second and the fourth derivative
/// polynomials of the Gaussian. With `scaled` the common factor
/// `exp(-a pi^2)` is dropped.
fn modular_sums(lnq: f64, scaled: bool) -> Modular {
    let a = 1.0 / (-4.0 * lnq);
    let (mut p0, mut p2, mut p4) = (0.0f64, 0.0f64, 0.0f64);
    let mut m = 1usize;
    loop {
        let y = (2 * m - 1) as f64 * PI;
        let y2 = y * y;
        let w = if scaled {
            (-a * (y2 - PI * PI)).exp()
        } else {
            (-a * y2).exp()
        };
        let t0 = w;
        let t2 = (4.0 * a * a * y2 - 2.0 * a) * w;
        let t4 = (16.0 * a.powi(4) * y2 * y2 - 48.0 * a.powi(3) * y2 + 12.0 * a * a) * w;
        p0 += t0;
        p2 += t2;
        p4 += t4;
        if m >= MIN_TERMS && (w == 0.0 || (done(m, t0, p0) && done(m, t2, p2) && done(m, t4, p4))) {
            break;
        }
        m += 1;
    }
    Modular {
        p0,
        p2,
        p4,
        terms: m,
    }
}

/// Working precision that absorbs the cancellation of the direct series.
fn direct_bits(lnq: f64) -> Result<usize> {
    let eps = -lnq;
    let cancel = PI * PI / (4.0 * eps) / LN_2;
    let growth = 4.0 * (1.0 / eps).log2().max(0.0);
    let bits = 128.0 + cancel + growth;
    if bits > MAX_BITS as f64 {
        return Err(Error::Resource(format!(
            "direct theta series at q = exp({lnq}) needs {bits:.0} bits"
        )));
    }
    Ok(bits.ceil() as usize)
}

/// `theta4` and its second and fourth `z`-derivatives at `z = 0`, by the
/// direct series in extended precision.
pub fn theta4_dz(q: f64) -> Result<ThetaZ> {
    check_q(q)?;
    if q == 0.0 {
        return Ok(ThetaZ {
            q,
            value: 1.0,
            d2: 0.0,
            d4: 0.0,
            terms: 0,
        });
    }
    let bits = direct_bits(q.ln())?;
    Ok(with_precision(bits, || {
        let qm = Mp::from_f64(q);
        let q2 = qm.clone() * qm.clone();
        let (mut v, mut d2, mut d4) = (Mp::one(), Mp::zero(), Mp::zero());
        // q^{j^2} and q^{2j+1}
        let (mut pw, mut step) = (qm.clone(), qm.clone() * q2.clone());
        let mut peak = Mp::zero();
        let cut = Mp::from_f64(SERIES_TOL);
        let mut j = 1i64;
        loop {
            let jj = Mp::from_i64(j * j);
            let base = if j % 2 == 0 { pw.clone() } else { -pw.clone() };
            let t0 = Mp::from_i64(2) * base.clone();
            let t2 = Mp::from_i64(-8) * jj.clone() * base.clone();
            let t4 = Mp::from_i64(32) * jj.clone() * jj * base;
            v += t0;
            d2 += t2;
            d4 += t4.clone();
            peak = peak.max_of(t4.abs());
            let tiny = t4.abs() <= peak.ldexp(-(bits as i32)) && t4.abs() <= cut.clone() * d4.abs();
            if j as usize >= MIN_TERMS && tiny {
                break;
            }
            pw *= step.clone();
            step *= q2.clone();
            j += 1;
        }
        ThetaZ {
            q,
            value: v.to_f64(),
            d2: d2.to_f64(),
            d4: d4.to_f64(),
            terms: j as usize,
        }
    }))
}

/// Extended-precision sums `sum (-1)^k w_k q^{k(k+1)} sin((2k+1)z)` for
/// `w_k = 1`, `k(k+1) + 1/4` and `(2k+1)^2`.
fn theta1_sums(z: f64, q: f64) -> Result<(Mp, Mp, Mp, usize, usize)> {
    let bits = direct_bits(q.ln())?;
    Ok(with_precision(bits, || {
        let qm = Mp::from_f64(q);
        let zm = Mp::from_f64(z);
        let (mut s0, mut s1, mut s2) = (Mp::zero(), Mp::zero(), Mp::zero());
        // q^{k(k+1)} and q^{2(k+1)}
        let (mut pw, mut step) = (Mp::one(), qm.clone() * qm.clone());
        let q2 = step.clone();
        let mut peak = Mp::zero();
        let cut = Mp::from_f64(SERIES_TOL);
        let mut k = 0i64;
        loop {
            let odd = 2 * k + 1;
            let sn = (zm.clone() * Mp::from_i64(odd)).sin();
            let base = if k % 2 == 0 {
                pw.clone() * sn
            } else {
                -(pw.clone() * sn)
            };
            let w1 = Mp::from_i64(4 * k * (k + 1) + 1) / Mp::from_i64(4);
            s0 += base.clone();
            s1 += w1 * base.clone();
            let t2 = Mp::from_i64(odd * odd) * base;
            s2 += t2.clone();
            let env = pw.clone() * Mp::from_i64(odd * odd);
            peak = peak.max_of(env.clone());
            let tiny = env <= peak.ldexp(-(bits as i32)) && env <= cut.clone() * s2.abs();
            if k as usize + 1 >= MIN_TERMS && tiny {
                break;
            }
            pw *= step.clone();
            step *= q2.clone();
            k += 1;
        }
        (s0, s1, s2, k as usize + 1, bits)
    }))
}

fn check_z(z: f64) -> Result<()> {
    if !(z > 0.0 && z < PI) {
        return Err(Error::Domain(format!(
            "phase must satisfy 0 < z < pi (got {z})"
        )));
    }
    Ok(())
}

/// `(theta1, d theta1 / dq)`, the derivative including that of `q^{1/4}`.
pub fn theta1_dq(z: f64, q: f64) -> Result<ThetaEval> {
    check_q(q)?;
    check_z(z)?;
    if q == 0.0 {
        return Ok(ThetaEval {
            q,
            z,
            value: 0.0,
            dq: f64::INFINITY,
            dqq: None,
            terms: 1,
            method: ThetaMethod::Series,
        });
    }
    let (s0, s1, _, terms, bits) = theta1_sums(z, q)?;
    let (value, dq) = with_precision(bits, || {
        let qm = Mp::from_f64(q);
        let pre = Mp::from_i64(2) * qm.sqrt().sqrt();
        ((pre.clone() * s0).to_f64(), (pre * s1 / qm).to_f64())
    });
    Ok(ThetaEval {
        q,
        z,
        value,
        dq,
        dqq: None,
        terms,
        method: ThetaMethod::Extended,
    })
}

/// `1 + theta1^(2)(z, q) / theta1(z, q)` from the ratio of the direct series.
pub fn theta1_log_d2_series(z: f64, q: f64) -> Result<f64> {
    check_q(q)?;
    check_z(z)?;
    if q == 0.0 {
        return Ok(0.0);
    }
    let (s0, _, s2, _, bits) = theta1_sums(z, q)?;
    Ok(with_precision(bits, || (Mp::one() - s2 / s0).to_f64()))
}

/// `1 + theta1^(2)/theta1 = sum_{j>=1} 16 q^{2j} cos(2zj)/(1-q^{2j})^2
/// + 8 j q^{2j}/(1-q^{2j})`.
pub fn theta1_log_d2_lattice(z: f64, q: f64) -> Result<f64> {
    check_q(q)?;
    check_z(z)?;
    if q == 0.0 {
        return Ok(0.0);
    }
    lattice_ln(z, q.ln())
}

fn lattice_ln(z: f64, lnq: f64) -> Result<f64> {
    let mut acc = 0.0f64;
    let mut comp = 0.0f64;
    for j in 1..=MAX_LATTICE_TERMS {
        let jf = j as f64;
        let x = 2.0 * jf * lnq;
        let q2j = x.exp();
        // 1 - q^{2j} without cancellation
        let om = -x.exp_m1();
        let a = 16.0 * q2j / (om * om);
        let b = 8.0 * jf * q2j / om;
        let term = a * (2.0 * z * jf).cos() + b;
        let y = term - comp;
        let t = acc + y;
        comp = (t - acc) - y;
        acc = t;
        if q2j == 0.0 || done(j, a + b, acc) {
            return Ok(acc);
        }
    }
    Err(Error::NoConvergence(format!(
        "lattice sum at ln q = {lnq} needs more than {MAX_LATTICE_TERMS} terms"
    )))
}

/// Validity window of a transition-curve value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Regime {
    /// `t < t_c`: the phantom plateau, where the curves do not apply.
    Plateau,
    Transition,
    /// Inside the empirical window of the short-time power law.
    ShortTime,
    /// Inside the empirical window of the long-time exponential.
    LongTime,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Plateau => "plateau",
            Regime::Transition => "transition",
            Regime::ShortTime => "short-time",
            Regime::LongTime => "long-time",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateValue {
    pub t: usize,
    /// Theory value of `lambda_eff(t) - lambda_1`.
    pub value: f64,
    pub regime: Regime,
}

fn t_c(params: &ModelParams) -> usize {
    params.n() - params.k() - 1
}

fn window(params: &ModelParams, t: usize, short: (f64, f64), long: f64) -> Regime {
    let n = params.n() as f64;
    let tf = t as f64;
    if t < t_c(params) {
        Regime::Plateau
    } else if tf >= long * n * n {
        Regime::LongTime
    } else if tf >= short.0 * n && tf <= short.1 * n * n {
        Regime::ShortTime
    } else {
        Regime::Transition
    }
}

/// Short window `5 <= t/n <= 0.02 n`, long window `t >= 0.1 n^2`.
pub fn regime_k2(params: &ModelParams, t: usize) -> Regime {
    window(params, t, (5.0, 0.02), 0.1)
}

/// Short window `2 <= t/n <= 0.01 n`, long window `t >= 0.05 n^2`.
pub fn regime_half(params: &ModelParams, t: usize) -> Regime {
    window(params, t, (2.0, 0.01), 0.05)
}

/// `ln cos(pi/n)` without the cancellation of `ln(1 - small)`.
fn ln_cos_pi_n(n: usize) -> f64 {
    let h = (PI / (2.0 * n as f64)).sin();
    (-2.0 * h * h).ln_1p()
}

fn prefactor(params: &ModelParams) -> f64 {
    let a2 = 2.0 * params.alpha_f64();
    let pn = PI / params.n() as f64;
    a2 * a2 * pn * pn
}

fn check_start(params: &ModelParams, t: usize) -> Result<()> {
    if t < t_c(params) {
        return Err(Error::OutOfRange(format!(
            "transition curve needs t >= t_c = {} (got {t})",
            t_c(params)
        )));
    }
    Ok(())
}

/// `(S4 - S2)/S2` with `S_m = sum_{j>=1} (-1)^j j^m q^{j^2}`, from `ln q`.
/// `None` when the numerator underflows.
fn k2_ratio(lnq: f64) -> Option<f64> {
    if lnq >= MODULAR_SWITCH_Q.ln() {
        let m = modular_sums(lnq, true);
        return Some(-(m.p4 + m.p2) / m.p2);
    }
    if 3.0 * lnq < -700.0 {
        return None;
    }
    // both sums divided by q
    let (mut num, mut den) = (0.0f64, 0.0f64);
    let mut j = 1usize;
    loop {
        let jj = (j * j) as f64;
        let sgn = if j.is_multiple_of(2) { 1.0 } else { -1.0 };
        let w = ((jj - 1.0) * lnq).exp();
        let tn = sgn * jj * (jj - 1.0) * w;
        let td = sgn * jj * w;
        num += tn;
        den += td;
        if j >= MIN_TERMS && (w == 0.0 || (done(j, tn, num) && done(j, td, den))) {
            break;
        }
        j += 1;
    }
    Some(num / den)
}

/// `lambda_eff(t) - lambda_1` for `k = 2`:
/// `-(2a)^2 (pi/n)^2 c^2 sum (-1)^j j^2 (j^2-1) q^{j^2} / sum (-1)^j j^2 q^{j^2}`
/// with `c = cos(pi/n)` and `q = c^{2t-n+4}`.
pub fn rate_transition_k2(params: &ModelParams, t: usize) -> Result<RateValue> {
    if params.k() != 2 {
        return Err(Error::InvalidParams(format!(
            "k = 2 curve requested for k = {}",
            params.k()
        )));
    }
    check_start(params, t)?;
    let lnc = ln_cos_pi_n(params.n());
    let p = 2.0 * t as f64 - params.n() as f64 + 4.0;
    let lnq = p * lnc;
    let value = match k2_ratio(lnq) {
        Some(r) => -prefactor(params) * (2.0 * lnc).exp() * r,
        // leading term of numerator and denominator
        None => (prefactor(params).ln() + 12f64.ln() + 2.0 * lnc + 3.0 * lnq).exp(),
    };
    Ok(RateValue {
        t,
        value,
        regime: regime_k2(params, t),
    })
}

/// The `k = 2` curve in the `z`-derivative form
/// `(2a)^2 (pi/n)^2 c^2 (1 + theta4^(4)/theta4^(2))`, derivatives taken with
/// respect to `w = 2z`. Evaluated from the direct series in extended
/// precision; a cross-check of [`rate_transition_k2`].
pub fn rate_transition_k2_zform(params: &ModelParams, t: usize) -> Result<f64> {
    if params.k() != 2 {
        return Err(Error::InvalidParams(format!(
            "k = 2 curve requested for k = {}",
            params.k()
        )));
    }
    check_start(params, t)?;
    let lnc = ln_cos_pi_n(params.n());
    let q = ((2.0 * t as f64 - params.n() as f64 + 4.0) * lnc).exp();
    let th = theta4_dz(q)?;
    // d/dw = (1/2) d/dz
    let ratio_w = (th.d4 / 16.0) / (th.d2 / 4.0);
    Ok(prefactor(params) * (2.0 * lnc).exp() * (1.0 + ratio_w))
}

/// `lambda_eff(t) - lambda_1` for `k = n/2`:
/// `(2a)^2 (pi/n)^2 (1 + theta1^(2)/theta1)(pi/n, q)`, `q = c^{8t-2n+4}`,
/// from the lattice sum.
pub fn rate_transition_half(params: &ModelParams, t: usize) -> Result<RateValue> {
    if 2 * params.k() != params.n() {
        return Err(Error::InvalidParams(format!(
            "k = n/2 curve requested for k = {}, n = {}",
            params.k(),
            params.n()
        )));
    }
    check_start(params, t)?;
    let n = params.n();
    let lnq = (8.0 * t as f64 - 2.0 * n as f64 + 4.0) * ln_cos_pi_n(n);
    let l = lattice_ln(PI / n as f64, lnq)?;
    Ok(RateValue {
        t,
        value: prefactor(params) * l,
        regime: regime_half(params, t),
    })
}

/// The `k = n/2` curve in the `q`-derivative form
/// `(2a)^2 (pi/n)^2 [1 - 4 q theta1'/theta1]`, extended precision.
pub fn rate_transition_half_qform(params: &ModelParams, t: usize) -> Result<f64> {
    if 2 * params.k() != params.n() {
        return Err(Error::InvalidParams(format!(
            "k = n/2 curve requested for k = {}, n = {}",
            params.k(),
            params.n()
        )));
    }
    check_start(params, t)?;
    let n = params.n();
    let q = ((8.0 * t as f64 - 2.0 * n as f64 + 4.0) * ln_cos_pi_n(n)).exp();
    let (s0, s1, _, _, bits) = theta1_sums(PI / n as f64, q)?;
    // q theta1'/theta1 = s1/s0
    let l = with_precision(bits, || (Mp::one() - Mp::from_i64(4) * s1 / s0).to_f64());
    Ok(prefactor(params) * l)
}

/// The curve matching `params.k()`, which must be 2 or `n/2`.
pub fn rate_transition(params: &ModelParams, t: usize) -> Result<RateValue> {
    if params.k() == 2 {
        rate_transition_k2(params, t)
    } else if 2 * params.k() == params.n() {
        rate_transition_half(params, t)
    } else {
        Err(Error::InvalidParams(format!(
            "closed-form curve exists only for k = 2 and k = n/2 (got k = {})",
            params.k()
        )))
    }
}

/// [`rate_transition`] over a grid of times, in parallel.
pub fn transition_curve(params: &ModelParams, ts: &[usize]) -> Result<Vec<RateValue>> {
    ts.par_iter().map(|&t| rate_transition(params, t)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AsymptoteRegime {
    Short,
    Long,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Asymptote {
    pub value: f64,
    /// The long form with `cos(pi/n)^{mt}` replaced by `exp(-m pi^2 t / (2n^2))`.
    pub exp_form: Option<f64>,
}

fn long_form(params: &ModelParams, t: usize, coeff: f64, m: f64) -> Asymptote {
    let n = params.n() as f64;
    let pre = coeff * prefactor(params);
    let tf = t as f64;
    Asymptote {
        value: pre * (m * tf * ln_cos_pi_n(params.n())).exp(),
        exp_form: Some(pre * (-m * PI * PI * tf / (2.0 * n * n)).exp()),
    }
}

/// Short: `(2a)^2 (n/t)^2 / 4`. Long: `12 (2a)^2 (pi/n)^2 cos(pi/n)^{6t}`.
pub fn asymptote_k2(params: &ModelParams, t: usize, regime: AsymptoteRegime) -> Asymptote {
    match regime {
        AsymptoteRegime::Short => {
            let a2 = 2.0 * params.alpha_f64();
            let r = params.n() as f64 / t as f64;
            Asymptote {
                value: a2 * a2 * r * r / 4.0,
                exp_form: None,
            }
        }
        AsymptoteRegime::Long => long_form(params, t, 12.0, 6.0),
    }
}

/// `1/24 + 1/(8 pi^2)`.
pub fn half_short_coefficient() -> f64 {
    1.0 / 24.0 + 1.0 / (8.0 * PI * PI)
}

/// Short: `(2a)^2 (1/24 + 1/(8 pi^2)) (n/t)^2`. Long:
/// `24 (2a)^2 (pi/n)^2 cos(pi/n)^{16t}`.
pub fn asymptote_half(params: &ModelParams, t: usize, regime: AsymptoteRegime) -> Asymptote {
    match regime {
        AsymptoteRegime::Short => {
            let a2 = 2.0 * params.alpha_f64();
            let r = params.n() as f64 / t as f64;
            Asymptote {
                value: a2 * a2 * half_short_coefficient() * r * r,
                exp_form: None,
            }
        }
        AsymptoteRegime::Long => long_form(params, t, 24.0, 16.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::make_params;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn theta4_at_zero_nome() {
        let e = theta4_dq(0.0).unwrap();
        assert_eq!((e.value, e.dq, e.dqq), (1.0, -2.0, Some(0.0)));
        assert!(theta4_dq(1.0).is_err());
        assert!(theta4_dq(-0.1).is_err());
    }

    #[test]
    fn theta4_half_nome_against_long_sum() {
        // 40 terms, far past double resolution
        let oracle = 1.0
            + 2.0
                * (1..=40)
                    .map(|j: i32| (-1f64).powi(j) * 0.5f64.powi(j * j))
                    .sum::<f64>();
        let e = theta4_dq(0.5).unwrap();
        assert!((e.value - oracle).abs() < 1e-15);
        assert!((e.value - 0.121124).abs() < 5e-7);
        assert!(e.terms >= MIN_TERMS);
    }

    #[test]
    fn theta4_decreasing_on_unit_interval() {
        let mut prev = f64::INFINITY;
        for i in 0..=900 {
            let v = theta4_dq(i as f64 * 1e-3).unwrap().value;
            assert!(v < prev, "q={}", i as f64 * 1e-3);
            prev = v;
        }
    }

    #[test]
    fn modular_and_direct_theta4_agree() {
        for q in [0.3, 0.5, 0.55, 0.7, 0.9] {
            let z = theta4_dz(q).unwrap();
            let lnq = f64::ln(q);
            let m = modular_sums(lnq, false);
            let s = -lnq / PI;
            assert!(rel(2.0 * s.powf(-0.5) * m.p0, z.value) < 1e-12, "q={q}");
        }
    }

    #[test]
    fn heat_equation() {
        for i in 1..=99 {
            let q = i as f64 / 100.0;
            let dq = theta4_dq(q).unwrap().dq;
            let dz = theta4_dz(q).unwrap();
            assert!(rel(-dz.d2 / (4.0 * q), dq) < 1e-10, "q={q}");
        }
    }

    #[test]
    fn k2_forms_agree() {
        let params = make_params(400, 2, 5).unwrap();
        for t in [397usize, 400, 450, 800, 2000, 8000, 16000, 40000] {
            let a = rate_transition_k2(&params, t).unwrap().value;
            let b = rate_transition_k2_zform(&params, t).unwrap();
            assert!(rel(a, b) < 1e-10, "t={t}: {a} vs {b}");
        }
    }

    #[test]
    fn k2_series_and_modular_routes_meet() {
        let direct = |lnq: f64| {
            let (mut num, mut den) = (0.0, 0.0);
            for j in 1..200usize {
                let jj = (j * j) as f64;
                let s = if j % 2 == 0 { 1.0 } else { -1.0 };
                let w = ((jj - 1.0) * lnq).exp();
                num += s * jj * (jj - 1.0) * w;
                den += s * jj * w;
            }
            num / den
        };
        for q in [0.5f64, 0.6, 0.7] {
            let m = k2_ratio(q.ln()).unwrap();
            assert!(rel(m, direct(q.ln())) < 1e-12, "q={q}");
        }
    }

    #[test]
    fn theta1_leading_term_and_quarter_period() {
        let z = 0.7;
        let e = theta1_dq(z, 1e-12).unwrap();
        assert!(rel(e.value, 2.0 * 1e-3 * z.sin()) < 1e-12);
        assert_eq!(theta1_dq(z, 0.0).unwrap().value, 0.0);
        // z = pi/2: sin((2k+1) pi/2) = (-1)^k
        let q: f64 = 0.3;
        let oracle = 2.0 * q.powf(0.25) * (0..20).map(|k: i32| q.powi(k * (k + 1))).sum::<f64>();
        assert!(rel(theta1_dq(PI / 2.0, q).unwrap().value, oracle) < 1e-14);
    }

    #[test]
    fn theta1_dq_matches_finite_difference() {
        let (z, q) = (0.3, 0.4);
        let h = 1e-6;
        let fd =
            (theta1_dq(z, q + h).unwrap().value - theta1_dq(z, q - h).unwrap().value) / (2.0 * h);
        assert!(rel(theta1_dq(z, q).unwrap().dq, fd) < 1e-8);
    }

    #[test]
    fn theta1_log_derivative_two_ways() {
        for z in [PI / 40.0, PI / 1000.0, 0.5] {
            for q in [0.01, 0.1, 0.5, 0.9, 0.95, 0.99] {
                let a = theta1_log_d2_series(z, q).unwrap();
                let b = theta1_log_d2_lattice(z, q).unwrap();
                assert!(rel(a, b) < 1e-10, "z={z} q={q}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn half_forms_agree() {
        let params = make_params(200, 100, 5).unwrap();
        for t in [99usize, 110, 200, 400, 1000, 4000] {
            let a = rate_transition_half(&params, t).unwrap().value;
            let b = rate_transition_half_qform(&params, t).unwrap();
            assert!(rel(a, b) < 1e-10, "t={t}: {a} vs {b}");
        }
    }

    #[test]
    fn preconditions() {
        let p = make_params(40, 3, 5).unwrap();
        assert!(rate_transition_k2(&p, 100).is_err());
        assert!(rate_transition_half(&p, 100).is_err());
        let p = make_params(40, 2, 5).unwrap();
        assert!(matches!(
            rate_transition_k2(&p, 36),
            Err(Error::OutOfRange(_))
        ));
        assert!(rate_transition_k2(&p, 37).is_ok());
        assert!(theta1_dq(0.0, 0.5).is_err());
    }

    #[test]
    fn asymptote_substitutions() {
        let p = make_params(100, 2, 5).unwrap();
        let a2 = (2.0 * p.alpha_f64()).powi(2);
        let pn = (PI / 100.0).powi(2);
        assert!(
            rel(
                asymptote_k2(&p, 100, AsymptoteRegime::Short).value,
                a2 / 4.0
            ) < 1e-15
        );
        assert!(
            rel(
                asymptote_k2(&p, 0, AsymptoteRegime::Long).value,
                12.0 * a2 * pn
            ) < 1e-15
        );
        assert!(
            rel(
                asymptote_half(&p, 100, AsymptoteRegime::Short).value,
                a2 * 0.054_331_814_621_958_886
            ) < 1e-15
        );
        assert!(
            rel(
                asymptote_half(&p, 0, AsymptoteRegime::Long).value,
                24.0 * a2 * pn
            ) < 1e-15
        );
        // short form depends on t/n, long on t/n^2
        let q = make_params(200, 2, 5).unwrap();
        let s1 = asymptote_k2(&p, 300, AsymptoteRegime::Short).value;
        let s2 = asymptote_k2(&q, 600, AsymptoteRegime::Short).value;
        assert!(rel(s1, s2) < 1e-15);
        let l1 = asymptote_k2(&p, 3000, AsymptoteRegime::Long)
            .exp_form
            .unwrap()
            / pn;
        let l2 = asymptote_k2(&q, 12000, AsymptoteRegime::Long)
            .exp_form
            .unwrap()
            / (pn / 4.0);
        assert!(rel(l1, l2) < 1e-12);
    }

    #[test]
    fn long_time_limit_reaches_lambda1() {
        let p = make_params(40, 2, 5).unwrap();
        let v = rate_transition_k2(&p, 100_000).unwrap().value;
        assert!((0.0..1e-300).contains(&v));
        let v = rate_transition_k2(&p, 10_000_000).unwrap().value;
        assert_eq!(v, 0.0);
    }

    #[test]
    fn curves_positive_and_decreasing() {
        for n in [40usize, 200, 1000] {
            for k in [2, n / 2] {
                let p = make_params(n, k, 5).unwrap();
                let t0 = n - k - 1 + n / 4 + 1;
                let mut prev = f64::INFINITY;
                for t in (t0..t0 + n * n / 4).step_by(n / 8) {
                    let v = rate_transition(&p, t).unwrap().value;
                    assert!(v > 0.0 && v < prev, "n={n} k={k} t={t}");
                    prev = v;
                }
            }
        }
    }

    #[test]
    fn half_long_form_is_the_single_term_limit() {
        // The leading lattice term is 24 q^2 = 24 c^{16t - 4n + 8}; the long
        // form drops the t-independent c^{-4n+8} ~ exp(2 pi^2 / n).
        let n = 400usize;
        let p = make_params(n, n / 2, 5).unwrap();
        let offset = (-(4.0 * n as f64 - 8.0) * ln_cos_pi_n(n)).exp();
        for t in (n * n / 10..n * n / 2).step_by(n * 7) {
            let rate = rate_transition_half(&p, t).unwrap().value;
            let long = asymptote_half(&p, t, AsymptoteRegime::Long).value;
            assert!(rel(rate, long * offset) < 1e-2, "t={t}");
        }
        assert!(offset > 1.04 && offset < 1.06);
    }

    fn collapse_spread(half: bool, strip_offset: bool) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..=45 {
            let x = 0.1 + i as f64 * 0.02;
            let v: Vec<f64> = [500usize, 1000, 2000]
                .iter()
                .map(|&n| {
                    let p = make_params(n, if half { n / 2 } else { 2 }, 5).unwrap();
                    let t = (x * (n * n) as f64).round() as usize;
                    // t-independent factor the long forms drop
                    let e = if half {
                        4.0 * n as f64 - 8.0
                    } else {
                        3.0 * n as f64 - 14.0
                    };
                    let off = if strip_offset {
                        (e * ln_cos_pi_n(n)).exp()
                    } else {
                        1.0
                    };
                    rate_transition(&p, t).unwrap().value * (n * n) as f64 * off
                })
                .collect();
            let mx = v.iter().cloned().fold(0.0, f64::max);
            let mn = v.iter().cloned().fold(f64::INFINITY, f64::min);
            worst = worst.max(mx / mn - 1.0);
        }
        worst
    }

    #[test]
    fn scaling_collapse() {
        // n^2 times the rate against t/n^2 collapses up to c^{-3n+14}
        // (k = 2) or c^{-4n+8} (k = n/2), i.e. 3-4% between n = 500 and 2000
        for half in [false, true] {
            let raw = collapse_spread(half, false);
            assert!(raw > 0.02 && raw < 0.04, "half={half}: {raw}");
            let s = collapse_spread(half, true);
            assert!(s < 5e-3, "half={half}: {s}");
        }
    }

    #[test]
    fn regimes() {
        let p = make_params(2000, 2, 5).unwrap();
        assert_eq!(regime_k2(&p, 100), Regime::Plateau);
        assert_eq!(regime_k2(&p, 2000), Regime::Transition);
        assert_eq!(regime_k2(&p, 10_000), Regime::ShortTime);
        assert_eq!(regime_k2(&p, 400_000), Regime::LongTime);
        let h = make_params(2000, 1000, 5).unwrap();
        assert_eq!(regime_half(&h, 4000), Regime::ShortTime);
        assert_eq!(regime_half(&h, 200_000), Regime::LongTime);
    }
}
