//! The purity propagator and its iteration.
//!
//! Components are 1-based in the public API: `I_1 = I_n = 1` are pinned and
//! the interior `2..=n-1` evolves under the Toeplitz block `T`.

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::exact::{int, rat, ratio_to_f64, ratio_to_lognum, rpow, Rational};
use crate::lognum::LogNum;
use crate::mp::{with_precision, Mp};
use crate::real::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    n: usize,
    k: usize,
    d: u32,
    alpha: Rational,
}

/// Validated model parameters; `alpha = d/(d^2+1)` is kept exact.
pub fn make_params(n: usize, k: usize, d: u32) -> Result<ModelParams> {
    ModelParams::new(n, k, d)
}

impl ModelParams {
    pub fn new(n: usize, k: usize, d: u32) -> Result<Self> {
        let mut problems = Vec::new();
        if n % 2 == 1 {
            problems.push(format!("n must be even (got {n})"));
        }
        if n < 4 {
            problems.push(format!("n must be at least 4 (got {n})"));
        }
        if k < 2 || k + 1 > n {
            problems.push(format!("k must satisfy 2 <= k <= n-1 (got k={k}, n={n})"));
        }
        if d < 2 {
            problems.push(format!("d must be at least 2 (got {d})"));
        }
        if !problems.is_empty() {
            return Err(Error::InvalidParams(problems.join("; ")));
        }
        let d64 = i64::from(d);
        Ok(ModelParams {
            n,
            k,
            d,
            alpha: rat(d64, d64 * d64 + 1),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn k(&self) -> usize {
        self.k
    }
    pub fn d(&self) -> u32 {
        self.d
    }
    pub fn alpha(&self) -> &Rational {
        &self.alpha
    }
    pub fn alpha_f64(&self) -> f64 {
        ratio_to_f64(&self.alpha)
    }

    /// Same system, different cut.
    pub fn with_k(&self, k: usize) -> Result<Self> {
        ModelParams::new(self.n, k, self.d)
    }

    /// Size of the Toeplitz block.
    pub fn m(&self) -> usize {
        self.n - 2
    }

    pub fn alpha_real<R: Real>(&self) -> R {
        R::from_ratio(&self.alpha)
    }

    pub fn lambda_ph_exact(&self) -> Rational {
        &self.alpha / (Rational::one() - &self.alpha)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArithMode {
    Rational,
    Float64,
    /// Extended precision with the given mantissa bits.
    Extended(usize),
}

impl ArithMode {
    pub fn name(&self) -> String {
        match self {
            ArithMode::Rational => "rational".into(),
            ArithMode::Float64 => "float64".into(),
            ArithMode::Extended(b) => format!("extended{b}"),
        }
    }
}

/// Mantissa bits that keep rounding noise from displacing the slowest
/// eigenvalue: the eigenvalue condition number grows like `(2 alpha)^-n`.
pub fn auto_precision_bits(params: &ModelParams) -> usize {
    let a = params.alpha_f64();
    let n = params.n() as f64;
    (96.0 + 2.0 * n * (1.0 / (2.0 * a)).log2() + 4.0 * n.log2()).ceil() as usize
}

#[derive(Clone, Debug)]
pub enum Matrix {
    Rational(Vec<Vec<Rational>>),
    Float64(Vec<Vec<f64>>),
}

#[derive(Clone, Debug)]
pub struct Propagator {
    pub n: usize,
    pub matrix: Matrix,
}

impl Propagator {
    /// Entry `(i, j)` with 1-based indices, as a double.
    pub fn get_f64(&self, i: usize, j: usize) -> f64 {
        match &self.matrix {
            Matrix::Rational(m) => ratio_to_f64(&m[i - 1][j - 1]),
            Matrix::Float64(m) => m[i - 1][j - 1],
        }
    }

    pub fn rational(&self) -> Option<&Vec<Vec<Rational>>> {
        match &self.matrix {
            Matrix::Rational(m) => Some(m),
            _ => None,
        }
    }

    pub fn float(&self) -> Vec<Vec<f64>> {
        match &self.matrix {
            Matrix::Rational(m) => m
                .iter()
                .map(|r| r.iter().map(ratio_to_f64).collect())
                .collect(),
            Matrix::Float64(m) => m.clone(),
        }
    }
}

/// Interior Toeplitz block `T` (size `n-2`), exact. Indices 0-based here.
pub fn t_block_exact(params: &ModelParams) -> Vec<Vec<Rational>> {
    let m = params.m();
    let a = params.alpha();
    let powers: Vec<Rational> = (0..=params.n()).map(|e| rpow(a, e as i64)).collect();
    (0..m)
        .map(|i| {
            (0..m)
                .map(|j| {
                    if j <= i + 1 {
                        powers[i + 2 - j].clone()
                    } else {
                        Rational::zero()
                    }
                })
                .collect()
        })
        .collect()
}

pub fn t_block<R: Real>(params: &ModelParams) -> Vec<Vec<R>> {
    t_block_exact(params)
        .iter()
        .map(|r| r.iter().map(R::from_ratio).collect())
        .collect()
}

/// Boundary columns: `a1 = (alpha^2, ..., alpha^{n-1})`, `a2 = (0, ..., 0, alpha)`.
pub fn boundary_vectors_exact(params: &ModelParams) -> (Vec<Rational>, Vec<Rational>) {
    let m = params.m();
    let a = params.alpha();
    let a1 = (0..m).map(|i| rpow(a, i as i64 + 2)).collect();
    let mut a2 = vec![Rational::zero(); m];
    a2[m - 1] = a.clone();
    (a1, a2)
}

pub fn build_propagator_exact(params: &ModelParams) -> Vec<Vec<Rational>> {
    let n = params.n();
    let t = t_block_exact(params);
    let (a1, a2) = boundary_vectors_exact(params);
    let mut a = vec![vec![Rational::zero(); n]; n];
    a[0][0] = Rational::one();
    a[n - 1][n - 1] = Rational::one();
    for i in 0..n - 2 {
        a[i + 1][0] = a1[i].clone();
        a[i + 1][n - 1] = a2[i].clone();
        for j in 0..n - 2 {
            a[i + 1][j + 1] = t[i][j].clone();
        }
    }
    a
}

pub fn build_propagator(params: &ModelParams, mode: ArithMode) -> Result<Propagator> {
    let exact = build_propagator_exact(params);
    let matrix = match mode {
        ArithMode::Rational => Matrix::Rational(exact),
        ArithMode::Float64 => Matrix::Float64(
            exact
                .iter()
                .map(|r| r.iter().map(ratio_to_f64).collect())
                .collect(),
        ),
        ArithMode::Extended(_) => {
            return Err(Error::InvalidParams(
                "the dense propagator is built in rational or float64 mode".into(),
            ))
        }
    };
    Ok(Propagator {
        n: params.n(),
        matrix,
    })
}

/// `I_inf` as a full length-`n` vector, exact.
pub fn steady_state_exact(params: &ModelParams) -> Vec<Rational> {
    let n = params.n() as u32;
    let d = BigInt::from(params.d());
    let denom = d.pow(n) + 1u32;
    (1..=n)
        .map(|kk| {
            if kk == 1 || kk == n {
                Rational::one()
            } else {
                Rational::new(d.pow(kk) + d.pow(n - kk), denom.clone())
            }
        })
        .collect()
}

pub fn steady_state(params: &ModelParams) -> Vec<f64> {
    steady_state_exact(params)
        .iter()
        .map(ratio_to_f64)
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rates {
    pub lambda_ph: f64,
    pub lambda_1: f64,
}

pub fn characteristic_rates(params: &ModelParams) -> Rates {
    let a = params.alpha_f64();
    let c = (std::f64::consts::PI / params.n() as f64).cos();
    Rates {
        lambda_ph: a / (1.0 - a),
        lambda_1: (2.0 * a * c).powi(2),
    }
}

/// `lambda_1` in working arithmetic `R`.
pub fn lambda_1_real<R: Real>(params: &ModelParams) -> R {
    let a: R = params.alpha_real();
    let c = (R::pi() / R::from_i64(params.n() as i64)).cos();
    let x = R::from_i64(2) * a * c;
    x.clone() * x
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Timescales {
    pub t_k: usize,
    pub t_c: usize,
    pub t_inf: f64,
}

pub fn timescales(params: &ModelParams) -> Timescales {
    let t_c = params.n() - params.k() - 1;
    let r = characteristic_rates(params);
    let kmin = params.k().min(params.n() - params.k()) as f64;
    Timescales {
        t_k: t_c / 2,
        t_c,
        t_inf: kmin * f64::from(params.d()).ln() / -r.lambda_ph.ln(),
    }
}

/// Structured `y = T x` in `O(n)`: `(Tx)_i = alpha x_{i+1} + alpha^2 s_i`,
/// `s_i = alpha s_{i-1} + x_i`.
pub fn t_apply<R: Real>(alpha: &R, x: &[R], y: &mut [R]) {
    let m = x.len();
    let a2 = alpha.clone() * alpha.clone();
    let mut s = R::zero();
    for i in 0..m {
        s = alpha.clone() * s + x[i].clone();
        let mut v = a2.clone() * s.clone();
        if i + 1 < m {
            v += alpha.clone() * x[i + 1].clone();
        }
        y[i] = v;
    }
}

/// Integer form of `T`: with `x = X / beta^s`, returns `Y` such that
/// `T x = Y / beta^{s+n-1}`, where `beta = d^2+1`.
struct IntStepper {
    d: BigInt,
    d2: BigInt,
    beta_pows: Vec<BigInt>,
    n: usize,
}

impl IntStepper {
    fn new(params: &ModelParams) -> Self {
        let d = BigInt::from(params.d());
        let beta = &d * &d + 1;
        let mut beta_pows = vec![BigInt::one()];
        for _ in 0..params.n() {
            let next = beta_pows.last().unwrap() * &beta;
            beta_pows.push(next);
        }
        IntStepper {
            d2: &d * &d,
            d,
            beta_pows,
            n: params.n(),
        }
    }

    fn apply(&self, x: &[BigInt]) -> Vec<BigInt> {
        let m = x.len();
        let n = self.n;
        let mut y = Vec::with_capacity(m);
        // V_i = d V_{i-1} + beta^i X_i;  Y_i = d beta^{n-2} X_{i+1} + d^2 beta^{n-3-i} V_i
        let mut v = BigInt::zero();
        for i in 0..m {
            v = &self.d * &v + &self.beta_pows[i] * &x[i];
            let mut yi = &self.d2 * &self.beta_pows[n - 3 - i] * &v;
            if i + 1 < m {
                yi += &self.d * &self.beta_pows[n - 2] * &x[i + 1];
            }
            y.push(yi);
        }
        y
    }

    fn step_factor(&self) -> &BigInt {
        &self.beta_pows[self.n - 1]
    }
}

/// Full purity vectors `I(0..=t_max)`.
#[derive(Clone, Debug)]
pub enum Trajectory {
    Rational {
        params: ModelParams,
        states: Vec<Vec<Rational>>,
    },
    Float64 {
        params: ModelParams,
        steady: Vec<f64>,
        deviations: Vec<Vec<f64>>,
    },
}

/// Default cap on the numerator size of exact trajectories.
pub const DEFAULT_MAX_BITS: u64 = 1 << 26;

pub fn iterate_trajectory(
    params: &ModelParams,
    t_max: usize,
    mode: ArithMode,
) -> Result<Trajectory> {
    iterate_trajectory_limited(params, t_max, mode, DEFAULT_MAX_BITS)
}

/// As [`iterate_trajectory`], failing once an exact numerator would exceed
/// `max_bits`.
pub fn iterate_trajectory_limited(
    params: &ModelParams,
    t_max: usize,
    mode: ArithMode,
    max_bits: u64,
) -> Result<Trajectory> {
    match mode {
        ArithMode::Rational => {
            // I(t+1) = a1 + T x + a2 on the interior, with x = X / beta^{(n-1)t}.
            let stepper = IntStepper::new(params);
            let m = params.m();
            let (a1, a2) = boundary_vectors_exact(params);
            let scale = Rational::from_integer(stepper.step_factor().clone());
            let c: Vec<BigInt> = a1
                .iter()
                .zip(&a2)
                .map(|(u, v)| {
                    let w = (u + v) * &scale;
                    debug_assert!(w.is_integer());
                    w.to_integer()
                })
                .collect();
            let mut x: Vec<BigInt> = vec![BigInt::one(); m];
            let mut denom = BigInt::one();
            let mut states = vec![vec![Rational::one(); params.n()]];
            for t in 0..t_max {
                let mut y = stepper.apply(&x);
                for (yi, ci) in y.iter_mut().zip(&c) {
                    *yi += ci * &denom;
                }
                denom *= stepper.step_factor();
                if denom.bits() > max_bits {
                    return Err(Error::Resource(format!(
                        "exact trajectory denominator exceeds {max_bits} bits at t={}",
                        t + 1
                    )));
                }
                x = y;
                let mut state = Vec::with_capacity(params.n());
                state.push(Rational::one());
                state.extend(x.iter().map(|xi| Rational::new(xi.clone(), denom.clone())));
                state.push(Rational::one());
                states.push(state);
            }
            Ok(Trajectory::Rational { params: params.clone(), states })
        }
        ArithMode::Float64 => {
            // iterate the deviation from I_inf; T is nonnegative so nothing cancels
            let steady = steady_state(params);
            let dev0: Vec<f64> = steady_state_exact(params)[1..params.n() - 1]
                .iter()
                .map(|s| ratio_to_f64(&(Rational::one() - s)))
                .collect();
            let alpha = params.alpha_f64();
            let mut deviations = vec![dev0];
            for _ in 0..t_max {
                let mut y = vec![0.0; params.m()];
                t_apply(&alpha, deviations.last().unwrap(), &mut y);
                deviations.push(y);
            }
            Ok(Trajectory::Float64 { params: params.clone(), steady, deviations })
        }
        ArithMode::Extended(_) => Err(Error::InvalidParams(
            "trajectories are stored in rational or float64 mode; use delta_sequences for extended precision".into(),
        )),
    }
}

impl Trajectory {
    pub fn params(&self) -> &ModelParams {
        match self {
            Trajectory::Rational { params, .. } | Trajectory::Float64 { params, .. } => params,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Trajectory::Rational { states, .. } => states.len(),
            Trajectory::Float64 { deviations, .. } => deviations.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `I_k(t)` with 1-based `k`.
    pub fn component_f64(&self, t: usize, k: usize) -> f64 {
        match self {
            Trajectory::Rational { states, .. } => ratio_to_f64(&states[t][k - 1]),
            Trajectory::Float64 {
                params,
                steady,
                deviations,
            } => {
                if k == 1 || k == params.n() {
                    1.0
                } else {
                    steady[k - 1] + deviations[t][k - 2]
                }
            }
        }
    }

    pub fn component_exact(&self, t: usize, k: usize) -> Option<&Rational> {
        match self {
            Trajectory::Rational { states, .. } => Some(&states[t][k - 1]),
            _ => None,
        }
    }

    pub fn state_f64(&self, t: usize) -> Vec<f64> {
        (1..=self.params().n())
            .map(|k| self.component_f64(t, k))
            .collect()
    }
}

/// `Delta I_k(t) = I_k(t) - [I_inf]_k` along a trajectory, for the cut `k`
/// of `params`.
pub fn delta_purity(traj: &Trajectory, params: &ModelParams) -> Result<Vec<LogNum>> {
    let tp = traj.params();
    if tp.n() != params.n() || tp.d() != params.d() {
        return Err(Error::InvalidParams(
            "trajectory computed for different (n, d)".into(),
        ));
    }
    let k = params.k();
    match traj {
        Trajectory::Rational { states, .. } => {
            let s = &steady_state_exact(params)[k - 1];
            Ok(states
                .iter()
                .map(|st| ratio_to_lognum(&(&st[k - 1] - s)))
                .collect())
        }
        Trajectory::Float64 { deviations, .. } => Ok(deviations
            .iter()
            .map(|dv| LogNum::from_f64(dv[k - 2]))
            .collect()),
    }
}

/// One-step ratio `Delta I(t+1) / Delta I(t)`; `None` where either value is
/// non-positive or not representable.
pub fn effective_rate(delta: &[LogNum]) -> Vec<Option<f64>> {
    delta
        .windows(2)
        .map(|w| {
            let ok = |x: &LogNum| x.sign > 0 && x.ln_abs.is_finite();
            (ok(&w[0]) && ok(&w[1])).then(|| (w[1].ln_abs - w[0].ln_abs).exp())
        })
        .collect()
}

/// One time step of the deviation engine.
#[derive(Clone, Debug)]
pub struct DeltaSample {
    pub t: usize,
    /// `Delta I_k(t)` for each requested cut, in request order.
    pub delta: Vec<LogNum>,
    /// `Delta I_k(t+1)/Delta I_k(t)` evaluated in the working arithmetic.
    pub rate: Vec<Option<f64>>,
    /// `rate - lambda_1`, also in the working arithmetic (no cancellation
    /// from rounding the rate first).
    pub rate_minus_lambda1: Vec<Option<f64>>,
}

/// Iterate the deviation `Delta I(t+1) = T Delta I(t)` from the product state
/// and report the requested cuts for `t = 0..=t_max`. The rate entries of the
/// last sample are `None`.
pub fn delta_sequences(
    params: &ModelParams,
    ks: &[usize],
    t_max: usize,
    mode: ArithMode,
) -> Result<Vec<DeltaSample>> {
    for &k in ks {
        params.with_k(k)?;
    }
    let idx: Vec<usize> = ks.iter().map(|k| k - 2).collect();
    match mode {
        ArithMode::Rational => deltas_rational(params, &idx, t_max),
        ArithMode::Float64 => Ok(deltas_scaled::<f64>(params, &idx, t_max)),
        ArithMode::Extended(bits) => {
            with_precision(bits, || Ok(deltas_scaled::<Mp>(params, &idx, t_max)))
        }
    }
}

fn ratio_pair<F: Fn(&Rational) -> f64>(
    x0: &Rational,
    x1: &Rational,
    l1: &Rational,
    f: F,
) -> (Option<f64>, Option<f64>) {
    if x0 <= &Rational::zero() || x1 <= &Rational::zero() {
        return (None, None);
    }
    let r = x1 / x0;
    (Some(f(&r)), Some(f(&(r - l1))))
}

fn deltas_rational(params: &ModelParams, idx: &[usize], t_max: usize) -> Result<Vec<DeltaSample>> {
    // Delta(t) = Z(t) / (Q beta^{(n-1)t}),  Q = 1 + d^n
    let stepper = IntStepper::new(params);
    let ss = steady_state_exact(params);
    let q = BigInt::from(params.d()).pow(params.n() as u32) + 1u32;
    let mut z: Vec<BigInt> = ss[1..params.n() - 1]
        .iter()
        .map(|s| ((Rational::one() - s) * Rational::from_integer(q.clone())).to_integer())
        .collect();
    let mut denom = q;
    // lambda_1 is irrational; a 256-bit value is ample for the difference
    let l1 = with_precision(320, || {
        let l: Mp = lambda_1_real(params);
        l.to_rational()
    });
    let mut out: Vec<DeltaSample> = Vec::with_capacity(t_max + 1);
    let mut prev: Option<Vec<Rational>> = None;
    for t in 0..=t_max {
        let cur: Vec<Rational> = idx
            .iter()
            .map(|&i| Rational::new(z[i].clone(), denom.clone()))
            .collect();
        if let (Some(p), Some(last)) = (&prev, out.last_mut()) {
            for (j, (x0, x1)) in p.iter().zip(&cur).enumerate() {
                let (r, rd) = ratio_pair(x0, x1, &l1, ratio_to_f64);
                last.rate[j] = r;
                last.rate_minus_lambda1[j] = rd;
            }
        }
        out.push(DeltaSample {
            t,
            delta: cur.iter().map(ratio_to_lognum).collect(),
            rate: vec![None; idx.len()],
            rate_minus_lambda1: vec![None; idx.len()],
        });
        prev = Some(cur);
        if t < t_max {
            z = stepper.apply(&z);
            denom *= stepper.step_factor();
        }
    }
    Ok(out)
}

fn deltas_scaled<R: Real>(params: &ModelParams, idx: &[usize], t_max: usize) -> Vec<DeltaSample> {
    let alpha: R = params.alpha_real();
    let l1: R = lambda_1_real(params);
    let ss = steady_state_exact(params);
    let mut x: Vec<R> = ss[1..params.n() - 1]
        .iter()
        .map(|s| R::from_ratio(&(Rational::one() - s)))
        .collect();
    let mut log_scale = 0.0f64;
    let mut y = vec![R::zero(); x.len()];
    let mut out: Vec<DeltaSample> = Vec::with_capacity(t_max + 1);
    for t in 0..=t_max {
        out.push(DeltaSample {
            t,
            delta: idx
                .iter()
                .map(|&i| {
                    let v = &x[i];
                    if v.is_zero() {
                        LogNum::zero()
                    } else {
                        let s = if v.is_negative() { -1 } else { 1 };
                        LogNum::new(s, v.ln_abs() + log_scale)
                    }
                })
                .collect(),
            rate: vec![None; idx.len()],
            rate_minus_lambda1: vec![None; idx.len()],
        });
        if t == t_max {
            break;
        }
        t_apply(&alpha, &x, &mut y);
        let last = out.last_mut().unwrap();
        for (j, &i) in idx.iter().enumerate() {
            if x[i] > R::zero() && y[i] > R::zero() {
                let r = y[i].clone() / x[i].clone();
                last.rate[j] = Some(r.to_f64());
                last.rate_minus_lambda1[j] = Some((r - l1.clone()).to_f64());
            }
        }
        // renormalize to keep doubles in range
        let mut mx = R::zero();
        for v in &y {
            mx = mx.max_of(v.abs());
        }
        if mx.is_zero() {
            std::mem::swap(&mut x, &mut y);
            continue;
        }
        let lm = mx.ln_abs();
        let inv = R::one() / mx;
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi.clone() * inv.clone();
        }
        log_scale += lm;
    }
    out
}

/// `Delta I_k(t)` at `t = 0` in closed form, exact.
pub fn initial_delta_exact(params: &ModelParams) -> Rational {
    Rational::one() - &steady_state_exact(params)[params.k() - 1]
}

/// `alpha^e` exactly.
pub fn alpha_pow(params: &ModelParams, e: i64) -> Rational {
    rpow(params.alpha(), e)
}

/// Small helper for tests and callers needing `(d^2+1)`.
pub fn beta(params: &ModelParams) -> Rational {
    let d = i64::from(params.d());
    int(d * d + 1)
}
