//! The Jordan kernel of `T` (eigenvalue 0, size `n/2-1`) and its purity
//! contribution.
//!
//! At `alpha = 1` the right generalized eigenvectors `r^_k` have integer
//! entries and support `1..=2k`; the left ones `l^_k` are rational with support
//! in the last `2(n/2-k)` components. A diagonal similarity carries both to
//! general `alpha`. Everything here is exact.
//!
//! Vectors are stored 0-based: `v[i]` is component `i+1`. Kernel index `k`
//! (1-based) is stored at position `k-1`.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::exact::{binomial, rat, ratio_to_f64, rpow, Rational};
use crate::lognum::LogNum;
use crate::model::{boundary_vectors_exact, delta_sequences, timescales, ArithMode, ModelParams};
use crate::mp::{with_precision, Mp};
use crate::spectral::series::{SeriesEvaluator, SeriesOptions};

fn check_n(n: usize) -> Result<()> {
    if n < 6 || n % 2 == 1 {
        return Err(Error::InvalidParams(format!(
            "kernel needs even n >= 6 (got {n})"
        )));
    }
    Ok(())
}

/// `[r^_k]_{2k-p} = -(-1)^{k+p} sum_r (-1)^r C(k-r, p-2r)`, `p = 0..2k-1`.
pub fn kernel_right_vectors(n: usize) -> Result<Vec<Vec<Rational>>> {
    check_n(n)?;
    let m = n - 2;
    Ok((1..n / 2)
        .map(|k| {
            let mut v = vec![Rational::zero(); m];
            let ki = k as i64;
            for p in 0..2 * ki {
                let mut s = BigInt::zero();
                for r in 0..=p / 2 {
                    let c = binomial(ki - r, p - 2 * r);
                    if r % 2 == 0 {
                        s += c;
                    } else {
                        s -= c;
                    }
                }
                if (ki + p) % 2 == 0 {
                    s = -s;
                }
                v[(2 * ki - p - 1) as usize] = Rational::from_integer(s);
            }
            v
        })
        .collect())
}

/// The same vectors from `[r^_k]_j = [r^_{k-1}]_{j-1} - [r^_{k-1}]_{j-2}`
/// (`j >= 3`). The first two components are the gauge freedom (adding
/// multiples of `r^_1`); fixed here at `-1, 0`.
pub fn kernel_right_vectors_recursive(n: usize) -> Result<Vec<Vec<Rational>>> {
    check_n(n)?;
    let m = n - 2;
    let mut out: Vec<Vec<Rational>> = Vec::with_capacity(n / 2 - 1);
    let mut first = vec![Rational::zero(); m];
    first[0] = -Rational::one();
    first[1] = Rational::one();
    out.push(first);
    for _ in 2..n / 2 {
        let prev = out.last().unwrap();
        let mut v = vec![Rational::zero(); m];
        v[0] = -Rational::one();
        for j in 2..m {
            v[j] = &prev[j - 1] - &prev[j - 2];
        }
        out.push(v);
    }
    Ok(out)
}

/// Left vectors by downward recursion from
/// `l^_{n/2-1} = (-1)^{n/2} (0, ..., -2/n, 2/n)`.
///
/// Each step takes `[l^_{k-1}]_j = [l^_k]_{j+1} - [l^_k]_{j+2}` for all but
/// the last two components `(a, b)`, which follow from `a + b = [l^_k]_{n-2}`
/// and orthogonality to `r^_{n/2-1}`. Orthogonality to the lower `r^_j` is
/// automatic (it is inherited through the shift), and those vectors vanish on
/// the last two components anyway.
pub fn kernel_left_vectors(n: usize, r_hat: &[Vec<Rational>]) -> Result<Vec<Vec<Rational>>> {
    check_n(n)?;
    let m = n - 2;
    let top = n / 2 - 1;
    let sgn = if (n / 2).is_multiple_of(2) {
        Rational::one()
    } else {
        -Rational::one()
    };
    let mut seed = vec![Rational::zero(); m];
    seed[m - 2] = &sgn * rat(-2, n as i64);
    seed[m - 1] = &sgn * rat(2, n as i64);
    let rtop = &r_hat[top - 1];
    let mut rev = vec![seed];
    for k in (2..=top).rev() {
        let lk = rev.last().unwrap();
        let mut v = vec![Rational::zero(); m];
        for j in 0..m - 2 {
            let a = &lk[j + 1];
            let b = if j + 2 < m {
                lk[j + 2].clone()
            } else {
                Rational::zero()
            };
            v[j] = a - b;
        }
        // ra a + rb b = -known,  a + b = s
        let known: Rational = (0..m - 2).map(|j| &rtop[j] * &v[j]).sum();
        let s = lk[m - 1].clone();
        let (ra, rb) = (&rtop[m - 2], &rtop[m - 1]);
        let det = ra - rb;
        if det.is_zero() {
            return Err(Error::Inconsistent(format!(
                "singular tail system for n={n}, k={}",
                k - 1
            )));
        }
        let a = (-known - rb * &s) / &det;
        let b = &s - &a;
        v[m - 2] = a;
        v[m - 1] = b;
        rev.push(v);
    }
    rev.reverse();
    let basis_ok = (0..top).all(|i| {
        (0..top).all(|j| {
            dot(&r_hat[i], &rev[j])
                == if i == j {
                    Rational::one()
                } else {
                    Rational::zero()
                }
        })
    });
    if !basis_ok {
        return Err(Error::Inconsistent(format!(
            "kernel vectors are not biorthonormal for n={n}"
        )));
    }
    Ok(rev)
}

fn dot(a: &[Rational], b: &[Rational]) -> Rational {
    a.iter()
        .zip(b)
        .filter(|(x, y)| !x.is_zero() && !y.is_zero())
        .map(|(x, y)| x * y)
        .sum()
}

/// Kernel vectors at one `alpha`, optionally lifted to `A`.
#[derive(Clone, Debug)]
pub struct KernelBasis {
    pub n: usize,
    pub alpha: Rational,
    pub r_hat: Vec<Vec<Rational>>,
    pub l_hat: Vec<Vec<Rational>>,
    /// Rescaled vectors (equal to the hatted ones at `alpha = 1`).
    pub r: Vec<Vec<Rational>>,
    pub l: Vec<Vec<Rational>>,
    /// Length-`n` lifts `(0, r_k, 0)` and `(f_k, l_k, b_k)`; empty until
    /// [`lift_to_a`].
    pub r_a: Vec<Vec<Rational>>,
    pub l_a: Vec<Vec<Rational>>,
    pub b: Vec<Rational>,
}

impl KernelBasis {
    /// The `alpha = 1` basis.
    pub fn new(n: usize) -> Result<Self> {
        let r_hat = kernel_right_vectors(n)?;
        let l_hat = kernel_left_vectors(n, &r_hat)?;
        Ok(KernelBasis {
            n,
            alpha: Rational::one(),
            r: r_hat.clone(),
            l: l_hat.clone(),
            r_hat,
            l_hat,
            r_a: Vec::new(),
            l_a: Vec::new(),
            b: Vec::new(),
        })
    }

    /// Built, rescaled and lifted for `params`.
    pub fn for_params(params: &ModelParams) -> Result<Self> {
        let base = KernelBasis::new(params.n())?;
        Ok(lift_to_a(&rescale_alpha(&base, params.alpha()), params))
    }

    pub fn size(&self) -> usize {
        self.r_hat.len()
    }
}

/// `[r_k]_j = [r^_k]_j alpha^{j-2k}`, `[l_k]_j = [l^_k]_j alpha^{2k-j}`.
pub fn rescale_alpha(basis: &KernelBasis, alpha: &Rational) -> KernelBasis {
    let m = basis.n - 2;
    let powers: Vec<Rational> = (0..=2 * basis.n as i64)
        .map(|e| rpow(alpha, e - basis.n as i64))
        .collect();
    let pw = |e: i64| &powers[(e + basis.n as i64) as usize];
    let mut r = Vec::new();
    let mut l = Vec::new();
    for k in 1..=basis.size() {
        let ki = k as i64;
        r.push(
            (0..m)
                .map(|i| &basis.r_hat[k - 1][i] * pw(i as i64 + 1 - 2 * ki))
                .collect(),
        );
        l.push(
            (0..m)
                .map(|i| &basis.l_hat[k - 1][i] * pw(2 * ki - i as i64 - 1))
                .collect(),
        );
    }
    KernelBasis {
        alpha: alpha.clone(),
        r,
        l,
        r_a: Vec::new(),
        l_a: Vec::new(),
        b: Vec::new(),
        ..basis.clone()
    }
}

/// Lift to `A`: `r^A_k = (0, r_k, 0)`, `l^A_k = (f_k, l_k, b_k)` with
/// `b_k = b_{k+1} - a2.l_k` and likewise `f_k = f_{k+1} - a1.l_k`, both
/// starting from zero at `k = n/2`.
pub fn lift_to_a(basis: &KernelBasis, params: &ModelParams) -> KernelBasis {
    let (a1, a2) = boundary_vectors_exact(params);
    let size = basis.size();
    let mut b = vec![Rational::zero(); size + 1];
    let mut f = vec![Rational::zero(); size + 1];
    for k in (1..=size).rev() {
        b[k - 1] = &b[k] - dot(&a2, &basis.l[k - 1]);
        f[k - 1] = &f[k] - dot(&a1, &basis.l[k - 1]);
    }
    let pad = |head: Rational, v: &[Rational], tail: Rational| {
        let mut out = Vec::with_capacity(v.len() + 2);
        out.push(head);
        out.extend(v.iter().cloned());
        out.push(tail);
        out
    };
    let r_a = basis
        .r
        .iter()
        .map(|v| pad(Rational::zero(), v, Rational::zero()))
        .collect();
    let l_a = (0..size)
        .map(|k| pad(f[k].clone(), &basis.l[k], b[k].clone()))
        .collect();
    b.truncate(size);
    KernelBasis {
        r_a,
        l_a,
        b,
        ..basis.clone()
    }
}

/// `I_k^ker(t) = sum_{p=1}^{n/2-t-1} [r^A_p]_k <l^A_{p+t}|1>`, exact.
pub fn kernel_power_contribution(params: &ModelParams, t: usize) -> Result<Rational> {
    let basis = KernelBasis::for_params(params)?;
    Ok(kernel_contribution_with(&basis, params.k(), t))
}

pub fn kernel_contribution_with(basis: &KernelBasis, k: usize, t: usize) -> Rational {
    let size = basis.size();
    let mut acc = Rational::zero();
    for p in 1..=size {
        if p + t > size {
            break;
        }
        let rk = &basis.r_a[p - 1][k - 1];
        if rk.is_zero() {
            continue;
        }
        let lsum: Rational = basis.l_a[p + t - 1].iter().sum();
        acc += rk * lsum;
    }
    acc
}

/// Outcome of one kernel/spectrum cancellation test.
#[derive(Clone, Debug)]
pub struct CancellationReport {
    pub n: usize,
    pub k: usize,
    pub t: usize,
    pub kernel: Rational,
    /// Sum of the series terms with `p <= 0` (`r = 0..=t_K - t`).
    pub spectral: f64,
    /// `kernel + spectral`.
    pub residual: f64,
    /// `|residual|` over the largest cancelling term.
    pub relative_residual: f64,
    /// `|series(r_min) - Delta I| / |Delta I|` against rational iteration.
    pub series_vs_iteration: f64,
    pub passed: bool,
}

/// Tolerance for the cancellation, relative to the largest cancelling term.
pub const CANCELLATION_TOL: f64 = 1e-10;

/// Runs the kernel/spectrum cancellation test over `t = 0..=t_K` for one
/// `(n, k, d)`, sharing the basis, the iteration and the series evaluator.
pub struct KernelChecker {
    params: ModelParams,
    basis: KernelBasis,
    exact: Vec<LogNum>,
    series: SeriesEvaluator,
    t_k: usize,
    /// `sin(pi m / n)` for `m = 0..2n`, and `cos(phi_j)`, extended precision.
    sin_tab: Vec<Mp>,
    cos_tab: Vec<Mp>,
    bits: usize,
}

impl KernelChecker {
    pub fn new(params: &ModelParams) -> Result<Self> {
        let basis = KernelBasis::for_params(params)?;
        let t_k = timescales(params).t_k;
        let exact = delta_sequences(params, &[params.k()], t_k, ArithMode::Rational)?
            .into_iter()
            .map(|s| s.delta[0])
            .collect();
        let series = SeriesEvaluator::new(
            params,
            SeriesOptions {
                finite_size: true,
                ..Default::default()
            },
        )?;
        let n = params.n();
        // cos^p at p ~ -n needs n log2(n / pi) extra bits
        let bits = 192 + 2 * n * ((n as f64).log2().ceil() as usize);
        let (sin_tab, cos_tab) = with_precision(bits, || {
            let nn = Mp::from_i64(n as i64);
            let s = (0..2 * n)
                .map(|m| (Mp::pi() * Mp::from_i64(m as i64) / nn.clone()).sin())
                .collect();
            let c = (1..n / 2)
                .map(|j| (Mp::pi() * Mp::from_i64(j as i64) / nn.clone()).cos())
                .collect();
            (s, c)
        });
        Ok(KernelChecker {
            params: params.clone(),
            basis,
            exact,
            series,
            t_k,
            sin_tab,
            cos_tab,
            bits,
        })
    }

    pub fn t_k(&self) -> usize {
        self.t_k
    }

    fn magic_mp(&self, p: i64) -> Mp {
        let n = self.params.n();
        let k = self.params.k();
        let mut acc = Mp::zero();
        for j in 1..n / 2 {
            let term = self.cos_tab[j - 1].powi(p)
                * self.sin_tab[j].clone()
                * self.sin_tab[(k * j) % (2 * n)].clone();
            if j % 2 == 0 {
                acc -= term;
            } else {
                acc += term;
            }
        }
        acc
    }

    pub fn check(&mut self, t: usize) -> Result<CancellationReport> {
        if t > self.t_k {
            return Err(Error::OutOfRange(format!(
                "cancellation check needs t <= t_K = {} (got {t})",
                self.t_k
            )));
        }
        let n = self.params.n();
        let k = self.params.k();
        let kernel = kernel_contribution_with(&self.basis, k, t);
        let (spectral, largest) = with_precision(self.bits, || {
            let a: Mp = self.params.alpha_real();
            let two_a = Mp::from_i64(2) * a.clone();
            let inv_lph = (Mp::one() - a.clone()) / a.clone();
            let pref = Mp::from_i64(4) * a / Mp::from_i64(n as i64);
            let mut acc = Mp::zero();
            let mut largest = Mp::from_f64(ratio_to_f64(&kernel).abs());
            for r in 0..=(self.t_k - t) {
                let p = 2 * t as i64 + 2 * r as i64 + k as i64 + 1 - n as i64;
                let f = self.magic_mp(p);
                let term =
                    pref.clone() * two_a.powi(p) * f * (inv_lph.powi(r as i64 + 1) - Mp::one());
                largest = largest.max(term.abs());
                acc += term;
            }
            let kern = Mp::from_bigint(kernel.numer()) / Mp::from_bigint(kernel.denom());
            let resid = kern + acc.clone();
            (acc.to_f64(), (resid, largest))
        });
        let (resid, largest) = largest;
        let relative_residual = with_precision(self.bits, || {
            if largest.is_zero() {
                0.0
            } else {
                (resid.abs() / largest).to_f64()
            }
        });
        let residual = with_precision(self.bits, || resid.to_f64());
        let s = self.series.eval(t)?;
        let series_vs_iteration = s.value.rel_diff(&self.exact[t]);
        Ok(CancellationReport {
            n,
            k,
            t,
            kernel,
            spectral,
            residual,
            relative_residual,
            series_vs_iteration,
            passed: relative_residual <= CANCELLATION_TOL,
        })
    }
}

/// One-off cancellation test; errors with the full report on mismatch.
pub fn cancellation_check(params: &ModelParams, t: usize) -> Result<CancellationReport> {
    let rep = KernelChecker::new(params)?.check(t)?;
    if !rep.passed {
        return Err(Error::Inconsistent(format!(
            "kernel/spectrum mismatch at n={}, k={}, t={}: kernel={} spectral={:e} residual={:e} (relative {:e})",
            rep.n, rep.k, rep.t, rep.kernel, rep.spectral, rep.residual, rep.relative_residual
        )));
    }
    Ok(rep)
}

/// `A_ker^t = sum_k r^A_k (l^A_{k+t})^T`, exact, `n x n`.
pub fn kernel_power_matrix(basis: &KernelBasis, t: usize) -> Vec<Vec<Rational>> {
    let n = basis.n;
    let size = basis.size();
    let mut out = vec![vec![Rational::zero(); n]; n];
    for k in 1..=size {
        if k + t > size {
            break;
        }
        let (r, l) = (&basis.r_a[k - 1], &basis.l_a[k + t - 1]);
        for i in 0..n {
            if r[i].is_zero() {
                continue;
            }
            for j in 0..n {
                if !l[j].is_zero() {
                    out[i][j] += &r[i] * &l[j];
                }
            }
        }
    }
    out
}

/// Index of the largest-magnitude entry of `v`.
pub fn argmax_abs(v: &[Rational]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    best
}
