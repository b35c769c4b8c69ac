//! Spectra of `T + eps E` with Gaussian `E`, in configurable precision.
//!
//! The interior block `T` has a zero eigenvalue of algebraic multiplicity
//! `n/2 - 1` in a single Jordan block, so under a perturbation of size `eps`
//! the kernel explodes to a circle of radius `~ eps^{1/(n/2-1)}`, swallowing
//! the real eigenvalues one pair at a time. Resolving `eps = 1e-60` against
//! entries of order one needs far more than double precision, hence the
//! in-house eigensolver over [`Real`].

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{t_block, ModelParams};
use crate::mp::{with_precision, Mp};
use crate::real::Real;

pub const DEFAULT_PRECISION_BITS: usize = 256;
pub const DEFAULT_REAL_THRESHOLD: f64 = 1e-6;
pub const DEFAULT_SEED: u64 = 2024;

/// A perturbation strength `10^log10`. `log10 = -inf` is `eps = 0`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Epsilon {
    pub log10: f64,
}

impl Epsilon {
    pub const ZERO: Epsilon = Epsilon {
        log10: f64::NEG_INFINITY,
    };

    pub fn from_log10(log10: f64) -> Self {
        Epsilon { log10 }
    }

    /// `m * 10^e`.
    pub fn from_parts(m: f64, e: i32) -> Result<Self> {
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "epsilon mantissa must be positive (got {m})"
            )));
        }
        Ok(Epsilon {
            log10: m.log10() + f64::from(e),
        })
    }

    pub fn is_zero(&self) -> bool {
        self.log10 == f64::NEG_INFINITY
    }

    /// May underflow to zero below `1e-308`.
    pub fn to_f64(&self) -> f64 {
        10f64.powf(self.log10)
    }

    /// `eps^power` as a double, computed through the exponent.
    pub fn powf(&self, power: f64) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        10f64.powf(self.log10 * power)
    }

    pub fn to_real<R: Real>(&self) -> R {
        if self.is_zero() {
            return R::zero();
        }
        let ln10 = R::from_i64(10).ln();
        (ln10 * R::from_f64(self.log10)).exp()
    }
}

impl std::fmt::Display for Epsilon {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_zero() {
            write!(f, "0")
        } else {
            let e = self.log10.floor();
            write!(f, "{:.6}e{}", 10f64.powf(self.log10 - e), e as i64)
        }
    }
}

/// `10^{-x}` for `x = x_min, x_min + step, ..., x_max`, in increasing `eps`.
pub fn epsilon_grid(x_min: f64, x_max: f64, step: f64) -> Vec<Epsilon> {
    let count = ((x_max - x_min) / step + 1e-9).floor() as usize;
    (0..=count)
        .rev()
        .map(|i| Epsilon::from_log10(-(x_min + step * i as f64)))
        .collect()
}

/// `10^{-x}`, `x = 5, 5.5, ..., 60`.
pub fn default_epsilon_grid() -> Vec<Epsilon> {
    epsilon_grid(5.0, 60.0, 0.5)
}

#[derive(Clone, Debug)]
pub struct PerturbationConfig {
    pub params: ModelParams,
    /// Increasing, positive.
    pub epsilons: Vec<Epsilon>,
    pub seed: u64,
    pub realizations: usize,
    pub precision_bits: usize,
    /// Relative imaginary-part cutoff for calling an eigenvalue real.
    pub real_threshold: f64,
}

impl PerturbationConfig {
    pub fn new(params: ModelParams, epsilons: Vec<Epsilon>, seed: u64) -> Result<Self> {
        let c = PerturbationConfig {
            params,
            epsilons,
            seed,
            realizations: 1,
            precision_bits: DEFAULT_PRECISION_BITS,
            real_threshold: DEFAULT_REAL_THRESHOLD,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self
            .epsilons
            .iter()
            .any(|e| e.is_zero() || !e.log10.is_finite())
        {
            return Err(Error::InvalidParams(
                "epsilons must be positive and finite".into(),
            ));
        }
        if self.epsilons.windows(2).any(|w| w[0].log10 >= w[1].log10) {
            return Err(Error::InvalidParams(
                "epsilons must be strictly increasing".into(),
            ));
        }
        if self.precision_bits < 53 {
            return Err(Error::InvalidParams(format!(
                "precision_bits must be at least 53 (got {})",
                self.precision_bits
            )));
        }
        if self.realizations == 0 {
            return Err(Error::InvalidParams(
                "realizations must be at least 1".into(),
            ));
        }
        if !(self.real_threshold > 0.0) {
            return Err(Error::InvalidParams(
                "real_threshold must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SpectrumSnapshot {
    pub epsilon: Epsilon,
    pub realization: usize,
    /// All `n - 2` eigenvalues, by decreasing modulus.
    pub eigenvalues: Vec<Complex64>,
    pub real_count: usize,
}

/// `(n-2) x (n-2)` standard normals, row-major. The stream is ChaCha20 keyed
/// by `seed` (expanded by `seed_from_u64`) on stream number `realization`,
/// mapped to normals by the ziggurat sampler of `rand_distr`.
pub fn sample_perturbation(n: usize, seed: u64, realization: usize) -> Vec<Vec<f64>> {
    let m = n.saturating_sub(2);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(realization as u64);
    (0..m)
        .map(|_| {
            (0..m)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect()
}

/// Continuous count of real eigenvalues,
/// `(n/pi) arccos(eps^{1/(n-2)} / (2 alpha))`, and `0` once the argument
/// exceeds one.
pub fn theory_real_count(params: &ModelParams, epsilon: Epsilon) -> f64 {
    let n = params.n() as f64;
    let x = epsilon.powf(1.0 / (n - 2.0)) / (2.0 * params.alpha_f64());
    if x >= 1.0 {
        0.0
    } else {
        n / std::f64::consts::PI * x.acos()
    }
}

fn sign_of<R: Real>(a: R, b: &R) -> R {
    let a = a.abs();
    if b.is_negative() {
        -a
    } else {
        a
    }
}

/// Parlett-Reinsch balancing by powers of two (exact scalings).
pub fn balance<R: Real>(a: &mut [Vec<R>]) {
    let m = a.len();
    let radix = R::from_i64(2);
    let sq = R::from_i64(4);
    let mut done = false;
    while !done {
        done = true;
        for i in 0..m {
            let (mut c, mut r) = (R::zero(), R::zero());
            for j in 0..m {
                if j != i {
                    c += a[j][i].abs();
                    r += a[i][j].abs();
                }
            }
            if c.is_zero() || r.is_zero() {
                continue;
            }
            let s = c.clone() + r.clone();
            let mut f = R::one();
            let mut g = r.clone() / radix.clone();
            while c < g {
                f *= radix.clone();
                c *= sq.clone();
            }
            g = r.clone() * radix.clone();
            while c > g {
                f /= radix.clone();
                c /= sq.clone();
            }
            if (c + r) / f.clone() < R::from_f64(0.95) * s {
                done = false;
                let gi = R::one() / f.clone();
                for x in a[i].iter_mut() {
                    *x *= gi.clone();
                }
                for row in a.iter_mut() {
                    row[i] *= f.clone();
                }
            }
        }
    }
}

/// Householder reduction to upper Hessenberg form, in place.
pub fn hessenberg<R: Real>(a: &mut [Vec<R>]) {
    let m = a.len();
    for k in 0..m.saturating_sub(2) {
        let mut scale = R::zero();
        for i in k + 1..m {
            scale += a[i][k].abs();
        }
        if scale.is_zero() {
            continue;
        }
        let mut v: Vec<R> = (k + 1..m)
            .map(|i| a[i][k].clone() / scale.clone())
            .collect();
        let norm = v
            .iter()
            .fold(R::zero(), |s, x| s + x.clone() * x.clone())
            .sqrt();
        let alpha = -sign_of(norm, &v[0]);
        v[0] -= alpha.clone();
        let vtv = v.iter().fold(R::zero(), |s, x| s + x.clone() * x.clone());
        if vtv.is_zero() {
            continue;
        }
        let beta = R::from_i64(2) / vtv;
        // from the left: rows k+1.., columns k..
        for j in k..m {
            let mut dot = R::zero();
            for (idx, vi) in v.iter().enumerate() {
                dot += vi.clone() * a[k + 1 + idx][j].clone();
            }
            let f = beta.clone() * dot;
            for (idx, vi) in v.iter().enumerate() {
                a[k + 1 + idx][j] -= f.clone() * vi.clone();
            }
        }
        // from the right: all rows, columns k+1..
        for row in a.iter_mut() {
            let mut dot = R::zero();
            for (idx, vi) in v.iter().enumerate() {
                dot += row[k + 1 + idx].clone() * vi.clone();
            }
            let f = beta.clone() * dot;
            for (idx, vi) in v.iter().enumerate() {
                row[k + 1 + idx] -= f.clone() * vi.clone();
            }
        }
        a[k + 1][k] = alpha * scale;
        for row in a.iter_mut().skip(k + 2) {
            row[k] = R::zero();
        }
    }
}

/// Eigenvalues of an upper Hessenberg matrix by the Francis double-shift QR
/// iteration (exceptional shifts every tenth iteration on a stuck block).
/// Fails after `100 m` iterations in total.
pub fn hqr<R: Real>(a: &mut [Vec<R>]) -> Result<Vec<(R, R)>> {
    let m = a.len();
    let mut out: Vec<(R, R)> = vec![(R::zero(), R::zero()); m];
    if m == 0 {
        return Ok(out);
    }
    let mut anorm = R::zero();
    for i in 0..m {
        for j in i.saturating_sub(1)..m {
            anorm += a[i][j].abs();
        }
    }
    let max_total = 100 * m;
    let mut total = 0usize;
    let mut nn = m as isize - 1;
    let mut t = R::zero();
    let half = R::from_f64(0.5);
    while nn >= 0 {
        let mut its = 0usize;
        loop {
            let nu = nn as usize;
            // look for a small subdiagonal element
            let mut l = nu;
            while l >= 1 {
                let mut s = a[l - 1][l - 1].abs() + a[l][l].abs();
                if s.is_zero() {
                    s = anorm.clone();
                }
                if a[l][l - 1].abs() + s.clone() == s {
                    a[l][l - 1] = R::zero();
                    break;
                }
                l -= 1;
            }
            let mut x = a[nu][nu].clone();
            if l == nu {
                out[nu] = (x + t.clone(), R::zero());
                nn -= 1;
                break;
            }
            let mut y = a[nu - 1][nu - 1].clone();
            let mut w = a[nu][nu - 1].clone() * a[nu - 1][nu].clone();
            if l + 1 == nu {
                let p = half.clone() * (y - x.clone());
                let q = p.clone() * p.clone() + w.clone();
                let z = q.abs().sqrt();
                x += t.clone();
                if !q.is_negative() {
                    let z = p.clone() + sign_of(z, &p);
                    let hi = x.clone() + z.clone();
                    let lo = if z.is_zero() { hi.clone() } else { x - w / z };
                    out[nu - 1] = (hi, R::zero());
                    out[nu] = (lo, R::zero());
                } else {
                    out[nu - 1] = (x.clone() + p.clone(), -z.clone());
                    out[nu] = (x + p, z);
                }
                nn -= 2;
                break;
            }
            if total >= max_total {
                return Err(Error::NoConvergence(format!(
                    "QR iteration stalled on the leading {} x {} block after {total} iterations",
                    nu + 1,
                    nu + 1
                )));
            }
            if its > 0 && its.is_multiple_of(10) {
                t += x.clone();
                for (i, row) in a.iter_mut().enumerate().take(nu + 1) {
                    row[i] -= x.clone();
                }
                let s = a[nu][nu - 1].abs() + a[nu - 1][nu - 2].abs();
                x = R::from_f64(0.75) * s.clone();
                y = x.clone();
                w = R::from_f64(-0.4375) * s.clone() * s;
            }
            its += 1;
            total += 1;
            // two consecutive small subdiagonal elements
            let mut mm = nu - 2;
            let (mut p, mut q, mut r);
            loop {
                let z = a[mm][mm].clone();
                let r0 = x.clone() - z.clone();
                let s0 = y.clone() - z.clone();
                p = (r0.clone() * s0.clone() - w.clone()) / a[mm + 1][mm].clone()
                    + a[mm][mm + 1].clone();
                q = a[mm + 1][mm + 1].clone() - z.clone() - r0 - s0;
                r = a[mm + 2][mm + 1].clone();
                let s = p.abs() + q.abs() + r.abs();
                p /= s.clone();
                q /= s.clone();
                r /= s;
                if mm == l {
                    break;
                }
                let u = a[mm][mm - 1].abs() * (q.abs() + r.abs());
                let v = p.abs() * (a[mm - 1][mm - 1].abs() + z.abs() + a[mm + 1][mm + 1].abs());
                if u + v.clone() == v {
                    break;
                }
                mm -= 1;
            }
            for i in mm + 2..=nu {
                a[i][i - 2] = R::zero();
                if i != mm + 2 {
                    a[i][i - 3] = R::zero();
                }
            }
            // double-shift sweep on rows/columns l..=nu
            let mut xk = R::zero();
            for k in mm..nu {
                if k != mm {
                    p = a[k][k - 1].clone();
                    q = a[k + 1][k - 1].clone();
                    r = if k != nu - 1 {
                        a[k + 2][k - 1].clone()
                    } else {
                        R::zero()
                    };
                    xk = p.abs() + q.abs() + r.abs();
                    if !xk.is_zero() {
                        p /= xk.clone();
                        q /= xk.clone();
                        r /= xk.clone();
                    }
                }
                let s = sign_of(
                    (p.clone() * p.clone() + q.clone() * q.clone() + r.clone() * r.clone()).sqrt(),
                    &p,
                );
                if s.is_zero() {
                    continue;
                }
                if k == mm {
                    if l != mm {
                        a[k][k - 1] = -a[k][k - 1].clone();
                    }
                } else {
                    a[k][k - 1] = -s.clone() * xk.clone();
                }
                p += s.clone();
                let xx = p.clone() / s.clone();
                let yy = q.clone() / s.clone();
                let zz = r.clone() / s.clone();
                q /= p.clone();
                r /= p.clone();
                for j in k..=nu {
                    let mut pp = a[k][j].clone() + q.clone() * a[k + 1][j].clone();
                    if k != nu - 1 {
                        pp += r.clone() * a[k + 2][j].clone();
                        a[k + 2][j] -= pp.clone() * zz.clone();
                    }
                    a[k + 1][j] -= pp.clone() * yy.clone();
                    a[k][j] -= pp * xx.clone();
                }
                let imax = nu.min(k + 3);
                for row in a.iter_mut().take(imax + 1).skip(l) {
                    let mut pp = xx.clone() * row[k].clone() + yy.clone() * row[k + 1].clone();
                    if k != nu - 1 {
                        pp += zz.clone() * row[k + 2].clone();
                        row[k + 2] -= pp.clone() * r.clone();
                    }
                    row[k + 1] -= pp.clone() * q.clone();
                    row[k] -= pp;
                }
            }
        }
    }
    Ok(out)
}

/// All eigenvalues of a dense real matrix: balance, reduce, iterate.
pub fn eigenvalues<R: Real>(mut a: Vec<Vec<R>>) -> Result<Vec<(R, R)>> {
    balance(&mut a);
    hessenberg(&mut a);
    hqr(&mut a)
}

/// `max_i sum_j |T_ij|`.
fn t_norm(params: &ModelParams) -> f64 {
    t_block::<f64>(params)
        .iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `|Im z| < threshold * max(|z|, eps^{2/(n-2)})`.
pub fn is_real(z: Complex64, epsilon: Epsilon, n: usize, threshold: f64) -> bool {
    let scale = z.norm().max(epsilon.powf(2.0 / (n as f64 - 2.0)));
    z.im.abs() < threshold * scale
}

/// Spectrum of `T + eps E` for realization `realization` of `E`, computed
/// entirely at `config.precision_bits`.
pub fn perturbed_spectrum(
    config: &PerturbationConfig,
    epsilon: Epsilon,
    realization: usize,
) -> Result<SpectrumSnapshot> {
    let params = &config.params;
    let n = params.n();
    let bits = config.precision_bits;
    if !epsilon.is_zero() {
        let floor = -(bits as f64) * std::f64::consts::LOG10_2 + t_norm(params).log10();
        if epsilon.log10 < floor {
            return Err(Error::Precision(format!(
                "eps = {epsilon} is below 2^-{bits} |T| = 1e{floor:.1}; raise precision_bits"
            )));
        }
    }
    let e = if epsilon.is_zero() {
        Vec::new()
    } else {
        sample_perturbation(n, config.seed, realization)
    };
    let eig = with_precision(bits, || -> Result<Vec<(f64, f64)>> {
        let mut a = t_block::<Mp>(params);
        if !epsilon.is_zero() {
            let eps: Mp = epsilon.to_real();
            for (row, erow) in a.iter_mut().zip(&e) {
                for (x, ev) in row.iter_mut().zip(erow) {
                    *x += eps.clone() * Mp::from_f64(*ev);
                }
            }
        }
        Ok(eigenvalues(a)?
            .into_iter()
            .map(|(re, im)| (re.to_f64(), im.to_f64()))
            .collect())
    })?;
    let mut eigenvalues: Vec<Complex64> = eig
        .into_iter()
        .map(|(re, im)| Complex64::new(re, im))
        .collect();
    eigenvalues.sort_by(|a, b| b.norm().total_cmp(&a.norm()).then(b.im.total_cmp(&a.im)));
    let real_count = eigenvalues
        .iter()
        .filter(|z| is_real(**z, epsilon, n, config.real_threshold))
        .count();
    Ok(SpectrumSnapshot {
        epsilon,
        realization,
        eigenvalues,
        real_count,
    })
}

/// Geometric mean modulus of the `n/2 - 1` eigenvalues closest to zero: the
/// radius of the exploded kernel before it meets the real spectrum.
pub fn kernel_cloud_radius(snapshot: &SpectrumSnapshot, n: usize) -> f64 {
    let p = n / 2 - 1;
    let mut mods: Vec<f64> = snapshot.eigenvalues.iter().map(|z| z.norm()).collect();
    mods.sort_by(f64::total_cmp);
    (mods[..p].iter().map(|x| x.ln()).sum::<f64>() / p as f64).exp()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub epsilon: Epsilon,
    pub realization: usize,
    pub real_count: usize,
    pub theory_count: f64,
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    pub snapshots: Vec<SpectrumSnapshot>,
    pub summary: Vec<SweepRow>,
}

/// Every `(eps, realization)` job of the config, in parallel; output in
/// increasing `eps`, then realization.
pub fn sweep(config: &PerturbationConfig) -> Result<SweepResult> {
    config.validate()?;
    let jobs: Vec<(Epsilon, usize)> = config
        .epsilons
        .iter()
        .flat_map(|&e| (0..config.realizations).map(move |r| (e, r)))
        .collect();
    let snapshots = jobs
        .par_iter()
        .map(|&(e, r)| perturbed_spectrum(config, e, r))
        .collect::<Result<Vec<_>>>()?;
    let summary = snapshots
        .iter()
        .map(|s| SweepRow {
            epsilon: s.epsilon,
            realization: s.realization,
            real_count: s.real_count,
            theory_count: theory_real_count(&config.params, s.epsilon),
        })
        .collect();
    Ok(SweepResult { snapshots, summary })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::make_params;
    use crate::spectral::eigenvalue;

    #[test]
    fn perturbation_is_reproducible() {
        let a = sample_perturbation(20, 7, 3);
        assert_eq!(a, sample_perturbation(20, 7, 3));
        assert_ne!(a, sample_perturbation(20, 7, 4));
        assert_ne!(a, sample_perturbation(20, 8, 3));
        assert_eq!(a.len(), 18);
        assert!(a.iter().all(|r| r.len() == 18));
    }

    #[test]
    fn perturbation_moments() {
        // 1e6 entries over realizations
        let mut xs = Vec::with_capacity(1_000_000);
        let mut r = 0;
        while xs.len() < 1_000_000 {
            xs.extend(sample_perturbation(102, 11, r).into_iter().flatten());
            r += 1;
        }
        xs.truncate(1_000_000);
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        // sd of the mean 1/sqrt(n), of the variance sqrt(2/n)
        assert!(mean.abs() < 4.0 / n.sqrt(), "mean {mean}");
        assert!((var - 1.0).abs() < 4.0 * (2.0 / n).sqrt(), "var {var}");
    }

    #[test]
    fn theory_count_boundaries() {
        let p = make_params(40, 20, 5).unwrap();
        let two_a = 2.0 * p.alpha_f64();
        assert!(theory_real_count(&p, Epsilon::from_log10(38.0 * two_a.log10())).abs() < 1e-6);
        assert_eq!(theory_real_count(&p, Epsilon::from_log10(-1.0)), 0.0);
        assert!((theory_real_count(&p, Epsilon::from_log10(-4000.0)) - 20.0).abs() < 0.5);
        let v = theory_real_count(&p, Epsilon::from_log10(-20.0));
        let oracle =
            40.0 / std::f64::consts::PI * (10f64.powf(-20.0 / 38.0) / (10.0 / 26.0)).acos();
        assert!((v - oracle).abs() < 1e-12);
        assert!((v - 8.7).abs() < 0.05, "{v}");
    }

    #[test]
    fn qr_on_small_known_matrices() {
        // companion of (x-1)(x-2)(x^2+1)
        let a = vec![
            vec![3.0, -3.0, 3.0, -2.0],
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0],
        ];
        let mut ev = eigenvalues(a).unwrap();
        ev.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
        let want = [(0.0, -1.0), (0.0, 1.0), (1.0, 0.0), (2.0, 0.0)];
        for (g, w) in ev.iter().zip(want) {
            assert!(
                (g.0 - w.0).abs() < 1e-12 && (g.1 - w.1).abs() < 1e-12,
                "{g:?} vs {w:?}"
            );
        }
    }

    #[test]
    fn unperturbed_spectrum_in_extended_precision() {
        // at n = 40 the smallest eigenvalue has condition number ~2^131, so
        // 256 bits leave it at ~2^-125; 320 bits clear the bound
        for (n, bits) in [(12usize, 256usize), (20, 256), (40, 320)] {
            let params = make_params(n, 2, 5).unwrap();
            let p = n / 2 - 1;
            with_precision(bits, || {
                let ev = eigenvalues(t_block::<Mp>(&params)).unwrap();
                let mut mods: Vec<(Mp, Mp)> = ev;
                mods.sort_by(|a, b| {
                    let ma = a.0.clone() * a.0.clone() + a.1.clone() * a.1.clone();
                    let mb = b.0.clone() * b.0.clone() + b.1.clone() * b.1.clone();
                    mb.partial_cmp(&ma).unwrap()
                });
                // nonzero part to 2^{-bits/2} relative
                for j in 1..=p {
                    let want: Mp = eigenvalue(&params, j);
                    let (re, im) = &mods[j - 1];
                    let err = ((re.clone() - want.clone()).abs() + im.abs()) / want;
                    assert!(
                        err.to_f64() < 2f64.powi(-(bits as i32) / 2),
                        "n={n} j={j}: {}",
                        err.to_f64()
                    );
                }
                // the kernel: a Jordan block of size p, smeared by rounding to
                // at most (m u |T|)^{1/p}
                let u = 2f64.powi(-(bits as i32)) * (n * n) as f64;
                let bound = u.powf(1.0 / p as f64);
                for (re, im) in &mods[p..] {
                    let r = (re.clone() * re.clone() + im.clone() * im.clone())
                        .sqrt()
                        .to_f64();
                    assert!(r < bound, "n={n}: {r} vs {bound}");
                }
            });
        }
    }

    fn config(n: usize, bits: usize) -> PerturbationConfig {
        let mut c = PerturbationConfig::new(
            make_params(n, 2, 5).unwrap(),
            default_epsilon_grid(),
            DEFAULT_SEED,
        )
        .unwrap();
        c.precision_bits = bits;
        c
    }

    #[test]
    fn conjugate_pairs_and_counts() {
        let c = config(20, 256);
        for x in [8.0, 15.0, 30.0, 58.0] {
            let s = perturbed_spectrum(&c, Epsilon::from_log10(-x), 0).unwrap();
            assert_eq!(s.eigenvalues.len(), 18);
            assert!(s.real_count <= 18);
            let nonreal: Vec<Complex64> = s
                .eigenvalues
                .iter()
                .filter(|z| z.im != 0.0)
                .cloned()
                .collect();
            for z in &nonreal {
                let partner = nonreal
                    .iter()
                    .any(|w| (w - z.conj()).norm() <= 1e-12 * z.norm());
                assert!(partner, "eps=1e-{x}: {z} unpaired");
            }
        }
    }

    #[test]
    fn kernel_radius_scale_law() {
        let n = 20;
        let c = config(n, 256);
        let xs = [60.0, 55.0, 50.0, 45.0, 40.0, 35.0];
        let pts: Vec<(f64, f64)> = xs
            .iter()
            .map(|&x| {
                let s = perturbed_spectrum(&c, Epsilon::from_log10(-x), 0).unwrap();
                (-x, kernel_cloud_radius(&s, n).log10())
            })
            .collect();
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let slope = sxy / sxx;
        let want = 2.0 / (n as f64 - 2.0);
        assert!(
            (slope - want).abs() < 0.05 * want,
            "slope {slope} vs {want}"
        );
    }

    #[test]
    fn refuses_eps_below_precision() {
        let c = config(20, 64);
        assert!(matches!(
            perturbed_spectrum(&c, Epsilon::from_log10(-60.0), 0),
            Err(Error::Precision(_))
        ));
        assert!(perturbed_spectrum(&c, Epsilon::from_log10(-10.0), 0).is_ok());
    }

    #[test]
    fn config_validation() {
        let p = make_params(20, 2, 5).unwrap();
        assert!(PerturbationConfig::new(
            p.clone(),
            vec![Epsilon::from_log10(-3.0), Epsilon::from_log10(-5.0)],
            1
        )
        .is_err());
        assert!(PerturbationConfig::new(p.clone(), vec![Epsilon::ZERO], 1).is_err());
        let mut c = PerturbationConfig::new(p, default_epsilon_grid(), 1).unwrap();
        c.precision_bits = 32;
        assert!(c.validate().is_err());
        assert_eq!(default_epsilon_grid().len(), 111);
        assert!((default_epsilon_grid()[0].log10 + 60.0).abs() < 1e-12);
    }

    #[test]
    fn sweep_is_ordered_and_deterministic() {
        let p = make_params(12, 2, 5).unwrap();
        let mut c = PerturbationConfig::new(p, epsilon_grid(5.0, 20.0, 5.0), 3).unwrap();
        c.realizations = 2;
        let a = sweep(&c).unwrap();
        let b = sweep(&c).unwrap();
        assert_eq!(a.summary, b.summary);
        assert_eq!(a.summary.len(), 8);
        assert!(a.summary.windows(2).all(
            |w| (w[0].epsilon.log10, w[0].realization) < (w[1].epsilon.log10, w[1].realization)
        ));
    }
}
