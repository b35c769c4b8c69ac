//! Closed-form eigenpairs of `T` and their lift to `A`.

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::exact::Rational;
use crate::model::{boundary_vectors_exact, steady_state_exact, t_block_exact, ModelParams};
use crate::real::Real;

/// Mode `j` of `T`, with right/left eigenvectors of both `T` (unnormalized)
/// and `A` (biorthonormal). Vector components are stored 0-based: entry `i`
/// of `r_tilde` is component `i+1` in 1-based notation.
#[derive(Clone, Debug)]
pub struct EigenPair<R> {
    pub j: usize,
    pub phi: R,
    pub lambda: R,
    pub r_tilde: Vec<R>,
    pub l_tilde: Vec<R>,
    pub norm: R,
    pub r_a: Vec<R>,
    pub l_a: Vec<R>,
}

fn check_mode(params: &ModelParams, j: usize) -> Result<()> {
    let jmax = params.n() / 2 - 1;
    if j == 0 || j > jmax {
        return Err(Error::OutOfRange(format!("mode j={j} outside 1..={jmax}")));
    }
    Ok(())
}

pub fn phi<R: Real>(n: usize, j: usize) -> R {
    R::pi() * R::from_i64(j as i64) / R::from_i64(n as i64)
}

pub fn eigenvalue<R: Real>(params: &ModelParams, j: usize) -> R {
    let a: R = params.alpha_real();
    let x = R::from_i64(2) * a * phi::<R>(params.n(), j).cos();
    x.clone() * x
}

pub fn eigenvalues_f64(params: &ModelParams) -> Vec<f64> {
    (1..params.n() / 2)
        .map(|j| eigenvalue::<f64>(params, j))
        .collect()
}

/// `N_j = (-1)^{j+1} (2 alpha cos phi)^{n-5} n cos phi / (2 sin^2 phi)`.
pub fn normalization<R: Real>(params: &ModelParams, j: usize) -> R {
    let n = params.n();
    let ph: R = phi(n, j);
    let (c, s) = (ph.cos(), ph.sin());
    let a: R = params.alpha_real();
    let g = R::from_i64(2) * a * c.clone();
    let v = g.powi(n as i64 - 5) * R::from_i64(n as i64) * c / (R::from_i64(2) * s.clone() * s);
    if j % 2 == 1 {
        v
    } else {
        -v
    }
}

/// `[R~_j]_i` for the 1-based component `i` of `T`.
pub fn r_tilde_component<R: Real>(params: &ModelParams, j: usize, i: usize) -> R {
    let ph: R = phi(params.n(), j);
    let a: R = params.alpha_real();
    let g = R::from_i64(2) * a * ph.cos();
    g.powi(i as i64 - 2) * (ph.clone() * R::from_i64(i as i64 + 1)).sin() / ph.sin()
}

pub fn eigen_pair<R: Real>(params: &ModelParams, j: usize) -> Result<EigenPair<R>> {
    check_mode(params, j)?;
    let n = params.n();
    let m = params.m();
    let ph: R = phi(n, j);
    let (c, s) = (ph.cos(), ph.sin());
    let a: R = params.alpha_real();
    let g = R::from_i64(2) * a * c;
    let lambda = g.clone() * g.clone();
    let gpow = |e: i64| g.powi(e);
    let r_tilde: Vec<R> = (1..=m)
        .map(|i| gpow(i as i64 - 2) * (ph.clone() * R::from_i64(i as i64 + 1)).sin() / s.clone())
        .collect();
    let l_tilde: Vec<R> = (1..=m)
        .map(|i| {
            gpow(n as i64 - 3 - i as i64) * (ph.clone() * R::from_i64((n - i) as i64)).sin()
                / s.clone()
        })
        .collect();
    let norm = normalization::<R>(params, j);

    let (a1, a2) = boundary_vectors_exact(params);
    let dot = |v: &[Rational]| {
        let mut acc = R::zero();
        for (x, y) in l_tilde.iter().zip(v) {
            if !y.is_zero() {
                acc += x.clone() * R::from_ratio(y);
            }
        }
        acc
    };
    let denom = lambda.clone() - R::one();
    let first = dot(&a1) / denom.clone();
    let last = dot(&a2) / denom;
    let mut r_a = Vec::with_capacity(n);
    r_a.push(R::zero());
    r_a.extend(r_tilde.iter().map(|x| x.clone() / norm.clone()));
    r_a.push(R::zero());
    let mut l_a = Vec::with_capacity(n);
    l_a.push(first);
    l_a.extend(l_tilde.iter().cloned());
    l_a.push(last);
    Ok(EigenPair {
        j,
        phi: ph,
        lambda,
        r_tilde,
        l_tilde,
        norm,
        r_a,
        l_a,
    })
}

/// Steady-state right and left vectors of `A` for eigenvalue 1.
#[derive(Clone, Debug)]
pub struct SteadyVectors {
    /// `(1, I_inf, 1)`
    pub r0: Vec<Rational>,
    /// `(1/2, 0, ..., 0, 1/2)`
    pub l0: Vec<Rational>,
    /// `(1/2, 0, ..., 0, -1/2)`
    pub l0_prime: Vec<Rational>,
    /// Second right fixed vector, dual to `l0_prime`: `(1, x, -1)` with
    /// `(1 - T) x = a1 - a2`.
    pub r0_prime: Vec<Rational>,
}

pub fn steady_state_vectors(params: &ModelParams) -> Result<SteadyVectors> {
    let n = params.n();
    let half = Rational::new(1.into(), 2.into());
    let mut l0 = vec![Rational::zero(); n];
    l0[0] = half.clone();
    l0[n - 1] = half.clone();
    let mut l0_prime = l0.clone();
    l0_prime[n - 1] = -half;

    let t = t_block_exact(params);
    let (a1, a2) = boundary_vectors_exact(params);
    let m = params.m();
    let mut mat: Vec<Vec<Rational>> = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| {
                    if i == j {
                        Rational::one() - &t[i][j]
                    } else {
                        -t[i][j].clone()
                    }
                })
                .collect()
        })
        .collect();
    let mut rhs: Vec<Rational> = a1.iter().zip(&a2).map(|(u, v)| u - v).collect();
    let x = solve_exact(&mut mat, &mut rhs)?;
    let mut r0_prime = Vec::with_capacity(n);
    r0_prime.push(Rational::one());
    r0_prime.extend(x);
    r0_prime.push(-Rational::one());
    Ok(SteadyVectors {
        r0: steady_state_exact(params),
        l0,
        l0_prime,
        r0_prime,
    })
}

/// Gaussian elimination over the rationals (first nonzero pivot).
pub fn solve_exact(a: &mut [Vec<Rational>], b: &mut [Rational]) -> Result<Vec<Rational>> {
    let m = b.len();
    for col in 0..m {
        let piv = (col..m)
            .find(|&r| !a[r][col].is_zero())
            .ok_or_else(|| Error::Inconsistent(format!("singular system at column {col}")))?;
        a.swap(col, piv);
        b.swap(col, piv);
        let p = a[col][col].clone();
        for r in col + 1..m {
            if a[r][col].is_zero() {
                continue;
            }
            let f = &a[r][col] / &p;
            for c in col..m {
                let v = &f * &a[col][c];
                a[r][c] -= v;
            }
            let v = &f * &b[col];
            b[r] -= v;
        }
    }
    let mut x = vec![Rational::zero(); m];
    for r in (0..m).rev() {
        let mut s = b[r].clone();
        for c in r + 1..m {
            s -= &a[r][c] * &x[c];
        }
        x[r] = s / &a[r][r];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{int, ratio_to_f64};
    use crate::model::{build_propagator_exact, make_params, t_block};
    use crate::mp::{with_precision, Mp};

    #[test]
    fn first_component_is_inverse_alpha() {
        let params = make_params(12, 3, 2).unwrap();
        for j in 1..6 {
            let e = eigen_pair::<f64>(&params, j).unwrap();
            assert!((e.r_tilde[0] - 2.5).abs() < 1e-13);
        }
    }

    #[test]
    fn small_eigenvalues() {
        let params = make_params(6, 2, 2).unwrap();
        assert!((eigenvalue::<f64>(&params, 1) - 0.48).abs() < 1e-15);
        assert!((eigenvalue::<f64>(&params, 2) - 0.16).abs() < 1e-15);
        assert!(eigen_pair::<f64>(&params, 3).is_err());
        assert!(eigen_pair::<f64>(&params, 0).is_err());
    }

    #[test]
    fn residuals_n8() {
        let params = make_params(8, 2, 2).unwrap();
        let t = t_block::<f64>(&params);
        for j in 1..4 {
            let e = eigen_pair::<f64>(&params, j).unwrap();
            for i in 0..6 {
                let tr: f64 = (0..6).map(|c| t[i][c] * e.r_tilde[c]).sum();
                let tl: f64 = (0..6).map(|c| t[c][i] * e.l_tilde[c]).sum();
                assert!((tr - e.lambda * e.r_tilde[i]).abs() < 1e-12);
                assert!((tl - e.lambda * e.l_tilde[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn left_is_reflected_right() {
        let params = make_params(16, 4, 3).unwrap();
        for j in 1..8 {
            let e = eigen_pair::<f64>(&params, j).unwrap();
            let m = e.r_tilde.len();
            for i in 0..m {
                let (x, y) = (e.l_tilde[i], e.r_tilde[m - 1 - i]);
                assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
            }
        }
    }

    #[test]
    fn normalization_matches_inner_product() {
        with_precision(256, || {
            for (n, d) in [(10, 2), (20, 5), (40, 3)] {
                let params = make_params(n, 2, d).unwrap();
                for j in 1..n / 2 {
                    let e = eigen_pair::<Mp>(&params, j).unwrap();
                    let ip = e
                        .l_tilde
                        .iter()
                        .zip(&e.r_tilde)
                        .fold(Mp::zero(), |acc, (a, b)| acc + a * b);
                    let rel = ((ip - e.norm.clone()) / e.norm.clone()).abs().to_f64();
                    assert!(rel < 1e-60, "n={n} j={j} rel={rel}");
                    assert_eq!(e.norm.is_negative(), j % 2 == 0);
                }
            }
        });
    }

    #[test]
    fn lifted_vectors_are_eigenvectors_of_a() {
        with_precision(256, || {
            let params = make_params(14, 4, 2).unwrap();
            let a = build_propagator_exact(&params);
            let am: Vec<Vec<Mp>> = a
                .iter()
                .map(|r| r.iter().map(Mp::from_ratio).collect())
                .collect();
            for j in 1..7 {
                let e = eigen_pair::<Mp>(&params, j).unwrap();
                for i in 0..14 {
                    let ar = (0..14).fold(Mp::zero(), |s, c| s + &am[i][c] * &e.r_a[c]);
                    let la = (0..14).fold(Mp::zero(), |s, c| s + &am[c][i] * &e.l_a[c]);
                    assert!((ar - e.lambda.clone() * e.r_a[i].clone()).abs().to_f64() < 1e-60);
                    assert!((la - e.lambda.clone() * e.l_a[i].clone()).abs().to_f64() < 1e-60);
                }
            }
        });
    }

    #[test]
    fn steady_vectors() {
        let params = make_params(12, 3, 5).unwrap();
        let sv = steady_state_vectors(&params).unwrap();
        let ones = vec![int(1); 12];
        let dot =
            |a: &[Rational], b: &[Rational]| a.iter().zip(b).map(|(x, y)| x * y).sum::<Rational>();
        assert_eq!(dot(&sv.l0, &ones), int(1));
        assert_eq!(dot(&sv.l0_prime, &ones), int(0));
        assert_eq!(dot(&sv.l0, &sv.r0_prime), int(0));
        assert_eq!(dot(&sv.l0_prime, &sv.r0_prime), int(1));
        assert_eq!(dot(&sv.l0_prime, &sv.r0), int(0));
        let a = build_propagator_exact(&params);
        for v in [&sv.r0, &sv.r0_prime] {
            for i in 0..12 {
                let s: Rational = (0..12).map(|c| &a[i][c] * &v[c]).sum();
                assert_eq!(s, v[i]);
            }
        }
        // float check of the fixed point as well
        let af: Vec<Vec<f64>> = a
            .iter()
            .map(|r| r.iter().map(ratio_to_f64).collect())
            .collect();
        let r0: Vec<f64> = sv.r0.iter().map(ratio_to_f64).collect();
        for i in 0..12 {
            let s: f64 = (0..12).map(|c| af[i][c] * r0[c]).sum();
            assert!((s - r0[i]).abs() < 1e-14);
        }
    }
}
