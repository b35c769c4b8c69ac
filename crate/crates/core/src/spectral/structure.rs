//! Numerical audit of the full decomposition of `A`: eigenpair residuals,
//! biorthogonality, completeness and the kernel/spectrum sector split.

use crate::error::Result;
use crate::kernel::{kernel_power_matrix, KernelBasis};
use crate::model::{auto_precision_bits, build_propagator_exact, t_block, ModelParams};
use crate::mp::{with_precision, Mp};
use crate::real::Real;

use super::eigen::{eigen_pair, steady_state_vectors, EigenPair};

#[derive(Clone, Debug, PartialEq)]
pub struct StructureReport {
    pub n: usize,
    pub d: u32,
    /// `max_j ||T R~_j - lambda_j R~_j|| / ||R~_j||` and the same for `L~_j`.
    pub residual: f64,
    /// `max_{j,j'} |<L_A(j)|R_A(j')> - delta_{jj'}|`.
    pub biorthogonality: f64,
    /// `sign(N_j) = (-1)^{j+1}` for every `j`.
    pub signs_ok: bool,
    /// `||A - (steady + sum_j lambda_j R_j L_j^T + A_ker)||_inf`.
    pub completeness: Option<f64>,
    /// `max(||A_ker A_lambda||_inf, ||A_lambda A_ker||_inf)`.
    pub sectors: Option<f64>,
}

fn inf_norm(m: &[Vec<Mp>]) -> f64 {
    m.iter()
        .map(|r| r.iter().fold(Mp::zero(), |s, x| s + x.abs()).to_f64())
        .fold(0.0, f64::max)
}

fn matmul(a: &[Vec<Mp>], b: &[Vec<Mp>]) -> Vec<Vec<Mp>> {
    let n = a.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (0..n).fold(Mp::zero(), |s, k| s + &a[i][k] * &b[k][j]))
                .collect()
        })
        .collect()
}

fn outer_add(m: &mut [Vec<Mp>], scale: &Mp, r: &[Mp], l: &[Mp]) {
    for (row, ri) in m.iter_mut().zip(r) {
        if ri.is_zero() {
            continue;
        }
        let s = scale.clone() * ri.clone();
        for (x, lj) in row.iter_mut().zip(l) {
            *x += s.clone() * lj.clone();
        }
    }
}

/// Runs all checks in extended precision. The `n x n` completeness and
/// sector products are formed only when `full` is set.
pub fn structure_report(params: &ModelParams, full: bool) -> Result<StructureReport> {
    let n = params.n();
    let bits = auto_precision_bits(params) + 64;
    with_precision(bits, || {
        let modes: Vec<EigenPair<Mp>> = (1..n / 2)
            .map(|j| eigen_pair::<Mp>(params, j))
            .collect::<Result<_>>()?;
        let t: Vec<Vec<Mp>> = t_block(params);
        let m = n - 2;
        let mut residual = 0.0f64;
        let mut signs_ok = true;
        for e in &modes {
            let scale = |v: &[Mp]| v.iter().fold(Mp::zero(), |s, x| s.max(x.abs()));
            for (v, transpose) in [(&e.r_tilde, false), (&e.l_tilde, true)] {
                let mut worst = Mp::zero();
                for i in 0..m {
                    let tv = (0..m).fold(Mp::zero(), |s, c| {
                        let tij = if transpose { &t[c][i] } else { &t[i][c] };
                        s + tij * &v[c]
                    });
                    worst = worst.max((tv - e.lambda.clone() * v[i].clone()).abs());
                }
                residual = residual.max((worst / scale(v)).to_f64());
            }
            signs_ok &= e.norm.is_negative() == (e.j % 2 == 0);
        }
        let mut biorthogonality = 0.0f64;
        for a in &modes {
            for b in &modes {
                let ip = a
                    .l_a
                    .iter()
                    .zip(&b.r_a)
                    .fold(Mp::zero(), |s, (x, y)| s + x * y);
                let want = if a.j == b.j { Mp::one() } else { Mp::zero() };
                biorthogonality = biorthogonality.max((ip - want).abs().to_f64());
            }
        }
        let (completeness, sectors) = if full {
            let conv =
                |v: &[crate::exact::Rational]| v.iter().map(Mp::from_ratio).collect::<Vec<Mp>>();
            let sv = steady_state_vectors(params)?;
            let zero = vec![vec![Mp::zero(); n]; n];
            let mut a_lambda = zero.clone();
            for e in &modes {
                outer_add(&mut a_lambda, &e.lambda, &e.r_a, &e.l_a);
            }
            let basis = KernelBasis::for_params(params)?;
            let a_ker: Vec<Vec<Mp>> = kernel_power_matrix(&basis, 1)
                .iter()
                .map(|r| conv(r))
                .collect();
            let mut total = a_lambda.clone();
            outer_add(&mut total, &Mp::one(), &conv(&sv.r0), &conv(&sv.l0));
            outer_add(
                &mut total,
                &Mp::one(),
                &conv(&sv.r0_prime),
                &conv(&sv.l0_prime),
            );
            let a: Vec<Vec<Mp>> = build_propagator_exact(params)
                .iter()
                .map(|r| conv(r))
                .collect();
            let diff: Vec<Vec<Mp>> = a
                .iter()
                .zip(&total)
                .zip(&a_ker)
                .map(|((ra, rt), rk)| {
                    ra.iter()
                        .zip(rt)
                        .zip(rk)
                        .map(|((x, y), z)| x.clone() - y.clone() - z.clone())
                        .collect()
                })
                .collect();
            let s1 = inf_norm(&matmul(&a_ker, &a_lambda));
            let s2 = inf_norm(&matmul(&a_lambda, &a_ker));
            (Some(inf_norm(&diff)), Some(s1.max(s2)))
        } else {
            (None, None)
        };
        Ok(StructureReport {
            n,
            d: params.d(),
            residual,
            biorthogonality,
            signs_ok,
            completeness,
            sectors,
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::make_params;

    #[test]
    fn small_system_is_complete() {
        let r = structure_report(&make_params(8, 2, 2).unwrap(), true).unwrap();
        assert!(r.residual < 1e-40, "{r:?}");
        assert!(r.biorthogonality < 1e-40);
        assert!(r.signs_ok);
        assert!(r.completeness.unwrap() < 1e-40);
        assert!(r.sectors.unwrap() < 1e-40);
    }

    #[test]
    fn light_report_skips_matrices() {
        let p = make_params(12, 3, 5).unwrap();
        let r = structure_report(&p, false).unwrap();
        assert!(r.completeness.is_none() && r.sectors.is_none());
        assert!(r.residual < 1e-40 && r.biorthogonality < 1e-40 && r.signs_ok);
    }
}
