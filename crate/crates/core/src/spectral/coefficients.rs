//! Expansion coefficients `c_j` of `Delta I_k(t) = sum_j c_j lambda_j^t`.

use rayon::prelude::*;

use crate::lognum::LogNum;
use crate::model::{auto_precision_bits, ModelParams};
use crate::mp::{with_precision, Mp};
use crate::real::Real;

use super::eigen::{eigen_pair, phi};
use super::magic::ZERO_THRESHOLD;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoefficientMethod {
    /// `[R_j]_k sum_p [L_j]_p` from the assembled eigenvectors, extended precision.
    ExactInnerProduct,
    /// `([R~_j]_{k-1}/N_j)(1/(lambda_ph - lambda_j) - 1/(1 - lambda_j))`.
    ClosedFormApprox,
}

#[derive(Clone, Debug)]
pub struct Coefficient {
    pub j: usize,
    pub lambda: f64,
    pub value: LogNum,
}

#[derive(Clone, Debug)]
pub struct CoefficientSet {
    pub k: usize,
    pub method: CoefficientMethod,
    pub entries: Vec<Coefficient>,
}

impl CoefficientSet {
    pub fn get(&self, j: usize) -> &Coefficient {
        &self.entries[j - 1]
    }
}

pub fn coefficients(params: &ModelParams, method: CoefficientMethod) -> CoefficientSet {
    let entries = match method {
        CoefficientMethod::ExactInnerProduct => {
            let bits = auto_precision_bits(params) + 64;
            (1..params.n() / 2)
                .into_par_iter()
                .map(|j| with_precision(bits, || exact_coefficient(params, j)))
                .collect()
        }
        CoefficientMethod::ClosedFormApprox => (1..params.n() / 2)
            .map(|j| approx_coefficient(params, j))
            .collect(),
    };
    CoefficientSet {
        k: params.k(),
        method,
        entries,
    }
}

fn exact_coefficient(params: &ModelParams, j: usize) -> Coefficient {
    let e = eigen_pair::<Mp>(params, j).expect("mode in range");
    let k = params.k() as i64;
    let rk = e.r_a[params.k() - 1].clone();
    // envelope of [R~]_{k-1}/N: |2a cos|^{k-3} / (sin |N|)
    let g = Mp::from_i64(2) * params.alpha_real::<Mp>() * e.phi.cos();
    let rscale = g.abs().powi(k - 3) / (e.phi.sin() * e.norm.abs());
    let mut lsum = Mp::zero();
    let mut lscale = Mp::zero();
    for x in &e.l_a {
        lsum += x;
        lscale = lscale.max(x.abs());
    }
    let thr = Mp::from_f64(ZERO_THRESHOLD);
    let zero = rk.abs() <= thr.clone() * rscale || lsum.abs() <= thr * lscale;
    let value = if zero {
        LogNum::zero()
    } else {
        (rk * lsum).to_lognum()
    };
    Coefficient {
        j,
        lambda: e.lambda.to_f64(),
        value,
    }
}

fn approx_coefficient(params: &ModelParams, j: usize) -> Coefficient {
    let n = params.n();
    let k = params.k() as f64;
    let ph: f64 = phi(n, j);
    let (c, s) = (ph.cos(), ph.sin());
    let a = params.alpha_f64();
    let g = 2.0 * a * c;
    let lambda = g * g;
    let lph = a / (1.0 - a);
    let skp = (k * ph).sin();
    if skp.abs() <= ZERO_THRESHOLD {
        return Coefficient {
            j,
            lambda,
            value: LogNum::zero(),
        };
    }
    // [R~]_{k-1} = g^{k-3} sin(k phi)/sin(phi)
    let ln_r = (k - 3.0) * g.ln() + skp.abs().ln() - s.ln();
    // |N_j| = g^{n-5} n c / (2 s^2)
    let ln_norm = (n as f64 - 5.0) * g.ln() + (n as f64 * c / (2.0 * s * s)).ln();
    let f = 1.0 / (lph - lambda) - 1.0 / (1.0 - lambda);
    let sign_n: i8 = if j % 2 == 1 { 1 } else { -1 };
    let sign = sign_n * if skp < 0.0 { -1 } else { 1 } * if f < 0.0 { -1 } else { 1 };
    Coefficient {
        j,
        lambda,
        value: LogNum::new(sign, ln_r - ln_norm + f.abs().ln()),
    }
}

/// The part of `c_j` dropped by the closed form (of relative order
/// `lambda_j^{n/2-1}`):
/// `(2/n)(1-lph)(2a)^k cos^{k-1} sin sin(k phi) lambda/((1-lambda)(lph-lambda))`.
pub fn finite_size_term<R: Real>(params: &ModelParams, j: usize) -> R {
    let n = params.n();
    let k = params.k() as i64;
    let ph: R = phi(n, j);
    let (c, s) = (ph.cos(), ph.sin());
    let a: R = params.alpha_real();
    let two = R::from_i64(2);
    let g = two.clone() * a.clone() * c.clone();
    let lambda = g.clone() * g;
    let lph = a.clone() / (R::one() - a.clone());
    let two_a = two.clone() * a;
    two / R::from_i64(n as i64)
        * (R::one() - lph.clone())
        * two_a.powi(k)
        * c.powi(k - 1)
        * s
        * (ph * R::from_i64(k)).sin()
        * lambda.clone()
        / ((R::one() - lambda.clone()) * (lph - lambda))
}

/// The closed-form coefficient, in working arithmetic `R`.
pub fn approx_coefficient_real<R: Real>(params: &ModelParams, j: usize) -> R {
    let n = params.n();
    let k = params.k() as i64;
    let ph: R = phi(n, j);
    let (c, s) = (ph.cos(), ph.sin());
    let a: R = params.alpha_real();
    let g = R::from_i64(2) * a.clone() * c.clone();
    let lambda = g.clone() * g.clone();
    let lph = a.clone() / (R::one() - a);
    let rk = g.powi(k - 3) * (ph * R::from_i64(k)).sin() / s;
    let norm = super::eigen::normalization::<R>(params, j);
    rk / norm * (R::one() / (lph - lambda.clone()) - R::one() / (R::one() - lambda))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::make_params;

    #[test]
    fn fig2_zero_pattern() {
        let half = coefficients(
            &make_params(40, 20, 5).unwrap(),
            CoefficientMethod::ExactInnerProduct,
        );
        for c in &half.entries {
            assert_eq!(c.value.is_zero(), c.j % 2 == 0, "j={}", c.j);
        }
        let k5 = coefficients(
            &make_params(40, 5, 5).unwrap(),
            CoefficientMethod::ExactInnerProduct,
        );
        for c in &k5.entries {
            assert_eq!(c.value.is_zero(), c.j == 8 || c.j == 16, "j={}", c.j);
        }
        let k5a = coefficients(
            &make_params(40, 5, 5).unwrap(),
            CoefficientMethod::ClosedFormApprox,
        );
        for c in &k5a.entries {
            assert_eq!(c.value.is_zero(), c.j == 8 || c.j == 16, "j={}", c.j);
        }
    }

    #[test]
    fn signs_alternate_and_magnitudes_grow() {
        let set = coefficients(
            &make_params(40, 5, 5).unwrap(),
            CoefficientMethod::ExactInnerProduct,
        );
        let nz: Vec<&Coefficient> = set.entries.iter().filter(|c| !c.value.is_zero()).collect();
        for w in nz.windows(2) {
            assert_ne!(
                w[0].value.sign, w[1].value.sign,
                "j={} -> {}",
                w[0].j, w[1].j
            );
        }
        let first = nz.first().unwrap().value.ln_abs;
        let last = nz.last().unwrap().value.ln_abs;
        assert!(last - first > 20.0 * std::f64::consts::LN_10);
    }

    #[test]
    fn exact_equals_closed_form_plus_finite_size_term() {
        with_precision(400, || {
            for (n, k, d) in [(12, 3, 2), (20, 2, 5), (24, 7, 3)] {
                let params = make_params(n, k, d).unwrap();
                for j in 1..n / 2 {
                    let e = eigen_pair::<Mp>(&params, j).unwrap();
                    let exact = e.r_a[k - 1].clone() * e.l_a.iter().fold(Mp::zero(), |a, x| a + x);
                    let approx: Mp = approx_coefficient_real(&params, j);
                    let fs: Mp = finite_size_term(&params, j);
                    let diff = (exact.clone() - approx - fs).abs();
                    assert!(
                        diff <= exact.abs().ldexp(-300) + Mp::from_f64(1e-100),
                        "n={n} k={k} j={j}"
                    );
                }
            }
        });
    }
}
