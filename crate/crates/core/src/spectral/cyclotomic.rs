//! Exact arithmetic in `Q(zeta)`, `zeta = exp(i pi / n)`.
//!
//! Elements are polynomials in `zeta` reduced modulo the cyclotomic
//! polynomial `Phi_{2n}`. Used to evaluate root-of-unity sums whose value is
//! rational, such as magic sums at non-positive powers.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::exact::Rational;

/// Integer polynomial, coefficient `i` multiplies `x^i`.
fn poly_divexact(num: &[BigInt], den: &[BigInt]) -> Vec<BigInt> {
    let mut r = num.to_vec();
    let dl = den.len();
    let lead = den[dl - 1].clone();
    let mut q = vec![BigInt::zero(); num.len() + 1 - dl];
    for i in (0..q.len()).rev() {
        let c = &r[i + dl - 1] / &lead;
        for (k, dk) in den.iter().enumerate() {
            r[i + k] -= &c * dk;
        }
        q[i] = c;
    }
    debug_assert!(r.iter().all(|x| x.is_zero()));
    q
}

/// `Phi_m(x)` with integer coefficients.
pub fn cyclotomic_poly(m: usize) -> Vec<BigInt> {
    // x^m - 1 divided by Phi_d for every proper divisor d
    let mut p = vec![BigInt::zero(); m + 1];
    p[0] = -BigInt::one();
    p[m] = BigInt::one();
    for d in 1..m {
        if m.is_multiple_of(d) {
            p = poly_divexact(&p, &cyclotomic_poly(d));
        }
    }
    p
}

#[derive(Clone, Debug)]
pub struct Field {
    n: usize,
    modulus: Vec<Rational>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Elem(Vec<Rational>);

impl Field {
    pub fn new(n: usize) -> Self {
        let modulus = cyclotomic_poly(2 * n)
            .into_iter()
            .map(Rational::from_integer)
            .collect();
        Field { n, modulus }
    }

    pub fn degree(&self) -> usize {
        self.modulus.len() - 1
    }

    fn reduce(&self, mut v: Vec<Rational>) -> Elem {
        let deg = self.degree();
        // modulus is monic
        while v.len() > deg {
            let c = v.pop().unwrap();
            if c.is_zero() {
                continue;
            }
            let off = v.len() - deg;
            for (i, mi) in self.modulus[..deg].iter().enumerate() {
                v[off + i] -= &c * mi;
            }
        }
        v.resize(deg, Rational::zero());
        Elem(v)
    }

    pub fn constant(&self, c: Rational) -> Elem {
        let mut v = vec![Rational::zero(); self.degree()];
        v[0] = c;
        Elem(v)
    }

    /// `zeta^e` for any integer `e`.
    pub fn zeta_pow(&self, e: i64) -> Elem {
        let e = e.rem_euclid(2 * self.n as i64) as usize;
        let mut v = vec![Rational::zero(); e + 1];
        v[e] = Rational::one();
        self.reduce(v)
    }

    pub fn add(&self, a: &Elem, b: &Elem) -> Elem {
        Elem(a.0.iter().zip(&b.0).map(|(x, y)| x + y).collect())
    }

    pub fn sub(&self, a: &Elem, b: &Elem) -> Elem {
        Elem(a.0.iter().zip(&b.0).map(|(x, y)| x - y).collect())
    }

    pub fn scale(&self, a: &Elem, s: &Rational) -> Elem {
        Elem(a.0.iter().map(|x| x * s).collect())
    }

    pub fn mul(&self, a: &Elem, b: &Elem) -> Elem {
        let mut v = vec![Rational::zero(); a.0.len() + b.0.len()];
        for (i, x) in a.0.iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            for (j, y) in b.0.iter().enumerate() {
                if !y.is_zero() {
                    v[i + j] += x * y;
                }
            }
        }
        self.reduce(v)
    }

    pub fn is_zero(&self, a: &Elem) -> bool {
        a.0.iter().all(|x| x.is_zero())
    }

    /// Inverse via the extended Euclidean algorithm against `Phi_{2n}`.
    pub fn inv(&self, a: &Elem) -> Result<Elem> {
        if self.is_zero(a) {
            return Err(Error::Domain("inverse of zero in cyclotomic field".into()));
        }
        let trim = |mut v: Vec<Rational>| {
            while v.len() > 1 && v.last().unwrap().is_zero() {
                v.pop();
            }
            v
        };
        let mut r0 = trim(self.modulus.clone());
        let mut r1 = trim(a.0.clone());
        let mut s0: Vec<Rational> = vec![Rational::zero()];
        let mut s1: Vec<Rational> = vec![Rational::one()];
        while !(r1.len() == 1 && r1[0].is_zero()) {
            let (q, r) = poly_divrem(&r0, &r1);
            let qs1 = poly_mul(&q, &s1);
            let s2 = trim(poly_sub(&s0, &qs1));
            r0 = std::mem::replace(&mut r1, trim(r));
            s0 = std::mem::replace(&mut s1, s2);
        }
        // r0 is a nonzero constant, s0 * a = r0 (mod Phi)
        if r0.len() != 1 {
            return Err(Error::Inconsistent("element not invertible".into()));
        }
        let c = r0[0].recip();
        let v: Vec<Rational> = s0.iter().map(|x| x * &c).collect();
        Ok(self.reduce(v))
    }

    pub fn pow(&self, a: &Elem, e: u64) -> Elem {
        let mut result = self.constant(Rational::one());
        let mut base = a.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                result = self.mul(&result, &base);
            }
            e >>= 1;
            if e > 0 {
                base = self.mul(&base, &base);
            }
        }
        result
    }

    /// The rational value of `a`, if `a` lies in `Q`.
    pub fn as_rational(&self, a: &Elem) -> Option<Rational> {
        a.0[1..].iter().all(|x| x.is_zero()).then(|| a.0[0].clone())
    }

    /// `cos(e pi / n)` as a field element.
    pub fn cos(&self, e: i64) -> Elem {
        let v = self.add(&self.zeta_pow(e), &self.zeta_pow(-e));
        self.scale(&v, &Rational::new(1.into(), 2.into()))
    }
}

fn poly_sub(a: &[Rational], b: &[Rational]) -> Vec<Rational> {
    let len = a.len().max(b.len());
    (0..len)
        .map(|i| {
            let x = a.get(i).cloned().unwrap_or_else(Rational::zero);
            let y = b.get(i).cloned().unwrap_or_else(Rational::zero);
            x - y
        })
        .collect()
}

fn poly_mul(a: &[Rational], b: &[Rational]) -> Vec<Rational> {
    let mut v = vec![Rational::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            v[i + j] += x * y;
        }
    }
    v
}

fn poly_divrem(a: &[Rational], b: &[Rational]) -> (Vec<Rational>, Vec<Rational>) {
    let mut r = a.to_vec();
    let db = b.len() - 1;
    if r.len() <= db {
        return (vec![Rational::zero()], r);
    }
    let lead = b[db].clone();
    let mut q = vec![Rational::zero(); r.len() - db];
    for i in (0..q.len()).rev() {
        let c = &r[i + db] / &lead;
        if !c.is_zero() {
            for (k, bk) in b.iter().enumerate() {
                r[i + k] -= &c * bk;
            }
        }
        q[i] = c;
    }
    r.truncate(db.max(1));
    (q, r)
}

/// `f_k(p) = -sum_{j=1}^{n/2-1} (-1)^j cos^p(phi_j) sin(phi_j) sin(k phi_j)`
/// evaluated exactly; fails if the result is not rational (possible when
/// `p + k` is even).
pub fn magic_sum_cyclotomic(n: usize, k: i64, p: i64) -> Result<Rational> {
    let field = Field::new(n);
    let half = Rational::new(1.into(), 2.into());
    let mut acc = field.constant(Rational::zero());
    for j in 1..n / 2 {
        let j = j as i64;
        let c = field.cos(j);
        let cp = if p >= 0 {
            field.pow(&c, p as u64)
        } else {
            field.pow(&field.inv(&c)?, p.unsigned_abs())
        };
        // sin(a) sin(b) = (cos(a-b) - cos(a+b)) / 2
        let ss = field.scale(
            &field.sub(&field.cos((k - 1) * j), &field.cos((k + 1) * j)),
            &half,
        );
        let term = field.mul(&cp, &ss);
        acc = if j % 2 == 0 {
            field.sub(&acc, &term)
        } else {
            field.add(&acc, &term)
        };
    }
    field
        .as_rational(&acc)
        .ok_or_else(|| Error::Domain(format!("f_{k}({p}) is irrational for n={n}")))
}

/// Largest absolute coefficient, for diagnostics.
pub fn max_abs_coeff(e: &Elem) -> Rational {
    e.0.iter()
        .map(|x| x.abs())
        .fold(Rational::zero(), |a, b| if b > a { b } else { a })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{int, rat};

    #[test]
    fn cyclotomic_polys() {
        let p = cyclotomic_poly(8);
        assert_eq!(
            p,
            vec![1, 0, 0, 0, 1]
                .into_iter()
                .map(BigInt::from)
                .collect::<Vec<_>>()
        );
        let p = cyclotomic_poly(12);
        assert_eq!(
            p,
            vec![1, 0, -1, 0, 1]
                .into_iter()
                .map(BigInt::from)
                .collect::<Vec<_>>()
        );
    }

    #[test]
    fn inverse_round_trip() {
        let f = Field::new(10);
        let a = f.cos(3);
        let ai = f.inv(&a).unwrap();
        assert_eq!(f.as_rational(&f.mul(&a, &ai)), Some(int(1)));
    }

    #[test]
    fn cos_squares() {
        // cos^2(pi/3) = 1/4 with n = 3 (zeta = e^{i pi/3})
        let f = Field::new(3);
        let c = f.cos(1);
        assert_eq!(f.as_rational(&f.mul(&c, &c)), Some(rat(1, 4)));
    }

    #[test]
    fn tabulated_values_n20() {
        assert_eq!(magic_sum_cyclotomic(20, 2, -1).unwrap(), int(1));
        assert_eq!(magic_sum_cyclotomic(20, 2, -3).unwrap(), int(66));
        assert_eq!(magic_sum_cyclotomic(20, 3, 0).unwrap(), rat(-1, 2));
        assert_eq!(magic_sum_cyclotomic(20, 3, -2).unwrap(), int(-31));
        assert_eq!(magic_sum_cyclotomic(20, 4, -1).unwrap(), int(-2));
        assert_eq!(magic_sum_cyclotomic(20, 5, 0).unwrap(), rat(1, 2));
    }
}
