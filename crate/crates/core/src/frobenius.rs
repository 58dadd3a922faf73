//! Invariant factors of A and the quotient counts a = |Zⁿ[A]/AZⁿ[A]|, b = |Zⁿ[B]/BZⁿ[B]|.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exactq::{char_poly, IntPolynomial, Matrix, Polynomial, RationalPolynomial};
use crate::RationalMatrix;

#[derive(Clone, Debug)]
pub struct InvariantFactorization {
    /// Monic nonconstant invariant factors p₁ | p₂ | … | p_k.
    pub factors: Vec<RationalPolynomial>,
    /// qᵢ = cᵢpᵢ primitive with positive leading coefficient.
    pub primitive_factors: Vec<IntPolynomial>,
    /// qᵢ*(t) = t^deg qᵢ · qᵢ(1/t).
    pub reciprocals: Vec<IntPolynomial>,
    /// Block diagonal companion form.
    pub frobenius_form: RationalMatrix,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct QuotientCounts {
    #[serde(serialize_with = "ser_display")]
    pub a: BigInt,
    #[serde(serialize_with = "ser_display")]
    pub b: BigInt,
}

fn ser_display<S: serde::Serializer, T: std::fmt::Display>(v: &T, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

type PolyMatrix = Vec<Vec<RationalPolynomial>>;

fn pivot_key(p: &RationalPolynomial) -> (usize, u64) {
    (p.degree().unwrap_or(usize::MAX), p.height_bits())
}

/// Smith form diagonal of tI − A over Q[t], monic entries.
pub fn polynomial_smith_diagonal(a: &RationalMatrix) -> Vec<RationalPolynomial> {
    let n = a.rows();
    let mut m: PolyMatrix = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let c = -a[(i, j)].clone();
                    if i == j {
                        RationalPolynomial::new(vec![c, BigRational::one()])
                    } else {
                        RationalPolynomial::constant(c)
                    }
                })
                .collect()
        })
        .collect();
    let mut diag = Vec::with_capacity(n);
    for t in 0..n {
        loop {
            let best = (t..n)
                .flat_map(|i| (t..n).map(move |j| (i, j)))
                .filter(|&(i, j)| !m[i][j].is_zero())
                .min_by_key(|&(i, j)| (pivot_key(&m[i][j]), i, j));
            let Some((pi, pj)) = best else {
                diag.extend((t..n).map(|_| RationalPolynomial::zero()));
                return diag;
            };
            m.swap(t, pi);
            for row in m.iter_mut() {
                row.swap(t, pj);
            }
            let piv = m[t][t].clone();
            let mut dirty = false;
            for i in t + 1..n {
                if m[i][t].is_zero() {
                    continue;
                }
                let (q, _) = m[i][t].div_rem(&piv);
                for j in t..n {
                    let s = q.mul(&m[t][j]);
                    m[i][j] = m[i][j].sub(&s);
                }
                dirty |= !m[i][t].is_zero();
            }
            for j in t + 1..n {
                if m[t][j].is_zero() {
                    continue;
                }
                let (q, _) = m[t][j].div_rem(&piv);
                for row in m.iter_mut().skip(t) {
                    let s = q.mul(&row[t]);
                    row[j] = row[j].sub(&s);
                }
                dirty |= !m[t][j].is_zero();
            }
            if dirty {
                continue;
            }
            let bad = (t + 1..n).find(|&i| (t + 1..n).any(|j| !piv.divides(&m[i][j])));
            if let Some(i) = bad {
                for j in t..n {
                    m[t][j] = m[t][j].add(&m[i][j]);
                }
                continue;
            }
            diag.push(piv.monic());
            break;
        }
    }
    diag
}

pub fn invariant_factors(a: &RationalMatrix) -> InvariantFactorization {
    let factors: Vec<RationalPolynomial> =
        polynomial_smith_diagonal(a).into_iter().filter(|p| p.degree().is_some_and(|d| d > 0)).collect();
    let primitive_factors: Vec<IntPolynomial> = factors.iter().map(|p| p.primitive_part()).collect();
    let reciprocals = primitive_factors.iter().map(|q| q.reversed_int()).collect();
    let frobenius_form = frobenius_form(&factors);
    InvariantFactorization { factors, primitive_factors, reciprocals, frobenius_form }
}

impl IntPolynomial {
    fn reversed_int(&self) -> IntPolynomial {
        let n = self.degree().unwrap_or(0);
        IntPolynomial::new((0..=n).map(|k| self.coeff(n - k)).collect())
    }
}

fn companion(p: &RationalPolynomial) -> RationalMatrix {
    let d = p.degree().unwrap();
    let mut c = Matrix::zeros(d, d);
    for i in 1..d {
        c[(i, i - 1)] = BigRational::one();
    }
    for i in 0..d {
        c[(i, d - 1)] = -p.coeff(i);
    }
    c
}

fn frobenius_form(factors: &[RationalPolynomial]) -> RationalMatrix {
    let n: usize = factors.iter().map(|p| p.degree().unwrap()).sum();
    let mut f = Matrix::zeros(n, n);
    let mut off = 0;
    for p in factors {
        let c = companion(p);
        for i in 0..c.rows() {
            for j in 0..c.cols() {
                f[(off + i, off + j)] = c[(i, j)].clone();
            }
        }
        off += c.rows();
    }
    f
}

impl InvariantFactorization {
    pub fn product(&self) -> RationalPolynomial {
        self.factors.iter().fold(Polynomial::constant(BigRational::one()), |acc, p| acc.mul(p))
    }

    pub fn counts(&self) -> QuotientCounts {
        let a = self.primitive_factors.iter().fold(BigInt::one(), |acc, q| acc * q.coeff(0).abs());
        let b = self.reciprocals.iter().fold(BigInt::one(), |acc, q| acc * q.coeff(0).abs());
        QuotientCounts { a, b }
    }
}

/// a = ∏|qᵢ(0)| and b = ∏|qᵢ*(0)|, checked against |det A| = a/b.
pub fn quotient_counts(a: &RationalMatrix) -> Result<QuotientCounts> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch { expected: a.rows(), found: a.cols() });
    }
    let det = a.det();
    if det.is_zero() {
        return Err(Error::Singular);
    }
    let f = invariant_factors(a);
    if f.product() != char_poly(a) {
        return Err(Error::invariant("product of invariant factors differs from the characteristic polynomial"));
    }
    let c = f.counts();
    if BigRational::new(c.a.clone(), c.b.clone()) != det.abs() {
        return Err(Error::invariant(format!("a/b = {}/{} differs from |det A| = {}", c.a, c.b, det.abs())));
    }
    Ok(c)
}
