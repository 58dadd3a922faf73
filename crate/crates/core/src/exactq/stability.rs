use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use super::matrix::Matrix;
use super::poly::{char_poly, RationalPolynomial};
use super::scalar::rat;
use crate::error::{Error, Result};

/// Schur–Cohn: every root of `p` lies strictly inside the unit disk.
pub fn roots_inside_unit_disk(p: &RationalPolynomial) -> bool {
    if p.is_zero() {
        return false;
    }
    let mut p = p.clone();
    while p.degree().unwrap() > 0 {
        let n = p.degree().unwrap();
        let a0 = p.coeff(0);
        let an = p.coeff(n);
        if an.abs() <= a0.abs() {
            return false;
        }
        // (a_n p - a_0 p*) / t, degree n-1 with leading coefficient a_n² - a_0²
        let t = p.scale(&an).sub(&p.reversed_full(n).scale(&a0));
        p = RationalPolynomial::new(t.coeffs()[1..].to_vec());
    }
    true
}

impl RationalPolynomial {
    /// t^n p(1/t) for a declared degree n ≥ deg p.
    fn reversed_full(&self, n: usize) -> RationalPolynomial {
        RationalPolynomial::new((0..=n).map(|k| self.coeff(n - k)).collect())
    }
}

/// Every root has modulus > 1.
pub fn roots_outside_unit_disk(p: &RationalPolynomial) -> bool {
    let Some(n) = p.degree() else { return false };
    if p.coeff(0).is_zero() {
        return false;
    }
    roots_inside_unit_disk(&p.reversed_full(n))
}

/// All eigenvalues of A lie outside the closed unit disk.
pub fn is_expanding(a: &Matrix<BigRational>) -> Result<bool> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch { expected: a.rows(), found: a.cols() });
    }
    if a.det().is_zero() {
        return Err(Error::Singular);
    }
    Ok(roots_outside_unit_disk(&char_poly(a)))
}

/// Certified rational σ > 1 with every eigenvalue modulus > σ (A expanding).
pub fn modulus_lower_bound(a: &Matrix<BigRational>, rounds: usize) -> Result<BigRational> {
    if !is_expanding(a)? {
        return Err(Error::NotExpanding);
    }
    let chi = char_poly(a);
    // roots of χ(r t) are λ/r
    let ok = |r: &BigRational| roots_outside_unit_disk(&chi.compose_scale(r));
    let mut lo = BigRational::one();
    let mut hi = a.det().abs().max(rat(2, 1));
    while ok(&hi) {
        hi = &hi * rat(2, 1);
    }
    for _ in 0..rounds {
        let mid = (&lo + &hi) / rat(2, 1);
        if ok(&mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}
