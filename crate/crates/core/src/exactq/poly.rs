use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use super::matrix::Matrix;
use super::scalar::{format_rational, lcm_denominators, rat_int, Field, Scalar};

/// Univariate polynomial, coefficients stored constant term first.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Polynomial<T> {
    coeffs: Vec<T>,
}

pub type RationalPolynomial = Polynomial<BigRational>;
pub type IntPolynomial = Polynomial<BigInt>;

impl<T: fmt::Debug> fmt::Debug for Polynomial<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Poly{:?}", self.coeffs)
    }
}

impl<T: Scalar> Polynomial<T> {
    pub fn new(mut coeffs: Vec<T>) -> Self {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        Polynomial { coeffs }
    }

    pub fn zero() -> Self {
        Polynomial { coeffs: Vec::new() }
    }

    pub fn constant(c: T) -> Self {
        Self::new(vec![c])
    }

    pub fn monomial(c: T, k: usize) -> Self {
        let mut v = vec![T::zero(); k + 1];
        v[k] = c;
        Self::new(v)
    }

    /// t - c
    pub fn linear_root(c: T) -> Self {
        Self::new(vec![-c, T::one()])
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> T {
        self.coeffs.get(k).cloned().unwrap_or_else(T::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree, with the zero polynomial reported as `None`.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn lead(&self) -> T {
        self.coeffs.last().cloned().unwrap_or_else(T::zero)
    }

    pub fn eval(&self, x: &T) -> T {
        self.coeffs.iter().rev().fold(T::zero(), |acc, c| acc * x.clone() + c.clone())
    }

    pub fn add(&self, o: &Self) -> Self {
        let n = self.coeffs.len().max(o.coeffs.len());
        Self::new((0..n).map(|k| self.coeff(k) + o.coeff(k)).collect())
    }

    pub fn sub(&self, o: &Self) -> Self {
        let n = self.coeffs.len().max(o.coeffs.len());
        Self::new((0..n).map(|k| self.coeff(k) - o.coeff(k)).collect())
    }

    pub fn neg(&self) -> Self {
        Polynomial { coeffs: self.coeffs.iter().map(|c| -c.clone()).collect() }
    }

    pub fn mul(&self, o: &Self) -> Self {
        if self.is_zero() || o.is_zero() {
            return Self::zero();
        }
        let mut out = vec![T::zero(); self.coeffs.len() + o.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in o.coeffs.iter().enumerate() {
                out[i + j] = out[i + j].clone() + a.clone() * b.clone();
            }
        }
        Self::new(out)
    }

    pub fn scale(&self, s: &T) -> Self {
        Self::new(self.coeffs.iter().map(|c| c.clone() * s.clone()).collect())
    }

    /// Reciprocal t^deg p(1/t).
    pub fn reversed(&self) -> Self {
        Self::new(self.coeffs.iter().rev().cloned().collect())
    }

    /// p(c t)
    pub fn compose_scale(&self, c: &T) -> Self {
        let mut pw = T::one();
        let mut out = Vec::with_capacity(self.coeffs.len());
        for a in &self.coeffs {
            out.push(a.clone() * pw.clone());
            pw = pw * c.clone();
        }
        Self::new(out)
    }

    /// Evaluate at a square matrix.
    pub fn eval_matrix(&self, m: &Matrix<T>) -> Matrix<T> {
        let n = m.rows();
        self.coeffs
            .iter()
            .rev()
            .fold(Matrix::zeros(n, n), |acc, c| acc.mul(m).add(&Matrix::identity(n).scale(c)))
    }
}

impl<T: Field> Polynomial<T> {
    pub fn div_rem(&self, d: &Self) -> (Self, Self) {
        assert!(!d.is_zero(), "polynomial division by zero");
        let dd = d.coeffs.len() - 1;
        let lead = d.lead();
        let mut r = self.coeffs.clone();
        if r.len() <= dd {
            return (Self::zero(), self.clone());
        }
        let mut q = vec![T::zero(); r.len() - dd];
        for k in (0..q.len()).rev() {
            let c = r[k + dd].clone() / lead.clone();
            if c.is_zero() {
                continue;
            }
            for (i, di) in d.coeffs.iter().enumerate() {
                r[k + i] = r[k + i].clone() - c.clone() * di.clone();
            }
            q[k] = c;
        }
        r.truncate(dd);
        (Self::new(q), Self::new(r))
    }

    pub fn monic(&self) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        let l = self.lead();
        Self::new(self.coeffs.iter().map(|c| c.clone() / l.clone()).collect())
    }

    pub fn gcd(&self, o: &Self) -> Self {
        let (mut a, mut b) = (self.clone(), o.clone());
        while !b.is_zero() {
            let (_, r) = a.div_rem(&b);
            a = b;
            b = r;
        }
        a.monic()
    }

    pub fn lcm(&self, o: &Self) -> Self {
        if self.is_zero() || o.is_zero() {
            return Self::zero();
        }
        let g = self.gcd(o);
        self.mul(o).div_rem(&g).0.monic()
    }

    pub fn divides(&self, o: &Self) -> bool {
        o.div_rem(self).1.is_zero()
    }
}

/// Monic minimal polynomial of m restricted to the cyclic subspace of v.
pub fn vector_min_poly(m: &Matrix<BigRational>, v: &[BigRational]) -> RationalPolynomial {
    if v.iter().all(|x| x.is_zero()) {
        return RationalPolynomial::constant(BigRational::one());
    }
    let mut krylov = vec![v.to_vec()];
    loop {
        let next = m.mul_vec(krylov.last().unwrap());
        if let Some(c) = Matrix::from_cols(&krylov).solve(&next) {
            let mut coeffs: Vec<BigRational> = c.into_iter().map(|x| -x).collect();
            coeffs.push(BigRational::one());
            return RationalPolynomial::new(coeffs);
        }
        krylov.push(next);
    }
}

impl RationalPolynomial {
    /// Primitive integer multiple c·p with content 1 and positive leading coefficient.
    pub fn primitive_part(&self) -> IntPolynomial {
        if self.is_zero() {
            return IntPolynomial::zero();
        }
        let d = lcm_denominators(self.coeffs.iter());
        let ints: Vec<BigInt> = self.coeffs.iter().map(|c| (c * rat_int(&d)).to_integer()).collect();
        let g = ints.iter().fold(BigInt::zero(), |g, x| g.gcd(x));
        let sign = if ints.last().is_some_and(|l| l.is_negative()) { -BigInt::one() } else { BigInt::one() };
        IntPolynomial::new(ints.into_iter().map(|x| x / &g * &sign).collect())
    }

    /// Height used for deterministic pivot tie-breaking.
    pub fn height_bits(&self) -> u64 {
        self.coeffs.iter().map(|c| c.numer().bits() + c.denom().bits()).max().unwrap_or(0)
    }

    pub fn to_strings(&self) -> Vec<String> {
        self.coeffs.iter().map(format_rational).collect()
    }
}

impl IntPolynomial {
    pub fn content(&self) -> BigInt {
        self.coeffs.iter().fold(BigInt::zero(), |g, x| g.gcd(x))
    }

    pub fn is_primitive(&self) -> bool {
        self.content().is_one()
    }

    pub fn to_rational(&self) -> RationalPolynomial {
        RationalPolynomial::new(self.coeffs.iter().map(rat_int).collect())
    }

    pub fn to_strings(&self) -> Vec<String> {
        self.coeffs.iter().map(|c| c.to_string()).collect()
    }
}

/// Characteristic polynomial det(tI - A) by Faddeev-LeVerrier.
pub fn char_poly<T: Field>(a: &Matrix<T>) -> Polynomial<T> {
    assert!(a.is_square());
    let n = a.rows();
    let mut coeffs = vec![T::zero(); n + 1];
    coeffs[n] = T::one();
    let mut m = Matrix::<T>::zeros(n, n);
    for k in 1..=n {
        // M_k = A M_{k-1} + c_{n-k+1} I
        let mut next = a.mul(&m);
        let c = coeffs[n - k + 1].clone();
        for i in 0..n {
            next[(i, i)] = next[(i, i)].clone() + c.clone();
        }
        m = next;
        let tr = a.mul(&m).trace();
        coeffs[n - k] = -(tr / T::from_i64(k as i64));
    }
    Polynomial::new(coeffs)
}

/// Minimal polynomial as the lcm of the Krylov minimal polynomials of the unit vectors.
pub fn min_poly<T: Field>(a: &Matrix<T>) -> Polynomial<T> {
    let n = a.rows();
    let mut acc = Polynomial::constant(T::one());
    for i in 0..n {
        let mut e = vec![T::zero(); n];
        e[i] = T::one();
        acc = acc.lcm(&krylov_min_poly(a, &e));
    }
    acc
}

/// Monic polynomial p of least degree with p(A)v = 0.
pub fn krylov_min_poly<T: Field>(a: &Matrix<T>, v: &[T]) -> Polynomial<T> {
    let n = a.rows();
    // reduced rows: (vector, combination of Krylov vectors) in echelon order
    let mut basis: Vec<(Vec<T>, Vec<T>, usize)> = Vec::new();
    let mut cur = v.to_vec();
    for k in 0..=n {
        let mut w = cur.clone();
        let mut comb = vec![T::zero(); n + 1];
        comb[k] = T::one();
        for (bv, bc, p) in &basis {
            if w[*p].is_zero() {
                continue;
            }
            let f = w[*p].clone() / bv[*p].clone();
            for j in 0..n {
                w[j] = w[j].clone() - f.clone() * bv[j].clone();
            }
            for j in 0..=n {
                comb[j] = comb[j].clone() - f.clone() * bc[j].clone();
            }
        }
        match w.iter().position(|x| !x.is_zero()) {
            Some(p) => basis.push((w, comb, p)),
            None => return Polynomial::new(comb).monic(),
        }
        cur = a.mul_vec(&cur);
    }
    unreachable!("Krylov sequence of length n+1 is always dependent")
}
