use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::exactq::scalar::rat_int;
use crate::RationalMatrix;

/// Σ_j A^j z_j with integer coefficient vectors, finitely many exponents j ∈ Z.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModuleElement {
    dim: usize,
    terms: BTreeMap<i64, Vec<BigInt>>,
}

impl ModuleElement {
    pub fn zero(dim: usize) -> Self {
        ModuleElement { dim, terms: BTreeMap::new() }
    }

    pub fn from_vector(z: Vec<BigInt>) -> Self {
        Self::term(0, z)
    }

    pub fn from_i64(z: &[i64]) -> Self {
        Self::from_vector(z.iter().map(|&x| BigInt::from(x)).collect())
    }

    pub fn term(exp: i64, z: Vec<BigInt>) -> Self {
        let mut e = ModuleElement::zero(z.len());
        e.add_term(exp, &z);
        e
    }

    pub fn from_terms(dim: usize, terms: impl IntoIterator<Item = (i64, Vec<BigInt>)>) -> Self {
        let mut e = ModuleElement::zero(dim);
        for (j, z) in terms {
            assert_eq!(z.len(), dim, "coefficient length");
            e.add_term(j, &z);
        }
        e
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &BTreeMap<i64, Vec<BigInt>> {
        &self.terms
    }

    pub fn coeff(&self, j: i64) -> Vec<BigInt> {
        self.terms.get(&j).cloned().unwrap_or_else(|| vec![BigInt::zero(); self.dim])
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn min_exp(&self) -> Option<i64> {
        self.terms.keys().next().copied()
    }

    pub fn max_exp(&self) -> Option<i64> {
        self.terms.keys().next_back().copied()
    }

    /// No negative exponents, i.e. visibly an element of Zⁿ[A].
    pub fn is_polynomial(&self) -> bool {
        self.min_exp().is_none_or(|j| j >= 0)
    }

    pub fn add_term(&mut self, j: i64, z: &[BigInt]) {
        if z.iter().all(|x| x.is_zero()) {
            return;
        }
        let slot = self.terms.entry(j).or_insert_with(|| vec![BigInt::zero(); z.len()]);
        for (a, b) in slot.iter_mut().zip(z) {
            *a += b;
        }
        if slot.iter().all(|x| x.is_zero()) {
            self.terms.remove(&j);
        }
    }

    pub fn add(&self, o: &ModuleElement) -> ModuleElement {
        let mut r = self.clone();
        for (j, z) in &o.terms {
            r.add_term(*j, z);
        }
        r
    }

    pub fn neg(&self) -> ModuleElement {
        ModuleElement {
            dim: self.dim,
            terms: self.terms.iter().map(|(j, z)| (*j, z.iter().map(|x| -x).collect())).collect(),
        }
    }

    pub fn sub(&self, o: &ModuleElement) -> ModuleElement {
        self.add(&o.neg())
    }

    /// Multiply by A^k.
    pub fn shift(&self, k: i64) -> ModuleElement {
        ModuleElement { dim: self.dim, terms: self.terms.iter().map(|(j, z)| (j + k, z.clone())).collect() }
    }

    pub fn scale_int(&self, c: &BigInt) -> ModuleElement {
        ModuleElement::from_terms(self.dim, self.terms.iter().map(|(j, z)| (*j, z.iter().map(|x| x * c).collect())))
    }

    /// Exact value in Qⁿ given A and B = A⁻¹.
    pub fn value(&self, a: &RationalMatrix, b: &RationalMatrix) -> Vec<BigRational> {
        let zero = || vec![BigRational::zero(); self.dim];
        let mut pos = zero();
        if let Some(top) = self.max_exp().filter(|&t| t >= 0) {
            for j in (0..=top).rev() {
                pos = a.mul_vec(&pos);
                if let Some(z) = self.terms.get(&j) {
                    add_int(&mut pos, z);
                }
            }
        }
        let mut neg = zero();
        if let Some(lo) = self.min_exp().filter(|&l| l < 0) {
            for j in lo..0 {
                if let Some(z) = self.terms.get(&j) {
                    add_int(&mut neg, z);
                }
                neg = b.mul_vec(&neg);
            }
        }
        pos.iter().zip(&neg).map(|(x, y)| x + y).collect()
    }

    pub fn to_literal(&self) -> Vec<(i64, Vec<IntLiteral>)> {
        self.terms.iter().map(|(j, z)| (*j, z.iter().map(IntLiteral::from_big).collect())).collect()
    }
}

fn add_int(v: &mut [BigRational], z: &[BigInt]) {
    for (a, b) in v.iter_mut().zip(z) {
        if !b.is_zero() {
            *a += rat_int(b);
        }
    }
}

/// JSON integer: a number when it fits in i64, otherwise a decimal string.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum IntLiteral {
    Small(i64),
    Text(String),
}

impl IntLiteral {
    pub fn from_big(x: &BigInt) -> Self {
        match x.to_i64() {
            Some(v) => IntLiteral::Small(v),
            None => IntLiteral::Text(x.to_string()),
        }
    }

    pub fn to_big(&self) -> Option<BigInt> {
        match self {
            IntLiteral::Small(v) => Some(BigInt::from(*v)),
            IntLiteral::Text(s) => s.trim().parse().ok(),
        }
    }
}

impl Serialize for ModuleElement {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_literal().serialize(s)
    }
}
