use std::fmt;
use std::ops::{Index, IndexMut};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use super::scalar::{format_rational, lcm_denominators, parse_rational, rat_int, Field, Scalar};
use crate::error::{Error, Result};

/// Dense row-major matrix over a scalar ring.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: fmt::Debug> fmt::Debug for Matrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<&[T]> = self.data.chunks(self.cols.max(1)).collect();
        write!(f, "Matrix{rows:?}")
    }
}

impl<T> Matrix<T> {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(rows * cols, data.len(), "matrix data has wrong length");
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        assert!(rows.iter().all(|x| x.len() == c), "ragged rows");
        Matrix { rows: r, cols: c, data: rows.into_iter().flatten().collect() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn map<U>(&self, f: impl Fn(&T) -> U) -> Matrix<U> {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(f).collect() }
    }
}

impl<T: Clone> Matrix<T> {
    pub fn col(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)].clone()).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                data.push(self[(i, j)].clone());
            }
        }
        Matrix { rows: self.cols, cols: self.rows, data }
    }

    pub fn from_cols(cols: &[Vec<T>]) -> Self {
        Matrix::from_rows(cols.to_vec()).transpose()
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn diagonal(d: &[T]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, x) in d.iter().enumerate() {
            m[(i, i)] = x.clone();
        }
        m
    }

    pub fn mul(&self, other: &Matrix<T>) -> Matrix<T> {
        assert_eq!(self.cols, other.rows, "matrix product shape");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let p = a.clone() * other[(k, j)].clone();
                    let e = &mut out[(i, j)];
                    *e = e.clone() + p;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.cols, v.len(), "matrix-vector shape");
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .filter(|(a, b)| !a.is_zero() && !b.is_zero())
                    .fold(T::zero(), |acc, (a, b)| acc + a.clone() * b.clone())
            })
            .collect()
    }

    pub fn add(&self, other: &Matrix<T>) -> Matrix<T> {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a.clone() + b.clone()).collect();
        Matrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn sub(&self, other: &Matrix<T>) -> Matrix<T> {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a.clone() - b.clone()).collect();
        Matrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn scale(&self, s: &T) -> Matrix<T> {
        self.map(|x| x.clone() * s.clone())
    }

    pub fn pow(&self, k: u32) -> Matrix<T> {
        assert!(self.is_square());
        let mut acc = Self::identity(self.rows);
        let mut base = self.clone();
        let mut e = k;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    pub fn trace(&self) -> T {
        (0..self.rows.min(self.cols)).fold(T::zero(), |acc, i| acc + self[(i, i)].clone())
    }

    pub fn frobenius_sq(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, x| acc + x.clone() * x.clone())
    }

    pub fn to_f64(&self) -> Matrix<f64> {
        self.map(|x| x.to_f64())
    }
}

impl<T: Field> Matrix<T> {
    /// Row echelon form by Gaussian elimination; returns (echelon, pivot columns, sign of permutation).
    fn echelon(&self) -> (Matrix<T>, Vec<usize>, bool) {
        let mut m = self.clone();
        let mut pivots = Vec::new();
        let mut odd = false;
        let mut r = 0;
        for c in 0..m.cols {
            if r == m.rows {
                break;
            }
            let best = (r..m.rows)
                .filter(|&i| !m[(i, c)].is_zero())
                .max_by(|&i, &j| m[(i, c)].pivot_weight().total_cmp(&m[(j, c)].pivot_weight()).then(j.cmp(&i)));
            let Some(p) = best else { continue };
            if p != r {
                for j in 0..m.cols {
                    m.data.swap(p * m.cols + j, r * m.cols + j);
                }
                odd = !odd;
            }
            let piv = m[(r, c)].clone();
            for i in r + 1..m.rows {
                if m[(i, c)].is_zero() {
                    continue;
                }
                let f = m[(i, c)].clone() / piv.clone();
                for j in c..m.cols {
                    let t = f.clone() * m[(r, j)].clone();
                    m[(i, j)] = m[(i, j)].clone() - t;
                }
            }
            pivots.push(c);
            r += 1;
        }
        (m, pivots, odd)
    }

    pub fn det(&self) -> T {
        assert!(self.is_square(), "determinant of non-square matrix");
        let (m, pivots, odd) = self.echelon();
        if pivots.len() < self.rows {
            return T::zero();
        }
        let d = (0..self.rows).fold(T::one(), |acc, i| acc * m[(i, i)].clone());
        if odd {
            -d
        } else {
            d
        }
    }

    pub fn rank(&self) -> usize {
        self.echelon().1.len()
    }

    /// One solution x of self·x = rhs, free variables set to zero.
    pub fn solve(&self, rhs: &[T]) -> Option<Vec<T>> {
        assert_eq!(rhs.len(), self.rows);
        let mut aug = Self::zeros(self.rows, self.cols + 1);
        for i in 0..self.rows {
            for j in 0..self.cols {
                aug[(i, j)] = self[(i, j)].clone();
            }
            aug[(i, self.cols)] = rhs[i].clone();
        }
        let (m, pivots, _) = aug.echelon();
        if pivots.last() == Some(&self.cols) {
            return None;
        }
        let mut x = vec![T::zero(); self.cols];
        for (r, &c) in pivots.iter().enumerate().rev() {
            let mut acc = m[(r, self.cols)].clone();
            for j in c + 1..self.cols {
                acc = acc - m[(r, j)].clone() * x[j].clone();
            }
            x[c] = acc / m[(r, c)].clone();
        }
        Some(x)
    }

    pub fn inverse(&self) -> Option<Matrix<T>> {
        assert!(self.is_square());
        let n = self.rows;
        let mut aug = Self::zeros(n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                aug[(i, j)] = self[(i, j)].clone();
            }
            aug[(i, n + i)] = T::one();
        }
        let (mut m, pivots, _) = aug.echelon();
        if pivots.len() < n || pivots[n - 1] >= n {
            return None;
        }
        for r in (0..n).rev() {
            let piv = m[(r, r)].clone();
            for j in 0..2 * n {
                m[(r, j)] = m[(r, j)].clone() / piv.clone();
            }
            for i in 0..r {
                if m[(i, r)].is_zero() {
                    continue;
                }
                let f = m[(i, r)].clone();
                for j in 0..2 * n {
                    let t = f.clone() * m[(r, j)].clone();
                    m[(i, j)] = m[(i, j)].clone() - t;
                }
            }
        }
        let mut inv = Self::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                inv[(i, j)] = m[(i, n + j)].clone();
            }
        }
        Some(inv)
    }
}

impl Matrix<BigRational> {
    pub fn from_int(m: &Matrix<BigInt>) -> Self {
        m.map(rat_int)
    }

    /// Least common multiple of all entry denominators.
    pub fn denominator_lcm(&self) -> BigInt {
        lcm_denominators(self.data.iter())
    }

    pub fn is_integral(&self) -> bool {
        self.data.iter().all(|q| q.is_integer())
    }

    /// Integer matrix `d * self` when the entries are integral after scaling.
    pub fn scaled_integer(&self, d: &BigInt) -> Option<Matrix<BigInt>> {
        let s = rat_int(d);
        let mut data = Vec::with_capacity(self.data.len());
        for q in &self.data {
            let v = q * &s;
            if !v.is_integer() {
                return None;
            }
            data.push(v.to_integer());
        }
        Some(Matrix { rows: self.rows, cols: self.cols, data })
    }

    pub fn parse(rows: &[Vec<String>], at: &str) -> Result<Self> {
        let n = rows.len();
        let mut out = Vec::with_capacity(n);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != rows[0].len() {
                return Err(Error::parse(format!("{at}[{i}]"), "ragged matrix rows"));
            }
            let mut row = Vec::with_capacity(r.len());
            for (j, s) in r.iter().enumerate() {
                row.push(parse_rational(s, &format!("{at}[{i}][{j}]"))?);
            }
            out.push(row);
        }
        Ok(Matrix::from_rows(out))
    }

    pub fn to_strings(&self) -> Vec<Vec<String>> {
        (0..self.rows).map(|i| self.row(i).iter().map(format_rational).collect()).collect()
    }
}

impl Matrix<BigInt> {
    pub fn det_int(&self) -> BigInt {
        Matrix::<BigRational>::from_int(self).det().to_integer()
    }

    pub fn abs_max(&self) -> BigInt {
        self.data.iter().map(|x| x.abs()).max().unwrap_or_else(BigInt::zero)
    }

    pub fn is_unimodular(&self) -> bool {
        self.is_square() && self.det_int().abs().is_one()
    }
}

impl Serialize for Matrix<BigRational> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_strings().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Matrix<BigRational> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<String>>::deserialize(d)?;
        Matrix::parse(&rows, "matrix").map_err(serde::de::Error::custom)
    }
}
