use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, Zero};

use super::matrix::Matrix;

/// Smith normal form: unimodular U, V with U·M·V = S diagonal, d₁ | d₂ | …
#[derive(Clone, Debug)]
pub struct Smith {
    pub u: Matrix<BigInt>,
    pub s: Matrix<BigInt>,
    pub v: Matrix<BigInt>,
}

impl Smith {
    pub fn diagonal(&self) -> Vec<BigInt> {
        (0..self.s.rows().min(self.s.cols())).map(|i| self.s[(i, i)].clone()).collect()
    }
}

fn swap_rows(m: &mut Matrix<BigInt>, a: usize, b: usize) {
    if a == b {
        return;
    }
    for j in 0..m.cols() {
        let t = m[(a, j)].clone();
        m[(a, j)] = m[(b, j)].clone();
        m[(b, j)] = t;
    }
}

fn swap_cols(m: &mut Matrix<BigInt>, a: usize, b: usize) {
    if a == b {
        return;
    }
    for i in 0..m.rows() {
        let t = m[(i, a)].clone();
        m[(i, a)] = m[(i, b)].clone();
        m[(i, b)] = t;
    }
}

// row_a -= q * row_b
fn row_axpy(m: &mut Matrix<BigInt>, a: usize, b: usize, q: &BigInt) {
    for j in 0..m.cols() {
        let t = q * &m[(b, j)];
        m[(a, j)] -= t;
    }
}

fn col_axpy(m: &mut Matrix<BigInt>, a: usize, b: usize, q: &BigInt) {
    for i in 0..m.rows() {
        let t = q * &m[(i, b)];
        m[(i, a)] -= t;
    }
}

pub fn snf(m: &Matrix<BigInt>) -> Smith {
    let (rows, cols) = (m.rows(), m.cols());
    let mut s = m.clone();
    let mut u = Matrix::<BigInt>::identity(rows);
    let mut v = Matrix::<BigInt>::identity(cols);
    for t in 0..rows.min(cols) {
        loop {
            let mut best: Option<(usize, usize)> = None;
            for i in t..rows {
                for j in t..cols {
                    if s[(i, j)].is_zero() {
                        continue;
                    }
                    if best.is_none_or(|(bi, bj)| s[(i, j)].abs() < s[(bi, bj)].abs()) {
                        best = Some((i, j));
                    }
                }
            }
            let Some((pi, pj)) = best else { return Smith { u, s, v } };
            swap_rows(&mut s, t, pi);
            swap_rows(&mut u, t, pi);
            swap_cols(&mut s, t, pj);
            swap_cols(&mut v, t, pj);
            let mut dirty = false;
            for i in t + 1..rows {
                if s[(i, t)].is_zero() {
                    continue;
                }
                let q = s[(i, t)].div_floor(&s[(t, t)]);
                row_axpy(&mut s, i, t, &q);
                row_axpy(&mut u, i, t, &q);
                dirty |= !s[(i, t)].is_zero();
            }
            for j in t + 1..cols {
                if s[(t, j)].is_zero() {
                    continue;
                }
                let q = s[(t, j)].div_floor(&s[(t, t)]);
                col_axpy(&mut s, j, t, &q);
                col_axpy(&mut v, j, t, &q);
                dirty |= !s[(t, j)].is_zero();
            }
            if dirty {
                continue;
            }
            let bad = (t + 1..rows)
                .flat_map(|i| (t + 1..cols).map(move |j| (i, j)))
                .find(|&(i, j)| !s[(i, j)].is_multiple_of(&s[(t, t)]));
            if let Some((i, _)) = bad {
                let minus_one = BigInt::from(-1);
                row_axpy(&mut s, t, i, &minus_one);
                row_axpy(&mut u, t, i, &minus_one);
                continue;
            }
            if s[(t, t)].is_negative() {
                for j in 0..cols {
                    s[(t, j)] = -&s[(t, j)];
                }
                for j in 0..rows {
                    u[(t, j)] = -&u[(t, j)];
                }
            }
            break;
        }
    }
    Smith { u, s, v }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactq::scalar::int;

    fn im(rows: &[&[i64]]) -> Matrix<BigInt> {
        Matrix::from_rows(rows.iter().map(|r| r.iter().map(|&x| int(x)).collect()).collect())
    }

    fn check(m: &Matrix<BigInt>) -> Vec<BigInt> {
        let r = snf(m);
        assert_eq!(r.u.mul(m).mul(&r.v), r.s);
        assert!(r.u.is_unimodular() && r.v.is_unimodular());
        let d = r.diagonal();
        for w in d.windows(2) {
            assert!(w[1].is_zero() || (!w[0].is_zero() && w[1].is_multiple_of(&w[0])));
        }
        d
    }

    #[test]
    fn small_cases() {
        assert_eq!(check(&im(&[&[2, 0], &[0, 3]])), vec![int(1), int(6)]);
        assert_eq!(check(&im(&[&[1, 0], &[0, 1]])), vec![int(1), int(1)]);
        assert_eq!(check(&im(&[&[2, 0], &[0, 4]])), vec![int(2), int(4)]);
        assert_eq!(check(&im(&[&[2, 1], &[0, 5]])), vec![int(1), int(10)]);
    }

    #[test]
    fn rectangular_and_singular() {
        check(&im(&[&[2, 4, 6], &[1, 3, 5]]));
        assert_eq!(check(&im(&[&[2, 4], &[1, 2]])), vec![int(1), int(0)]);
        check(&im(&[&[6, 4], &[10, 8], &[0, 14]]));
    }
}
