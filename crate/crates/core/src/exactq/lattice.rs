use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use super::matrix::Matrix;
use super::scalar::{lcm_denominators, rat_int};
use crate::error::{Error, Result};

/// Column Hermite normal form of the span of `gens` (each of length `dim`).
///
/// Basis vectors are sorted by pivot coordinate (last nonzero entry), pivots are
/// positive, and entries of later columns at earlier pivot rows lie in [0, pivot).
#[derive(Clone, Debug)]
pub struct Hnf {
    pub dim: usize,
    pub basis: Vec<Vec<BigInt>>,
    pub pivots: Vec<usize>,
    /// Coefficients of each basis vector over the input generators (when tracked).
    pub transform: Vec<Vec<BigInt>>,
    /// Integer relations among the input generators (when tracked).
    pub kernel: Vec<Vec<BigInt>>,
}

struct Tracked {
    v: Vec<BigInt>,
    t: Vec<BigInt>,
}

impl Tracked {
    fn sub_mul(&mut self, q: &BigInt, o: &Tracked) {
        for (a, b) in self.v.iter_mut().zip(&o.v) {
            if !b.is_zero() {
                *a -= q * b;
            }
        }
        for (a, b) in self.t.iter_mut().zip(&o.t) {
            if !b.is_zero() {
                *a -= q * b;
            }
        }
    }

    fn negate(&mut self) {
        for a in self.v.iter_mut().chain(self.t.iter_mut()) {
            *a = -&*a;
        }
    }
}

impl Hnf {
    pub fn new(dim: usize, gens: &[Vec<BigInt>]) -> Self {
        Self::build(dim, gens, false)
    }

    pub fn with_transform(dim: usize, gens: &[Vec<BigInt>]) -> Self {
        Self::build(dim, gens, true)
    }

    fn build(dim: usize, gens: &[Vec<BigInt>], track: bool) -> Self {
        let m = gens.len();
        let mut active: Vec<Tracked> = gens
            .iter()
            .enumerate()
            .map(|(i, g)| {
                assert_eq!(g.len(), dim, "generator length");
                let mut t = Vec::new();
                if track {
                    t = vec![BigInt::zero(); m];
                    t[i] = BigInt::one();
                }
                Tracked { v: g.clone(), t }
            })
            .collect();
        let mut piv: Vec<(usize, Tracked)> = Vec::new();
        for c in (0..dim).rev() {
            loop {
                let nz: Vec<usize> = (0..active.len()).filter(|&i| !active[i].v[c].is_zero()).collect();
                if nz.is_empty() {
                    break;
                }
                let p = *nz.iter().min_by_key(|&&i| active[i].v[c].abs()).unwrap();
                if nz.len() == 1 {
                    let mut row = active.swap_remove(p);
                    if row.v[c].is_negative() {
                        row.negate();
                    }
                    piv.push((c, row));
                    break;
                }
                let pv = active[p].v[c].clone();
                for &i in &nz {
                    if i == p {
                        continue;
                    }
                    let q = active[i].v[c].div_floor(&pv);
                    let (a, b) = pick2(&mut active, i, p);
                    a.sub_mul(&q, b);
                }
            }
        }
        piv.reverse();
        for l in 0..piv.len() {
            for j in (0..l).rev() {
                let pj = piv[j].0;
                let q = piv[l].1.v[pj].div_floor(&piv[j].1.v[pj]);
                if !q.is_zero() {
                    let (a, b) = pick2_pairs(&mut piv, l, j);
                    a.sub_mul(&q, b);
                }
            }
        }
        let kernel = if track { active.into_iter().map(|r| r.t).collect() } else { Vec::new() };
        let pivots = piv.iter().map(|(c, _)| *c).collect();
        let (basis, transform): (Vec<_>, Vec<_>) = piv.into_iter().map(|(_, r)| (r.v, r.t)).unzip();
        Hnf { dim, basis, pivots, transform, kernel }
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    /// Coordinates of `w` over the basis, if `w` lies in the span.
    pub fn coords(&self, w: &[BigInt]) -> Option<Vec<BigInt>> {
        let mut w = w.to_vec();
        let mut c = vec![BigInt::zero(); self.basis.len()];
        for j in (0..self.basis.len()).rev() {
            let p = self.pivots[j];
            if w[p].is_zero() {
                continue;
            }
            let (q, r) = w[p].div_rem(&self.basis[j][p]);
            if !r.is_zero() {
                return None;
            }
            for (a, b) in w.iter_mut().zip(&self.basis[j]) {
                if !b.is_zero() {
                    *a -= &q * b;
                }
            }
            c[j] = q;
        }
        if w.iter().all(|x| x.is_zero()) {
            Some(c)
        } else {
            None
        }
    }

    /// Coefficients over the original generators (requires a tracked transform).
    pub fn solve(&self, w: &[BigInt]) -> Option<Vec<BigInt>> {
        let c = self.coords(w)?;
        let m = self.transform.first().map_or(0, |t| t.len());
        let mut u = vec![BigInt::zero(); m];
        for (cj, tj) in c.iter().zip(&self.transform) {
            if cj.is_zero() {
                continue;
            }
            for (a, b) in u.iter_mut().zip(tj) {
                *a += cj * b;
            }
        }
        Some(u)
    }

    /// Canonical representative of w modulo the span: pivot entries in [0, pivot).
    pub fn reduce(&self, w: &[BigInt]) -> Vec<BigInt> {
        let mut w = w.to_vec();
        for j in (0..self.basis.len()).rev() {
            let p = self.pivots[j];
            let q = w[p].div_floor(&self.basis[j][p]);
            if q.is_zero() {
                continue;
            }
            for (a, b) in w.iter_mut().zip(&self.basis[j]) {
                if !b.is_zero() {
                    *a -= &q * b;
                }
            }
        }
        w
    }
}

fn pick2(v: &mut [Tracked], i: usize, j: usize) -> (&mut Tracked, &Tracked) {
    assert_ne!(i, j);
    if i < j {
        let (a, b) = v.split_at_mut(j);
        (&mut a[i], &b[0])
    } else {
        let (a, b) = v.split_at_mut(i);
        (&mut b[0], &a[j])
    }
}

fn pick2_pairs(v: &mut [(usize, Tracked)], i: usize, j: usize) -> (&mut Tracked, &Tracked) {
    assert!(j < i);
    let (a, b) = v.split_at_mut(i);
    (&mut b[0].1, &a[j].1)
}

/// Lattice (1/scale)·span(basis) in Qⁿ with an integer basis in column HNF.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct IntLattice {
    dim: usize,
    scale: BigInt,
    basis: Vec<Vec<BigInt>>,
}

impl IntLattice {
    pub fn from_hnf(h: &Hnf, scale: BigInt) -> Self {
        let mut l = IntLattice { dim: h.dim, scale, basis: h.basis.clone() };
        l.canonicalize();
        l
    }

    /// Lattice spanned by integer generators.
    pub fn hnf(dim: usize, gens: &[Vec<BigInt>]) -> Self {
        Self::scaled(dim, BigInt::one(), gens)
    }

    /// Lattice (1/scale)·span(gens).
    pub fn scaled(dim: usize, scale: BigInt, gens: &[Vec<BigInt>]) -> Self {
        assert!(scale.is_positive(), "lattice scale must be positive");
        Self::from_hnf(&Hnf::new(dim, gens), scale)
    }

    pub fn from_rational(dim: usize, gens: &[Vec<BigRational>]) -> Self {
        let s = lcm_denominators(gens.iter().flatten());
        let sr = rat_int(&s);
        let ints: Vec<Vec<BigInt>> =
            gens.iter().map(|g| g.iter().map(|q| (q * &sr).to_integer()).collect()).collect();
        Self::scaled(dim, s, &ints)
    }

    pub fn standard(dim: usize) -> Self {
        let gens: Vec<Vec<BigInt>> = (0..dim).map(|i| unit(dim, i)).collect();
        Self::hnf(dim, &gens)
    }

    pub fn zero(dim: usize) -> Self {
        IntLattice { dim, scale: BigInt::one(), basis: Vec::new() }
    }

    fn canonicalize(&mut self) {
        let g = self.basis.iter().flatten().fold(self.scale.clone(), |g, x| g.gcd(x));
        if !g.is_one() && !g.is_zero() {
            self.scale = &self.scale / &g;
            for x in self.basis.iter_mut().flatten() {
                *x = &*x / &g;
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn scale(&self) -> &BigInt {
        &self.scale
    }

    /// Integer basis columns (the lattice is these divided by `scale`).
    pub fn int_basis(&self) -> &[Vec<BigInt>] {
        &self.basis
    }

    pub fn rational_basis(&self) -> Vec<Vec<BigRational>> {
        self.basis.iter().map(|b| b.iter().map(|x| BigRational::new(x.clone(), self.scale.clone())).collect()).collect()
    }

    /// Square basis matrix with basis vectors as columns (full rank only).
    pub fn basis_matrix(&self) -> Matrix<BigRational> {
        Matrix::from_cols(&self.rational_basis())
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn is_full_rank(&self) -> bool {
        self.basis.len() == self.dim
    }

    pub fn is_integral(&self) -> bool {
        self.scale.is_one()
    }

    fn require_full(&self) -> Result<()> {
        if self.is_full_rank() {
            Ok(())
        } else {
            Err(Error::RankDeficient { rank: self.rank(), dim: self.dim })
        }
    }

    fn check_dim(&self, other: &IntLattice) -> Result<()> {
        if self.dim == other.dim {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected: self.dim, found: other.dim })
        }
    }

    /// Basis at a larger scale `s` (must be a multiple of the current one).
    fn basis_at(&self, s: &BigInt) -> Vec<Vec<BigInt>> {
        let f = s / &self.scale;
        self.basis.iter().map(|b| b.iter().map(|x| x * &f).collect()).collect()
    }

    fn hnf_at(&self, s: &BigInt) -> Hnf {
        Hnf {
            dim: self.dim,
            basis: self.basis_at(s),
            pivots: self.pivots(),
            transform: Vec::new(),
            kernel: Vec::new(),
        }
    }

    /// Integer HNF of the basis at the lattice's own scale.
    pub fn to_hnf(&self) -> Hnf {
        self.hnf_at(&self.scale.clone())
    }

    fn pivots(&self) -> Vec<usize> {
        self.basis.iter().map(|b| b.iter().rposition(|x| !x.is_zero()).unwrap()).collect()
    }

    pub fn contains(&self, x: &[BigRational]) -> bool {
        assert_eq!(x.len(), self.dim);
        let s = lcm_denominators(x.iter()).lcm(&self.scale);
        let sr = rat_int(&s);
        let w: Vec<BigInt> = x.iter().map(|q| (q * &sr).to_integer()).collect();
        self.hnf_at(&s).coords(&w).is_some()
    }

    pub fn contains_int(&self, x: &[BigInt]) -> bool {
        let w: Vec<BigInt> = x.iter().map(|v| v * &self.scale).collect();
        self.hnf_at(&self.scale.clone()).coords(&w).is_some()
    }

    pub fn contains_lattice(&self, sub: &IntLattice) -> bool {
        sub.rational_basis().iter().all(|b| self.contains(b))
    }

    /// Coordinates of a member over the basis.
    pub fn coords(&self, x: &[BigRational]) -> Option<Vec<BigInt>> {
        let sr = rat_int(&self.scale);
        let mut w = Vec::with_capacity(x.len());
        for q in x {
            let v = q * &sr;
            if !v.is_integer() {
                return None;
            }
            w.push(v.to_integer());
        }
        self.hnf_at(&self.scale.clone()).coords(&w)
    }

    /// Canonical representative of x modulo the lattice.
    pub fn reduce(&self, x: &[BigRational]) -> Vec<BigRational> {
        let s = lcm_denominators(x.iter()).lcm(&self.scale);
        let sr = rat_int(&s);
        let w: Vec<BigInt> = x.iter().map(|q| (q * &sr).to_integer()).collect();
        self.hnf_at(&s).reduce(&w).into_iter().map(|v| BigRational::new(v, s.clone())).collect()
    }

    pub fn sum(&self, other: &IntLattice) -> Result<IntLattice> {
        self.check_dim(other)?;
        let s = self.scale.lcm(&other.scale);
        let mut gens = self.basis_at(&s);
        gens.extend(other.basis_at(&s));
        Ok(Self::scaled(self.dim, s, &gens))
    }

    pub fn intersect(&self, other: &IntLattice) -> Result<IntLattice> {
        self.check_dim(other)?;
        let s = self.scale.lcm(&other.scale);
        let g1 = self.basis_at(&s);
        let mut gens = g1.clone();
        gens.extend(other.basis_at(&s));
        let h = Hnf::with_transform(self.dim, &gens);
        let r1 = g1.len();
        let meet: Vec<Vec<BigInt>> = h
            .kernel
            .iter()
            .map(|t| {
                let mut v = vec![BigInt::zero(); self.dim];
                for (ti, g) in t[..r1].iter().zip(&g1) {
                    if ti.is_zero() {
                        continue;
                    }
                    for (a, b) in v.iter_mut().zip(g) {
                        *a += ti * b;
                    }
                }
                v
            })
            .collect();
        Ok(Self::scaled(self.dim, s, &meet))
    }

    /// |det| of the basis divided by scaleⁿ.
    pub fn covolume(&self) -> Result<BigRational> {
        self.require_full()?;
        let d = Matrix::from_cols(&self.basis).det_int().abs();
        Ok(BigRational::new(d, num_traits::pow(self.scale.clone(), self.dim)))
    }

    /// Index [sup : sub].
    pub fn index_in(&self, sup: &IntLattice) -> Result<BigInt> {
        self.check_dim(sup)?;
        self.require_full()?;
        sup.require_full()?;
        if !sup.contains_lattice(self) {
            return Err(Error::NotContained);
        }
        let r = self.covolume()? / sup.covolume()?;
        if !r.is_integer() {
            return Err(Error::invariant("index of contained lattice is not an integer"));
        }
        Ok(r.to_integer())
    }

    /// Dual lattice {x : <x, z> ∈ Z for all z in L}.
    pub fn dual(&self) -> Result<IntLattice> {
        self.require_full()?;
        let inv_t = self.basis_matrix().inverse().ok_or(Error::Singular)?.transpose();
        let gens: Vec<Vec<BigRational>> = (0..self.dim).map(|j| inv_t.col(j)).collect();
        Ok(Self::from_rational(self.dim, &gens))
    }

    /// Image M·L.
    pub fn transform(&self, m: &Matrix<BigRational>) -> IntLattice {
        let gens: Vec<Vec<BigRational>> = self.rational_basis().iter().map(|b| m.mul_vec(b)).collect();
        Self::from_rational(self.dim, &gens)
    }

    /// c·L for a positive integer c.
    pub fn scale_by(&self, c: &BigInt) -> IntLattice {
        let gens: Vec<Vec<BigInt>> = self.basis.iter().map(|b| b.iter().map(|x| x * c).collect()).collect();
        Self::scaled(self.dim, self.scale.clone(), &gens)
    }
}

pub fn unit(dim: usize, i: usize) -> Vec<BigInt> {
    let mut v = vec![BigInt::zero(); dim];
    v[i] = BigInt::one();
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactq::scalar::{int, rat};

    fn iv(v: &[i64]) -> Vec<BigInt> {
        v.iter().map(|&x| int(x)).collect()
    }

    #[test]
    fn hnf_of_index_ten_lattice() {
        let l = IntLattice::hnf(2, &[iv(&[2, 0]), iv(&[1, 5])]);
        assert_eq!(l.int_basis(), &[iv(&[2, 0]), iv(&[1, 5])]);
        assert_eq!(l.index_in(&IntLattice::standard(2)).unwrap(), int(10));
        let other = IntLattice::hnf(2, &[iv(&[1, 5]), iv(&[3, 5]), iv(&[-4, -10]), iv(&[0, 10])]);
        assert_eq!(l, other);
    }

    #[test]
    fn empty_and_identity() {
        assert_eq!(IntLattice::hnf(3, &[]).rank(), 0);
        assert_eq!(IntLattice::hnf(2, &[iv(&[0, 0])]).rank(), 0);
        let z2 = IntLattice::standard(2);
        assert_eq!(z2.int_basis(), &[iv(&[1, 0]), iv(&[0, 1])]);
        assert_eq!(z2.intersect(&z2).unwrap(), z2);
    }

    #[test]
    fn index_and_containment() {
        let sub = IntLattice::hnf(2, &[iv(&[1, 0]), iv(&[0, 3])]);
        let z2 = IntLattice::standard(2);
        assert_eq!(sub.index_in(&z2).unwrap(), int(3));
        assert_eq!(z2.index_in(&sub), Err(Error::NotContained));
    }

    #[test]
    fn dual_of_scaled_lattice() {
        let l = IntLattice::hnf(2, &[iv(&[2, 0]), iv(&[0, 2])]);
        let d = l.dual().unwrap();
        assert_eq!(d.scale(), &int(2));
        assert_eq!(d.int_basis(), &[iv(&[1, 0]), iv(&[0, 1])]);
        for x in d.rational_basis() {
            for z in l.rational_basis() {
                let ip: BigRational = x.iter().zip(&z).map(|(a, b)| a * b).sum();
                assert!(ip.is_integer());
            }
        }
        assert_eq!(d.dual().unwrap(), l);
    }

    #[test]
    fn intersection_of_shifted_lattices() {
        let a = IntLattice::hnf(2, &[iv(&[2, 0]), iv(&[0, 1])]);
        let b = IntLattice::hnf(2, &[iv(&[1, 1]), iv(&[0, 3])]);
        let m = a.intersect(&b).unwrap();
        for x in m.rational_basis() {
            assert!(a.contains(&x) && b.contains(&x));
        }
        assert_eq!(m.index_in(&IntLattice::standard(2)).unwrap(), int(6));
        let half = IntLattice::from_rational(1, &[vec![rat(1, 2)]]);
        let third = IntLattice::from_rational(1, &[vec![rat(1, 3)]]);
        assert_eq!(half.intersect(&third).unwrap(), IntLattice::standard(1));
        assert_eq!(half.sum(&third).unwrap(), IntLattice::from_rational(1, &[vec![rat(1, 6)]]));
    }

    #[test]
    fn solve_with_transform() {
        let gens = vec![iv(&[2, 0, 0]), iv(&[3, 0, 0]), iv(&[0, 4, 6])];
        let h = Hnf::with_transform(3, &gens);
        assert_eq!(h.rank(), 2);
        assert_eq!(h.kernel.len(), 1);
        let w = iv(&[7, 8, 12]);
        let u = h.solve(&w).unwrap();
        let mut back = vec![int(0); 3];
        for (ui, g) in u.iter().zip(&gens) {
            for (a, b) in back.iter_mut().zip(g) {
                *a += ui * b;
            }
        }
        assert_eq!(back, w);
        assert!(h.solve(&iv(&[1, 1, 1])).is_none());
    }

    #[test]
    fn reduce_is_canonical() {
        let l = IntLattice::hnf(2, &[iv(&[2, 0]), iv(&[1, 5])]);
        let x = vec![rat(7, 1), rat(-3, 1)];
        let r = l.reduce(&x);
        let d: Vec<BigRational> = x.iter().zip(&r).map(|(a, b)| a - b).collect();
        assert!(l.contains(&d));
        assert!(r[0] >= rat(0, 1) && r[0] < rat(2, 1) && r[1] >= rat(0, 1) && r[1] < rat(5, 1));
    }
}
