use std::collections::HashMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use super::kernel::{KernelLattice, Side};
use crate::error::{Error, Result};
use crate::exactq::{snf, Hnf, IntLattice, Matrix};

/// Transversal of sup/sub for full-rank lattices sub ⊆ sup, in canonical reduced form.
pub fn quotient_representatives(sup: &IntLattice, sub: &IntLattice, cap: usize) -> Result<Vec<Vec<BigRational>>> {
    let idx = sub.index_in(sup)?;
    if idx > BigInt::from(cap) {
        return Err(Error::CapExceeded { size: idx.to_string(), cap });
    }
    let n = sup.dim();
    let coords: Vec<Vec<BigInt>> = sub
        .rational_basis()
        .iter()
        .map(|v| sup.coords(v).ok_or_else(|| Error::invariant("sublattice generator outside superlattice")))
        .collect::<Result<_>>()?;
    let c = Matrix::from_cols(&coords);
    let smith = snf(&c);
    let d = smith.diagonal();
    let uinv = Matrix::<BigRational>::from_int(&smith.u).inverse().ok_or(Error::Singular)?;
    let sup_basis = sup.basis_matrix();
    let sizes: Vec<usize> = d.iter().map(|x| x.to_usize().unwrap()).collect();
    let mut out = Vec::with_capacity(idx.to_usize().unwrap());
    let mut digit = vec![0usize; n];
    loop {
        let cvec: Vec<BigRational> = digit.iter().map(|&x| BigRational::from_integer(BigInt::from(x))).collect();
        let gcoord = uinv.mul_vec(&cvec);
        let x = sup_basis.mul_vec(&gcoord);
        out.push(sub.reduce(&x));
        let mut i = 0;
        while i < n {
            digit[i] += 1;
            if digit[i] < sizes[i] {
                break;
            }
            digit[i] = 0;
            i += 1;
        }
        if i == n {
            break;
        }
    }
    out.sort();
    Ok(out)
}

/// Complete residue system of Zⁿ (or a base lattice G) modulo a kernel lattice.
#[derive(Clone, Debug)]
pub struct ResidueSystem {
    pub side: Side,
    pub representatives: Vec<Vec<BigInt>>,
    pub kernel: KernelLattice,
    classes: HashMap<Vec<BigInt>, usize>,
    hnf: Hnf,
    /// Power k when built for A^k (full-rank power trick), otherwise 1.
    pub power: usize,
}

impl ResidueSystem {
    pub fn new(kernel: KernelLattice, sup: &IntLattice) -> Result<Self> {
        let reps = quotient_representatives(sup, &kernel.lattice, usize::MAX)?;
        let ints = reps
            .iter()
            .map(|r| r.iter().map(|q| if q.is_integer() { Ok(q.to_integer()) } else { Err(Error::invariant("non-integral residue")) }).collect())
            .collect::<Result<Vec<Vec<BigInt>>>>()?;
        Self::from_representatives(kernel, ints)
    }

    /// Wrap explicit representatives; they must be pairwise incongruent and complete.
    pub fn from_representatives(kernel: KernelLattice, reps: Vec<Vec<BigInt>>) -> Result<Self> {
        if !kernel.lattice.is_integral() {
            return Err(Error::invariant("kernel lattice must be integral"));
        }
        let hnf = kernel.lattice.to_hnf();
        let mut classes = HashMap::with_capacity(reps.len());
        for (i, r) in reps.iter().enumerate() {
            if classes.insert(hnf.reduce(r), i).is_some() {
                return Err(Error::invariant("congruent residue representatives"));
            }
        }
        if BigInt::from(reps.len()) != kernel.index {
            return Err(Error::invariant("residue count differs from kernel index"));
        }
        if !reps.iter().any(|r| r.iter().all(|x| x.is_zero())) {
            return Err(Error::invariant("residue system must contain 0"));
        }
        Ok(ResidueSystem { side: kernel.side, representatives: reps, kernel, classes, hnf, power: 1 })
    }

    pub fn len(&self) -> usize {
        self.representatives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.representatives.is_empty()
    }

    pub fn zero_index(&self) -> usize {
        self.representatives.iter().position(|r| r.iter().all(|x| x.is_zero())).unwrap()
    }

    /// Index of the representative congruent to v.
    pub fn class_of(&self, v: &[BigInt]) -> usize {
        *self.classes.get(&self.hnf.reduce(v)).expect("residue system is complete")
    }

    /// Reduce v modulo the kernel lattice (canonical key of its class).
    pub fn reduce(&self, v: &[BigInt]) -> Vec<BigInt> {
        self.hnf.reduce(v)
    }

    /// Class of v when v lies in the base lattice covered by this system.
    pub fn try_class_of(&self, v: &[BigInt]) -> Option<usize> {
        self.classes.get(&self.hnf.reduce(v)).copied()
    }

    pub fn congruent(&self, x: &[BigInt], y: &[BigInt]) -> bool {
        let d: Vec<BigInt> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        self.hnf.coords(&d).is_some()
    }
}
