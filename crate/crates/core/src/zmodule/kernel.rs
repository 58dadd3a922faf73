use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exactq::scalar::{lcm_denominators, rat_int};
use crate::exactq::{Hnf, IntLattice};
use crate::RationalMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Side {
    A,
    B,
}

/// G ∩ M·G[M] for M ∈ {A, B}, certified by its index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KernelLattice {
    pub side: Side,
    pub lattice: IntLattice,
    pub index: BigInt,
    /// The K with G ∩ (MG + … + M^K G) = G ∩ M·G[M].
    pub stabilization_depth: usize,
}

pub const DEFAULT_CAP: usize = 64;

/// Iterate N_k = G ∩ (MG + … + M^k G) until [G : N_k] equals `target`.
pub fn stabilize(g: &IntLattice, m: &RationalMatrix, target: &BigInt, cap: usize) -> Result<(IntLattice, usize)> {
    let mg = g.transform(m);
    let mut s = mg.clone();
    let mut last = None;
    for k in 1..=cap {
        let nk = g.intersect(&s)?;
        let idx = nk.index_in(g)?;
        if &idx == target {
            return Ok((nk, k));
        }
        if &idx < target {
            return Err(Error::invariant(format!("kernel index {idx} dropped below the certified count {target}")));
        }
        last = Some(idx);
        s = mg.sum(&s.transform(m))?;
    }
    Err(Error::StabilizationCap {
        target: target.to_string(),
        cap,
        last: last.map_or("-".into(), |x| x.to_string()),
    })
}

/// Same chain, stopped once the index has not changed for `patience` steps.
/// Uses no knowledge of the quotient counts.
pub fn stabilize_by_plateau(g: &IntLattice, m: &RationalMatrix, patience: usize, cap: usize) -> Result<(IntLattice, BigInt)> {
    let mg = g.transform(m);
    let mut s = mg.clone();
    let mut best: Option<(IntLattice, BigInt)> = None;
    let mut still = 0;
    for _ in 0..cap {
        let nk = g.intersect(&s)?;
        let idx = nk.index_in(g)?;
        match &best {
            Some((_, b)) if *b == idx => still += 1,
            _ => still = 0,
        }
        best = Some((nk, idx));
        if still >= patience {
            return Ok(best.unwrap());
        }
        s = mg.sum(&s.transform(m))?;
    }
    Err(Error::StabilizationCap {
        target: "plateau".into(),
        cap,
        last: best.map_or("-".into(), |(_, i)| i.to_string()),
    })
}

/// P_J = G + MG + … + M^J G.
pub fn power_span(g: &IntLattice, m: &RationalMatrix, j: usize) -> Result<IntLattice> {
    let mut acc = g.clone();
    let mut cur = g.clone();
    for _ in 0..j {
        cur = cur.transform(m);
        acc = acc.sum(&cur)?;
    }
    Ok(acc)
}

/// Λ_J = P_J(M) ∩ P_J(N) for growing J, stopped once unchanged for `patience` steps.
/// Returns the limit and the first J where it was reached.
pub fn meet_chain(g: &IntLattice, m: &RationalMatrix, n: &RationalMatrix, patience: usize, cap: usize) -> Result<(IntLattice, usize)> {
    let (mut pm, mut pn) = (g.clone(), g.clone());
    let (mut cm, mut cn) = (g.clone(), g.clone());
    let mut best: Option<(IntLattice, usize)> = None;
    let mut still = 0;
    for j in 0..cap {
        let meet = pm.intersect(&pn)?;
        match &best {
            Some((b, _)) if b.contains_lattice(&meet) && meet.contains_lattice(b) => still += 1,
            _ => {
                still = 0;
                best = Some((meet, j));
            }
        }
        if still >= patience {
            return Ok(best.unwrap());
        }
        cm = cm.transform(m);
        cn = cn.transform(n);
        pm = pm.sum(&cm)?;
        pn = pn.sum(&cn)?;
    }
    Err(Error::StabilizationCap { target: "meet plateau".into(), cap, last: best.map_or("-".into(), |(_, j)| j.to_string()) })
}

/// Solver for w = Σ_{i=lo}^{hi} M^i u_i with u_i in a base lattice G (default Zⁿ), over the
/// stacked matrix [M^lo G | … | M^hi G].
#[derive(Clone, Debug)]
pub struct StackedSolver {
    dim: usize,
    lo: usize,
    hi: usize,
    scale: BigInt,
    hnf: Hnf,
    /// Integer basis of G, or None for Zⁿ.
    base: Option<Vec<Vec<BigInt>>>,
}

impl StackedSolver {
    pub fn new(m: &RationalMatrix, lo: usize, hi: usize) -> Self {
        Self::build(m, lo, hi, None)
    }

    /// Coefficients u_i restricted to an integral base lattice G.
    pub fn on_lattice(m: &RationalMatrix, lo: usize, hi: usize, g: &IntLattice) -> Self {
        assert!(g.is_integral() && g.is_full_rank(), "base lattice must be integral and full rank");
        Self::build(m, lo, hi, Some(g.int_basis().to_vec()))
    }

    fn build(m: &RationalMatrix, lo: usize, hi: usize, base: Option<Vec<Vec<BigInt>>>) -> Self {
        let n = m.rows();
        let basis: Vec<Vec<BigRational>> = match &base {
            Some(b) => b.iter().map(|v| v.iter().map(rat_int).collect()).collect(),
            None => (0..n).map(|l| (0..n).map(|r| BigRational::from_integer(BigInt::from((r == l) as i64))).collect()).collect(),
        };
        let mut images: Vec<Vec<Vec<BigRational>>> = Vec::new();
        let mut cur: Vec<Vec<BigRational>> = basis.iter().map(|g| m.pow(lo as u32).mul_vec(g)).collect();
        for _ in lo..=hi {
            images.push(cur.clone());
            cur = cur.iter().map(|v| m.mul_vec(v)).collect();
        }
        let scale = lcm_denominators(images.iter().flatten().flatten());
        let sr = rat_int(&scale);
        let gens: Vec<Vec<BigInt>> =
            images.iter().flatten().map(|v| v.iter().map(|x| (x * &sr).to_integer()).collect()).collect();
        StackedSolver { dim: n, lo, hi, scale, hnf: Hnf::with_transform(n, &gens), base }
    }

    pub fn lo(&self) -> usize {
        self.lo
    }

    pub fn hi(&self) -> usize {
        self.hi
    }

    fn unpack(&self, c: Vec<BigInt>) -> Vec<Vec<BigInt>> {
        let chunks = c.chunks(self.dim);
        match &self.base {
            None => chunks.map(|x| x.to_vec()).collect(),
            Some(g) => chunks
                .map(|x| {
                    let mut u = vec![BigInt::zero(); self.dim];
                    for (cl, gl) in x.iter().zip(g) {
                        if cl.is_zero() {
                            continue;
                        }
                        for (a, b) in u.iter_mut().zip(gl) {
                            *a += cl * b;
                        }
                    }
                    u
                })
                .collect(),
        }
    }

    /// Coefficient vectors (u_lo, …, u_hi), or None when w is outside the span.
    pub fn solve(&self, w: &[BigInt]) -> Option<Vec<Vec<BigInt>>> {
        if w.iter().all(|x| x.is_zero()) {
            return Some(vec![vec![BigInt::zero(); self.dim]; self.hi - self.lo + 1]);
        }
        let sw: Vec<BigInt> = w.iter().map(|x| x * &self.scale).collect();
        Some(self.unpack(self.hnf.solve(&sw)?))
    }

    pub fn solve_rational(&self, w: &[BigRational]) -> Option<Vec<Vec<BigInt>>> {
        let sr = rat_int(&self.scale);
        let mut sw = Vec::with_capacity(w.len());
        for x in w {
            let v = x * &sr;
            if !v.is_integer() {
                return None;
            }
            sw.push(v.to_integer());
        }
        Some(self.unpack(self.hnf.solve(&sw)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactq::scalar::{int, rat};
    use crate::exactq::Matrix;

    fn example() -> RationalMatrix {
        Matrix::from_rows(vec![vec![rat(2, 1), rat(1, 1)], vec![rat(0, 1), rat(5, 3)]])
    }

    #[test]
    fn example_kernels() {
        let a = example();
        let b = a.inverse().unwrap();
        let z2 = IntLattice::standard(2);
        let (nb, kb) = stabilize(&z2, &b, &int(3), DEFAULT_CAP).unwrap();
        assert_eq!(nb, IntLattice::hnf(2, &[vec![int(1), int(0)], vec![int(0), int(3)]]));
        assert_eq!(kb, 1);
        let (na, _) = stabilize(&z2, &a, &int(10), DEFAULT_CAP).unwrap();
        assert_eq!(na, IntLattice::hnf(2, &[vec![int(2), int(0)], vec![int(1), int(5)]]));
        let (np, ip) = stabilize_by_plateau(&z2, &a, 4, DEFAULT_CAP).unwrap();
        assert_eq!((np, ip), (na, int(10)));
    }

    #[test]
    fn one_dimensional_kernels() {
        let a = Matrix::from_rows(vec![vec![rat(3, 2)]]);
        let b = a.inverse().unwrap();
        let z = IntLattice::standard(1);
        assert_eq!(stabilize(&z, &b, &int(2), 64).unwrap().0, IntLattice::hnf(1, &[vec![int(2)]]));
        assert_eq!(stabilize(&z, &a, &int(3), 64).unwrap().0, IntLattice::hnf(1, &[vec![int(3)]]));
        assert!(matches!(stabilize(&z, &a, &int(1), 8), Err(Error::StabilizationCap { .. })));
        assert!(matches!(stabilize(&z, &a, &int(9), 8), Err(Error::Invariant(_))));
    }

    #[test]
    fn stacked_solver_reconstructs() {
        let a = example();
        let b = a.inverse().unwrap();
        let s = StackedSolver::new(&b, 1, 2);
        let w = vec![int(7), int(-6)];
        let u = s.solve(&w).unwrap();
        let back: Vec<_> = b.mul_vec(&u[0].iter().map(rat_int).collect::<Vec<_>>())
            .iter()
            .zip(b.pow(2).mul_vec(&u[1].iter().map(rat_int).collect::<Vec<_>>()))
            .map(|(x, y)| x + y)
            .collect();
        assert_eq!(back, vec![rat(7, 1), rat(-6, 1)]);
        assert!(s.solve(&[int(0), int(1)]).is_none());
    }
}
