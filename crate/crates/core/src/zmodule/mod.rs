//! Elements of Zⁿ(A), kernel lattices, residue systems and digit systems.

pub mod digits;
pub mod element;
pub mod kernel;
pub mod residues;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

pub use digits::{DigitSystem, Expansion, ExpansionStatus, Exploration, Policy};
pub use element::{IntLiteral, ModuleElement};
pub use kernel::{meet_chain, power_span, stabilize, stabilize_by_plateau, KernelLattice, Side, StackedSolver, DEFAULT_CAP};
pub use residues::{quotient_representatives, ResidueSystem};

use crate::error::{Error, Result};
use crate::exactq::scalar::{format_rational, rat_int};
use crate::exactq::{is_expanding, IntLattice, Matrix};
use crate::frobenius::{invariant_factors, quotient_counts, InvariantFactorization, QuotientCounts};
use crate::RationalMatrix;

/// An expanding matrix A together with everything derived from it once.
#[derive(Clone, Debug)]
pub struct Base {
    pub n: usize,
    pub a: RationalMatrix,
    pub b: RationalMatrix,
    pub det: BigRational,
    /// Least common multiple of the denominators of A.
    pub m: BigInt,
    pub factors: InvariantFactorization,
    pub counts: QuotientCounts,
    pub kernel_a: KernelLattice,
    pub kernel_b: KernelLattice,
    pub residues_a: ResidueSystem,
    pub residues_b: ResidueSystem,
    /// w = Σ_{i=1}^{K_A} A^i u_i for w in the A-side kernel.
    pub solver_a: StackedSolver,
    /// w = Σ_{i=1}^{K_B} B^i u_i for w in the B-side kernel.
    pub solver_b: StackedSolver,
}

impl Base {
    pub fn new(a: RationalMatrix) -> Result<Self> {
        Self::with_cap(a, DEFAULT_CAP)
    }

    pub fn with_cap(a: RationalMatrix, cap: usize) -> Result<Self> {
        if !a.is_square() || a.rows() == 0 {
            return Err(Error::DimensionMismatch { expected: a.rows(), found: a.cols() });
        }
        if !is_expanding(&a)? {
            return Err(Error::NotExpanding);
        }
        let n = a.rows();
        let b = a.inverse().ok_or(Error::Singular)?;
        let counts = quotient_counts(&a)?;
        let factors = invariant_factors(&a);
        let zn = IntLattice::standard(n);
        let kernel_a = kernel_lattice_in(&zn, &a, Side::A, &counts.a, cap)?;
        let kernel_b = kernel_lattice_in(&zn, &b, Side::B, &counts.b, cap)?;
        let residues_a = ResidueSystem::new(kernel_a.clone(), &zn)?;
        let residues_b = ResidueSystem::new(kernel_b.clone(), &zn)?;
        let solver_a = StackedSolver::new(&a, 1, kernel_a.stabilization_depth);
        let solver_b = StackedSolver::new(&b, 1, kernel_b.stabilization_depth);
        Ok(Base {
            n,
            m: a.denominator_lcm(),
            det: a.det(),
            a,
            b,
            factors,
            counts,
            kernel_a,
            kernel_b,
            residues_a,
            residues_b,
            solver_a,
            solver_b,
        })
    }

    pub fn kernel(&self, side: Side) -> &KernelLattice {
        match side {
            Side::A => &self.kernel_a,
            Side::B => &self.kernel_b,
        }
    }

    pub fn residues(&self, side: Side) -> &ResidueSystem {
        match side {
            Side::A => &self.residues_a,
            Side::B => &self.residues_b,
        }
    }

    /// b = 1: the solenoid factor is trivial.
    pub fn is_degenerate(&self) -> bool {
        self.counts.b.is_one()
    }

    pub fn require_solenoid(&self) -> Result<()> {
        if self.is_degenerate() {
            Err(Error::DegenerateSolenoid)
        } else {
            Ok(())
        }
    }

    pub fn value(&self, x: &ModuleElement) -> Vec<BigRational> {
        x.value(&self.a, &self.b)
    }

    /// Polynomial representation Σ_{j=0}^{J} A^j z_j of a vector of Zⁿ[A] with minimal J.
    pub fn to_module_element(&self, v: &[BigRational], max_exp: usize) -> Result<ModuleElement> {
        if v.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: v.len() });
        }
        if v.iter().all(|x| x.is_integer()) {
            return Ok(ModuleElement::from_vector(v.iter().map(|x| x.to_integer()).collect()));
        }
        for j in 1..=max_exp {
            let s = StackedSolver::new(&self.a, 0, j);
            if let Some(u) = s.solve_rational(v) {
                return Ok(ModuleElement::from_terms(self.n, u.into_iter().enumerate().map(|(i, z)| (i as i64, z))));
            }
        }
        let shown: Vec<String> = v.iter().map(format_rational).collect();
        Err(Error::NotInModule(format!("({}) needs exponents beyond {max_exp}", shown.join(", "))))
    }

    /// Rewrite x with nonnegative exponents only (x must lie in Zⁿ[A]).
    pub fn polynomial_form(&self, x: &ModuleElement) -> Result<ModuleElement> {
        if x.is_polynomial() {
            return Ok(x.clone());
        }
        self.to_module_element(&self.value(x), DEFAULT_CAP)
    }

    /// x ∈ A·Zⁿ[A] for x in polynomial form: the exponent-0 coefficient lies in the A-side kernel.
    pub fn in_a_image(&self, x: &ModuleElement) -> bool {
        debug_assert!(x.is_polynomial());
        self.residues_a.congruent(&x.coeff(0), &vec![BigInt::zero(); self.n])
    }

    /// B·x for x ∈ A·Zⁿ[A] in polynomial form.
    pub fn divide_by_a(&self, x: &ModuleElement) -> Option<ModuleElement> {
        let z0 = x.coeff(0);
        let u = self.solver_a.solve(&z0)?;
        let mut out = ModuleElement::zero(self.n);
        for (j, z) in x.terms() {
            if *j != 0 {
                out.add_term(j - 1, z);
            }
        }
        for (i, ui) in u.iter().enumerate() {
            out.add_term(i as i64, ui);
        }
        Some(out)
    }
}

fn kernel_lattice_in(g: &IntLattice, m: &RationalMatrix, side: Side, target: &BigInt, cap: usize) -> Result<KernelLattice> {
    let (lattice, depth) = stabilize(g, m, target, cap)?;
    Ok(KernelLattice { side, lattice, index: target.clone(), stabilization_depth: depth })
}

/// Kernel lattice Zⁿ ∩ A Zⁿ[A] or Zⁿ ∩ B Zⁿ[B] of an expanding matrix.
pub fn kernel_lattice(a: &RationalMatrix, side: Side) -> Result<KernelLattice> {
    Ok(Base::new(a.clone())?.kernel(side).clone())
}

pub fn residues(a: &RationalMatrix, side: Side) -> Result<ResidueSystem> {
    Ok(Base::new(a.clone())?.residues(side).clone())
}

/// B-side residue system containing 0 and n linearly independent vectors.
///
/// When b < n + 1 the construction runs on the smallest power A^k with b(A^k) ≥ n + 1
/// and the returned system records that power.
pub fn full_rank_residues(base: &Base, shift_bound: usize) -> Result<ResidueSystem> {
    let n = base.n;
    let need = BigInt::from(n as u64 + 1);
    if base.counts.b >= need {
        return adjusted_residues(base, shift_bound);
    }
    if base.is_degenerate() {
        return Err(Error::DegenerateSolenoid);
    }
    for k in 2..=64u32 {
        let pb = Base::new(base.a.pow(k))?;
        if pb.counts.b >= need {
            let mut r = adjusted_residues(&pb, shift_bound)?;
            r.power = k as usize;
            return Ok(r);
        }
    }
    Err(Error::NoAdmissibleShift(shift_bound))
}

fn adjusted_residues(base: &Base, shift_bound: usize) -> Result<ResidueSystem> {
    let n = base.n;
    let e = &base.residues_b;
    let mut reps: Vec<Vec<BigInt>> = e.representatives.iter().map(|r| r.iter().map(|x| -x).collect()).collect();
    let chosen: Vec<usize> = (0..reps.len()).filter(|&i| reps[i].iter().any(|x| !x.is_zero())).take(n).collect();
    let mb = base.b.denominator_lcm();
    for s in 1..=shift_bound {
        let t = &mb * BigInt::from(s);
        let tb = base.b.scale(&rat_int(&t));
        let cols: Vec<Vec<BigRational>> = chosen
            .iter()
            .enumerate()
            .map(|(j, &i)| (0..n).map(|r| &tb[(r, j)] + rat_int(&reps[i][r])).collect())
            .collect();
        if Matrix::from_cols(&cols).det().is_zero() {
            continue;
        }
        for (col, &i) in cols.iter().zip(&chosen) {
            reps[i] = col.iter().map(|q| q.to_integer()).collect();
        }
        reps.sort_by(|x, y| {
            let zx = x.iter().all(|v| v.is_zero());
            let zy = y.iter().all(|v| v.is_zero());
            zy.cmp(&zx).then_with(|| x.cmp(y))
        });
        return ResidueSystem::from_representatives(e.kernel.clone(), reps);
    }
    Err(Error::NoAdmissibleShift(shift_bound))
}

/// Zⁿ[A] ∩ Zⁿ[B] and the exponent bound J with Λ ⊆ P_J(A) ∩ P_J(B).
pub fn ring_meet(base: &Base) -> Result<(IntLattice, usize)> {
    meet_chain(&IntLattice::standard(base.n), &base.a, &base.b, base.n + 1, DEFAULT_CAP)
}

/// Integer vectors of `reps` contain n linearly independent ones.
pub fn spans_full_rank(reps: &[Vec<BigInt>], n: usize) -> bool {
    let rows: Vec<Vec<BigRational>> = reps.iter().map(|r| r.iter().map(rat_int).collect()).collect();
    !rows.is_empty() && Matrix::from_rows(rows).rank() == n
}
