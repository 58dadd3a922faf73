//! Dual lattices, the B*-adic index space and characters χ_s(y) = exp(2πi S_s(y)) of Zⁿ((B)).
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::badic::{BAdicContext, TruncatedBAdic};
use crate::error::{Error, Result};
use crate::exactq::IntLattice;
use crate::space::PointKA;
use crate::zmodule::{meet_chain, power_span, ring_meet, stabilize, Base, KernelLattice, ResidueSystem, Side, StackedSolver, DEFAULT_CAP};

/// Λ ⊇ Zⁿ[A] ∩ Zⁿ[B], its dual, Γ = N·Λ* and the B*-adic digits E* ⊂ Γ.
#[derive(Debug)]
pub struct DualContext {
    pub lambda: IntLattice,
    pub lambda_star: IntLattice,
    pub gamma: IntLattice,
    /// N with Γ = N·Λ*.
    pub gamma_factor: BigInt,
    pub e_star: ResidueSystem,
    /// B-adic context of y.
    pub primal: Arc<BAdicContext>,
    /// B*-adic context of s over Γ.
    pub dual: Arc<BAdicContext>,
}

/// An index s ∈ Γ((B*)) of a character.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CharacterIndex {
    pub s: TruncatedBAdic,
}

impl CharacterIndex {
    pub fn new(dual: &DualContext, s: TruncatedBAdic) -> Result<Self> {
        if !s.context().same(&dual.dual) {
            return Err(Error::ContextMismatch);
        }
        Ok(CharacterIndex { s })
    }

    /// Digit indices into E* starting at position ν*.
    pub fn from_digits(dual: &DualContext, low: i64, digits: &[u32]) -> Result<Self> {
        Ok(CharacterIndex { s: TruncatedBAdic::from_digits(&dual.dual, low, digits, true)? })
    }

    pub fn zero(dual: &DualContext) -> Self {
        CharacterIndex { s: TruncatedBAdic::zero(&dual.dual, 0) }
    }
}

pub fn build_dual_context(base: &Base) -> Result<DualContext> {
    base.require_solenoid()?;
    let n = base.n;
    let zn = IntLattice::standard(n);
    let (lambda, j) = ring_meet(base)?;
    if !lambda.contains_lattice(&zn)
        || !power_span(&zn, &base.a, j)?.contains_lattice(&lambda)
        || !power_span(&zn, &base.b, j)?.contains_lattice(&lambda)
    {
        return Err(Error::invariant("Λ fails the generator containment check"));
    }
    let lambda_star = lambda.dual()?;
    let (at, bt) = (base.a.transpose(), base.b.transpose());
    let (meet_star, _) = meet_chain(&lambda_star, &at, &bt, n + 1, DEFAULT_CAP)?;
    let factor = lambda_star.index_in(&meet_star)?;
    let gamma = lambda_star.scale_by(&factor);
    let (meet_gamma, _) = meet_chain(&gamma, &at, &bt, n + 1, DEFAULT_CAP)?;
    if !lambda_star.contains_lattice(&meet_gamma) || !zn.contains_lattice(&gamma) {
        return Err(Error::invariant("Γ[A*] ∩ Γ[B*] is not inside Λ*"));
    }
    let target = base.counts.b.clone();
    let (kernel, depth) = stabilize(&gamma, &bt, &target, DEFAULT_CAP)?;
    let kernel = KernelLattice { side: Side::B, lattice: kernel, index: target, stabilization_depth: depth };
    let e_star = ResidueSystem::new(kernel, &gamma)?;
    let solver = StackedSolver::on_lattice(&bt, 1, depth, &gamma);
    let dual = BAdicContext::new(bt, gamma.clone(), e_star.clone(), solver)?;
    Ok(DualContext { lambda, lambda_star, gamma, gamma_factor: factor, e_star, primal: BAdicContext::from_base(base), dual })
}

/// Lower bound for the valuation: ν itself, or the depth of a zero marker.
fn valuation_bound(x: &TruncatedBAdic) -> i64 {
    x.valuation().unwrap_or(x.depth())
}

fn dot(v: &[BigRational], w: &[BigInt]) -> BigRational {
    v.iter().zip(w).fold(BigRational::zero(), |acc, (x, y)| acc + x * BigRational::from_integer(y.clone()))
}

/// Σ_j ⟨{M^j x}_M, w_j⟩ over the digits w_j of `weights`.
fn pairing(x: &TruncatedBAdic, weights: &TruncatedBAdic) -> Result<BigRational> {
    if x.is_zero() || weights.is_zero() {
        return Ok(BigRational::zero());
    }
    let (nx, nw) = (valuation_bound(x), valuation_bound(weights));
    if !x.is_finite() && x.depth() < -nw {
        return Err(Error::InsufficientDepth { needed: -nw, have: x.depth() });
    }
    if !weights.is_finite() && weights.depth() < -nx {
        return Err(Error::InsufficientDepth { needed: -nx, have: weights.depth() });
    }
    let ctx = x.context();
    let mut total = BigRational::zero();
    for (j, w) in weights.coeffs() {
        if j > -1 - nx {
            break;
        }
        let frac = ctx.evaluate(&x.shift(j).frac_coeffs());
        total += dot(&frac, &w);
    }
    Ok(total)
}

fn check(dual: &DualContext, s: &CharacterIndex, y: &TruncatedBAdic) -> Result<()> {
    if !y.context().same(&dual.primal) || !s.s.context().same(&dual.dual) {
        return Err(Error::ContextMismatch);
    }
    Ok(())
}

/// S_s(y) = Σ_j ⟨{B^j y}_B, s_j⟩, exact and not reduced.
pub fn phase(dual: &DualContext, s: &CharacterIndex, y: &TruncatedBAdic) -> Result<BigRational> {
    check(dual, s, y)?;
    pairing(y, &s.s)
}

/// Σ_k ⟨y_k, {B*^k s}*_B⟩, the same number summed over the digits of y.
pub fn phase_dual_form(dual: &DualContext, s: &CharacterIndex, y: &TruncatedBAdic) -> Result<BigRational> {
    check(dual, s, y)?;
    pairing(&s.s, y)
}

pub fn mod_one(q: &BigRational) -> BigRational {
    q - BigRational::from_integer(q.floor().to_integer())
}

/// S_s(y) mod 1.
#[allow(non_snake_case)]
pub fn S(dual: &DualContext, s: &CharacterIndex, y: &TruncatedBAdic) -> Result<BigRational> {
    Ok(mod_one(&phase(dual, s, y)?))
}

#[allow(non_snake_case)]
pub fn S_dual_form(dual: &DualContext, s: &CharacterIndex, y: &TruncatedBAdic) -> Result<BigRational> {
    Ok(mod_one(&phase_dual_form(dual, s, y)?))
}

/// S(s,y) + S(s,y′) − S(s,y+y′), which must be an integer.
pub fn multiplicativity_check(dual: &DualContext, s: &CharacterIndex, y: &TruncatedBAdic, y2: &TruncatedBAdic) -> Result<BigInt> {
    let sum = y.add(y2)?;
    let defect = phase(dual, s, y)? + phase(dual, s, y2)? - phase(dual, s, &sum)?;
    if !defect.is_integer() {
        return Err(Error::invariant(format!("multiplicativity defect {defect} is not an integer")));
    }
    Ok(defect.to_integer())
}

/// χ_{r,s}(x, y) as a fraction of a turn: ⟨x, r⟩ + S_s(y) mod 1.
pub fn torus_character(dual: &DualContext, r: &[BigRational], s: &CharacterIndex, p: &PointKA) -> Result<BigRational> {
    if r.len() != p.real.len() {
        return Err(Error::DimensionMismatch { expected: p.real.len(), found: r.len() });
    }
    let real = p.real.iter().zip(r).fold(BigRational::zero(), |acc, (x, y)| acc + x * y);
    Ok(mod_one(&(real + phase(dual, s, &p.badic)?)))
}

/// "p/q turns" for a reduced phase in [0, 1).
pub fn format_turns(q: &BigRational) -> String {
    let q = mod_one(q);
    let den = if q.is_zero() { BigInt::one() } else { q.denom().clone() };
    format!("{}/{} turns", q.numer(), den)
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::exactq::scalar::{rat, rat_int};
    use crate::exactq::Matrix;
    use crate::zmodule::ModuleElement;
    use crate::RationalMatrix;

    fn one_dim() -> Base {
        Base::new(Matrix::from_rows(vec![vec![rat(3, 2)]])).unwrap()
    }

    fn two_dim() -> Base {
        Base::new(Matrix::from_rows(vec![vec![rat(2, 1), rat(1, 1)], vec![rat(0, 1), rat(5, 3)]])).unwrap()
    }

    /// Σ_{j,k: j+k<0} ⟨B^{j+k} y_k, s_j⟩ straight from the digit vectors.
    fn naive(b: &RationalMatrix, s: &TruncatedBAdic, y: &TruncatedBAdic) -> BigRational {
        let mut total = BigRational::zero();
        for (j, sj) in s.coeffs() {
            for (k, yk) in y.coeffs() {
                let e = j + k;
                if e >= 0 {
                    continue;
                }
                let v = b.inverse().unwrap().pow((-e) as u32).mul_vec(&yk.iter().map(rat_int).collect::<Vec<_>>());
                total += dot(&v, &sj);
            }
        }
        total
    }

    #[test]
    fn one_dimensional_context() {
        let dc = build_dual_context(&one_dim()).unwrap();
        let z = IntLattice::standard(1);
        for l in [&dc.lambda, &dc.lambda_star, &dc.gamma] {
            assert!(l.contains_lattice(&z) && z.contains_lattice(l));
        }
        let mut reps: Vec<_> = dc.e_star.representatives.clone();
        reps.sort();
        assert_eq!(reps, vec![vec![BigInt::from(0)], vec![BigInt::from(1)]]);
        for x in [rat(1, 2), rat(1, 3), rat(5, 6), rat(9, 4), rat(7, 1), rat(-3, 1)] {
            let smooth = |p: i64| {
                let mut d = x.denom().clone();
                while (&d % p).is_zero() {
                    d /= p;
                }
                d.is_one()
            };
            assert_eq!(dc.lambda.contains(&[x.clone()]), smooth(2) && smooth(3) && x.is_integer());
        }
    }

    #[test]
    fn two_dimensional_context() {
        let base = two_dim();
        let dc = build_dual_context(&base).unwrap();
        assert_eq!(dc.e_star.len(), 3);
        assert!(dc.lambda.contains_lattice(&IntLattice::standard(2)));
        let (at, bt) = (base.a.transpose(), base.b.transpose());
        for g in dc.gamma.rational_basis() {
            for l in dc.lambda.rational_basis() {
                let p: BigRational = g.iter().zip(&l).map(|(x, y)| x * y).sum();
                assert!(p.is_integer());
            }
        }
        for j in 0..6 {
            let meet = power_span(&dc.gamma, &at, j).unwrap().intersect(&power_span(&dc.gamma, &bt, j).unwrap()).unwrap();
            assert!(dc.lambda_star.contains_lattice(&meet));
        }
    }

    #[test]
    fn degenerate_rejected() {
        let base = Base::new(Matrix::from_rows(vec![vec![rat(2, 1), rat(1, 2)], vec![rat(0, 1), rat(3, 1)]])).unwrap();
        assert_eq!(build_dual_context(&base).unwrap_err(), Error::DegenerateSolenoid);
    }

    #[test]
    fn worked_value() {
        let dc = build_dual_context(&one_dim()).unwrap();
        let one = dc.e_star.representatives.iter().position(|r| r[0] == BigInt::from(1)).unwrap() as u32;
        let s = CharacterIndex::from_digits(&dc, -1, &[one]).unwrap();
        let y = TruncatedBAdic::normalize(&dc.primal, &ModuleElement::from_terms(1, [(1, vec![BigInt::from(1)])]), 8);
        assert_eq!(y.valuation(), Some(-1));
        assert_eq!(phase(&dc, &s, &y).unwrap(), rat(9, 4));
        assert_eq!(phase_dual_form(&dc, &s, &y).unwrap(), rat(9, 4));
        assert_eq!(format_turns(&S(&dc, &s, &y).unwrap()), "1/4 turns");
        assert_eq!(format_turns(&S(&dc, &CharacterIndex::zero(&dc), &y).unwrap()), "0/1 turns");
    }

    #[test]
    fn trivial_cases() {
        let dc = build_dual_context(&two_dim()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let sd: Vec<u32> = (0..5).map(|_| rng.gen_range(0..3)).collect();
            let yd: Vec<u32> = (0..5).map(|_| rng.gen_range(0..3)).collect();
            let s = CharacterIndex::from_digits(&dc, rng.gen_range(0..3), &sd).unwrap();
            let y = TruncatedBAdic::from_digits(&dc.primal, rng.gen_range(0..3), &yd, false).unwrap();
            assert!(phase(&dc, &s, &y).unwrap().is_zero());
            let zero = TruncatedBAdic::zero(&dc.primal, 0);
            assert!(phase_dual_form(&dc, &s, &zero).unwrap().is_zero());
        }
    }

    #[test]
    fn insufficient_depth_is_reported() {
        let dc = build_dual_context(&one_dim()).unwrap();
        let s = CharacterIndex::from_digits(&dc, -3, &[1]).unwrap();
        let y = TruncatedBAdic::from_digits(&dc.primal, -1, &[1, 1], false).unwrap();
        assert_eq!(phase(&dc, &s, &y).unwrap_err(), Error::InsufficientDepth { needed: 3, have: 1 });
        let y = TruncatedBAdic::from_digits(&dc.primal, -1, &[1, 1, 0, 1], false).unwrap();
        assert!(phase(&dc, &s, &y).is_ok());
    }

    fn random_pair(dc: &DualContext, rng: &mut ChaCha8Rng) -> (CharacterIndex, TruncatedBAdic, TruncatedBAdic) {
        let (bs, by) = (dc.e_star.len() as u32, dc.primal.digit_count() as u32);
        let mut digits = |b: u32| -> Vec<u32> { (0..rng.gen_range(1..6)).map(|_| rng.gen_range(0..b)).collect() };
        let (sd, yd, zd) = (digits(bs), digits(by), digits(by));
        let s = CharacterIndex::from_digits(dc, rng.gen_range(-4..1), &sd).unwrap();
        let y = TruncatedBAdic::from_digits(&dc.primal, rng.gen_range(-4..1), &yd, true).unwrap().truncate(8).unwrap();
        let z = TruncatedBAdic::from_digits(&dc.primal, rng.gen_range(-4..1), &zd, true).unwrap().truncate(8).unwrap();
        (s, y, z)
    }

    #[test]
    fn identities_hold() {
        for (seed, base) in [(11, one_dim()), (12, two_dim())] {
            let dc = build_dual_context(&base).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..200 {
                let (s, y, y2) = random_pair(&dc, &mut rng);
                let direct = phase(&dc, &s, &y).unwrap();
                assert_eq!(direct, phase_dual_form(&dc, &s, &y).unwrap());
                assert_eq!(direct, naive(&base.b, &s.s, &y));
                multiplicativity_check(&dc, &s, &y, &y2).unwrap();
                assert!(multiplicativity_check(&dc, &s, &y, &TruncatedBAdic::zero(&dc.primal, 8)).unwrap().is_zero());
            }
        }
    }

    #[test]
    fn locally_constant() {
        let dc = build_dual_context(&two_dim()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let (s, y, _) = random_pair(&dc, &mut rng);
            let nu = valuation_bound(&s.s);
            let tail: Vec<u32> = (0..4).map(|_| rng.gen_range(0..3)).collect();
            let far = TruncatedBAdic::from_digits(&dc.primal, -nu, &tail, true).unwrap().truncate(8).unwrap();
            let moved = y.add(&far).unwrap();
            assert_eq!(S(&dc, &s, &y).unwrap(), S(&dc, &s, &moved).unwrap());
        }
    }

    #[test]
    fn torus_character_combines_parts() {
        let dc = build_dual_context(&one_dim()).unwrap();
        let s = CharacterIndex::from_digits(&dc, -1, &[1]).unwrap();
        let p = PointKA::phi(&dc.primal, &ModuleElement::from_terms(1, [(1, vec![BigInt::from(1)])]), 8);
        let r = vec![rat(1, 3)];
        let t = torus_character(&dc, &r, &s, &p).unwrap();
        assert_eq!(t, mod_one(&(rat(1, 2) + rat(9, 4))));
        assert!(torus_character(&dc, &[rat(1, 1), rat(0, 1)], &s, &p).is_err());
    }
}
