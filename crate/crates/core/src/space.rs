//! Points of K_A = Rⁿ × Zⁿ((B)), the metrics 𝐝 and ℓ, and the lattice φ(Zⁿ[A]).

use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::badic::{valuation, BAdicContext, BDistance, TruncatedBAdic};
use crate::error::{Error, Result};
use crate::exactq::scalar::{format_decimal, format_rational, rat, rat_int, rational_to_f64};
use crate::exactq::modulus_lower_bound;
use crate::zmodule::{Base, ModuleElement};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PointKA {
    pub real: Vec<BigRational>,
    pub badic: TruncatedBAdic,
}

impl PointKA {
    pub fn zero(ctx: &Arc<BAdicContext>, depth: i64) -> Self {
        PointKA { real: vec![BigRational::zero(); ctx.n], badic: TruncatedBAdic::zero(ctx, depth) }
    }

    /// Diagonal embedding φ(z).
    pub fn phi(ctx: &Arc<BAdicContext>, z: &ModuleElement, depth: i64) -> Self {
        PointKA { real: z.value(&ctx.inverse, &ctx.matrix), badic: TruncatedBAdic::normalize(ctx, z, depth) }
    }

    pub fn context(&self) -> &Arc<BAdicContext> {
        self.badic.context()
    }

    pub fn add(&self, o: &Self) -> Result<Self> {
        Ok(PointKA { real: self.real.iter().zip(&o.real).map(|(a, b)| a + b).collect(), badic: self.badic.add(&o.badic)? })
    }

    pub fn neg(&self) -> Self {
        PointKA { real: self.real.iter().map(|x| -x).collect(), badic: self.badic.neg() }
    }

    pub fn sub(&self, o: &Self) -> Result<Self> {
        self.add(&o.neg())
    }

    /// B·p.
    pub fn apply_b(&self) -> Self {
        PointKA { real: self.context().matrix.mul_vec(&self.real), badic: self.badic.shift(1) }
    }

    /// A·p.
    pub fn apply_a(&self) -> Self {
        PointKA { real: self.context().inverse.mul_vec(&self.real), badic: self.badic.shift(-1) }
    }

    pub fn real_f64(&self) -> Vec<f64> {
        self.real.iter().map(rational_to_f64).collect()
    }

    pub fn to_record(&self, precision: usize) -> PointRecord {
        PointRecord {
            real: self.real.iter().map(|x| format_decimal(x, precision)).collect(),
            real_exact: self.real.iter().map(format_rational).collect(),
            badic: self.badic.format(),
            embed: self.badic.embed_real(),
        }
    }
}

/// Serialized point: decimal and exact real coordinates plus the digit string.
#[derive(Clone, Debug, Serialize)]
pub struct PointRecord {
    pub real: Vec<String>,
    pub real_exact: Vec<String>,
    pub badic: String,
    pub embed: f64,
}

/// 𝐝 = max(‖x − x′‖, d_B(y, y′)) with the real part kept squared and exact.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Distance {
    pub real_sq: BigRational,
    pub badic: BDistance,
    pub b: BigInt,
}

impl Distance {
    pub fn is_exact(&self) -> bool {
        self.badic.is_exact() || self.real_sq >= self.badic.upper(&self.b).pow(2)
    }

    pub fn is_zero(&self) -> bool {
        self.real_sq.is_zero() && self.badic == BDistance::Zero
    }

    /// Value (or upper bound) as a double.
    pub fn to_f64(&self) -> f64 {
        rational_to_f64(&self.real_sq).sqrt().max(self.badic.to_f64(&self.b))
    }

    /// Certified 𝐝 ≥ r.
    pub fn at_least(&self, r: &BigRational) -> bool {
        self.real_sq >= r * r || (self.badic.is_exact() && self.badic.upper(&self.b) >= *r)
    }

    /// Certified 𝐝 ≤ r.
    pub fn at_most(&self, r: &BigRational) -> bool {
        self.real_sq <= r * r && self.badic.upper(&self.b) <= *r
    }
}

pub fn dist(p: &PointKA, q: &PointKA) -> Result<Distance> {
    let real_sq = p.real.iter().zip(&q.real).map(|(a, b)| (a - b) * (a - b)).fold(BigRational::zero(), |s, x| s + x);
    let badic = p.badic.metric(&q.badic)?;
    Ok(Distance { real_sq, badic, b: p.context().b.clone() })
}

/// 𝐝(φ(z), φ(z′)) with the exact B-adic valuation of z − z′ (no truncation).
pub fn lattice_dist(ctx: &Arc<BAdicContext>, z: &ModuleElement, z2: &ModuleElement) -> Distance {
    let d = z.sub(z2);
    let v = d.value(&ctx.inverse, &ctx.matrix);
    let real_sq = v.iter().map(|x| x * x).fold(BigRational::zero(), |s, x| s + x);
    let badic = match valuation(ctx, &d) {
        None => BDistance::Zero,
        Some(nu) => BDistance::Exact(nu),
    };
    Distance { real_sq, badic, b: ctx.b.clone() }
}

/// Closed interval of doubles.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn point(x: f64) -> Self {
        Interval { lo: x, hi: x }
    }

    pub fn max(self, o: Interval) -> Interval {
        Interval { lo: self.lo.max(o.lo), hi: self.hi.max(o.hi) }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

const SERIES_CAP: usize = 100_000;
const REL_SLACK: f64 = 8.0 * f64::EPSILON;

/// Data for the contraction metric ℓ = max(‖·‖′, d_B), ‖v‖′ = Σ ρ^k ‖B^k v‖.
#[derive(Clone, Debug)]
pub struct MetricContext {
    pub rho: BigRational,
    pub kappa: BigRational,
    pub series_tolerance: f64,
    /// ‖(ρB)^p‖_F ≤ 1/2.
    pub period: usize,
    rho_b: Vec<Vec<f64>>,
    b: BigInt,
}

fn mat_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|r| r.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

fn mat_mul(x: &[Vec<f64>], y: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = x.len();
    (0..n).map(|i| (0..n).map(|j| (0..n).map(|k| x[i][k] * y[k][j]).sum()).collect()).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl MetricContext {
    /// ρ = (1 + σ)/2 for a certified lower bound σ on the eigenvalue moduli.
    pub fn new(base: &Base) -> Result<Self> {
        let sigma = modulus_lower_bound(&base.a, 16)?;
        Self::with_rho(base, (BigRational::one() + sigma) / rat(2, 1))
    }

    pub fn with_rho(base: &Base, rho: BigRational) -> Result<Self> {
        if rho <= BigRational::one() {
            return Err(Error::Precondition("ρ must exceed 1".into()));
        }
        let ib = rat_int(&base.counts.b).recip();
        let kappa = rho.recip().max(ib);
        let rf = rational_to_f64(&rho);
        let rho_b: Vec<Vec<f64>> = base.b.to_rows().iter().map(|r| r.iter().map(|x| rf * rational_to_f64(x)).collect()).collect();
        let mut p = 1;
        let mut pw = rho_b.clone();
        loop {
            let f = pw.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
            if f <= 0.49 {
                break;
            }
            if p >= SERIES_CAP {
                return Err(Error::SeriesDivergence(p));
            }
            pw = mat_mul(&pw, &rho_b);
            p += 1;
        }
        Ok(MetricContext { rho, kappa, series_tolerance: 1e-12, period: p, rho_b, b: base.counts.b.clone() })
    }

    pub fn kappa_f64(&self) -> f64 {
        rational_to_f64(&self.kappa)
    }

    /// ‖v‖′ as [partial sum, partial sum + tail bound].
    pub fn norm_prime(&self, v: &[f64]) -> Result<Interval> {
        let mut w = v.to_vec();
        let mut terms: Vec<f64> = Vec::new();
        for k in 0..SERIES_CAP {
            terms.push(norm(&w));
            if k + 1 >= self.period {
                let split = k + 1 - self.period;
                let partial: f64 = terms[..split].iter().sum();
                let tail: f64 = 2.0 * terms[split..].iter().sum::<f64>();
                if tail == 0.0 || tail <= self.series_tolerance * partial {
                    let slack = REL_SLACK * (k as f64 + 1.0);
                    return Ok(Interval { lo: partial * (1.0 - slack), hi: (partial + tail) * (1.0 + slack) });
                }
            }
            w = mat_vec(&self.rho_b, &w);
        }
        Err(Error::SeriesDivergence(SERIES_CAP))
    }

    pub fn norm_prime_exact(&self, v: &[BigRational]) -> Result<Interval> {
        self.norm_prime(&v.iter().map(rational_to_f64).collect::<Vec<_>>())
    }

    /// ℓ(p, q) as an interval.
    pub fn ell_dist(&self, p: &PointKA, q: &PointKA) -> Result<Interval> {
        let diff: Vec<BigRational> = p.real.iter().zip(&q.real).map(|(a, b)| a - b).collect();
        let real = self.norm_prime_exact(&diff)?;
        let d = p.badic.metric(&q.badic)?;
        let bd = d.to_f64(&self.b);
        let badic = if d.is_exact() { Interval::point(bd) } else { Interval { lo: 0.0, hi: bd } };
        Ok(real.max(badic))
    }
}

/// r = 1/m^K: lower bound for 𝐝 between distinct points of φ(Zⁿ[A]), K the B-side depth.
pub fn lattice_min_distance_bound(base: &Base) -> Result<BigRational> {
    base.require_solenoid()?;
    let k = base.kernel_b.stabilization_depth;
    Ok(rat_int(&num_traits::pow(base.m.clone(), k)).recip())
}

fn round_half_up(q: &BigRational) -> BigInt {
    (q + rat(1, 2)).floor().to_integer()
}

/// Nearest-point construction: cancel the fractional B-adic part, then round the real part.
pub fn lattice_nearest(p: &PointKA) -> Result<(ModuleElement, Distance)> {
    let ctx = p.context().clone();
    let w = p.badic.frac_part()?;
    let wv = w.value(&ctx.inverse, &ctx.matrix);
    let shift: Vec<BigInt> = p.real.iter().zip(&wv).map(|(x, y)| round_half_up(&(x - y))).collect();
    let z = w.add(&ModuleElement::from_vector(shift));
    let d = dist(p, &PointKA::phi(&ctx, &z, p.badic.depth()))?;
    Ok((z, d))
}

/// p = p′ + φ(z) with p′ in [0,1)ⁿ × Zⁿ[[B]].
pub fn fundamental_reduce(p: &PointKA) -> Result<(PointKA, ModuleElement)> {
    let ctx = p.context().clone();
    let w = p.badic.frac_part()?;
    let wv = w.value(&ctx.inverse, &ctx.matrix);
    let shift: Vec<BigInt> = p.real.iter().zip(&wv).map(|(x, y)| (x - y).floor().to_integer()).collect();
    let z = w.add(&ModuleElement::from_vector(shift));
    let reduced = p.sub(&PointKA::phi(&ctx, &z, p.badic.depth()))?;
    Ok((reduced, z))
}

pub fn in_fundamental_domain(p: &PointKA) -> bool {
    p.real.iter().all(|x| !x.is_negative() && *x < BigRational::one()) && p.badic.valuation().is_none_or(|v| v >= 0)
}

/// Euclidean norm bound of z's real part, as a double (used for window filtering).
pub fn real_norm_f64(v: &[BigRational]) -> f64 {
    v.iter().map(|x| x.to_f64().unwrap_or(f64::INFINITY).powi(2)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactq::scalar::int;
    use crate::exactq::Matrix;

    fn base1() -> Base {
        Base::new(Matrix::from_rows(vec![vec![rat(3, 2)]])).unwrap()
    }

    fn base2() -> Base {
        Base::new(Matrix::from_rows(vec![vec![rat(2, 1), rat(1, 1)], vec![rat(0, 1), rat(5, 3)]])).unwrap()
    }

    #[test]
    fn phi_examples() {
        let b = base2();
        let ctx = BAdicContext::from_base(&b);
        let p = PointKA::phi(&ctx, &ModuleElement::from_i64(&[0, 1]), 6);
        assert_eq!(p.real, vec![rat(0, 1), rat(1, 1)]);
        assert_eq!(p.badic.valuation(), Some(0));
        let d = dist(&p, &PointKA::zero(&ctx, 6)).unwrap();
        assert_eq!(d.to_f64(), 1.0);
        assert!(d.is_exact());
        assert!(dist(&p, &p).unwrap().is_zero());
    }

    #[test]
    fn prime_norm_closed_form() {
        let m = MetricContext::with_rho(&base1(), rat(5, 4)).unwrap();
        let i = m.norm_prime(&[1.0]).unwrap();
        assert!(i.lo <= 6.0 && 6.0 <= i.hi && i.hi - i.lo < 1e-9, "{i:?}");
        assert_eq!(m.kappa, rat(4, 5));
        let d = MetricContext::new(&base1()).unwrap();
        assert!(d.rho > BigRational::one() && d.rho < rat(5, 4));
    }

    #[test]
    fn min_distance_bound_one_dimensional() {
        let b = base1();
        assert_eq!(lattice_min_distance_bound(&b).unwrap(), rat(1, 2));
        let d = Base::new(Matrix::from_rows(vec![vec![rat(2, 1), rat(1, 2)], vec![rat(0, 1), rat(3, 1)]])).unwrap();
        assert_eq!(lattice_min_distance_bound(&d), Err(Error::DegenerateSolenoid));
    }

    #[test]
    fn nearest_and_reduce() {
        let b = base2();
        let ctx = BAdicContext::from_base(&b);
        let z0 = ModuleElement::from_terms(2, [(0, vec![int(3), int(-1)]), (2, vec![int(1), int(1)])]);
        let p = PointKA::phi(&ctx, &z0, 12);
        let (z, d) = lattice_nearest(&p).unwrap();
        assert!(d.real_sq.is_zero() && d.at_most(&rat(1, 3i64.pow(12))), "{d:?}");
        assert_eq!(z.value(&b.a, &b.b), z0.value(&b.a, &b.b));
        let (r, _) = fundamental_reduce(&p).unwrap();
        assert!(in_fundamental_domain(&r));
        let (r2, z2) = fundamental_reduce(&r).unwrap();
        assert_eq!(r2, r);
        assert!(z2.is_zero());
    }
}
