use std::collections::BTreeMap;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::evidence::{measure_evidence, Verdict};
use crate::badic::{small_carry, valuation, BAdicContext, CarryMemo, TruncatedBAdic};
use crate::error::{Error, Result};
use crate::exactq::scalar::rational_to_f64;
use crate::exactq::{IntLattice, Matrix};
use crate::zmodule::{ring_meet, DigitSystem, StackedSolver};
use num_traits::ToPrimitive;

/// Real coordinates are multiples of 2^-SAMPLE_BITS.
pub const SAMPLE_BITS: u32 = 30;

/// Levels checked by the positive-measure precondition.
const PRECONDITION_LEVELS: usize = 3;

/// A sample point of [0,1)ⁿ × Zⁿ[[B]]: exact real part and B-adic digits from position 0.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sample {
    pub real: Vec<BigRational>,
    pub digits: Vec<u32>,
}

/// Translate enumeration window.
#[derive(Clone, Debug, Serialize)]
pub struct TranslateWindow {
    /// Translates range over Zⁿ[A] ∩ Zⁿ[B], given by (1/scale)·columns.
    pub lattice_basis: Vec<Vec<String>>,
    pub lattice_scale: String,
    /// Exponent bound J of the B-polynomial form of the basis.
    pub exponent_bound: usize,
    /// Real hull of F: center and per-coordinate radius.
    pub hull_center: Vec<f64>,
    pub hull_radius: Vec<f64>,
    /// F lies in ν_B ≥ t₀.
    pub t0: i64,
    /// Every translate meeting the hull is enumerated.
    pub adequate: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct TilingReport {
    pub k: usize,
    pub samples: usize,
    pub seed: u64,
    pub histogram: BTreeMap<usize, usize>,
    pub mode: Option<usize>,
    pub fraction_at_mode: f64,
    pub reliable: bool,
    pub notes: Vec<String>,
    pub window: TranslateWindow,
    #[serde(skip)]
    pub counts: Vec<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ResolutionComparison {
    pub coarse: TilingReport,
    pub fine: TilingReport,
    pub same_mode: bool,
    /// Fraction of samples with equal counts at both levels.
    pub agreement: f64,
    pub stable: bool,
}

struct Digit {
    real: Vec<f64>,
    /// Digit index at position t₀ − 1.
    low: u32,
    /// Digit vectors at positions t₀, t₀ + 1, … of the B-adic expansion.
    tail: Vec<Vec<i64>>,
}

/// Deepest B-adic position the estimator tracks.
pub const MAX_DEPTH: usize = 160;

/// Pending coefficient vectors at positions [0, len); digits below `pos` are emitted.
#[derive(Clone)]
struct Window {
    n: usize,
    pos: usize,
    data: Vec<i64>,
}

impl Window {
    fn new(n: usize, len: usize) -> Self {
        Window { n, pos: 0, data: vec![0; n * len] }
    }

    fn len(&self) -> usize {
        self.data.len() / self.n
    }

    fn add(&mut self, p: usize, z: &[i64], sign: i64) -> Result<()> {
        if p >= self.len() {
            return Ok(());
        }
        for (s, x) in self.data[p * self.n..(p + 1) * self.n].iter_mut().zip(z) {
            *s = x.checked_mul(sign).and_then(|t| s.checked_add(t)).ok_or_else(|| Error::Precondition("carry vector exceeds the 64-bit range".into()))?;
        }
        Ok(())
    }

    fn emit(&mut self, ctx: &BAdicContext, memo: &mut CarryMemo) -> Result<u32> {
        let p = self.pos;
        self.pos += 1;
        let slot = &mut self.data[p * self.n..(p + 1) * self.n];
        if slot.iter().all(|x| *x == 0) {
            return Ok(ctx.zero_digit());
        }
        let v = slot.to_vec();
        slot.iter_mut().for_each(|x| *x = 0);
        let (idx, carries) = small_carry(ctx, memo, &v)?;
        let idx = *idx;
        for (o, u) in carries.clone() {
            self.add(p + o as usize, &u, 1)?;
        }
        Ok(idx)
    }
}

/// Counts, for sampled points p, the translates z with p ∈ φ(z) + F at level k.
pub struct Estimator {
    n: usize,
    ctx: Arc<BAdicContext>,
    a: Vec<f64>,
    t0: i64,
    digits: Vec<Digit>,
    center: Vec<f64>,
    radius: Vec<f64>,
    basis: Vec<Vec<f64>>,
    /// B-polynomial coefficients u_i of each basis vector, g = Σ B^i u_i.
    basis_reps: Vec<Vec<Vec<i64>>>,
    sample_digits: Vec<Vec<i64>>,
    lattice: IntLattice,
    exponent_bound: usize,
}

fn f64_matrix(m: &Matrix<BigRational>) -> Matrix<f64> {
    m.map(rational_to_f64)
}

fn mul_f64(m: &Matrix<f64>, v: &[f64]) -> Vec<f64> {
    (0..m.rows()).map(|i| m.row(i).iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

fn frobenius(m: &Matrix<f64>) -> f64 {
    m.data().iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl Estimator {
    pub fn new(system: &DigitSystem) -> Result<Self> {
        let base = system.base();
        base.require_solenoid()?;
        let n = base.n;
        let ctx = BAdicContext::from_base(base);
        let nu = system
            .digits()
            .iter()
            .filter_map(|d| valuation(&ctx, d))
            .min()
            .ok_or_else(|| Error::Precondition("all digits are zero".into()))?;
        let t0 = 1 + nu;
        if t0 < 0 {
            return Err(Error::Precondition(format!("digit valuations must be nonnegative, found {nu}")));
        }
        let small = |v: &[BigInt]| -> Result<Vec<i64>> {
            v.iter().map(|x| x.to_i64().ok_or_else(|| Error::Precondition("digit vector exceeds the 64-bit range".into()))).collect()
        };
        let mut digits = Vec::new();
        for (d, v) in system.digits().iter().zip(system.digit_values()) {
            let badic = TruncatedBAdic::normalize(&ctx, d, MAX_DEPTH as i64 + t0);
            let low = badic.digit(t0 - 1).expect("digit below the truncation depth");
            let tail = (t0..MAX_DEPTH as i64 + t0).map(|p| small(ctx.digit(badic.digit(p).unwrap()))).collect::<Result<Vec<_>>>()?;
            digits.push(Digit { real: v.iter().map(rational_to_f64).collect(), low, tail });
        }
        let sample_digits = (0..ctx.digit_count() as u32).map(|i| small(ctx.digit(i))).collect::<Result<Vec<_>>>()?;

        let vals = system.digit_values();
        let count = BigRational::from_integer(BigInt::from(vals.len()));
        let mean: Vec<BigRational> = (0..n).map(|i| vals.iter().map(|v| v[i].clone()).sum::<BigRational>() / &count).collect();
        let shifted = base.a.sub(&Matrix::identity(n));
        let center_q = shifted.inverse().ok_or(Error::Singular)?.mul_vec(&mean);
        let center: Vec<f64> = center_q.iter().map(rational_to_f64).collect();
        let dev: Vec<Vec<f64>> = vals.iter().map(|v| v.iter().zip(&mean).map(|(x, m)| rational_to_f64(&(x - m))).collect()).collect();
        let radius = hull_radius(&f64_matrix(&base.b), &dev)?;

        let (lattice, j) = ring_meet(base)?;
        let solver = StackedSolver::new(&base.b, 0, j);
        let basis_q = lattice.rational_basis();
        let mut basis_reps = Vec::new();
        for g in &basis_q {
            let us = solver.solve_rational(g).ok_or_else(|| Error::invariant("lattice vector outside its B-polynomial span"))?;
            basis_reps.push(us.iter().map(|u| small(u)).collect::<Result<Vec<_>>>()?);
        }
        let basis = basis_q.iter().map(|g| g.iter().map(rational_to_f64).collect()).collect();
        Ok(Estimator {
            n,
            a: f64_matrix(&base.a).data().to_vec(),
            ctx,
            t0,
            digits,
            center,
            radius,
            basis,
            basis_reps,
            sample_digits,
            lattice,
            exponent_bound: j,
        })
    }

    pub fn t0(&self) -> i64 {
        self.t0
    }

    pub fn context(&self) -> &Arc<BAdicContext> {
        &self.ctx
    }

    pub fn lattice(&self) -> &IntLattice {
        &self.lattice
    }

    pub fn hull(&self) -> (&[f64], &[f64]) {
        (&self.center, &self.radius)
    }

    /// B-adic digits a sample needs for level k.
    pub fn sample_depth(&self, k: usize) -> usize {
        k + self.t0 as usize
    }

    /// Sample s of the stream `seed`; independent of the level, digits are drawn after the reals.
    pub fn sample(&self, seed: u64, s: u64, digit_count: usize) -> Sample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(s);
        let den = BigInt::from(1u64 << SAMPLE_BITS);
        let real = (0..self.n).map(|_| BigRational::new(BigInt::from(rng.gen_range(0..1u64 << SAMPLE_BITS)), den.clone())).collect();
        let count = self.ctx.digit_count() as u32;
        let digits = (0..digit_count).map(|_| rng.gen_range(0..count)).collect();
        Sample { real, digits }
    }

    pub fn window(&self) -> TranslateWindow {
        TranslateWindow {
            lattice_basis: self.lattice.int_basis().iter().map(|c| c.iter().map(|x| x.to_string()).collect()).collect(),
            lattice_scale: self.lattice.scale().to_string(),
            exponent_bound: self.exponent_bound,
            hull_center: self.center.clone(),
            hull_radius: self.radius.clone(),
            t0: self.t0,
            adequate: true,
        }
    }

    /// Lattice translates whose real part lies within the hull of x − F.
    fn candidates(&self, x: &[f64]) -> Vec<Vec<i64>> {
        let lo: Vec<f64> = (0..self.n).map(|i| x[i] - self.center[i] - self.radius[i]).collect();
        let hi: Vec<f64> = (0..self.n).map(|i| x[i] - self.center[i] + self.radius[i]).collect();
        let mut out = Vec::new();
        let mut coeffs = vec![0i64; self.n];
        self.enumerate(self.n, &vec![0.0; self.n], &lo, &hi, &mut coeffs, &mut out);
        out
    }

    fn enumerate(&self, l: usize, partial: &[f64], lo: &[f64], hi: &[f64], coeffs: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
        if l == 0 {
            out.push(coeffs.clone());
            return;
        }
        let i = l - 1;
        let g = &self.basis[i];
        let piv = g[i];
        let eps = 1e-9;
        let (a, b) = ((lo[i] - partial[i]) / piv, (hi[i] - partial[i]) / piv);
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        for c in (a - eps).ceil() as i64..=(b + eps).floor() as i64 {
            coeffs[i] = c;
            let next: Vec<f64> = partial.iter().zip(g).map(|(p, x)| p + c as f64 * x).collect();
            self.enumerate(i, &next, lo, hi, coeffs, out);
        }
    }

    fn in_hull(&self, v: &[f64]) -> bool {
        v.iter().zip(&self.center).zip(&self.radius).all(|((x, c), r)| (x - c).abs() <= *r)
    }

    /// Level j reached with `w` emitted through position t₀ + j (t₀ − 1 after scaling by A).
    fn descend(&self, real: &[f64], w: &Window, j: usize, k: usize, memo: &mut CarryMemo) -> Result<bool> {
        if j == k {
            return Ok(true);
        }
        let ar: Vec<f64> = (0..self.n).map(|i| (0..self.n).map(|c| self.a[i * self.n + c] * real[c]).sum()).collect();
        let mut base = w.clone();
        let low = base.emit(&self.ctx, memo)?;
        for d in &self.digits {
            if d.low != low {
                continue;
            }
            let nr: Vec<f64> = ar.iter().zip(&d.real).map(|(x, y)| x - y).collect();
            if !self.in_hull(&nr) {
                continue;
            }
            let mut next = base.clone();
            // position p ≥ t₀ at level j + 1 sits at index p + j + 1
            for (i, v) in d.tail.iter().enumerate() {
                let at = self.t0 as usize + i + j + 1;
                if at >= next.len() {
                    break;
                }
                next.add(at, v, -1)?;
            }
            if self.descend(&nr, &next, j + 1, k, memo)? {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// Number of translates z with the sample in φ(z) + F at level k.
    pub fn count(&self, sample: &Sample, k: usize) -> Result<usize> {
        let depth = self.sample_depth(k);
        if depth > MAX_DEPTH {
            return Err(Error::Precondition(format!("level {k} needs more than {MAX_DEPTH} B-adic digits")));
        }
        if sample.digits.len() < depth {
            return Err(Error::InsufficientDepth { needed: depth as i64, have: sample.digits.len() as i64 });
        }
        let x: Vec<f64> = sample.real.iter().map(rational_to_f64).collect();
        let mut y = Window::new(self.n, depth);
        for (p, &e) in sample.digits[..depth].iter().enumerate() {
            y.add(p, &self.sample_digits[e as usize], 1)?;
        }
        let zero = self.ctx.zero_digit();
        let mut memo = CarryMemo::new();
        let mut total = 0;
        'cand: for c in self.candidates(&x) {
            let z: Vec<f64> = (0..self.n).map(|i| (0..self.n).map(|l| c[l] as f64 * self.basis[l][i]).sum()).collect();
            let real: Vec<f64> = x.iter().zip(&z).map(|(a, b)| a - b).collect();
            if !self.in_hull(&real) {
                continue;
            }
            let mut w = y.clone();
            for (cl, rep) in c.iter().zip(&self.basis_reps) {
                if *cl == 0 {
                    continue;
                }
                for (p, u) in rep.iter().enumerate() {
                    w.add(p, u, -cl)?;
                }
            }
            for _ in 0..self.t0 {
                if w.emit(&self.ctx, &mut memo)? != zero {
                    continue 'cand;
                }
            }
            if self.descend(&real, &w, 0, k, &mut memo)? {
                total += 1;
            }
        }
        Ok(total)
    }

    pub fn counts(&self, seed: u64, samples: usize, k: usize, digit_count: usize) -> Result<Vec<usize>> {
        (0..samples as u64).into_par_iter().map(|s| self.count(&self.sample(seed, s, digit_count), k)).collect()
    }

    pub fn report(&self, seed: u64, k: usize, counts: Vec<usize>) -> TilingReport {
        let mut histogram = BTreeMap::new();
        for &c in &counts {
            *histogram.entry(c).or_insert(0) += 1;
        }
        let top = histogram.values().copied().max().unwrap_or(0);
        let modes: Vec<usize> = histogram.iter().filter(|(_, &v)| v == top).map(|(&k, _)| k).collect();
        let mut notes = Vec::new();
        let (mode, reliable) = match modes.len() {
            0 => {
                notes.push("no samples".into());
                (None, false)
            }
            1 => (Some(modes[0]), true),
            _ => {
                notes.push("tie in modal multiplicity, refine k".into());
                (None, false)
            }
        };
        let samples = counts.len();
        TilingReport {
            k,
            samples,
            seed,
            fraction_at_mode: if samples == 0 { 0.0 } else { top as f64 / samples as f64 },
            histogram,
            mode,
            reliable,
            notes,
            window: self.window(),
            counts,
        }
    }
}

/// Σ_{j≥1} max_d |(B^j (d − mean))_i| per coordinate, with a certified geometric tail.
fn hull_radius(b: &Matrix<f64>, dev: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = b.rows();
    let maxdev = dev.iter().map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt()).fold(0.0, f64::max);
    // smallest q with ‖B^q‖ ≤ 1/2
    let mut bq = b.clone();
    let mut q = 1;
    while frobenius(&bq) > 0.5 {
        if q > 4096 {
            return Err(Error::SeriesDivergence(q));
        }
        bq = bq.mul(b);
        q += 1;
    }
    let mut r = vec![0.0; n];
    let mut p = b.clone();
    let mut steps = 0;
    while frobenius(&p) * maxdev >= 1e-13 {
        for (i, ri) in r.iter_mut().enumerate() {
            *ri += dev.iter().map(|d| mul_f64(&p, d)[i].abs()).fold(0.0, f64::max);
        }
        p = p.mul(b);
        steps += 1;
        if steps > 1 << 16 {
            return Err(Error::SeriesDivergence(steps));
        }
    }
    // Σ_{j>J} ‖B^j‖ ≤ 2 Σ_{i<q} ‖B^{J+1+i}‖
    let mut tail = 0.0;
    for _ in 0..q {
        tail += frobenius(&p);
        p = p.mul(b);
    }
    let tail = 2.0 * tail * maxdev;
    Ok(r.into_iter().map(|x| (x + tail) * (1.0 + 1e-9) + 1e-9).collect())
}

fn check_precondition(system: &DigitSystem) -> Result<()> {
    let ev = measure_evidence(system, PRECONDITION_LEVELS, super::block::DEFAULT_CAP)?;
    match ev.verdict {
        Verdict::Pass => Ok(()),
        v => Err(Error::Precondition(format!("measure evidence is not a pass: {v:?}"))),
    }
}

pub fn multiplicity_estimate(system: &DigitSystem, k: usize, samples: usize, seed: u64) -> Result<TilingReport> {
    check_precondition(system)?;
    let est = Estimator::new(system)?;
    let counts = est.counts(seed, samples, k, est.sample_depth(k))?;
    Ok(est.report(seed, k, counts))
}

/// Levels k and k + 1 on the same samples.
pub fn compare_resolutions(system: &DigitSystem, k: usize, samples: usize, seed: u64) -> Result<ResolutionComparison> {
    check_precondition(system)?;
    let est = Estimator::new(system)?;
    let digits = est.sample_depth(k + 1);
    let coarse = est.report(seed, k, est.counts(seed, samples, k, digits)?);
    let fine = est.report(seed, k + 1, est.counts(seed, samples, k + 1, digits)?);
    let same = coarse.counts.iter().zip(&fine.counts).filter(|(a, b)| a == b).count();
    let same_mode = coarse.mode.is_some() && coarse.mode == fine.mode;
    Ok(ResolutionComparison {
        agreement: if samples == 0 { 0.0 } else { same as f64 / samples as f64 },
        stable: same_mode && coarse.reliable && fine.reliable,
        same_mode,
        coarse,
        fine,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactq::scalar::rat;
    use crate::zmodule::{Base, ModuleElement};
    use num_traits::Zero;

    fn one_dim() -> DigitSystem {
        let base = Arc::new(Base::new(Matrix::from_rows(vec![vec![rat(3, 2)]])).unwrap());
        DigitSystem::new(base, (0..3).map(|d| ModuleElement::from_i64(&[d])).collect()).unwrap()
    }

    fn example(lead: i64) -> DigitSystem {
        let base = Arc::new(Base::new(Matrix::from_rows(vec![vec![rat(2, 1), rat(1, 1)], vec![rat(0, 1), rat(5, 3)]])).unwrap());
        let digits = [0, lead].iter().flat_map(|&f| [0, 1, 2, 3, 9].map(|s| ModuleElement::from_i64(&[f, s]))).collect();
        DigitSystem::new(base, digits).unwrap()
    }

    fn nu2(q: &BigRational) -> Option<i64> {
        if q.is_zero() {
            return None;
        }
        let tz = |x: &BigInt| x.trailing_zeros().unwrap_or(0) as i64;
        Some(tz(q.numer()) - tz(q.denom()))
    }

    /// Translates z ∈ ¼Z with x − z ∈ [0, 4] and q = (x − z, y − z) ∈ F at level k, checked
    /// by explicit descent with F ⊆ [0, 4] × 2Z₂.
    fn oracle_count(x: &BigRational, y: &BigRational, k: usize) -> usize {
        fn inside(r: &BigRational, t: &BigRational, left: usize) -> bool {
            let four = BigRational::from_integer(BigInt::from(4));
            if *r < BigRational::zero() || *r > four || nu2(t).is_some_and(|v| v < 1) {
                return false;
            }
            if left == 0 {
                return true;
            }
            let a = rat(3, 2);
            (0..3).any(|d| {
                let d = BigRational::from_integer(BigInt::from(d));
                inside(&(&a * r - &d), &(&a * t - &d), left - 1)
            })
        }
        let quarter = rat(1, 4);
        let lo = ((x - rat(4, 1)) / &quarter).ceil().to_integer();
        let hi = (x / &quarter).floor().to_integer();
        let mut count = 0;
        let mut n = lo;
        while n <= hi {
            let z = BigRational::from_integer(n.clone()) * &quarter;
            if inside(&(x - &z), &(y - &z), k) {
                count += 1;
            }
            n += 1;
        }
        count
    }

    #[test]
    fn one_dimensional_oracle() {
        let sys = one_dim();
        let est = Estimator::new(&sys).unwrap();
        assert_eq!(est.t0(), 1);
        let ctx = est.context();
        let e: Vec<BigRational> = (0..ctx.digit_count() as u32).map(|i| BigRational::from_integer(ctx.digit(i)[0].clone())).collect();
        assert_eq!(e, vec![rat(0, 1), rat(1, 1)]);
        let k = 12;
        let mut mismatches = 0;
        for s in 0..150 {
            let smp = est.sample(5, s, est.sample_depth(k));
            let y = smp.digits.iter().enumerate().fold(rat(0, 1), |acc, (i, &d)| acc + &e[d as usize] * num_traits::pow(rat(2, 3), i));
            if est.count(&smp, k).unwrap() != oracle_count(&smp.real[0], &y, k) {
                mismatches += 1;
            }
        }
        assert_eq!(mismatches, 0);
    }

    #[test]
    fn one_dimensional_mode_is_stable() {
        let r = compare_resolutions(&one_dim(), 12, 300, 3).unwrap();
        assert!(r.stable);
        assert_eq!(r.coarse.mode, Some(1));
        assert!(r.coarse.fraction_at_mode >= 0.95 && r.fine.fraction_at_mode >= 0.95);
        assert_eq!(r.fine.histogram.values().sum::<usize>(), 300);
    }

    #[test]
    fn two_dimensional_modes() {
        let r = compare_resolutions(&example(1), 20, 60, 1).unwrap();
        assert!(r.stable);
        assert_eq!(r.coarse.mode, Some(1));
        let r = multiplicity_estimate(&example(2), 20, 60, 1).unwrap();
        assert_eq!(r.mode, Some(2));
    }

    #[test]
    fn samples_are_prefix_consistent() {
        let est = Estimator::new(&one_dim()).unwrap();
        let short = est.sample(9, 4, 10);
        let long = est.sample(9, 4, 20);
        assert_eq!(short.real, long.real);
        assert_eq!(short.digits[..], long.digits[..10]);
        assert_ne!(est.sample(9, 5, 10), short);
    }

    #[test]
    fn duplicate_digits_rejected() {
        let base = Arc::new(Base::new(Matrix::from_rows(vec![vec![rat(3, 2)]])).unwrap());
        let sys = DigitSystem::unchecked(base, [0, 1, 4].iter().map(|&d| ModuleElement::from_i64(&[d])).collect()).unwrap();
        assert!(matches!(multiplicity_estimate(&sys, 4, 10, 0), Err(Error::Precondition(_))));
    }
}
