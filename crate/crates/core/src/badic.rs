//! Truncated arithmetic in Zⁿ((B)): valuations, the ultrametric, canonical digit expansions.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::exactq::scalar::rat_int;
use crate::exactq::{vector_min_poly, IntLattice};
use crate::zmodule::{Base, ModuleElement, ResidueSystem, StackedSolver};
use crate::RationalMatrix;

/// Digit alphabet and carry solver for expansions in powers of a contracting matrix M
/// over a base lattice G (M = B over Zⁿ, or M = B* over Γ).
#[derive(Debug)]
pub struct BAdicContext {
    pub n: usize,
    pub matrix: RationalMatrix,
    pub inverse: RationalMatrix,
    pub lattice: IntLattice,
    pub residues: ResidueSystem,
    solver: StackedSolver,
    /// |G/N|, the number of digits.
    pub b: BigInt,
}

impl BAdicContext {
    pub fn new(matrix: RationalMatrix, lattice: IntLattice, residues: ResidueSystem, solver: StackedSolver) -> Result<Arc<Self>> {
        let inverse = matrix.inverse().ok_or(Error::Singular)?;
        let b = BigInt::from(residues.len());
        Ok(Arc::new(BAdicContext { n: matrix.rows(), matrix, inverse, lattice, residues, solver, b }))
    }

    /// B-side context of Zⁿ((B)).
    pub fn from_base(base: &Base) -> Arc<Self> {
        Arc::new(BAdicContext {
            n: base.n,
            matrix: base.b.clone(),
            inverse: base.a.clone(),
            lattice: IntLattice::standard(base.n),
            residues: base.residues_b.clone(),
            solver: base.solver_b.clone(),
            b: base.counts.b.clone(),
        })
    }

    pub fn digit(&self, i: u32) -> &[BigInt] {
        &self.residues.representatives[i as usize]
    }

    pub fn digit_count(&self) -> usize {
        self.residues.len()
    }

    pub fn zero_digit(&self) -> u32 {
        self.residues.zero_index() as u32
    }

    pub fn same(self: &Arc<Self>, o: &Arc<Self>) -> bool {
        Arc::ptr_eq(self, o) || (self.matrix == o.matrix && self.residues.representatives == o.residues.representatives)
    }

    fn check(self: &Arc<Self>, o: &Arc<Self>) -> Result<()> {
        if self.same(o) {
            Ok(())
        } else {
            Err(Error::ContextMismatch)
        }
    }

    /// Digit of a coefficient v at some position and the carries (offset, u) with
    /// v − e = Σ M^offset u.
    pub fn carry_of(&self, v: &[BigInt]) -> (u32, Vec<(i64, Vec<BigInt>)>) {
        let idx = self.residues.class_of(v);
        let e = self.digit(idx as u32);
        let w: Vec<BigInt> = v.iter().zip(e).map(|(x, y)| x - y).collect();
        if w.iter().all(|x| x.is_zero()) {
            return (idx as u32, Vec::new());
        }
        let u = self.solver.solve(&w).expect("kernel element decomposes over the stacked powers");
        let lo = self.solver.lo() as i64;
        let carries = u
            .into_iter()
            .enumerate()
            .filter(|(_, ui)| ui.iter().any(|x| !x.is_zero()))
            .map(|(i, ui)| (lo + i as i64, ui))
            .collect();
        (idx as u32, carries)
    }

    /// Exact value Σ M^j v_j of a coefficient map.
    pub fn evaluate(&self, coeffs: &BTreeMap<i64, Vec<BigInt>>) -> Vec<BigRational> {
        let mut out = vec![BigRational::zero(); self.n];
        for (j, v) in coeffs {
            let p = if *j >= 0 { self.matrix.pow(*j as u32) } else { self.inverse.pow((-*j) as u32) };
            let w = p.mul_vec(&v.iter().map(rat_int).collect::<Vec<_>>());
            for (o, x) in out.iter_mut().zip(w) {
                *o += x;
            }
        }
        out
    }
}

/// Incremental carry normalization: emits digit indices position by position.
pub struct Carry<'a> {
    ctx: &'a BAdicContext,
    pos: i64,
    pending: BTreeMap<i64, Vec<BigInt>>,
}

impl<'a> Carry<'a> {
    pub fn new(ctx: &'a BAdicContext, coeffs: BTreeMap<i64, Vec<BigInt>>, start: i64) -> Self {
        let pos = coeffs.keys().next().copied().map_or(start, |k| k.min(start));
        Carry { ctx, pos, pending: coeffs }
    }

    pub fn position(&self) -> i64 {
        self.pos
    }

    /// No pending coefficients: every later digit is 0.
    pub fn is_done(&self) -> bool {
        self.pending.is_empty()
    }

    /// Skip ahead to the lowest pending position when nothing is due before it.
    pub fn next_nonzero_position(&self) -> Option<i64> {
        self.pending.keys().next().map(|&k| k.max(self.pos))
    }

    pub fn next_digit(&mut self) -> u32 {
        let j = self.pos;
        self.pos += 1;
        let Some(v) = self.pending.remove(&j) else { return self.ctx.zero_digit() };
        let (idx, carries) = self.ctx.carry_of(&v);
        for (off, ui) in carries {
            let p = j + off;
            let slot = self.pending.entry(p).or_insert_with(|| vec![BigInt::zero(); self.ctx.n]);
            for (s, x) in slot.iter_mut().zip(&ui) {
                *s += x;
            }
            if slot.iter().all(|x| x.is_zero()) {
                self.pending.remove(&p);
            }
        }
        idx
    }
}

/// d_B between two truncations: 0, exactly b^{-ν}, or at most b^{-depth}.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BDistance {
    Zero,
    Exact(i64),
    AtMost(i64),
}

impl BDistance {
    fn pow_b(b: &BigInt, e: i64) -> BigRational {
        let p = rat_int(&num_traits::pow(b.clone(), e.unsigned_abs() as usize));
        if e >= 0 {
            p.recip()
        } else {
            p
        }
    }

    /// The exact value, or the certified upper bound.
    pub fn upper(&self, b: &BigInt) -> BigRational {
        match self {
            BDistance::Zero => BigRational::zero(),
            BDistance::Exact(nu) | BDistance::AtMost(nu) => Self::pow_b(b, *nu),
        }
    }

    pub fn is_exact(&self) -> bool {
        !matches!(self, BDistance::AtMost(_))
    }

    pub fn to_f64(&self, b: &BigInt) -> f64 {
        crate::exactq::scalar::rational_to_f64(&self.upper(b))
    }
}

/// The cylinder {y : y ≡ Σ_{j<depth} M^j e_j}. Digits are indices into the context's residues.
#[derive(Clone)]
pub struct TruncatedBAdic {
    ctx: Arc<BAdicContext>,
    low: i64,
    digits: Vec<u32>,
    depth: i64,
    /// All digits from `depth` on are known to be 0.
    finite: bool,
}

impl fmt::Debug for TruncatedBAdic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TruncatedBAdic({}; depth {}{})", self.format(), self.depth, if self.finite { ", finite" } else { "" })
    }
}

impl PartialEq for TruncatedBAdic {
    fn eq(&self, o: &Self) -> bool {
        self.ctx.same(&o.ctx) && self.low == o.low && self.digits == o.digits && self.depth == o.depth
    }
}

impl Eq for TruncatedBAdic {}

impl TruncatedBAdic {
    pub fn zero(ctx: &Arc<BAdicContext>, depth: i64) -> Self {
        TruncatedBAdic { ctx: ctx.clone(), low: depth, digits: Vec::new(), depth, finite: true }
    }

    /// Canonical expansion of Σ M^j v_j (v_j ∈ G) up to `depth` (exclusive).
    pub fn from_coeffs(ctx: &Arc<BAdicContext>, coeffs: BTreeMap<i64, Vec<BigInt>>, depth: i64) -> Self {
        let mut carry = Carry::new(ctx, coeffs, depth);
        let mut low = None;
        let mut digits = Vec::new();
        let zero = ctx.zero_digit();
        while carry.position() < depth {
            if low.is_none() {
                match carry.next_nonzero_position() {
                    Some(p) if p < depth => {
                        while carry.position() < p {
                            carry.next_digit();
                        }
                    }
                    _ => break,
                }
            } else if carry.is_done() {
                let pad = (depth - carry.position()) as usize;
                digits.extend(std::iter::repeat_n(zero, pad));
                break;
            }
            let pos = carry.position();
            let d = carry.next_digit();
            if low.is_none() {
                if d == zero {
                    continue;
                }
                low = Some(pos);
            }
            digits.push(d);
        }
        let finite = carry.is_done();
        match low {
            Some(low) => TruncatedBAdic { ctx: ctx.clone(), low, digits, depth, finite },
            None => TruncatedBAdic { ctx: ctx.clone(), low: depth, digits: Vec::new(), depth, finite },
        }
    }

    /// normalize(y): A^j z contributes M^{-j} z.
    pub fn normalize(ctx: &Arc<BAdicContext>, y: &ModuleElement, depth: i64) -> Self {
        let coeffs = y.terms().iter().map(|(j, z)| (-*j, z.clone())).collect();
        Self::from_coeffs(ctx, coeffs, depth)
    }

    /// A digit-index string starting at position `low`; leading zeros are dropped.
    pub fn from_digits(ctx: &Arc<BAdicContext>, low: i64, digits: &[u32], finite: bool) -> Result<Self> {
        let zero = ctx.zero_digit();
        if let Some(&bad) = digits.iter().find(|&&d| d as usize >= ctx.digit_count()) {
            return Err(Error::Precondition(format!("digit index {bad} outside the residue system")));
        }
        let depth = low + digits.len() as i64;
        match digits.iter().position(|&d| d != zero) {
            Some(s) => Ok(TruncatedBAdic { ctx: ctx.clone(), low: low + s as i64, digits: digits[s..].to_vec(), depth, finite }),
            None => Ok(TruncatedBAdic { ctx: ctx.clone(), low: depth, digits: Vec::new(), depth, finite }),
        }
    }

    pub fn context(&self) -> &Arc<BAdicContext> {
        &self.ctx
    }

    /// ν, or None for the zero marker.
    pub fn valuation(&self) -> Option<i64> {
        if self.digits.is_empty() {
            None
        } else {
            Some(self.low)
        }
    }

    pub fn depth(&self) -> i64 {
        self.depth
    }

    pub fn is_finite(&self) -> bool {
        self.finite
    }

    /// True zero, not merely indistinguishable from zero at this depth.
    pub fn is_zero(&self) -> bool {
        self.digits.is_empty() && self.finite
    }

    pub fn is_zero_marker(&self) -> bool {
        self.digits.is_empty()
    }

    /// Digit index at position j (known for j < depth).
    pub fn digit(&self, j: i64) -> Option<u32> {
        if j >= self.depth {
            return if self.finite { Some(self.ctx.zero_digit()) } else { None };
        }
        if j < self.low {
            return Some(self.ctx.zero_digit());
        }
        Some(self.digits[(j - self.low) as usize])
    }

    pub fn digit_vector(&self, j: i64) -> Option<&[BigInt]> {
        self.digit(j).map(|i| self.ctx.digit(i))
    }

    /// (position, digit index) for the stored digits ν … depth−1.
    pub fn digit_indices(&self) -> impl Iterator<Item = (i64, u32)> + '_ {
        self.digits.iter().enumerate().map(|(i, &d)| (self.low + i as i64, d))
    }

    pub fn coeffs(&self) -> BTreeMap<i64, Vec<BigInt>> {
        let zero = self.ctx.zero_digit();
        self.digit_indices().filter(|(_, d)| *d != zero).map(|(j, d)| (j, self.ctx.digit(d).to_vec())).collect()
    }

    /// Exact value of the partial sum Σ_{j<depth} M^j e_j.
    pub fn partial_value(&self) -> Vec<BigRational> {
        self.ctx.evaluate(&self.coeffs())
    }

    /// The partial sum as Σ A^{-j} e_j (B side).
    pub fn partial_element(&self) -> ModuleElement {
        ModuleElement::from_terms(self.ctx.n, self.coeffs().into_iter().map(|(j, v)| (-j, v)))
    }

    /// Change the truncation depth; raising it needs a finite expansion.
    pub fn truncate(&self, depth: i64) -> Result<Self> {
        if depth > self.depth && !self.finite {
            return Err(Error::InsufficientDepth { needed: depth, have: self.depth });
        }
        Ok(Self::from_coeffs(&self.ctx, self.coeffs(), depth).with_finite(self.finite))
    }

    fn with_finite(mut self, finite: bool) -> Self {
        self.finite = self.finite && finite;
        self
    }

    pub fn add(&self, o: &Self) -> Result<Self> {
        self.ctx.check(&o.ctx)?;
        let depth = self.depth.min(o.depth);
        let mut coeffs = self.coeffs();
        for (j, v) in o.coeffs() {
            let slot = coeffs.entry(j).or_insert_with(|| vec![BigInt::zero(); self.ctx.n]);
            for (s, x) in slot.iter_mut().zip(v) {
                *s += x;
            }
        }
        coeffs.retain(|_, v| v.iter().any(|x| !x.is_zero()));
        Ok(Self::from_coeffs(&self.ctx, coeffs, depth).with_finite(self.finite && o.finite))
    }

    pub fn neg(&self) -> Self {
        let coeffs = self.coeffs().into_iter().map(|(j, v)| (j, v.iter().map(|x| -x).collect())).collect();
        Self::from_coeffs(&self.ctx, coeffs, self.depth).with_finite(self.finite)
    }

    pub fn sub(&self, o: &Self) -> Result<Self> {
        self.add(&o.neg())
    }

    /// Multiply by M^k: digits move up k positions.
    pub fn shift(&self, k: i64) -> Self {
        TruncatedBAdic { ctx: self.ctx.clone(), low: self.low + k, digits: self.digits.clone(), depth: self.depth + k, finite: self.finite }
    }

    /// d_B(self, o) read off the first differing digit.
    pub fn metric(&self, o: &Self) -> Result<BDistance> {
        self.ctx.check(&o.ctx)?;
        let depth = self.depth.min(o.depth);
        let start = self.low.min(o.low);
        for j in start..depth {
            if self.digit(j) != o.digit(j) {
                return Ok(BDistance::Exact(j));
            }
        }
        if self.finite && o.finite {
            let tail = self.depth.max(o.depth);
            for j in depth..tail {
                if self.digit(j) != o.digit(j) {
                    return Ok(BDistance::Exact(j));
                }
            }
            return Ok(BDistance::Zero);
        }
        Ok(BDistance::AtMost(depth))
    }

    /// Σ_{j<0} M^j e_j as an element with A-exponent −j.
    pub fn frac_part(&self) -> Result<ModuleElement> {
        if self.depth < 0 && !self.finite {
            return Err(Error::InsufficientDepth { needed: 0, have: self.depth });
        }
        let coeffs = self.coeffs().into_iter().filter(|(j, _)| *j < 0).map(|(j, v)| (-j, v));
        Ok(ModuleElement::from_terms(self.ctx.n, coeffs))
    }

    pub fn frac_coeffs(&self) -> BTreeMap<i64, Vec<BigInt>> {
        self.coeffs().into_iter().filter(|(j, _)| *j < 0).collect()
    }

    /// Digits from position 0 on.
    pub fn int_part(&self) -> Self {
        if self.low >= 0 {
            return self.clone();
        }
        let zero = self.ctx.zero_digit();
        let skip = (-self.low) as usize;
        let rest: Vec<u32> = self.digits.iter().skip(skip).copied().collect();
        match rest.iter().position(|&d| d != zero) {
            Some(s) => TruncatedBAdic { ctx: self.ctx.clone(), low: s as i64, digits: rest[s..].to_vec(), depth: self.depth, finite: self.finite },
            None => TruncatedBAdic { ctx: self.ctx.clone(), low: self.depth, digits: Vec::new(), depth: self.depth, finite: self.finite },
        }
    }

    /// Σ_j idx(e_j) b^{-(j-ν+1)}.
    pub fn embed_real(&self) -> f64 {
        let b = self.ctx.b.to_f64().unwrap_or(f64::INFINITY);
        let mut acc = 0.0;
        let mut w = 1.0 / b;
        for &d in &self.digits {
            acc += d as f64 * w;
            w /= b;
            if w == 0.0 {
                break;
            }
        }
        acc
    }

    /// "ν=<int>;d=<v1>|<v2>|…", zero marker "ν=inf;d=".
    pub fn format(&self) -> String {
        if self.digits.is_empty() {
            return "ν=inf;d=".into();
        }
        let body: Vec<String> = self
            .digits
            .iter()
            .map(|&d| self.ctx.digit(d).iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","))
            .collect();
        format!("ν={};d={}", self.low, body.join("|"))
    }

    /// Inverse of `format`. The zero marker takes `zero_depth`.
    pub fn parse(ctx: &Arc<BAdicContext>, s: &str, zero_depth: i64) -> Result<Self> {
        let s = s.trim();
        let rest = s.strip_prefix("ν=").ok_or_else(|| Error::parse("badic", "expected 'ν='"))?;
        let (nu, digits) = rest.split_once(";d=").ok_or_else(|| Error::parse("badic", "expected ';d='"))?;
        if nu == "inf" {
            if !digits.is_empty() {
                return Err(Error::parse("badic", "zero marker with digits"));
            }
            return Ok(Self::zero(ctx, zero_depth).with_finite(false));
        }
        let low: i64 = nu.parse().map_err(|_| Error::parse("badic", format!("bad valuation '{nu}'")))?;
        let mut idx = Vec::new();
        for (i, part) in digits.split('|').enumerate() {
            let v = part
                .split(',')
                .map(|x| x.trim().parse::<BigInt>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::parse(format!("badic digit {i}"), format!("bad digit '{part}'")))?;
            if v.len() != ctx.n {
                return Err(Error::DimensionMismatch { expected: ctx.n, found: v.len() });
            }
            let d = ctx
                .residues
                .representatives
                .iter()
                .position(|r| *r == v)
                .ok_or_else(|| Error::parse(format!("badic digit {i}"), format!("digit '{part}' is not in the residue system")))?;
            idx.push(d as u32);
        }
        if idx.first() == Some(&ctx.zero_digit()) {
            return Err(Error::parse("badic", "leading digit must be nonzero"));
        }
        Self::from_digits(ctx, low, &idx, false)
    }
}

impl fmt::Display for TruncatedBAdic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.format())
    }
}

/// Exact B-adic valuation of y ∈ Zⁿ(B); None for y = 0.
pub fn valuation(ctx: &Arc<BAdicContext>, y: &ModuleElement) -> Option<i64> {
    let coeffs: BTreeMap<i64, Vec<BigInt>> = y.terms().iter().map(|(j, z)| (-*j, z.clone())).collect();
    if is_badic_zero(ctx, &ctx.evaluate(&coeffs)) {
        return None;
    }
    let mut carry = Carry::new(ctx, coeffs, 0);
    let zero = ctx.zero_digit();
    loop {
        let p = carry.next_nonzero_position().expect("nonzero value has a nonzero digit");
        while carry.position() < p {
            carry.next_digit();
        }
        if carry.next_digit() != zero {
            return Some(p);
        }
    }
}

/// Memoized carry_of on small coefficient vectors.
pub type CarryMemo = HashMap<Vec<i64>, (u32, Vec<(i64, Vec<i64>)>)>;

/// carry_of for i64 vectors, cached in `memo`.
pub fn small_carry<'m>(ctx: &BAdicContext, memo: &'m mut CarryMemo, v: &[i64]) -> Result<&'m (u32, Vec<(i64, Vec<i64>)>)> {
    if !memo.contains_key(v) {
        let big: Vec<BigInt> = v.iter().map(|&x| BigInt::from(x)).collect();
        let (idx, carries) = ctx.carry_of(&big);
        let small = carries
            .into_iter()
            .map(|(o, u)| Ok((o, u.iter().map(|x| x.to_i64().ok_or_else(small_overflow)).collect::<Result<Vec<_>>>()?)))
            .collect::<Result<Vec<_>>>()?;
        memo.insert(v.to_vec(), (idx, small));
    }
    Ok(&memo[v])
}

fn small_overflow() -> Error {
    Error::Precondition("carry vector exceeds the 64-bit range".into())
}

/// v maps to 0 in the completion: the primitive integer minimal polynomial of M on v
/// has constant term ±1, so v lies in every M^p-multiple of the module.
pub fn is_badic_zero(ctx: &BAdicContext, v: &[BigRational]) -> bool {
    let mu = vector_min_poly(&ctx.matrix, v).primitive_part();
    mu.coeff(0).abs().is_one()
}

/// b^{-ν} as a rational, 0 for ν = ∞.
pub fn valuation_norm(b: &BigInt, nu: Option<i64>) -> BigRational {
    match nu {
        None => BigRational::zero(),
        Some(v) => BDistance::Exact(v).upper(b),
    }
}
