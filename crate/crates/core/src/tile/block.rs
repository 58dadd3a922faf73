use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use rayon::prelude::*;

use crate::badic::{small_carry, BAdicContext, CarryMemo};
use crate::error::{Error, Result};
use crate::zmodule::{DigitSystem, ModuleElement};

pub const DEFAULT_CAP: usize = 1_000_000;

/// B-adic digit window [lo, hi) recorded for every element of a block.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SignatureWindow {
    pub lo: i64,
    pub hi: i64,
}

impl SignatureWindow {
    pub fn width(&self) -> usize {
        (self.hi - self.lo).max(0) as usize
    }
}

/// D_k = {d₀ + A d₁ + … + A^{k-1} d_{k-1}}. Element i has digit string with
/// d_j = (i / a^j) mod a, so d_{k-1} is the most significant.
#[derive(Clone, Debug)]
pub struct DigitBlock {
    pub k: usize,
    pub n: usize,
    /// Number of digits a.
    pub base_size: usize,
    pub distinct: bool,
    /// Two digit strings with equal value.
    pub duplicate: Option<(usize, usize)>,
    /// Values are numerators over m^exponent.
    pub m: i128,
    pub exponent: u32,
    numerators: Vec<i128>,
    pub window: Option<SignatureWindow>,
    signatures: Vec<u32>,
    finite: Vec<bool>,
    digits: Vec<ModuleElement>,
}

impl DigitBlock {
    pub fn len(&self) -> usize {
        if self.n == 0 {
            0
        } else {
            self.numerators.len() / self.n
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn numerator(&self, i: usize) -> &[i128] {
        &self.numerators[i * self.n..(i + 1) * self.n]
    }

    pub fn denominator(&self) -> BigInt {
        num_traits::pow(BigInt::from(self.m), self.exponent as usize)
    }

    pub fn value(&self, i: usize) -> Vec<BigRational> {
        let d = self.denominator();
        self.numerator(i).iter().map(|&x| BigRational::new(BigInt::from(x), d.clone())).collect()
    }

    pub fn value_f64(&self, i: usize) -> Vec<f64> {
        let d = (self.m as f64).powi(self.exponent as i32);
        self.numerator(i).iter().map(|&x| x as f64 / d).collect()
    }

    pub fn digit_string(&self, i: usize) -> Vec<usize> {
        let mut r = i;
        (0..self.k)
            .map(|_| {
                let d = r % self.base_size;
                r /= self.base_size;
                d
            })
            .collect()
    }

    pub fn index_of(&self, digits: &[usize]) -> usize {
        digits.iter().rev().fold(0, |acc, &d| acc * self.base_size + d)
    }

    /// Σ A^j d_j as a module element.
    pub fn element(&self, i: usize) -> ModuleElement {
        self.digit_string(i)
            .iter()
            .enumerate()
            .fold(ModuleElement::zero(self.n), |acc, (j, &d)| acc.add(&self.digits[d].shift(j as i64)))
    }

    /// Digit indices of element i at the window positions.
    pub fn signature(&self, i: usize) -> &[u32] {
        let w = self.window.map_or(0, |w| w.width());
        &self.signatures[i * w..(i + 1) * w]
    }

    /// No carries remain past the window.
    pub fn is_finite(&self, i: usize) -> bool {
        self.finite[i]
    }
}

/// Digit data prepared for the enumeration.
struct Prepared {
    n: usize,
    m: i128,
    /// m·A, row major.
    ma: Vec<i128>,
    /// max A-exponent among digit terms.
    h: u32,
    /// m^h · value(d).
    dnum: Vec<Vec<i128>>,
    /// (A-exponent, coefficient) terms of each digit.
    terms: Vec<Vec<(i64, Vec<i64>)>>,
}

fn to_i128(x: &BigInt) -> Result<i128> {
    x.to_i128().ok_or_else(|| overflow())
}

fn overflow() -> Error {
    Error::Precondition("digit block values exceed the 128-bit range".into())
}

impl Prepared {
    fn new(system: &DigitSystem) -> Result<Self> {
        let base = system.base();
        let n = base.n;
        let m = to_i128(&base.m)?;
        let ma_rat = base.a.scale(&BigRational::from_integer(base.m.clone()));
        let ma = ma_rat.data().iter().map(|x| to_i128(&x.to_integer())).collect::<Result<Vec<_>>>()?;
        let h = system.digits().iter().filter_map(|d| d.max_exp()).max().unwrap_or(0).max(0) as u32;
        let scale = BigRational::from_integer(num_traits::pow(base.m.clone(), h as usize));
        let dnum = system
            .digit_values()
            .iter()
            .map(|v| v.iter().map(|x| x * &scale).map(|x| if x.is_integer() { to_i128(&x.to_integer()) } else { Err(Error::invariant("digit denominator exceeds m^h")) }).collect())
            .collect::<Result<Vec<Vec<i128>>>>()?;
        let terms = system
            .digits()
            .iter()
            .map(|d| {
                d.terms()
                    .iter()
                    .map(|(j, z)| Ok((*j, z.iter().map(|x| x.to_i64().ok_or_else(overflow)).collect::<Result<Vec<_>>>()?)))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Prepared { n, m, ma, h, dnum, terms })
    }

    fn horner(&self, acc: &[i128], d: usize, mpow: i128, first: bool) -> Result<Vec<i128>> {
        let n = self.n;
        let mut out = vec![0i128; n];
        for r in 0..n {
            let mut s = self.dnum[d][r].checked_mul(mpow).ok_or_else(overflow)?;
            if !first {
                for c in 0..n {
                    let t = self.ma[r * n + c].checked_mul(acc[c]).ok_or_else(overflow)?;
                    s = s.checked_add(t).ok_or_else(overflow)?;
                }
            }
            out[r] = s;
        }
        Ok(out)
    }
}

/// Incremental B-adic digit emission over i64 coefficient vectors.
#[derive(Clone)]
struct SigState {
    pos: i64,
    pending: BTreeMap<i64, Vec<i64>>,
}

impl SigState {
    fn add(&mut self, p: i64, z: &[i64]) -> Result<()> {
        let slot = self.pending.entry(p).or_insert_with(|| vec![0; z.len()]);
        for (s, x) in slot.iter_mut().zip(z) {
            *s = s.checked_add(*x).ok_or_else(overflow)?;
        }
        if slot.iter().all(|x| *x == 0) {
            self.pending.remove(&p);
        }
        Ok(())
    }

    fn emit(&mut self, ctx: &BAdicContext, memo: &mut CarryMemo, zero: u32) -> Result<u32> {
        let p = self.pos;
        self.pos += 1;
        let Some(v) = self.pending.remove(&p) else { return Ok(zero) };
        let (idx, carries) = small_carry(ctx, memo, &v)?.clone();
        for (o, u) in &carries {
            self.add(p + o, u)?;
        }
        Ok(idx)
    }
}

struct Leaf {
    num: Vec<i128>,
    sig: Vec<u32>,
    finite: bool,
}

struct Walker<'a> {
    prep: &'a Prepared,
    k: usize,
    sig: Option<(&'a BAdicContext, SignatureWindow)>,
    zero: u32,
    mpows: Vec<i128>,
}

impl Walker<'_> {
    /// Visit digit d_j given the accumulated state for d_{k-1} … d_{j+1}.
    fn walk(&self, j: usize, d: usize, acc: &[i128], state: Option<(SigState, Vec<u32>)>, memo: &mut CarryMemo, out: &mut Vec<Leaf>) -> Result<()> {
        let first = j + 1 == self.k;
        let e_shift = (self.k - 1 - j) as usize;
        let num = self.prep.horner(acc, d, self.mpows[e_shift], first)?;
        let state = match (state, self.sig) {
            (Some((mut st, mut sig)), Some((ctx, win))) => {
                for (t, z) in &self.prep.terms[d] {
                    st.add(-(j as i64) - t, z)?;
                }
                let fin = -(j as i64) - self.prep.h as i64;
                while st.pos <= fin {
                    let p = st.pos;
                    let digit = st.emit(ctx, memo, self.zero)?;
                    if p >= win.lo && p < win.hi {
                        sig.push(digit);
                    }
                }
                Some((st, sig))
            }
            _ => None,
        };
        if j == 0 {
            let (sig, finite) = match (state, self.sig) {
                (Some((mut st, mut sig)), Some((ctx, win))) => {
                    while st.pos < win.hi {
                        let p = st.pos;
                        let digit = st.emit(ctx, memo, self.zero)?;
                        if p >= win.lo {
                            sig.push(digit);
                        }
                    }
                    (sig, st.pending.is_empty())
                }
                _ => (Vec::new(), true),
            };
            out.push(Leaf { num, sig, finite });
            return Ok(());
        }
        for nd in 0..self.prep.dnum.len() {
            self.walk(j - 1, nd, &num, state.clone(), memo, out)?;
        }
        Ok(())
    }
}

/// D_k with optional B-adic digits of each element in `window`.
pub fn digit_block_with(system: &DigitSystem, k: usize, cap: usize, window: Option<SignatureWindow>, ctx: Option<&Arc<BAdicContext>>) -> Result<DigitBlock> {
    let a = system.len();
    let n = system.base().n;
    let size = (a as u128).checked_pow(k as u32).filter(|&s| s <= cap as u128);
    let Some(size) = size else {
        return Err(Error::CapExceeded { size: format!("{a}^{k}"), cap });
    };
    let prep = Prepared::new(system)?;
    let window = window.filter(|_| ctx.is_some());
    let mut block = DigitBlock {
        k,
        n,
        base_size: a,
        distinct: true,
        duplicate: None,
        m: prep.m,
        exponent: prep.h + k.saturating_sub(1) as u32,
        numerators: Vec::with_capacity(size as usize * n),
        window,
        signatures: Vec::new(),
        finite: Vec::with_capacity(size as usize),
        digits: system.digits().to_vec(),
    };
    if k == 0 {
        block.numerators = vec![0; n];
        block.exponent = 0;
        block.finite.push(true);
        if let (Some(w), Some(c)) = (window, ctx) {
            block.signatures = vec![c.zero_digit(); w.width()];
        }
        return Ok(block);
    }
    let mut mpows = vec![1i128; k];
    for i in 1..k {
        mpows[i] = mpows[i - 1].checked_mul(prep.m).ok_or_else(overflow)?;
    }
    let sig = match (window, ctx) {
        (Some(w), Some(c)) => Some((c.as_ref(), w)),
        _ => None,
    };
    let zero = ctx.map_or(0, |c| c.zero_digit());
    let walker = Walker { prep: &prep, k, sig, zero, mpows };
    let start = sig.map(|(_, w)| w.lo.min(-(k as i64 - 1) - prep.h as i64));
    let subtrees: Vec<Result<Vec<Leaf>>> = (0..a)
        .into_par_iter()
        .map(|d| {
            let mut memo = CarryMemo::new();
            let mut out = Vec::new();
            let state = start.map(|s| (SigState { pos: s, pending: BTreeMap::new() }, Vec::new()));
            walker.walk(k - 1, d, &vec![0; n], state, &mut memo, &mut out)?;
            Ok(out)
        })
        .collect();
    // d_{k-1} is the most significant digit, so subtree order is index order
    for part in subtrees {
        for leaf in part? {
            block.numerators.extend_from_slice(&leaf.num);
            block.signatures.extend_from_slice(&leaf.sig);
            block.finite.push(leaf.finite);
        }
    }
    let mut order: Vec<usize> = (0..block.len()).collect();
    order.par_sort_unstable_by(|&x, &y| block.numerator(x).cmp(block.numerator(y)).then(x.cmp(&y)));
    for w in order.windows(2) {
        if block.numerator(w[0]) == block.numerator(w[1]) {
            block.distinct = false;
            block.duplicate = Some((w[0], w[1]));
            break;
        }
    }
    Ok(block)
}

pub fn digit_block(system: &DigitSystem, k: usize, cap: usize) -> Result<DigitBlock> {
    digit_block_with(system, k, cap, None, None)
}

/// Exact-value membership index for a block.
pub fn value_index(block: &DigitBlock) -> HashMap<Vec<i128>, usize> {
    (0..block.len()).map(|i| (block.numerator(i).to_vec(), i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::badic::TruncatedBAdic;
    use crate::exactq::scalar::rat;
    use crate::exactq::Matrix;
    use crate::zmodule::Base;

    fn example(lead: i64) -> DigitSystem {
        let base = Arc::new(Base::new(Matrix::from_rows(vec![vec![rat(2, 1), rat(1, 1)], vec![rat(0, 1), rat(5, 3)]])).unwrap());
        let digits = [0, lead]
            .iter()
            .flat_map(|&f| [0, 1, 2, 3, 9].map(|s| ModuleElement::from_i64(&[f, s])))
            .collect();
        DigitSystem::new(base, digits).unwrap()
    }

    #[test]
    fn sizes_and_distinctness() {
        for lead in [1, 2] {
            let sys = example(lead);
            assert_eq!(digit_block(&sys, 0, 10).unwrap().len(), 1);
            for k in 1..=3 {
                let b = digit_block(&sys, k, DEFAULT_CAP).unwrap();
                assert_eq!(b.len(), 10usize.pow(k as u32));
                assert!(b.distinct, "lead {lead} k {k}");
            }
        }
        assert!(matches!(digit_block(&example(1), 3, 999), Err(Error::CapExceeded { .. })));
    }

    #[test]
    fn values_match_module_elements() {
        let sys = example(2);
        let b = digit_block(&sys, 3, DEFAULT_CAP).unwrap();
        let base = sys.base();
        for i in [0, 1, 57, 404, 999] {
            assert_eq!(b.value(i), base.value(&b.element(i)));
            assert_eq!(b.index_of(&b.digit_string(i)), i);
            assert_eq!(b.element(i), sys.evaluate_digits(&b.digit_string(i)));
        }
    }

    #[test]
    fn duplicates_detected() {
        let base = Arc::new(Base::new(Matrix::from_rows(vec![vec![rat(3, 2)]])).unwrap());
        // 0 + A·2 = 3 = 3 + A·0
        let sys = DigitSystem::unchecked(base, [0, 2, 3].iter().map(|&d| ModuleElement::from_i64(&[d])).collect()).unwrap();
        let b = digit_block(&sys, 2, 100).unwrap();
        assert!(!b.distinct);
        let (x, y) = b.duplicate.unwrap();
        assert_eq!(b.value(x), b.value(y));
    }

    #[test]
    fn signatures_agree_with_normalize() {
        let sys = example(2);
        let ctx = BAdicContext::from_base(sys.base());
        let w = SignatureWindow { lo: -2, hi: 6 };
        let b = digit_block_with(&sys, 3, DEFAULT_CAP, Some(w), Some(&ctx)).unwrap();
        for i in [0, 3, 10, 123, 999] {
            let t = TruncatedBAdic::normalize(&ctx, &b.element(i), w.hi);
            let expect: Vec<u32> = (w.lo..w.hi).map(|j| t.digit(j).unwrap_or(ctx.zero_digit())).collect();
            assert_eq!(b.signature(i), &expect[..], "element {i}");
        }
    }

    #[test]
    fn nesting() {
        let sys = example(1);
        let d2 = digit_block(&sys, 2, DEFAULT_CAP).unwrap();
        let d1 = digit_block(&sys, 1, DEFAULT_CAP).unwrap();
        let d3 = digit_block(&sys, 3, DEFAULT_CAP).unwrap();
        let idx = value_index(&d3);
        for i in 0..d2.len() {
            for j in 0..d1.len() {
                let e = d2.element(i).add(&d1.element(j).shift(2));
                let v = sys.base().value(&e);
                let scaled: Vec<i128> = v.iter().map(|x| (x * BigRational::from_integer(d3.denominator())).to_integer().to_i128().unwrap()).collect();
                assert_eq!(idx[&scaled], i + j * 100);
            }
        }
    }
}
