use std::collections::{HashMap, HashSet};

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::Serialize;

use super::block::{digit_block, digit_block_with, DigitBlock, SignatureWindow};
use crate::badic::{BAdicContext, BDistance};
use crate::error::{Error, Result};
use crate::exactq::scalar::format_rational;
use crate::zmodule::DigitSystem;

/// Exact 𝐝 of a nonzero difference: squared real norm and the B-adic part.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Separation {
    pub level: usize,
    pub value: f64,
    /// max(‖δ‖², d_B(δ)²) as "p/q"; an upper bound when `exact` is false.
    pub squared: String,
    pub exact: bool,
    pub witness: (Vec<usize>, Vec<usize>),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail { level: usize, witness: (Vec<usize>, Vec<usize>) },
    Inconclusive,
}

#[derive(Clone, Debug, Serialize)]
pub struct MeasureEvidence {
    pub checked_k: usize,
    pub all_distinct: bool,
    pub min_separation: Option<Separation>,
    pub per_level: Vec<Option<Separation>>,
    #[serde(flatten)]
    pub verdict: Verdict,
}

/// Extra B-adic positions recorded past the block's top position for the separation.
const SEP_DIGITS: i64 = 24;

fn squared_sep(block: &DigitBlock, i: usize, j: usize, b: &BigInt) -> (BigRational, bool) {
    let den = block.denominator();
    let den2 = BigRational::from_integer(&den * &den);
    let real: BigInt = block
        .numerator(i)
        .iter()
        .zip(block.numerator(j))
        .map(|(x, y)| {
            let d = BigInt::from(*x) - BigInt::from(*y);
            &d * &d
        })
        .sum();
    let real = BigRational::from_integer(real) / den2;
    let w = block.window.expect("separation needs a signature window");
    let (si, sj) = (block.signature(i), block.signature(j));
    let first = si.iter().zip(sj).position(|(x, y)| x != y);
    let (bd, exact) = match first {
        Some(p) => (BDistance::Exact(w.lo + p as i64), true),
        None if block.is_finite(i) && block.is_finite(j) => (BDistance::Zero, true),
        None => (BDistance::AtMost(w.hi), false),
    };
    let bu = bd.upper(b);
    let bsq = &bu * &bu;
    if real >= bsq {
        (real, true)
    } else {
        (bsq, exact)
    }
}

/// Minimum 𝐝 over φ(D_k − D_k) \ {0}, searching only pairs that can beat the running bound.
fn min_separation(block: &DigitBlock, b: &BigInt) -> Option<(BigRational, bool, usize, usize)> {
    let len = block.len();
    if len < 2 {
        return None;
    }
    let n = block.n;
    let vals: Vec<Vec<f64>> = (0..len).map(|i| block.value_f64(i)).collect();
    let mut order: Vec<usize> = (0..len).collect();
    order.sort_by(|&x, &y| vals[x][0].total_cmp(&vals[y][0]));
    let mut best: Option<(BigRational, bool, usize, usize)> = None;
    for w in order.windows(2).take(64) {
        let (s, e) = squared_sep(block, w[0], w[1], b);
        if best.as_ref().is_none_or(|bb| s < bb.0) {
            best = Some((s, e, w[0], w[1]));
        }
    }
    let bound = crate::exactq::scalar::rational_to_f64(&best.as_ref().unwrap().0).sqrt() * (1.0 + 1e-9) + 1e-12;
    let cell = bound.max(1e-9);
    let key = |v: &[f64]| -> Vec<i64> { v.iter().map(|x| (x / cell).floor() as i64).collect() };
    let mut grid: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
    for (i, v) in vals.iter().enumerate() {
        grid.entry(key(v)).or_default().push(i);
    }
    let offsets: Vec<Vec<i64>> = (0..3usize.pow(n as u32))
        .map(|mut c| {
            (0..n)
                .map(|_| {
                    let o = (c % 3) as i64 - 1;
                    c /= 3;
                    o
                })
                .collect()
        })
        .collect();
    for (i, v) in vals.iter().enumerate() {
        let kv = key(v);
        for o in &offsets {
            let nk: Vec<i64> = kv.iter().zip(o).map(|(a, b)| a + b).collect();
            let Some(cands) = grid.get(&nk) else { continue };
            for &j in cands {
                if j <= i {
                    continue;
                }
                let rd: f64 = v.iter().zip(&vals[j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                if rd > bound {
                    continue;
                }
                let (s, e) = squared_sep(block, i, j, b);
                let bb = best.as_ref().unwrap();
                if s < bb.0 || (s == bb.0 && (i, j) < (bb.2, bb.3)) {
                    best = Some((s, e, i, j));
                }
            }
        }
    }
    best
}

pub fn measure_evidence(system: &DigitSystem, k_max: usize, cap: usize) -> Result<MeasureEvidence> {
    if k_max == 0 {
        return Err(Error::Precondition("k_max must be at least 1".into()));
    }
    let base = system.base();
    base.require_solenoid()?;
    let ctx = BAdicContext::from_base(base);
    let h = system.digits().iter().filter_map(|d| d.max_exp()).max().unwrap_or(0).max(0);
    let mut per_level = Vec::new();
    let mut cumulative: Option<(BigRational, Separation)> = None;
    let mut last_two: Vec<Option<BigRational>> = Vec::new();
    for k in 1..=k_max {
        let lo = -(k as i64 - 1) - h;
        let window = SignatureWindow { lo, hi: SEP_DIGITS };
        let block = digit_block_with(system, k, cap, Some(window), Some(&ctx))?;
        if let Some((x, y)) = block.duplicate {
            return Ok(MeasureEvidence {
                checked_k: k,
                all_distinct: false,
                min_separation: cumulative.map(|c| c.1),
                per_level,
                verdict: Verdict::Fail { level: k, witness: (block.digit_string(x), block.digit_string(y)) },
            });
        }
        let sep = min_separation(&block, &ctx.b).map(|(s, exact, i, j)| {
            let rec = Separation {
                level: k,
                value: crate::exactq::scalar::rational_to_f64(&s).sqrt(),
                squared: format_rational(&s),
                exact,
                witness: (block.digit_string(i), block.digit_string(j)),
            };
            (s, rec)
        });
        if let Some((s, rec)) = &sep {
            if cumulative.as_ref().is_none_or(|c| *s < c.0) {
                cumulative = Some((s.clone(), rec.clone()));
            }
        }
        per_level.push(sep.map(|x| x.1));
        last_two.push(cumulative.as_ref().map(|c| c.0.clone()));
    }
    let stable = last_two.len() >= 2 && last_two[last_two.len() - 1] == last_two[last_two.len() - 2] && last_two[last_two.len() - 1].is_some();
    let exact = cumulative.as_ref().is_some_and(|c| c.1.exact);
    Ok(MeasureEvidence {
        checked_k: k_max,
        all_distinct: true,
        min_separation: cumulative.map(|c| c.1),
        per_level,
        verdict: if stable && exact { Verdict::Pass } else { Verdict::Inconclusive },
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum DeltaStatus {
    Closed,
    Counterexample { first: Vec<String>, second: Vec<String>, sum: Vec<String> },
    Inconclusive { reason: String },
}

#[derive(Clone, Debug, Serialize)]
pub struct DeltaEvidence {
    pub k: usize,
    pub target_level: usize,
    pub window: f64,
    pub differences: usize,
    pub checked_sums: usize,
    #[serde(flatten)]
    pub status: DeltaStatus,
}

/// Finite-level closure test: sums of in-window elements of D_k − D_k against D_{k+2} − D_{k+2}.
pub fn delta_group_evidence(system: &DigitSystem, k: usize, window: f64, cap: usize) -> Result<DeltaEvidence> {
    let small = digit_block(system, k, cap)?;
    let target_level = k + 2;
    let big = match digit_block(system, target_level, cap) {
        Ok(b) => b,
        Err(Error::CapExceeded { size, .. }) => {
            return Ok(DeltaEvidence {
                k,
                target_level,
                window,
                differences: 0,
                checked_sums: 0,
                status: DeltaStatus::Inconclusive { reason: format!("D_{target_level} has {size} elements, above the cap") },
            })
        }
        Err(e) => return Err(e),
    };
    // rescale D_k numerators to the denominator of D_{k+2}
    let lift = num_traits::pow(small.m, (big.exponent - small.exponent) as usize);
    let n = small.n;
    let scale = (small.m as f64).powi(small.exponent as i32);
    let mut diffs: HashSet<Vec<i128>> = HashSet::new();
    for i in 0..small.len() {
        for j in 0..small.len() {
            let d: Vec<i128> = small.numerator(i).iter().zip(small.numerator(j)).map(|(x, y)| (x - y) * lift).collect();
            let norm = small.numerator(i).iter().zip(small.numerator(j)).map(|(x, y)| ((x - y) as f64 / scale).powi(2)).sum::<f64>().sqrt();
            if norm <= window && d.iter().any(|x| *x != 0) {
                diffs.insert(d);
            }
        }
    }
    let mut diffs: Vec<Vec<i128>> = diffs.into_iter().collect();
    diffs.sort();
    let members: HashSet<Vec<i128>> = (0..big.len()).map(|i| big.numerator(i).to_vec()).collect();
    let big_vals: Vec<&[i128]> = (0..big.len()).map(|i| big.numerator(i)).collect();
    let in_delta = |s: &[i128]| -> bool {
        if s.iter().all(|x| *x == 0) {
            return true;
        }
        big_vals.iter().any(|d| {
            let t: Vec<i128> = d.iter().zip(s).map(|(a, b)| a + b).collect();
            members.contains(&t)
        })
    };
    let den = big.denominator();
    let show = |v: &[i128]| -> Vec<String> { v.iter().map(|x| format_rational(&BigRational::new(BigInt::from(*x), den.clone()))).collect() };
    let mut checked = 0;
    for (a, x) in diffs.iter().enumerate() {
        for y in &diffs[a..] {
            let s: Vec<i128> = x.iter().zip(y).map(|(p, q)| p + q).collect();
            checked += 1;
            if !in_delta(&s) {
                return Ok(DeltaEvidence {
                    k,
                    target_level,
                    window,
                    differences: diffs.len(),
                    checked_sums: checked,
                    status: DeltaStatus::Counterexample { first: show(x), second: show(y), sum: show(&s) },
                });
            }
        }
    }
    let _ = n;
    Ok(DeltaEvidence { k, target_level, window, differences: diffs.len(), checked_sums: checked, status: DeltaStatus::Closed })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::exactq::scalar::rat;
    use crate::exactq::Matrix;
    use crate::zmodule::{Base, ModuleElement};

    fn one_dim(digits: &[i64]) -> DigitSystem {
        let base = Arc::new(Base::new(Matrix::from_rows(vec![vec![rat(3, 2)]])).unwrap());
        DigitSystem::unchecked(base, digits.iter().map(|&d| ModuleElement::from_i64(&[d])).collect()).unwrap()
    }

    fn example(lead: i64) -> DigitSystem {
        let base = Arc::new(Base::new(Matrix::from_rows(vec![vec![rat(2, 1), rat(1, 1)], vec![rat(0, 1), rat(5, 3)]])).unwrap());
        let digits = [0, lead]
            .iter()
            .flat_map(|&f| [0, 1, 2, 3, 9].map(|s| ModuleElement::from_i64(&[f, s])))
            .collect();
        DigitSystem::new(base, digits).unwrap()
    }

    fn differences(a: &Matrix<BigRational>, digits: &[Vec<BigRational>], k: usize) -> HashSet<Vec<BigRational>> {
        let mut level: HashSet<Vec<BigRational>> = [vec![rat(0, 1); a.rows()]].into_iter().collect();
        let mut power = Matrix::identity(a.rows());
        for _ in 0..k {
            let mut next = HashSet::new();
            for v in &level {
                for d in digits {
                    for e in digits {
                        let diff: Vec<BigRational> = d.iter().zip(e).map(|(x, y)| x - y).collect();
                        let t = power.mul_vec(&diff);
                        next.insert(v.iter().zip(&t).map(|(x, y)| x + y).collect());
                    }
                }
            }
            level = next;
            power = power.mul(a);
        }
        level
    }

    #[test]
    fn standard_systems_pass() {
        let e = measure_evidence(&one_dim(&[0, 1, 2]), 6, 1_000_000).unwrap();
        assert_eq!(e.verdict, Verdict::Pass);
        assert!(e.all_distinct);
        let sep = e.min_separation.unwrap();
        assert_eq!((sep.squared.as_str(), sep.exact), ("1", true));
        for lead in [1, 2] {
            let e = measure_evidence(&example(lead), 4, 1_000_000).unwrap();
            assert_eq!((e.verdict, e.checked_k), (Verdict::Pass, 4));
        }
    }

    #[test]
    fn duplicates_fail() {
        let e = measure_evidence(&one_dim(&[0, 0, 1]), 3, 1000).unwrap();
        assert!(matches!(e.verdict, Verdict::Fail { level: 1, .. }));
        // 4 + A·4 = 1 + A²·4
        let e = measure_evidence(&one_dim(&[0, 1, 4]), 4, 1000).unwrap();
        assert_eq!(e.verdict, Verdict::Fail { level: 3, witness: (vec![2, 2, 0], vec![1, 0, 2]) });
        assert!(!e.all_distinct);
    }

    #[test]
    fn closure_matches_enumeration() {
        let sys = one_dim(&[0, 1, 2]);
        let e = delta_group_evidence(&sys, 3, 4.0, 1_000_000).unwrap();
        assert_eq!(e.status, DeltaStatus::Closed);
        let a = Matrix::from_rows(vec![vec![rat(3, 2)]]);
        let vals: Vec<Vec<BigRational>> = (0..3).map(|d| vec![rat(d, 1)]).collect();
        let small: Vec<Vec<BigRational>> = differences(&a, &vals, 3).into_iter().filter(|v| v[0] != rat(0, 1) && num_traits::Signed::abs(&v[0]) <= rat(4, 1)).collect();
        let big = differences(&a, &vals, 5);
        assert_eq!(small.len(), e.differences);
        for x in &small {
            for y in &small {
                assert!(big.contains(&vec![&x[0] + &y[0]]));
            }
        }
        let zero = delta_group_evidence(&one_dim(&[0, 0, 0]), 2, 4.0, 1000).unwrap();
        assert_eq!((zero.status, zero.differences), (DeltaStatus::Closed, 0));
    }

    #[test]
    fn nonstandard_counterexample() {
        let sys = example(2);
        let e = delta_group_evidence(&sys, 1, 4.0, 1_000_000).unwrap();
        let DeltaStatus::Counterexample { sum, .. } = e.status else { panic!("{:?}", e.status) };
        assert_eq!(sum, vec!["-4", "-5"]);
        let a = sys.base().a.clone();
        let big = differences(&a, sys.digit_values(), 3);
        assert!(!big.contains(&vec![rat(-4, 1), rat(-5, 1)]));
        assert_eq!(delta_group_evidence(&example(1), 1, 4.0, 1_000_000).unwrap().status, DeltaStatus::Closed);
    }
}
