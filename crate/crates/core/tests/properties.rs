use std::sync::Arc;

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use proptest::prelude::*;

use tilekit::badic::{BAdicContext, BDistance, TruncatedBAdic};
use tilekit::chars::{build_dual_context, multiplicativity_check, phase, phase_dual_form, CharacterIndex, DualContext};
use tilekit::exactq::scalar::rat;
use tilekit::exactq::{is_expanding, IntLattice, Matrix};
use tilekit::frobenius::quotient_counts;
use tilekit::space::{dist, PointKA};
use tilekit::zmodule::{stabilize_by_plateau, Base, DigitSystem, ModuleElement};
use tilekit::RationalMatrix;

fn example() -> Base {
    Base::new(Matrix::from_rows(vec![vec![rat(2, 1), rat(1, 1)], vec![rat(0, 1), rat(5, 3)]])).unwrap()
}

fn one_dim() -> Base {
    Base::new(Matrix::from_rows(vec![vec![rat(3, 2)]])).unwrap()
}

fn rational() -> impl Strategy<Value = BigRational> {
    (-6i64..=6, 1i64..=4).prop_map(|(p, q)| rat(p, q))
}

fn square(n: usize) -> impl Strategy<Value = RationalMatrix> {
    proptest::collection::vec(rational(), n * n).prop_map(move |v| Matrix::from_rows(v.chunks(n).map(|r| r.to_vec()).collect()))
}

fn any_square() -> impl Strategy<Value = RationalMatrix> {
    prop_oneof![square(1), square(2), square(3)]
}

/// Expanding matrices: diagonal of modulus > 1 plus a small perturbation, rejected unless expanding.
fn expanding() -> impl Strategy<Value = RationalMatrix> {
    let diag = prop_oneof![Just(rat(3, 2)), Just(rat(-3, 2)), Just(rat(2, 1)), Just(rat(5, 3)), Just(rat(-7, 3)), Just(rat(5, 2)), Just(rat(3, 1)), Just(rat(4, 3))];
    let off = (-1i64..=1, 1i64..=4).prop_map(|(p, q)| rat(p, q));
    (1usize..=3)
        .prop_flat_map(move |n| (Just(n), proptest::collection::vec(diag.clone(), n), proptest::collection::vec(off.clone(), n * n)))
        .prop_map(|(n, d, o)| {
            let mut m = Matrix::from_rows(o.chunks(n).map(|r| r.to_vec()).collect());
            for (i, x) in d.into_iter().enumerate() {
                m[(i, i)] = x;
            }
            m
        })
        .prop_filter("expanding", |m| is_expanding(m).unwrap_or(false))
}

fn element(n: usize) -> impl Strategy<Value = ModuleElement> {
    proptest::collection::vec((0i64..=4, proptest::collection::vec(-20i64..=20, n)), 0..4)
        .prop_map(move |t| ModuleElement::from_terms(n, t.into_iter().map(|(j, z)| (j, z.into_iter().map(BigInt::from).collect()))))
}

fn badic(ctx: &Arc<BAdicContext>, low: i64, digits: &[u32]) -> TruncatedBAdic {
    let b = ctx.digit_count() as u32;
    let d: Vec<u32> = digits.iter().map(|x| x % b).collect();
    TruncatedBAdic::from_digits(ctx, low, &d, true).unwrap()
}

fn upper(d: &BDistance, b: &BigInt) -> BigRational {
    d.upper(b)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn expanding_matches_eigenvalues(m in any_square()) {
        let n = m.rows();
        let f = m.to_f64();
        let dm = DMatrix::from_fn(n, n, |i, j| f[(i, j)]);
        let moduli: Vec<f64> = dm.complex_eigenvalues().iter().map(|z| z.norm()).collect();
        let min = moduli.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assume!((min - 1.0).abs() > 1e-6);
        match is_expanding(&m) {
            Ok(e) => prop_assert_eq!(e, min > 1.0),
            Err(_) => prop_assert!(min < 1e-6),
        }
    }

    #[test]
    fn dual_is_an_involution(g in proptest::collection::vec(-9i64..=9, 9), scale in 1i64..=6) {
        let gens: Vec<Vec<BigInt>> = g.chunks(3).map(|r| r.iter().map(|&x| BigInt::from(x)).collect()).collect();
        let l = IntLattice::scaled(3, BigInt::from(scale), &gens);
        prop_assume!(l.is_full_rank());
        let dd = l.dual().unwrap().dual().unwrap();
        prop_assert!(dd.contains_lattice(&l) && l.contains_lattice(&dd));
        for x in l.dual().unwrap().rational_basis() {
            for z in l.rational_basis() {
                let p: BigRational = x.iter().zip(&z).map(|(a, b)| a * b).sum();
                prop_assert!(p.is_integer());
            }
        }
    }

    #[test]
    fn ultrametric_and_shift(x in (-4i64..4, proptest::collection::vec(0u32..9, 0..8)),
                             y in (-4i64..4, proptest::collection::vec(0u32..9, 0..8)),
                             z in (-4i64..4, proptest::collection::vec(0u32..9, 0..8))) {
        let ctx = BAdicContext::from_base(&example());
        let (x, y, z) = (badic(&ctx, x.0, &x.1), badic(&ctx, y.0, &y.1), badic(&ctx, z.0, &z.1));
        let b = ctx.b.clone();
        let (xy, yz, xz) = (x.metric(&y).unwrap(), y.metric(&z).unwrap(), x.metric(&z).unwrap());
        prop_assert!(xy.is_exact() && yz.is_exact() && xz.is_exact());
        prop_assert!(upper(&xz, &b) <= upper(&xy, &b).max(upper(&yz, &b)));
        prop_assert_eq!(xy.clone(), y.metric(&x).unwrap());
        let shifted = x.shift(1).metric(&y.shift(1)).unwrap();
        prop_assert_eq!(upper(&shifted, &b), upper(&xy, &b) / BigRational::from_integer(b.clone()));
    }

    #[test]
    fn normalize_round_trips(e in element(2), depth in 0i64..10) {
        let ctx = BAdicContext::from_base(&example());
        let t = TruncatedBAdic::normalize(&ctx, &e, depth);
        let back = TruncatedBAdic::parse(&ctx, &t.format(), depth).unwrap();
        prop_assert_eq!(back.format(), t.format());
        prop_assert_eq!(back, t);
    }

    #[test]
    fn metric_axioms(e1 in element(2), e2 in element(2), e3 in element(2)) {
        let ctx = BAdicContext::from_base(&example());
        let (p, q, r) = (PointKA::phi(&ctx, &e1, 16), PointKA::phi(&ctx, &e2, 16), PointKA::phi(&ctx, &e3, 16));
        let (pq, qr, pr) = (dist(&p, &q).unwrap(), dist(&q, &r).unwrap(), dist(&p, &r).unwrap());
        prop_assert_eq!(pq.clone(), dist(&q, &p).unwrap());
        prop_assert!(dist(&p, &p).unwrap().real_sq.is_zero());
        if pq.is_exact() && qr.is_exact() && pr.is_exact() {
            prop_assert!(pr.to_f64() <= (pq.to_f64() + qr.to_f64()) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn expand_step_identity(e in element(2)) {
        let base = Arc::new(example());
        let digits = [0, 1].iter().flat_map(|&f| [0, 1, 2, 3, 9].map(|s| ModuleElement::from_i64(&[f, s]))).collect();
        let sys = DigitSystem::new(base.clone(), digits).unwrap();
        let steps = sys.expand_step(&e).unwrap();
        prop_assert_eq!(steps.len(), 1);
        let (d, rest) = &steps[0];
        let lhs = base.value(&e);
        let rhs: Vec<BigRational> = base.value(&sys.digits()[*d]).iter().zip(base.a.mul_vec(&base.value(rest))).map(|(x, y)| x + y).collect();
        prop_assert_eq!(lhs, rhs);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn counts_match_stabilization(a in expanding()) {
        let n = a.rows();
        let counts = quotient_counts(&a).unwrap();
        let b = a.inverse().unwrap();
        let zn = IntLattice::standard(n);
        let (_, ia) = stabilize_by_plateau(&zn, &a, n + 1, 64).unwrap();
        let (_, ib) = stabilize_by_plateau(&zn, &b, n + 1, 64).unwrap();
        prop_assert_eq!(&counts.a, &ia);
        prop_assert_eq!(&counts.b, &ib);
        prop_assert_eq!(BigRational::new(ia, ib), a.det().abs());
    }
}

fn chars_case(dc: &DualContext, s: (i64, Vec<u32>), y: (i64, Vec<u32>), y2: (i64, Vec<u32>)) -> Result<(), TestCaseError> {
    let sd: Vec<u32> = s.1.iter().map(|x| x % dc.e_star.len() as u32).collect();
    let s = CharacterIndex::from_digits(dc, s.0, &sd).unwrap();
    let y = badic(&dc.primal, y.0, &y.1).truncate(8).unwrap();
    let y2 = badic(&dc.primal, y2.0, &y2.1).truncate(8).unwrap();
    prop_assert_eq!(phase(dc, &s, &y).unwrap(), phase_dual_form(dc, &s, &y).unwrap());
    multiplicativity_check(dc, &s, &y, &y2).unwrap();
    let nonneg = CharacterIndex::from_digits(dc, s.s.valuation().unwrap_or(0).max(0), &sd).unwrap();
    prop_assert!(phase(dc, &nonneg, &y.int_part()).unwrap().is_zero());
    Ok(())
}

fn digits_at() -> impl Strategy<Value = (i64, Vec<u32>)> {
    (-4i64..=0, proptest::collection::vec(0u32..30, 0..6))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn character_identities_1d(s in digits_at(), y in digits_at(), y2 in digits_at()) {
        let dc = build_dual_context(&one_dim()).unwrap();
        chars_case(&dc, s, y, y2)?;
    }

    #[test]
    fn character_identities_2d(s in digits_at(), y in digits_at(), y2 in digits_at()) {
        let dc = build_dual_context(&example()).unwrap();
        chars_case(&dc, s, y, y2)?;
    }
}

#[test]
fn zero_character() {
    let dc = build_dual_context(&example()).unwrap();
    let y = badic(&dc.primal, -3, &[1, 2, 0, 1]);
    assert!(phase(&dc, &CharacterIndex::zero(&dc), &y).unwrap().is_zero());
}
