use std::io::{Read, Write};
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use rayon::prelude::*;

use super::block::{digit_block_with, DigitBlock, SignatureWindow};
use crate::badic::{BAdicContext, TruncatedBAdic};
use crate::error::{Error, Result};
use crate::exactq::scalar::{format_decimal, rat_int};
use crate::space::{MetricContext, PointKA};
use crate::zmodule::DigitSystem;

/// A^{-k} φ(D_k) with a certified Hausdorff bound to the attractor in ℓ.
#[derive(Clone, Debug)]
pub struct PointCloud {
    pub k: usize,
    pub depth: i64,
    pub points: Vec<PointKA>,
    /// max_d ℓ(φ(d), 0) / (1 − κ).
    pub c0: f64,
    pub kappa: f64,
    pub hausdorff_bound: f64,
}

/// C₀ = max_d ℓ(φ(d), 0)/(1 − κ) (upper ends of the ℓ intervals).
pub fn attractor_radius(system: &DigitSystem, metric: &MetricContext, ctx: &Arc<BAdicContext>) -> Result<f64> {
    let zero = PointKA::zero(ctx, 64);
    let mut best: f64 = 0.0;
    for d in system.digits() {
        let p = PointKA::phi(ctx, d, 64);
        best = best.max(metric.ell_dist(&p, &zero)?.hi);
    }
    Ok(best / (1.0 - metric.kappa_f64()))
}

/// B-adic digit window of D_k needed for points of depth `depth`.
pub fn cloud_window(system: &DigitSystem, k: usize, depth: i64) -> SignatureWindow {
    let h = system.digits().iter().filter_map(|d| d.max_exp()).max().unwrap_or(0).max(0);
    let lo = -(k as i64 - 1).max(0) - h;
    SignatureWindow { lo, hi: (depth - k as i64).max(lo) }
}

pub fn point_cloud(system: &DigitSystem, k: usize, depth: i64, cap: usize) -> Result<PointCloud> {
    let base = system.base();
    base.require_solenoid()?;
    let ctx = BAdicContext::from_base(base);
    let window = cloud_window(system, k, depth);
    let block = digit_block_with(system, k, cap, Some(window), Some(&ctx))?;
    let metric = MetricContext::new(base)?;
    let c0 = attractor_radius(system, &metric, &ctx)?;
    let kappa = metric.kappa_f64();
    let points = cloud_points(&block, &ctx, depth)?;
    Ok(PointCloud { k, depth, points, c0, kappa, hausdorff_bound: kappa.powi(k as i32) * c0 })
}

/// A^{-k} φ(d) for every d in the block, which must carry a signature window.
pub fn cloud_points(block: &DigitBlock, ctx: &Arc<BAdicContext>, depth: i64) -> Result<Vec<PointKA>> {
    let window = block.window.ok_or_else(|| Error::invariant("block without B-adic window"))?;
    let k = block.k as u32;
    let bk = ctx.matrix.pow(k);
    let den = rat_int(&block.denominator()).recip();
    let bk = bk.scale(&den);
    (0..block.len())
        .into_par_iter()
        .map(|i| {
            let num: Vec<BigRational> = block.numerator(i).iter().map(|&x| BigRational::from_integer(BigInt::from(x))).collect();
            let real = bk.mul_vec(&num);
            let finite = block.is_finite(i) && window.hi >= depth - k as i64;
            let badic = TruncatedBAdic::from_digits(ctx, window.lo + k as i64, block.signature(i), finite)?;
            let badic = if badic.depth() == depth { badic } else { badic.truncate(depth).unwrap_or(badic) };
            Ok(PointKA { real, badic })
        })
        .collect()
}

pub fn csv_header(n: usize) -> Vec<String> {
    let mut h: Vec<String> = (1..=n).map(|i| format!("re_{i}")).collect();
    h.push("badic".into());
    h.push("embed".into());
    h
}

/// Rows "re_1,…,re_n,badic,embed" with reals at `precision` decimals.
pub fn write_csv<W: Write>(points: &[PointKA], n: usize, precision: usize, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(csv_header(n)).map_err(|e| Error::Io(e.to_string()))?;
    for p in points {
        let mut rec: Vec<String> = p.real.iter().map(|x| format_decimal(x, precision)).collect();
        rec.push(p.badic.format());
        rec.push(format!("{:.17}", p.badic.embed_real()));
        w.write_record(&rec).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// One parsed CSV row.
#[derive(Clone, Debug, PartialEq)]
pub struct CloudRow {
    pub real: Vec<String>,
    pub badic: TruncatedBAdic,
    pub embed: f64,
}

pub fn read_csv<R: Read>(ctx: &Arc<BAdicContext>, depth: i64, input: R) -> Result<Vec<CloudRow>> {
    let n = ctx.n;
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers().map_err(|e| Error::Io(e.to_string()))?.iter().map(String::from).collect();
    if header != csv_header(n) {
        return Err(Error::parse("csv header", format!("expected {:?}", csv_header(n))));
    }
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::parse(format!("csv line {}", line + 2), e.to_string()))?;
        if rec.len() != n + 2 {
            return Err(Error::parse(format!("csv line {}", line + 2), "wrong column count"));
        }
        let real = rec.iter().take(n).map(String::from).collect();
        let badic = TruncatedBAdic::parse(ctx, &rec[n], depth)?;
        let embed = rec[n + 1].parse().map_err(|_| Error::parse(format!("csv line {}", line + 2), "bad embed value"))?;
        rows.push(CloudRow { real, badic, embed });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;
    use crate::exactq::scalar::rat;
    use crate::exactq::Matrix;
    use crate::zmodule::{Base, ModuleElement};

    fn example(lead: i64) -> DigitSystem {
        let base = Arc::new(Base::new(Matrix::from_rows(vec![vec![rat(2, 1), rat(1, 1)], vec![rat(0, 1), rat(5, 3)]])).unwrap());
        let digits = [0, lead]
            .iter()
            .flat_map(|&f| [0, 1, 2, 3, 9].map(|s| ModuleElement::from_i64(&[f, s])))
            .collect();
        DigitSystem::new(base, digits).unwrap()
    }

    fn key(p: &PointKA) -> (Vec<BigRational>, String) {
        (p.real.clone(), p.badic.format())
    }

    #[test]
    fn level_one_matches_phi() {
        let sys = example(1);
        let c = point_cloud(&sys, 1, 8, 1000).unwrap();
        assert_eq!(c.points.len(), 10);
        let ctx = BAdicContext::from_base(sys.base());
        let b = ctx.matrix.clone();
        for (p, d) in c.points.iter().zip(sys.digits()) {
            let q = PointKA::phi(&ctx, &d.shift(-1), 8);
            assert_eq!(key(p), key(&q));
            assert_eq!(p.real, b.mul_vec(&sys.base().value(d)));
        }
        assert!(c.kappa < 1.0 && c.hausdorff_bound > 0.0);
    }

    #[test]
    fn deeper_levels_match_phi() {
        let sys = example(2);
        let c = point_cloud(&sys, 3, 5, 10_000).unwrap();
        let ctx = BAdicContext::from_base(sys.base());
        let block = digit_block_with(&sys, 3, 10_000, None, None).unwrap();
        for i in [0, 7, 312, 999] {
            let q = PointKA::phi(&ctx, &block.element(i).shift(-3), 5);
            assert_eq!(key(&c.points[i]), key(&q), "point {i}");
        }
    }

    #[test]
    fn nonstandard_cloud_sandwich() {
        let (std, tilde) = (example(1), example(2));
        let depth = 6;
        let ctx = BAdicContext::from_base(std.base());
        let r2: Vec<PointKA> = [[0, 0], [1, 0]].iter().map(|r| PointKA::phi(&ctx, &ModuleElement::from_i64(r), depth)).collect();
        let plus: BTreeSet<_> = point_cloud(&std, 2, depth, 1000)
            .unwrap()
            .points
            .iter()
            .flat_map(|p| r2.iter().map(move |r| key(&p.add(r).unwrap())))
            .collect();
        let t2: BTreeSet<_> = point_cloud(&tilde, 2, depth, 1000).unwrap().points.iter().map(key).collect();
        let t3: BTreeSet<_> = point_cloud(&tilde, 3, depth, 10_000).unwrap().points.iter().map(key).collect();
        assert_eq!((t2.len(), plus.len()), (100, 200));
        assert!(t2.is_subset(&plus));
        assert!(plus.is_subset(&t3));
    }

    #[test]
    fn csv_round_trip() {
        let sys = example(2);
        let c = point_cloud(&sys, 2, 6, 1000).unwrap();
        let mut buf = Vec::new();
        write_csv(&c.points, 2, 12, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("re_1,re_2,badic,embed\n"));
        let ctx = BAdicContext::from_base(sys.base());
        let rows = read_csv(&ctx, 6, &buf[..]).unwrap();
        assert_eq!(rows.len(), 100);
        for (row, p) in rows.iter().zip(&c.points) {
            assert_eq!(row.badic.format(), p.badic.format());
            assert!((row.embed - p.badic.embed_real()).abs() < 1e-15);
        }
        assert!(read_csv(&ctx, 6, "x,y\n".as_bytes()).is_err());
    }
}
