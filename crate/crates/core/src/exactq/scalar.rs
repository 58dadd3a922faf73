use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Commutative ring scalar usable as a matrix entry.
pub trait Scalar:
    Clone
    + Debug
    + PartialEq
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + Send
    + Sync
{
    fn to_f64(&self) -> f64;

    fn from_i64(v: i64) -> Self;
}

/// Scalars with exact (or IEEE) division.
pub trait Field: Scalar + Div<Output = Self> {
    /// Magnitude used to rank elimination pivots.
    fn pivot_weight(&self) -> f64 {
        self.to_f64().abs()
    }

    fn from_ratio(n: i64, d: i64) -> Self {
        Self::from_i64(n) / Self::from_i64(d)
    }
}

impl Scalar for BigRational {
    fn to_f64(&self) -> f64 {
        rational_to_f64(self)
    }

    fn from_i64(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }
}

impl Field for BigRational {
    fn pivot_weight(&self) -> f64 {
        // any nonzero pivot is exact; prefer small heights
        let bits = self.numer().bits() + self.denom().bits();
        1.0 / (1.0 + bits as f64)
    }
}

impl Scalar for BigInt {
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn from_i64(v: i64) -> Self {
        BigInt::from(v)
    }
}

impl Scalar for f64 {
    fn to_f64(&self) -> f64 {
        *self
    }

    fn from_i64(v: i64) -> Self {
        v as f64
    }
}

impl Field for f64 {}

impl Scalar for f32 {
    fn to_f64(&self) -> f64 {
        *self as f64
    }

    fn from_i64(v: i64) -> Self {
        v as f32
    }
}

impl Field for f32 {}

pub fn rational_to_f64(q: &BigRational) -> f64 {
    // scale so both parts fit comfortably in f64 range
    let nb = q.numer().bits() as i64;
    let db = q.denom().bits() as i64;
    let shift = (nb - db) - 60;
    let scaled = if shift > 0 {
        q.numer().clone() / (q.denom() << (shift as usize))
    } else {
        (q.numer() << ((-shift) as usize)) / q.denom().clone()
    };
    ToPrimitive::to_f64(&scaled).unwrap_or(f64::NAN) * 2f64.powi(shift as i32)
}

pub fn int(v: i64) -> BigInt {
    BigInt::from(v)
}

pub fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_int(v: &BigInt) -> BigRational {
    BigRational::from_integer(v.clone())
}

/// Parse "p/q" or "p" (surrounding whitespace allowed).
pub fn parse_rational(s: &str, at: &str) -> Result<BigRational> {
    let t = s.trim();
    let bad = |msg: &str| Error::parse(at, format!("{msg}: {s:?}"));
    let (n, d) = match t.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (t, "1"),
    };
    let num: BigInt = parse_int_str(n).ok_or_else(|| bad("invalid numerator"))?;
    let den: BigInt = parse_int_str(d).ok_or_else(|| bad("invalid denominator"))?;
    if den.is_zero() {
        return Err(bad("zero denominator"));
    }
    Ok(BigRational::new(num, den))
}

fn parse_int_str(s: &str) -> Option<BigInt> {
    let digits = s.strip_prefix(['-', '+']).unwrap_or(s);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}

pub fn format_rational(q: &BigRational) -> String {
    if q.denom().is_one() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

/// Decimal rendering with `digits` fractional digits, rounded half away from zero.
pub fn format_decimal(q: &BigRational, digits: usize) -> String {
    let scale = num_traits::pow(BigInt::from(10), digits);
    let scaled = q * BigRational::from_integer(scale.clone());
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    let r = if scaled.is_negative() {
        -((-scaled) + half).floor().to_integer()
    } else {
        (scaled + half).floor().to_integer()
    };
    let neg = r.is_negative();
    let mag = r.abs().to_string();
    let (ip, fp) = if digits == 0 {
        (mag, String::new())
    } else if mag.len() > digits {
        let (a, b) = mag.split_at(mag.len() - digits);
        (a.to_string(), b.to_string())
    } else {
        ("0".to_string(), format!("{:0>width$}", mag, width = digits))
    };
    let sign = if neg { "-" } else { "" };
    if digits == 0 {
        format!("{sign}{ip}")
    } else {
        format!("{sign}{ip}.{fp}")
    }
}

pub fn lcm_denominators<'a>(it: impl IntoIterator<Item = &'a BigRational>) -> BigInt {
    it.into_iter().fold(BigInt::one(), |acc, q| acc.lcm(q.denom()))
}

/// x mod 1 in [0, 1).
pub fn frac_mod_one(q: &BigRational) -> BigRational {
    q - q.floor()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_format() {
        let q = parse_rational(" -10/4 ", "x").unwrap();
        assert_eq!(q, rat(-5, 2));
        assert_eq!(format_rational(&q), "-5/2");
        assert_eq!(format_rational(&rat(6, 3)), "2");
        assert!(parse_rational("5//3", "m[1][0]").is_err());
        assert!(parse_rational("1/0", "x").is_err());
        assert!(parse_rational("", "x").is_err());
        assert!(parse_rational("1.5", "x").is_err());
    }

    #[test]
    fn decimal() {
        assert_eq!(format_decimal(&rat(1, 3), 4), "0.3333");
        assert_eq!(format_decimal(&rat(-2, 3), 3), "-0.667");
        assert_eq!(format_decimal(&rat(5, 2), 0), "3");
        assert_eq!(format_decimal(&rat(123, 1), 2), "123.00");
    }

    #[test]
    fn float_conversion_of_huge_values() {
        let big = BigRational::new(num_traits::pow(int(3), 900), num_traits::pow(int(2), 1400));
        let expect = 900.0 * 3f64.log2() - 1400.0;
        assert!((rational_to_f64(&big).log2() - expect).abs() < 1e-9);
    }
}
