//! Rational matrix digit systems, their representation spaces and self-affine tiles.

pub mod badic;
pub mod chars;
pub mod cli;
pub mod error;
pub mod exactq;
pub mod frobenius;
pub mod space;
pub mod tile;
pub mod zmodule;

pub use error::{Error, Result};

pub type Rational = num_rational::BigRational;
pub type Integer = num_bigint::BigInt;
pub type RationalMatrix = exactq::Matrix<Rational>;
pub type IntMatrix = exactq::Matrix<Integer>;
pub type FloatMatrix = exactq::Matrix<f64>;
pub type RationalVector = Vec<Rational>;
pub type IntVector = Vec<Integer>;
