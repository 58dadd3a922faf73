//! Exact rational scalars, matrices, polynomials and integer lattices.

pub mod lattice;
pub mod matrix;
pub mod poly;
pub mod scalar;
pub mod snf;
pub mod stability;

pub use lattice::{Hnf, IntLattice};
pub use matrix::Matrix;
pub use poly::{char_poly, min_poly, vector_min_poly, IntPolynomial, Polynomial, RationalPolynomial};
pub use scalar::{Field, Scalar};
pub use snf::{snf, Smith};
pub use stability::{is_expanding, modulus_lower_bound};
