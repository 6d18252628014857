//! Exact symbolic algebra over bosonic ladder generators.

pub mod classical;
pub mod operator;
pub mod parse;
pub mod quantize;

pub use classical::{ClassicalMonomial, ClassicalPoly, Exponents, Var, VarKind};
pub use operator::{
    commutator, normal_order, Family, Generator, LadderMonomial, OperatorPoly, DEFAULT_MAX_DEGREE, SYMBOLIC_ZERO,
};
pub use parse::{parse_poly, parse_poly_with_modes};
pub use quantize::{check_bracket_identity, phi_op, pi_op, quantize_canonical, quantize_normal, BracketSide, FieldBasis};
