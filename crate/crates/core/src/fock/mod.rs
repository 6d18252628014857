//! Truncated Fock-space realizations and coherent encodings.

pub mod encode;
pub mod matrix;
pub mod space;

pub use encode::{
    coherent_vector, density_matrix, ensemble_moment_vector, exponential_state, moment_vector, poisson_tail,
    suggested_cutoff, truncation_bound, Ensemble, MomentTensor, PhasePoint, TAIL_BUDGET,
};
pub use matrix::{
    apply_poly, expectation, ladder_matrix, realize, CMatrix, CVector, DensityMatrix, OperatorMatrix, StateVector,
};
pub use space::{FockSpace, DEFAULT_DIMENSION_BUDGET};
