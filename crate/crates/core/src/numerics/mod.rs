//! Dense complex linear algebra for the small matrices (dimension ≤ ~36,
//! Bell operators up to 81×81) used throughout the crate.

pub mod eigen;
pub mod linalg;
pub mod matrix;
pub mod sample;

pub use eigen::{eigen_hermitian, eigen_hermitian_fast, hermitian_function, min_eigenvalue, Spectrum};
pub use linalg::{eig_general, inverse, numerical_rank, singular_values, RANK_TOL};
pub use matrix::{inner, kron, matricize, norm, normalize, partial_trace, ComplexMatrix, Party, C64, ONE, ZERO};
pub use sample::{sample, SampleKind, Sampled};
