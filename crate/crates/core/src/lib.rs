//! Certification of nondegenerate Bell inequalities and semi-device-independent
//! lower bounds on entanglement.
//!
//! The pipeline runs in four stages:
//!
//! 1. [`bell`] describes scenarios, Bell expressions, correlations and
//!    measurement assemblages, and evaluates expressions on them.
//! 2. [`tsirelson`] estimates `C(I, d, t)`, the largest sum of the top `t`
//!    Bell-operator eigenvalues over local POVMs in dimension `d`, by seesaw.
//! 3. [`nondegeneracy`] turns those estimates into a certificate: the
//!    expression is nondegenerate iff `C(I,d,2) < 2·C(I,d,1)`.
//! 4. [`entanglement`] maps an observed violation plus a certificate to a
//!    purity bound, entropy bounds and finally a lower bound on the coherent
//!    information, which bounds distillable entanglement and entanglement of
//!    formation from below.
//!
//! [`experiments`] wires everything to files, simulation and the CLI.

pub mod bell;
pub mod entanglement;
pub mod error;
pub mod experiments;
pub mod nondegeneracy;
pub mod numerics;
pub mod tsirelson;

pub use error::{Error, Result};
