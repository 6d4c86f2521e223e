//! Symbolic and numeric toolkit for principal hierarchies of flat exact
//! semisimple bihamiltonian structures of hydrodynamic type.
//!
//! The symbolic core works over the graded super-commutative algebra of
//! differential polynomials in jet variables `u^{i,s}`, `theta_i^s` with
//! exact rational polynomial coefficients in the flat coordinates
//! `v^1..v^n`.  On top of it sit the Schouten bracket machinery, the
//! WDVV/Frobenius layer, the construction of the calibration
//! `{theta_{a,p}}`, densities `{h_{a,p}}` and tau structure
//! `{Omega_{a,p;b,q}}`, the tau-symmetric deformation machinery, and a
//! small numeric layer (canonical coordinates of a pencil, scalar
//! characteristics, tau-cover grids).
//!
//! Everything symbolic is exact; all identity checks compare against the
//! literal zero polynomial.  The numeric layers report residuals against
//! stated tolerances.

pub mod brackets;
pub mod coeffpoly;
pub mod deformation;
pub mod frobenius;
pub mod hierarchy;
pub mod jetspace;
pub(crate) mod par;
pub mod pencil;
pub mod rational;
pub mod report;
pub mod solver;

pub use coeffpoly::CoeffPoly;
pub use jetspace::{DiffPoly, JetVar, LocalFunctional, Parity};
