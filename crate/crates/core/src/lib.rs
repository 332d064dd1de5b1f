//! Numerical engine for the 4-dimensional Sklyanin algebras `A(E, tau)` at a
//! torsion point `tau` of order `n`.
//!
//! The crate builds the algebra's graded components from its six defining
//! relations, constructs line, point and fat-point modules over it, computes
//! graded Hom spaces by linear algebra, de-grades fat points into
//! finite-dimensional modules, and runs the incidence calculus that
//! classifies secant lines and the fat points they carry.  Everything is
//! desk-scale floating point: ranks are decided by thresholded singular
//! values and torsion bookkeeping is exact over the rationals.
//!
//! Theta convention used throughout (see [`theta`]):
//! `theta[a,b](z | t) = sum_n exp(i pi t (n+a)^2 + 2 pi i (n+a)(z+b))` with
//! `a, b in {0, 1/2}` and labels `00, 01, 10, 11` for the four
//! characteristics.  `theta_11` is odd and vanishes exactly on the lattice;
//! the other three are even.

pub mod algebra;
pub mod atlas;
pub mod curve;
pub mod error;
pub mod linalg;
pub mod modules;
pub mod proj;
pub mod report;
pub mod session;
pub mod suites;
pub mod theta;

pub use curve::{Curve, CurvePoint, Rat};
pub use error::Error;
pub use session::Session;
pub use theta::{LatticeParam, StructureConstants, ThetaChar};

/// Result alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;
