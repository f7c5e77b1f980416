//! Abelian sandpiles on the square lattice and on discrete tori.
//!
//! The crate is organised bottom-up:
//!
//! * [`lattice`]: domains, dense fields, sparse integer fields, discrete calculus
//!   and the integer classes `C^0`..`C^3`.
//! * [`greens`]: Green's functions on tori and on `Z^2`, asymptotics, decay and
//!   `l^p` reports, convolution powers of the walk measure.
//! * [`sandpile`]: stabilization, parallel toppling, the sandpile Markov chain,
//!   recurrence and the group structure.
//! * [`spectral`]: frequencies of the dual group, eigenvalues, savings,
//!   clustering, the spectral gap search, the exact small-torus oracle and cutoff
//!   profiles.
//! * [`gamma`]: the nonlinear programs bounding the gap functional and the
//!   pipeline computing the gap constant.
//! * [`experiments`]: pairing invariants, characteristic functions, tail scans
//!   and i.i.d. stabilization trials.

pub mod error;
pub mod experiments;
pub mod gamma;
pub mod greens;
pub mod lattice;
pub mod numeric;
pub mod rng;
pub mod sandpile;
pub mod spectral;

pub use error::{Error, Result};
pub use lattice::{Domain, Field, SparseIntField};
