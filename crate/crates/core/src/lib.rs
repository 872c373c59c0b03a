//! Exact construction of complete systems of covariants of binary forms.
//!
//! Covariants are handled through their leading coefficients
//! (semi-invariants). The crate provides the polynomial substrate
//! ([`poly`]), the derivation `D` with Roberts reconstruction ([`sl2`]),
//! transvectants and semitransvectants ([`transvect`]), Cayley–Sylvester
//! counting ([`counting`]), exact rank computations ([`linalg`]) and the
//! generator discovery pipeline ([`discover`]) over a persisted
//! [`registry`].

pub mod counting;
pub mod discover;
pub mod error;
pub mod linalg;
pub mod poly;
pub mod registry;
pub mod sl2;
pub mod transvect;

pub use error::{Error, Result};
pub use poly::{Monomial, Poly, Scalar, VarId};
pub use sl2::{FormContext, SemiInvariant};

/// Version written into registry files.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
