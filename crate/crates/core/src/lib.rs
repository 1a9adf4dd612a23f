//! Symbols, ellipticity checks and Fredholm indices for operators built from
//! pseudodifferential operators and shift operators of a group action.
//!
//! The crate covers three families of actions on the circle (irrational
//! rotation by `Z`, finite rotation groups `Z/k`, dilations on the sphere),
//! the circle action on the 2-torus used by [`uniformization`], and the
//! Schwartz-space picture of the noncommutative torus in [`nctorus`].

pub mod constants;
pub mod ellipticity;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod nctorus;
pub mod realization;
pub mod series;
pub mod suite;
pub mod symbol;
pub mod topological;
pub mod uniformization;

pub use error::{Error, Result};
pub use num_complex::Complex64;
