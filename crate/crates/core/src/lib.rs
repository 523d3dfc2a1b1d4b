//! Grid-based potential theory in the plane.
//!
//! The crate samples subharmonic and δ-subharmonic functions on square
//! lattices, extracts their Riesz charges, builds Green functions, Jensen
//! measures and Jensen potentials, and checks weighted zero-sum inequalities
//! for holomorphic functions with a growth majorant.

// Guards such as `!(x > 0.0)` must also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod checker;
pub mod fields;
pub mod green;
pub mod jensen;
pub mod kernels;
pub mod testfn;
pub mod zeros;

pub use error::{Error, NodeIndex, Result};
pub use num_complex::Complex64;
