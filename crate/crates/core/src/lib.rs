//! Finite-level multiplicative chaos on `[0,1]^d`.
//!
//! Grids, density fields and RNG streams live in [`grid`], [`field`] and
//! [`rng`]. Layer kernels and their regularity checks are in [`kernels`];
//! the samplers are [`gaussian`], [`cascades`] and [`coverings`].
//! [`spectral`] turns fields into Fourier coefficients and dimension
//! estimates, and [`theory`] holds the closed-form predictions.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod cascades;
pub mod coverings;
pub mod error;
pub mod field;
pub mod gaussian;
pub mod grid;
pub mod kernels;
pub mod math;
pub mod rng;
pub mod sampler;
pub mod spectral;
pub mod theory;

pub use error::{Error, Result};
pub use field::{CellMask, DensityField};
pub use grid::BAdicGrid;
pub use rng::RngStream;
pub use sampler::{MeasureSampler, Sample};
