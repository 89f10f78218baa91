//! Inducing schemes and statistical-stability diagnostics for one-dimensional
//! maps with critical points and singularities.
//!
//! The crate is `no_std` (with `alloc`) when built without the default `std`
//! feature. File formats, configuration and the command line live in the
//! companion `inducer` crate.

#![cfg_attr(not(any(feature = "std", test)), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod error;
pub mod fmath;
pub mod inducing;
pub mod map_model;
pub mod measure;
pub mod partition;
pub mod rootfind;
pub mod stability;
pub mod sum;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
