#![no_std]
// NaN must fail every bound, so `!(x <= tol)` is used on purpose
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod campaign;
pub mod distributions;
pub mod error;
pub mod maps;
pub mod numerics;
pub mod spd;
pub mod stats;
pub mod suites;
pub mod yangbaxter;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
