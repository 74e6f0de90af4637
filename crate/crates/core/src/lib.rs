#![cfg_attr(not(feature = "std"), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]
extern crate alloc;

pub mod benchmarks;
pub mod error;
pub mod gp;
pub mod hyper;
pub mod kernel;
pub mod linalg;
pub mod math;
pub mod mcmc;
pub mod rng;
pub mod sobol;
pub mod space;
pub mod thompson;
pub mod trust_region;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
