#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod decomposition;
pub mod error;
pub mod fvec_io;
pub mod probe;
pub mod report;
pub mod repstats;
pub mod rng;
pub mod scaling;
pub mod synth;

pub use error::{Error, Result};
