// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod datagen;
pub mod error;
pub mod exec;
pub mod features;
pub mod io;
pub mod labels;
pub mod metrics;
pub mod models;
pub mod training;

pub use error::{Error, Result};
