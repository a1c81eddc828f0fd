#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod calibrate;
pub mod correct;
pub mod error;
pub mod export;
pub mod gauss;
pub mod harness;
pub mod optim;
pub mod registry;
pub mod rng;
pub mod roc;
pub mod transform;
pub mod trial;

pub use error::{Error, Result};
