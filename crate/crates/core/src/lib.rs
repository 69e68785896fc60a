#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod acquisition;
pub mod density;
pub mod environments;
pub mod error;
pub mod experiment;
pub mod gp;
pub mod metrics;
pub mod mission;
pub mod planner;
pub mod space;
pub mod special;
pub mod validation;

pub use error::{Error, Result};
