//! BART prior correlation kernel and Gaussian-process regression in the
//! infinite-trees limit of BART.

// `!(x > 0.0)` is how argument checks reject NaN along with the rest
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod accuracy;
pub mod error;
pub mod gp;
pub mod grid;
pub mod kernel;
pub mod kmatrix;
pub mod optim;
pub mod special;
pub mod transform;
pub mod treeprior;

pub use error::{Error, Result};
