//! Deep super ReLU networks: explicit constructions that approximate Sobolev
//! functions in `W^{m,p}` norms, norm estimation, counting bounds for their
//! second derivatives, and a physics-informed training harness.

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assembler;
pub mod cli;
pub mod complexity;
pub mod error;
pub mod gadgets;
pub mod jet;
pub mod local_poly;
pub mod metrics;
pub mod net;
pub mod optim;
pub mod pinn;
pub mod target;

pub use error::{Error, Result};
