//! Boundary blow-up asymptotics for `Δu + au = b(x) f(u)`.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::redundant_guards)]
pub mod bvp;
pub mod error;
pub mod expansion;
pub mod expr;
pub mod nonlinearity;
pub mod profiles;
pub mod quad;
pub mod regvar;
pub mod weights;

pub use error::{Error, Result};
