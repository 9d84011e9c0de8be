//! Auxiliary space preconditioners for statically condensed HDG discretizations of
//! reaction-diffusion, vector reaction-diffusion and biharmonic problems.

#![allow(clippy::needless_range_loop, clippy::too_many_arguments, clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod geometry;
pub mod mesh;
pub mod polybasis;
pub mod sparse;
pub mod fespace;
pub mod assembly;
pub mod condense;
pub mod transfer;
pub mod smoother;
pub mod asp;
pub mod krylov;
pub mod bench;

pub use error::{Error, Result};
