#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod carrier;
pub mod commands;
pub mod error;
pub mod fieldtransform;
pub mod forward;
pub mod grid;
pub mod inversion;
pub mod io;
pub mod objective;
pub mod scenario;
pub mod special;
pub mod validation;
