//! Exact computer algebra on local models of split ordinary flops.

pub mod birkhoff;
pub mod cli;
pub mod cohring;
pub mod defect;
pub mod extremal;
pub mod flopmodel;
pub mod ifunc;
pub mod linalg;
pub mod pfops;
pub mod qlh;
