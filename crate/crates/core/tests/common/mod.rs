//! Oracles shared by the per-topic tests and the acceptance report.
#![allow(dead_code)]

pub mod gradients;
pub mod oracles;
