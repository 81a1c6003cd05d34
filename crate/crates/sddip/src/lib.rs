//! Instance generators, file formats, the benchmark harness and the
//! command-line front end for `sddip-core`.

pub mod bench;
pub mod cli;
pub mod instances;
pub mod report;
pub mod solve;
