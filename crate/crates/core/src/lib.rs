//! Solver core for multi-stage stochastic mixed-binary programs under
//! stage-wise independence.
//!
//! The crate is `no_std` (it needs `alloc`) and contains everything that is
//! pure computation:
//!
//! - [`model`]: stage templates, realizations, subproblem instantiation,
//!   scenario sampling and state binarization.
//! - [`simplex`]: a bounded revised simplex with dense LU factorization that
//!   reports row duals.
//! - [`mip`]: best-bound branch-and-bound over the simplex.
//! - [`cuts`]: Benders, strengthened Benders, integer L-shaped and Lagrangian
//!   cuts, cut aggregation and the per-stage cut pool.
//! - [`sddip`]: the sampled forward/backward cutting-plane loop with the
//!   default or alternating backward step, statistical bounds and stopping.
//! - [`nested`]: Nested Benders over the full scenario tree.
//! - [`extform`]: the extensive (deterministic equivalent) form.
//!
//! File formats, instance generators and the command line live in the `sddip`
//! crate.
#![no_std]

extern crate alloc;

pub mod clock;
pub mod cuts;
pub mod error;
pub mod extform;
pub mod mip;
pub mod model;
pub mod nested;
pub mod sddip;
pub mod simplex;
pub mod stats;

pub use error::{Error, Result};
