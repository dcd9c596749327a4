//! Path large deviations of the Curie-Weiss model under Glauber dynamics.
//!
//! The crate computes optimal conditioned magnetization histories by solving
//! the Euler-Lagrange flow of the path rate function, detects non-Gibbsian
//! (bad) conditioning magnetizations through folds of the transported curve of
//! allowed initial configurations, evaluates the limiting single-site kernel,
//! and cross-checks everything with a finite-N simulation.
//!
//! `no_std` with `alloc`; transcendental functions come from `libm`.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod acc;
pub mod cost;
pub mod error;
pub mod exec;
pub mod flow;
pub mod gamma;
pub mod ldp;
pub mod math;
pub mod mcsim;
pub mod model;
pub mod ode;
pub mod phase;
pub mod roots;

pub use error::{Error, Result};
pub use exec::{Executor, Sequential};
pub use model::{ModelParams, Spin};
