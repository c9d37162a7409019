//! Entropy solutions of the periodic inviscid Burgers equation recovered
//! from a concave space-time maximisation.
//!
//! * [`periodic`]: sampled functions on the torus, quadrature, stencils and
//!   the lower convex envelope.
//! * [`hopf_lax`]: exact entropy solutions and the first shock time.
//! * [`shock_free`]: the shock-free substitute, its contact set, the
//!   pushforward measures and both closed forms of the optimal value.
//! * [`duality`]: entropy systems, the conjugate `K`, the smooth-recovery
//!   candidate and its positivity criterion, and the dual objective.
//! * [`primal`]: augmented-Lagrangian solver for the discretised
//!   density/flux problem, with checkpointing.
//! * [`godunov`]: an independent finite-volume reference solver.
//! * [`cli`]: scenario parsing and the experiment runner.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod data;
pub mod duality;
pub mod error;
pub mod godunov;
pub mod hopf_lax;
pub mod par;
pub mod periodic;
pub mod primal;
pub mod shock_free;
pub mod transport;

pub use error::{Error, Result};
pub use periodic::{PeriodicGrid, SampledFn};
