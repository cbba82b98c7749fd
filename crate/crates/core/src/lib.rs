//! Discrete Hamiltonian mechanics in which time is a dynamical variable,
//! its continuum limit ("time-reversing machines"), and a hybrid model in
//! which such a classical machine drives a q-bit.
//!
//! The crate is `no_std` (with `alloc`). All transcendental functions go
//! through [`libm`], so results are bit-reproducible across platforms.
//!
//! Module map:
//!
//! - [`model`]: state types, potentials, per-step Hamiltonian pieces, q-bit observables
//! - [`discrete`]: the three-term recurrence, forward and backward, action and bracket
//! - [`continuum`]: lapse dynamics, lapse-driven `(x, p)` flow, internal-frame solver, convergence study
//! - [`hybrid`]: the classical machine coupled to a q-bit in the oscillator representation
//! - [`oracles`]: Green's-function solutions, effective field, eigenvalue shift
//! - [`ensemble`]: Liouville transport by characteristics over sampled ensembles
//! - [`bracket`]: finite-difference Poisson-bracket kernel shared by the engines

#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > 0.0)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod bracket;
pub mod continuum;
pub mod discrete;
pub mod ensemble;
mod error;
pub mod hybrid;
mod math;
pub mod model;
pub mod oracles;
mod rk4;

pub use error::{Error, Result};
pub use model::{DiscreteState, HybridState, ModelParams, ObservableMatrix, PotentialKind, PotentialSpec};
