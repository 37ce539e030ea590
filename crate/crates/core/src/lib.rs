//! Ground states of one-dimensional Bose gases in a box with piecewise-linear
//! continuous matrix product states.
//!
//! The matrices `Q(x)`, `R(x)` are tent-function interpolants on a mesh. On
//! each segment the reduced density matrices `ρ(x)`, `σ(x)` are exact Taylor
//! polynomials, which makes the energy a finite sum of beta integrals and its
//! gradient an exact reverse sweep through the same recursion.
//!
//! The crate is `no_std` (with `alloc`) when built without the default `std`
//! feature.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod beta;
pub mod energy;
pub mod envelope;
pub mod error;
pub mod gradient;
pub mod lbfgs;
pub mod linalg;
mod math;
pub mod mesh;
pub mod observables;
pub mod optimize;
pub mod potential;
mod precondition;
pub mod reference;
pub mod state;
pub mod uniform;

pub use energy::{EnergyReport, HamiltonianSpec};
pub use envelope::{Envelopes, TaylorEnvelope, TaylorTolerance};
pub use error::{Error, Result};
pub use gradient::{energy_and_gradient, GradientReport};
pub use mesh::{Mesh, PiecewiseLinear, SegmentPolynomial};
pub use potential::{Potential, PotentialSpec};
pub use state::CmpsState;
