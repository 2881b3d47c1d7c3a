//! Simulation and verification toolkit for a quasi-continuous second-order
//! sliding-mode controller on the perturbed double integrator
//! `x1' = x2, x2' = u + d`.

pub mod analytic;
pub mod cli;
pub mod controller;
pub mod error;
pub mod lyapunov;
pub mod model;
pub mod simulator;

pub use error::{Error, Result};
pub use model::{State, Trajectory};
