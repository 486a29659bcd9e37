//! Stylised national food-system model: a four-state ODE for capital,
//! inventory, demand and price, with equilibrium and stability analysis,
//! regime maps and Bayesian calibration against monthly commodity data.

pub mod data;
pub mod error;
pub mod inference;
pub mod integrator;
pub mod linalg;
pub mod model;
pub mod simulate;
pub mod stability;

pub use error::{Error, Result};
