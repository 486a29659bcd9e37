//! Bayesian calibration: parameter transforms, lognormal likelihood,
//! adaptive Metropolis sampling, convergence diagnostics, derived
//! quantities and posterior predictive simulation.

mod diagnostics;
mod likelihood;
mod posterior;
mod predictive;
mod sampler;
mod synthetic;
mod transform;

pub use diagnostics::*;
pub use likelihood::*;
pub use posterior::*;
pub use predictive::*;
pub use sampler::*;
pub use synthetic::*;
pub use transform::*;
