//! Equilibria, linear stability, critical ratios and regime maps of the
//! dimensionless system.

mod fixed_points;
mod ratios;
mod regime;

pub use fixed_points::*;
pub use ratios::*;
pub use regime::*;
