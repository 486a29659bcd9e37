use crate::error::{Error, Result};
use crate::integrator::{integrate, IntegratorConfig};
use crate::model::{
    rhs_dimensional, rhs_dimensionless, DimensionalParams, DimensionlessParams, Frame, InitialState, State,
    Trajectory,
};

/// `n` evenly spaced times from `t0` to `t1` inclusive.
pub fn uniform_times(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![t1],
        _ => {
            let dt = (t1 - t0) / (n - 1) as f64;
            let mut times: Vec<f64> = (0..n).map(|i| t0 + dt * i as f64).collect();
            times[n - 1] = t1;
            times
        }
    }
}

fn span(t0: f64, obs_times: &[f64]) -> Result<(f64, f64)> {
    let last = *obs_times
        .last()
        .ok_or_else(|| Error::Usage("at least one output time is required".into()))?;
    if !(last > t0) {
        return Err(Error::Usage(format!("last output time {last} must exceed start time {t0}")));
    }
    Ok((t0, last))
}

/// Integrates the dimensionless system from `y0` at `tau = 0`.
pub fn simulate_dimensionless(
    p: &DimensionlessParams,
    y0: &State,
    obs_times: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    let sol = integrate(|_, y| rhs_dimensionless(y, p), *y0, span(0.0, obs_times)?, obs_times, cfg)?;
    Trajectory::new(Frame::Dimensionless, sol.times, sol.states)
}

/// Integrates the dimensional system from `s0` at `t = 0` (months).
pub fn simulate_dimensional(
    p: &DimensionalParams,
    s0: &InitialState,
    obs_times: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    p.validate()?;
    s0.validate()?;
    let sol = integrate(|_, y| rhs_dimensional(y, p), s0.as_state(), span(0.0, obs_times)?, obs_times, cfg)?;
    Trajectory::new(Frame::Dimensional, sol.times, sol.states)
}
