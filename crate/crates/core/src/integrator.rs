//! Adaptive Dormand-Prince 5(4) integrator.
//!
//! Steps are shortened so that every requested output time is hit exactly;
//! there is no dense-output interpolation. Trial steps that leave the
//! positive orthant (when positivity is required) or hit a singularity of
//! the vector field are rejected and retried with a smaller step.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// First trial step; defaults to 1% of the integration span.
    pub initial_step: Option<f64>,
    pub max_steps: usize,
    pub min_step: f64,
    /// Reject trial steps producing a negative component.
    pub require_positive: bool,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            initial_step: None,
            max_steps: 1_000_000,
            min_step: 1e-12,
            require_positive: true,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::Usage("integrator tolerances must be positive".into()));
        }
        if self.max_steps < 1 {
            return Err(Error::Usage("max_steps must be at least 1".into()));
        }
        if !(self.min_step > 0.0) {
            return Err(Error::Usage("min_step must be positive".into()));
        }
        if let Some(h) = self.initial_step {
            if !(h > 0.0) {
                return Err(Error::Usage("initial_step must be positive".into()));
            }
        }
        Ok(())
    }
}

/// States at the requested output times.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution<const N: usize> {
    pub times: Vec<f64>,
    pub states: Vec<[f64; N]>,
    /// Accepted plus rejected steps.
    pub steps: usize,
}

/// Result of [`event_horizon`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventOutcome<const N: usize> {
    /// The predicate held at the end of an accepted step.
    Crossed { time: f64, state: [f64; N] },
    /// The time cap was reached first.
    Timeout { time: f64, state: [f64; N] },
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// Difference between the 5th and embedded 4th order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;
const REJECT_FACTOR: f64 = 0.25;

fn combine<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (coef, k) in terms {
        for i in 0..N {
            out[i] += h * coef * k[i];
        }
    }
    out
}

enum Trial<const N: usize> {
    Accepted { y: [f64; N], k_end: [f64; N], err: f64 },
    TooLarge { err: f64 },
    Invalid(String),
}

struct Stepper<const N: usize, F> {
    rhs: F,
    cfg: IntegratorConfig,
    t: f64,
    y: [f64; N],
    k1: [f64; N],
    h: f64,
    steps: usize,
}

impl<const N: usize, F> Stepper<N, F>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
{
    fn new(mut rhs: F, t0: f64, y0: [f64; N], span: f64, cfg: IntegratorConfig) -> Result<Self> {
        cfg.validate()?;
        if y0.iter().any(|v| !v.is_finite()) {
            return Err(Error::Usage("initial state must be finite".into()));
        }
        let k1 = evaluate(&mut rhs, t0, &y0)?;
        let h = cfg.initial_step.unwrap_or(0.01 * span).max(cfg.min_step);
        Ok(Self { rhs, cfg, t: t0, y: y0, k1, h, steps: 0 })
    }

    fn trial(&mut self, h: f64) -> Trial<N> {
        let (t, y, k1) = (self.t, &self.y, &self.k1);
        let stages = (|| -> Result<([f64; N], [f64; N], [f64; N])> {
            let rhs = &mut self.rhs;
            let k2 = rhs(t + C2 * h, &combine(y, h, &[(A21, k1)]))?;
            let k3 = rhs(t + C3 * h, &combine(y, h, &[(A31, k1), (A32, &k2)]))?;
            let k4 = rhs(t + C4 * h, &combine(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]))?;
            let k5 = rhs(t + C5 * h, &combine(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]))?;
            let k6 = rhs(
                t + h,
                &combine(y, h, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
            )?;
            let y_new = combine(y, h, &[(A71, k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
            let k7 = rhs(t + h, &y_new)?;
            let mut err = [0.0; N];
            for i in 0..N {
                err[i] = h
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            }
            Ok((y_new, k7, err))
        })();
        let (y_new, k7, err_vec) = match stages {
            Ok(v) => v,
            Err(e) => return Trial::Invalid(e.to_string()),
        };
        if y_new.iter().chain(k7.iter()).any(|v| !v.is_finite()) {
            return Trial::Invalid("non-finite state or derivative".into());
        }
        if self.cfg.require_positive && y_new.iter().any(|v| *v < 0.0) {
            return Trial::Invalid("negative state component".into());
        }
        let mut sum = 0.0;
        for i in 0..N {
            let scale = self.cfg.abs_tol + self.cfg.rel_tol * y[i].abs().max(y_new[i].abs());
            let ratio = err_vec[i] / scale;
            sum += ratio * ratio;
        }
        let err = (sum / N as f64).sqrt();
        if err <= 1.0 {
            Trial::Accepted { y: y_new, k_end: k7, err }
        } else {
            Trial::TooLarge { err }
        }
    }

    /// Takes one accepted step, never passing `t_limit`; lands on it exactly
    /// when the step reaches it.
    fn advance(&mut self, t_limit: f64) -> Result<()> {
        loop {
            if self.steps >= self.cfg.max_steps {
                return Err(Error::NonConvergence { max_steps: self.cfg.max_steps, t: self.t });
            }
            self.steps += 1;
            let remaining = t_limit - self.t;
            let landing = self.h >= remaining;
            let h = if landing { remaining } else { self.h };
            match self.trial(h) {
                Trial::Accepted { y, k_end, err } => {
                    self.t = if landing { t_limit } else { self.t + h };
                    self.y = y;
                    self.k1 = k_end;
                    let factor = if err == 0.0 {
                        MAX_FACTOR
                    } else {
                        (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
                    };
                    // A step shortened to land on t_limit says little about
                    // the admissible step size; keep the longer one.
                    self.h = if landing { self.h.max(h * factor) } else { h * factor };
                    return Ok(());
                }
                Trial::TooLarge { err } => {
                    let factor = (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, 1.0);
                    self.h = h * factor;
                    if self.h < self.cfg.min_step {
                        return Err(Error::IntegrationFailure {
                            t: self.t,
                            reason: format!("step size {} fell below min_step", self.h),
                        });
                    }
                }
                Trial::Invalid(reason) => {
                    self.h = h * REJECT_FACTOR;
                    if self.h < self.cfg.min_step {
                        return Err(Error::IntegrationFailure { t: self.t, reason });
                    }
                }
            }
        }
    }
}

fn evaluate<const N: usize, F>(rhs: &mut F, t: f64, y: &[f64; N]) -> Result<[f64; N]>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
{
    let d = rhs(t, y).map_err(|e| Error::IntegrationFailure { t, reason: e.to_string() })?;
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::IntegrationFailure { t, reason: "non-finite derivative".into() });
    }
    Ok(d)
}

/// Integrates `dy/dt = rhs(t, y)` from `t0` and reports the state at each of
/// `obs_times` (strictly increasing, within `[t0, t1]`). The returned times
/// are bitwise copies of the requested ones.
pub fn integrate<const N: usize, F>(
    rhs: F,
    y0: [f64; N],
    t_span: (f64, f64),
    obs_times: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Solution<N>>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
{
    let (t0, t1) = t_span;
    if !(t0 < t1) || !t0.is_finite() || !t1.is_finite() {
        return Err(Error::Usage(format!("invalid time span ({t0}, {t1})")));
    }
    if obs_times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Usage("observation times must be strictly increasing".into()));
    }
    if obs_times.iter().any(|t| *t < t0 || *t > t1) {
        return Err(Error::Usage("observation times must lie within the time span".into()));
    }
    let mut stepper = Stepper::new(rhs, t0, y0, t1 - t0, *cfg)?;
    let mut states = Vec::with_capacity(obs_times.len());
    for &target in obs_times {
        while stepper.t < target {
            stepper.advance(target)?;
        }
        states.push(stepper.y);
    }
    Ok(Solution { times: obs_times.to_vec(), states, steps: stepper.steps })
}

/// Integrates until `predicate(state)` first holds at the end of an accepted
/// step, or until `t_cap`.
pub fn event_horizon<const N: usize, F, P>(
    rhs: F,
    t0: f64,
    y0: [f64; N],
    t_cap: f64,
    cfg: &IntegratorConfig,
    mut predicate: P,
) -> Result<EventOutcome<N>>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
    P: FnMut(&[f64; N]) -> bool,
{
    if predicate(&y0) {
        return Ok(EventOutcome::Crossed { time: t0, state: y0 });
    }
    if !(t_cap > t0) {
        return Err(Error::Usage(format!("time cap {t_cap} must exceed start time {t0}")));
    }
    let mut stepper = Stepper::new(rhs, t0, y0, t_cap - t0, *cfg)?;
    while stepper.t < t_cap {
        stepper.advance(t_cap)?;
        if predicate(&stepper.y) {
            return Ok(EventOutcome::Crossed { time: stepper.t, state: stepper.y });
        }
    }
    Ok(EventOutcome::Timeout { time: stepper.t, state: stepper.y })
}
