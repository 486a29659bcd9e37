//! The four-state food-system model: capital, inventory, demand and price.
//!
//! Two equivalent frames are provided. The dimensional frame works in the
//! natural units of the data (months, head, kg, pence/kg); the dimensionless
//! frame rescales states and time so that the dynamics depend on eight
//! parameter groups only.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A state vector. Dimensional order is `(C, I, D, P)`, dimensionless order
/// is `(v, x, y, z)`.
pub type State = [f64; 4];

/// A 4x4 Jacobian, row-major: `jac[i][j] = d f_i / d s_j`.
pub type Jacobian = [[f64; 4]; 4];

/// Below this the consumption denominator `sD + I` (or `x + y`) is treated
/// as zero and the consumption flow is defined as zero.
pub const CONSUMPTION_GUARD: f64 = 1e-300;

/// Parameters of the model in natural units (per month for rates).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimensionalParams {
    /// Capital growth rate.
    pub a: f64,
    /// Cost of capital production.
    pub b: f64,
    /// Capital depreciation rate.
    pub e: f64,
    /// Capital production rate.
    pub f: f64,
    /// Capital conversion factor (inventory units per capital unit).
    pub g: f64,
    /// Inventory waste rate.
    pub w: f64,
    /// Reference coverage.
    pub s: f64,
    /// Trade strength, in `[0, 1)`.
    pub k: f64,
    /// Reference demand.
    pub h: f64,
    /// Demand response rate.
    pub m: f64,
    /// Reference price.
    pub q: f64,
    /// Price growth rate.
    pub r: f64,
}

impl DimensionalParams {
    /// Reference values used for the critical-ratio sensitivity curves.
    /// Only `q, b, e, a, w, s, k` are meaningful; the remaining fields are
    /// placeholders since the critical ratio does not depend on them.
    pub fn sensitivity_reference() -> Self {
        Self {
            a: 0.2,
            b: 140.0,
            e: 0.033,
            f: 1.0,
            g: 1.0,
            w: 0.33,
            s: 1.0,
            k: 0.5,
            h: 1.0,
            m: 1.0,
            q: 160.0,
            r: 1.0,
        }
    }

    /// Posterior means reported for the UK pig industry, with `b` and `g`
    /// at their fixed values.
    pub fn uk_pork_posterior_means() -> Self {
        Self {
            a: 0.0086,
            b: 138.3,
            e: 0.0002,
            f: 2.2712,
            g: 82.4,
            w: 0.2392,
            s: 0.6703,
            k: 0.3602,
            h: 219_478_906.0,
            m: 0.0937,
            q: 132.0101,
            r: 0.1514,
        }
    }

    pub fn named_values(&self) -> [(&'static str, f64); 12] {
        [
            ("a", self.a),
            ("b", self.b),
            ("e", self.e),
            ("f", self.f),
            ("g", self.g),
            ("w", self.w),
            ("s", self.s),
            ("k", self.k),
            ("h", self.h),
            ("m", self.m),
            ("q", self.q),
            ("r", self.r),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in self.named_values() {
            if !value.is_finite() {
                return Err(Error::Domain(format!("parameter {name} is not finite")));
            }
            if name == "k" {
                if !(0.0..1.0).contains(&value) {
                    return Err(Error::Domain(format!("trade strength k = {value} outside [0, 1)")));
                }
            } else if value <= 0.0 {
                return Err(Error::Domain(format!("parameter {name} = {value} must be positive")));
            }
        }
        Ok(())
    }

    /// Domestic production flow `f g C`.
    pub fn production(&self, capital: f64) -> f64 {
        self.f * self.g * capital
    }

    /// Import flow `k h`.
    pub fn imports(&self) -> f64 {
        self.k * self.h
    }

    /// Export flow `k f g C`.
    pub fn exports(&self, capital: f64) -> f64 {
        self.k * self.production(capital)
    }

    /// Total new supplies entering inventory: production plus net trade.
    pub fn inflow(&self, capital: f64) -> f64 {
        let production = self.production(capital);
        production + self.k * (self.h - production)
    }
}

/// Initial conditions in natural units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    #[serde(rename = "C0")]
    pub c0: f64,
    #[serde(rename = "I0")]
    pub i0: f64,
    #[serde(rename = "D0")]
    pub d0: f64,
    #[serde(rename = "P0")]
    pub p0: f64,
}

impl InitialState {
    pub fn as_state(&self) -> State {
        [self.c0, self.i0, self.d0, self.p0]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [("C0", self.c0), ("I0", self.i0), ("D0", self.d0), ("P0", self.p0)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::Domain(format!("initial state {name} = {value} must be positive and finite")));
            }
        }
        Ok(())
    }
}

/// The eight dimensionless parameter groups.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimensionlessParams {
    /// Reference profitability `q / b`.
    pub alpha: f64,
    /// Depreciation ratio `e / a`.
    pub beta: f64,
    /// Initial production-demand ratio `f g C0 / (a h s)`.
    pub delta: f64,
    /// Waste ratio `w / a`.
    pub omega: f64,
    /// Capital replacement-coverage ratio `1 / (a s)`.
    pub gamma: f64,
    /// Trade strength, identical to `k`.
    pub kappa: f64,
    /// Demand response ratio `m / a`.
    pub mu: f64,
    /// Price response ratio `r / a`.
    pub rho: f64,
}

impl DimensionlessParams {
    pub fn named_values(&self) -> [(&'static str, f64); 8] {
        [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("delta", self.delta),
            ("omega", self.omega),
            ("gamma", self.gamma),
            ("kappa", self.kappa),
            ("mu", self.mu),
            ("rho", self.rho),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in self.named_values() {
            if !value.is_finite() {
                return Err(Error::Domain(format!("parameter {name} is not finite")));
            }
            if name == "kappa" {
                if !(0.0..1.0).contains(&value) {
                    return Err(Error::Domain(format!("kappa = {value} outside [0, 1)")));
                }
            } else if value <= 0.0 {
                return Err(Error::Domain(format!("parameter {name} = {value} must be positive")));
            }
        }
        Ok(())
    }

    /// Groups the dimensional parameters; `c0` only enters `delta`.
    pub fn from_dimensional(p: &DimensionalParams, c0: f64) -> Self {
        Self {
            alpha: p.q / p.b,
            beta: p.e / p.a,
            delta: p.f * p.g * c0 / (p.a * p.h * p.s),
            omega: p.w / p.a,
            gamma: 1.0 / (p.a * p.s),
            kappa: p.k,
            mu: p.m / p.a,
            rho: p.r / p.a,
        }
    }
}

/// Which coordinate system a trajectory is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    Dimensional,
    Dimensionless,
}

/// A time-indexed solution in a known frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub frame: Frame,
    pub times: Vec<f64>,
    pub states: Vec<State>,
}

impl Trajectory {
    pub fn new(frame: Frame, times: Vec<f64>, states: Vec<State>) -> Result<Self> {
        if times.len() != states.len() {
            return Err(Error::Usage(format!(
                "trajectory has {} times but {} states",
                times.len(),
                states.len()
            )));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Usage("trajectory times must be strictly increasing".into()));
        }
        Ok(Self { frame, times, states })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<(f64, State)> {
        Some((*self.times.last()?, *self.states.last()?))
    }
}

/// Output of [`nondimensionalise`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Nondimensionalised {
    pub params: DimensionlessParams,
    /// Initial state `(v, x, y, z)`; `v` is always one.
    pub state: State,
    /// Time rescaling factor: `tau = time_scale * t`.
    pub time_scale: f64,
}

pub fn nondimensionalise(p: &DimensionalParams, s0: &InitialState) -> Result<Nondimensionalised> {
    p.validate()?;
    s0.validate()?;
    Ok(Nondimensionalised {
        params: DimensionlessParams::from_dimensional(p, s0.c0),
        state: dimensionless_state(&s0.as_state(), p, s0.c0),
        time_scale: p.a,
    })
}

/// Maps a single dimensional state into the dimensionless frame.
pub fn dimensionless_state(state: &State, p: &DimensionalParams, c0: f64) -> State {
    let [c, i, d, price] = *state;
    [c / c0, i / (p.h * p.s), d / p.h, price / p.q]
}

/// Maps a single dimensionless state back into natural units.
pub fn dimensional_state(state: &State, p: &DimensionalParams, c0: f64) -> State {
    let [v, x, y, z] = *state;
    [v * c0, x * p.h * p.s, y * p.h, z * p.q]
}

pub fn redimensionalise(traj: &Trajectory, p: &DimensionalParams, s0: &InitialState) -> Result<Trajectory> {
    if traj.frame != Frame::Dimensionless {
        return Err(Error::Usage("redimensionalise expects a dimensionless trajectory".into()));
    }
    p.validate()?;
    s0.validate()?;
    Ok(Trajectory {
        frame: Frame::Dimensional,
        times: traj.times.iter().map(|tau| tau / p.a).collect(),
        states: traj.states.iter().map(|s| dimensional_state(s, p, s0.c0)).collect(),
    })
}

/// Inverse of [`redimensionalise`].
pub fn to_dimensionless(traj: &Trajectory, p: &DimensionalParams, s0: &InitialState) -> Result<Trajectory> {
    if traj.frame != Frame::Dimensional {
        return Err(Error::Usage("to_dimensionless expects a dimensional trajectory".into()));
    }
    p.validate()?;
    s0.validate()?;
    Ok(Trajectory {
        frame: Frame::Dimensionless,
        times: traj.times.iter().map(|t| t * p.a).collect(),
        states: traj.states.iter().map(|s| dimensionless_state(s, p, s0.c0)).collect(),
    })
}

fn consumption(stock: f64, demand: f64, denominator: f64) -> f64 {
    if denominator < CONSUMPTION_GUARD {
        0.0
    } else {
        stock * demand / denominator
    }
}

/// Right-hand side of the model in natural units.
pub fn rhs_dimensional(state: &State, p: &DimensionalParams) -> Result<State> {
    let [c, i, d, price] = *state;
    if !(i > 0.0) {
        return Err(Error::Singularity(format!("inventory I = {i} must be positive")));
    }
    if !(price > 0.0) {
        return Err(Error::Singularity(format!("price P = {price} must be positive")));
    }
    let production = p.f * p.g * c;
    let dc = p.a * c * (price / p.b - 1.0) - p.e * c;
    let di = production - p.w * i - consumption(i, d, p.s * d + i) + p.k * (p.h - production);
    let dd = p.m * (p.h * p.q / price - d);
    let dp = p.r * price * (p.s * d / i - 1.0);
    Ok([dc, di, dd, dp])
}

/// Right-hand side of the model in rescaled time and states.
pub fn rhs_dimensionless(state: &State, p: &DimensionlessParams) -> Result<State> {
    let [v, x, y, z] = *state;
    if !(x > 0.0) {
        return Err(Error::Singularity(format!("rescaled inventory x = {x} must be positive")));
    }
    if !(z > 0.0) {
        return Err(Error::Singularity(format!("rescaled price z = {z} must be positive")));
    }
    let dv = v * (p.alpha * z - 1.0) - p.beta * v;
    let dx = p.delta * v - p.omega * x - p.gamma * consumption(x, y, x + y) + p.kappa * (p.gamma - p.delta * v);
    let dy = p.mu * (1.0 / z - y);
    let dz = p.rho * z * (y / x - 1.0);
    Ok([dv, dx, dy, dz])
}

/// Analytic Jacobian of [`rhs_dimensionless`].
pub fn jacobian_dimensionless(state: &State, p: &DimensionlessParams) -> Result<Jacobian> {
    let [v, x, y, z] = *state;
    if !(x > 0.0) || !(z > 0.0) {
        return Err(Error::Singularity(format!(
            "Jacobian undefined at x = {x}, z = {z}; both must be positive"
        )));
    }
    let sum = x + y;
    if !(sum > 0.0) {
        return Err(Error::Singularity("Jacobian undefined where x + y = 0".into()));
    }
    let sum2 = sum * sum;
    Ok([
        [p.alpha * z - 1.0 - p.beta, 0.0, 0.0, p.alpha * v],
        [
            p.delta * (1.0 - p.kappa),
            -p.omega - p.gamma * y * y / sum2,
            -p.gamma * x * x / sum2,
            0.0,
        ],
        [0.0, 0.0, -p.mu, -p.mu / (z * z)],
        [0.0, -p.rho * z * y / (x * x), p.rho * z / x, p.rho * (y / x - 1.0)],
    ])
}
