use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::sampler::LogDensity;
use super::transform::{Decoded, Layout, ObservationNoise};
use crate::data::{Dataset, SeriesKind};
use crate::error::{Error, Result};
use crate::integrator::{integrate, IntegratorConfig};
use crate::model::{rhs_dimensional, DimensionalParams, InitialState, State};

/// What the new-supplies series is compared against.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SuppliesTarget {
    /// Model inflow `f g C + k (h - f g C)`.
    #[default]
    Inflow,
    /// Inventory stock `I`.
    State,
}

/// Log-density of a lognormal with the given median and log-scale.
pub fn lognormal_logpdf(y: f64, median: f64, sigma: f64) -> f64 {
    let z = (y.ln() - median.ln()) / sigma;
    -(y * sigma * (2.0 * PI).sqrt()).ln() - 0.5 * z * z
}

/// Standard normal prior on every sampled coordinate.
pub fn log_prior(theta: &[f64]) -> f64 {
    let norm = 0.5 * (2.0 * PI).ln();
    theta.iter().map(|t| -0.5 * t * t - norm).sum()
}

/// Model counterpart of an observed series at one state.
pub fn model_observable(kind: SeriesKind, state: &State, p: &DimensionalParams, target: SuppliesTarget) -> f64 {
    let [c, i, _, price] = *state;
    match kind {
        SeriesKind::Herd => c,
        SeriesKind::NewSupplies => match target {
            SuppliesTarget::Inflow => p.inflow(c),
            SuppliesTarget::State => i,
        },
        SeriesKind::Price => price,
        SeriesKind::Production => p.production(c),
        SeriesKind::Imports => p.imports(),
        SeriesKind::Exports => p.exports(c),
    }
}

/// States at months `0..months`, month 0 being the initial state.
pub fn monthly_states(
    p: &DimensionalParams,
    init: &InitialState,
    months: usize,
    cfg: &IntegratorConfig,
) -> Result<Vec<State>> {
    p.validate()?;
    init.validate()?;
    match months {
        0 => Ok(Vec::new()),
        1 => Ok(vec![init.as_state()]),
        n => {
            let times: Vec<f64> = (0..n).map(|i| i as f64).collect();
            let sol = integrate(|_, y| rhs_dimensional(y, p), init.as_state(), (0.0, (n - 1) as f64), &times, cfg)?;
            Ok(sol.states)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesContribution {
    pub series: SeriesKind,
    pub observations: usize,
    pub log_likelihood: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodBreakdown {
    pub total: f64,
    /// Empty when the model could not be evaluated.
    pub per_series: Vec<SeriesContribution>,
}

fn check_data(noise: &ObservationNoise, data: &Dataset) -> Result<()> {
    if data.total_observed() == 0 {
        return Err(Error::InvalidData("dataset has no observed values".into()));
    }
    for kind in data.observed_series() {
        match noise.get(kind) {
            Some(s) if s > 0.0 && s.is_finite() => {}
            Some(s) => return Err(Error::Domain(format!("noise scale for {kind} is {s}; must be positive"))),
            None => return Err(Error::Usage(format!("no noise scale given for observed series {kind}"))),
        }
        if data.series(kind).iter().flatten().any(|v| !(*v > 0.0)) {
            return Err(Error::InvalidData(format!("series {kind} has non-positive observations")));
        }
    }
    Ok(())
}

/// Lognormal log-likelihood summed over observed cells, split by series.
/// A model that cannot be integrated yields a total of negative infinity.
pub fn log_likelihood_breakdown(
    params: &DimensionalParams,
    init: &InitialState,
    noise: &ObservationNoise,
    data: &Dataset,
    cfg: &IntegratorConfig,
    target: SuppliesTarget,
) -> Result<LikelihoodBreakdown> {
    check_data(noise, data)?;
    let states = match monthly_states(params, init, data.len(), cfg) {
        Ok(s) => s,
        Err(e) => {
            log::debug!("likelihood evaluation failed: {e}");
            return Ok(LikelihoodBreakdown { total: f64::NEG_INFINITY, per_series: Vec::new() });
        }
    };
    let mut total = 0.0;
    let mut per_series = Vec::new();
    for kind in data.observed_series() {
        let sigma = noise.get(kind).expect("checked above");
        let mut sum = 0.0;
        let mut count = 0;
        for (y, state) in data.series(kind).iter().zip(&states) {
            if let Some(y) = y {
                sum += lognormal_logpdf(*y, model_observable(kind, state, params, target), sigma);
                count += 1;
            }
        }
        total += sum;
        per_series.push(SeriesContribution { series: kind, observations: count, log_likelihood: sum });
    }
    if total.is_nan() {
        total = f64::NEG_INFINITY;
    }
    Ok(LikelihoodBreakdown { total, per_series })
}

pub fn log_likelihood(
    params: &DimensionalParams,
    init: &InitialState,
    noise: &ObservationNoise,
    data: &Dataset,
    cfg: &IntegratorConfig,
    target: SuppliesTarget,
) -> Result<f64> {
    Ok(log_likelihood_breakdown(params, init, noise, data, cfg, target)?.total)
}

/// Unnormalised log-posterior over the transformed coordinates of a
/// [`Layout`].
#[derive(Debug, Clone)]
pub struct Posterior<'a> {
    pub data: &'a Dataset,
    pub layout: Layout,
    pub integrator: IntegratorConfig,
    pub target: SuppliesTarget,
}

impl<'a> Posterior<'a> {
    pub fn new(data: &'a Dataset, layout: Layout, integrator: IntegratorConfig, target: SuppliesTarget) -> Result<Self> {
        if data.total_observed() == 0 {
            return Err(Error::InvalidData("dataset has no observed values".into()));
        }
        for kind in data.observed_series() {
            if data.series(kind).iter().flatten().any(|v| !(*v > 0.0)) {
                return Err(Error::InvalidData(format!("series {kind} has non-positive observations")));
            }
        }
        integrator.validate()?;
        Ok(Self { data, layout, integrator, target })
    }

    pub fn decode(&self, theta: &[f64]) -> Decoded {
        self.layout.decode(theta)
    }

    pub fn log_likelihood(&self, theta: &[f64]) -> f64 {
        let d = self.decode(theta);
        match log_likelihood(&d.params, &d.init, &d.noise, self.data, &self.integrator, self.target) {
            Ok(v) => v,
            Err(e) => {
                log::debug!("rejecting point: {e}");
                f64::NEG_INFINITY
            }
        }
    }
}

impl LogDensity for Posterior<'_> {
    fn dim(&self) -> usize {
        self.layout.dim()
    }

    fn log_density(&self, theta: &[f64]) -> f64 {
        if theta.iter().any(|t| !t.is_finite()) {
            return f64::NEG_INFINITY;
        }
        let prior = log_prior(theta);
        let ll = self.log_likelihood(theta);
        if ll == f64::NEG_INFINITY {
            return ll;
        }
        prior + ll
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::YearMonth;

    #[test]
    fn lognormal_at_median_unit_scale() {
        let y = 3.5;
        assert!((lognormal_logpdf(y, y, 1.0) + (y * (2.0 * PI).sqrt()).ln()).abs() < 1e-15);
    }

    #[test]
    fn prior_at_zero_and_symmetry() {
        let n = 7;
        assert!((log_prior(&vec![0.0; n]) + n as f64 / 2.0 * (2.0 * PI).ln()).abs() < 1e-12);
        let with_one = log_prior(&[0.0, 1.0]) - log_prior(&[0.0, 0.0]);
        assert!((with_one + 0.5).abs() < 1e-15);
        let t = [0.3, -1.2, 2.0];
        assert_eq!(log_prior(&t), log_prior(&t.map(|x| -x)));
    }

    #[test]
    fn empty_dataset_is_an_error() {
        let none = vec![None; 3];
        let data = Dataset::new(YearMonth { year: 2015, month: 1 }, none.clone(), none.clone(), none.clone(), none.clone(), none).unwrap();
        let r = log_likelihood(
            &DimensionalParams::uk_pork_posterior_means(),
            &InitialState { c0: 4e5, i0: 1e8, d0: 2e8, p0: 130.0 },
            &ObservationNoise::uniform(0.1),
            &data,
            &IntegratorConfig::default(),
            SuppliesTarget::Inflow,
        );
        assert!(matches!(r, Err(Error::InvalidData(_))));
    }
}
