use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::diagnostics::quantile_sorted;
use super::likelihood::{model_observable, monthly_states, SuppliesTarget};
use super::transform::Decoded;
use crate::data::{Dataset, SeriesKind};
use crate::error::{Error, Result};
use crate::integrator::IntegratorConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictiveConfig {
    pub n_draws: usize,
    pub seed: u64,
    pub supplies_target: SuppliesTarget,
    pub integrator: IntegratorConfig,
}

impl Default for PredictiveConfig {
    fn default() -> Self {
        Self {
            n_draws: 200,
            seed: 0,
            supplies_target: SuppliesTarget::Inflow,
            integrator: IntegratorConfig::default(),
        }
    }
}

/// Pseudo-observations for one posterior draw; `values[s][t]` is `None`
/// where the data has no observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveDraw {
    /// Position of the source draw in the input list.
    pub source: usize,
    pub values: Vec<Vec<Option<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveEnsemble {
    pub series: Vec<SeriesKind>,
    pub months: usize,
    pub requested: usize,
    /// Draws whose model integration failed.
    pub skipped: usize,
    pub draws: Vec<PredictiveDraw>,
}

fn simulate_draw(
    source: usize,
    draw: &Decoded,
    data: &Dataset,
    series: &[SeriesKind],
    cfg: &PredictiveConfig,
    rng: &mut ChaCha8Rng,
) -> Result<PredictiveDraw> {
    let states = monthly_states(&draw.params, &draw.init, data.len(), &cfg.integrator)?;
    let values = series
        .iter()
        .map(|&kind| {
            let sigma = draw.noise.get(kind).unwrap_or(0.0);
            data.series(kind)
                .iter()
                .zip(&states)
                .map(|(obs, state)| {
                    obs.map(|_| {
                        let mean = model_observable(kind, state, &draw.params, cfg.supplies_target);
                        if sigma == 0.0 {
                            mean
                        } else {
                            mean * (sigma * rng.sample::<f64, _>(StandardNormal)).exp()
                        }
                    })
                })
                .collect()
        })
        .collect();
    Ok(PredictiveDraw { source, values })
}

/// Samples `cfg.n_draws` posterior draws without replacement (all of them
/// if fewer are available), integrates each over the data horizon and adds
/// lognormal noise at the observed cells.
pub fn posterior_predictive(draws: &[Decoded], data: &Dataset, cfg: &PredictiveConfig) -> Result<PredictiveEnsemble> {
    if draws.is_empty() {
        return Err(Error::Usage("no posterior draws supplied".into()));
    }
    if cfg.n_draws == 0 {
        return Err(Error::Usage("n_draws must be positive".into()));
    }
    let series = data.observed_series();
    if series.is_empty() {
        return Err(Error::InvalidData("dataset has no observed values".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let take = cfg.n_draws.min(draws.len());
    let chosen = rand::seq::index::sample(&mut rng, draws.len(), take).into_vec();

    let results: Vec<Option<PredictiveDraw>> = chosen
        .par_iter()
        .enumerate()
        .map(|(k, &src)| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(k as u64 + 1);
            match simulate_draw(src, &draws[src], data, &series, cfg, &mut rng) {
                Ok(d) => Some(d),
                Err(e) => {
                    log::debug!("predictive draw {src} skipped: {e}");
                    None
                }
            }
        })
        .collect();
    let skipped = results.iter().filter(|r| r.is_none()).count();
    Ok(PredictiveEnsemble {
        series,
        months: data.len(),
        requested: cfg.n_draws,
        skipped,
        draws: results.into_iter().flatten().collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub series: SeriesKind,
    pub month: usize,
    pub observed: Option<f64>,
    pub lower: f64,
    pub median: f64,
    pub upper: f64,
}

/// 2.5%, 50% and 97.5% quantiles of the ensemble at every observed cell.
pub fn predictive_bands(ensemble: &PredictiveEnsemble, data: &Dataset) -> Vec<Band> {
    let mut bands = Vec::new();
    for (s, &kind) in ensemble.series.iter().enumerate() {
        for t in 0..ensemble.months {
            let mut values: Vec<f64> = ensemble.draws.iter().filter_map(|d| d.values[s][t]).collect();
            if values.is_empty() {
                continue;
            }
            values.sort_by(f64::total_cmp);
            bands.push(Band {
                series: kind,
                month: t,
                observed: data.series(kind)[t],
                lower: quantile_sorted(&values, 0.025),
                median: quantile_sorted(&values, 0.5),
                upper: quantile_sorted(&values, 0.975),
            });
        }
    }
    bands
}

/// Fraction of `held_out` observations inside the central 95% bands.
pub fn band_coverage(bands: &[Band], held_out: &Dataset) -> f64 {
    let mut inside = 0usize;
    let mut total = 0usize;
    for b in bands {
        if let Some(y) = held_out.series(b.series).get(b.month).copied().flatten() {
            total += 1;
            if y >= b.lower && y <= b.upper {
                inside += 1;
            }
        }
    }
    if total == 0 {
        0.0
    } else {
        inside as f64 / total as f64
    }
}
