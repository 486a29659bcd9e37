use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::diagnostics::{ess, hdi, split_rhat};
use super::likelihood::{Posterior, SuppliesTarget};
use super::sampler::{run_chains, Chains, McmcConfig};
use super::transform::{Decoded, Layout, ObservationNoise, ParamId, TransformScales};
use crate::data::{Dataset, SeriesKind};
use crate::error::{Error, Result};
use crate::integrator::IntegratorConfig;
use crate::model::{DimensionalParams, DimensionlessParams, InitialState};
use crate::stability::{critical_ratio, surplus_ratio};

/// Integrator settings used inside the likelihood: looser than the default
/// and with a step cap so that pathological proposals fail fast.
pub fn fit_integrator() -> IntegratorConfig {
    IntegratorConfig { rel_tol: 1e-7, abs_tol: 1e-6, max_steps: 20_000, ..IntegratorConfig::default() }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub chains: usize,
    pub warmup: usize,
    pub draws: usize,
    pub seed: u64,
    pub steps_per_draw: usize,
    pub init_spread: f64,
    pub init_attempts: usize,
    pub target_acceptance: f64,
    pub transform_scales: TransformScales,
    pub supplies_target: SuppliesTarget,
    pub integrator: IntegratorConfig,
    pub hdi_mass: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        let m = McmcConfig::default();
        Self {
            chains: m.chains,
            warmup: m.warmup,
            draws: m.draws,
            seed: m.seed,
            steps_per_draw: m.steps_per_draw,
            init_spread: m.init_spread,
            init_attempts: m.init_attempts,
            target_acceptance: m.target_acceptance,
            transform_scales: TransformScales::default(),
            supplies_target: SuppliesTarget::Inflow,
            integrator: fit_integrator(),
            hdi_mass: 0.95,
        }
    }
}

impl FitConfig {
    pub fn mcmc(&self) -> McmcConfig {
        McmcConfig {
            chains: self.chains,
            warmup: self.warmup,
            draws: self.draws,
            seed: self.seed,
            steps_per_draw: self.steps_per_draw,
            init_spread: self.init_spread,
            init_attempts: self.init_attempts,
            target_acceptance: self.target_acceptance,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub layout: Layout,
    pub chains: Chains,
    pub config: FitConfig,
}

impl FitResult {
    /// Natural-scale draws of coordinate `j`, one vector per chain.
    pub fn natural_component(&self, j: usize) -> Vec<Vec<f64>> {
        let tr = self.layout.transforms[j];
        self.chains.map(|d| tr.to_natural(d[j]))
    }

    /// Every draw decoded, chain-major.
    pub fn decoded(&self) -> Vec<Decoded> {
        self.chains.draws.iter().flatten().map(|d| self.layout.decode(d)).collect()
    }
}

pub fn sample_posterior(data: &Dataset, cfg: &FitConfig) -> Result<FitResult> {
    cfg.transform_scales.validate()?;
    if !(cfg.hdi_mass > 0.0 && cfg.hdi_mass <= 1.0) {
        return Err(Error::Usage("hdi_mass must lie in (0, 1]".into()));
    }
    let layout = Layout::for_dataset(data, &cfg.transform_scales);
    let posterior = Posterior::new(data, layout.clone(), cfg.integrator, cfg.supplies_target)?;
    let chains = run_chains(&posterior, &cfg.mcmc())?;
    Ok(FitResult { layout, chains, config: *cfg })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantitySummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub hdi_lower: f64,
    pub hdi_upper: f64,
    pub ess: f64,
    pub rhat: f64,
}

/// Mean, standard deviation, HDI, summed ESS and split R-hat of one scalar
/// quantity given per-chain draws.
pub fn summarise(name: &str, chains: &[Vec<f64>], mass: f64) -> Result<QuantitySummary> {
    let all: Vec<f64> = chains.concat();
    let n = all.len() as f64;
    if n < 2.0 {
        return Err(Error::Usage(format!("not enough draws to summarise {name}")));
    }
    let mean = all.iter().sum::<f64>() / n;
    let sd = (all.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let (hdi_lower, hdi_upper) = hdi(&all, mass)?;
    let rhat = if chains.len() >= 2 { split_rhat(chains)? } else { f64::NAN };
    Ok(QuantitySummary { name: name.to_string(), mean, sd, hdi_lower, hdi_upper, ess: ess(chains), rhat })
}

pub fn parameter_summaries(fit: &FitResult) -> Result<Vec<QuantitySummary>> {
    (0..fit.layout.dim())
        .map(|j| summarise(fit.layout.ids[j].name(), &fit.natural_component(j), fit.config.hdi_mass))
        .collect()
}

pub const DERIVED_NAMES: [&str; 5] =
    ["critical_ratio", "surplus_ratio", "critical_kappa", "alpha_minus_surplus", "surplus_minus_one"];

/// Derived quantities of one parameter draw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedDraw {
    pub critical_ratio: f64,
    pub surplus_ratio: f64,
    /// Trade strength at which the critical ratio would reach one.
    pub critical_kappa: f64,
    pub alpha_minus_surplus: f64,
    pub surplus_minus_one: f64,
}

impl DerivedDraw {
    pub fn values(&self) -> [f64; 5] {
        [self.critical_ratio, self.surplus_ratio, self.critical_kappa, self.alpha_minus_surplus, self.surplus_minus_one]
    }
}

pub fn derived_quantities(p: &DimensionalParams) -> Result<DerivedDraw> {
    // The ratios do not involve delta, so the capital scale is irrelevant.
    let nd = DimensionlessParams::from_dimensional(p, 1.0);
    let critical = critical_ratio(&nd)?;
    let surplus = surplus_ratio(&nd)?;
    Ok(DerivedDraw {
        critical_ratio: critical,
        surplus_ratio: surplus,
        critical_kappa: surplus,
        alpha_minus_surplus: nd.alpha - surplus,
        surplus_minus_one: surplus - 1.0,
    })
}

/// Per-chain draws of every derived quantity, in [`DERIVED_NAMES`] order.
pub fn derived_chains(fit: &FitResult) -> Result<Vec<Vec<Vec<f64>>>> {
    let mut out = vec![vec![Vec::with_capacity(fit.chains.n_draws()); fit.chains.n_chains()]; DERIVED_NAMES.len()];
    for (c, chain) in fit.chains.draws.iter().enumerate() {
        for d in chain {
            let values = derived_quantities(&fit.layout.decode(d).params)?.values();
            for (q, v) in values.iter().enumerate() {
                out[q][c].push(*v);
            }
        }
    }
    Ok(out)
}

pub fn derived_summaries(fit: &FitResult) -> Result<Vec<QuantitySummary>> {
    derived_chains(fit)?
        .iter()
        .zip(DERIVED_NAMES)
        .map(|(chains, name)| summarise(name, chains, fit.config.hdi_mass))
        .collect()
}

const FIXED_AND_MODEL: [&str; 12] = ["a", "b", "e", "f", "g", "w", "s", "k", "h", "m", "q", "r"];

fn chain_columns(layout: &Layout) -> Vec<String> {
    let mut cols = vec!["chain".to_string(), "iteration".to_string()];
    cols.extend(FIXED_AND_MODEL.iter().map(|s| s.to_string()));
    cols.extend(ParamId::INITIAL.iter().map(|p| p.name().to_string()));
    cols.extend(
        layout
            .ids
            .iter()
            .filter(|id| !ParamId::MODEL.contains(id) && !ParamId::INITIAL.contains(id))
            .map(|p| p.name().to_string()),
    );
    cols.push("log_posterior".to_string());
    cols
}

/// One row per post-warmup draw with every quantity on its natural scale.
pub fn write_chains_csv<W: Write>(fit: &FitResult, out: W) -> Result<()> {
    let cols = chain_columns(&fit.layout);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&cols)?;
    for (c, chain) in fit.chains.draws.iter().enumerate() {
        for (i, theta) in chain.iter().enumerate() {
            let d = fit.layout.decode(theta);
            let p = d.params;
            let mut row = vec![c.to_string(), i.to_string()];
            row.extend(p.named_values().iter().map(|(_, v)| v.to_string()));
            row.extend([d.init.c0, d.init.i0, d.init.d0, d.init.p0].iter().map(f64::to_string));
            for kind in SeriesKind::ALL {
                if fit.layout.index_of(ParamId::noise_for(kind)).is_some() {
                    row.push(d.noise.get(kind).unwrap_or(f64::NAN).to_string());
                }
            }
            row.push(fit.chains.log_density[c][i].to_string());
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads draws written by [`write_chains_csv`]; lines starting with `#`
/// are ignored.
pub fn read_chains_csv<R: Read>(input: R) -> Result<Vec<Decoded>> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let col = |name: &str| header.iter().position(|h| h == name);
    let mut model_idx = [0usize; 12];
    for (slot, name) in model_idx.iter_mut().zip(FIXED_AND_MODEL) {
        *slot = col(name).ok_or_else(|| Error::InvalidData(format!("chains file lacks column '{name}'")))?;
    }
    let mut init_idx = [0usize; 4];
    for (slot, id) in init_idx.iter_mut().zip(ParamId::INITIAL) {
        *slot = col(id.name()).ok_or_else(|| Error::InvalidData(format!("chains file lacks column '{id}'")))?;
    }
    let noise_idx: Vec<(SeriesKind, usize)> = SeriesKind::ALL
        .into_iter()
        .filter_map(|k| col(ParamId::noise_for(k).name()).map(|i| (k, i)))
        .collect();

    let mut draws = Vec::new();
    for (r, rec) in reader.records().enumerate() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> {
            rec.get(i).and_then(|s| s.trim().parse().ok()).ok_or_else(|| Error::Load {
                row: r + 2,
                column: header[i].clone(),
                message: "not a number".into(),
            })
        };
        let v: Vec<f64> = model_idx.iter().map(|&i| num(i)).collect::<Result<_>>()?;
        let params = DimensionalParams {
            a: v[0],
            b: v[1],
            e: v[2],
            f: v[3],
            g: v[4],
            w: v[5],
            s: v[6],
            k: v[7],
            h: v[8],
            m: v[9],
            q: v[10],
            r: v[11],
        };
        let init = InitialState { c0: num(init_idx[0])?, i0: num(init_idx[1])?, d0: num(init_idx[2])?, p0: num(init_idx[3])? };
        let mut noise = ObservationNoise::default();
        for &(kind, i) in &noise_idx {
            noise.set(kind, Some(num(i)?));
        }
        draws.push(Decoded { params, init, noise });
    }
    if draws.is_empty() {
        return Err(Error::InvalidData("chains file has no draws".into()));
    }
    Ok(draws)
}
