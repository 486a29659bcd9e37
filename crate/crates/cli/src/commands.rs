use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use foodsys::data::{self, Dataset};
use foodsys::inference::{
    derived_chains, derived_summaries, parameter_summaries, posterior_predictive, predictive_bands,
    read_chains_csv, sample_posterior, write_chains_csv, FitConfig, PredictiveConfig, QuantitySummary, DERIVED_NAMES,
};
use foodsys::integrator::IntegratorConfig;
use foodsys::model::{to_dimensionless, DimensionalParams, DimensionlessParams, Trajectory};
use foodsys::simulate::{simulate_dimensional, simulate_dimensionless};
use foodsys::stability::{
    analyse, classify_regime, critical_ratio, critical_trade_strength, regime_map, routh_hurwitz_stable_cubic,
    sensitivity_curve, surplus_ratio, unsustainable_cubic, unsustainable_leading_eigenvalue, write_regime_csv,
    write_sensitivity_csv, CriticalTradeStrength, Regime, RegimeGrid, SensitivityParam, StabilityReport, TOL_ZERO,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::output::{opt, sha256_hex, write_rows, Format, Metadata, OutDir};
use crate::params::{self, ParamsFile};

/// Options shared by every subcommand.
pub struct Global {
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub format: Format,
}

impl Global {
    fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}

fn read_input(path: &Path) -> Result<(Vec<u8>, String)> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let hash = sha256_hex(&bytes);
    Ok((bytes, hash))
}

fn read_params(path: &Path) -> Result<(ParamsFile, String)> {
    let (bytes, hash) = read_input(path)?;
    let text = String::from_utf8(bytes).context("parameter file is not UTF-8")?;
    let parsed = params::parse(&text).with_context(|| format!("in {}", path.display()))?;
    Ok((parsed, hash))
}

/// Loads a dataset from a CSV path or the bundled snapshot and returns it
/// with an input label and the hash of its bytes.
pub fn load_dataset(path: Option<&Path>, bundled: bool) -> Result<(Dataset, (String, String))> {
    match (path, bundled) {
        (Some(p), false) => {
            let (bytes, hash) = read_input(p)?;
            let data = data::read_csv(bytes.as_slice()).with_context(|| format!("loading {}", p.display()))?;
            Ok((data, ("data".into(), hash)))
        }
        (None, true) => {
            let data = data::bundled_uk_snapshot();
            let mut bytes = Vec::new();
            data::write_csv(&data, &mut bytes)?;
            Ok((data, ("bundled_uk".into(), sha256_hex(&bytes))))
        }
        _ => bail!("give exactly one of --data FILE or --bundled-uk"),
    }
}

fn observation_times(horizon: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step.is_finite()) {
        bail!("--obs-step must be positive");
    }
    if !(horizon >= step && horizon.is_finite()) {
        bail!("--horizon must be at least one observation step");
    }
    let n = (horizon / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| i as f64 * step).collect())
}

fn trajectory_rows(traj: &Trajectory) -> impl Iterator<Item = Vec<String>> + '_ {
    traj.times.iter().zip(&traj.states).map(|(t, s)| {
        let mut row = vec![t.to_string()];
        row.extend(s.iter().map(f64::to_string));
        row
    })
}

fn write_trajectory(out: &OutDir, stem: &str, format: Format, meta: &Metadata, traj: &Trajectory) -> Result<PathBuf> {
    let header: &[&str] = if stem.ends_with("dimensionless") {
        &["tau", "v", "x", "y", "z"]
    } else {
        &["t", "C", "I", "D", "P"]
    };
    out.artifact(stem, format, meta, traj, |buf| write_rows(buf, header, trajectory_rows(traj)))
}

pub fn simulate(
    g: &Global,
    params_path: &Path,
    horizon: Option<f64>,
    obs_step: f64,
    integrator: IntegratorConfig,
) -> Result<Vec<PathBuf>> {
    integrator.validate()?;
    let (file, hash) = read_params(params_path)?;
    let horizon = horizon.unwrap_or(120.0);
    let times = observation_times(horizon, obs_step)?;
    let out = OutDir::new(&g.out)?;
    let config = json!({ "horizon": horizon, "obs_step": obs_step, "integrator": integrator });
    let meta = Metadata::new("simulate", g.seed(), &config, vec![("params".into(), hash)]);
    match file {
        ParamsFile::Dimensional { params, init, .. } => {
            let init = init.context("simulate needs all of C0, I0, D0 and P0 in a dimensional parameter file")?;
            let traj = simulate_dimensional(&params, &init, &times, &integrator)?;
            let nd = to_dimensionless(&traj, &params, &init)?;
            Ok(vec![
                write_trajectory(&out, "trajectory_dimensional", g.format, &meta, &traj)?,
                write_trajectory(&out, "trajectory_dimensionless", g.format, &meta, &nd)?,
            ])
        }
        ParamsFile::Dimensionless { params, start } => {
            let traj = simulate_dimensionless(&params, &start, &times, &integrator)?;
            Ok(vec![write_trajectory(&out, "trajectory_dimensionless", g.format, &meta, &traj)?])
        }
    }
}

#[derive(Serialize)]
struct FixedPointEntry {
    #[serde(flatten)]
    report: StabilityReport,
    /// Return time in months for a dimensional parameter file.
    return_time_months: Option<f64>,
}

#[derive(Serialize)]
struct UnsustainablePoint {
    leading_eigenvalue: f64,
    cubic: [f64; 3],
    routh_hurwitz_stable: bool,
}

#[derive(Serialize)]
struct StabilityOutput {
    frame: &'static str,
    dimensionless: DimensionlessParams,
    time_scale: Option<f64>,
    fixed_points: Vec<FixedPointEntry>,
    critical_ratio: Option<f64>,
    surplus_ratio: f64,
    critical_kappa: CriticalTradeStrength,
    regime: Option<Regime>,
    unsustainable_point: Option<UnsustainablePoint>,
}

pub fn stability(g: &Global, params_path: &Path, tol_zero: Option<f64>) -> Result<Vec<PathBuf>> {
    let (file, hash) = read_params(params_path)?;
    let tol = tol_zero.unwrap_or(TOL_ZERO);
    let (frame, nd, time_scale) = match file {
        ParamsFile::Dimensional { params, c0, .. } => {
            ("dimensional", DimensionlessParams::from_dimensional(&params, c0.unwrap_or(1.0)), Some(params.a))
        }
        ParamsFile::Dimensionless { params, .. } => ("dimensionless", params, None),
    };
    let reports = analyse(&nd, tol)?;
    let fixed_points = reports
        .into_iter()
        .map(|report| {
            let months = time_scale.and_then(|a| report.return_time.map(|rt| rt / a));
            FixedPointEntry { report, return_time_months: months }
        })
        .collect::<Vec<_>>();
    let unsustainable_point = (nd.kappa > 0.0).then(|| {
        let (c2, c1, c0) = unsustainable_cubic(&nd);
        UnsustainablePoint {
            leading_eigenvalue: unsustainable_leading_eigenvalue(&nd),
            cubic: [c2, c1, c0],
            routh_hurwitz_stable: routh_hurwitz_stable_cubic(c2, c1, c0),
        }
    });
    let report = StabilityOutput {
        frame,
        dimensionless: nd,
        time_scale,
        critical_ratio: critical_ratio(&nd).ok(),
        surplus_ratio: surplus_ratio(&nd)?,
        critical_kappa: critical_trade_strength(&nd)?,
        regime: classify_regime(&nd).ok(),
        unsustainable_point,
        fixed_points,
    };

    let out = OutDir::new(&g.out)?;
    let config = json!({ "tol_zero": tol });
    let meta = Metadata::new("stability", g.seed(), &config, vec![("params".into(), hash)]);
    let mut written = vec![out.json("stability", &meta, &report)?];
    let rows: Vec<Vec<String>> = report
        .fixed_points
        .iter()
        .flat_map(|fp| {
            let kind = format!("{:?}", fp.report.fixed_point.kind);
            let verdict = format!("{:?}", fp.report.verdict);
            fp.report.eigenvalues.iter().enumerate().map(move |(i, ev)| {
                vec![kind.clone(), verdict.clone(), i.to_string(), ev.re.to_string(), ev.im.to_string()]
            })
        })
        .collect();
    let eigen_payload: Vec<Value> = report
        .fixed_points
        .iter()
        .map(|fp| json!({ "kind": fp.report.fixed_point.kind, "verdict": fp.report.verdict, "eigenvalues": fp.report.eigenvalues }))
        .collect();
    written.push(out.artifact("eigenvalues", g.format, &meta, &eigen_payload, |buf| {
        write_rows(buf, &["fixed_point", "verdict", "index", "re", "im"], rows)
    })?);
    Ok(written)
}

pub fn regime(
    g: &Global,
    config_path: Option<&Path>,
    verify: bool,
    integrator: IntegratorConfig,
) -> Result<Vec<PathBuf>> {
    integrator.validate()?;
    let (grid, inputs) = match config_path {
        Some(p) => {
            let (bytes, hash) = read_input(p)?;
            let grid: RegimeGrid =
                serde_json::from_slice(&bytes).with_context(|| format!("invalid regime grid in {}", p.display()))?;
            (grid, vec![("grid".to_string(), hash)])
        }
        None => (RegimeGrid::default(), Vec::new()),
    };
    let cells = regime_map(&grid, verify, &integrator)?;
    if verify {
        let disagree = cells.iter().filter(|c| c.inconsistent()).count();
        log::info!("{} of {} cells disagree with simulation", disagree, cells.len());
        if disagree > 0 {
            eprintln!("warning: {disagree} of {} cells disagree with the simulated attractor", cells.len());
        }
    }
    let out = OutDir::new(&g.out)?;
    let config = json!({ "grid": grid, "verify": verify, "integrator": integrator });
    let meta = Metadata::new("regime-map", g.seed(), &config, inputs);
    Ok(vec![out.artifact("regime_map", g.format, &meta, &cells, |buf| Ok(write_regime_csv(&cells, buf)?))?])
}

fn default_multipliers() -> Vec<f64> {
    (0..=30).map(|i| 0.5 + 0.05 * i as f64).collect()
}

pub fn sensitivity(
    g: &Global,
    params_path: Option<&Path>,
    which: &[SensitivityParam],
    multipliers: Option<Vec<f64>>,
) -> Result<Vec<PathBuf>> {
    let (reference, inputs) = match params_path {
        Some(p) => match read_params(p)? {
            (ParamsFile::Dimensional { params, .. }, hash) => (params, vec![("params".to_string(), hash)]),
            _ => bail!("sensitivity needs a dimensional parameter file"),
        },
        None => (DimensionalParams::sensitivity_reference(), Vec::new()),
    };
    let which = if which.is_empty() { SensitivityParam::ALL.to_vec() } else { which.to_vec() };
    let multipliers = multipliers.unwrap_or_else(default_multipliers);
    let mut points = Vec::new();
    for &w in &which {
        points.extend(sensitivity_curve(&reference, w, &multipliers)?);
    }
    let out = OutDir::new(&g.out)?;
    let config = json!({ "reference": reference, "parameters": which, "multipliers": multipliers });
    let meta = Metadata::new("sensitivity", g.seed(), &config, inputs);
    Ok(vec![out.artifact("sensitivity", g.format, &meta, &points, |buf| Ok(write_sensitivity_csv(&points, buf)?))?])
}

#[derive(Debug, Default, Clone, Copy)]
pub struct FitOverrides {
    pub chains: Option<usize>,
    pub warmup: Option<usize>,
    pub draws: Option<usize>,
    pub steps_per_draw: Option<usize>,
}

#[derive(Serialize)]
struct FitSummary<'a> {
    chains: usize,
    draws_per_chain: usize,
    acceptance: &'a [f64],
    parameters: Vec<QuantitySummary>,
    derived: Vec<QuantitySummary>,
    max_rhat: f64,
    min_ess: f64,
}

pub fn fit(
    g: &Global,
    data_path: Option<&Path>,
    bundled: bool,
    config_path: Option<&Path>,
    overrides: FitOverrides,
) -> Result<Vec<PathBuf>> {
    let (data, data_input) = load_dataset(data_path, bundled)?;
    let mut inputs = vec![data_input];
    let mut cfg = match config_path {
        Some(p) => {
            let (bytes, hash) = read_input(p)?;
            inputs.push(("fit_config".into(), hash));
            serde_json::from_slice::<FitConfig>(&bytes).with_context(|| format!("invalid fit config in {}", p.display()))?
        }
        None => FitConfig::default(),
    };
    if let Some(seed) = g.seed {
        cfg.seed = seed;
    }
    cfg.chains = overrides.chains.unwrap_or(cfg.chains);
    cfg.warmup = overrides.warmup.unwrap_or(cfg.warmup);
    cfg.draws = overrides.draws.unwrap_or(cfg.draws);
    cfg.steps_per_draw = overrides.steps_per_draw.unwrap_or(cfg.steps_per_draw);

    let fit = sample_posterior(&data, &cfg)?;
    let parameters = parameter_summaries(&fit)?;
    let derived = derived_summaries(&fit)?;
    let all = parameters.iter().chain(&derived);
    let max_rhat = all.clone().map(|s| s.rhat).fold(f64::NEG_INFINITY, f64::max);
    let min_ess = all.map(|s| s.ess).fold(f64::INFINITY, f64::min);
    if max_rhat > 1.01 {
        eprintln!("warning: max split R-hat {max_rhat:.4} exceeds 1.01; consider more warmup or draws");
    }

    let out = OutDir::new(&g.out)?;
    let meta = Metadata::new("fit", cfg.seed, &serde_json::to_value(cfg)?, inputs);
    let mut written = vec![out.csv("chains", &meta, |buf| Ok(write_chains_csv(&fit, buf)?))?];
    let summary = FitSummary {
        chains: fit.chains.n_chains(),
        draws_per_chain: fit.chains.n_draws(),
        acceptance: &fit.chains.acceptance,
        parameters,
        derived,
        max_rhat,
        min_ess,
    };
    written.push(out.json("summary", &meta, &summary)?);

    let dchains = derived_chains(&fit)?;
    let mut header = vec!["chain", "iteration"];
    header.extend(DERIVED_NAMES);
    let mut rows = Vec::new();
    let mut records = Vec::new();
    for c in 0..fit.chains.n_chains() {
        for i in 0..fit.chains.n_draws() {
            let values: Vec<f64> = dchains.iter().map(|q| q[c][i]).collect();
            let mut row = vec![c.to_string(), i.to_string()];
            row.extend(values.iter().map(f64::to_string));
            rows.push(row);
            let mut rec = serde_json::Map::new();
            rec.insert("chain".into(), json!(c));
            rec.insert("iteration".into(), json!(i));
            for (name, v) in DERIVED_NAMES.iter().zip(&values) {
                rec.insert(name.to_string(), json!(v));
            }
            records.push(Value::Object(rec));
        }
    }
    written.push(out.artifact("derived_draws", g.format, &meta, &records, |buf| write_rows(buf, &header, rows))?);
    Ok(written)
}

pub fn predict(
    g: &Global,
    chains_path: &Path,
    data_path: Option<&Path>,
    bundled: bool,
    n_draws: usize,
) -> Result<Vec<PathBuf>> {
    let (data, data_input) = load_dataset(data_path, bundled)?;
    let (bytes, chains_hash) = read_input(chains_path)?;
    let draws = read_chains_csv(bytes.as_slice()).with_context(|| format!("reading {}", chains_path.display()))?;
    let cfg = PredictiveConfig { n_draws, seed: g.seed(), ..PredictiveConfig::default() };
    let ensemble = posterior_predictive(&draws, &data, &cfg)?;
    if ensemble.draws.is_empty() {
        bail!("every selected posterior draw failed to integrate");
    }
    if ensemble.skipped > 0 {
        eprintln!("warning: {} of the selected draws failed to integrate and were skipped", ensemble.skipped);
    }
    let bands = predictive_bands(&ensemble, &data);

    let out = OutDir::new(&g.out)?;
    let meta =
        Metadata::new("predict", cfg.seed, &serde_json::to_value(cfg)?, vec![data_input, ("chains".into(), chains_hash)]);
    let band_rows = bands.iter().map(|b| {
        vec![
            b.series.to_string(),
            b.month.to_string(),
            data.month(b.month).to_string(),
            opt(b.observed),
            b.lower.to_string(),
            b.median.to_string(),
            b.upper.to_string(),
        ]
    });
    let mut written = vec![out.artifact("predictive_bands", g.format, &meta, &bands, |buf| {
        write_rows(buf, &["series", "month_index", "month", "observed", "lower", "median", "upper"], band_rows)
    })?];

    let mut draw_rows = Vec::new();
    for (k, d) in ensemble.draws.iter().enumerate() {
        for (s, kind) in ensemble.series.iter().enumerate() {
            for (t, v) in d.values[s].iter().enumerate() {
                if let Some(v) = v {
                    draw_rows.push(vec![
                        k.to_string(),
                        d.source.to_string(),
                        kind.to_string(),
                        t.to_string(),
                        data.month(t).to_string(),
                        v.to_string(),
                    ]);
                }
            }
        }
    }
    written.push(out.artifact("predictive_draws", g.format, &meta, &ensemble, |buf| {
        write_rows(buf, &["draw", "source", "series", "month_index", "month", "value"], draw_rows)
    })?);
    Ok(written)
}

pub fn validate_data(g: &Global, data_path: Option<&Path>, bundled: bool) -> Result<Vec<PathBuf>> {
    let (data, input) = load_dataset(data_path, bundled)?;
    let report = data::validate(&data);
    for f in &report.findings {
        let series = f.series.map(|s| format!(" [{s}]")).unwrap_or_default();
        eprintln!("{:?}{series}: {}", f.severity, f.message);
    }
    let out = OutDir::new(&g.out)?;
    let meta = Metadata::new("validate-data", g.seed(), &json!({}), vec![input]);
    Ok(vec![out.json("validation", &meta, &report)?])
}
