use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fixed_points::sustainable_capital;
use super::ratios::{critical_ratio, surplus_ratio};
use crate::error::{Error, Result};
use crate::integrator::{integrate, IntegratorConfig};
use crate::model::{rhs_dimensionless, DimensionalParams, DimensionlessParams, State};

/// Ratios within this distance of one are flagged as boundary cases.
pub const BOUNDARY_BAND: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeKind {
    Unsustainable,
    SustainableNetImporter,
    SustainableNetExporter,
}

impl RegimeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Unsustainable => "unsustainable",
            Self::SustainableNetImporter => "sustainable_net_importer",
            Self::SustainableNetExporter => "sustainable_net_exporter",
        }
    }
}

impl fmt::Display for RegimeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    pub kind: RegimeKind,
    pub critical_ratio: f64,
    pub surplus_ratio: f64,
    /// One of the deciding ratios lies within [`BOUNDARY_BAND`] of one.
    pub boundary: bool,
}

pub fn classify_regime(p: &DimensionlessParams) -> Result<Regime> {
    if !(p.kappa > 0.0 && p.kappa < 1.0) {
        return Err(Error::Domain(format!("regime classification needs 0 < kappa < 1, got {}", p.kappa)));
    }
    let critical = critical_ratio(p)?;
    let surplus = surplus_ratio(p)?;
    let (kind, boundary) = if critical < 1.0 {
        (RegimeKind::Unsustainable, (critical - 1.0).abs() < BOUNDARY_BAND)
    } else {
        let kind = if surplus > 1.0 {
            RegimeKind::SustainableNetExporter
        } else {
            RegimeKind::SustainableNetImporter
        };
        let boundary = (critical - 1.0).abs() < BOUNDARY_BAND || (surplus - 1.0).abs() < BOUNDARY_BAND;
        (kind, boundary)
    };
    Ok(Regime { kind, critical_ratio: critical, surplus_ratio: surplus, boundary })
}

/// Outcome of integrating one cell from the canonical start state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub final_state: Option<State>,
    /// Attractor inferred from the final state; `None` if undecided.
    pub label: Option<RegimeKind>,
    pub error: Option<String>,
}

/// Integrates to `horizon` and labels the end state: capital collapsing
/// toward zero is unsustainable, capital settled near the sustainable level
/// is split by the sign of net exports `delta v - gamma`.
pub fn probe_attractor(p: &DimensionlessParams, start: &State, horizon: f64, cfg: &IntegratorConfig) -> Probe {
    let sol = match integrate(|_, y| rhs_dimensionless(y, p), *start, (0.0, horizon), &[horizon], cfg) {
        Ok(sol) => sol,
        Err(e) => {
            log::debug!("regime probe failed at {p:?}: {e}");
            return Probe { final_state: None, label: None, error: Some(e.to_string()) };
        }
    };
    let end = sol.states[0];
    let [v, _, _, z] = end;
    let growth = p.alpha * z - 1.0 - p.beta;
    let v_hat = sustainable_capital(p).filter(|v| *v > 0.0);
    let label = if v < 1e-4 {
        Some(RegimeKind::Unsustainable)
    } else if v_hat.is_some_and(|vh| (v - vh).abs() < 0.5 * vh) {
        if p.delta * v > p.gamma {
            Some(RegimeKind::SustainableNetExporter)
        } else {
            Some(RegimeKind::SustainableNetImporter)
        }
    } else if growth < 0.0 {
        Some(RegimeKind::Unsustainable)
    } else {
        None
    };
    Probe { final_state: Some(end), label, error: None }
}

/// Sweep over `(kappa, alpha)` cells for each `beta`, other groups fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegimeGrid {
    pub kappa_range: (f64, f64),
    pub kappa_steps: usize,
    pub alpha_range: (f64, f64),
    pub alpha_steps: usize,
    pub betas: Vec<f64>,
    pub delta: f64,
    pub omega: f64,
    pub gamma: f64,
    pub mu: f64,
    pub rho: f64,
    pub horizon: f64,
    pub start: State,
}

impl Default for RegimeGrid {
    fn default() -> Self {
        Self {
            kappa_range: (0.0, 1.0),
            kappa_steps: 20,
            alpha_range: (0.0, 3.0),
            alpha_steps: 20,
            betas: vec![0.165, 0.5, 1.0],
            delta: 5.0,
            omega: 10.0,
            gamma: 26.0,
            mu: 1.0,
            rho: 1.0,
            horizon: 500.0,
            start: [1.0, 1.0, 1.0, 1.0],
        }
    }
}

fn cell_centres(range: (f64, f64), steps: usize) -> Vec<f64> {
    let width = (range.1 - range.0) / steps as f64;
    (0..steps).map(|i| range.0 + width * (i as f64 + 0.5)).collect()
}

impl RegimeGrid {
    pub fn validate(&self) -> Result<()> {
        if self.kappa_steps == 0 || self.alpha_steps == 0 || self.betas.is_empty() {
            return Err(Error::Usage("regime grid needs at least one kappa, alpha and beta value".into()));
        }
        let (k0, k1) = self.kappa_range;
        if !(0.0 <= k0 && k0 < k1 && k1 <= 1.0) {
            return Err(Error::Usage(format!("kappa range ({k0}, {k1}) must lie within [0, 1]")));
        }
        let (a0, a1) = self.alpha_range;
        if !(0.0 <= a0 && a0 < a1 && a1.is_finite()) {
            return Err(Error::Usage(format!("alpha range ({a0}, {a1}) must be increasing and non-negative")));
        }
        if !(self.horizon > 0.0) {
            return Err(Error::Usage("horizon must be positive".into()));
        }
        Ok(())
    }

    pub fn kappas(&self) -> Vec<f64> {
        cell_centres(self.kappa_range, self.kappa_steps)
    }

    pub fn alphas(&self) -> Vec<f64> {
        cell_centres(self.alpha_range, self.alpha_steps)
    }

    pub fn params(&self, kappa: f64, alpha: f64, beta: f64) -> DimensionlessParams {
        DimensionlessParams {
            alpha,
            beta,
            delta: self.delta,
            omega: self.omega,
            gamma: self.gamma,
            kappa,
            mu: self.mu,
            rho: self.rho,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeCell {
    pub kappa: f64,
    pub alpha: f64,
    pub beta: f64,
    pub regime: Regime,
    pub probe: Option<Probe>,
    /// Whether the simulated attractor matches the analytic label; `None`
    /// when simulation was not requested.
    pub simulated_agreement: Option<bool>,
}

impl RegimeCell {
    pub fn inconsistent(&self) -> bool {
        self.simulated_agreement == Some(false)
    }
}

/// Analytic regime for every grid cell, ordered by beta, then kappa, then
/// alpha. Cells are evaluated in parallel.
pub fn regime_map(grid: &RegimeGrid, verify_by_simulation: bool, cfg: &IntegratorConfig) -> Result<Vec<RegimeCell>> {
    grid.validate()?;
    let mut coords = Vec::new();
    for &beta in &grid.betas {
        for &kappa in &grid.kappas() {
            for &alpha in &grid.alphas() {
                coords.push((kappa, alpha, beta));
            }
        }
    }
    coords
        .par_iter()
        .map(|&(kappa, alpha, beta)| {
            let p = grid.params(kappa, alpha, beta);
            let regime = classify_regime(&p)?;
            let probe = verify_by_simulation.then(|| probe_attractor(&p, &grid.start, grid.horizon, cfg));
            let simulated_agreement = probe.as_ref().map(|pr| pr.label == Some(regime.kind));
            Ok(RegimeCell { kappa, alpha, beta, regime, probe, simulated_agreement })
        })
        .collect()
}

pub fn write_regime_csv<W: Write>(cells: &[RegimeCell], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["kappa", "alpha", "beta", "critical_ratio", "surplus_ratio", "regime", "simulated_agreement"])?;
    for c in cells {
        let agreement = match c.simulated_agreement {
            Some(true) => "true",
            Some(false) => "false",
            None => "",
        };
        w.write_record([
            c.kappa.to_string(),
            c.alpha.to_string(),
            c.beta.to_string(),
            c.regime.critical_ratio.to_string(),
            c.regime.surplus_ratio.to_string(),
            c.regime.kind.to_string(),
            agreement.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Dimensional parameters that the critical-ratio sensitivity sweep may vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SensitivityParam {
    Q,
    B,
    E,
    A,
    W,
    S,
    K,
}

impl SensitivityParam {
    pub const ALL: [Self; 7] = [Self::Q, Self::B, Self::E, Self::A, Self::W, Self::S, Self::K];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Q => "q",
            Self::B => "b",
            Self::E => "e",
            Self::A => "a",
            Self::W => "w",
            Self::S => "s",
            Self::K => "k",
        }
    }

    fn scale(self, p: &mut DimensionalParams, m: f64) {
        let field = match self {
            Self::Q => &mut p.q,
            Self::B => &mut p.b,
            Self::E => &mut p.e,
            Self::A => &mut p.a,
            Self::W => &mut p.w,
            Self::S => &mut p.s,
            Self::K => &mut p.k,
        };
        *field *= m;
    }
}

impl fmt::Display for SensitivityParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SensitivityParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::Usage(format!("unknown sensitivity parameter '{s}' (expected one of q, b, e, a, w, s, k)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityPoint {
    pub parameter: SensitivityParam,
    pub multiplier: f64,
    pub critical_ratio: f64,
}

/// Critical ratio with one parameter scaled by each multiplier. Scaling `k`
/// beyond one is allowed; the ratio formula stays defined.
pub fn sensitivity_curve(
    reference: &DimensionalParams,
    which: SensitivityParam,
    multipliers: &[f64],
) -> Result<Vec<SensitivityPoint>> {
    multipliers
        .iter()
        .map(|&m| {
            if !(m > 0.0) || !m.is_finite() {
                return Err(Error::Domain(format!("multiplier {m} must be positive and finite")));
            }
            let mut p = *reference;
            which.scale(&mut p, m);
            let ratio = critical_ratio(&DimensionlessParams::from_dimensional(&p, 1.0))?;
            Ok(SensitivityPoint { parameter: which, multiplier: m, critical_ratio: ratio })
        })
        .collect()
}

pub fn write_sensitivity_csv<W: Write>(points: &[SensitivityPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["parameter", "multiplier", "critical_ratio"])?;
    for p in points {
        w.write_record([p.parameter.to_string(), p.multiplier.to_string(), p.critical_ratio.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn panel(kappa: f64, alpha: f64) -> DimensionlessParams {
        RegimeGrid::default().params(kappa, alpha, 0.165)
    }

    #[test]
    fn example_cell_is_net_importer() {
        let r = classify_regime(&panel(0.5, 1.0)).unwrap();
        assert_relative_eq!(r.critical_ratio, 23.0 / 15.145, epsilon = 1e-12);
        assert_relative_eq!(r.surplus_ratio, 23.0 / 30.29, epsilon = 1e-12);
        assert_eq!(r.kind, RegimeKind::SustainableNetImporter);
        assert!(!r.boundary);
    }

    #[test]
    fn uk_means_are_net_importer() {
        let p = DimensionlessParams::from_dimensional(&DimensionalParams::uk_pork_posterior_means(), 1.0);
        assert_eq!(classify_regime(&p).unwrap().kind, RegimeKind::SustainableNetImporter);
    }

    #[test]
    fn just_above_critical_kappa_is_unsustainable() {
        let p = panel(0.5, 1.0);
        let kstar = surplus_ratio(&p).unwrap();
        let r = classify_regime(&DimensionlessParams { kappa: kstar * 1.001, ..p }).unwrap();
        assert_eq!(r.kind, RegimeKind::Unsustainable);
    }

    #[test]
    fn boundary_flag() {
        let p = panel(0.5, 1.0);
        let kstar = surplus_ratio(&p).unwrap();
        let r = classify_regime(&DimensionlessParams { kappa: kstar, ..p }).unwrap();
        assert!(r.boundary);
    }

    #[test]
    fn kappa_outside_open_interval_rejected() {
        assert!(classify_regime(&panel(0.0, 1.0)).is_err());
        assert!(classify_regime(&panel(1.0, 1.0)).is_err());
    }

    #[test]
    fn tiny_alpha_row_unsustainable() {
        let grid = RegimeGrid { alpha_range: (0.0, 1e-3), alpha_steps: 1, betas: vec![0.165], ..Default::default() };
        let cells = regime_map(&grid, false, &IntegratorConfig::default()).unwrap();
        assert_eq!(cells.len(), 20);
        assert!(cells.iter().all(|c| c.regime.kind == RegimeKind::Unsustainable));
    }

    #[test]
    fn map_order_is_beta_kappa_alpha() {
        let grid = RegimeGrid { kappa_steps: 2, alpha_steps: 3, betas: vec![0.1, 0.2], ..Default::default() };
        let cells = regime_map(&grid, false, &IntegratorConfig::default()).unwrap();
        assert_eq!(cells.len(), 12);
        assert_eq!((cells[0].kappa, cells[0].alpha, cells[0].beta), (0.25, 0.5, 0.1));
        assert_eq!((cells[1].kappa, cells[1].alpha), (0.25, 1.5));
        assert_eq!(cells[3].kappa, 0.75);
        assert_eq!(cells[6].beta, 0.2);
    }

    #[test]
    fn probe_recognises_each_regime() {
        let cfg = IntegratorConfig::default();
        let start = [1.0; 4];
        for (kappa, alpha, want) in [
            (0.3, 1.2, RegimeKind::SustainableNetImporter),
            (0.9, 0.5, RegimeKind::Unsustainable),
            (0.2, 2.9, RegimeKind::SustainableNetExporter),
        ] {
            let p = panel(kappa, alpha);
            assert_eq!(classify_regime(&p).unwrap().kind, want);
            let probe = probe_attractor(&p, &start, 500.0, &cfg);
            assert_eq!(probe.label, Some(want), "{probe:?}");
        }
    }

    #[test]
    fn csv_has_long_format_header() {
        let grid = RegimeGrid { kappa_steps: 1, alpha_steps: 1, betas: vec![0.5], ..Default::default() };
        let cells = regime_map(&grid, false, &IntegratorConfig::default()).unwrap();
        let mut buf = Vec::new();
        write_regime_csv(&cells, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "kappa,alpha,beta,critical_ratio,surplus_ratio,regime,simulated_agreement"
        );
        assert!(lines.next().unwrap().ends_with(','));
    }

    #[test]
    fn sensitivity_curves_meet_at_reference() {
        let reference = DimensionalParams::sensitivity_reference();
        for which in SensitivityParam::ALL {
            let curve = sensitivity_curve(&reference, which, &[1.0]).unwrap();
            assert_relative_eq!(curve[0].critical_ratio, 1.628_448_804_414_47, epsilon = 1e-12);
        }
    }

    #[test]
    fn q_curve_linear_and_k_curve_reciprocal() {
        let reference = DimensionalParams::sensitivity_reference();
        let ms = [0.25, 0.5, 2.0, 3.0];
        let base = sensitivity_curve(&reference, SensitivityParam::Q, &[1.0]).unwrap()[0].critical_ratio;
        for pt in sensitivity_curve(&reference, SensitivityParam::Q, &ms).unwrap() {
            assert_relative_eq!(pt.critical_ratio, base * pt.multiplier, max_relative = 1e-14);
        }
        for pt in sensitivity_curve(&reference, SensitivityParam::K, &ms).unwrap() {
            assert_relative_eq!(pt.critical_ratio, base / pt.multiplier, max_relative = 1e-14);
        }
    }

    #[test]
    fn non_positive_multiplier_rejected() {
        let reference = DimensionalParams::sensitivity_reference();
        assert!(matches!(
            sensitivity_curve(&reference, SensitivityParam::A, &[0.0]),
            Err(Error::Domain(_))
        ));
        assert!("z".parse::<SensitivityParam>().is_err());
        assert_eq!("w".parse::<SensitivityParam>().unwrap(), SensitivityParam::W);
    }
}
