use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::DimensionlessParams;

fn check_finite(p: &DimensionlessParams) -> Result<()> {
    for (name, value) in p.named_values() {
        if !value.is_finite() {
            return Err(Error::Domain(format!("parameter {name} is not finite")));
        }
    }
    Ok(())
}

/// `alpha (omega + gamma / 2) / (kappa gamma (1 + beta))`.
///
/// Below one the imports-only equilibrium is stable and domestic production
/// collapses. Only `kappa > 0` is required, so values of `kappa >= 1` used
/// in sensitivity sweeps still evaluate.
pub fn critical_ratio(p: &DimensionlessParams) -> Result<f64> {
    check_finite(p)?;
    if !(p.kappa > 0.0) {
        return Err(Error::UndefinedRatio(format!(
            "kappa = {} (the no-trade analysis applies instead)",
            p.kappa
        )));
    }
    Ok(p.alpha * (p.omega + p.gamma / 2.0) / (p.kappa * p.gamma * (1.0 + p.beta)))
}

/// `alpha (omega + gamma / 2) / (gamma (1 + beta))`; above one the
/// sustainable equilibrium is a net exporter.
pub fn surplus_ratio(p: &DimensionlessParams) -> Result<f64> {
    check_finite(p)?;
    Ok(p.alpha * (p.omega + p.gamma / 2.0) / (p.gamma * (1.0 + p.beta)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalTradeStrength {
    /// Trade strength at which the critical ratio equals one.
    pub kappa: f64,
    /// False when `kappa >= 1`: no admissible trade strength makes the
    /// domestic industry unsustainable.
    pub reachable: bool,
}

pub fn critical_trade_strength(p: &DimensionlessParams) -> Result<CriticalTradeStrength> {
    let kappa = surplus_ratio(p)?;
    Ok(CriticalTradeStrength { kappa, reachable: kappa < 1.0 })
}
