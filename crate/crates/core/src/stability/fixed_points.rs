use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{jacobian_dimensionless, DimensionlessParams, Jacobian, State};

/// Default threshold separating hyperbolic from non-hyperbolic points.
pub const TOL_ZERO: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FixedPointKind {
    /// No industry and no trade (`kappa = 0`).
    Origin,
    /// Domestic equilibrium without trade.
    NoTradeInterior,
    /// No capital, inventory supplied by imports only, zero demand and price.
    ImportsOnlyTrivial,
    /// Domestic capital extinct, demand met by imports.
    UnsustainableDomestic,
    /// Domestic production coexisting with trade.
    SustainableDomestic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub kind: FixedPointKind,
    /// Dimensionless `(v, x, y, z)`; all zero when the point does not exist.
    pub state: State,
    pub exists: bool,
    pub reason: Option<String>,
    /// The point lies where `1/z` or `y/x` is undefined, so only a formal
    /// limiting linearisation is available.
    pub singular: bool,
}

impl FixedPoint {
    fn regular(kind: FixedPointKind, state: State) -> Self {
        Self { kind, state, exists: true, reason: None, singular: false }
    }

    fn boundary(kind: FixedPointKind, state: State, reason: &str) -> Self {
        Self { kind, state, exists: true, reason: Some(reason.to_string()), singular: true }
    }

    fn absent(kind: FixedPointKind, reason: String) -> Self {
        Self { kind, state: [0.0; 4], exists: false, reason: Some(reason), singular: false }
    }
}

/// Capital at the sustainable equilibrium; may be non-positive, in which
/// case the equilibrium does not exist. `None` when `kappa = 1`.
pub fn sustainable_capital(p: &DimensionlessParams) -> Option<f64> {
    let denom = 2.0 * p.delta * (1.0 + p.beta) * (1.0 - p.kappa);
    if denom == 0.0 {
        return None;
    }
    Some((2.0 * p.gamma * p.kappa * (-1.0 - p.beta) + p.alpha * (p.gamma + 2.0 * p.omega)) / denom)
}

/// All equilibria of the dimensionless system for the given trade regime.
///
/// `kappa = 0` yields the origin and the no-trade interior point; `kappa > 0`
/// yields the imports-only trivial point and the unsustainable and
/// sustainable domestic equilibria. `kappa = 1` is accepted so the
/// sustainable point can be reported as non-existent.
pub fn fixed_points(p: &DimensionlessParams) -> Result<Vec<FixedPoint>> {
    let relaxed = DimensionlessParams { kappa: if p.kappa == 1.0 { 0.5 } else { p.kappa }, ..*p };
    relaxed.validate()?;

    let balanced = p.alpha / (1.0 + p.beta);
    let interior_tail = [balanced, balanced, 1.0 / balanced];

    if p.kappa == 0.0 {
        let v = p.alpha * (2.0 * p.omega + p.gamma) / (2.0 * p.delta * (1.0 + p.beta));
        return Ok(vec![
            FixedPoint::boundary(FixedPointKind::Origin, [0.0; 4], "demand and price equations are singular at z = 0"),
            FixedPoint::regular(
                FixedPointKind::NoTradeInterior,
                [v, interior_tail[0], interior_tail[1], interior_tail[2]],
            ),
        ]);
    }

    let load = p.omega + p.gamma / 2.0;
    let imported = p.kappa * p.gamma / load;
    let mut points = vec![
        FixedPoint::boundary(
            FixedPointKind::ImportsOnlyTrivial,
            [0.0, p.kappa * p.gamma / p.omega, 0.0, 0.0],
            "demand equation is singular at z = 0",
        ),
        FixedPoint::regular(FixedPointKind::UnsustainableDomestic, [0.0, imported, imported, 1.0 / imported]),
    ];
    let sustainable = match sustainable_capital(p) {
        None => FixedPoint::absent(FixedPointKind::SustainableDomestic, "kappa = 1 leaves capital undetermined".into()),
        Some(v) if v > 0.0 => FixedPoint::regular(
            FixedPointKind::SustainableDomestic,
            [v, interior_tail[0], interior_tail[1], interior_tail[2]],
        ),
        Some(v) => FixedPoint::absent(
            FixedPointKind::SustainableDomestic,
            format!("equilibrium capital {v} is not positive (critical ratio <= 1)"),
        ),
    };
    points.push(sustainable);
    Ok(points)
}

/// Formal linearisation used on the singular boundary `z = 0`: derivatives
/// that diverge there (`d/dz` of `1/z`) are dropped and `y/x` with
/// `x = y = 0` is taken as zero. Coincides with the analytic Jacobian
/// wherever that is defined and the dropped coupling is absent.
pub fn boundary_jacobian(state: &State, p: &DimensionlessParams) -> Jacobian {
    let [v, x, y, z] = *state;
    let sum = x + y;
    let (dcx, dcy) = if sum > 0.0 { (y * y / (sum * sum), x * x / (sum * sum)) } else { (0.0, 0.0) };
    let ratio = if x > 0.0 { y / x } else { 0.0 };
    let (dzx, dzy) = if x > 0.0 { (-p.rho * z * y / (x * x), p.rho * z / x) } else { (0.0, 0.0) };
    let dyz = if z > 0.0 { -p.mu / (z * z) } else { 0.0 };
    [
        [p.alpha * z - 1.0 - p.beta, 0.0, 0.0, p.alpha * v],
        [p.delta * (1.0 - p.kappa), -p.omega - p.gamma * dcx, -p.gamma * dcy, 0.0],
        [0.0, 0.0, -p.mu, dyz],
        [0.0, dzx, dzy, p.rho * (ratio - 1.0)],
    ]
}

/// Components of the dimensionless right-hand side at `state`, or `None`
/// for components whose formula is undefined there.
pub fn residual_where_defined(state: &State, p: &DimensionlessParams) -> [Option<f64>; 4] {
    let [v, x, y, z] = *state;
    let consumption = if x + y > 0.0 { x * y / (x + y) } else { 0.0 };
    let dv = v * (p.alpha * z - 1.0) - p.beta * v;
    let dx = p.delta * v - p.omega * x - p.gamma * consumption + p.kappa * (p.gamma - p.delta * v);
    let dy = (z > 0.0).then(|| p.mu * (1.0 / z - y));
    let dz = (x > 0.0).then(|| p.rho * z * (y / x - 1.0));
    [Some(dv), Some(dx), dy, dz]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Stable,
    Unstable,
    /// Leading real part within the zero tolerance.
    NonHyperbolic,
    /// Point on the singular boundary; linearisation is only formal.
    Singular,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub fixed_point: FixedPoint,
    pub jacobian: Jacobian,
    /// Descending real part.
    pub eigenvalues: Vec<Complex64>,
    pub max_real_part: f64,
    pub verdict: Verdict,
    pub stable: bool,
    /// `-1 / max_real_part` for stable points.
    pub return_time: Option<f64>,
}

pub fn stability_report(fp: &FixedPoint, p: &DimensionlessParams, tol_zero: f64) -> Result<StabilityReport> {
    if !fp.exists {
        return Err(Error::Usage(format!("fixed point {:?} does not exist", fp.kind)));
    }
    let jacobian = if fp.singular {
        boundary_jacobian(&fp.state, p)
    } else {
        jacobian_dimensionless(&fp.state, p)?
    };
    let eigenvalues = linalg::eigenvalues(&jacobian)?;
    let max_real_part = eigenvalues[0].re;
    let verdict = if fp.singular {
        Verdict::Singular
    } else if max_real_part.abs() < tol_zero {
        Verdict::NonHyperbolic
    } else if max_real_part < 0.0 {
        Verdict::Stable
    } else {
        Verdict::Unstable
    };
    let stable = verdict == Verdict::Stable;
    Ok(StabilityReport {
        fixed_point: fp.clone(),
        jacobian,
        eigenvalues,
        max_real_part,
        verdict,
        stable,
        return_time: stable.then(|| -1.0 / max_real_part),
    })
}

/// Reports for every existing fixed point.
pub fn analyse(p: &DimensionlessParams, tol_zero: f64) -> Result<Vec<StabilityReport>> {
    fixed_points(p)?
        .iter()
        .filter(|fp| fp.exists)
        .map(|fp| stability_report(fp, p, tol_zero))
        .collect()
}

/// The capital-direction eigenvalue at the unsustainable equilibrium,
/// `alpha (omega + gamma/2) / (kappa gamma) - 1 - beta`.
pub fn unsustainable_leading_eigenvalue(p: &DimensionlessParams) -> f64 {
    p.alpha * (p.omega + p.gamma / 2.0) / (p.kappa * p.gamma) - 1.0 - p.beta
}

/// Coefficients `(c2, c1, c0)` of the monic cubic
/// `l^3 + c2 l^2 + c1 l + c0` governing the inventory, demand and price
/// directions at the unsustainable equilibrium.
///
/// Expanding the determinant of the lower 3x3 block gives
/// `(l + omega + gamma/4)(l^2 + mu l + mu rho) + (gamma/4) mu rho`.
pub fn unsustainable_cubic(p: &DimensionlessParams) -> (f64, f64, f64) {
    let diag = p.omega + p.gamma / 4.0;
    let c2 = diag + p.mu;
    let c1 = p.mu * (p.rho + diag);
    let c0 = p.mu * p.rho * (p.omega + p.gamma / 2.0);
    (c2, c1, c0)
}

/// Routh-Hurwitz test for `l^3 + c2 l^2 + c1 l + c0`: all roots lie in the
/// open left half-plane iff `c2 > 0`, `c0 > 0` and `c2 c1 > c0`.
pub fn routh_hurwitz_stable_cubic(c2: f64, c1: f64, c0: f64) -> bool {
    c2 > 0.0 && c0 > 0.0 && c2 * c1 > c0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::rhs_dimensionless;
    use crate::stability::critical_ratio;

    fn fig2bd(kappa: f64, alpha: f64) -> DimensionlessParams {
        DimensionlessParams { alpha, beta: 0.165, delta: 5.0, omega: 10.0, gamma: 26.0, kappa, mu: 1.0, rho: 1.0 }
    }

    fn find(points: &[FixedPoint], kind: FixedPointKind) -> &FixedPoint {
        points.iter().find(|p| p.kind == kind).unwrap()
    }

    #[test]
    fn no_trade_interior_with_unit_profitability() {
        let p = DimensionlessParams { alpha: 1.25, beta: 0.25, kappa: 0.0, ..fig2bd(0.0, 1.0) };
        let points = fixed_points(&p).unwrap();
        let interior = find(&points, FixedPointKind::NoTradeInterior);
        let v = (2.0 * p.omega + p.gamma) / (2.0 * p.delta);
        assert_eq!(interior.state, [v, 1.0, 1.0, 1.0]);
        assert!(find(&points, FixedPointKind::Origin).singular);
    }

    #[test]
    fn regular_points_are_stationary() {
        for (kappa, alpha) in [(0.3, 1.2), (0.8, 0.5), (0.5, 3.0)] {
            let p = fig2bd(kappa, alpha);
            for fp in fixed_points(&p).unwrap().iter().filter(|f| f.exists && !f.singular) {
                let d = rhs_dimensionless(&fp.state, &p).unwrap();
                assert!(d.iter().all(|v| v.abs() < 1e-10), "{:?}: {d:?}", fp.kind);
            }
        }
    }

    #[test]
    fn imports_only_point_defined_components_vanish() {
        let p = fig2bd(0.4, 1.0);
        let points = fixed_points(&p).unwrap();
        let trivial = find(&points, FixedPointKind::ImportsOnlyTrivial);
        let r = residual_where_defined(&trivial.state, &p);
        assert_eq!(r[0], Some(0.0));
        assert!(r[1].unwrap().abs() < 1e-12);
        assert_eq!(r[2], None);
        assert_eq!(r[3], Some(0.0));
    }

    #[test]
    fn sustainable_point_absent_below_critical() {
        let p = fig2bd(0.9, 0.5);
        assert!(critical_ratio(&p).unwrap() < 1.0);
        let points = fixed_points(&p).unwrap();
        let s = find(&points, FixedPointKind::SustainableDomestic);
        assert!(!s.exists);
        assert!(stability_report(s, &p, TOL_ZERO).is_err());
    }

    #[test]
    fn kappa_one_reports_missing_sustainable_point() {
        let p = fig2bd(1.0, 1.0);
        let points = fixed_points(&p).unwrap();
        assert!(!find(&points, FixedPointKind::SustainableDomestic).exists);
    }

    #[test]
    fn unsustainable_stable_below_critical_ratio() {
        let p = fig2bd(0.9, 0.5);
        let points = fixed_points(&p).unwrap();
        let report = stability_report(find(&points, FixedPointKind::UnsustainableDomestic), &p, TOL_ZERO).unwrap();
        assert_eq!(report.verdict, Verdict::Stable);
        let rt = report.return_time.unwrap();
        assert!((rt + 1.0 / report.max_real_part).abs() < 1e-12);
    }

    #[test]
    fn unsustainable_unstable_above_critical_ratio() {
        let p = fig2bd(0.3, 1.2);
        let points = fixed_points(&p).unwrap();
        let report = stability_report(find(&points, FixedPointKind::UnsustainableDomestic), &p, TOL_ZERO).unwrap();
        assert_eq!(report.verdict, Verdict::Unstable);
        assert!(unsustainable_leading_eigenvalue(&p) > 0.0);
        assert!(report.return_time.is_none());
    }

    #[test]
    fn origin_never_reported_stable() {
        let p = DimensionlessParams { kappa: 0.0, ..fig2bd(0.0, 1.0) };
        let origin = &fixed_points(&p).unwrap()[0];
        let report = stability_report(origin, &p, TOL_ZERO).unwrap();
        assert_eq!(report.verdict, Verdict::Singular);
        assert!(!report.stable);
        let mut re: Vec<f64> = report.eigenvalues.iter().map(|e| e.re).collect();
        re.sort_by(f64::total_cmp);
        let mut want = vec![-(1.0 + p.beta), -p.omega, -p.mu, -p.rho];
        want.sort_by(f64::total_cmp);
        for (a, b) in re.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn cubic_matches_block_characteristic_polynomial() {
        let p = DimensionlessParams { alpha: 1.1, beta: 0.3, delta: 2.0, omega: 0.7, gamma: 3.0, kappa: 0.45, mu: 0.6, rho: 2.2 };
        let load = p.omega + p.gamma / 2.0;
        let xh = p.kappa * p.gamma / load;
        let jac = jacobian_dimensionless(&[0.0, xh, xh, 1.0 / xh], &p).unwrap();
        let block: Vec<Vec<f64>> = (1..4).map(|i| (1..4).map(|j| jac[i][j]).collect()).collect();
        let poly = linalg::characteristic_polynomial(&block);
        let (c2, c1, c0) = unsustainable_cubic(&p);
        assert!((poly[2] - c2).abs() < 1e-10);
        assert!((poly[1] - c1).abs() < 1e-10);
        assert!((poly[0] - c0).abs() < 1e-10);
    }

    #[test]
    fn routh_hurwitz_simple_cases() {
        assert!(routh_hurwitz_stable_cubic(3.0, 3.0, 1.0));
        assert!(!routh_hurwitz_stable_cubic(0.0, -1.0, 0.0));
        // (l + 1)(l^2 + 4) has purely imaginary roots: c2 c1 = c0.
        assert!(!routh_hurwitz_stable_cubic(1.0, 4.0, 4.0));
    }
}
