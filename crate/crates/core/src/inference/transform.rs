use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, SeriesKind};
use crate::error::{Error, Result};
use crate::model::{DimensionalParams, InitialState};

/// Fixed cost of capital production (pence/kg); never sampled.
pub const B_FIXED: f64 = 138.3;
/// Fixed capital conversion factor (kg/pig); never sampled.
pub const G_FIXED: f64 = 82.4;

/// Every quantity the sampler can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ParamId {
    A,
    E,
    F,
    W,
    S,
    K,
    H,
    M,
    Q,
    R,
    C0,
    I0,
    D0,
    P0,
    SigmaHerd,
    SigmaSupplies,
    SigmaPrice,
    EpsProduction,
    EpsImports,
    EpsExports,
}

impl ParamId {
    pub const MODEL: [Self; 10] = [Self::A, Self::E, Self::F, Self::W, Self::S, Self::K, Self::H, Self::M, Self::Q, Self::R];
    pub const INITIAL: [Self; 4] = [Self::C0, Self::I0, Self::D0, Self::P0];

    pub fn name(self) -> &'static str {
        match self {
            Self::A => "a",
            Self::E => "e",
            Self::F => "f",
            Self::W => "w",
            Self::S => "s",
            Self::K => "k",
            Self::H => "h",
            Self::M => "m",
            Self::Q => "q",
            Self::R => "r",
            Self::C0 => "C0",
            Self::I0 => "I0",
            Self::D0 => "D0",
            Self::P0 => "P0",
            Self::SigmaHerd => "sigma_herd",
            Self::SigmaSupplies => "sigma_supplies",
            Self::SigmaPrice => "sigma_price",
            Self::EpsProduction => "eps_production",
            Self::EpsImports => "eps_imports",
            Self::EpsExports => "eps_exports",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::MODEL
            .into_iter()
            .chain(Self::INITIAL)
            .chain(SeriesKind::ALL.map(Self::noise_for))
            .find(|p| p.name() == name)
    }

    /// Noise scale attached to an observed series.
    pub fn noise_for(kind: SeriesKind) -> Self {
        match kind {
            SeriesKind::Herd => Self::SigmaHerd,
            SeriesKind::NewSupplies => Self::SigmaSupplies,
            SeriesKind::Price => Self::SigmaPrice,
            SeriesKind::Production => Self::EpsProduction,
            SeriesKind::Imports => Self::EpsImports,
            SeriesKind::Exports => Self::EpsExports,
        }
    }
}

impl fmt::Display for ParamId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Map from a natural-scale value to the sampler's unconstrained scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Transform {
    /// `theta = ln(value / scale)`.
    Log { scale: f64 },
    /// `theta = ln(value / (1 - value))`.
    Logit,
}

impl Transform {
    pub fn to_natural(self, theta: f64) -> f64 {
        match self {
            Self::Log { scale } => scale * theta.exp(),
            Self::Logit => 1.0 / (1.0 + (-theta).exp()),
        }
    }

    pub fn to_unconstrained(self, value: f64) -> Result<f64> {
        match self {
            Self::Log { scale } if value > 0.0 && value.is_finite() => Ok((value / scale).ln()),
            Self::Logit if value > 0.0 && value < 1.0 => Ok((value / (1.0 - value)).ln()),
            _ => Err(Error::Domain(format!("value {value} outside the support of {self:?}"))),
        }
    }
}

/// Divisors for the log transforms, i.e. the natural-scale value mapped to
/// zero on the sampling scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransformScales {
    pub a: f64,
    pub e: f64,
    pub f: f64,
    pub w: f64,
    pub s: f64,
    pub h: f64,
    pub m: f64,
    pub q: f64,
    pub r: f64,
    #[serde(rename = "C0")]
    pub c0: f64,
    #[serde(rename = "I0")]
    pub i0: f64,
    #[serde(rename = "D0")]
    pub d0: f64,
    #[serde(rename = "P0")]
    pub p0: f64,
    /// Shared by all observation noise scales.
    pub noise: f64,
}

impl Default for TransformScales {
    fn default() -> Self {
        Self {
            a: 0.01,
            e: 0.001,
            f: 2.0,
            w: 0.2,
            s: 1.0,
            h: 2e8,
            m: 0.1,
            q: 100.0,
            r: 0.1,
            c0: 4e5,
            i0: 1.5e8,
            d0: 2e8,
            p0: 100.0,
            noise: 0.1,
        }
    }
}

impl TransformScales {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.a, self.e, self.f, self.w, self.s, self.h, self.m, self.q, self.r, self.c0, self.i0, self.d0, self.p0,
            self.noise,
        ];
        if all.iter().all(|v| *v > 0.0 && v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Usage("transform scales must be positive and finite".into()))
        }
    }

    pub fn transform(&self, id: ParamId) -> Transform {
        let scale = match id {
            ParamId::K => return Transform::Logit,
            ParamId::A => self.a,
            ParamId::E => self.e,
            ParamId::F => self.f,
            ParamId::W => self.w,
            ParamId::S => self.s,
            ParamId::H => self.h,
            ParamId::M => self.m,
            ParamId::Q => self.q,
            ParamId::R => self.r,
            ParamId::C0 => self.c0,
            ParamId::I0 => self.i0,
            ParamId::D0 => self.d0,
            ParamId::P0 => self.p0,
            _ => self.noise,
        };
        Transform::Log { scale }
    }
}

/// Per-series lognormal scales; `None` for series that are not fitted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ObservationNoise {
    pub herd: Option<f64>,
    pub new_supplies: Option<f64>,
    pub price: Option<f64>,
    pub production: Option<f64>,
    pub imports: Option<f64>,
    pub exports: Option<f64>,
}

impl ObservationNoise {
    /// Same scale for every series.
    pub fn uniform(sigma: f64) -> Self {
        Self {
            herd: Some(sigma),
            new_supplies: Some(sigma),
            price: Some(sigma),
            production: Some(sigma),
            imports: Some(sigma),
            exports: Some(sigma),
        }
    }

    pub fn get(&self, kind: SeriesKind) -> Option<f64> {
        match kind {
            SeriesKind::Herd => self.herd,
            SeriesKind::NewSupplies => self.new_supplies,
            SeriesKind::Price => self.price,
            SeriesKind::Production => self.production,
            SeriesKind::Imports => self.imports,
            SeriesKind::Exports => self.exports,
        }
    }

    pub fn set(&mut self, kind: SeriesKind, value: Option<f64>) {
        let slot = match kind {
            SeriesKind::Herd => &mut self.herd,
            SeriesKind::NewSupplies => &mut self.new_supplies,
            SeriesKind::Price => &mut self.price,
            SeriesKind::Production => &mut self.production,
            SeriesKind::Imports => &mut self.imports,
            SeriesKind::Exports => &mut self.exports,
        };
        *slot = value;
    }
}

/// A point in parameter space on the natural scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decoded {
    pub params: DimensionalParams,
    pub init: InitialState,
    pub noise: ObservationNoise,
}

/// Ordered list of sampled quantities with their transforms. Model
/// parameters and initial conditions are always present; a noise scale is
/// included only for series that have observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub ids: Vec<ParamId>,
    pub transforms: Vec<Transform>,
}

impl Layout {
    pub fn for_dataset(data: &Dataset, scales: &TransformScales) -> Self {
        let ids: Vec<ParamId> = ParamId::MODEL
            .into_iter()
            .chain(ParamId::INITIAL)
            .chain(data.observed_series().into_iter().map(ParamId::noise_for))
            .collect();
        let transforms = ids.iter().map(|id| scales.transform(*id)).collect();
        Self { ids, transforms }
    }

    pub fn dim(&self) -> usize {
        self.ids.len()
    }

    pub fn index_of(&self, id: ParamId) -> Option<usize> {
        self.ids.iter().position(|p| *p == id)
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.ids.iter().map(|p| p.name()).collect()
    }

    pub fn to_natural(&self, theta: &[f64]) -> Vec<f64> {
        theta.iter().zip(&self.transforms).map(|(t, tr)| tr.to_natural(*t)).collect()
    }

    pub fn to_unconstrained(&self, natural: &[f64]) -> Result<Vec<f64>> {
        natural.iter().zip(&self.transforms).map(|(v, tr)| tr.to_unconstrained(*v)).collect()
    }

    /// Builds the natural-scale vector for this layout.
    pub fn encode_natural(&self, point: &Decoded) -> Result<Vec<f64>> {
        let p = &point.params;
        let s = &point.init;
        self.ids
            .iter()
            .map(|id| {
                let v = match id {
                    ParamId::A => p.a,
                    ParamId::E => p.e,
                    ParamId::F => p.f,
                    ParamId::W => p.w,
                    ParamId::S => p.s,
                    ParamId::K => p.k,
                    ParamId::H => p.h,
                    ParamId::M => p.m,
                    ParamId::Q => p.q,
                    ParamId::R => p.r,
                    ParamId::C0 => s.c0,
                    ParamId::I0 => s.i0,
                    ParamId::D0 => s.d0,
                    ParamId::P0 => s.p0,
                    noise => {
                        let kind = SeriesKind::ALL.into_iter().find(|k| ParamId::noise_for(*k) == *noise).unwrap();
                        point
                            .noise
                            .get(kind)
                            .ok_or_else(|| Error::Usage(format!("missing noise scale for {kind}")))?
                    }
                };
                Ok(v)
            })
            .collect()
    }

    pub fn encode(&self, point: &Decoded) -> Result<Vec<f64>> {
        self.to_unconstrained(&self.encode_natural(point)?)
    }

    /// Interprets a natural-scale vector laid out per `self.ids`.
    pub fn decode_natural(&self, natural: &[f64]) -> Decoded {
        let mut params = DimensionalParams {
            a: 0.0,
            b: B_FIXED,
            e: 0.0,
            f: 0.0,
            g: G_FIXED,
            w: 0.0,
            s: 0.0,
            k: 0.0,
            h: 0.0,
            m: 0.0,
            q: 0.0,
            r: 0.0,
        };
        let mut init = InitialState { c0: 0.0, i0: 0.0, d0: 0.0, p0: 0.0 };
        let mut noise = ObservationNoise::default();
        for (id, &v) in self.ids.iter().zip(natural) {
            match id {
                ParamId::A => params.a = v,
                ParamId::E => params.e = v,
                ParamId::F => params.f = v,
                ParamId::W => params.w = v,
                ParamId::S => params.s = v,
                ParamId::K => params.k = v,
                ParamId::H => params.h = v,
                ParamId::M => params.m = v,
                ParamId::Q => params.q = v,
                ParamId::R => params.r = v,
                ParamId::C0 => init.c0 = v,
                ParamId::I0 => init.i0 = v,
                ParamId::D0 => init.d0 = v,
                ParamId::P0 => init.p0 = v,
                ParamId::SigmaHerd => noise.herd = Some(v),
                ParamId::SigmaSupplies => noise.new_supplies = Some(v),
                ParamId::SigmaPrice => noise.price = Some(v),
                ParamId::EpsProduction => noise.production = Some(v),
                ParamId::EpsImports => noise.imports = Some(v),
                ParamId::EpsExports => noise.exports = Some(v),
            }
        }
        Decoded { params, init, noise }
    }

    pub fn decode(&self, theta: &[f64]) -> Decoded {
        self.decode_natural(&self.to_natural(theta))
    }
}
