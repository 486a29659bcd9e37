use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::likelihood::monthly_states;
use crate::data::{Dataset, YearMonth};
use crate::error::{Error, Result};
use crate::integrator::IntegratorConfig;
use crate::model::{DimensionalParams, InitialState};

/// Which months carry a breeding-herd value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HerdSampling {
    Monthly,
    /// June and December only.
    Survey,
}

/// Recipe for a dataset simulated from known parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub params: DimensionalParams,
    pub init: InitialState,
    pub months: usize,
    pub start: YearMonth,
    pub herd_sampling: HerdSampling,
    /// Lognormal scales for herd, production, imports, exports and price.
    pub noise: [f64; 5],
    pub seed: u64,
}

impl SyntheticSpec {
    /// Posterior-mean parameters for the UK pig sector with a start state
    /// somewhat below equilibrium, 60 months from 2015-01.
    pub fn uk_reference(noise: f64, seed: u64) -> Self {
        Self {
            params: DimensionalParams::uk_pork_posterior_means(),
            init: InitialState { c0: 420_000.0, i0: 1.3e8, d0: 2.0e8, p0: 135.0 },
            months: 60,
            start: YearMonth { year: 2015, month: 1 },
            herd_sampling: HerdSampling::Monthly,
            noise: [noise; 5],
            seed,
        }
    }
}

/// Integrates the model and perturbs each raw series with independent
/// multiplicative lognormal noise.
pub fn synthetic_dataset(spec: &SyntheticSpec, cfg: &IntegratorConfig) -> Result<Dataset> {
    if spec.noise.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
        return Err(Error::Usage("synthetic noise scales must be non-negative".into()));
    }
    let states = monthly_states(&spec.params, &spec.init, spec.months, cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut noisy = |value: f64, sigma: f64| value * (sigma * rng.sample::<f64, _>(StandardNormal)).exp();
    let p = &spec.params;
    let [s_herd, s_prod, s_imp, s_exp, s_price] = spec.noise;
    let (mut herd, mut production, mut imports, mut exports, mut price) =
        (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (t, state) in states.iter().enumerate() {
        let [c, _, _, pr] = *state;
        let h = noisy(c, s_herd);
        let surveyed = matches!(spec.start.offset(t).month, 6 | 12);
        herd.push((spec.herd_sampling == HerdSampling::Monthly || surveyed).then_some(h));
        production.push(Some(noisy(p.production(c), s_prod)));
        imports.push(Some(noisy(p.imports(), s_imp)));
        exports.push(Some(noisy(p.exports(c), s_exp)));
        price.push(Some(noisy(pr, s_price)));
    }
    Dataset::new(spec.start, herd, production, imports, exports, price)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SeriesKind;

    #[test]
    fn noiseless_data_follow_the_model() {
        let mut spec = SyntheticSpec::uk_reference(0.0, 1);
        spec.months = 12;
        let d = synthetic_dataset(&spec, &IntegratorConfig::default()).unwrap();
        assert_eq!(d.series(SeriesKind::Herd)[0], Some(420_000.0));
        assert_eq!(d.series(SeriesKind::Price)[0], Some(135.0));
        let p = spec.params;
        assert_eq!(d.series(SeriesKind::Imports)[5], Some(p.k * p.h));
    }

    #[test]
    fn survey_sampling_keeps_june_and_december() {
        let mut spec = SyntheticSpec::uk_reference(0.05, 2);
        spec.herd_sampling = HerdSampling::Survey;
        let d = synthetic_dataset(&spec, &IntegratorConfig::default()).unwrap();
        assert_eq!(d.observed_count(SeriesKind::Herd), 10);
        assert!(d.series(SeriesKind::Herd)[5].is_some());
        assert!(d.series(SeriesKind::Herd)[0].is_none());
    }

    #[test]
    fn same_seed_same_data() {
        let spec = SyntheticSpec::uk_reference(0.05, 3);
        let cfg = IntegratorConfig::default();
        assert_eq!(synthetic_dataset(&spec, &cfg).unwrap(), synthetic_dataset(&spec, &cfg).unwrap());
    }
}
