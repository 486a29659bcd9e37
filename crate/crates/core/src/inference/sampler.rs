//! Adaptive random-walk Metropolis with per-chain deterministic streams.
//!
//! Warmup uses a fast initial phase (step scale only), a series of doubling
//! slow windows at whose end the proposal covariance is re-estimated from
//! the window's draws, and a final fast phase. The step scale follows a
//! Robbins-Monro recursion on its logarithm toward the target acceptance
//! rate and restarts at every window boundary. Everything is frozen once
//! warmup ends.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Unnormalised log-density over `R^dim`. `-inf` marks excluded points.
pub trait LogDensity: Sync {
    fn dim(&self) -> usize;
    fn log_density(&self, theta: &[f64]) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McmcConfig {
    pub chains: usize,
    pub warmup: usize,
    pub draws: usize,
    pub seed: u64,
    /// Metropolis transitions between consecutive stored iterations.
    pub steps_per_draw: usize,
    /// Standard deviation of the random initial points around zero.
    pub init_spread: f64,
    pub init_attempts: usize,
    pub target_acceptance: f64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            chains: 4,
            warmup: 2500,
            draws: 2500,
            seed: 0,
            steps_per_draw: 700,
            init_spread: 0.5,
            init_attempts: 100,
            target_acceptance: 0.234,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.chains == 0 || self.draws == 0 || self.steps_per_draw == 0 || self.init_attempts == 0 {
            return Err(Error::Usage("chains, draws, steps_per_draw and init_attempts must be positive".into()));
        }
        if !(self.init_spread >= 0.0 && self.init_spread.is_finite()) {
            return Err(Error::Usage("init_spread must be non-negative".into()));
        }
        if !(self.target_acceptance > 0.0 && self.target_acceptance < 1.0) {
            return Err(Error::Usage("target_acceptance must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Post-warmup draws on the sampler's coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chains {
    pub dim: usize,
    /// `draws[chain][iteration]` is a point of length `dim`.
    pub draws: Vec<Vec<Vec<f64>>>,
    pub log_density: Vec<Vec<f64>>,
    /// Post-warmup acceptance rate per chain.
    pub acceptance: Vec<f64>,
    pub warmup_acceptance: Vec<f64>,
    /// Final proposal step scale per chain.
    pub step_scale: Vec<f64>,
    pub seed: u64,
}

impl Chains {
    pub fn n_chains(&self) -> usize {
        self.draws.len()
    }

    pub fn n_draws(&self) -> usize {
        self.draws.first().map_or(0, Vec::len)
    }

    /// Coordinate `j` of every draw, one vector per chain.
    pub fn component(&self, j: usize) -> Vec<Vec<f64>> {
        self.draws.iter().map(|c| c.iter().map(|d| d[j]).collect()).collect()
    }

    /// Applies `f` to every draw, preserving the chain structure.
    pub fn map<F: Fn(&[f64]) -> f64>(&self, f: F) -> Vec<Vec<f64>> {
        self.draws.iter().map(|c| c.iter().map(|d| f(d)).collect()).collect()
    }
}

/// Lower Cholesky factor; `None` if `a` is not positive definite.
fn cholesky(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = a[i][i] - s;
                if !(d > 0.0) {
                    return None;
                }
                l[i][i] = d.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    Some(l)
}

fn covariance(samples: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = samples.len() as f64;
    let d = samples[0].len();
    let mut mean = vec![0.0; d];
    for s in samples {
        for (m, v) in mean.iter_mut().zip(s) {
            *m += v / n;
        }
    }
    let mut cov = vec![vec![0.0; d]; d];
    for s in samples {
        for i in 0..d {
            let di = s[i] - mean[i];
            for j in 0..=i {
                cov[i][j] += di * (s[j] - mean[j]);
            }
        }
    }
    for i in 0..d {
        for j in 0..=i {
            cov[i][j] /= n - 1.0;
            cov[j][i] = cov[i][j];
        }
    }
    cov
}

/// Shrinks a window covariance toward a small multiple of the identity.
fn regularised(samples: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = samples.len() as f64;
    let mut cov = covariance(samples);
    let w = n / (n + 5.0);
    for (i, row) in cov.iter_mut().enumerate() {
        for v in row.iter_mut() {
            *v *= w;
        }
        row[i] += 1e-3 * 5.0 / (n + 5.0);
    }
    cov
}

/// First iteration of the slow phase and the iterations at which slow
/// windows end.
fn schedule(warmup: usize) -> (usize, Vec<usize>) {
    if warmup < 20 {
        return (warmup, Vec::new());
    }
    let (init, term, base) = if warmup >= 150 {
        (75, 50, 25)
    } else {
        ((warmup * 15) / 100, warmup / 10, warmup - (warmup * 15) / 100 - warmup / 10)
    };
    let last = warmup - term;
    let mut ends = Vec::new();
    let mut start = init;
    let mut size = base;
    while start < last {
        let mut end = start + size;
        if end + 2 * size > last {
            end = last;
        }
        ends.push(end);
        start = end;
        size *= 2;
    }
    (init, ends)
}

struct Proposal {
    chol: Vec<Vec<f64>>,
    log_scale: f64,
}

impl Proposal {
    fn propose(&self, theta: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
        let d = theta.len();
        let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let s = self.log_scale.exp();
        (0..d)
            .map(|i| theta[i] + s * (0..=i).map(|k| self.chol[i][k] * z[k]).sum::<f64>())
            .collect()
    }
}

struct ChainOutput {
    draws: Vec<Vec<f64>>,
    log_density: Vec<f64>,
    acceptance: f64,
    warmup_acceptance: f64,
    step_scale: f64,
}

fn initial_point<T: LogDensity>(target: &T, cfg: &McmcConfig, rng: &mut ChaCha8Rng) -> Result<(Vec<f64>, f64)> {
    for _ in 0..cfg.init_attempts {
        let theta: Vec<f64> = (0..target.dim()).map(|_| cfg.init_spread * rng.sample::<f64, _>(StandardNormal)).collect();
        let lp = target.log_density(&theta);
        if lp.is_finite() {
            return Ok((theta, lp));
        }
    }
    Err(Error::SamplerFailure(format!(
        "no initial point with finite log-density after {} attempts",
        cfg.init_attempts
    )))
}

fn run_chain<T: LogDensity>(target: &T, cfg: &McmcConfig, chain: usize) -> Result<ChainOutput> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(chain as u64);
    let d = target.dim();
    let (mut theta, mut lp) = initial_point(target, cfg, &mut rng)?;

    let mut identity = vec![vec![0.0; d]; d];
    for (i, row) in identity.iter_mut().enumerate() {
        row[i] = 0.1;
    }
    let mut proposal = Proposal { chol: identity, log_scale: (2.38 / (d as f64).sqrt()).ln() };
    let (mut window_start, ends) = schedule(cfg.warmup);
    let mut next_end = 0;
    let mut window: Vec<Vec<f64>> = Vec::new();
    let mut rm_t = 0usize;
    let mut accepted = [0usize; 2];
    let mut proposed = [0usize; 2];

    let mut draws = Vec::with_capacity(cfg.draws);
    let mut log_density = Vec::with_capacity(cfg.draws);

    for iter in 0..cfg.warmup + cfg.draws {
        let adapting = iter < cfg.warmup;
        let phase = usize::from(!adapting);
        for _ in 0..cfg.steps_per_draw {
            let candidate = proposal.propose(&theta, &mut rng);
            let lp_new = target.log_density(&candidate);
            let log_ratio = lp_new - lp;
            let accept_prob = if log_ratio.is_nan() { 0.0 } else { log_ratio.min(0.0).exp() };
            let u: f64 = rng.random();
            proposed[phase] += 1;
            if u < accept_prob {
                theta = candidate;
                lp = lp_new;
                accepted[phase] += 1;
            }
            if adapting {
                rm_t += 1;
                proposal.log_scale += (rm_t as f64).powf(-0.6) * (accept_prob - cfg.target_acceptance);
            }
        }
        if adapting {
            if iter >= window_start && next_end < ends.len() {
                window.push(theta.clone());
                if iter + 1 == ends[next_end] {
                    let cov = regularised(&window);
                    if let Some(l) = cholesky(&cov) {
                        proposal.chol = l;
                        proposal.log_scale = (2.38 / (d as f64).sqrt()).ln();
                    }
                    window.clear();
                    rm_t = 0;
                    window_start = iter + 1;
                    next_end += 1;
                }
            }
        } else {
            draws.push(theta.clone());
            log_density.push(lp);
        }
    }
    let rate = |i: usize| if proposed[i] == 0 { 0.0 } else { accepted[i] as f64 / proposed[i] as f64 };
    Ok(ChainOutput {
        draws,
        log_density,
        acceptance: rate(1),
        warmup_acceptance: rate(0),
        step_scale: proposal.log_scale.exp(),
    })
}

/// Runs `cfg.chains` independent chains in parallel. Output depends only on
/// the target and `cfg`, not on thread scheduling.
pub fn run_chains<T: LogDensity>(target: &T, cfg: &McmcConfig) -> Result<Chains> {
    cfg.validate()?;
    if target.dim() == 0 {
        return Err(Error::Usage("target has no dimensions".into()));
    }
    let outputs: Vec<ChainOutput> = (0..cfg.chains)
        .into_par_iter()
        .map(|c| run_chain(target, cfg, c))
        .collect::<Result<_>>()?;
    let acceptance: Vec<f64> = outputs.iter().map(|o| o.acceptance).collect();
    if acceptance.iter().all(|a| *a < 0.01) {
        let warm: Vec<f64> = outputs.iter().map(|o| o.warmup_acceptance).collect();
        return Err(Error::SamplerFailure(format!(
            "every chain is stuck: post-warmup acceptance {acceptance:?}, warmup acceptance {warm:?}"
        )));
    }
    Ok(Chains {
        dim: target.dim(),
        warmup_acceptance: outputs.iter().map(|o| o.warmup_acceptance).collect(),
        step_scale: outputs.iter().map(|o| o.step_scale).collect(),
        acceptance,
        log_density: outputs.iter().map(|o| o.log_density.clone()).collect(),
        draws: outputs.into_iter().map(|o| o.draws).collect(),
        seed: cfg.seed,
    })
}
