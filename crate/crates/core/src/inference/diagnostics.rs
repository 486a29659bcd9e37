use crate::error::{Error, Result};

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Split potential scale reduction. Each chain is cut into two halves (the
/// middle draw of an odd-length chain is dropped) and the usual
/// between/within variance ratio is formed over the halves. Returns
/// `+inf` when the within-half variance is zero.
pub fn split_rhat(chains: &[Vec<f64>]) -> Result<f64> {
    if chains.len() < 2 {
        return Err(Error::Usage("split R-hat needs at least two chains".into()));
    }
    let n = chains.iter().map(Vec::len).min().unwrap_or(0);
    if n < 4 {
        return Err(Error::Usage("split R-hat needs at least four draws per chain".into()));
    }
    let half = n / 2;
    let mut parts: Vec<&[f64]> = Vec::with_capacity(2 * chains.len());
    for c in chains {
        parts.push(&c[..half]);
        parts.push(&c[n - half..n]);
    }
    let means: Vec<f64> = parts.iter().map(|p| mean(p)).collect();
    let w = parts.iter().map(|p| variance(p)).sum::<f64>() / parts.len() as f64;
    let b = half as f64 * variance(&means);
    if !(w > 0.0) {
        return Ok(f64::INFINITY);
    }
    let h = half as f64;
    let var_plus = (h - 1.0) / h * w + b / h;
    Ok((var_plus / w).sqrt())
}

/// Effective sample size of one chain with Geyer's initial positive
/// sequence: autocorrelations are summed in adjacent pairs until a pair sum
/// turns non-positive, and the pair sums are forced to be non-increasing.
pub fn ess_single(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 4 {
        return n as f64;
    }
    let m = mean(x);
    let centred: Vec<f64> = x.iter().map(|v| v - m).collect();
    let c0 = centred.iter().map(|v| v * v).sum::<f64>() / n as f64;
    if !(c0 > 0.0) {
        return 0.0;
    }
    let rho = |lag: usize| -> f64 {
        centred[..n - lag].iter().zip(&centred[lag..]).map(|(a, b)| a * b).sum::<f64>() / (n as f64 * c0)
    };
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    let mut k = 0;
    while 2 * k + 1 < n {
        let pair = if k == 0 { 1.0 + rho(1) } else { rho(2 * k) + rho(2 * k + 1) };
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev);
        sum += pair;
        prev = pair;
        k += 1;
    }
    let tau = (2.0 * sum - 1.0).max(1.0 / (n as f64).log10());
    n as f64 / tau
}

/// Sum of per-chain effective sample sizes; 0 for constant input.
pub fn ess(chains: &[Vec<f64>]) -> f64 {
    chains.iter().map(|c| ess_single(c)).sum()
}

/// Shortest interval containing `ceil(mass * n)` of the sorted samples.
/// Ties go to the lowest start.
pub fn hdi(samples: &[f64], mass: f64) -> Result<(f64, f64)> {
    if samples.len() < 20 {
        return Err(Error::Usage(format!("HDI needs at least 20 samples, got {}", samples.len())));
    }
    if !(mass > 0.0 && mass <= 1.0) {
        return Err(Error::Usage(format!("HDI mass {mass} outside (0, 1]")));
    }
    if samples.iter().any(|v| v.is_nan()) {
        return Err(Error::Domain("HDI samples contain NaN".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let k = ((mass * n as f64).ceil() as usize).clamp(1, n);
    let mut best = 0;
    let mut width = f64::INFINITY;
    for i in 0..=n - k {
        let w = sorted[i + k - 1] - sorted[i];
        if w < width {
            width = w;
            best = i;
        }
    }
    Ok((sorted[best], sorted[best + k - 1]))
}

/// Linear-interpolation quantile of unsorted samples, `p` in `[0, 1]`.
pub fn quantile(samples: &[f64], p: f64) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    quantile_sorted(&s, p)
}

pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}
