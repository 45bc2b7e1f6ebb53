//! Synthetic photon counting for dip scans: Poisson coincidences and singles,
//! singles normalization, and a parametric bootstrap of the fitted visibility.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use super::{fit_gaussian_dip, HomScan};
use crate::error::{Error, Result};

/// Raw counts per delay.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Counts {
    pub coincidences: Vec<u64>,
    pub singles_a: Vec<u64>,
    pub singles_b: Vec<u64>,
}

/// Mean rates used by [`synthesize_counts`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CountModel {
    /// Mean coincidences per unit probability.
    pub rate_scale: f64,
    /// Mean singles per arm.
    pub singles_scale: f64,
    /// Source brightness factor at the last delay; it ramps linearly from 1
    /// at the first delay. Singles scale with it, coincidences with its square.
    pub drift: f64,
}

impl CountModel {
    pub fn new(rate_scale: f64) -> Self {
        Self { rate_scale, singles_scale: 1e5, drift: 1.0 }
    }
}

const MAX_BOOTSTRAP_FAILURE_FRACTION: f64 = 0.2;

fn poisson(mean: f64, rng: &mut ChaCha8Rng) -> Result<u64> {
    if mean == 0.0 {
        return Ok(0);
    }
    let d = Poisson::new(mean).map_err(|e| Error::Numerical(format!("Poisson mean {mean}: {e}")))?;
    Ok(d.sample(rng) as u64)
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws coincidences ~ Poisson(rate·d²·p(τ)) and singles ~ Poisson(singles·d)
/// at each delay. Each delay has its own random stream, so the result does not
/// depend on evaluation order.
pub fn synthesize_counts(scan: &HomScan, model: &CountModel, seed: u64) -> Result<HomScan> {
    if !(model.rate_scale > 0.0 && model.rate_scale.is_finite()) {
        return Err(Error::Config(format!("rate_scale must be positive, got {}", model.rate_scale)));
    }
    if !(model.singles_scale > 0.0 && model.drift > 0.0) {
        return Err(Error::Config("singles_scale and drift must be positive".into()));
    }
    let n = scan.len();
    let mut counts = Counts {
        coincidences: Vec::with_capacity(n),
        singles_a: Vec::with_capacity(n),
        singles_b: Vec::with_capacity(n),
    };
    for (i, &p) in scan.probabilities.iter().enumerate() {
        let frac = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
        let d = 1.0 + (model.drift - 1.0) * frac;
        let mut rng = stream_rng(seed, i as u64);
        counts.coincidences.push(poisson(model.rate_scale * d * d * p.max(0.0), &mut rng)?);
        counts.singles_a.push(poisson(model.singles_scale * d, &mut rng)?);
        counts.singles_b.push(poisson(model.singles_scale * d, &mut rng)?);
    }
    let mut out = scan.clone();
    out.counts = Some(counts);
    Ok(out)
}

/// Replaces probabilities by `C/(S_a·S_b)`, rescaled so that the mean over the
/// outer quartiles of the scan equals the distinguishable baseline 1/2.
/// Delays with a zero singles count are marked invalid.
pub fn normalize_counts(scan: &HomScan) -> Result<HomScan> {
    let counts = scan
        .counts
        .as_ref()
        .ok_or_else(|| Error::Config("scan carries no counts to normalize".into()))?;
    let n = scan.len();
    let mut raw = Vec::with_capacity(n);
    let mut valid = Vec::with_capacity(n);
    for i in 0..n {
        let (sa, sb) = (counts.singles_a[i], counts.singles_b[i]);
        if sa == 0 || sb == 0 || !scan.valid[i] {
            raw.push(0.0);
            valid.push(false);
        } else {
            raw.push(counts.coincidences[i] as f64 / (sa as f64 * sb as f64));
            valid.push(true);
        }
    }
    let quarter = (n / 4).max(1);
    let outer: Vec<f64> = (0..quarter)
        .chain(n.saturating_sub(quarter)..n)
        .filter(|&i| valid[i])
        .map(|i| raw[i])
        .collect();
    let baseline = outer.iter().sum::<f64>() / outer.len().max(1) as f64;
    if !(baseline > 0.0) {
        return Err(Error::Degenerate("no coincidences in the outer quartiles of the scan".into()));
    }
    let scale = 0.5 / baseline;
    let mut out = scan.clone();
    out.probabilities = raw.iter().map(|v| v * scale).collect();
    out.valid = valid;
    Ok(out)
}

/// Standard deviation of the fitted depth visibility over `n_resamples`
/// parametric resamples, each point redrawn from Poisson(observed count).
pub fn bootstrap_visibility_uncertainty(scan: &HomScan, n_resamples: usize, seed: u64) -> Result<f64> {
    let counts = scan
        .counts
        .as_ref()
        .ok_or_else(|| Error::Config("bootstrap needs a scan with counts".into()))?;
    if n_resamples < 100 {
        return Err(Error::Config(format!("bootstrap needs at least 100 resamples, got {n_resamples}")));
    }
    let draws: Vec<Option<f64>> = (0..n_resamples as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, r);
            let mut redraw = |v: &[u64]| -> Result<Vec<u64>> { v.iter().map(|&c| poisson(c as f64, &mut rng)).collect() };
            let resampled = Counts {
                coincidences: redraw(&counts.coincidences).ok()?,
                singles_a: redraw(&counts.singles_a).ok()?,
                singles_b: redraw(&counts.singles_b).ok()?,
            };
            let mut s = scan.clone();
            s.counts = Some(resampled);
            let s = normalize_counts(&s).ok()?;
            fit_gaussian_dip(&s).ok().map(|f| f.visibility_depth)
        })
        .collect();
    let values: Vec<f64> = draws.into_iter().flatten().collect();
    let failed = n_resamples - values.len();
    if failed as f64 > MAX_BOOTSTRAP_FAILURE_FRACTION * n_resamples as f64 {
        return Err(Error::BootstrapFailures { failed, total: n_resamples });
    }
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    Ok(var.sqrt())
}
