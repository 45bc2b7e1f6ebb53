use nalgebra::{Matrix4, Vector4};

use super::HomScan;
use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 200;
const RELATIVE_STEP_TOLERANCE: f64 = 1e-10;
const MAD_TO_SIGMA: f64 = 1.4826;
const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3; // 2·sqrt(2 ln 2)

/// Gaussian dip `baseline − depth·exp(−(τ − center)²/(2·width²))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DipFit {
    /// Standard deviation of the Gaussian, in seconds.
    pub width: f64,
    pub center: f64,
    pub depth: f64,
    pub baseline: f64,
    /// `depth/baseline`, clamped to [0, 1].
    pub visibility_depth: f64,
    pub residual_norm: f64,
    /// Robust residual scale, `1.4826 × median |residual|`.
    pub noise_scale: f64,
    pub iterations: usize,
    pub no_significant_dip: bool,
    /// The unconstrained optimum had a bump instead of a dip.
    pub negative_depth: bool,
}

impl DipFit {
    pub fn model(&self, tau: f64) -> f64 {
        let x = (tau - self.center) / self.width;
        self.baseline - self.depth * (-0.5 * x * x).exp()
    }

    pub fn fwhm(&self) -> f64 {
        FWHM_PER_SIGMA * self.width.abs()
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Parameters in scaled coordinates: [baseline, depth, center, width].
fn residuals(p: &Vector4<f64>, x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(y)
        .map(|(&xi, &yi)| {
            let u = (xi - p[2]) / p[3];
            p[0] - p[1] * (-0.5 * u * u).exp() - yi
        })
        .collect()
}

fn cost(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// Levenberg-Marquardt fit of the four-parameter Gaussian dip to the valid
/// points of `scan`.
pub fn fit_gaussian_dip(scan: &HomScan) -> Result<DipFit> {
    let (tau, y): (Vec<f64>, Vec<f64>) = scan.valid_points().unzip();
    let n = tau.len();
    if n < 8 {
        return Err(Error::Degenerate(format!("dip fit needs at least 8 valid points, got {n}")));
    }
    let lo = tau[0];
    let hi = tau[n - 1];
    let offset = 0.5 * (lo + hi);
    let scale = 0.5 * (hi - lo);
    let x: Vec<f64> = tau.iter().map(|t| (t - offset) / scale).collect();

    let quarter = (n / 4).max(1);
    let outer: Vec<f64> = y[..quarter].iter().chain(&y[n - quarter..]).copied().collect();
    let baseline0 = outer.iter().sum::<f64>() / outer.len() as f64;
    let (imin, &ymin) = y.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap();
    let depth0 = baseline0 - ymin;

    let flat_noise = MAD_TO_SIGMA * median(y.iter().map(|v| (v - baseline0).abs()).collect());
    if !(depth0 > 1e-12 * baseline0.abs()) {
        let residual_norm = cost(&y.iter().map(|v| v - baseline0).collect::<Vec<_>>()).sqrt();
        return Ok(DipFit {
            width: f64::NAN,
            center: tau[imin],
            depth: 0.0,
            baseline: baseline0,
            visibility_depth: 0.0,
            residual_norm,
            noise_scale: flat_noise,
            iterations: 0,
            no_significant_dip: true,
            negative_depth: false,
        });
    }

    let half = baseline0 - 0.5 * depth0;
    let mut left = imin;
    while left > 0 && y[left - 1] <= half {
        left -= 1;
    }
    let mut right = imin;
    while right + 1 < n && y[right + 1] <= half {
        right += 1;
    }
    let crossing = |i: usize, j: usize| {
        let (yi, yj) = (y[i], y[j]);
        if (yj - yi).abs() < f64::MIN_POSITIVE {
            x[i]
        } else {
            x[i] + (half - yi) / (yj - yi) * (x[j] - x[i])
        }
    };
    let xl = if left > 0 { crossing(left - 1, left) } else { x[0] };
    let xr = if right + 1 < n { crossing(right, right + 1) } else { x[n - 1] };
    let min_spacing = x.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let width0 = ((xr - xl) / FWHM_PER_SIGMA).max(min_spacing);

    let mut p = Vector4::new(baseline0, depth0, x[imin], width0);
    let mut r = residuals(&p, &x, &y);
    let mut c = cost(&r);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        if c == 0.0 {
            converged = true;
            break;
        }
        let mut jtj = Matrix4::<f64>::zeros();
        let mut jtr = Vector4::<f64>::zeros();
        for (&xi, &ri) in x.iter().zip(&r) {
            let u = (xi - p[2]) / p[3];
            let g = (-0.5 * u * u).exp();
            let row = Vector4::new(1.0, -g, -p[1] * g * u / p[3], -p[1] * g * u * u / p[3]);
            jtj += row * row.transpose();
            jtr += row * ri;
        }
        let mut damped = jtj;
        for i in 0..4 {
            damped[(i, i)] += lambda * jtj[(i, i)].max(1e-12);
        }
        let step = match damped.cholesky() {
            Some(ch) => -ch.solve(&jtr),
            None => {
                lambda *= 10.0;
                continue;
            }
        };
        let relative = step.norm() / p.norm().max(f64::MIN_POSITIVE);
        let trial = p + step;
        let rt = residuals(&trial, &x, &y);
        let ct = cost(&rt);
        if ct.is_finite() && ct <= c && trial[3] != 0.0 {
            p = trial;
            r = rt;
            c = ct;
            lambda = (lambda / 10.0).max(1e-15);
        } else {
            lambda *= 10.0;
        }
        if relative < RELATIVE_STEP_TOLERANCE {
            converged = true;
            break;
        }
    }
    let residual_norm = c.sqrt();
    if !converged {
        return Err(Error::FitNonConvergence {
            iterations,
            residual_norm,
            last: [p[0], p[1], p[2] * scale + offset, p[3].abs() * scale],
        });
    }

    let baseline = p[0];
    let depth = p[1];
    let noise_scale = MAD_TO_SIGMA * median(r.iter().map(|v| v.abs()).collect());
    let negative_depth = depth < 0.0;
    let visibility_depth = if baseline > 0.0 { (depth / baseline).clamp(0.0, 1.0) } else { 0.0 };
    Ok(DipFit {
        width: p[3].abs() * scale,
        center: p[2] * scale + offset,
        depth,
        baseline,
        visibility_depth,
        residual_norm,
        noise_scale,
        iterations,
        no_significant_dip: depth <= 2.0 * noise_scale,
        negative_depth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(baseline: f64, depth: f64, center: f64, width: f64) -> HomScan {
        let delays: Vec<f64> = (0..161).map(|i| -40e-12 + 0.5e-12 * i as f64).collect();
        let p = delays
            .iter()
            .map(|t| baseline - depth * (-0.5 * ((t - center) / width).powi(2)).exp())
            .collect();
        HomScan::new(delays, p).unwrap()
    }

    #[test]
    fn recovers_noiseless_parameters() {
        let baseline = 0.5;
        let depth = 0.632 * baseline;
        let width = 9e-12;
        let fit = fit_gaussian_dip(&synthetic(baseline, depth, 1.3e-12, width)).unwrap();
        let rel = |a: f64, b: f64| ((a - b) / b).abs();
        assert!(rel(fit.baseline, baseline) < 1e-6);
        assert!(rel(fit.depth, depth) < 1e-6);
        assert!(rel(fit.width, width) < 1e-6);
        assert!(rel(fit.center, 1.3e-12) < 1e-6);
        assert!((fit.visibility_depth - 0.632).abs() < 1e-6);
        assert!(!fit.no_significant_dip);
        assert!((fit.fwhm() - 2.0 * (2.0 * std::f64::consts::LN_2).sqrt() * width).abs() < 1e-16);
    }

    #[test]
    fn flat_scan_has_no_dip() {
        let fit = fit_gaussian_dip(&synthetic(0.5, 0.0, 0.0, 9e-12)).unwrap();
        assert!(fit.no_significant_dip);
        assert_eq!(fit.visibility_depth, 0.0);
    }

    #[test]
    fn noisy_shallow_dip_is_flagged() {
        let mut scan = synthetic(0.5, 0.002, 0.0, 9e-12);
        // Deterministic pseudo-noise well above the dip depth.
        for (i, p) in scan.probabilities.iter_mut().enumerate() {
            *p += 0.02 * ((i as f64 * 12.9898).sin() * 43_758.545_3).fract();
        }
        let fit = fit_gaussian_dip(&scan);
        match fit {
            Ok(f) => assert!(f.no_significant_dip || f.negative_depth, "{f:?}"),
            Err(e) => assert!(matches!(e, Error::FitNonConvergence { .. })),
        }
    }

    #[test]
    fn too_few_points() {
        let scan = HomScan::new(vec![0.0, 1.0, 2.0], vec![0.5, 0.1, 0.5]).unwrap();
        assert!(fit_gaussian_dip(&scan).is_err());
    }

    #[test]
    fn invalid_points_are_ignored() {
        let mut scan = synthetic(0.5, 0.3, 0.0, 8e-12);
        scan.probabilities[10] = 7.0;
        scan.valid[10] = false;
        let fit = fit_gaussian_dip(&scan).unwrap();
        assert!((fit.visibility_depth - 0.6).abs() < 1e-6);
    }
}
