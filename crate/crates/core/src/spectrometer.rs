//! Time-of-flight spectrometer: a long dispersive fiber maps wavelength to
//! arrival time `t = D·(λ − λ₀)`, and a jittery detector blurs the histogram.

use std::f64::consts::{LN_2, PI};

use crate::error::{Error, Result};
use crate::sigspace::{interpolate_spectrum, profile_fwhm, SpectralAmplitude, SPEED_OF_LIGHT};

const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;

/// Ratio between the quoted instrument resolution and the single-detector
/// jitter blur; maps (336.6 ps/nm, 11 ps RMS) onto 0.22 nm.
pub const INSTRUMENT_FACTOR: f64 = 2.858_817_179_769_473;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DftConfig {
    /// Total dispersion D·L in s/m.
    pub dispersion: f64,
    /// Detector timing jitter, RMS seconds.
    pub jitter_rms: f64,
    /// Histogram bin width in seconds.
    pub bin_width: f64,
}

impl DftConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dispersion != 0.0 && self.dispersion.is_finite()) {
            return Err(Error::Config("DFT dispersion must be nonzero".into()));
        }
        if !(self.jitter_rms >= 0.0) {
            return Err(Error::Config(format!("jitter_rms must be >= 0, got {}", self.jitter_rms)));
        }
        if !(self.bin_width > 0.0) {
            return Err(Error::Config(format!("bin_width must be positive, got {}", self.bin_width)));
        }
        Ok(())
    }

    /// Wavelength width of one histogram bin.
    pub fn wavelength_bin(&self) -> f64 {
        self.bin_width / self.dispersion.abs()
    }

    /// Jitter expressed as a wavelength standard deviation.
    pub fn wavelength_jitter(&self) -> f64 {
        self.jitter_rms / self.dispersion.abs()
    }
}

/// Normalized spectral density measured by the spectrometer.
#[derive(Clone, Debug, PartialEq)]
pub struct DftSpectrum {
    /// Bin-centre wavelengths (m), increasing.
    pub wavelengths: Vec<f64>,
    /// Density per metre; integrates to one over the bins.
    pub density: Vec<f64>,
    /// Bin width exceeds half the jitter, so the blur kernel is undersampled.
    pub undersampled: bool,
}

impl DftSpectrum {
    pub fn step(&self) -> f64 {
        self.wavelengths[1] - self.wavelengths[0]
    }

    pub fn fwhm(&self) -> Result<f64> {
        Ok(profile_fwhm(&self.density)?.width * self.step())
    }

    pub fn area(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.step()
    }
}

/// Spectral density of `a` against wavelength, `|a(Ω(λ))|²·|dΩ/dλ|`, on the given wavelengths.
pub fn wavelength_density(a: &SpectralAmplitude, wavelengths: &[f64]) -> Vec<f64> {
    let grid = a.grid();
    let omegas: Vec<f64> = wavelengths.iter().map(|&l| grid.omega_at_wavelength(l)).collect();
    interpolate_spectrum(a, &omegas)
        .into_iter()
        .zip(wavelengths)
        .map(|(v, &l)| v.norm_sqr() * 2.0 * PI * SPEED_OF_LIGHT / (l * l))
        .collect()
}

pub fn simulate_dft_spectrum(a: &SpectralAmplitude, cfg: &DftConfig) -> Result<DftSpectrum> {
    cfg.validate()?;
    let a = a.clone().to_frequency();
    let grid = a.grid();
    let extent = a.support_extent();
    if extent == 0.0 {
        return Err(Error::Degenerate("cannot measure a zero spectrum".into()));
    }
    let l0 = grid.center_wavelength();
    let dl = cfg.wavelength_bin();
    let sj = cfg.wavelength_jitter();
    let half_span = (grid.wavelength_at(-extent) - l0).abs().max((grid.wavelength_at(extent) - l0).abs()) + 6.0 * sj;
    let m = (half_span / dl).ceil() as i64 + 1;
    let wavelengths: Vec<f64> = (-m..=m).map(|i| l0 + i as f64 * dl).collect();
    let raw = wavelength_density(&a, &wavelengths);

    let blurred = if sj > 0.0 {
        let kh = (6.0 * sj / dl).ceil() as i64;
        let mut kernel: Vec<f64> = (-kh..=kh).map(|i| (-0.5 * (i as f64 * dl / sj).powi(2)).exp()).collect();
        let ks: f64 = kernel.iter().sum();
        kernel.iter_mut().for_each(|k| *k /= ks);
        let n = raw.len() as i64;
        (0..n)
            .map(|i| {
                (-kh..=kh)
                    .filter_map(|j| {
                        let src = i - j;
                        (0..n).contains(&src).then(|| raw[src as usize] * kernel[(j + kh) as usize])
                    })
                    .sum()
            })
            .collect()
    } else {
        raw
    };
    let area: f64 = blurred.iter().sum::<f64>() * dl;
    if !(area > 0.0) {
        return Err(Error::Degenerate("measured spectrum has zero area".into()));
    }
    let density = blurred.iter().map(|v| v / area).collect();
    Ok(DftSpectrum { wavelengths, density, undersampled: cfg.jitter_rms > 0.0 && cfg.bin_width > 0.5 * cfg.jitter_rms })
}

/// Wavelength FWHM of the Gaussian jitter blur, `2√(2ln2)·σ_t/|D|`.
pub fn jitter_blur(cfg: &DftConfig) -> f64 {
    FWHM_PER_SIGMA * cfg.wavelength_jitter()
}

/// Quoted instrument resolution: the jitter blur scaled by
/// [`INSTRUMENT_FACTOR`], added in quadrature to the bin width.
pub fn nominal_resolution(cfg: &DftConfig) -> f64 {
    let blur = INSTRUMENT_FACTOR * jitter_blur(cfg);
    (blur * blur + cfg.wavelength_bin().powi(2)).sqrt()
}

/// Intensity FWHM in wavelength of a Gaussian amplitude parameter σ at λ₀.
pub fn gaussian_wavelength_fwhm(sigma: f64, center_wavelength: f64) -> f64 {
    2.0 * sigma * LN_2.sqrt() * center_wavelength * center_wavelength / (2.0 * PI * SPEED_OF_LIGHT)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sigspace::{gaussian_spectral_amplitude, sigma_from_wavelength_fwhm, Grid};
    use approx::assert_relative_eq;

    const LAMBDA: f64 = 1551.5e-9;

    fn cfg(jitter_ps: f64) -> DftConfig {
        DftConfig { dispersion: 0.3366, jitter_rms: jitter_ps * 1e-12, bin_width: 0.5e-12 }
    }

    fn photon(fwhm_nm: f64) -> SpectralAmplitude {
        let g = Grid::new(1 << 14, 1e-9, LAMBDA).unwrap();
        gaussian_spectral_amplitude(&g, sigma_from_wavelength_fwhm(fwhm_nm * 1e-9, LAMBDA), 0.0).unwrap()
    }

    #[test]
    fn zero_jitter_reproduces_density() {
        let a = photon(0.2);
        let s = simulate_dft_spectrum(&a, &cfg(0.0)).unwrap();
        assert!(!s.undersampled);
        let sigma = sigma_from_wavelength_fwhm(0.2e-9, LAMBDA);
        let g = a.grid();
        let exact: Vec<f64> = s
            .wavelengths
            .iter()
            .map(|&l| {
                let w = g.omega_at_wavelength(l);
                (-(w / sigma).powi(2)).exp() / (PI.sqrt() * sigma) * 2.0 * PI * SPEED_OF_LIGHT / (l * l)
            })
            .collect();
        let area: f64 = exact.iter().sum::<f64>() * s.step();
        let err: f64 = s.density.iter().zip(&exact).map(|(d, e)| (d - e / area).powi(2)).sum::<f64>().sqrt();
        let norm: f64 = exact.iter().map(|e| (e / area).powi(2)).sum::<f64>().sqrt();
        assert!(err / norm < 1e-6);
    }

    #[test]
    fn jitter_broadens_in_quadrature() {
        let c = cfg(11.0);
        let s = simulate_dft_spectrum(&photon(0.2), &c).unwrap();
        assert_relative_eq!(s.area(), 1.0, max_relative = 1e-9);
        let blur = jitter_blur(&c);
        assert!((blur * 1e9 - 0.077).abs() < 5e-4);
        let expected = (0.2e-9f64.powi(2) + blur * blur).sqrt();
        assert!((s.fwhm().unwrap() / expected - 1.0).abs() < 0.01);
    }

    #[test]
    fn undersampling_flag() {
        let c = DftConfig { bin_width: 8e-12, ..cfg(11.0) };
        assert!(simulate_dft_spectrum(&photon(0.2), &c).unwrap().undersampled);
        assert!(DftConfig { dispersion: 0.0, ..c }.validate().is_err());
    }

    #[test]
    fn resolution_calibration() {
        let c = DftConfig { bin_width: 1e-15, ..cfg(11.0) };
        assert!((nominal_resolution(&c) * 1e9 - 0.22).abs() < 1e-6);
        let doubled = DftConfig { dispersion: 2.0 * c.dispersion, ..c };
        assert_relative_eq!(jitter_blur(&doubled), 0.5 * jitter_blur(&c), max_relative = 1e-15);
        let still = DftConfig { jitter_rms: 0.0, bin_width: 1e-12, ..c };
        assert_relative_eq!(nominal_resolution(&still), still.wavelength_bin(), max_relative = 1e-15);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(12))]

            #[test]
            fn gaussian_widths_add_in_quadrature(fwhm_nm in 0.1f64..1.0, jitter_ps in 0.0f64..20.0) {
                let c = DftConfig { dispersion: 0.3366, jitter_rms: jitter_ps * 1e-12, bin_width: 0.25e-12 };
                let a = photon(fwhm_nm);
                let s = simulate_dft_spectrum(&a, &c).unwrap();
                prop_assert!((s.area() - 1.0).abs() < 1e-9);
                let w_in = simulate_dft_spectrum(&a, &DftConfig { jitter_rms: 0.0, ..c }).unwrap().fwhm().unwrap();
                let w_out = s.fwhm().unwrap();
                prop_assert!(w_out >= w_in * (1.0 - 1e-9));
                let expected = (w_in * w_in + jitter_blur(&c).powi(2)).sqrt();
                prop_assert!((w_out / expected - 1.0).abs() < 0.01);
            }
        }
    }
}
