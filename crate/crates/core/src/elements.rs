//! Optical elements acting on single-photon envelopes and the time-lens
//! design rules that tie them together.
//!
//! Sign conventions: a GDD `Φ` multiplies the spectrum by `exp(+iΦΩ²/2)`, a
//! time lens of chirp rate `K` multiplies the envelope by `exp(+iKt²/2)`, and
//! a delay `τ` multiplies the spectrum by `exp(−iΩτ)` (carrier phase dropped).

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::sigspace::{gaussian_spectral_amplitude, Domain, Grid, SpectralAmplitude};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OpticalElement {
    /// Group delay dispersion Φ (s²).
    Gdd(f64),
    /// Ideal time lens with chirp rate K (s⁻²).
    QuadraticTimePhase(f64),
    /// Electro-optic lens θ(t − t0) with θ(u) = −A·cos(2π f_m u).
    SinusoidalTimePhase { amplitude: f64, frequency: f64, offset: f64 },
    /// Delay τ (s).
    Delay(f64),
    GaussianFilter(GaussianFilter),
    /// Lumped power transmission in (0, 1].
    Attenuator(f64),
}

/// Spectral filter whose intensity transmission is
/// `peak·exp(−4ln2·(Ω − center)²/fwhm²)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianFilter {
    pub center_offset: f64,
    pub fwhm: f64,
    pub peak_transmission: f64,
}

impl GaussianFilter {
    pub fn new(center_offset: f64, fwhm: f64, peak_transmission: f64) -> Result<Self> {
        let f = Self { center_offset, fwhm, peak_transmission };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        check_transmission(self.peak_transmission)?;
        if !(self.fwhm > 0.0) {
            return Err(Error::Config(format!("filter fwhm must be positive, got {}", self.fwhm)));
        }
        if !self.center_offset.is_finite() {
            return Err(Error::Config("filter center offset must be finite".into()));
        }
        Ok(())
    }

    /// Intensity transmission at offset `omega`.
    pub fn transmission(&self, omega: f64) -> f64 {
        if self.fwhm.is_infinite() {
            return self.peak_transmission;
        }
        let x = (omega - self.center_offset) / self.fwhm;
        self.peak_transmission * (-4.0 * std::f64::consts::LN_2 * x * x).exp()
    }

    pub fn amplitude_mask(&self, omega: f64) -> f64 {
        self.transmission(omega).sqrt()
    }
}

fn check_transmission(t: f64) -> Result<()> {
    if t > 0.0 && t <= 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("transmission must lie in (0, 1], got {t}")))
    }
}

fn support_in(a: SpectralAmplitude, domain: Domain) -> (SpectralAmplitude, f64) {
    let a = match domain {
        Domain::Frequency => a.to_frequency(),
        Domain::Time => a.to_time(),
    };
    let extent = a.support_extent();
    (a, extent)
}

/// Multiplies the spectrum by `exp(+iΦΩ²/2)`.
pub fn apply_gdd(a: SpectralAmplitude, gdd: f64) -> Result<SpectralAmplitude> {
    if gdd == 0.0 {
        return Ok(a.to_frequency());
    }
    let grid = a.grid().clone();
    let (a, pulse_extent) = support_in(a, Domain::Time);
    let (mut a, band_extent) = support_in(a, Domain::Frequency);
    let needed = pulse_extent + gdd.abs() * band_extent;
    if needed > 0.5 * grid.time_span() {
        return Err(Error::Aliasing(format!(
            "GDD {gdd:.4e} s^2 spreads the pulse to ±{needed:.4e} s; time_span must be at least {:.4e} s (is {:.4e} s)",
            2.0 * needed,
            grid.time_span()
        )));
    }
    for (k, v) in a.values_mut().iter_mut().enumerate() {
        let w = grid.omega(k);
        *v *= Complex64::from_polar(1.0, 0.5 * gdd * w * w);
    }
    Ok(a)
}

fn apply_time_phase(
    a: SpectralAmplitude,
    phase: impl Fn(f64) -> f64,
    max_shift: impl Fn(f64) -> f64,
    what: &str,
) -> Result<SpectralAmplitude> {
    let grid = a.grid().clone();
    let (a, band_extent) = support_in(a, Domain::Frequency);
    let mut a = a.to_time();
    let peak = a.values().iter().map(|v| v.norm_sqr()).fold(0.0, f64::max);
    let floor = peak * crate::sigspace::SUPPORT_THRESHOLD;
    let mut excursion: f64 = 0.0;
    for (j, v) in a.values().iter().enumerate() {
        if v.norm_sqr() >= floor {
            excursion = excursion.max(max_shift(grid.time(j)));
        }
    }
    if band_extent + excursion >= grid.nyquist() {
        return Err(Error::Aliasing(format!(
            "{what} shifts frequencies by up to {excursion:.4e} rad/s on a band of ±{band_extent:.4e} rad/s, \
             beyond the Nyquist limit {:.4e} rad/s; reduce time_step",
            grid.nyquist()
        )));
    }
    for (j, v) in a.values_mut().iter_mut().enumerate() {
        *v *= Complex64::from_polar(1.0, phase(grid.time(j)));
    }
    Ok(a)
}

/// Multiplies the time envelope by `exp(+iKt²/2)`.
pub fn apply_quadratic_time_phase(a: SpectralAmplitude, k: f64) -> Result<SpectralAmplitude> {
    if k == 0.0 {
        return Ok(a.to_time());
    }
    apply_time_phase(a, |t| 0.5 * k * t * t, |t| (k * t).abs(), "quadratic time lens")
}

/// Multiplies the time envelope by `exp(iθ(t − t0))`, `θ(u) = −A·cos(2π f_m u)`.
pub fn apply_sinusoidal_time_phase(
    a: SpectralAmplitude,
    amplitude: f64,
    frequency: f64,
    offset: f64,
) -> Result<SpectralAmplitude> {
    if amplitude == 0.0 {
        return Ok(a.to_time());
    }
    if !(frequency > 0.0 && frequency.is_finite()) {
        return Err(Error::Config(format!("modulation frequency must be positive, got {frequency}")));
    }
    let wm = 2.0 * PI * frequency;
    apply_time_phase(
        a,
        |t| -amplitude * (wm * (t - offset)).cos(),
        |t| (amplitude * wm * (wm * (t - offset)).sin()).abs(),
        "sinusoidal time lens",
    )
}

/// Multiplies the spectrum by `exp(−iΩτ)`.
pub fn apply_delay(a: SpectralAmplitude, delay: f64) -> SpectralAmplitude {
    let mut a = a.to_frequency();
    if delay != 0.0 {
        let grid = a.grid().clone();
        for (k, v) in a.values_mut().iter_mut().enumerate() {
            *v *= Complex64::from_polar(1.0, -grid.omega(k) * delay);
        }
    }
    a
}

/// Returns the filtered amplitude and the power transmission it experienced.
pub fn apply_filter(a: SpectralAmplitude, filter: &GaussianFilter) -> Result<(SpectralAmplitude, f64)> {
    filter.validate()?;
    let mut a = a.to_frequency();
    let before = a.norm_squared();
    let grid = a.grid().clone();
    for (k, v) in a.values_mut().iter_mut().enumerate() {
        *v *= filter.amplitude_mask(grid.omega(k));
    }
    let after = a.norm_squared();
    let transmission = if before > 0.0 { after / before } else { 0.0 };
    Ok((a, transmission))
}

pub fn apply_attenuator(a: SpectralAmplitude, transmission: f64) -> Result<SpectralAmplitude> {
    check_transmission(transmission)?;
    Ok(a.scaled(transmission.sqrt()))
}

impl OpticalElement {
    /// Applies the element and reports its power transmission.
    pub fn apply(&self, a: SpectralAmplitude) -> Result<(SpectralAmplitude, f64)> {
        match *self {
            Self::Gdd(phi) => Ok((apply_gdd(a, phi)?, 1.0)),
            Self::QuadraticTimePhase(k) => Ok((apply_quadratic_time_phase(a, k)?, 1.0)),
            Self::SinusoidalTimePhase { amplitude, frequency, offset } => {
                Ok((apply_sinusoidal_time_phase(a, amplitude, frequency, offset)?, 1.0))
            }
            Self::Delay(tau) => Ok((apply_delay(a, tau), 1.0)),
            Self::GaussianFilter(ref f) => apply_filter(a, f),
            Self::Attenuator(t) => Ok((apply_attenuator(a, t)?, t)),
        }
    }

    pub fn is_phase_only(&self) -> bool {
        !matches!(self, Self::GaussianFilter(_) | Self::Attenuator(_))
    }
}

/// Applies `elements` left to right. The output is returned in the frequency
/// domain together with the product of per-element power transmissions.
pub fn run_pipeline(a: SpectralAmplitude, elements: &[OpticalElement]) -> Result<(SpectralAmplitude, f64)> {
    if elements.is_empty() {
        return Err(Error::Config("pipeline must contain at least one element".into()));
    }
    let mut total = 1.0;
    let mut current = a;
    for (index, element) in elements.iter().enumerate() {
        let (next, t) = element
            .apply(current)
            .map_err(|e| Error::Element { index, source: Box::new(e) })?;
        total *= t;
        current = next;
    }
    Ok((current.to_frequency(), total))
}

/// Dispersion and lens settings that collimate a chirped photon.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LensDesign {
    /// Φ (s²).
    pub gdd: f64,
    /// K_eff (s⁻²).
    pub chirp_rate: f64,
    /// Sinusoidal amplitude A (rad) giving K_eff at `modulation_frequency`.
    pub amplitude: f64,
    pub modulation_frequency: f64,
    pub compression_factor: f64,
}

fn check_compression(sigma_a: f64, sigma_b: f64) -> Result<()> {
    if !(sigma_b > 0.0 && sigma_a.is_finite() && sigma_b.is_finite()) {
        return Err(Error::Config(format!("bandwidths must be positive, got {sigma_a:e} and {sigma_b:e}")));
    }
    if sigma_a <= sigma_b {
        return Err(Error::Unsupported(format!(
            "bandwidth expansion (σ_a = {sigma_a:e} <= σ_b = {sigma_b:e} rad/s) is not modeled"
        )));
    }
    Ok(())
}

/// Φ = 1/(σ_aσ_b), K_eff = 1/Φ, A = K_eff/(2πf_m)².
pub fn collimation_design(sigma_a: f64, sigma_b: f64, modulation_frequency: f64) -> Result<LensDesign> {
    check_compression(sigma_a, sigma_b)?;
    if !(modulation_frequency > 0.0 && modulation_frequency.is_finite()) {
        return Err(Error::Config(format!("modulation frequency must be positive, got {modulation_frequency}")));
    }
    let product = sigma_a * sigma_b;
    let wm = 2.0 * PI * modulation_frequency;
    Ok(LensDesign {
        gdd: 1.0 / product,
        chirp_rate: product,
        amplitude: product / (wm * wm),
        modulation_frequency,
        compression_factor: sigma_a / sigma_b,
    })
}

/// Closed-form output of GDD `Φ = 1/(σ_aσ_b)` followed by the ideal lens
/// `K = 1/Φ` acting on a transform-limited Gaussian of width σ_a:
///
/// ```text
/// φ′(Ω) = e^(iπ/4) (πσ_b²)^(−1/4) exp(−Ω²/(2σ_b²)) exp(−iΩ²/(2σ_aσ_b))
/// ```
///
/// The constant `e^(iπ/4)` comes from the two Gaussian integrals of the
/// unitary transform pair.
pub fn ideal_converted_amplitude(sigma_a: f64, sigma_b: f64, grid: &Grid) -> Result<SpectralAmplitude> {
    check_compression(sigma_a, sigma_b)?;
    let magnitude = gaussian_spectral_amplitude(grid, sigma_b, 0.0)?;
    let chirp = 1.0 / (2.0 * sigma_a * sigma_b);
    let global = Complex64::from_polar(1.0, PI / 4.0);
    let mut out = magnitude;
    for (k, v) in out.values_mut().iter_mut().enumerate() {
        let w = grid.omega(k);
        *v *= global * Complex64::from_polar(1.0, -chirp * w * w);
    }
    Ok(out)
}
