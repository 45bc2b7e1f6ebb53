//! Sampled baseband representation of single-photon wavepackets.
//!
//! Envelopes are stored relative to the carrier `ω₀ = 2πc/λ₀`; the grid holds
//! angular-frequency offsets `Ω = ω − ω₀` and the conjugate time axis. The
//! transform pair is unitary:
//!
//! ```text
//! E(t) = (2π)^(-1/2) ∫ φ(Ω) e^(−iΩt) dΩ
//! φ(Ω) = (2π)^(-1/2) ∫ E(t) e^(+iΩt) dt
//! ```
//!
//! so `Σ|φ|²·ΔΩ = Σ|E|²·Δt` holds sample for sample.

use std::f64::consts::{LN_2, PI};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Default number of samples for pulse grids.
pub const DEFAULT_SAMPLES: usize = 1 << 15;

/// Samples whose intensity falls below this fraction of the peak are treated
/// as empty when measuring the support of an envelope.
pub const SUPPORT_THRESHOLD: f64 = 1e-12;

const MIN_SAMPLES: usize = 1024;

/// Uniform conjugate time/frequency sampling around an optical carrier.
#[derive(Clone)]
pub struct Grid {
    n: usize,
    time_span: f64,
    center_wavelength: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("n", &self.n)
            .field("time_span", &self.time_span)
            .field("center_wavelength", &self.center_wavelength)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
            && self.time_span == other.time_span
            && self.center_wavelength == other.center_wavelength
    }
}

impl Grid {
    pub fn new(n_samples: usize, time_span: f64, center_wavelength: f64) -> Result<Self> {
        if !n_samples.is_power_of_two() || n_samples < MIN_SAMPLES {
            return Err(Error::Config(format!(
                "n_samples must be a power of two >= {MIN_SAMPLES}, got {n_samples}"
            )));
        }
        if !(time_span.is_finite() && time_span > 0.0) {
            return Err(Error::Config(format!("time_span must be positive, got {time_span}")));
        }
        if !(center_wavelength.is_finite() && center_wavelength > 0.0) {
            return Err(Error::Config(format!(
                "center_wavelength must be positive, got {center_wavelength}"
            )));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            n: n_samples,
            time_span,
            center_wavelength,
            forward: planner.plan_fft_forward(n_samples),
            inverse: planner.plan_fft_inverse(n_samples),
        })
    }

    /// Grid sized for a dispersion-based converter acting on `input_fwhm`
    /// (intensity FWHM, rad/s) and interfering with a photon of
    /// `reference_fwhm`: `n = 2^15`, span = 16 × (chirped duration estimate +
    /// longest transform-limited duration).
    pub fn for_conversion(
        center_wavelength: f64,
        input_fwhm: f64,
        reference_fwhm: f64,
        gdd: f64,
    ) -> Result<Self> {
        let tl = transform_limited_duration(input_fwhm).max(transform_limited_duration(reference_fwhm));
        let span = 16.0 * (gdd.abs() * input_fwhm + tl);
        Self::new(DEFAULT_SAMPLES, span, center_wavelength)
    }

    pub fn n_samples(&self) -> usize {
        self.n
    }

    pub fn time_span(&self) -> f64 {
        self.time_span
    }

    pub fn center_wavelength(&self) -> f64 {
        self.center_wavelength
    }

    pub fn time_step(&self) -> f64 {
        self.time_span / self.n as f64
    }

    pub fn angular_frequency_step(&self) -> f64 {
        2.0 * PI / self.time_span
    }

    /// Carrier angular frequency ω₀ = 2πc/λ₀.
    pub fn carrier(&self) -> f64 {
        2.0 * PI * SPEED_OF_LIGHT / self.center_wavelength
    }

    /// Largest representable |Ω|, i.e. the angular Nyquist frequency π/Δt.
    pub fn nyquist(&self) -> f64 {
        PI / self.time_step()
    }

    /// Angular-frequency offset of sample `k`; zero sits at index `n/2`.
    #[inline]
    pub fn omega(&self, k: usize) -> f64 {
        (k as f64 - (self.n / 2) as f64) * self.angular_frequency_step()
    }

    #[inline]
    pub fn time(&self, j: usize) -> f64 {
        (j as f64 - (self.n / 2) as f64) * self.time_step()
    }

    pub fn omegas(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.omega(k)).collect()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.time(j)).collect()
    }

    /// Vacuum wavelength of the frequency offset `omega`.
    pub fn wavelength_at(&self, omega: f64) -> f64 {
        2.0 * PI * SPEED_OF_LIGHT / (self.carrier() + omega)
    }

    /// Frequency offset corresponding to vacuum wavelength `wavelength`.
    pub fn omega_at_wavelength(&self, wavelength: f64) -> f64 {
        2.0 * PI * SPEED_OF_LIGHT / wavelength - self.carrier()
    }

    /// Same time span and centre wavelength with `n_samples` samples.
    pub fn resampled(&self, n_samples: usize) -> Result<Self> {
        Self::new(n_samples, self.time_span, self.center_wavelength)
    }
}

/// Intensity FWHM duration of a transform-limited Gaussian with intensity
/// spectral FWHM `fwhm` (rad/s): Δt·Δν = 2ln2/π.
pub fn transform_limited_duration(fwhm: f64) -> f64 {
    4.0 * LN_2 / fwhm
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Domain {
    Frequency,
    Time,
}

/// Sampled complex envelope on a [`Grid`], tagged with its current domain.
#[derive(Clone, Debug)]
pub struct SpectralAmplitude {
    grid: Grid,
    values: Vec<Complex64>,
    domain: Domain,
}

impl SpectralAmplitude {
    pub fn from_values(grid: &Grid, values: Vec<Complex64>, domain: Domain) -> Result<Self> {
        if values.len() != grid.n_samples() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} samples",
                values.len(),
                grid.n_samples()
            )));
        }
        Ok(Self { grid: grid.clone(), values, domain })
    }

    /// Samples a function of the frequency offset.
    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> Complex64) -> Self {
        let values = (0..grid.n_samples()).map(|k| f(grid.omega(k))).collect();
        Self { grid: grid.clone(), values, domain: Domain::Frequency }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    fn sample_step(&self) -> f64 {
        match self.domain {
            Domain::Frequency => self.grid.angular_frequency_step(),
            Domain::Time => self.grid.time_step(),
        }
    }

    /// Axis coordinate of sample `i` in the current domain.
    pub fn coordinate(&self, i: usize) -> f64 {
        match self.domain {
            Domain::Frequency => self.grid.omega(i),
            Domain::Time => self.grid.time(i),
        }
    }

    /// Σ|values|² times the sample step of the current domain.
    pub fn norm_squared(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.sample_step()
    }

    pub fn intensity(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }

    pub fn normalized(mut self) -> Result<Self> {
        let norm = self.norm_squared();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::Degenerate(format!("cannot normalize amplitude with norm^2 {norm}")));
        }
        let scale = 1.0 / norm.sqrt();
        self.values.iter_mut().for_each(|v| *v *= scale);
        Ok(self)
    }

    pub fn scaled(mut self, factor: f64) -> Self {
        self.values.iter_mut().for_each(|v| *v *= factor);
        self
    }

    pub fn to_frequency(self) -> Self {
        match self.domain {
            Domain::Frequency => self,
            Domain::Time => transform_domain(self),
        }
    }

    pub fn to_time(self) -> Self {
        match self.domain {
            Domain::Time => self,
            Domain::Frequency => transform_domain(self),
        }
    }

    /// Largest |coordinate| among samples holding at least
    /// [`SUPPORT_THRESHOLD`] of the peak intensity.
    pub fn support_extent(&self) -> f64 {
        let peak = self.values.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max);
        if peak == 0.0 {
            return 0.0;
        }
        let floor = peak * SUPPORT_THRESHOLD;
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| v.norm_sqr() >= floor)
            .map(|(i, _)| self.coordinate(i).abs())
            .fold(0.0, f64::max)
    }

    /// Relative L2 distance ‖self − other‖ / ‖other‖ on a shared grid and domain.
    pub fn relative_l2_distance(&self, other: &Self) -> Result<f64> {
        if self.grid != other.grid || self.domain != other.domain {
            return Err(Error::GridMismatch("amplitudes live on different grids or domains".into()));
        }
        let diff: f64 = self.values.iter().zip(&other.values).map(|(a, b)| (a - b).norm_sqr()).sum();
        let reference: f64 = other.values.iter().map(|b| b.norm_sqr()).sum();
        Ok((diff / reference).sqrt())
    }
}

/// Transform-limited Gaussian `(πσ²)^(−1/4) exp(−(Ω−Ω_c)²/(2σ²))`, normalized on the grid.
pub fn gaussian_spectral_amplitude(grid: &Grid, sigma: f64, center_offset: f64) -> Result<SpectralAmplitude> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::Config(format!("sigma must be positive, got {sigma}")));
    }
    let required = center_offset.abs() + 6.0 * sigma;
    if required > grid.nyquist() {
        return Err(Error::Aliasing(format!(
            "Gaussian support needs |Ω| up to {required:.4e} rad/s but the grid reaches {:.4e} rad/s; \
             use time_step <= {:.4e} s",
            grid.nyquist(),
            PI / required
        )));
    }
    let norm = (PI * sigma * sigma).powf(-0.25);
    let amp = SpectralAmplitude::from_fn(grid, |w| {
        let x = (w - center_offset) / sigma;
        Complex64::new(norm * (-0.5 * x * x).exp(), 0.0)
    });
    amp.normalized()
}

/// Moves an amplitude to the other domain with the unitary convention of this module.
pub fn transform_domain(a: SpectralAmplitude) -> SpectralAmplitude {
    let SpectralAmplitude { grid, mut values, domain } = a;
    let n = grid.n_samples();
    // Rotating by n/2 maps the centred index k to k − n/2 (mod n) and back.
    values.rotate_left(n / 2);
    let (plan, step, next) = match domain {
        Domain::Frequency => (&grid.forward, grid.angular_frequency_step(), Domain::Time),
        Domain::Time => (&grid.inverse, grid.time_step(), Domain::Frequency),
    };
    plan.process(&mut values);
    values.rotate_right(n / 2);
    let scale = step / (2.0 * PI).sqrt();
    values.iter_mut().for_each(|v| *v *= scale);
    SpectralAmplitude { grid, values, domain: next }
}

/// Band-limited (trigonometric) interpolation of a frequency-domain amplitude
/// at arbitrary offsets. Offsets outside the grid's band return zero.
pub fn interpolate_spectrum(a: &SpectralAmplitude, omegas: &[f64]) -> Vec<Complex64> {
    let grid = a.grid();
    let time = a.clone().to_time();
    let peak = time.values().iter().map(|v| v.norm_sqr()).fold(0.0, f64::max);
    let floor = peak * 1e-30;
    let support: Vec<(f64, Complex64)> = time
        .values()
        .iter()
        .enumerate()
        .filter(|(_, v)| v.norm_sqr() > floor)
        .map(|(j, v)| (grid.time(j), *v))
        .collect();
    let scale = grid.time_step() / (2.0 * PI).sqrt();
    let limit = grid.nyquist();
    omegas
        .iter()
        .map(|&w| {
            if w.abs() > limit {
                return Complex64::new(0.0, 0.0);
            }
            support.iter().map(|&(t, e)| e * Complex64::from_polar(1.0, w * t)).sum::<Complex64>() * scale
        })
        .collect()
}

/// Full width at half maximum of |values|².
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Fwhm {
    /// Width in rad/s (frequency domain) or seconds (time domain).
    pub width: f64,
    /// Axis coordinate of the peak sample.
    pub peak_position: f64,
    /// Another local maximum of at least [`SIDE_LOBE_LEVEL`] of the peak exists
    /// outside the central lobe.
    pub multi_lobe: bool,
}

/// Relative height above which a secondary maximum counts as a separate lobe.
pub const SIDE_LOBE_LEVEL: f64 = 0.01;

pub fn intensity_fwhm(a: &SpectralAmplitude) -> Result<Fwhm> {
    let intensity = a.intensity();
    let step = a.sample_step();
    let mut fwhm = profile_fwhm(&intensity)?;
    fwhm.width *= step;
    fwhm.peak_position = a.coordinate(fwhm.peak_position as usize);
    Ok(fwhm)
}

/// FWHM of a sampled non-negative profile in units of samples. `peak_position`
/// holds the peak index.
pub fn profile_fwhm(profile: &[f64]) -> Result<Fwhm> {
    let (peak_idx, &peak) = profile
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::Degenerate("empty profile".into()))?;
    if !(peak > 0.0 && peak.is_finite()) {
        return Err(Error::Degenerate("profile has no positive maximum".into()));
    }
    let half = 0.5 * peak;
    let mut left = peak_idx;
    while left > 0 && profile[left - 1] >= half {
        left -= 1;
    }
    let mut right = peak_idx;
    while right + 1 < profile.len() && profile[right + 1] >= half {
        right += 1;
    }
    let left_edge = if left == 0 {
        0.0
    } else {
        let (lo, hi) = (profile[left - 1], profile[left]);
        (left - 1) as f64 + (half - lo) / (hi - lo)
    };
    let right_edge = if right + 1 == profile.len() {
        right as f64
    } else {
        let (hi, lo) = (profile[right], profile[right + 1]);
        right as f64 + (hi - half) / (hi - lo)
    };
    let lobe_floor = SIDE_LOBE_LEVEL * peak;
    let is_local_max = |i: usize| {
        let v = profile[i];
        v >= lobe_floor
            && (i == 0 || profile[i - 1] < v)
            && (i + 1 == profile.len() || profile[i + 1] <= v)
    };
    // Walk down the flanks of the central lobe before looking for other maxima.
    let mut lobe_lo = left;
    while lobe_lo > 0 && profile[lobe_lo - 1] <= profile[lobe_lo] {
        lobe_lo -= 1;
    }
    let mut lobe_hi = right;
    while lobe_hi + 1 < profile.len() && profile[lobe_hi + 1] <= profile[lobe_hi] {
        lobe_hi += 1;
    }
    let multi_lobe = (0..lobe_lo).chain(lobe_hi + 1..profile.len()).any(is_local_max);
    Ok(Fwhm { width: right_edge - left_edge, peak_position: peak_idx as f64, multi_lobe })
}

/// Unit conversions used throughout the toolkit. Wavelength↔frequency widths
/// use the linearized relation Δν = cΔλ/λ₀².
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Conversion {
    /// Wavelength FWHM (m) → angular-frequency FWHM (rad/s) at λ₀ (m).
    WavelengthToAngular { center_wavelength: f64 },
    AngularToWavelength { center_wavelength: f64 },
    /// Wavelength FWHM (m) → frequency FWHM (Hz) at λ₀ (m).
    WavelengthToFrequency { center_wavelength: f64 },
    FrequencyToWavelength { center_wavelength: f64 },
    /// Gaussian intensity FWHM → amplitude parameter σ of exp(−x²/(2σ²)).
    FwhmToSigma,
    SigmaToFwhm,
    Ps2ToS2,
    S2ToPs2,
    PsPerNmToSPerM,
    SPerMToPsPerNm,
}

impl Conversion {
    pub fn inverse(self) -> Self {
        use Conversion::*;
        match self {
            WavelengthToAngular { center_wavelength } => AngularToWavelength { center_wavelength },
            AngularToWavelength { center_wavelength } => WavelengthToAngular { center_wavelength },
            WavelengthToFrequency { center_wavelength } => FrequencyToWavelength { center_wavelength },
            FrequencyToWavelength { center_wavelength } => WavelengthToFrequency { center_wavelength },
            FwhmToSigma => SigmaToFwhm,
            SigmaToFwhm => FwhmToSigma,
            Ps2ToS2 => S2ToPs2,
            S2ToPs2 => Ps2ToS2,
            PsPerNmToSPerM => SPerMToPsPerNm,
            SPerMToPsPerNm => PsPerNmToSPerM,
        }
    }
}

/// Parses the wavelength-independent conversion kinds by name.
impl FromStr for Conversion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "fwhm->sigma" => Self::FwhmToSigma,
            "sigma->fwhm" => Self::SigmaToFwhm,
            "ps2->s2" => Self::Ps2ToS2,
            "s2->ps2" => Self::S2ToPs2,
            "ps/nm->s/m" => Self::PsPerNmToSPerM,
            "s/m->ps/nm" => Self::SPerMToPsPerNm,
            other => return Err(Error::Config(format!("unknown unit conversion kind `{other}`"))),
        })
    }
}

const FWHM_PER_SIGMA: f64 = 1.665_109_222_315_395; // 2·sqrt(ln 2)

pub fn convert_units(value: f64, kind: Conversion) -> f64 {
    use Conversion::*;
    match kind {
        WavelengthToAngular { center_wavelength } => {
            2.0 * PI * SPEED_OF_LIGHT * value / (center_wavelength * center_wavelength)
        }
        AngularToWavelength { center_wavelength } => {
            value * center_wavelength * center_wavelength / (2.0 * PI * SPEED_OF_LIGHT)
        }
        WavelengthToFrequency { center_wavelength } => {
            SPEED_OF_LIGHT * value / (center_wavelength * center_wavelength)
        }
        FrequencyToWavelength { center_wavelength } => {
            value * center_wavelength * center_wavelength / SPEED_OF_LIGHT
        }
        FwhmToSigma => value / FWHM_PER_SIGMA,
        SigmaToFwhm => value * FWHM_PER_SIGMA,
        Ps2ToS2 => value * 1e-24,
        S2ToPs2 => value * 1e24,
        // 1 ps/nm = 1e-12 s / 1e-9 m
        PsPerNmToSPerM => value * 1e-3,
        SPerMToPsPerNm => value * 1e3,
    }
}

/// Amplitude parameter σ (rad/s) of a Gaussian photon whose intensity
/// spectrum has wavelength FWHM `fwhm` (m) around `center_wavelength` (m).
pub fn sigma_from_wavelength_fwhm(fwhm: f64, center_wavelength: f64) -> f64 {
    let angular = convert_units(fwhm, Conversion::WavelengthToAngular { center_wavelength });
    convert_units(angular, Conversion::FwhmToSigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid(n: usize, span: f64) -> Grid {
        Grid::new(n, span, 1551.5e-9).unwrap()
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(matches!(Grid::new(3000, 1e-9, 1.55e-6), Err(Error::Config(_))));
        assert!(matches!(Grid::new(512, 1e-9, 1.55e-6), Err(Error::Config(_))));
        assert!(Grid::new(1024, 0.0, 1.55e-6).is_err());
        assert!(Grid::new(1024, 1e-9, -1.0).is_err());
    }

    #[test]
    fn grid_spacing_examples() {
        let g = grid(16384, 2e-9);
        assert_relative_eq!(g.time_step(), 0.122_070_312_5e-12, max_relative = 1e-12);
        assert_relative_eq!(g.angular_frequency_step(), 2.0 * PI * 0.5e9, max_relative = 1e-12);

        let g = Grid::new(1024, 1e-9, 1550e-9).unwrap();
        let product = g.angular_frequency_step() * g.time_step() * g.n_samples() as f64;
        assert_relative_eq!(product, 2.0 * PI, max_relative = 1e-15);
    }

    #[test]
    fn carrier_matches_independent_evaluation() {
        // 2πc/λ with c and λ typed in directly, to five significant digits.
        let g = grid(16384, 4e-9);
        let oracle = 2.0 * 3.141_592_653_589_793 * 2.997_924_58e8 / 1.5515e-6;
        assert_relative_eq!(g.carrier(), oracle, max_relative = 1e-12);
        assert_relative_eq!(g.carrier(), 1.2141e15, max_relative = 5e-5);
    }

    #[test]
    fn zero_frequency_sits_at_centre() {
        let g = grid(1024, 1e-9);
        assert_eq!(g.omega(512), 0.0);
        assert_eq!(g.time(512), 0.0);
        assert!(g.omega(0) < 0.0);
    }

    #[test]
    fn two_nm_gaussian() {
        let g = grid(1 << 14, 500e-12);
        let sigma = sigma_from_wavelength_fwhm(2e-9, 1551.5e-9);
        // Δν = cΔλ/λ², σ = 2πΔν / (2√ln2), evaluated step by step.
        let dnu = 2.997_924_58e8 * 2e-9 / (1551.5e-9f64).powi(2);
        let oracle = 2.0 * PI * dnu / (2.0 * LN_2.sqrt());
        assert_relative_eq!(sigma, oracle, max_relative = 1e-12);
        assert_relative_eq!(sigma, 9.40e11, max_relative = 1e-3);

        let a = gaussian_spectral_amplitude(&g, sigma, 0.0).unwrap();
        assert_relative_eq!(a.norm_squared(), 1.0, max_relative = 1e-12);
        let peak = a.values().iter().enumerate().max_by(|x, y| x.1.norm().total_cmp(&y.1.norm())).unwrap().0;
        assert_eq!(g.omega(peak), 0.0);
        let fwhm = intensity_fwhm(&a).unwrap();
        assert!((fwhm.width - 1.565e12).abs() < g.angular_frequency_step().max(1e9));
        assert!(!fwhm.multi_lobe);
    }

    #[test]
    fn gaussian_is_even() {
        let g = grid(2048, 200e-12);
        let a = gaussian_spectral_amplitude(&g, 3e11, 0.0).unwrap();
        let n = g.n_samples();
        for k in 1..n / 2 {
            assert_relative_eq!(a.values()[n / 2 + k].re, a.values()[n / 2 - k].re, max_relative = 1e-14);
        }
    }

    #[test]
    fn gaussian_support_guard() {
        let g = grid(1024, 1e-9);
        // Nyquist here is π/Δt ≈ 3.2e12 rad/s.
        let err = gaussian_spectral_amplitude(&g, 1e12, 0.0).unwrap_err();
        assert!(matches!(err, Error::Aliasing(_)));
        assert!(err.to_string().contains("time_step"));
        assert!(gaussian_spectral_amplitude(&g, -1.0, 0.0).is_err());
    }

    #[test]
    fn transform_limited_duration_of_narrow_photon() {
        let sigma = sigma_from_wavelength_fwhm(0.2e-9, 1551.5e-9);
        let g = grid(1 << 14, 1e-9);
        let a = gaussian_spectral_amplitude(&g, sigma, 0.0).unwrap().to_time();
        let fwhm = intensity_fwhm(&a).unwrap();
        let dnu = 2.997_924_58e8 * 0.2e-9 / (1551.5e-9f64).powi(2);
        let oracle = 2.0 * LN_2 / (PI * dnu);
        assert!((fwhm.width - oracle).abs() < g.time_step());
        assert!((fwhm.width - 17.7e-12).abs() < 0.05e-12);
    }

    #[test]
    fn time_envelope_width_is_inverse_sigma() {
        let g = grid(1 << 14, 1e-9);
        let sigma = 2e11;
        let e = gaussian_spectral_amplitude(&g, sigma, 0.0).unwrap().to_time();
        // Amplitude exp(−t²σ²/2): intensity FWHM 2√ln2/σ.
        let fwhm = intensity_fwhm(&e).unwrap();
        assert!((fwhm.width - 2.0 * LN_2.sqrt() / sigma).abs() < g.time_step());
        let centre = e.values()[g.n_samples() / 2];
        assert!(centre.im.abs() < 1e-12 * centre.re.abs());
        assert_relative_eq!(e.norm_squared(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn round_trip_and_norm() {
        let g = grid(4096, 400e-12);
        let a = gaussian_spectral_amplitude(&g, 4e11, 5e10).unwrap();
        let there = transform_domain(a.clone());
        assert_eq!(there.domain(), Domain::Time);
        assert_relative_eq!(there.norm_squared(), a.norm_squared(), max_relative = 1e-12);
        let back = transform_domain(there);
        assert_eq!(back.domain(), Domain::Frequency);
        assert!(back.relative_l2_distance(&a).unwrap() < 1e-12);
    }

    #[test]
    fn narrow_spectrum_gives_flat_envelope() {
        let g = grid(1024, 100e-12);
        let mut values = vec![Complex64::new(0.0, 0.0); 1024];
        values[512] = Complex64::new(1.0, 0.0);
        let a = SpectralAmplitude::from_values(&g, values, Domain::Frequency).unwrap().normalized().unwrap();
        let e = a.to_time();
        let mags: Vec<f64> = e.values().iter().map(|v| v.norm()).collect();
        let (lo, hi) = mags.iter().fold((f64::MAX, 0.0f64), |(l, h), &m| (l.min(m), h.max(m)));
        assert!((hi - lo) / hi < 1e-12);
    }

    #[test]
    fn fwhm_is_scale_invariant() {
        let g = grid(2048, 200e-12);
        let a = gaussian_spectral_amplitude(&g, 3e11, 0.0).unwrap();
        let w1 = intensity_fwhm(&a).unwrap().width;
        let w2 = intensity_fwhm(&a.scaled(7.3)).unwrap().width;
        assert_relative_eq!(w1, w2, max_relative = 1e-12);
    }

    #[test]
    fn fwhm_flags_side_lobes() {
        let mut profile = vec![0.0; 200];
        for (i, p) in profile.iter_mut().enumerate() {
            let x = i as f64 - 100.0;
            *p = (-x * x / 50.0).exp() + 0.05 * (-(x - 40.0).powi(2) / 10.0).exp();
        }
        let f = profile_fwhm(&profile).unwrap();
        assert!(f.multi_lobe);
        assert!((f.width - 2.0 * (50.0 * LN_2).sqrt()).abs() < 0.1);
    }

    #[test]
    fn unit_conversion_examples() {
        let lam = 1551.5e-9;
        let hz = convert_units(2e-9, Conversion::WavelengthToFrequency { center_wavelength: lam });
        assert_relative_eq!(hz, 249.09e9, max_relative = 2e-4);
        let sigma = convert_units(1.565e12, Conversion::FwhmToSigma);
        assert_relative_eq!(sigma, 1.565e12 / (2.0 * LN_2.sqrt()), max_relative = 1e-14);
        assert_relative_eq!(sigma, 9.40e11, max_relative = 1e-3);
        assert_eq!(convert_units(0.0, Conversion::WavelengthToFrequency { center_wavelength: lam }), 0.0);
        assert_relative_eq!(convert_units(22.0, Conversion::Ps2ToS2), 22e-24);
        assert_relative_eq!(convert_units(336.6, Conversion::PsPerNmToSPerM), 0.3366);
        assert!("furlongs->s".parse::<Conversion>().is_err());
        assert_eq!("ps2->s2".parse::<Conversion>().unwrap(), Conversion::Ps2ToS2);
    }

    #[test]
    fn band_limited_interpolation_hits_samples() {
        let g = grid(2048, 200e-12);
        let a = gaussian_spectral_amplitude(&g, 3e11, 2e10).unwrap();
        let ws: Vec<f64> = (1000..1010).map(|k| g.omega(k)).collect();
        let interp = interpolate_spectrum(&a, &ws);
        for (k, v) in (1000..1010).zip(interp) {
            assert!((v - a.values()[k]).norm() < 1e-12 * a.values()[1024].norm());
        }
        // Off-grid point against the analytic Gaussian.
        let w = g.omega(1030) + 0.37 * g.angular_frequency_step();
        let exact = (PI * 9e22f64).powf(-0.25) * (-0.5 * ((w - 2e10) / 3e11).powi(2)).exp();
        let v = interpolate_spectrum(&a, &[w])[0];
        assert!((v.re - exact).abs() < 1e-10 * exact && v.im.abs() < 1e-10 * exact);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]

            #[test]
            fn fwhm_tracks_sigma_over_three_decades(log_sigma in 9.5f64..12.5) {
                let sigma = 10f64.powf(log_sigma);
                // Span chosen so the Gaussian has ~40 samples per σ and fits the band.
                let span = 2.0 * PI * 40.0 / sigma;
                let g = Grid::new(8192, span, 1.55e-6).unwrap();
                let a = gaussian_spectral_amplitude(&g, sigma, 0.0).unwrap();
                let fwhm = intensity_fwhm(&a).unwrap().width;
                prop_assert!((fwhm - 2.0 * sigma * LN_2.sqrt()).abs() < g.angular_frequency_step());
            }

            #[test]
            fn transforms_preserve_norm(sigma in 1e11f64..1e12, offset in -3e11f64..3e11, chirp in -5e-23f64..5e-23) {
                let g = Grid::new(4096, 600e-12, 1.55e-6).unwrap();
                let mut a = gaussian_spectral_amplitude(&g, sigma, offset).unwrap();
                for (k, v) in a.values_mut().iter_mut().enumerate() {
                    *v *= Complex64::from_polar(1.0, 0.5 * chirp * g.omega(k).powi(2));
                }
                let t = transform_domain(a.clone());
                prop_assert!((t.norm_squared() - a.norm_squared()).abs() < 1e-12);
                let back = transform_domain(t);
                prop_assert!(back.relative_l2_distance(&a).unwrap() < 1e-12);
            }

            #[test]
            fn conversions_round_trip(v in 1e-15f64..1e15, lam in 4e-7f64..2e-6) {
                for kind in [
                    Conversion::WavelengthToAngular { center_wavelength: lam },
                    Conversion::WavelengthToFrequency { center_wavelength: lam },
                    Conversion::FwhmToSigma,
                    Conversion::Ps2ToS2,
                    Conversion::PsPerNmToSPerM,
                ] {
                    let back = convert_units(convert_units(v, kind), kind.inverse());
                    prop_assert!(((back - v) / v).abs() < 1e-12);
                }
            }
        }
    }
}
