//! Joint spectral amplitudes of degenerate SPDC pairs: idler filtering,
//! heralded signal purity and two-photon interference of the pair itself.
//!
//! The JSA is `f(Ω_s, Ω_i) ∝ α(Ω_s + Ω_i)·φ_pm(Ω_s − Ω_i)` on a square window
//! that is independent of the pulse grids; rows index the signal, columns the
//! idler.

use std::f64::consts::{LN_2, PI};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::elements::GaussianFilter;
use crate::error::{Error, Result};
use crate::sigspace::{profile_fwhm, Domain, Grid, SpectralAmplitude, SPEED_OF_LIGHT};

pub const DEFAULT_JSA_SAMPLES: usize = 512;

/// Half-width of |sinc(u)|² at half maximum.
const SINC2_HALF_WIDTH: f64 = 1.391_557_377_2;

/// Uniform frequency-offset axis `Ω_k = (k − n/2)·step`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JsaAxis {
    pub n: usize,
    pub step: f64,
}

impl JsaAxis {
    pub fn new(n: usize, step: f64) -> Result<Self> {
        if n < 8 || n % 2 != 0 {
            return Err(Error::Config(format!("JSA axis needs an even number of samples >= 8, got {n}")));
        }
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::Config(format!("JSA axis step must be positive, got {step}")));
        }
        Ok(Self { n, step })
    }

    /// Window of half-width `2·(pump_fwhm + pm_bandwidth)` with `n` samples.
    pub fn covering(pump_fwhm: f64, pm_bandwidth: f64, n: usize) -> Result<Self> {
        let half = 2.0 * (pump_fwhm + pm_bandwidth);
        Self::new(n, 2.0 * half / n as f64)
    }

    #[inline]
    pub fn omega(&self, k: usize) -> f64 {
        (k as f64 - (self.n / 2) as f64) * self.step
    }

    pub fn half_width(&self) -> f64 {
        0.5 * self.n as f64 * self.step
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PhaseMatching {
    Gaussian,
    Sinc,
}

impl PhaseMatching {
    /// Amplitude as a function of Ω_s − Ω_i for intensity FWHM `bandwidth`.
    fn amplitude(self, delta: f64, bandwidth: f64) -> f64 {
        match self {
            Self::Gaussian => (-2.0 * LN_2 * (delta / bandwidth).powi(2)).exp(),
            Self::Sinc => {
                let u = 2.0 * SINC2_HALF_WIDTH * delta / bandwidth;
                if u == 0.0 {
                    1.0
                } else {
                    u.sin() / u
                }
            }
        }
    }
}

impl std::str::FromStr for PhaseMatching {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Self::Gaussian),
            "sinc" => Ok(Self::Sinc),
            other => Err(Error::Config(format!("unknown phase matching `{other}` (expected gaussian or sinc)"))),
        }
    }
}

/// Source parameters behind a model JSA.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SourceModel {
    /// Pump intensity FWHM in Ω_s + Ω_i (rad/s).
    pub pump_fwhm: f64,
    pub phase_matching: PhaseMatching,
    /// Phase-matching intensity FWHM in Ω_s − Ω_i (rad/s).
    pub pm_bandwidth: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct JointSpectralAmplitude {
    pub signal: JsaAxis,
    pub idler: JsaAxis,
    /// `values[(s, i)]`.
    pub values: DMatrix<Complex64>,
    pub model: Option<SourceModel>,
}

impl JointSpectralAmplitude {
    pub fn from_fn(signal: JsaAxis, idler: JsaAxis, f: impl Fn(f64, f64) -> Complex64) -> Self {
        let values = DMatrix::from_fn(signal.n, idler.n, |s, i| f(signal.omega(s), idler.omega(i)));
        Self { signal, idler, values, model: None }
    }

    fn cell(&self) -> f64 {
        self.signal.step * self.idler.step
    }

    pub fn norm_squared(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.cell()
    }

    pub fn normalized(mut self) -> Result<Self> {
        let n2 = self.norm_squared();
        if !(n2 > 0.0 && n2.is_finite()) {
            return Err(Error::Degenerate(format!("joint spectral amplitude has norm^2 {n2}")));
        }
        self.values /= Complex64::new(n2.sqrt(), 0.0);
        Ok(self)
    }

    pub fn is_square(&self) -> bool {
        self.signal == self.idler
    }

    /// Signal intensity marginal `∫|f|² dΩ_i` on the signal axis.
    pub fn signal_marginal(&self) -> Vec<f64> {
        (0..self.signal.n)
            .map(|s| self.values.row(s).iter().map(|v| v.norm_sqr()).sum::<f64>() * self.idler.step)
            .collect()
    }

    pub fn idler_marginal(&self) -> Vec<f64> {
        (0..self.idler.n)
            .map(|i| self.values.column(i).iter().map(|v| v.norm_sqr()).sum::<f64>() * self.signal.step)
            .collect()
    }

    /// Schmidt coefficients λ_k (summing to 1), largest first.
    pub fn schmidt_coefficients(&self) -> Result<Vec<f64>> {
        Ok(self.schmidt()?.0)
    }

    /// Squared singular values of the scaled JSA and the dominant signal mode,
    /// from the Hermitian eigenproblem of `ρ_s = M M†`.
    fn schmidt(&self) -> Result<(Vec<f64>, Vec<Complex64>)> {
        let m = self.scaled_matrix()?;
        let eig = (&m * m.adjoint()).symmetric_eigen();
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let mut lambdas: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k].max(0.0)).collect();
        let total: f64 = lambdas.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Numerical("reduced density matrix has no positive eigenvalue".into()));
        }
        lambdas.iter_mut().for_each(|v| *v /= total);
        let mode = eig.eigenvectors.column(order[0]).iter().copied().collect();
        Ok((lambdas, mode))
    }

    /// `f·√(ΔΩ_sΔΩ_i)`, scaled to unit Frobenius norm.
    fn scaled_matrix(&self) -> Result<DMatrix<Complex64>> {
        let n2 = self.norm_squared();
        if !(n2 > 0.0 && n2.is_finite()) {
            return Err(Error::Degenerate(format!("joint spectral amplitude has norm^2 {n2}")));
        }
        Ok(&self.values * Complex64::new((self.cell() / n2).sqrt(), 0.0))
    }

    /// Tr(ρ_s²) via the reduced density matrix `ρ_s = M M†`, independent of the SVD.
    pub fn purity_direct(&self) -> Result<f64> {
        let m = self.scaled_matrix()?;
        let rho = &m * m.adjoint();
        Ok(rho.iter().map(|v| v.norm_sqr()).sum())
    }
}

/// Angular-frequency FWHM of a pump at half the signal wavelength whose
/// wavelength FWHM is `pump_wavelength_fwhm`.
pub fn pump_angular_fwhm(pump_wavelength_fwhm: f64, signal_center_wavelength: f64) -> f64 {
    let lp = 0.5 * signal_center_wavelength;
    2.0 * PI * SPEED_OF_LIGHT * pump_wavelength_fwhm / (lp * lp)
}

pub fn make_jsa(pump_fwhm: f64, kind: PhaseMatching, pm_bandwidth: f64, axis: JsaAxis) -> Result<JointSpectralAmplitude> {
    make_jsa_on(pump_fwhm, kind, pm_bandwidth, axis, axis)
}

pub fn make_jsa_on(
    pump_fwhm: f64,
    kind: PhaseMatching,
    pm_bandwidth: f64,
    signal: JsaAxis,
    idler: JsaAxis,
) -> Result<JointSpectralAmplitude> {
    if !(pump_fwhm > 0.0 && pm_bandwidth > 0.0) {
        return Err(Error::Config(format!(
            "pump and phase-matching bandwidths must be positive, got {pump_fwhm:e} and {pm_bandwidth:e}"
        )));
    }
    let required = 2.0 * (pump_fwhm + pm_bandwidth);
    for (name, axis) in [("signal", signal), ("idler", idler)] {
        if axis.half_width() < required * (1.0 - 1e-12) {
            return Err(Error::Aliasing(format!(
                "{name} window ±{:.4e} rad/s is narrower than the required ±{required:.4e} rad/s",
                axis.half_width()
            )));
        }
    }
    let mut jsa = JointSpectralAmplitude::from_fn(signal, idler, |ws, wi| {
        let pump = (-2.0 * LN_2 * ((ws + wi) / pump_fwhm).powi(2)).exp();
        Complex64::new(pump * kind.amplitude(ws - wi, pm_bandwidth), 0.0)
    });
    jsa.model = Some(SourceModel { pump_fwhm, phase_matching: kind, pm_bandwidth });
    jsa.normalized()
}

/// Phase-matching bandwidth for which the unfiltered signal marginal has
/// intensity FWHM `marginal_fwhm`, found by bisection on a log scale.
pub fn calibrate_pm_bandwidth(pump_fwhm: f64, kind: PhaseMatching, marginal_fwhm: f64, n: usize) -> Result<f64> {
    let width = |bw: f64| -> Result<f64> {
        let axis = JsaAxis::covering(pump_fwhm, bw, n)?;
        let jsa = make_jsa(pump_fwhm, kind, bw, axis)?;
        Ok(profile_fwhm(&jsa.signal_marginal())?.width * axis.step)
    };
    let (mut lo, mut hi) = (marginal_fwhm * 1e-2, marginal_fwhm * 1e2);
    if width(lo)? > marginal_fwhm || width(hi)? < marginal_fwhm {
        return Err(Error::Degenerate(format!(
            "marginal FWHM {marginal_fwhm:.4e} rad/s is not reachable with pump FWHM {pump_fwhm:.4e} rad/s"
        )));
    }
    for _ in 0..60 {
        let mid = (lo * hi).sqrt();
        if width(mid)? < marginal_fwhm {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-10 {
            break;
        }
    }
    Ok((lo * hi).sqrt())
}

/// Multiplies the idler by the filter's amplitude mask. The returned JSA is
/// left unnormalized; the second value is its squared norm relative to the input.
pub fn apply_idler_filter(jsa: &JointSpectralAmplitude, filter: &GaussianFilter) -> Result<(JointSpectralAmplitude, f64)> {
    filter.validate()?;
    let before = jsa.norm_squared();
    if !(before > 0.0) {
        return Err(Error::Degenerate("joint spectral amplitude is zero".into()));
    }
    let mut out = jsa.clone();
    for i in 0..out.idler.n {
        let m = filter.amplitude_mask(out.idler.omega(i));
        out.values.column_mut(i).iter_mut().for_each(|v| *v *= m);
    }
    let efficiency = out.norm_squared() / before;
    Ok((out, efficiency))
}

#[derive(Clone, Debug)]
pub struct HeraldedSignal {
    /// Dominant Schmidt mode on the pulse grid, unit norm.
    pub amplitude: SpectralAmplitude,
    /// Tr(ρ_s²) = Σλ_k².
    pub purity: f64,
    pub schmidt: Vec<f64>,
}

/// Heralded signal state: purity from the Schmidt coefficients and the
/// dominant signal mode resampled onto `grid` by band-limited interpolation.
pub fn heralded_signal(jsa: &JointSpectralAmplitude, grid: &Grid) -> Result<HeraldedSignal> {
    let (schmidt, mut mode) = jsa.schmidt()?;
    let purity = schmidt.iter().map(|l| l * l).sum();
        let anchor = mode
        .iter()
        .copied()
        .max_by(|a, b| a.norm_sqr().total_cmp(&b.norm_sqr()))
        .unwrap_or(Complex64::new(1.0, 0.0));
    let rot = anchor.conj() / anchor.norm();
    mode.iter_mut().for_each(|v| *v *= rot);

    let values = resample_axis(&mode, jsa.signal, grid);
    let amplitude = SpectralAmplitude::from_values(grid, values, Domain::Frequency)?.normalized()?;
    Ok(HeraldedSignal { amplitude, purity, schmidt })
}

/// Trigonometric interpolation of samples on `axis` at the frequencies of
/// `grid`. Frequencies outside the axis window map to zero.
fn resample_axis(samples: &[Complex64], axis: JsaAxis, grid: &Grid) -> Vec<Complex64> {
    let n = axis.n;
    // Conjugate time samples of the axis, t_j = (j − n/2)·2π/(n·step).
    let dt = 2.0 * PI / (n as f64 * axis.step);
    let times: Vec<f64> = (0..n).map(|j| (j as f64 - (n / 2) as f64) * dt).collect();
    let envelope: Vec<Complex64> = times
        .iter()
        .map(|&t| {
            samples
                .iter()
                .enumerate()
                .map(|(k, v)| v * Complex64::from_polar(1.0, -axis.omega(k) * t))
                .sum::<Complex64>()
                / n as f64
        })
        .collect();
    let half = axis.half_width();
    (0..grid.n_samples())
        .into_par_iter()
        .map(|k| {
            let w = grid.omega(k);
            if w.abs() > half {
                return Complex64::new(0.0, 0.0);
            }
            times.iter().zip(&envelope).map(|(&t, e)| e * Complex64::from_polar(1.0, w * t)).sum()
        })
        .collect()
}

/// Coincidence probability of the pair itself at delay τ:
/// `½ − ½·Re ∬ f(Ω₁,Ω₂) f*(Ω₂,Ω₁) e^(i(Ω₁−Ω₂)τ) dΩ₁dΩ₂` with `f` normalized.
pub fn biphoton_coincidence(jsa: &JointSpectralAmplitude, tau: f64) -> Result<f64> {
    if !jsa.is_square() {
        return Err(Error::GridMismatch("biphoton interference needs identical signal and idler axes".into()));
    }
    let n2 = jsa.norm_squared();
    if !(n2 > 0.0 && n2.is_finite()) {
        return Err(Error::Degenerate("joint spectral amplitude is zero".into()));
    }
    let axis = jsa.signal;
    let f = &jsa.values;
    let phases: Vec<Complex64> = (0..axis.n).map(|k| Complex64::from_polar(1.0, axis.omega(k) * tau)).collect();
    let rows: Vec<f64> = (0..axis.n)
        .into_par_iter()
        .map(|j| {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..axis.n {
                acc += f[(j, k)] * f[(k, j)].conj() * phases[k].conj();
            }
            (acc * phases[j]).re
        })
        .collect();
    let exchange = rows.iter().sum::<f64>() * jsa.cell() / n2;
    let p = 0.5 - 0.5 * exchange;
    let clamped = p.clamp(0.0, 1.0);
    if (clamped - p).abs() > 1e-9 {
        return Err(Error::Numerical(format!("coincidence probability {p} outside [0, 1] beyond tolerance")));
    }
    Ok(clamped)
}
