//! Visibility-maximizing search over the converter parameters (Φ, f_m, A, t0).
//!
//! A scenario declares each parameter fixed or free within bounds. The
//! objective builds `[GDD(Φ), lens]` on the input photon, interferes the
//! result with the target photon and reports the dip visibility.

mod scenario;
mod search;

use std::f64::consts::{LN_2, PI};

pub use scenario::{format_table, table_s1, TableSettings};
pub use search::optimize;

use crate::elements::{run_pipeline, OpticalElement};
use crate::error::{Error, Result};
use crate::hom::{Overlap, Visibility, VisibilityConvention};
use crate::sigspace::{gaussian_spectral_amplitude, intensity_fwhm, transform_limited_duration, Grid, SpectralAmplitude};

/// Parameter order used by vectors of lens parameters.
pub const PARAMETER_NAMES: [&str; 4] = ["gdd", "frequency", "amplitude", "offset"];

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ParamStatus {
    Fixed(f64),
    Free { lower: f64, upper: f64 },
}

impl ParamStatus {
    pub fn is_free(&self) -> bool {
        matches!(self, Self::Free { .. })
    }

    pub fn contains(&self, x: f64) -> bool {
        match *self {
            Self::Fixed(v) => x == v,
            Self::Free { lower, upper } => x >= lower && x <= upper,
        }
    }

    /// Largest magnitude the parameter can take.
    pub fn max_abs(&self) -> f64 {
        match *self {
            Self::Fixed(v) => v.abs(),
            Self::Free { lower, upper } => lower.abs().max(upper.abs()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LensParams {
    /// Φ in s².
    pub gdd: f64,
    /// f_m in Hz.
    pub frequency: f64,
    /// A in rad.
    pub amplitude: f64,
    /// t0 in s.
    pub offset: f64,
}

impl LensParams {
    pub fn to_array(self) -> [f64; 4] {
        [self.gdd, self.frequency, self.amplitude, self.offset]
    }

    pub fn from_array(v: [f64; 4]) -> Self {
        Self { gdd: v[0], frequency: v[1], amplitude: v[2], offset: v[3] }
    }

    /// Effective chirp rate A·(2πf_m)² of the lens trough.
    pub fn chirp_rate(&self) -> f64 {
        self.amplitude * (2.0 * PI * self.frequency).powi(2)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LensShape {
    Sinusoidal,
    /// Ideal quadratic lens with chirp rate A·(2πf_m)²; the offset is ignored.
    Quadratic,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub center_wavelength: f64,
    /// Amplitude σ (rad/s) of the transform-limited input photon.
    pub input_sigma: f64,
    /// Amplitude σ (rad/s) of the reference photon.
    pub target_sigma: f64,
    pub gdd: ParamStatus,
    pub frequency: ParamStatus,
    pub amplitude: ParamStatus,
    pub offset: ParamStatus,
    pub lens: LensShape,
    pub convention: VisibilityConvention,
    /// Overrides the default sample count of the scenario grid.
    pub grid_samples: Option<usize>,
}

impl Scenario {
    pub fn statuses(&self) -> [ParamStatus; 4] {
        [self.gdd, self.frequency, self.amplitude, self.offset]
    }

    pub fn free_indices(&self) -> Vec<usize> {
        self.statuses().iter().enumerate().filter(|(_, s)| s.is_free()).map(|(i, _)| i).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.input_sigma > 0.0 && self.target_sigma > 0.0 && self.center_wavelength > 0.0) {
            return Err(Error::Config(format!("scenario `{}`: photon bandwidths and wavelength must be positive", self.name)));
        }
        for (name, s) in PARAMETER_NAMES.iter().zip(self.statuses()) {
            match s {
                ParamStatus::Fixed(v) if !v.is_finite() => {
                    return Err(Error::Config(format!("scenario `{}`: {name} is not finite", self.name)));
                }
                ParamStatus::Free { lower, upper } if !(lower.is_finite() && upper.is_finite() && lower < upper) => {
                    return Err(Error::Config(format!(
                        "scenario `{}`: bounds for {name} must be finite and ordered, got [{lower}, {upper}]",
                        self.name
                    )));
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Grid sized for the largest dispersion the scenario can reach.
    pub fn grid(&self) -> Result<Grid> {
        let fwhm = |s: f64| 2.0 * s * LN_2.sqrt();
        let base = Grid::for_conversion(self.center_wavelength, fwhm(self.input_sigma), fwhm(self.target_sigma), self.gdd.max_abs())?;
        match self.grid_samples {
            Some(n) => Grid::new(n, base.time_span(), self.center_wavelength),
            None => Ok(base),
        }
    }

    /// Parameters in bounds, filling free ones with `values` in free-index order.
    pub fn assemble(&self, free_values: &[f64]) -> LensParams {
        let mut out = [0.0; 4];
        let mut it = free_values.iter();
        for (slot, s) in out.iter_mut().zip(self.statuses()) {
            *slot = match s {
                ParamStatus::Fixed(v) => v,
                ParamStatus::Free { lower, upper } => it.next().copied().unwrap_or(lower).clamp(lower, upper),
            };
        }
        LensParams::from_array(out)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub params: LensParams,
    pub visibility: Visibility,
    pub p_min: f64,
    /// Delay of the dip minimum.
    pub tau_min: f64,
    /// Intensity FWHM of the converted spectrum, rad/s.
    pub output_fwhm: f64,
    /// Set when the point could not be simulated; visibility is then zero.
    pub flag: Option<String>,
}

impl Evaluation {
    pub fn objective(&self, convention: VisibilityConvention) -> f64 {
        self.visibility.get(convention)
    }
}

/// Precomputed photons and grid for repeated visibility evaluations.
#[derive(Clone, Debug)]
pub struct Evaluator {
    scenario: Scenario,
    grid: Grid,
    input: SpectralAmplitude,
    target: SpectralAmplitude,
    target_duration: f64,
}

/// Scan window half-width in units of the target photon duration.
const WINDOW_DURATIONS: f64 = 3.0;
const STEPS_PER_DURATION: f64 = 32.0;

impl Evaluator {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        scenario.validate()?;
        let grid = scenario.grid()?;
        let input = gaussian_spectral_amplitude(&grid, scenario.input_sigma, 0.0)?;
        let target = gaussian_spectral_amplitude(&grid, scenario.target_sigma, 0.0)?;
        let target_duration = transform_limited_duration(2.0 * scenario.target_sigma * LN_2.sqrt());
        Ok(Self { scenario: scenario.clone(), grid, input, target, target_duration })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn input(&self) -> &SpectralAmplitude {
        &self.input
    }

    pub fn target(&self) -> &SpectralAmplitude {
        &self.target
    }

    pub fn pipeline(&self, p: &LensParams) -> Vec<OpticalElement> {
        let lens = match self.scenario.lens {
            LensShape::Sinusoidal => OpticalElement::SinusoidalTimePhase {
                amplitude: p.amplitude,
                frequency: p.frequency,
                offset: p.offset,
            },
            LensShape::Quadratic => OpticalElement::QuadraticTimePhase(p.chirp_rate()),
        };
        vec![OpticalElement::Gdd(p.gdd), lens]
    }

    pub fn convert(&self, p: &LensParams) -> Result<SpectralAmplitude> {
        Ok(run_pipeline(self.input.clone(), &self.pipeline(p))?.0)
    }

    /// Dip visibility at `p`. Simulation failures yield zero visibility and a flag.
    pub fn evaluate(&self, p: &LensParams) -> Evaluation {
        match self.try_evaluate(p) {
            Ok(e) => e,
            Err(e) => Evaluation {
                params: *p,
                visibility: Visibility { depth: 0.0, michelson: 0.0 },
                p_min: 0.5,
                tau_min: 0.0,
                output_fwhm: f64::NAN,
                flag: Some(e.to_string()),
            },
        }
    }

    fn try_evaluate(&self, p: &LensParams) -> Result<Evaluation> {
        if p.gdd == 0.0 || !(p.frequency > 0.0) || !(p.amplitude >= 0.0) {
            return Err(Error::Config(format!("parameters outside physical range: {p:?}")));
        }
        let out = self.convert(p)?;
        let output_fwhm = intensity_fwhm(&out)?.width;
        let overlap = Overlap::new(&out, &self.target)?;
        let half = WINDOW_DURATIONS * self.target_duration;
        let (tau_min, p_min) = overlap.minimum(-half, half, self.target_duration / STEPS_PER_DURATION)?;
        Ok(Evaluation {
            params: *p,
            visibility: Visibility::from_min_probability(p_min)?,
            p_min,
            tau_min,
            output_fwhm,
            flag: None,
        })
    }
}

/// One objective evaluation in search order.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceEntry {
    pub params: LensParams,
    pub objective: f64,
    pub best_so_far: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizationResult {
    pub scenario: String,
    pub convention: VisibilityConvention,
    pub best: Evaluation,
    pub evaluations: usize,
    pub trace: Vec<TraceEntry>,
}
