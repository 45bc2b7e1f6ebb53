//! TOML run configuration. Every physical quantity is a string carrying its
//! unit; bare numbers are only accepted for dimensionless settings.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use timelens_core::biphoton::{PhaseMatching, DEFAULT_JSA_SAMPLES};
use timelens_core::elements::{GaussianFilter, OpticalElement};
use timelens_core::hom::VisibilityConvention;
use timelens_core::optimizer::{LensShape, ParamStatus};
use timelens_core::sigspace::{convert_units, Conversion, SPEED_OF_LIGHT};

use crate::quantity::{format_quantity, parse_quantity, Dimension};

#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

type CResult<T> = Result<T, ConfigError>;

fn err<T>(key: &str, msg: impl std::fmt::Display) -> CResult<T> {
    Err(ConfigError(format!("`{key}`: {msg}")))
}

// ---------------------------------------------------------------------------
// Raw file layout.

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(untagged)]
enum RawValue {
    Text(String),
    Number(f64),
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(untagged)]
enum RawParam {
    Fixed(RawValue),
    Range { min: RawValue, max: RawValue },
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    convention: Option<String>,
    source: RawSource,
    #[serde(skip_serializing_if = "Option::is_none")]
    grid: Option<RawGrid>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pipeline: Vec<RawElement>,
    #[serde(skip_serializing_if = "Option::is_none")]
    scan: Option<RawScan>,
    #[serde(skip_serializing_if = "Option::is_none")]
    counts: Option<RawCounts>,
    #[serde(skip_serializing_if = "Option::is_none")]
    optimize: Option<RawOptimize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    analytic: Option<RawAnalytic>,
    #[serde(skip_serializing_if = "Option::is_none")]
    spectrometer: Option<RawSpectrometer>,
    #[serde(skip_serializing_if = "Option::is_none")]
    output: Option<RawOutput>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawSource {
    kind: String,
    center_wavelength: RawValue,
    reference_fwhm: RawValue,
    #[serde(skip_serializing_if = "Option::is_none")]
    input_fwhm: Option<RawValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pump_fwhm: Option<RawValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    phase_matching: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    marginal_fwhm: Option<RawValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    idler_filter_fwhm: Option<RawValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    jsa_samples: Option<usize>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    samples: usize,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum RawElement {
    Gdd { gdd: RawValue },
    QuadraticLens { chirp_rate: RawValue },
    SinusoidalLens {
        amplitude: RawValue,
        frequency: RawValue,
        #[serde(skip_serializing_if = "Option::is_none")]
        offset: Option<RawValue>,
    },
    Delay { delay: RawValue },
    Filter {
        fwhm: RawValue,
        #[serde(skip_serializing_if = "Option::is_none")]
        center_offset: Option<RawValue>,
        #[serde(skip_serializing_if = "Option::is_none")]
        peak_transmission: Option<RawValue>,
    },
    Attenuator { transmission: RawValue },
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawScan {
    start: RawValue,
    stop: RawValue,
    step: RawValue,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawCounts {
    rate_scale: RawValue,
    #[serde(skip_serializing_if = "Option::is_none")]
    singles_scale: Option<RawValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    drift: Option<RawValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bootstrap_resamples: Option<usize>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawOptimize {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    rows: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    budget: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    scenario: Vec<RawScenario>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    lens: Option<String>,
    gdd: RawParam,
    frequency: RawParam,
    amplitude: RawParam,
    #[serde(skip_serializing_if = "Option::is_none")]
    offset: Option<RawParam>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawAnalytic {
    #[serde(skip_serializing_if = "Option::is_none")]
    compression: Option<RawValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_compression: Option<RawValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    modulation_frequency: Option<RawValue>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawSpectrometer {
    dispersion: RawValue,
    jitter_rms: RawValue,
    bin_width: RawValue,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: PathBuf,
}

// ---------------------------------------------------------------------------
// Typed configuration, SI units throughout.

#[derive(Clone, Debug, PartialEq)]
pub enum SourceKind {
    /// Transform-limited Gaussian photon with wavelength FWHM (m).
    Gaussian { input_fwhm: f64 },
    /// Heralded signal of a degenerate SPDC pair.
    Heralded {
        /// Pump wavelength FWHM (m).
        pump_fwhm: f64,
        phase_matching: PhaseMatching,
        /// Unfiltered signal marginal wavelength FWHM (m).
        marginal_fwhm: f64,
        /// Idler filter wavelength FWHM (m).
        idler_filter_fwhm: Option<f64>,
        jsa_samples: usize,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Source {
    pub kind: SourceKind,
    pub center_wavelength: f64,
    /// Reference photon wavelength FWHM (m).
    pub reference_fwhm: f64,
}

impl Source {
    /// Wavelength FWHM of the photon entering the pipeline.
    pub fn input_fwhm(&self) -> f64 {
        match self.kind {
            SourceKind::Gaussian { input_fwhm } => input_fwhm,
            SourceKind::Heralded { marginal_fwhm, .. } => marginal_fwhm,
        }
    }

    pub fn angular(&self, wavelength_width: f64) -> f64 {
        convert_units(wavelength_width, Conversion::WavelengthToAngular { center_wavelength: self.center_wavelength })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanSettings {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CountSettings {
    pub rate_scale: f64,
    pub singles_scale: f64,
    pub drift: f64,
    pub bootstrap_resamples: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioSpec {
    pub name: String,
    pub lens: LensShape,
    pub gdd: ParamStatus,
    pub frequency: ParamStatus,
    pub amplitude: ParamStatus,
    pub offset: ParamStatus,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizeSettings {
    pub rows: Vec<usize>,
    pub budget: usize,
    pub scenarios: Vec<ScenarioSpec>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnalyticSettings {
    /// Design compression factor; defaults to the source width ratio.
    pub compression: Option<f64>,
    pub max_compression: f64,
    pub points: usize,
    pub modulation_frequency: f64,
}

impl Default for AnalyticSettings {
    fn default() -> Self {
        Self { compression: None, max_compression: 20.0, points: 96, modulation_frequency: 10e9 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectrometerSettings {
    pub dispersion: f64,
    pub jitter_rms: f64,
    pub bin_width: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub convention: VisibilityConvention,
    pub source: Source,
    pub grid_samples: Option<usize>,
    pub pipeline: Vec<OpticalElement>,
    pub scan: Option<ScanSettings>,
    pub counts: Option<CountSettings>,
    pub optimize: Option<OptimizeSettings>,
    pub analytic: AnalyticSettings,
    pub spectrometer: Option<SpectrometerSettings>,
    pub output_dir: Option<PathBuf>,
}

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_BUDGET: usize = 20_000;
pub const DEFAULT_RESAMPLES: usize = 200;

// ---------------------------------------------------------------------------
// Raw → typed.

fn quantity(v: &RawValue, key: &str, dim: Dimension) -> CResult<f64> {
    match v {
        RawValue::Text(t) => parse_quantity(t, dim).or_else(|e| err(key, e)),
        RawValue::Number(n) => err(
            key,
            format!("`{n}` has no unit; write it as a string such as \"{n} {}\"", dim.si_unit()),
        ),
    }
}

fn scalar(v: &RawValue, key: &str) -> CResult<f64> {
    match v {
        RawValue::Number(n) if n.is_finite() => Ok(*n),
        RawValue::Number(n) => err(key, format!("{n} is not finite")),
        RawValue::Text(t) => err(key, format!("expected a plain number, got \"{t}\"")),
    }
}

fn positive(v: f64, key: &str) -> CResult<f64> {
    if v > 0.0 {
        Ok(v)
    } else {
        err(key, format!("must be positive, got {v:e}"))
    }
}

fn param(p: &RawParam, key: &str, dim: Option<Dimension>) -> CResult<ParamStatus> {
    let read = |v: &RawValue, k: &str| match dim {
        Some(d) => quantity(v, k, d),
        None => scalar(v, k),
    };
    match p {
        RawParam::Fixed(v) => Ok(ParamStatus::Fixed(read(v, key)?)),
        RawParam::Range { min, max } => {
            let lower = read(min, &format!("{key}.min"))?;
            let upper = read(max, &format!("{key}.max"))?;
            if !(lower < upper) {
                return err(key, format!("min must be below max, got [{lower:e}, {upper:e}]"));
            }
            Ok(ParamStatus::Free { lower, upper })
        }
    }
}

/// Angular offset of a wavelength offset `dl` from `l0`.
fn angular_offset(dl: f64, l0: f64) -> f64 {
    2.0 * PI * SPEED_OF_LIGHT * (1.0 / (l0 + dl) - 1.0 / l0)
}

/// Filter widths may be given as wavelengths or angular frequencies.
fn spectral_width(v: &RawValue, key: &str, l0: f64) -> CResult<f64> {
    if let RawValue::Text(t) = v {
        if let Ok(w) = parse_quantity(t, Dimension::Wavelength) {
            return Ok(convert_units(w, Conversion::WavelengthToAngular { center_wavelength: l0 }));
        }
    }
    quantity(v, key, Dimension::AngularFrequency)
}

fn spectral_offset(v: &RawValue, key: &str, l0: f64) -> CResult<f64> {
    if let RawValue::Text(t) = v {
        if let Ok(w) = parse_quantity(t, Dimension::Wavelength) {
            return Ok(angular_offset(w, l0));
        }
    }
    quantity(v, key, Dimension::AngularFrequency)
}

fn element(raw: &RawElement, index: usize, l0: f64) -> CResult<OpticalElement> {
    let key = |field: &str| format!("pipeline[{index}].{field}");
    Ok(match raw {
        RawElement::Gdd { gdd } => OpticalElement::Gdd(quantity(gdd, &key("gdd"), Dimension::Gdd)?),
        RawElement::QuadraticLens { chirp_rate } => {
            OpticalElement::QuadraticTimePhase(quantity(chirp_rate, &key("chirp_rate"), Dimension::ChirpRate)?)
        }
        RawElement::SinusoidalLens { amplitude, frequency, offset } => OpticalElement::SinusoidalTimePhase {
            amplitude: quantity(amplitude, &key("amplitude"), Dimension::Angle)?,
            frequency: positive(quantity(frequency, &key("frequency"), Dimension::Frequency)?, &key("frequency"))?,
            offset: match offset {
                Some(v) => quantity(v, &key("offset"), Dimension::Time)?,
                None => 0.0,
            },
        },
        RawElement::Delay { delay } => OpticalElement::Delay(quantity(delay, &key("delay"), Dimension::Time)?),
        RawElement::Filter { fwhm, center_offset, peak_transmission } => {
            let fwhm = spectral_width(fwhm, &key("fwhm"), l0)?;
            let center = match center_offset {
                Some(v) => spectral_offset(v, &key("center_offset"), l0)?,
                None => 0.0,
            };
            let peak = match peak_transmission {
                Some(v) => scalar(v, &key("peak_transmission"))?,
                None => 1.0,
            };
            let f = GaussianFilter::new(center, fwhm, peak).or_else(|e| err(&key("fwhm"), e))?;
            OpticalElement::GaussianFilter(f)
        }
        RawElement::Attenuator { transmission } => {
            let t = scalar(transmission, &key("transmission"))?;
            if !(t > 0.0 && t <= 1.0) {
                return err(&key("transmission"), format!("must lie in (0, 1], got {t}"));
            }
            OpticalElement::Attenuator(t)
        }
    })
}

fn source(raw: &RawSource) -> CResult<Source> {
    let l0 = positive(quantity(&raw.center_wavelength, "source.center_wavelength", Dimension::Wavelength)?, "source.center_wavelength")?;
    let reference_fwhm = positive(quantity(&raw.reference_fwhm, "source.reference_fwhm", Dimension::Wavelength)?, "source.reference_fwhm")?;
    let width = |v: &Option<RawValue>, k: &str| -> CResult<f64> {
        match v {
            Some(v) => positive(quantity(v, k, Dimension::Wavelength)?, k),
            None => err(k, format!("required for source kind `{}`", raw.kind)),
        }
    };
    let forbid = |present: bool, k: &str| -> CResult<()> {
        if present {
            err(k, format!("not used by source kind `{}`", raw.kind))
        } else {
            Ok(())
        }
    };
    let kind = match raw.kind.as_str() {
        "gaussian" => {
            forbid(raw.pump_fwhm.is_some(), "source.pump_fwhm")?;
            forbid(raw.phase_matching.is_some(), "source.phase_matching")?;
            forbid(raw.marginal_fwhm.is_some(), "source.marginal_fwhm")?;
            forbid(raw.idler_filter_fwhm.is_some(), "source.idler_filter_fwhm")?;
            forbid(raw.jsa_samples.is_some(), "source.jsa_samples")?;
            SourceKind::Gaussian { input_fwhm: width(&raw.input_fwhm, "source.input_fwhm")? }
        }
        "heralded" => {
            forbid(raw.input_fwhm.is_some(), "source.input_fwhm")?;
            let phase_matching = match &raw.phase_matching {
                Some(s) => s.parse().or_else(|e| err("source.phase_matching", e))?,
                None => PhaseMatching::Sinc,
            };
            let idler_filter_fwhm = match &raw.idler_filter_fwhm {
                Some(_) => Some(width(&raw.idler_filter_fwhm, "source.idler_filter_fwhm")?),
                None => None,
            };
            let jsa_samples = raw.jsa_samples.unwrap_or(DEFAULT_JSA_SAMPLES);
            if jsa_samples < 8 || jsa_samples % 2 != 0 {
                return err("source.jsa_samples", format!("must be even and >= 8, got {jsa_samples}"));
            }
            SourceKind::Heralded {
                pump_fwhm: width(&raw.pump_fwhm, "source.pump_fwhm")?,
                phase_matching,
                marginal_fwhm: width(&raw.marginal_fwhm, "source.marginal_fwhm")?,
                idler_filter_fwhm,
                jsa_samples,
            }
        }
        other => return err("source.kind", format!("unknown source kind `{other}` (expected gaussian or heralded)")),
    };
    Ok(Source { kind, center_wavelength: l0, reference_fwhm })
}

fn lens_shape(s: Option<&str>, key: &str) -> CResult<LensShape> {
    match s {
        None | Some("sinusoidal") => Ok(LensShape::Sinusoidal),
        Some("quadratic") => Ok(LensShape::Quadratic),
        Some(other) => err(key, format!("unknown lens `{other}` (expected sinusoidal or quadratic)")),
    }
}

fn convention(s: &str, key: &str) -> CResult<VisibilityConvention> {
    s.parse().or_else(|e| err(key, e))
}

fn typed(raw: RawConfig) -> CResult<RunConfig> {
    let source = source(&raw.source)?;
    let l0 = source.center_wavelength;
    let grid_samples = match raw.grid {
        Some(g) if g.samples < 1024 || !g.samples.is_power_of_two() => {
            return err("grid.samples", format!("must be a power of two >= 1024, got {}", g.samples));
        }
        Some(g) => Some(g.samples),
        None => None,
    };
    let pipeline = raw.pipeline.iter().enumerate().map(|(i, e)| element(e, i, l0)).collect::<CResult<Vec<_>>>()?;
    let scan = match raw.scan {
        Some(s) => {
            let start = quantity(&s.start, "scan.start", Dimension::Time)?;
            let stop = quantity(&s.stop, "scan.stop", Dimension::Time)?;
            let step = positive(quantity(&s.step, "scan.step", Dimension::Time)?, "scan.step")?;
            if !(stop > start) {
                return err("scan.stop", "must exceed scan.start");
            }
            Some(ScanSettings { start, stop, step })
        }
        None => None,
    };
    let counts = match raw.counts {
        Some(c) => Some(CountSettings {
            rate_scale: positive(scalar(&c.rate_scale, "counts.rate_scale")?, "counts.rate_scale")?,
            singles_scale: match &c.singles_scale {
                Some(v) => positive(scalar(v, "counts.singles_scale")?, "counts.singles_scale")?,
                None => 1e5,
            },
            drift: match &c.drift {
                Some(v) => positive(scalar(v, "counts.drift")?, "counts.drift")?,
                None => 1.0,
            },
            bootstrap_resamples: match c.bootstrap_resamples {
                Some(n) if n < 100 => return err("counts.bootstrap_resamples", format!("must be >= 100, got {n}")),
                Some(n) => n,
                None => DEFAULT_RESAMPLES,
            },
        }),
        None => None,
    };
    let optimize = match raw.optimize {
        Some(o) => {
            if let Some(r) = o.rows.iter().find(|r| !(1..=3).contains(*r)) {
                return err("optimize.rows", format!("table rows are 1, 2 or 3, got {r}"));
            }
            let budget = o.budget.unwrap_or(DEFAULT_BUDGET);
            if budget < 100 {
                return err("optimize.budget", format!("must be >= 100, got {budget}"));
            }
            let mut scenarios = Vec::new();
            for (i, s) in o.scenario.iter().enumerate() {
                let k = |f: &str| format!("optimize.scenario[{i}].{f}");
                if s.name.is_empty() || !s.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                    return err(&k("name"), format!("`{}` must be non-empty and use only [A-Za-z0-9_-]", s.name));
                }
                scenarios.push(ScenarioSpec {
                    name: s.name.clone(),
                    lens: lens_shape(s.lens.as_deref(), &k("lens"))?,
                    gdd: param(&s.gdd, &k("gdd"), Some(Dimension::Gdd))?,
                    frequency: param(&s.frequency, &k("frequency"), Some(Dimension::Frequency))?,
                    amplitude: param(&s.amplitude, &k("amplitude"), Some(Dimension::Angle))?,
                    offset: match &s.offset {
                        Some(p) => param(p, &k("offset"), Some(Dimension::Time))?,
                        None => ParamStatus::Fixed(0.0),
                    },
                });
            }
            let mut names: Vec<String> = o.rows.iter().map(|r| format!("row{r}")).collect();
            names.extend(scenarios.iter().map(|s| s.name.clone()));
            let mut sorted = names.clone();
            sorted.sort();
            sorted.dedup();
            if sorted.len() != names.len() {
                return err("optimize", "scenario names must be unique");
            }
            if names.is_empty() {
                return err("optimize", "needs at least one of `rows` or `scenario`");
            }
            Some(OptimizeSettings { rows: o.rows, budget, scenarios })
        }
        None => None,
    };
    let analytic = match raw.analytic {
        Some(a) => {
            let d = AnalyticSettings::default();
            let compression = match &a.compression {
                Some(v) => Some(scalar(v, "analytic.compression")?),
                None => None,
            };
            if let Some(f) = compression {
                if !(f > 1.0) {
                    return err("analytic.compression", format!("must exceed 1, got {f}"));
                }
            }
            let max_compression = match &a.max_compression {
                Some(v) => scalar(v, "analytic.max_compression")?,
                None => d.max_compression,
            };
            if !(max_compression > 1.0) {
                return err("analytic.max_compression", format!("must exceed 1, got {max_compression}"));
            }
            let points = a.points.unwrap_or(d.points);
            if points < 2 {
                return err("analytic.points", format!("must be >= 2, got {points}"));
            }
            let modulation_frequency = match &a.modulation_frequency {
                Some(v) => positive(
                    quantity(v, "analytic.modulation_frequency", Dimension::Frequency)?,
                    "analytic.modulation_frequency",
                )?,
                None => d.modulation_frequency,
            };
            AnalyticSettings { compression, max_compression, points, modulation_frequency }
        }
        None => AnalyticSettings::default(),
    };
    let spectrometer = match raw.spectrometer {
        Some(s) => {
            let dispersion = quantity(&s.dispersion, "spectrometer.dispersion", Dimension::Dispersion)?;
            if dispersion == 0.0 {
                return err("spectrometer.dispersion", "must be nonzero");
            }
            let jitter_rms = quantity(&s.jitter_rms, "spectrometer.jitter_rms", Dimension::Time)?;
            if jitter_rms < 0.0 {
                return err("spectrometer.jitter_rms", "must be >= 0");
            }
            let bin_width = positive(quantity(&s.bin_width, "spectrometer.bin_width", Dimension::Time)?, "spectrometer.bin_width")?;
            Some(SpectrometerSettings { dispersion, jitter_rms, bin_width })
        }
        None => None,
    };
    let convention = match &raw.convention {
        Some(s) => convention(s, "convention")?,
        None => VisibilityConvention::Michelson,
    };
    Ok(RunConfig {
        seed: raw.seed.unwrap_or(DEFAULT_SEED),
        convention,
        source,
        grid_samples,
        pipeline,
        scan,
        counts,
        optimize,
        analytic,
        spectrometer,
        output_dir: raw.output.map(|o| o.dir),
    })
}

pub fn parse_config_str(text: &str) -> CResult<RunConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError(e.to_string().trim_end().to_string()))?;
    typed(raw)
}

pub fn parse_config(path: &Path) -> CResult<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
    parse_config_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))
}

// ---------------------------------------------------------------------------
// Typed → raw, in SI units.

fn q(v: f64, dim: Dimension) -> RawValue {
    RawValue::Text(format_quantity(v, dim))
}

fn raw_param(p: ParamStatus, dim: Option<Dimension>) -> RawParam {
    let v = |x: f64| match dim {
        Some(d) => q(x, d),
        None => RawValue::Number(x),
    };
    match p {
        ParamStatus::Fixed(x) => RawParam::Fixed(v(x)),
        ParamStatus::Free { lower, upper } => RawParam::Range { min: v(lower), max: v(upper) },
    }
}

fn raw_element(e: &OpticalElement) -> RawElement {
    match *e {
        OpticalElement::Gdd(g) => RawElement::Gdd { gdd: q(g, Dimension::Gdd) },
        OpticalElement::QuadraticTimePhase(k) => RawElement::QuadraticLens { chirp_rate: q(k, Dimension::ChirpRate) },
        OpticalElement::SinusoidalTimePhase { amplitude, frequency, offset } => RawElement::SinusoidalLens {
            amplitude: q(amplitude, Dimension::Angle),
            frequency: q(frequency, Dimension::Frequency),
            offset: Some(q(offset, Dimension::Time)),
        },
        OpticalElement::Delay(t) => RawElement::Delay { delay: q(t, Dimension::Time) },
        OpticalElement::GaussianFilter(f) => RawElement::Filter {
            fwhm: q(f.fwhm, Dimension::AngularFrequency),
            center_offset: Some(q(f.center_offset, Dimension::AngularFrequency)),
            peak_transmission: Some(RawValue::Number(f.peak_transmission)),
        },
        OpticalElement::Attenuator(t) => RawElement::Attenuator { transmission: RawValue::Number(t) },
    }
}

fn phase_matching_name(p: PhaseMatching) -> &'static str {
    match p {
        PhaseMatching::Gaussian => "gaussian",
        PhaseMatching::Sinc => "sinc",
    }
}

fn lens_name(l: LensShape) -> &'static str {
    match l {
        LensShape::Sinusoidal => "sinusoidal",
        LensShape::Quadratic => "quadratic",
    }
}

fn raw(c: &RunConfig) -> RawConfig {
    let w = |v: f64| q(v, Dimension::Wavelength);
    let s = &c.source;
    let mut src = RawSource {
        kind: String::new(),
        center_wavelength: w(s.center_wavelength),
        reference_fwhm: w(s.reference_fwhm),
        input_fwhm: None,
        pump_fwhm: None,
        phase_matching: None,
        marginal_fwhm: None,
        idler_filter_fwhm: None,
        jsa_samples: None,
    };
    match &s.kind {
        SourceKind::Gaussian { input_fwhm } => {
            src.kind = "gaussian".into();
            src.input_fwhm = Some(w(*input_fwhm));
        }
        SourceKind::Heralded { pump_fwhm, phase_matching, marginal_fwhm, idler_filter_fwhm, jsa_samples } => {
            src.kind = "heralded".into();
            src.pump_fwhm = Some(w(*pump_fwhm));
            src.phase_matching = Some(phase_matching_name(*phase_matching).into());
            src.marginal_fwhm = Some(w(*marginal_fwhm));
            src.idler_filter_fwhm = idler_filter_fwhm.map(w);
            src.jsa_samples = Some(*jsa_samples);
        }
    }
    RawConfig {
        seed: Some(c.seed),
        convention: Some(c.convention.name().into()),
        source: src,
        grid: c.grid_samples.map(|samples| RawGrid { samples }),
        pipeline: c.pipeline.iter().map(raw_element).collect(),
        scan: c.scan.map(|s| RawScan {
            start: q(s.start, Dimension::Time),
            stop: q(s.stop, Dimension::Time),
            step: q(s.step, Dimension::Time),
        }),
        counts: c.counts.map(|k| RawCounts {
            rate_scale: RawValue::Number(k.rate_scale),
            singles_scale: Some(RawValue::Number(k.singles_scale)),
            drift: Some(RawValue::Number(k.drift)),
            bootstrap_resamples: Some(k.bootstrap_resamples),
        }),
        optimize: c.optimize.as_ref().map(|o| RawOptimize {
            rows: o.rows.clone(),
            budget: Some(o.budget),
            scenario: o
                .scenarios
                .iter()
                .map(|s| RawScenario {
                    name: s.name.clone(),
                    lens: Some(lens_name(s.lens).into()),
                    gdd: raw_param(s.gdd, Some(Dimension::Gdd)),
                    frequency: raw_param(s.frequency, Some(Dimension::Frequency)),
                    amplitude: raw_param(s.amplitude, Some(Dimension::Angle)),
                    offset: Some(raw_param(s.offset, Some(Dimension::Time))),
                })
                .collect(),
        }),
        analytic: Some(RawAnalytic {
            compression: c.analytic.compression.map(RawValue::Number),
            max_compression: Some(RawValue::Number(c.analytic.max_compression)),
            points: Some(c.analytic.points),
            modulation_frequency: Some(q(c.analytic.modulation_frequency, Dimension::Frequency)),
        }),
        spectrometer: c.spectrometer.map(|s| RawSpectrometer {
            dispersion: q(s.dispersion, Dimension::Dispersion),
            jitter_rms: q(s.jitter_rms, Dimension::Time),
            bin_width: q(s.bin_width, Dimension::Time),
        }),
        output: c.output_dir.clone().map(|dir| RawOutput { dir }),
    }
}

/// Canonical TOML text; `parse_config_str(&serialize(c)) == c`.
pub fn serialize(c: &RunConfig) -> String {
    toml::to_string(&raw(c)).expect("config tables always serialize")
}

/// Canonical text of the physical parameters only: seed, convention and
/// output location are dropped.
pub fn physical_fingerprint_text(c: &RunConfig) -> String {
    let mut stripped = c.clone();
    stripped.seed = 0;
    stripped.convention = VisibilityConvention::Michelson;
    stripped.output_dir = None;
    serialize(&stripped)
}

/// Bundled experiment configuration.
pub const EXPERIMENT_TOML: &str = include_str!("../configs/experiment.toml");

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const MINIMAL: &str = r#"
[source]
kind = "gaussian"
center_wavelength = "1551.5 nm"
input_fwhm = "2 nm"
reference_fwhm = "0.2 nm"
"#;

    #[test]
    fn bundled_experiment_is_the_row3_point() {
        let c = parse_config_str(EXPERIMENT_TOML).unwrap();
        assert_eq!(c.source.kind, SourceKind::Gaussian { input_fwhm: 2e-9 });
        assert!((c.source.reference_fwhm - 0.2e-9).abs() < 1e-24);
        assert!((c.source.center_wavelength - 1551.5e-9).abs() < 1e-20);
        match c.pipeline.as_slice() {
            [OpticalElement::Gdd(g), OpticalElement::SinusoidalTimePhase { amplitude, frequency, offset }] => {
                assert!((g - 22e-24).abs() < 1e-36);
                assert!((amplitude - 4.27 * PI).abs() < 1e-12);
                assert_eq!(*frequency, 10e9);
                assert_eq!(*offset, 0.0);
            }
            other => panic!("unexpected pipeline {other:?}"),
        }
    }

    #[test]
    fn unitless_quantity_names_the_key() {
        let text = format!("{MINIMAL}\n[[pipeline]]\ntype = \"gdd\"\ngdd = 22\n");
        let e = parse_config_str(&text).unwrap_err();
        assert!(e.0.contains("pipeline[0].gdd"), "{e}");
        assert!(e.0.contains("no unit"), "{e}");
    }

    #[test]
    fn unknown_keys_and_variants_are_errors() {
        let e = parse_config_str(&format!("{MINIMAL}\ncolour = 3\n")).unwrap_err();
        assert!(e.0.contains("colour"), "{e}");
        let e = parse_config_str(&format!("{MINIMAL}\n[[pipeline]]\ntype = \"prism\"\n")).unwrap_err();
        assert!(e.0.contains("prism"), "{e}");
        let e = parse_config_str(&format!("{MINIMAL}\n[[pipeline]]\ntype = \"gdd\"\ngdd = \"1 ps2\"\nextra = 1\n")).unwrap_err();
        assert!(e.0.contains("extra"), "{e}");
    }

    #[test]
    fn out_of_range_values_are_rejected() {
        let e = parse_config_str(&format!("{MINIMAL}\n[scan]\nstart = \"1 ps\"\nstop = \"-1 ps\"\nstep = \"1 ps\"\n")).unwrap_err();
        assert!(e.0.contains("scan.stop"), "{e}");
        let e = parse_config_str(&format!("{MINIMAL}\n[[pipeline]]\ntype = \"attenuator\"\ntransmission = 1.5\n")).unwrap_err();
        assert!(e.0.contains("pipeline[0].transmission"), "{e}");
        let e = parse_config_str(&format!("{MINIMAL}\n[grid]\nsamples = 1000\n")).unwrap_err();
        assert!(e.0.contains("grid.samples"), "{e}");
    }

    #[test]
    fn bundled_config_round_trips() {
        let c = parse_config_str(EXPERIMENT_TOML).unwrap();
        assert_eq!(parse_config_str(&serialize(&c)).unwrap(), c);
    }

    #[test]
    fn heralded_source_round_trips() {
        let text = r#"
seed = 9
[source]
kind = "heralded"
center_wavelength = "1551.5 nm"
reference_fwhm = "0.2 nm"
pump_fwhm = "0.5 nm"
phase_matching = "gaussian"
marginal_fwhm = "2 nm"
idler_filter_fwhm = "0.4 nm"

[optimize]
budget = 300
[[optimize.scenario]]
name = "custom"
lens = "quadratic"
gdd = { min = "5 ps2", max = "30 ps2" }
frequency = "10 GHz"
amplitude = { min = "0 pi_rad", max = "8 pi_rad" }
"#;
        let c = parse_config_str(text).unwrap();
        assert_eq!(parse_config_str(&serialize(&c)).unwrap(), c);
    }

    #[test]
    fn fingerprint_ignores_seed_only() {
        let a = parse_config_str(EXPERIMENT_TOML).unwrap();
        let mut b = a.clone();
        b.seed += 1;
        b.output_dir = Some("elsewhere".into());
        assert_eq!(physical_fingerprint_text(&a), physical_fingerprint_text(&b));
        let mut c = a.clone();
        c.pipeline[0] = OpticalElement::Gdd(21e-24);
        assert_ne!(physical_fingerprint_text(&a), physical_fingerprint_text(&c));
    }

    proptest! {
        #[test]
        fn arbitrary_pipelines_round_trip(
            gdd in -1e-22f64..1e-22,
            amp in 0.0f64..100.0,
            freq in 1e8f64..1e11,
            delay in -1e-10f64..1e-10,
            fwhm in 1e10f64..1e13,
            att in 0.01f64..1.0,
            seed in 0u64..(i64::MAX as u64),
        ) {
            let mut c = parse_config_str(MINIMAL).unwrap();
            c.seed = seed;
            c.pipeline = vec![
                OpticalElement::Gdd(gdd),
                OpticalElement::SinusoidalTimePhase { amplitude: amp, frequency: freq, offset: delay },
                OpticalElement::Delay(delay),
                OpticalElement::GaussianFilter(GaussianFilter::new(0.0, fwhm, att).unwrap()),
                OpticalElement::Attenuator(att),
            ];
            prop_assert_eq!(parse_config_str(&serialize(&c)).unwrap(), c);
        }
    }
}
