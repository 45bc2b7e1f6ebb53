use std::f64::consts::PI;
use std::fmt::Write;

use rayon::prelude::*;

use super::search::optimize_with;
use super::{Evaluator, LensShape, OptimizationResult, ParamStatus, Scenario};
use crate::error::Result;
use crate::hom::VisibilityConvention;
use crate::sigspace::sigma_from_wavelength_fwhm;

const CENTER_WAVELENGTH: f64 = 1551.5e-9;
const PS2: f64 = 1e-24;
const GHZ: f64 = 1e9;

impl Scenario {
    /// Converter scenario for the 2 nm → 0.2 nm photons at 1551.5 nm with all
    /// parameters fixed at the given values.
    pub fn fixed(name: &str, gdd: f64, frequency: f64, amplitude: f64, offset: f64) -> Self {
        Self {
            name: name.to_string(),
            center_wavelength: CENTER_WAVELENGTH,
            input_sigma: sigma_from_wavelength_fwhm(2e-9, CENTER_WAVELENGTH),
            target_sigma: sigma_from_wavelength_fwhm(0.2e-9, CENTER_WAVELENGTH),
            gdd: ParamStatus::Fixed(gdd),
            frequency: ParamStatus::Fixed(frequency),
            amplitude: ParamStatus::Fixed(amplitude),
            offset: ParamStatus::Fixed(offset),
            lens: LensShape::Sinusoidal,
            convention: VisibilityConvention::Michelson,
            grid_samples: None,
        }
    }

    /// The three sinusoidal-lens cases:
    /// 1. Φ, f_m and A free;
    /// 2. A held at 4π, Φ and f_m free;
    /// 3. Φ = 22 ps² and f_m = 10 GHz fixed, A free.
    ///
    /// # Panics
    /// For rows other than 1, 2 or 3.
    pub fn table_s1_row(row: usize) -> Self {
        let gdd_range = ParamStatus::Free { lower: 5.0 * PS2, upper: 30.0 * PS2 };
        let freq_range = ParamStatus::Free { lower: 1.0 * GHZ, upper: 20.0 * GHZ };
        let mut s = Self::fixed(&format!("row{row}"), 22.0 * PS2, 10.0 * GHZ, 4.27 * PI, 0.0);
        match row {
            1 => {
                s.gdd = gdd_range;
                s.frequency = freq_range;
                s.amplitude = ParamStatus::Free { lower: 0.0, upper: 64.0 * PI };
            }
            2 => {
                s.gdd = gdd_range;
                s.frequency = freq_range;
                s.amplitude = ParamStatus::Fixed(4.0 * PI);
            }
            3 => {
                s.amplitude = ParamStatus::Free { lower: 0.0, upper: 8.0 * PI };
            }
            other => panic!("no such table row {other}"),
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TableSettings {
    pub grid_samples: Option<usize>,
    pub budget: usize,
    pub convention: VisibilityConvention,
}

impl Default for TableSettings {
    fn default() -> Self {
        Self { grid_samples: None, budget: 20_000, convention: VisibilityConvention::Michelson }
    }
}

/// Optimizes the three table rows. Rows run concurrently; each row is
/// itself deterministic.
pub fn table_s1(settings: &TableSettings) -> Result<Vec<OptimizationResult>> {
    let evaluators: Vec<Evaluator> = (1..=3)
        .map(|row| {
            let mut s = Scenario::table_s1_row(row);
            s.grid_samples = settings.grid_samples;
            s.convention = settings.convention;
            Evaluator::new(&s)
        })
        .collect::<Result<_>>()?;
    evaluators.par_iter().map(|e| optimize_with(e, settings.budget)).collect()
}

/// Plain-text table with columns f_m (GHz), A (π rad), GDD (ps²) and both visibilities.
pub fn format_table(rows: &[OptimizationResult]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<10} {:>10} {:>10} {:>10} {:>14} {:>14} {:>8}",
        "scenario", "f_m [GHz]", "A [pi]", "GDD [ps2]", "V michelson", "V depth", "evals"
    );
    for r in rows {
        let p = r.best.params;
        let _ = writeln!(
            out,
            "{:<10} {:>10.3} {:>10.3} {:>10.3} {:>13.2}% {:>13.2}% {:>8}",
            r.scenario,
            p.frequency / GHZ,
            p.amplitude / PI,
            p.gdd / PS2,
            100.0 * r.best.visibility.michelson,
            100.0 * r.best.visibility.depth,
            r.evaluations
        );
    }
    out
}
