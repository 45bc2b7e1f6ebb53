//! Command execution: turns a validated config into tables, charts and a manifest.

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use timelens_core::biphoton::{
    apply_idler_filter, calibrate_pm_bandwidth, heralded_signal, make_jsa, pump_angular_fwhm, JsaAxis,
};
use timelens_core::elements::{collimation_design, run_pipeline, GaussianFilter, OpticalElement};
use timelens_core::hom::{
    bootstrap_visibility_uncertainty, dip_scan, fit_gaussian_dip, ideal_min_probability, normalize_counts,
    synthesize_counts, CountModel, HomScan, Overlap, Visibility,
};
use timelens_core::optimizer::{optimize, OptimizationResult, ParamStatus, Scenario};
use timelens_core::sigspace::{
    gaussian_spectral_amplitude, intensity_fwhm, sigma_from_wavelength_fwhm, Grid, SpectralAmplitude,
};
use timelens_core::spectrometer::{nominal_resolution, simulate_dft_spectrum, DftConfig};

use crate::config::{physical_fingerprint_text, serialize, RunConfig, SourceKind};
use crate::output::{line_chart, num, sha256_hex, Cell, Csv, Series, Staging};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Optimize,
    Analytic,
    Spectrum,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::Simulate => "simulate",
            Self::Optimize => "optimize",
            Self::Analytic => "analytic",
            Self::Spectrum => "spectrum",
        }
    }
}

#[derive(Debug)]
pub enum RunError {
    /// Invalid or incomplete configuration; exit code 2.
    Config(String),
    /// Simulation or I/O failure; exit code 1.
    Compute(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Compute(_) => 1,
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(m) => write!(f, "configuration error: {m}"),
            Self::Compute(m) => write!(f, "computation failed: {m}"),
        }
    }
}

impl From<timelens_core::Error> for RunError {
    fn from(e: timelens_core::Error) -> Self {
        Self::Compute(e.to_string())
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        Self::Compute(format!("cannot write outputs: {e}"))
    }
}

type RResult<T> = Result<T, RunError>;

fn config_error<T>(msg: impl Into<String>) -> RResult<T> {
    Err(RunError::Config(msg.into()))
}

/// Human-readable lines printed after a successful run.
pub struct Report {
    pub lines: Vec<String>,
    pub files: Vec<PathBuf>,
}

const PS: f64 = 1e-12;
const PS2: f64 = 1e-24;
const NM: f64 = 1e-9;
const GHZ: f64 = 1e9;

/// Runs `command`, writing every artifact under `out` or nothing at all.
pub fn run(command: Command, config: &RunConfig, out: &Path) -> RResult<Report> {
    let mut stage = Staging::new(out)?;
    match execute(command, config, &mut stage) {
        Ok(lines) => {
            write_manifest(command, config, &mut stage)?;
            let files = stage.commit()?;
            Ok(Report { lines, files })
        }
        Err(e) => {
            stage.abandon();
            Err(e)
        }
    }
}

fn execute(command: Command, config: &RunConfig, stage: &mut Staging) -> RResult<Vec<String>> {
    match command {
        Command::Simulate => simulate(config, stage),
        Command::Optimize => optimize_command(config, stage),
        Command::Analytic => analytic(config, stage),
        Command::Spectrum => spectrum(config, stage),
    }
}

fn write_manifest(command: Command, config: &RunConfig, stage: &mut Staging) -> RResult<()> {
    let canonical = serialize(config);
    stage.write("config.toml", &canonical)?;
    let files: Vec<String> = stage.files().iter().map(|p| format!("\"{}\"", p.display())).collect();
    let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let text = format!(
        "command = \"{}\"\nconfig_sha256 = \"{}\"\nseed = {}\nconvention = \"{}\"\ntimelens_sim_version = \"{}\"\ntimelens_core_version = \"{}\"\nfiles = [{}]\ntimestamp_unix = {timestamp}\n",
        command.name(),
        sha256_hex(&physical_fingerprint_text(config)),
        config.seed,
        config.convention.name(),
        env!("CARGO_PKG_VERSION"),
        timelens_core::VERSION,
        files.join(", "),
    );
    stage.write("manifest.toml", &text)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Photons.

struct Photons {
    grid: Grid,
    input: SpectralAmplitude,
    reference: SpectralAmplitude,
    purity: Option<f64>,
    herald_efficiency: Option<f64>,
}

fn max_gdd(pipeline: &[OpticalElement]) -> f64 {
    pipeline
        .iter()
        .map(|e| match e {
            OpticalElement::Gdd(g) => g.abs(),
            _ => 0.0,
        })
        .sum()
}

fn photons(config: &RunConfig) -> RResult<Photons> {
    let s = &config.source;
    let l0 = s.center_wavelength;
    let base = Grid::for_conversion(l0, s.angular(s.input_fwhm()), s.angular(s.reference_fwhm), max_gdd(&config.pipeline))?;
    let grid = match config.grid_samples {
        Some(n) => Grid::new(n, base.time_span(), l0)?,
        None => base,
    };
    let reference = gaussian_spectral_amplitude(&grid, sigma_from_wavelength_fwhm(s.reference_fwhm, l0), 0.0)?;
    let (input, purity, herald_efficiency) = match s.kind {
        SourceKind::Gaussian { input_fwhm } => {
            (gaussian_spectral_amplitude(&grid, sigma_from_wavelength_fwhm(input_fwhm, l0), 0.0)?, None, None)
        }
        SourceKind::Heralded { pump_fwhm, phase_matching, marginal_fwhm, idler_filter_fwhm, jsa_samples } => {
            let pump = pump_angular_fwhm(pump_fwhm, l0);
            let bw = calibrate_pm_bandwidth(pump, phase_matching, s.angular(marginal_fwhm), jsa_samples)?;
            let axis = JsaAxis::covering(pump, bw, jsa_samples)?;
            let mut jsa = make_jsa(pump, phase_matching, bw, axis)?;
            let mut efficiency = None;
            if let Some(w) = idler_filter_fwhm {
                let (filtered, eta) = apply_idler_filter(&jsa, &GaussianFilter::new(0.0, s.angular(w), 1.0)?)?;
                jsa = filtered;
                efficiency = Some(eta);
            }
            let h = heralded_signal(&jsa, &grid)?;
            (h.amplitude, Some(h.purity), efficiency)
        }
    };
    Ok(Photons { grid, input, reference, purity, herald_efficiency })
}

fn require_pipeline(config: &RunConfig) -> RResult<()> {
    if config.pipeline.is_empty() {
        return config_error("pipeline must contain at least one element");
    }
    Ok(())
}

/// Intensity rows of `a` within `half_window` of the centre wavelength,
/// normalized to unit peak and sorted by wavelength.
fn spectrum_rows(a: &SpectralAmplitude, which: &str, half_window: f64, csv: &mut Csv, series: &mut Vec<Series>) {
    let a = a.clone().to_frequency();
    let grid = a.grid();
    let l0 = grid.center_wavelength();
    let intensity = a.intensity();
    let peak = intensity.iter().cloned().fold(0.0, f64::max);
    let mut rows: Vec<(f64, f64)> = (0..grid.n_samples())
        .map(|k| (grid.wavelength_at(grid.omega(k)), intensity[k]))
        .filter(|(l, _)| (l - l0).abs() <= half_window)
        .map(|(l, i)| (l, if peak > 0.0 { i / peak } else { 0.0 }))
        .collect();
    rows.sort_by(|x, y| x.0.total_cmp(&y.0));
    push_series(which, rows, csv, series);
}

fn push_series(which: &str, rows: Vec<(f64, f64)>, csv: &mut Csv, series: &mut Vec<Series>) {
    for &(l, i) in &rows {
        csv.push(vec![Cell::Num(l / NM), Cell::Num(i), Cell::Text(which.into())]);
    }
    series.push(Series { name: which.into(), points: rows.into_iter().map(|(l, i)| (l / NM, i)).collect() });
}

const SPECTRA_HEADER: [&str; 3] = ["wavelength_nm", "intensity_norm", "which"];

fn spectra_window(config: &RunConfig) -> f64 {
    2.0 * config.source.input_fwhm().max(config.source.reference_fwhm)
}

// ---------------------------------------------------------------------------
// simulate

fn summary_csv(rows: &[(&str, f64)]) -> String {
    let mut csv = Csv::new(&["quantity", "value"]);
    for (k, v) in rows {
        csv.push(vec![Cell::Text((*k).into()), Cell::Num(*v)]);
    }
    csv.render()
}

fn simulate(config: &RunConfig, stage: &mut Staging) -> RResult<Vec<String>> {
    require_pipeline(config)?;
    let Some(scan_cfg) = config.scan else {
        return config_error("`scan` section is required by simulate");
    };
    let p = photons(config)?;
    let (converted, transmission) = run_pipeline(p.input.clone(), &config.pipeline)?;
    let scan = dip_scan(&converted, &p.reference, scan_cfg.start, scan_cfg.stop, scan_cfg.step)?;
    let fit = fit_gaussian_dip(&scan)?;
    let (tau_min, p_min) = Overlap::new(&converted, &p.reference)?.minimum(scan_cfg.start, scan_cfg.stop, scan_cfg.step)?;
    let vis = Visibility::from_min_probability(p_min)?;
    let l0 = config.source.center_wavelength;
    let to_nm = |w: f64| w * l0 * l0 / (2.0 * PI * timelens_core::sigspace::SPEED_OF_LIGHT) / NM;

    let mut summary: Vec<(&str, f64)> = vec![
        ("visibility_michelson", vis.michelson),
        ("visibility_depth", vis.depth),
        ("p_min", p_min),
        ("tau_min_ps", tau_min / PS),
        ("fit_visibility_depth", fit.visibility_depth),
        ("fit_fwhm_ps", fit.fwhm() / PS),
        ("fit_center_ps", fit.center / PS),
        ("fit_no_significant_dip", if fit.no_significant_dip { 1.0 } else { 0.0 }),
        ("transmission", transmission),
        ("converted_fwhm_nm", to_nm(intensity_fwhm(&converted)?.width)),
        ("grid_samples", p.grid.n_samples() as f64),
    ];
    if let Some(purity) = p.purity {
        summary.push(("heralded_purity", purity));
    }
    if let Some(eta) = p.herald_efficiency {
        summary.push(("herald_filter_efficiency", eta));
    }

    let counted: Option<(HomScan, HomScan)> = match config.counts {
        Some(c) => {
            let model = CountModel { rate_scale: c.rate_scale, singles_scale: c.singles_scale, drift: c.drift };
            let raw = synthesize_counts(&scan, &model, config.seed)?;
            let normalized = normalize_counts(&raw)?;
            let counts_fit = fit_gaussian_dip(&normalized)?;
            let sigma = bootstrap_visibility_uncertainty(&raw, c.bootstrap_resamples, bootstrap_seed(config.seed))?;
            summary.push(("counts_fit_visibility_depth", counts_fit.visibility_depth));
            summary.push(("counts_fit_fwhm_ps", counts_fit.fwhm() / PS));
            summary.push(("bootstrap_sigma_visibility_depth", sigma));
            Some((raw, normalized))
        }
        None => None,
    };

    let mut dip = match &counted {
        Some(_) => Csv::new(&["delay_ps", "p", "p_fit", "coincidences", "singles_a", "singles_b"]),
        None => Csv::new(&["delay_ps", "p", "p_fit"]),
    };
    for (i, (&t, &pr)) in scan.delays.iter().zip(&scan.probabilities).enumerate() {
        let mut row = vec![Cell::Num(t / PS), Cell::Num(pr), Cell::Num(fit.model(t))];
        if let Some((raw, _)) = &counted {
            let c = raw.counts.as_ref().expect("synthesized scans carry counts");
            row.extend([Cell::Int(c.coincidences[i]), Cell::Int(c.singles_a[i]), Cell::Int(c.singles_b[i])]);
        }
        dip.push(row);
    }
    stage.write("dip.csv", &dip.render())?;

    let mut dip_series = vec![
        Series { name: "p".into(), points: scan.delays.iter().zip(&scan.probabilities).map(|(t, p)| (t / PS, *p)).collect() },
        Series { name: "p_fit".into(), points: scan.delays.iter().map(|&t| (t / PS, fit.model(t))).collect() },
    ];
    if let Some((_, n)) = &counted {
        dip_series.push(Series { name: "counts".into(), points: n.valid_points().map(|(t, p)| (t / PS, p)).collect() });
    }
    stage.write("dip.svg", &line_chart("Two-photon interference", "delay (ps)", "coincidence probability", &dip_series))?;

    let mut spectra = Csv::new(&SPECTRA_HEADER);
    let mut spectra_series = Vec::new();
    let window = spectra_window(config);
    spectrum_rows(&p.input, "input", window, &mut spectra, &mut spectra_series);
    spectrum_rows(&converted, "converted", window, &mut spectra, &mut spectra_series);
    spectrum_rows(&p.reference, "reference", window, &mut spectra, &mut spectra_series);
    stage.write("spectra.csv", &spectra.render())?;
    stage.write("spectra.svg", &line_chart("Spectra", "wavelength (nm)", "normalized intensity", &spectra_series))?;
    stage.write("summary.csv", &summary_csv(&summary))?;

    let mut lines = vec![
        format!("visibility: michelson {:.2}%  depth {:.2}%  (p_min {})", 100.0 * vis.michelson, 100.0 * vis.depth, num(p_min)),
        format!("fitted dip: FWHM {:.2} ps, depth visibility {:.2}%", fit.fwhm() / PS, 100.0 * fit.visibility_depth),
    ];
    if let Some(purity) = p.purity {
        lines.push(format!("heralded purity {purity:.5}"));
    }
    Ok(lines)
}

fn bootstrap_seed(seed: u64) -> u64 {
    seed ^ 0x9e37_79b9_7f4a_7c15
}

// ---------------------------------------------------------------------------
// optimize

fn scenarios(config: &RunConfig) -> RResult<Vec<Scenario>> {
    let Some(o) = &config.optimize else {
        return config_error("`optimize` section is required by optimize");
    };
    let mut out: Vec<Scenario> = o.rows.iter().map(|&r| Scenario::table_s1_row(r)).collect();
    if !o.scenarios.is_empty() {
        let SourceKind::Gaussian { input_fwhm } = config.source.kind else {
            return config_error("custom optimizer scenarios need a gaussian source");
        };
        let l0 = config.source.center_wavelength;
        for spec in &o.scenarios {
            let mut s = Scenario::fixed(&spec.name, 0.0, 0.0, 0.0, 0.0);
            s.center_wavelength = l0;
            s.input_sigma = sigma_from_wavelength_fwhm(input_fwhm, l0);
            s.target_sigma = sigma_from_wavelength_fwhm(config.source.reference_fwhm, l0);
            s.gdd = spec.gdd;
            s.frequency = spec.frequency;
            s.amplitude = spec.amplitude;
            s.offset = spec.offset;
            s.lens = spec.lens;
            if s.free_indices().is_empty() {
                return config_error(format!("scenario `{}` has no free parameter", spec.name));
            }
            if let ParamStatus::Fixed(f) = s.frequency {
                if !(f > 0.0) {
                    return config_error(format!("scenario `{}`: frequency must be positive", spec.name));
                }
            }
            out.push(s);
        }
    }
    for s in &mut out {
        s.grid_samples = config.grid_samples;
        s.convention = config.convention;
    }
    Ok(out)
}

const OPTIMIZER_HEADER: [&str; 7] =
    ["scenario", "f_m_GHz", "A_pi", "gdd_ps2", "visibility_michelson", "visibility_depth", "evals"];

pub fn optimizer_table(results: &[OptimizationResult]) -> Csv {
    let mut csv = Csv::new(&OPTIMIZER_HEADER);
    for r in results {
        let p = r.best.params;
        csv.push(vec![
            Cell::Text(r.scenario.clone()),
            Cell::Num(p.frequency / GHZ),
            Cell::Num(p.amplitude / PI),
            Cell::Num(p.gdd / PS2),
            Cell::Num(r.best.visibility.michelson),
            Cell::Num(r.best.visibility.depth),
            Cell::Int(r.evaluations as u64),
        ]);
    }
    csv
}

fn optimize_command(config: &RunConfig, stage: &mut Staging) -> RResult<Vec<String>> {
    let list = scenarios(config)?;
    let budget = config.optimize.as_ref().map(|o| o.budget).unwrap_or(crate::config::DEFAULT_BUDGET);
    let results: Vec<OptimizationResult> =
        list.par_iter().map(|s| optimize(s, budget)).collect::<Result<_, _>>()?;

    stage.write("optimizer.csv", &optimizer_table(&results).render())?;
    let mut lines = Vec::new();
    for r in &results {
        let mut trace = Csv::new(&["eval", "gdd_ps2", "f_m_GHz", "A_pi", "offset_ps", "objective", "best_so_far"]);
        for (i, t) in r.trace.iter().enumerate() {
            trace.push(vec![
                Cell::Int(i as u64 + 1),
                Cell::Num(t.params.gdd / PS2),
                Cell::Num(t.params.frequency / GHZ),
                Cell::Num(t.params.amplitude / PI),
                Cell::Num(t.params.offset / PS),
                Cell::Num(t.objective),
                Cell::Num(t.best_so_far),
            ]);
        }
        let dir = PathBuf::from(&r.scenario);
        stage.write(dir.join("trace.csv"), &trace.render())?;
        let curve = Series {
            name: "best".into(),
            points: r.trace.iter().enumerate().map(|(i, t)| ((i + 1) as f64, t.best_so_far)).collect(),
        };
        stage.write(
            dir.join("convergence.svg"),
            &line_chart(&format!("Convergence: {}", r.scenario), "evaluation", r.convention.name(), &[curve]),
        )?;
        let p = r.best.params;
        lines.push(format!(
            "{}: f_m {:.3} GHz, A {:.3} pi, GDD {:.3} ps2 -> V michelson {:.2}%, depth {:.2}% ({} evaluations)",
            r.scenario,
            p.frequency / GHZ,
            p.amplitude / PI,
            p.gdd / PS2,
            100.0 * r.best.visibility.michelson,
            100.0 * r.best.visibility.depth,
            r.evaluations
        ));
    }
    Ok(lines)
}

// ---------------------------------------------------------------------------
// analytic

/// Design compression: explicit setting, else the source width ratio.
fn design_compression(config: &RunConfig) -> f64 {
    config
        .analytic
        .compression
        .unwrap_or(config.source.input_fwhm() / config.source.reference_fwhm)
}

fn analytic(config: &RunConfig, stage: &mut Staging) -> RResult<Vec<String>> {
    let a = &config.analytic;
    let mut curve = Csv::new(&["compression", "visibility_michelson", "visibility_depth", "p_min"]);
    let (mut vm, mut vd) = (Vec::new(), Vec::new());
    for k in 0..a.points {
        let f = 1.0 + (a.max_compression - 1.0) * k as f64 / (a.points - 1) as f64;
        let p = ideal_min_probability(f);
        let v = Visibility::from_min_probability(p)?;
        curve.push(vec![Cell::Num(f), Cell::Num(v.michelson), Cell::Num(v.depth), Cell::Num(p)]);
        vm.push((f, v.michelson));
        vd.push((f, v.depth));
    }
    stage.write("visibility_vs_compression.csv", &curve.render())?;
    stage.write(
        "visibility_vs_compression.svg",
        &line_chart(
            "Ideal-lens visibility limit",
            "compression factor F",
            "visibility",
            &[Series { name: "michelson".into(), points: vm }, Series { name: "depth".into(), points: vd }],
        ),
    )?;

    let f = design_compression(config);
    if !(f > 1.0) {
        return config_error(format!("compression factor must exceed 1, got {f}"));
    }
    let l0 = config.source.center_wavelength;
    let sa = sigma_from_wavelength_fwhm(config.source.input_fwhm(), l0);
    let design = collimation_design(sa, sa / f, a.modulation_frequency)?;
    let v = Visibility::from_min_probability(ideal_min_probability(f))?;
    let rows = [
        ("compression", f),
        ("visibility_michelson", v.michelson),
        ("visibility_depth", v.depth),
        ("input_fwhm_nm", config.source.input_fwhm() / NM),
        ("output_fwhm_nm", config.source.input_fwhm() / f / NM),
        ("gdd_ps2", design.gdd / PS2),
        ("chirp_rate_per_ps2", design.chirp_rate * PS2),
        ("modulation_frequency_GHz", design.modulation_frequency / GHZ),
        ("amplitude_pi", design.amplitude / PI),
    ];
    stage.write("design.csv", &summary_csv(&rows))?;
    Ok(vec![
        format!("F = {}: visibility limit {:.4} (michelson), {:.4} (depth)", f, v.michelson, v.depth),
        format!(
            "collimation: GDD = {:.2} ps2, A = {:.3} pi rad at {:.3} GHz",
            design.gdd / PS2,
            design.amplitude / PI,
            design.modulation_frequency / GHZ
        ),
    ])
}

// ---------------------------------------------------------------------------
// spectrum

fn spectrum(config: &RunConfig, stage: &mut Staging) -> RResult<Vec<String>> {
    require_pipeline(config)?;
    let Some(spec) = config.spectrometer else {
        return config_error("`spectrometer` section is required by spectrum");
    };
    let cfg = DftConfig { dispersion: spec.dispersion, jitter_rms: spec.jitter_rms, bin_width: spec.bin_width };
    let p = photons(config)?;
    let (converted, _) = run_pipeline(p.input.clone(), &config.pipeline)?;
    let measured = simulate_dft_spectrum(&converted, &cfg)?;
    let measured_input = simulate_dft_spectrum(&p.input, &cfg)?;

    let mut csv = Csv::new(&SPECTRA_HEADER);
    let mut series = Vec::new();
    let window = spectra_window(config);
    spectrum_rows(&p.input, "input", window, &mut csv, &mut series);
    spectrum_rows(&converted, "converted", window, &mut csv, &mut series);
    spectrum_rows(&p.reference, "reference", window, &mut csv, &mut series);
    let peak = measured.density.iter().cloned().fold(0.0, f64::max);
    let l0 = config.source.center_wavelength;
    let rows: Vec<(f64, f64)> = measured
        .wavelengths
        .iter()
        .zip(&measured.density)
        .filter(|(l, _)| (**l - l0).abs() <= window)
        .map(|(&l, &d)| (l, d / peak))
        .collect();
    push_series("dft", rows, &mut csv, &mut series);
    stage.write("spectra.csv", &csv.render())?;
    stage.write("spectra.svg", &line_chart("Measured spectra", "wavelength (nm)", "normalized intensity", &series))?;

    let true_fwhm = intensity_fwhm(&converted)?.width * l0 * l0 / (2.0 * PI * timelens_core::sigspace::SPEED_OF_LIGHT);
    let rows = [
        ("converted_fwhm_nm", true_fwhm / NM),
        ("dft_converted_fwhm_nm", measured.fwhm()? / NM),
        ("dft_input_fwhm_nm", measured_input.fwhm()? / NM),
        ("reference_fwhm_nm", config.source.reference_fwhm / NM),
        ("nominal_resolution_nm", nominal_resolution(&cfg) / NM),
        ("undersampled", if measured.undersampled { 1.0 } else { 0.0 }),
    ];
    stage.write("summary.csv", &summary_csv(&rows))?;
    Ok(vec![format!(
        "converted FWHM {:.3} nm, measured {:.3} nm (resolution {:.3} nm); input measured {:.3} nm",
        true_fwhm / NM,
        measured.fwhm()? / NM,
        nominal_resolution(&cfg) / NM,
        measured_input.fwhm()? / NM
    )])
}
