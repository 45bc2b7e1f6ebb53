//! Two-photon (Hong-Ou-Mandel) interference of independent pure photons.
//!
//! For unit-norm spectral amplitudes `a` and `b` the coincidence probability
//! at relative delay τ is
//!
//! ```text
//! p(τ) = 1/2 − 1/2·|∫ a(Ω) b*(Ω) e^(iΩτ) dΩ|²
//! ```

mod counts;
mod fit;

use num_complex::Complex64;

pub use counts::{bootstrap_visibility_uncertainty, normalize_counts, synthesize_counts, CountModel, Counts};
pub use fit::{fit_gaussian_dip, DipFit};

use crate::error::{Error, Result};
use crate::sigspace::SpectralAmplitude;

/// Tolerance on the unit-norm precondition of interfering amplitudes.
pub const NORM_TOLERANCE: f64 = 1e-9;

const GOLDEN: f64 = 0.618_033_988_749_894_8;

/// Delays, coincidence probabilities and (optionally) synthetic counts of one
/// dip measurement.
#[derive(Clone, Debug, PartialEq)]
pub struct HomScan {
    pub delays: Vec<f64>,
    pub probabilities: Vec<f64>,
    /// Points with `false` are excluded from fits.
    pub valid: Vec<bool>,
    pub counts: Option<Counts>,
}

impl HomScan {
    pub fn new(delays: Vec<f64>, probabilities: Vec<f64>) -> Result<Self> {
        if delays.len() != probabilities.len() {
            return Err(Error::Config(format!(
                "{} delays but {} probabilities",
                delays.len(),
                probabilities.len()
            )));
        }
        if delays.is_empty() {
            return Err(Error::Config("delay scan is empty".into()));
        }
        if delays.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("delays must be strictly increasing".into()));
        }
        let valid = vec![true; delays.len()];
        Ok(Self { delays, probabilities, valid, counts: None })
    }

    pub fn len(&self) -> usize {
        self.delays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delays.is_empty()
    }

    /// (delay, probability) pairs of valid points.
    pub fn valid_points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.delays
            .iter()
            .zip(&self.probabilities)
            .zip(&self.valid)
            .filter(|(_, &ok)| ok)
            .map(|((&t, &p), _)| (t, p))
    }

    /// Smallest valid probability and its delay.
    pub fn minimum(&self) -> Option<(f64, f64)> {
        self.valid_points().min_by(|a, b| a.1.total_cmp(&b.1))
    }
}

/// Precomputed overlap integrand `a·b*·ΔΩ` restricted to where it is non-negligible.
#[derive(Clone, Debug)]
pub struct Overlap {
    terms: Vec<(f64, Complex64)>,
}

impl Overlap {
    pub fn new(a: &SpectralAmplitude, b: &SpectralAmplitude) -> Result<Self> {
        if a.grid() != b.grid() {
            return Err(Error::GridMismatch(format!("{:?} vs {:?}", a.grid(), b.grid())));
        }
        let a = a.clone().to_frequency();
        let b = b.clone().to_frequency();
        for x in [&a, &b] {
            let norm_squared = x.norm_squared();
            if (norm_squared - 1.0).abs() > NORM_TOLERANCE {
                return Err(Error::NotNormalized { norm_squared });
            }
        }
        let grid = a.grid();
        let dw = grid.angular_frequency_step();
        let products: Vec<Complex64> = a.values().iter().zip(b.values()).map(|(x, y)| x * y.conj()).collect();
        let peak = products.iter().map(|p| p.norm()).fold(0.0, f64::max);
        let floor = peak * 1e-17;
        let terms = products
            .into_iter()
            .enumerate()
            .filter(|(_, p)| p.norm() > floor)
            .map(|(k, p)| (grid.omega(k), p * dw))
            .collect();
        Ok(Self { terms })
    }

    /// `∫ a b* e^(iΩτ) dΩ`.
    pub fn overlap(&self, tau: f64) -> Complex64 {
        if tau == 0.0 {
            return self.terms.iter().map(|(_, p)| p).sum();
        }
        self.terms.iter().map(|&(w, p)| p * Complex64::from_polar(1.0, w * tau)).sum()
    }

    pub fn probability(&self, tau: f64) -> f64 {
        0.5 - 0.5 * self.overlap(tau).norm_sqr()
    }

    /// Minimum of p(τ) over `[lo, hi]`: a uniform scan with spacing `step`
    /// followed by golden-section refinement around the best sample.
    /// Returns `(τ_min, p_min)`.
    pub fn minimum(&self, lo: f64, hi: f64, step: f64) -> Result<(f64, f64)> {
        if !(step > 0.0 && hi > lo) {
            return Err(Error::Config(format!("invalid minimum search window [{lo:e}, {hi:e}] step {step:e}")));
        }
        let n = ((hi - lo) / step).floor() as usize;
        let mut best = (lo, self.probability(lo));
        for i in 1..=n {
            let t = lo + i as f64 * step;
            let p = self.probability(t);
            if p < best.1 {
                best = (t, p);
            }
        }
        let (mut x0, mut x3) = ((best.0 - step).max(lo), (best.0 + step).min(hi));
        let mut x1 = x3 - GOLDEN * (x3 - x0);
        let mut x2 = x0 + GOLDEN * (x3 - x0);
        let (mut f1, mut f2) = (self.probability(x1), self.probability(x2));
        for _ in 0..60 {
            if (x3 - x0) < 1e-6 * step {
                break;
            }
            if f1 < f2 {
                x3 = x2;
                x2 = x1;
                f2 = f1;
                x1 = x3 - GOLDEN * (x3 - x0);
                f1 = self.probability(x1);
            } else {
                x0 = x1;
                x1 = x2;
                f1 = f2;
                x2 = x0 + GOLDEN * (x3 - x0);
                f2 = self.probability(x2);
            }
        }
        for cand in [(x1, f1), (x2, f2)] {
            if cand.1 < best.1 {
                best = cand;
            }
        }
        Ok(best)
    }
}

/// Coincidence probability of two unit-norm photons at delay `tau`.
pub fn coincidence_probability(a: &SpectralAmplitude, b: &SpectralAmplitude, tau: f64) -> Result<f64> {
    Ok(Overlap::new(a, b)?.probability(tau))
}

/// Evenly spaced delays from `tau_min` to `tau_max` inclusive (up to rounding).
pub fn delay_axis(tau_min: f64, tau_max: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::Config(format!("scan step must be positive, got {step}")));
    }
    if !(tau_max >= tau_min) {
        return Err(Error::Config(format!("scan range [{tau_min:e}, {tau_max:e}] is empty")));
    }
    let n = ((tau_max - tau_min) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| tau_min + i as f64 * step).collect())
}

pub fn dip_scan(a: &SpectralAmplitude, b: &SpectralAmplitude, tau_min: f64, tau_max: f64, step: f64) -> Result<HomScan> {
    let overlap = Overlap::new(a, b)?;
    let delays = delay_axis(tau_min, tau_max, step)?;
    let probabilities = delays.iter().map(|&t| overlap.probability(t)).collect();
    HomScan::new(delays, probabilities)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VisibilityConvention {
    /// `(p_max − p_min)/p_max`, the dip depth relative to the baseline.
    Depth,
    /// `(p_max − p_min)/(p_max + p_min)`.
    Michelson,
}

impl VisibilityConvention {
    pub fn name(self) -> &'static str {
        match self {
            Self::Depth => "depth",
            Self::Michelson => "michelson",
        }
    }
}

impl std::str::FromStr for VisibilityConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "depth" => Ok(Self::Depth),
            "michelson" => Ok(Self::Michelson),
            other => Err(Error::Config(format!("unknown visibility convention `{other}` (expected depth or michelson)"))),
        }
    }
}

pub fn visibility_from_extrema(p_min: f64, p_max: f64, convention: VisibilityConvention) -> Result<f64> {
    if !(p_max > 0.0) {
        return Err(Error::Degenerate(format!("p_max must be positive, got {p_max}")));
    }
    if !(p_min >= 0.0 && p_min <= p_max) {
        return Err(Error::Config(format!("need 0 <= p_min <= p_max, got {p_min} and {p_max}")));
    }
    Ok(match convention {
        VisibilityConvention::Depth => (p_max - p_min) / p_max,
        VisibilityConvention::Michelson => (p_max - p_min) / (p_max + p_min),
    })
}

/// Both conventions evaluated against the distinguishable baseline 1/2.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Visibility {
    pub depth: f64,
    pub michelson: f64,
}

impl Visibility {
    pub fn from_min_probability(p_min: f64) -> Result<Self> {
        let p_min = p_min.max(0.0);
        Ok(Self {
            depth: visibility_from_extrema(p_min, 0.5, VisibilityConvention::Depth)?,
            michelson: visibility_from_extrema(p_min, 0.5, VisibilityConvention::Michelson)?,
        })
    }

    pub fn get(&self, convention: VisibilityConvention) -> f64 {
        match convention {
            VisibilityConvention::Depth => self.depth,
            VisibilityConvention::Michelson => self.michelson,
        }
    }
}

/// Maximum Michelson visibility after ideal conversion with compression factor F:
/// `V = F/(√(4F² + 1) − F)`.
pub fn analytic_visibility_limit(compression: f64) -> f64 {
    compression / ((4.0 * compression * compression + 1.0).sqrt() - compression)
}

/// Minimum coincidence probability after ideal conversion, `½(1 − 1/√(1 + (1/2F)²))`.
pub fn ideal_min_probability(compression: f64) -> f64 {
    let r = 0.5 / compression;
    0.5 * (1.0 - 1.0 / (1.0 + r * r).sqrt())
}

/// Depth visibility of two transform-limited Gaussians, `2σ_aσ_b/(σ_a² + σ_b²)`.
pub fn mismatch_visibility(sigma_a: f64, sigma_b: f64) -> f64 {
    2.0 * sigma_a * sigma_b / (sigma_a * sigma_a + sigma_b * sigma_b)
}

/// Ratio of teleportation success rates `(V_conv·T_conv)/(V_ref·T_ref)`.
pub fn teleportation_gain(v_conv: f64, t_conv: f64, v_ref: f64, t_ref: f64) -> Result<f64> {
    for (name, x) in [("V_conv", v_conv), ("T_conv", t_conv), ("V_ref", v_ref), ("T_ref", t_ref)] {
        if !(x > 0.0 && x <= 1.0) {
            if x == 0.0 && name.ends_with("ref") {
                return Err(Error::Degenerate(format!("{name} is zero")));
            }
            return Err(Error::Config(format!("{name} must lie in (0, 1], got {x}")));
        }
    }
    Ok((v_conv * t_conv) / (v_ref * t_ref))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elements::{apply_delay, apply_gdd, apply_quadratic_time_phase, collimation_design, ideal_converted_amplitude};
    use crate::sigspace::{gaussian_spectral_amplitude, Grid};
    use approx::assert_relative_eq;

    fn grid() -> Grid {
        Grid::new(1 << 14, 1e-9, 1551.5e-9).unwrap()
    }

    #[test]
    fn identical_photons_bunch_completely() {
        let g = grid();
        let a = gaussian_spectral_amplitude(&g, 1e11, 0.0).unwrap();
        assert!(coincidence_probability(&a, &a, 0.0).unwrap().abs() < 1e-14);
        let far = coincidence_probability(&a, &a, 400e-12).unwrap();
        assert!((far - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_unnormalized_and_mismatched() {
        let g = grid();
        let a = gaussian_spectral_amplitude(&g, 1e11, 0.0).unwrap();
        let lossy = a.clone().scaled(0.9);
        let err = coincidence_probability(&a, &lossy, 0.0).unwrap_err();
        assert!(matches!(err, Error::NotNormalized { .. }));
        assert!(err.to_string().contains("renormalize"));
        let other = Grid::new(1 << 14, 2e-9, 1551.5e-9).unwrap();
        let b = gaussian_spectral_amplitude(&other, 1e11, 0.0).unwrap();
        assert!(matches!(coincidence_probability(&a, &b, 0.0), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn mismatched_widths_match_closed_form() {
        let g = grid();
        let a = gaussian_spectral_amplitude(&g, 9.4e11, 0.0).unwrap();
        let b = gaussian_spectral_amplitude(&g, 9.4e10, 0.0).unwrap();
        let p = coincidence_probability(&a, &b, 0.0).unwrap();
        let v = visibility_from_extrema(p, 0.5, VisibilityConvention::Depth).unwrap();
        assert!((v - mismatch_visibility(9.4e11, 9.4e10)).abs() < 1e-6);
        assert_relative_eq!(mismatch_visibility(10.0, 1.0), 20.0 / 101.0);
        assert_eq!(mismatch_visibility(3.0, 3.0), 1.0);
    }

    #[test]
    fn ideal_conversion_minimum_matches_closed_form() {
        let (sa, sb) = (9.4e11, 9.4e10);
        let g = grid();
        let a = ideal_converted_amplitude(sa, sb, &g).unwrap();
        let b = gaussian_spectral_amplitude(&g, sb, 0.0).unwrap();
        let p = coincidence_probability(&a, &b, 0.0).unwrap();
        assert!((p - ideal_min_probability(10.0)).abs() < 1e-12);
        assert!((ideal_min_probability(10.0) - 6.23e-4).abs() < 5e-6);
    }

    #[test]
    fn numeric_ideal_lens_pipeline_reaches_limit() {
        let (sa, sb) = (9.4e11, 9.4e10 * 5.0);
        let d = collimation_design(sa, sb, 10e9).unwrap();
        let g = grid();
        let a = gaussian_spectral_amplitude(&g, sa, 0.0).unwrap();
        let a = apply_quadratic_time_phase(apply_gdd(a, d.gdd).unwrap(), d.chirp_rate).unwrap().to_frequency();
        let b = gaussian_spectral_amplitude(&g, sb, 0.0).unwrap();
        let (_, p) = Overlap::new(&a, &b).unwrap().minimum(-5e-12, 5e-12, 0.25e-12).unwrap();
        let v = visibility_from_extrema(p, 0.5, VisibilityConvention::Michelson).unwrap();
        assert!((v - analytic_visibility_limit(2.0)).abs() < 1e-6);
    }

    #[test]
    fn minimum_search_finds_shifted_dip() {
        let g = grid();
        let a = gaussian_spectral_amplitude(&g, 1e11, 0.0).unwrap();
        let b = apply_delay(a.clone(), 3.3e-12);
        let (t, p) = Overlap::new(&a, &b).unwrap().minimum(-20e-12, 20e-12, 1e-12).unwrap();
        assert!((t.abs() - 3.3e-12).abs() < 1e-15);
        assert!(p < 1e-12);
    }

    #[test]
    fn dip_scan_is_symmetric() {
        let g = grid();
        let a = gaussian_spectral_amplitude(&g, 1e11, 0.0).unwrap();
        let b = gaussian_spectral_amplitude(&g, 2e11, 0.0).unwrap();
        let scan = dip_scan(&a, &b, -40e-12, 40e-12, 0.5e-12).unwrap();
        assert_eq!(scan.len(), 161);
        let n = scan.len();
        for i in 0..n / 2 {
            assert!((scan.probabilities[i] - scan.probabilities[n - 1 - i]).abs() < 1e-12);
        }
        assert!(dip_scan(&a, &b, 0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn visibility_conventions() {
        use VisibilityConvention::*;
        assert_eq!(visibility_from_extrema(0.0, 0.5, Depth).unwrap(), 1.0);
        assert_eq!(visibility_from_extrema(0.0, 0.5, Michelson).unwrap(), 1.0);
        assert!(visibility_from_extrema(0.0, 0.0, Depth).is_err());
        let p2 = ideal_min_probability(2.0);
        let v2 = visibility_from_extrema(p2, 0.5, Michelson).unwrap();
        assert_relative_eq!(v2, analytic_visibility_limit(2.0), max_relative = 1e-12);
        assert!((v2 - 0.942).abs() < 5e-4);
        assert!((analytic_visibility_limit(10.0) - 0.9975).abs() < 5e-5);
        assert_relative_eq!(analytic_visibility_limit(1.0), 1.0 / (5f64.sqrt() - 1.0), max_relative = 1e-15);
        assert!((analytic_visibility_limit(1.0) - 0.809).abs() < 5e-4);
        assert_eq!("michelson".parse::<VisibilityConvention>().unwrap(), Michelson);
        assert!("contrast".parse::<VisibilityConvention>().is_err());
    }

    #[test]
    fn teleportation_examples() {
        let g = teleportation_gain(0.632, 0.206, 1.0, 0.029).unwrap();
        assert!((g - 4.49).abs() < 5e-3);
        assert_eq!(teleportation_gain(0.5, 0.5, 0.5, 0.5).unwrap(), 1.0);
        assert!(teleportation_gain(0.5, 0.5, 0.5, 0.0).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn probability_bounded_and_even(
                sa in 5e10f64..8e11, sb in 5e10f64..8e11, phi in -1e-23f64..1e-23, tau in 0.0f64..1e-10,
            ) {
                let g = Grid::new(1 << 13, 1e-9, 1.55e-6).unwrap();
                let a = apply_gdd(gaussian_spectral_amplitude(&g, sa, 0.0).unwrap(), phi).unwrap();
                let b = gaussian_spectral_amplitude(&g, sb, 0.0).unwrap();
                let o = Overlap::new(&a, &b).unwrap();
                let (p1, p2) = (o.probability(tau), o.probability(-tau));
                prop_assert!(p1 >= -1e-12 && p1 <= 0.5 + 1e-9);
                prop_assert!((p1 - p2).abs() < 1e-12);
            }

            #[test]
            fn depth_dominates_michelson(p in 0.0f64..0.5) {
                let d = visibility_from_extrema(p, 0.5, VisibilityConvention::Depth).unwrap();
                let m = visibility_from_extrema(p, 0.5, VisibilityConvention::Michelson).unwrap();
                prop_assert!(d >= m);
            }

            #[test]
            fn teleportation_gain_cancels(v in 0.01f64..1.0, t in 0.01f64..1.0) {
                prop_assert!((teleportation_gain(v, t, v, t).unwrap() - 1.0).abs() < 1e-15);
            }
        }

        #[test]
        fn limit_increases_to_one() {
            let values: Vec<f64> = (0..=60).map(|i| analytic_visibility_limit(10f64.powf(i as f64 / 20.0))).collect();
            assert!(values.windows(2).all(|w| w[1] > w[0]));
            assert!(values.iter().all(|&v| v < 1.0));
            assert!(1.0 - values[60] < 1e-6);
        }

        #[test]
        fn mismatch_decreases_with_ratio() {
            let values: Vec<f64> = (0..40).map(|i| mismatch_visibility(1.0 + i as f64, 1.0)).collect();
            assert!(values.windows(2).all(|w| w[1] < w[0]));
            assert!(mismatch_visibility(1e6, 1.0) < 1e-5);
        }
    }
}
