//! Unit-bearing quantities such as `"22 ps2"` or `"4.27 pi_rad"`.

use std::f64::consts::PI;
use std::fmt;

use timelens_core::sigspace::{convert_units, Conversion};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dimension {
    Time,
    /// Group delay dispersion, s².
    Gdd,
    /// Chirp rate, s⁻².
    ChirpRate,
    Frequency,
    /// Vacuum wavelength or wavelength width, m.
    Wavelength,
    AngularFrequency,
    Angle,
    /// Time-of-flight dispersion, s/m.
    Dispersion,
}

impl Dimension {
    /// Unit written when a config is serialized; parsing it is exact.
    pub fn si_unit(self) -> &'static str {
        match self {
            Self::Time => "s",
            Self::Gdd => "s2",
            Self::ChirpRate => "1/s2",
            Self::Frequency => "Hz",
            Self::Wavelength => "m",
            Self::AngularFrequency => "rad/s",
            Self::Angle => "rad",
            Self::Dispersion => "s/m",
        }
    }

    fn describe(self) -> &'static str {
        match self {
            Self::Time => "a time (s, ms, us, ns, ps, fs)",
            Self::Gdd => "a dispersion (s2, ps2, fs2)",
            Self::ChirpRate => "a chirp rate (1/s2, 1/ps2)",
            Self::Frequency => "a frequency (Hz, kHz, MHz, GHz, THz)",
            Self::Wavelength => "a wavelength (m, um, nm, pm)",
            Self::AngularFrequency => "an angular frequency (rad/s, rad/ps)",
            Self::Angle => "an angle (rad, pi_rad)",
            Self::Dispersion => "a time-of-flight dispersion (s/m, ps/nm)",
        }
    }
}

fn lookup(unit: &str) -> Option<(Dimension, fn(f64) -> f64)> {
    use Dimension::*;
    let found: (Dimension, fn(f64) -> f64) = match unit {
        "s" => (Time, |v| v),
        "ms" => (Time, |v| v * 1e-3),
        "us" => (Time, |v| v * 1e-6),
        "ns" => (Time, |v| v * 1e-9),
        "ps" => (Time, |v| v * 1e-12),
        "fs" => (Time, |v| v * 1e-15),
        "s2" => (Gdd, |v| v),
        "ps2" => (Gdd, |v| convert_units(v, Conversion::Ps2ToS2)),
        "fs2" => (Gdd, |v| v * 1e-30),
        "1/s2" => (ChirpRate, |v| v),
        "1/ps2" => (ChirpRate, |v| v * 1e24),
        "Hz" => (Frequency, |v| v),
        "kHz" => (Frequency, |v| v * 1e3),
        "MHz" => (Frequency, |v| v * 1e6),
        "GHz" => (Frequency, |v| v * 1e9),
        "THz" => (Frequency, |v| v * 1e12),
        "m" => (Wavelength, |v| v),
        "um" => (Wavelength, |v| v * 1e-6),
        "nm" => (Wavelength, |v| v * 1e-9),
        "pm" => (Wavelength, |v| v * 1e-12),
        "rad/s" => (AngularFrequency, |v| v),
        "rad/ps" => (AngularFrequency, |v| v * 1e12),
        "rad" => (Angle, |v| v),
        "pi_rad" => (Angle, |v| v * PI),
        "s/m" => (Dispersion, |v| v),
        "ps/nm" => (Dispersion, |v| convert_units(v, Conversion::PsPerNmToSPerM)),
        _ => return None,
    };
    Some(found)
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuantityError(pub String);

impl fmt::Display for QuantityError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Parses `"<number> <unit>"` into SI units of the expected dimension.
pub fn parse_quantity(text: &str, expected: Dimension) -> Result<f64, QuantityError> {
    let mut parts = text.split_whitespace();
    let (number, unit) = match (parts.next(), parts.next(), parts.next()) {
        (Some(n), Some(u), None) => (n, u),
        (Some(_), None, None) => {
            return Err(QuantityError(format!(
                "`{text}` has no unit; expected {}, e.g. \"{text} {}\"",
                expected.describe(),
                expected.si_unit()
            )))
        }
        _ => return Err(QuantityError(format!("`{text}` is not of the form \"<number> <unit>\""))),
    };
    let value: f64 = number
        .parse()
        .map_err(|_| QuantityError(format!("`{number}` is not a number")))?;
    if !value.is_finite() {
        return Err(QuantityError(format!("`{text}` is not finite")));
    }
    let (dim, to_si) = lookup(unit).ok_or_else(|| QuantityError(format!("unknown unit `{unit}`")))?;
    if dim != expected {
        return Err(QuantityError(format!("unit `{unit}` does not describe {}", expected.describe())));
    }
    Ok(to_si(value))
}

/// Inverse of [`parse_quantity`] for the SI unit; round-trips exactly.
pub fn format_quantity(value: f64, dim: Dimension) -> String {
    format!("{value:e} {}", dim.si_unit())
}
