//! Unit-suffixed quantity parsing.
//!
//! Every dimensioned scenario value is written as `"<number> <unit>"`
//! (`"0.5 m"`, `"30 GHz"`, `"65 deg"`). The suffix is mandatory: most
//! mistakes in this problem domain are unit mistakes, and a bare number
//! hides them.

use std::fmt;

/// Physical dimension a field expects.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Length,
    Frequency,
    Angle,
    Area,
    Power,
    Dimensionless,
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Dimension::Length => "length (m, cm, mm, um, nm, km)",
            Dimension::Frequency => "frequency (Hz, kHz, MHz, GHz, THz)",
            Dimension::Angle => "angle (deg, rad)",
            Dimension::Area => "area (m2, cm2, mm2)",
            Dimension::Power => "power (W, mW, uW, dBm)",
            Dimension::Dimensionless => "dimensionless",
        };
        f.write_str(s)
    }
}

/// Parse `"<number> <unit>"` into SI base units for the expected dimension.
pub fn parse_quantity(text: &str, expect: Dimension) -> Result<f64, String> {
    let trimmed = text.trim();
    let (num_str, unit) = match trimmed.find(|c: char| c.is_ascii_alphabetic()) {
        Some(idx) => {
            let (n, u) = trimmed.split_at(idx);
            (n.trim(), u.trim())
        }
        None => (trimmed, ""),
    };
    let value: f64 = num_str
        .parse()
        .map_err(|_| format!("'{trimmed}' has no leading number"))?;
    if !value.is_finite() {
        return Err(format!("'{trimmed}' is not finite"));
    }
    if unit.is_empty() {
        if expect == Dimension::Dimensionless {
            return Ok(value);
        }
        return Err(format!("'{trimmed}' is missing a unit suffix; expected {expect}"));
    }

    let scaled = match (expect, unit) {
        (Dimension::Length, "m") => Some(value),
        (Dimension::Length, "cm") => Some(value * 1e-2),
        (Dimension::Length, "mm") => Some(value * 1e-3),
        (Dimension::Length, "um") => Some(value * 1e-6),
        (Dimension::Length, "nm") => Some(value * 1e-9),
        (Dimension::Length, "km") => Some(value * 1e3),
        (Dimension::Frequency, "Hz") => Some(value),
        (Dimension::Frequency, "kHz") => Some(value * 1e3),
        (Dimension::Frequency, "MHz") => Some(value * 1e6),
        (Dimension::Frequency, "GHz") => Some(value * 1e9),
        (Dimension::Frequency, "THz") => Some(value * 1e12),
        (Dimension::Angle, "deg") => Some(value.to_radians()),
        (Dimension::Angle, "rad") => Some(value),
        (Dimension::Area, "m2") => Some(value),
        (Dimension::Area, "cm2") => Some(value * 1e-4),
        (Dimension::Area, "mm2") => Some(value * 1e-6),
        (Dimension::Power, "W") => Some(value),
        (Dimension::Power, "mW") => Some(value * 1e-3),
        (Dimension::Power, "uW") => Some(value * 1e-6),
        (Dimension::Power, "dBm") => Some(10f64.powf(value / 10.0) * 1e-3),
        _ => None,
    };
    scaled.ok_or_else(|| format!("'{trimmed}': unit '{unit}' does not match expected {expect}"))
}
