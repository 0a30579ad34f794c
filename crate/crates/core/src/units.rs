//! Physical constants and parsing of quantities with explicit unit suffixes.

use std::f64::consts::TAU;

use thiserror::Error;

/// Elementary charge (C).
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Unified atomic mass unit (kg).
pub const AMU: f64 = 1.660_539_066_60e-27;
/// Multiply a charge-to-mass ratio in C/kg by this to get e/amu.
pub const C_PER_KG_TO_E_PER_AMU: f64 = AMU / ELEMENTARY_CHARGE;

pub fn joules_to_ev(j: f64) -> f64 {
    j / ELEMENTARY_CHARGE
}

pub fn ev_to_joules(ev: f64) -> f64 {
    ev * ELEMENTARY_CHARGE
}

/// Angular frequency (rad/s) from an ordinary frequency (Hz).
pub fn hz_to_rad(f: f64) -> f64 {
    TAU * f
}

pub fn rad_to_hz(w: f64) -> f64 {
    w / TAU
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UnitError {
    #[error("cannot parse quantity `{0}`")]
    Malformed(String),
    #[error("unit `{unit}` is not a {dimension}")]
    WrongDimension { unit: String, dimension: &'static str },
}

/// Physical dimension expected by a parser call.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Length,
    Voltage,
    /// Angular frequency; `Hz` suffixes are converted with a factor of 2π.
    AngularFrequency,
    Pressure,
    Mass,
    Charge,
    Time,
    ElectricField,
    Dimensionless,
}

impl Dimension {
    fn name(self) -> &'static str {
        match self {
            Dimension::Length => "length",
            Dimension::Voltage => "voltage",
            Dimension::AngularFrequency => "frequency",
            Dimension::Pressure => "pressure",
            Dimension::Mass => "mass",
            Dimension::Charge => "charge",
            Dimension::Time => "time",
            Dimension::ElectricField => "electric field",
            Dimension::Dimensionless => "dimensionless number",
        }
    }

    fn scale(self, unit: &str) -> Option<f64> {
        let s = match (self, unit) {
            (_, "") => 1.0,
            (Dimension::Length, "m") => 1.0,
            (Dimension::Length, "cm") => 1e-2,
            (Dimension::Length, "mm") => 1e-3,
            (Dimension::Length, "um") | (Dimension::Length, "μm") => 1e-6,
            (Dimension::Length, "nm") => 1e-9,
            (Dimension::Voltage, "V") => 1.0,
            (Dimension::Voltage, "kV") => 1e3,
            (Dimension::Voltage, "mV") => 1e-3,
            (Dimension::AngularFrequency, "rad/s") => 1.0,
            (Dimension::AngularFrequency, "Hz") => TAU,
            (Dimension::AngularFrequency, "kHz") => TAU * 1e3,
            (Dimension::AngularFrequency, "MHz") => TAU * 1e6,
            (Dimension::Pressure, "Pa") => 1.0,
            (Dimension::Pressure, "kPa") => 1e3,
            (Dimension::Pressure, "hPa") | (Dimension::Pressure, "mbar") => 1e2,
            (Dimension::Pressure, "torr") => 101_325.0 / 760.0,
            (Dimension::Mass, "kg") => 1.0,
            (Dimension::Mass, "amu") | (Dimension::Mass, "u") => AMU,
            (Dimension::Charge, "C") => 1.0,
            (Dimension::Charge, "e") => ELEMENTARY_CHARGE,
            (Dimension::Time, "s") => 1.0,
            (Dimension::Time, "ms") => 1e-3,
            (Dimension::Time, "us") => 1e-6,
            (Dimension::Time, "ns") => 1e-9,
            (Dimension::ElectricField, "V/m") => 1.0,
            (Dimension::ElectricField, "V/mm") => 1e3,
            _ => return None,
        };
        Some(s)
    }
}

/// Parse `"250V"`, `"0.89 mm"`, `"10MHz"` or a bare number (taken as SI).
pub fn parse_quantity(text: &str, dim: Dimension) -> Result<f64, UnitError> {
    let t = text.trim();
    let split = t
        .char_indices()
        .find(|&(i, c)| {
            !(c.is_ascii_digit()
                || c == '.'
                || c == '+'
                || c == '-'
                || ((c == 'e' || c == 'E') && is_exponent(t, i)))
        })
        .map(|(i, _)| i)
        .unwrap_or(t.len());
    let (num, unit) = t.split_at(split);
    let value: f64 = num
        .parse()
        .map_err(|_| UnitError::Malformed(text.to_string()))?;
    let unit = unit.trim();
    let scale = dim.scale(unit).ok_or_else(|| UnitError::WrongDimension {
        unit: unit.to_string(),
        dimension: dim.name(),
    })?;
    Ok(value * scale)
}

// An `e` is an exponent marker only when followed by a digit or sign.
fn is_exponent(t: &str, i: usize) -> bool {
    let rest = &t[i + 1..];
    let mut chars = rest.chars();
    match chars.next() {
        Some(c) if c.is_ascii_digit() => true,
        Some('+') | Some('-') => chars.next().is_some_and(|c| c.is_ascii_digit()),
        _ => false,
    }
}

/// Length unit accepted in layout files.
pub fn length_unit_scale(unit: &str) -> Result<f64, UnitError> {
    Dimension::Length
        .scale(unit)
        .ok_or_else(|| UnitError::WrongDimension {
            unit: unit.to_string(),
            dimension: "length",
        })
}

/// Fixed-format number used in every data file: 9 significant digits.
pub fn fmt_num(x: f64) -> String {
    format!("{:.8e}", x)
}

/// Serde field helpers accepting a bare number (SI) or a string with a unit suffix.
pub mod de {
    use std::collections::BTreeMap;

    use serde::de::Error;
    use serde::{Deserialize, Deserializer};

    use super::{parse_quantity, Dimension};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }

    impl Raw {
        fn value<E: Error>(self, dim: Dimension) -> Result<f64, E> {
            match self {
                Raw::Num(x) => Ok(x),
                Raw::Text(s) => parse_quantity(&s, dim).map_err(E::custom),
            }
        }
    }

    macro_rules! quantity_fields {
        ($($plain:ident, $opt:ident => $dim:ident;)*) => {$(
            pub fn $plain<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
                Raw::deserialize(d)?.value(Dimension::$dim)
            }

            pub fn $opt<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
                Option::<Raw>::deserialize(d)?.map(|r| r.value(Dimension::$dim)).transpose()
            }
        )*};
    }

    quantity_fields! {
        length, opt_length => Length;
        volts, opt_volts => Voltage;
        angular_frequency, opt_angular_frequency => AngularFrequency;
        pressure, opt_pressure => Pressure;
        mass, opt_mass => Mass;
        charge, opt_charge => Charge;
        time, opt_time => Time;
        field, opt_field => ElectricField;
    }

    pub fn volts_map<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<String, f64>, D::Error> {
        BTreeMap::<String, Raw>::deserialize(d)?
            .into_iter()
            .map(|(k, r)| Ok((k, r.value(Dimension::Voltage)?)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn e_per_amu_conversion() {
        // 1 C/kg expressed in e/amu
        let k = 1.660539e-27 / 1.602177e-19;
        assert!((C_PER_KG_TO_E_PER_AMU - k).abs() / k < 1e-6);
        assert!((C_PER_KG_TO_E_PER_AMU - 1.0365e-8).abs() < 1e-11);
    }

    #[test]
    fn serde_fields_take_numbers_or_suffixed_strings() {
        #[derive(serde::Deserialize)]
        struct T {
            #[serde(deserialize_with = "de::volts")]
            v: f64,
            #[serde(default, deserialize_with = "de::opt_length")]
            r: Option<f64>,
        }
        let t: T = serde_json::from_str(r#"{"v": "2kV", "r": "500um"}"#).unwrap();
        assert_eq!(t.v, 2000.0);
        assert!((t.r.unwrap() - 500e-6).abs() < 1e-18);
        let t: T = serde_json::from_str(r#"{"v": 3}"#).unwrap();
        assert_eq!((t.v, t.r), (3.0, None));
        let e = serde_json::from_str::<T>("{\n \"v\": \"3 mm\"}").err().unwrap();
        assert!(e.to_string().contains("voltage") && e.line() == 2, "{e}");
    }

    #[test]
    fn parses_suffixes() {
        assert_eq!(parse_quantity("250V", Dimension::Voltage).unwrap(), 250.0);
        assert!((parse_quantity("0.89mm", Dimension::Length).unwrap() - 0.89e-3).abs() < 1e-15);
        assert!((parse_quantity("10 MHz", Dimension::AngularFrequency).unwrap() - TAU * 1e7).abs() < 1e-6);
        assert_eq!(parse_quantity("1e-3", Dimension::Length).unwrap(), 1e-3);
        assert_eq!(parse_quantity("2.5e2Pa", Dimension::Pressure).unwrap(), 250.0);
        assert!((parse_quantity("88amu", Dimension::Mass).unwrap() - 88.0 * AMU).abs() < 1e-35);
    }

    #[test]
    fn rejects_wrong_dimension() {
        assert!(matches!(
            parse_quantity("5mm", Dimension::Voltage),
            Err(UnitError::WrongDimension { .. })
        ));
        assert!(matches!(parse_quantity("abc", Dimension::Voltage), Err(UnitError::Malformed(_))));
    }

    #[test]
    fn number_format_is_fixed() {
        assert_eq!(fmt_num(0.0065), "6.50000000e-3");
        assert_eq!(fmt_num(-1.0), "-1.00000000e0");
    }
}
