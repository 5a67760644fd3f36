//! Quantities with explicit units, as written in scenario files.
//!
//! A quantity is either a bare number, taken to be SI already, or a string
//! `"<number> <unit>"`. Each field knows its [`Dimension`] and accepts only
//! the units of that dimension.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum UnitError {
    #[error("cannot parse '{0}' as a number with a unit")]
    Malformed(String),
    #[error("unit '{unit}' is not a {dimension} unit (accepted: {accepted})")]
    WrongUnit {
        unit: String,
        dimension: Dimension,
        accepted: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Length,
    Area,
    Volume,
    Temperature,
    TemperatureRate,
    Time,
    Power,
    Density,
    Conductivity,
    HeatCapacity,
    SpecificEnergy,
    HeatTransferCoefficient,
    Dimensionless,
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dimension::Length => "length",
            Dimension::Area => "area",
            Dimension::Volume => "volume",
            Dimension::Temperature => "temperature",
            Dimension::TemperatureRate => "temperature-rate",
            Dimension::Time => "time",
            Dimension::Power => "power",
            Dimension::Density => "density",
            Dimension::Conductivity => "conductivity",
            Dimension::HeatCapacity => "heat-capacity",
            Dimension::SpecificEnergy => "specific-energy",
            Dimension::HeatTransferCoefficient => "heat-transfer-coefficient",
            Dimension::Dimensionless => "dimensionless",
        })
    }
}

/// How a unit maps to SI: `si = value * mul / div + offset`. Sub-units
/// divide by an exact power of ten so "13 cm2" gives exactly 1.3e-3.
struct Unit {
    names: &'static [&'static str],
    mul: f64,
    div: f64,
    offset: f64,
}

const fn unit(names: &'static [&'static str], mul: f64, div: f64) -> Unit {
    Unit {
        names,
        mul,
        div,
        offset: 0.0,
    }
}

const LENGTH: &[Unit] = &[
    unit(&["m"], 1.0, 1.0),
    unit(&["cm"], 1.0, 1e2),
    unit(&["mm"], 1.0, 1e3),
    unit(&["um", "µm"], 1.0, 1e6),
];
const AREA: &[Unit] = &[
    unit(&["m2", "m^2", "m²"], 1.0, 1.0),
    unit(&["cm2", "cm^2", "cm²"], 1.0, 1e4),
    unit(&["mm2", "mm^2", "mm²"], 1.0, 1e6),
];
const VOLUME: &[Unit] = &[
    unit(&["m3", "m^3", "m³"], 1.0, 1.0),
    unit(&["L", "l"], 1.0, 1e3),
    unit(&["mL", "ml", "cm3", "cm^3", "cm³"], 1.0, 1e6),
];
const TEMPERATURE: &[Unit] = &[
    unit(&["K"], 1.0, 1.0),
    Unit {
        names: &["C", "degC", "°C"],
        mul: 1.0,
        div: 1.0,
        offset: 273.15,
    },
];
const TEMPERATURE_RATE: &[Unit] = &[
    unit(&["K/s"], 1.0, 1.0),
    unit(&["K/min"], 1.0, 60.0),
    unit(&["K/h"], 1.0, 3600.0),
];
const TIME: &[Unit] = &[
    unit(&["s"], 1.0, 1.0),
    unit(&["min"], 60.0, 1.0),
    unit(&["h"], 3600.0, 1.0),
];
const POWER: &[Unit] = &[unit(&["W"], 1.0, 1.0), unit(&["mW"], 1.0, 1e3), unit(&["kW"], 1e3, 1.0)];
const DENSITY: &[Unit] = &[
    unit(&["kg/m3", "kg/m^3", "kg/m³"], 1.0, 1.0),
    unit(&["g/cm3", "g/cm^3", "g/mL", "g/ml"], 1e3, 1.0),
];
const CONDUCTIVITY: &[Unit] = &[unit(&["W/mK", "W/(m K)", "W/m/K"], 1.0, 1.0)];
const HEAT_CAPACITY: &[Unit] = &[
    unit(&["J/kgK", "J/(kg K)", "J/kg/K"], 1.0, 1.0),
    unit(&["kJ/kgK", "kJ/(kg K)", "kJ/kg/K"], 1e3, 1.0),
];
const SPECIFIC_ENERGY: &[Unit] = &[unit(&["J/kg"], 1.0, 1.0), unit(&["kJ/kg"], 1e3, 1.0)];
const HTC: &[Unit] = &[unit(&["W/m2K", "W/(m2 K)", "W/m^2K", "W/m2/K"], 1.0, 1.0)];

impl Dimension {
    fn units(self) -> &'static [Unit] {
        match self {
            Dimension::Length => LENGTH,
            Dimension::Area => AREA,
            Dimension::Volume => VOLUME,
            Dimension::Temperature => TEMPERATURE,
            Dimension::TemperatureRate => TEMPERATURE_RATE,
            Dimension::Time => TIME,
            Dimension::Power => POWER,
            Dimension::Density => DENSITY,
            Dimension::Conductivity => CONDUCTIVITY,
            Dimension::HeatCapacity => HEAT_CAPACITY,
            Dimension::SpecificEnergy => SPECIFIC_ENERGY,
            Dimension::HeatTransferCoefficient => HTC,
            Dimension::Dimensionless => &[],
        }
    }
}

/// Parses `"<number> [unit]"` into SI. A missing unit means SI.
pub fn parse_quantity(text: &str, dimension: Dimension) -> Result<f64, UnitError> {
    let text = text.trim();
    let split = text
        .find(|c: char| c.is_whitespace())
        .unwrap_or(text.len());
    let (number, unit_name) = text.split_at(split);
    let value: f64 = number
        .parse()
        .map_err(|_| UnitError::Malformed(text.to_string()))?;
    let unit_name = unit_name.trim();
    if unit_name.is_empty() {
        return Ok(value);
    }
    let units = dimension.units();
    units
        .iter()
        .find(|u| u.names.contains(&unit_name))
        .map(|u| value * u.mul / u.div + u.offset)
        .ok_or_else(|| UnitError::WrongUnit {
            unit: unit_name.to_string(),
            dimension,
            accepted: if units.is_empty() {
                "none".into()
            } else {
                units
                    .iter()
                    .map(|u| u.names[0])
                    .collect::<Vec<_>>()
                    .join(", ")
            },
        })
}

/// A number in a scenario file: bare SI value or a string with a unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Quantity {
    Number(f64),
    Text(String),
}

impl Quantity {
    pub fn to_si(&self, dimension: Dimension) -> Result<f64, UnitError> {
        match self {
            Quantity::Number(v) => Ok(*v),
            Quantity::Text(s) => parse_quantity(s, dimension),
        }
    }
}

impl From<f64> for Quantity {
    fn from(v: f64) -> Self {
        Quantity::Number(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn common_units() {
        assert_relative_eq!(parse_quantity("0.5 cm", Dimension::Length).unwrap(), 0.005);
        assert_relative_eq!(
            parse_quantity("1 K/min", Dimension::TemperatureRate).unwrap(),
            1.0 / 60.0
        );
        assert_relative_eq!(parse_quantity("85 W", Dimension::Power).unwrap(), 85.0);
        assert_relative_eq!(parse_quantity("3.3 mL", Dimension::Volume).unwrap(), 3.3e-6);
        assert_relative_eq!(parse_quantity("20 C", Dimension::Temperature).unwrap(), 293.15);
        assert_relative_eq!(parse_quantity("13 cm2", Dimension::Area).unwrap(), 1.3e-3);
        assert_relative_eq!(parse_quantity("2.84e6", Dimension::SpecificEnergy).unwrap(), 2.84e6);
        assert_relative_eq!(parse_quantity("  10 min ", Dimension::Time).unwrap(), 600.0);
    }

    #[test]
    fn rejects_wrong_dimension_and_garbage() {
        assert!(matches!(
            parse_quantity("1 K/min", Dimension::Length),
            Err(UnitError::WrongUnit { .. })
        ));
        assert!(matches!(
            parse_quantity("cm 1", Dimension::Length),
            Err(UnitError::Malformed(_))
        ));
        assert!(parse_quantity("0.3 cm", Dimension::Dimensionless).is_err());
    }

    #[test]
    fn untagged_quantity() {
        #[derive(Deserialize)]
        struct Doc {
            a: Quantity,
            b: Quantity,
        }
        let doc: Doc = toml::from_str("a = 4.2\nb = \"4.2 cm\"").unwrap();
        assert_eq!(doc.a.to_si(Dimension::Length).unwrap(), 4.2);
        assert_relative_eq!(doc.b.to_si(Dimension::Length).unwrap(), 0.042);
    }
}
