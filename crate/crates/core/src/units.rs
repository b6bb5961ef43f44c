//! Physical unit table used to bring flow amounts onto one canonical unit
//! per dimension, plus a small tagged quantity type.

use std::collections::BTreeMap;
use std::fmt;

/// Conversion of a declared unit onto its canonical unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conversion {
    pub canonical: &'static str,
    pub factor: f64,
}

/// Declared unit table. Amounts are multiplied by `factor` to land in
/// `canonical`.
#[derive(Debug, Clone)]
pub struct UnitTable {
    units: BTreeMap<String, Conversion>,
}

impl Default for UnitTable {
    fn default() -> Self {
        Self::standard()
    }
}

impl UnitTable {
    /// Mass (kg), volume (m3), energy (MJ), area (m2) and counts (p).
    pub fn standard() -> Self {
        const ENTRIES: &[(&str, &str, f64)] = &[
            ("mg", "kg", 1e-6),
            ("g", "kg", 1e-3),
            ("kg", "kg", 1.0),
            ("t", "kg", 1e3),
            ("tonne", "kg", 1e3),
            ("kt", "kg", 1e6),
            ("Mt", "kg", 1e9),
            ("Gt", "kg", 1e12),
            ("L", "m3", 1e-3),
            ("m3", "m3", 1.0),
            ("dam3", "m3", 1e3),
            ("ML", "m3", 1e3),
            ("hm3", "m3", 1e6),
            ("km3", "m3", 1e9),
            ("kJ", "MJ", 1e-3),
            ("MJ", "MJ", 1.0),
            ("GJ", "MJ", 1e3),
            ("TJ", "MJ", 1e6),
            ("PJ", "MJ", 1e9),
            ("kWh", "MJ", 3.6),
            ("MWh", "MJ", 3.6e3),
            ("GWh", "MJ", 3.6e6),
            ("m2", "m2", 1.0),
            ("ha", "m2", 1e4),
            ("km2", "m2", 1e6),
            ("p", "p", 1.0),
        ];
        let units = ENTRIES
            .iter()
            .map(|&(unit, canonical, factor)| (unit.to_string(), Conversion { canonical, factor }))
            .collect();
        UnitTable { units }
    }

    pub fn lookup(&self, unit: &str) -> Option<Conversion> {
        self.units.get(unit.trim()).copied()
    }

    pub fn is_registered(&self, unit: &str) -> bool {
        self.lookup(unit).is_some()
    }

    pub fn canonical(&self, unit: &str) -> Option<&'static str> {
        self.lookup(unit).map(|c| c.canonical)
    }

    /// Converts `amount` expressed in `unit` to the canonical unit.
    pub fn to_canonical(&self, amount: f64, unit: &str) -> Option<(f64, &'static str)> {
        self.lookup(unit).map(|c| (amount * c.factor, c.canonical))
    }
}

/// A value tagged with a free-form unit string such as `kg CO2 eq`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quantity {
    pub value: f64,
    pub unit: String,
}

impl Quantity {
    pub fn new(value: f64, unit: impl Into<String>) -> Self {
        Quantity {
            value,
            unit: unit.into(),
        }
    }

    /// Re-expresses a quantity whose unit starts with a mass unit
    /// (`kg CO2 eq`, `g/capita`, ...) in `target` mass units. Quantities
    /// with other units are returned unchanged.
    pub fn rescale_mass(&self, table: &UnitTable, target: &str) -> Quantity {
        let (head, tail) = split_leading_unit(&self.unit);
        let (Some(from), Some(to)) = (table.lookup(head), table.lookup(target)) else {
            return self.clone();
        };
        if from.canonical != "kg" || to.canonical != "kg" {
            return self.clone();
        }
        Quantity {
            value: self.value * from.factor / to.factor,
            unit: format!("{target}{tail}"),
        }
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.value, self.unit)
    }
}

fn split_leading_unit(unit: &str) -> (&str, &str) {
    let end = unit
        .find(|c: char| c.is_whitespace() || c == '/')
        .unwrap_or(unit.len());
    unit.split_at(end)
}
