//! Flight levels, the aircraft performance table and the segment fuel model.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{ground_speed, GeoError, WindVector};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PerfError {
    #[error("flight level {0} is not a standard level (multiple of 10 in [0, 500])")]
    BadLevel(u32),
    #[error("mass {mass:.1} kg outside [{min:.1}, {max:.1}]")]
    MassOutOfRange { mass: f64, min: f64, max: f64 },
    #[error("segment distance must be positive, got {0}")]
    BadDistance(f64),
    #[error("no cruise entry for FL{level} bracket {bracket}")]
    MissingEntry { level: FlightLevel, bracket: usize },
    #[error("non-positive fuel {fuel:.3} kg on segment")]
    NonPositiveFuel { fuel: f64 },
    #[error(transparent)]
    Wind(#[from] GeoError),
    #[error("invalid performance model: {0}")]
    Invalid(String),
}

/// Standard flight level in hundreds of feet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct FlightLevel(u16);

impl FlightLevel {
    pub fn new(value: u32) -> Result<Self, PerfError> {
        if value > 500 || !value.is_multiple_of(10) {
            return Err(PerfError::BadLevel(value));
        }
        Ok(Self(value as u16))
    }

    pub fn value(self) -> u32 {
        self.0 as u32
    }

    /// Thousands of feet between two levels, positive when `to` is higher.
    pub fn kft_to(self, to: FlightLevel) -> f64 {
        (to.0 as f64 - self.0 as f64) / 10.0
    }
}

impl TryFrom<u32> for FlightLevel {
    type Error = PerfError;
    fn try_from(v: u32) -> Result<Self, Self::Error> {
        FlightLevel::new(v)
    }
}

impl From<FlightLevel> for u32 {
    fn from(l: FlightLevel) -> u32 {
        l.value()
    }
}

impl fmt::Display for FlightLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:03}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MassBracket {
    pub min_kg: f64,
    pub max_kg: f64,
}

impl MassBracket {
    fn distance(&self, mass: f64) -> f64 {
        if mass < self.min_kg {
            self.min_kg - mass
        } else if mass > self.max_kg {
            mass - self.max_kg
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CruisePerf {
    pub tas_kt: f64,
    pub fuel_flow_kg_h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CruiseEntry {
    pub level: FlightLevel,
    pub bracket: usize,
    pub tas_kt: f64,
    pub fuel_flow_kg_h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPerformance {
    type_code: String,
    levels: Vec<FlightLevel>,
    mass_brackets: Vec<MassBracket>,
    cruise_table: Vec<CruiseEntry>,
    climb_cost_kg_per_kft: f64,
    descent_credit_kg_per_kft: f64,
    min_mass_kg: f64,
    max_mass_kg: f64,
}

/// Tabulated cruise performance per (level, mass bracket) plus linear
/// climb cost and descent credit per thousand feet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPerformance", into = "RawPerformance")]
pub struct AircraftPerformanceModel {
    pub type_code: String,
    levels: Vec<FlightLevel>,
    mass_brackets: Vec<MassBracket>,
    table: BTreeMap<(FlightLevel, usize), CruisePerf>,
    pub climb_cost_kg_per_kft: f64,
    pub descent_credit_kg_per_kft: f64,
    pub min_mass_kg: f64,
    pub max_mass_kg: f64,
}

impl TryFrom<RawPerformance> for AircraftPerformanceModel {
    type Error = PerfError;

    fn try_from(raw: RawPerformance) -> Result<Self, Self::Error> {
        let invalid = |m: String| Err(PerfError::Invalid(m));
        if raw.levels.is_empty() || raw.mass_brackets.is_empty() {
            return invalid("levels and mass brackets must be non-empty".into());
        }
        if !(raw.climb_cost_kg_per_kft >= 0.0
            && raw.descent_credit_kg_per_kft >= 0.0
            && raw.descent_credit_kg_per_kft <= raw.climb_cost_kg_per_kft)
        {
            return invalid("need 0 <= descent_credit <= climb_cost".into());
        }
        if !(raw.min_mass_kg > 0.0 && raw.min_mass_kg < raw.max_mass_kg) {
            return invalid("need 0 < min_mass < max_mass".into());
        }
        for b in &raw.mass_brackets {
            if !(b.min_kg <= b.max_kg) {
                return invalid(format!("bracket [{}, {}] is inverted", b.min_kg, b.max_kg));
            }
        }
        let mut levels = raw.levels;
        levels.sort();
        levels.dedup();
        let mut table = BTreeMap::new();
        for e in raw.cruise_table {
            if e.bracket >= raw.mass_brackets.len() || !levels.contains(&e.level) {
                return invalid(format!("entry FL{} bracket {} out of range", e.level, e.bracket));
            }
            if !(e.tas_kt > 0.0 && e.fuel_flow_kg_h > 0.0) {
                return invalid(format!("entry FL{} bracket {} must be positive", e.level, e.bracket));
            }
            let perf = CruisePerf {
                tas_kt: e.tas_kt,
                fuel_flow_kg_h: e.fuel_flow_kg_h,
            };
            if table.insert((e.level, e.bracket), perf).is_some() {
                return invalid(format!("duplicate entry FL{} bracket {}", e.level, e.bracket));
            }
        }
        for &l in &levels {
            for b in 0..raw.mass_brackets.len() {
                if !table.contains_key(&(l, b)) {
                    return Err(PerfError::MissingEntry { level: l, bracket: b });
                }
            }
        }
        Ok(Self {
            type_code: raw.type_code,
            levels,
            mass_brackets: raw.mass_brackets,
            table,
            climb_cost_kg_per_kft: raw.climb_cost_kg_per_kft,
            descent_credit_kg_per_kft: raw.descent_credit_kg_per_kft,
            min_mass_kg: raw.min_mass_kg,
            max_mass_kg: raw.max_mass_kg,
        })
    }
}

impl From<AircraftPerformanceModel> for RawPerformance {
    fn from(m: AircraftPerformanceModel) -> Self {
        RawPerformance {
            type_code: m.type_code,
            levels: m.levels,
            mass_brackets: m.mass_brackets,
            cruise_table: m
                .table
                .into_iter()
                .map(|((level, bracket), p)| CruiseEntry {
                    level,
                    bracket,
                    tas_kt: p.tas_kt,
                    fuel_flow_kg_h: p.fuel_flow_kg_h,
                })
                .collect(),
            climb_cost_kg_per_kft: m.climb_cost_kg_per_kft,
            descent_credit_kg_per_kft: m.descent_credit_kg_per_kft,
            min_mass_kg: m.min_mass_kg,
            max_mass_kg: m.max_mass_kg,
        }
    }
}

/// Builder-style constructor used by tests and generators.
pub struct PerformanceSpec {
    pub type_code: String,
    pub levels: Vec<FlightLevel>,
    pub mass_brackets: Vec<MassBracket>,
    pub entries: Vec<CruiseEntry>,
    pub climb_cost_kg_per_kft: f64,
    pub descent_credit_kg_per_kft: f64,
    pub min_mass_kg: f64,
    pub max_mass_kg: f64,
}

impl PerformanceSpec {
    pub fn build(self) -> Result<AircraftPerformanceModel, PerfError> {
        RawPerformance {
            type_code: self.type_code,
            levels: self.levels,
            mass_brackets: self.mass_brackets,
            cruise_table: self.entries,
            climb_cost_kg_per_kft: self.climb_cost_kg_per_kft,
            descent_credit_kg_per_kft: self.descent_credit_kg_per_kft,
            min_mass_kg: self.min_mass_kg,
            max_mass_kg: self.max_mass_kg,
        }
        .try_into()
    }
}

impl AircraftPerformanceModel {
    pub fn levels(&self) -> &[FlightLevel] {
        &self.levels
    }

    pub fn mass_brackets(&self) -> &[MassBracket] {
        &self.mass_brackets
    }

    pub fn has_level(&self, level: FlightLevel) -> bool {
        self.levels.binary_search(&level).is_ok()
    }

    pub fn lowest_level(&self) -> FlightLevel {
        self.levels[0]
    }

    pub fn highest_tas(&self) -> f64 {
        self.table.values().map(|p| p.tas_kt).fold(0.0, f64::max)
    }

    /// Nearest bracket by distance to its range; ties go to the heavier bracket.
    pub fn bracket(&self, mass: f64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, b) in self.mass_brackets.iter().enumerate() {
            let d = b.distance(mass);
            let heavier = b.max_kg > self.mass_brackets[best].max_kg;
            if d < best_d || (d == best_d && heavier) {
                best = i;
                best_d = d;
            }
        }
        best
    }

    pub fn cruise(&self, level: FlightLevel, mass: f64) -> Result<CruisePerf, PerfError> {
        let bracket = self.bracket(mass);
        self.table
            .get(&(level, bracket))
            .copied()
            .ok_or(PerfError::MissingEntry { level, bracket })
    }

    pub fn entries(&self) -> impl Iterator<Item = (FlightLevel, usize, CruisePerf)> + '_ {
        self.table.iter().map(|(&(l, b), &p)| (l, b, p))
    }

    pub fn check_mass(&self, mass: f64) -> Result<(), PerfError> {
        if mass < self.min_mass_kg || mass > self.max_mass_kg || !mass.is_finite() {
            return Err(PerfError::MassOutOfRange {
                mass,
                min: self.min_mass_kg,
                max: self.max_mass_kg,
            });
        }
        Ok(())
    }

    /// Fuel change for a level change: a cost when climbing, a credit when descending.
    pub fn level_change_fuel(&self, from: FlightLevel, to: FlightLevel) -> f64 {
        let kft = from.kft_to(to);
        if kft > 0.0 {
            self.climb_cost_kg_per_kft * kft
        } else {
            self.descent_credit_kg_per_kft * kft
        }
    }

    /// Smallest fuel per ground nautical mile achievable anywhere in the table
    /// when the wind is at most `max_wind_kt`.
    pub fn min_fuel_per_nm(&self, max_wind_kt: f64) -> f64 {
        self.table
            .values()
            .map(|p| p.fuel_flow_kg_h / (p.tas_kt + max_wind_kt))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Geometry and wind of one airway segment, as seen from its start.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentLeg {
    pub dist_nm: f64,
    pub track_deg: f64,
    pub wind: WindVector,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentBurn {
    pub fuel_kg: f64,
    pub time_s: f64,
}

/// Fuel and time to fly `leg` at `to_level`, after an impulse level change
/// from `from_level` at the segment start.
pub fn segment_burn(
    from_level: FlightLevel,
    mass: f64,
    to_level: FlightLevel,
    leg: &SegmentLeg,
    perf: &AircraftPerformanceModel,
) -> Result<SegmentBurn, PerfError> {
    if !(leg.dist_nm > 0.0) {
        return Err(PerfError::BadDistance(leg.dist_nm));
    }
    perf.check_mass(mass)?;
    let cruise = perf.cruise(to_level, mass)?;
    let gs = ground_speed(cruise.tas_kt, leg.wind, leg.track_deg)?;
    let hours = leg.dist_nm / gs;
    let fuel = cruise.fuel_flow_kg_h * hours + perf.level_change_fuel(from_level, to_level);
    if !(fuel > 0.0) {
        return Err(PerfError::NonPositiveFuel { fuel });
    }
    Ok(SegmentBurn {
        fuel_kg: fuel,
        time_s: hours * 3600.0,
    })
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;

    pub fn fl(v: u32) -> FlightLevel {
        FlightLevel::new(v).unwrap()
    }

    /// One bracket, every level at the same tas, flows given per level.
    pub fn flat_perf(levels: &[(u32, f64)], tas: f64, climb: f64, credit: f64) -> AircraftPerformanceModel {
        PerformanceSpec {
            type_code: "TEST".into(),
            levels: levels.iter().map(|&(l, _)| fl(l)).collect(),
            mass_brackets: vec![MassBracket {
                min_kg: 40_000.0,
                max_kg: 400_000.0,
            }],
            entries: levels
                .iter()
                .map(|&(l, f)| CruiseEntry {
                    level: fl(l),
                    bracket: 0,
                    tas_kt: tas,
                    fuel_flow_kg_h: f,
                })
                .collect(),
            climb_cost_kg_per_kft: climb,
            descent_credit_kg_per_kft: credit,
            min_mass_kg: 40_000.0,
            max_mass_kg: 400_000.0,
        }
        .build()
        .unwrap()
    }
}
