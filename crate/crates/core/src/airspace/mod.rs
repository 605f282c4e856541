//! The airspace graph, eASP jurisdictions, constraint rules and weather.

pub mod jurisdiction;
pub mod rules;
pub mod weather;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{great_circle_nm, initial_bearing, GeoPoint, WindVector};
use crate::perf::{FlightLevel, SegmentLeg};
use crate::trajectory::Trajectory4D;

pub use jurisdiction::FirRegion;
pub use rules::{
    Binding, CapScope, ConstraintRule, FlowPreference, LevelCap, NoParams, RuleKind, Ruleset, SegmentRef, Severity,
};
pub use weather::{WeatherError, WeatherGrid};

/// Relative tolerance between a segment's stated distance and its great circle.
pub const DISTANCE_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Waypoint {
    pub id: String,
    pub position: GeoPoint,
    pub published: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AirwaySegment {
    pub from_id: String,
    pub to_id: String,
    pub distance_nm: f64,
    pub allowed_levels: BTreeSet<FlightLevel>,
    #[serde(default)]
    pub one_way: bool,
}

impl AirwaySegment {
    pub fn label(&self) -> String {
        format!("{}-{}", self.from_id, self.to_id)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AirspaceError {
    #[error("integrity: {0}")]
    Integrity(String),
    #[error("geometry: {0}")]
    Geometry(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("no FIR contains ({lat:.4}, {lon:.4})")]
pub struct NoJurisdiction {
    pub lat: f64,
    pub lon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawAirspace {
    pub waypoints: Vec<Waypoint>,
    pub segments: Vec<AirwaySegment>,
    pub firs: Vec<FirRegion>,
    #[serde(default)]
    pub rules: Vec<ConstraintRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weather: Option<WeatherGrid>,
}

/// Immutable, validated airspace. Directed adjacency is derived on load.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(into = "RawAirspace")]
pub struct AirspaceModel {
    waypoints: BTreeMap<String, Waypoint>,
    segments: Vec<AirwaySegment>,
    firs: Vec<FirRegion>,
    rules: Vec<ConstraintRule>,
    weather: Option<WeatherGrid>,
    adjacency: BTreeMap<String, Vec<(String, usize)>>,
}

impl From<AirspaceModel> for RawAirspace {
    fn from(m: AirspaceModel) -> Self {
        RawAirspace {
            waypoints: m.waypoints.into_values().collect(),
            segments: m.segments,
            firs: m.firs,
            rules: m.rules,
            weather: m.weather,
        }
    }
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.chars().all(|c| c.is_ascii_uppercase() || c.is_ascii_digit())
}

impl AirspaceModel {
    pub fn from_raw(raw: RawAirspace) -> Result<Self, AirspaceError> {
        let integrity = |m: String| Err(AirspaceError::Integrity(m));
        let geometry = |m: String| Err(AirspaceError::Geometry(m));

        let mut waypoints = BTreeMap::new();
        for w in raw.waypoints {
            if !valid_id(&w.id) {
                return integrity(format!("waypoint id {:?} must be uppercase alphanumeric", w.id));
            }
            if waypoints.contains_key(&w.id) {
                return integrity(format!("duplicate waypoint {}", w.id));
            }
            waypoints.insert(w.id.clone(), w);
        }

        let mut adjacency: BTreeMap<String, Vec<(String, usize)>> = BTreeMap::new();
        let mut seen = BTreeSet::new();
        for (i, s) in raw.segments.iter().enumerate() {
            for id in [&s.from_id, &s.to_id] {
                if !waypoints.contains_key(id) {
                    return integrity(format!("segment {} references unknown waypoint {}", s.label(), id));
                }
            }
            if s.from_id == s.to_id {
                return integrity(format!("segment {} is a self-loop", s.label()));
            }
            let key = if s.from_id < s.to_id {
                (s.from_id.clone(), s.to_id.clone())
            } else {
                (s.to_id.clone(), s.from_id.clone())
            };
            if !seen.insert(key) {
                return integrity(format!("duplicate segment {}", s.label()));
            }
            if s.allowed_levels.is_empty() {
                return integrity(format!("segment {} has no allowed levels", s.label()));
            }
            let gc = great_circle_nm(&waypoints[&s.from_id].position, &waypoints[&s.to_id].position);
            if !(s.distance_nm > 0.0) || (s.distance_nm - gc).abs() > DISTANCE_TOLERANCE * gc {
                return geometry(format!(
                    "segment {} distance {:.3} NM is not within 1% of great circle {:.3} NM",
                    s.label(),
                    s.distance_nm,
                    gc
                ));
            }
            adjacency.entry(s.from_id.clone()).or_default().push((s.to_id.clone(), i));
            if !s.one_way {
                adjacency.entry(s.to_id.clone()).or_default().push((s.from_id.clone(), i));
            }
        }
        for list in adjacency.values_mut() {
            list.sort();
        }

        let mut easps = BTreeSet::new();
        for f in &raw.firs {
            if !easps.insert(f.easp_id.clone()) {
                return integrity(format!("duplicate FIR for {}", f.easp_id));
            }
            if let Some(p) = f.geometry_problem() {
                return geometry(p);
            }
        }
        for (i, a) in raw.firs.iter().enumerate() {
            for b in &raw.firs[i + 1..] {
                if a.overlaps(b) {
                    return geometry(format!("FIRs {} and {} overlap", a.easp_id, b.easp_id));
                }
            }
        }

        if let Some(grid) = &raw.weather {
            for s in &raw.segments {
                let mid = waypoints[&s.from_id].position.lerp(&waypoints[&s.to_id].position, 0.5);
                for &l in &s.allowed_levels {
                    if !grid.contains(&mid, l) {
                        return geometry(format!("segment {} at FL{} lies outside the weather grid", s.label(), l));
                    }
                }
            }
        }

        let model = AirspaceModel {
            waypoints,
            segments: raw.segments,
            firs: raw.firs,
            rules: Vec::new(),
            weather: raw.weather,
            adjacency,
        };
        let mut ids = BTreeSet::new();
        for r in &raw.rules {
            if !ids.insert(r.id.clone()) {
                return integrity(format!("duplicate rule id {}", r.id));
            }
            model.check_rule(r)?;
        }
        Ok(AirspaceModel {
            rules: raw.rules,
            ..model
        })
    }

    /// Referential and template checks for one rule against this airspace.
    pub fn check_rule(&self, r: &ConstraintRule) -> Result<(), AirspaceError> {
        let integrity = |m: String| Err(AirspaceError::Integrity(m));
        if r.actionable != r.template_binds_location() {
            return integrity(format!(
                "rule {}: actionable={} but its message template {} a waypoint/segment",
                r.id,
                r.actionable,
                if r.template_binds_location() { "names" } else { "does not name" }
            ));
        }
        let need_segment = |s: &SegmentRef| -> Result<(), AirspaceError> {
            for id in [&s.from, &s.to] {
                if !self.waypoints.contains_key(id) {
                    return Err(AirspaceError::Integrity(format!("rule {} references unknown waypoint {}", r.id, id)));
                }
            }
            if self.find_segment(&s.from, &s.to).is_none() {
                return Err(AirspaceError::Integrity(format!(
                    "rule {} references unknown segment {}",
                    r.id,
                    s.label()
                )));
            }
            Ok(())
        };
        match &r.kind {
            RuleKind::SegmentClosed(s) => need_segment(s)?,
            RuleKind::LevelCap(cap) => match &cap.scope {
                CapScope::Fir(id) => {
                    if !self.firs.iter().any(|f| &f.easp_id == id) {
                        return integrity(format!("rule {} references unknown FIR {}", r.id, id));
                    }
                }
                CapScope::Segments(list) => {
                    for s in list {
                        need_segment(s)?;
                    }
                }
            },
            RuleKind::FlowPreference(fp) => {
                need_segment(&SegmentRef::new(&fp.from, &fp.to))?;
                let mut path = vec![fp.from.clone()];
                path.extend(fp.via.iter().cloned());
                path.push(fp.to.clone());
                for w in path.windows(2) {
                    if self.segment(&w[0], &w[1]).is_none() {
                        return integrity(format!(
                            "rule {}: preferred alternative has no segment {}-{}",
                            r.id, w[0], w[1]
                        ));
                    }
                }
            }
            RuleKind::VcpPlacement(_) | RuleKind::CruiseChangeOrder(_) => {}
        }
        if let Some([a, b]) = r.active_window {
            if a > b {
                return integrity(format!("rule {} has an inverted active window", r.id));
            }
        }
        Ok(())
    }

    pub fn waypoint(&self, id: &str) -> Option<&Waypoint> {
        self.waypoints.get(id)
    }

    pub fn waypoints(&self) -> impl Iterator<Item = &Waypoint> {
        self.waypoints.values()
    }

    pub fn waypoint_count(&self) -> usize {
        self.waypoints.len()
    }

    pub fn segments(&self) -> &[AirwaySegment] {
        &self.segments
    }

    pub fn firs(&self) -> &[FirRegion] {
        &self.firs
    }

    pub fn rules(&self) -> &[ConstraintRule] {
        &self.rules
    }

    pub fn rule(&self, id: &str) -> Option<&ConstraintRule> {
        self.rules.iter().find(|r| r.id == id)
    }

    pub fn weather(&self) -> Option<&WeatherGrid> {
        self.weather.as_ref()
    }

    pub fn is_published(&self, id: &str) -> bool {
        self.waypoints.get(id).is_some_and(|w| w.published)
    }

    /// Directed neighbours of `id` as `(to, segment index)`, sorted by id.
    pub fn neighbors(&self, id: &str) -> &[(String, usize)] {
        self.adjacency.get(id).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Segment flyable from `a` to `b` (respecting one-way).
    pub fn segment(&self, a: &str, b: &str) -> Option<&AirwaySegment> {
        self.neighbors(a)
            .iter()
            .find(|(to, _)| to == b)
            .map(|&(_, i)| &self.segments[i])
    }

    /// Segment joining `a` and `b` in either direction.
    pub fn find_segment(&self, a: &str, b: &str) -> Option<&AirwaySegment> {
        self.segments
            .iter()
            .find(|s| (s.from_id == a && s.to_id == b) || (s.from_id == b && s.to_id == a))
    }

    pub fn position(&self, id: &str) -> Option<GeoPoint> {
        self.waypoints.get(id).map(|w| w.position)
    }

    pub fn segment_midpoint(&self, a: &str, b: &str) -> Option<GeoPoint> {
        Some(self.position(a)?.lerp(&self.position(b)?, 0.5))
    }

    pub fn wind_at(&self, pos: &GeoPoint, level: FlightLevel) -> Result<WindVector, WeatherError> {
        match &self.weather {
            Some(g) => g.wind_at(pos, level),
            None => Ok(WindVector::calm()),
        }
    }

    pub fn max_wind_speed(&self) -> f64 {
        self.weather.as_ref().map_or(0.0, WeatherGrid::max_wind_speed)
    }

    /// Geometry and midpoint wind for flying `a → b` at `level`.
    pub fn leg(&self, a: &str, b: &str, level: FlightLevel) -> Option<SegmentLeg> {
        let seg = self.segment(a, b)?;
        let (pa, pb) = (self.position(a)?, self.position(b)?);
        let wind = self.wind_at(&pa.lerp(&pb, 0.5), level).ok()?;
        Some(SegmentLeg {
            dist_nm: seg.distance_nm,
            track_deg: initial_bearing(&pa, &pb),
            wind,
        })
    }

    pub fn controlling_easp(&self, pos: &GeoPoint) -> Result<&str, NoJurisdiction> {
        jurisdiction::controlling_easp_in(&self.firs, pos).ok_or(NoJurisdiction {
            lat: pos.lat(),
            lon: pos.lon(),
        })
    }

    pub fn downstream_easps(&self, traj: &Trajectory4D, t_now: f64) -> Vec<String> {
        jurisdiction::downstream_easps_in(&self.firs, traj, t_now)
    }

    /// Whether `b` is reachable from `a` over the directed graph.
    pub fn reachable(&self, a: &str, b: &str) -> bool {
        let mut seen = BTreeSet::new();
        let mut stack = vec![a.to_string()];
        while let Some(w) = stack.pop() {
            if w == b {
                return true;
            }
            if seen.insert(w.clone()) {
                stack.extend(self.neighbors(&w).iter().map(|(t, _)| t.clone()));
            }
        }
        false
    }
}
