//! Scenario files: one JSON document describing airspace, aircraft, flights,
//! latency configuration, the disruption script and per-eASP rulesets.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::airspace::{AirspaceError, AirspaceModel, ConstraintRule, RawAirspace, Ruleset, SegmentRef, Severity};
use crate::foc::{FocPolicy, Objective, RuleCatalogue};
use crate::perf::{AircraftPerformanceModel, FlightLevel};
use crate::trajectory::VcpKind;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("cannot read scenario: {0}")]
    Io(String),
    #[error("schema error at {pointer}: {message}")]
    Schema { pointer: String, message: String },
    #[error("integrity error: {0}")]
    Integrity(String),
    #[error("geometry error: {0}")]
    Geometry(String),
}

impl From<AirspaceError> for ScenarioError {
    fn from(e: AirspaceError) -> Self {
        match e {
            AirspaceError::Integrity(m) => ScenarioError::Integrity(m),
            AirspaceError::Geometry(m) => ScenarioError::Geometry(m),
        }
    }
}

/// A flight plan authored in the scenario instead of being optimized:
/// one level per route point, optionally with explicit change-point tags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiledPlan {
    pub route: Vec<String>,
    pub levels: Vec<FlightLevel>,
    /// Explicit `(point index, kind)` tags; when absent they are derived from the levels.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vcps: Option<Vec<(usize, VcpKind)>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlightSpec {
    pub operator: String,
    pub origin: String,
    pub destination: String,
    pub aircraft: String,
    /// Scheduled off-block, seconds since epoch.
    pub departure_time: i64,
    pub takeoff_mass: f64,
    /// Level at the origin point (only its climb cost matters).
    pub initial_level: FlightLevel,
    /// Level flown on the final segment into the destination; free when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_level: Option<FlightLevel>,
    #[serde(default = "default_objectives")]
    pub objectives: Vec<Objective>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<FocPolicy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filed_plan: Option<FiledPlan>,
    /// Actual departure is this many seconds after the agreed off-block.
    #[serde(default)]
    pub departure_delay_s: i64,
    /// Intervals (epoch seconds) during which the EFB has no connectivity.
    #[serde(default)]
    pub connectivity_gaps: Vec<[i64; 2]>,
}

fn default_objectives() -> Vec<Objective> {
    vec![Objective::MinFuel]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniformLink {
    pub base_ms: u64,
    pub jitter_ms: u64,
}

/// `base + scale · LogNormal(0, sigma)`, milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeavyTailLink {
    pub base_ms: f64,
    pub scale_ms: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatencyConfig {
    /// One-way ground FF-ICE transport between FOC and eASPs.
    #[serde(default = "LatencyConfig::default_ground")]
    pub ffice_ground: UniformLink,
    /// Time an eASP engine takes to validate and answer.
    #[serde(default = "LatencyConfig::default_processing")]
    pub easp_processing: UniformLink,
    /// EFB to ground over IP (EPP-like downlinks and uplinks).
    #[serde(default = "LatencyConfig::default_efb")]
    pub efb_downlink: HeavyTailLink,
}

impl LatencyConfig {
    fn default_ground() -> UniformLink {
        UniformLink {
            base_ms: 250,
            jitter_ms: 500,
        }
    }
    fn default_processing() -> UniformLink {
        UniformLink {
            base_ms: 150,
            jitter_ms: 300,
        }
    }
    /// Calibrated so downlink latency has SD ≈ 7.5 s and MAD ≈ 2.0 s.
    fn default_efb() -> HeavyTailLink {
        HeavyTailLink {
            base_ms: 1000.0,
            scale_ms: 3300.0,
            sigma: 1.02,
        }
    }
}

impl Default for LatencyConfig {
    fn default() -> Self {
        Self {
            ffice_ground: Self::default_ground(),
            easp_processing: Self::default_processing(),
            efb_downlink: Self::default_efb(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "SCREAMING_SNAKE_CASE", deny_unknown_fields)]
pub enum DisruptionAction {
    Activate {
        rule_id: String,
    },
    Deactivate {
        rule_id: String,
    },
    /// Adds a new HARD closure rule `rule_id` for the segment.
    CloseSegment {
        rule_id: String,
        from: String,
        to: String,
    },
}

impl DisruptionAction {
    pub fn rule_id(&self) -> &str {
        match self {
            DisruptionAction::Activate { rule_id }
            | DisruptionAction::Deactivate { rule_id }
            | DisruptionAction::CloseSegment { rule_id, .. } => rule_id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Disruption {
    /// Seconds since epoch.
    pub at: i64,
    #[serde(flatten)]
    pub action: DisruptionAction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationProfile {
    pub rules: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FocConfig {
    #[serde(default)]
    pub policy: FocPolicy,
    /// Coarse level set for the stage-1 route search; all levels when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage1_levels: Option<Vec<FlightLevel>>,
    #[serde(default = "FocConfig::default_small_change")]
    pub small_change_threshold_s: u32,
    #[serde(default = "FocConfig::default_anchor")]
    pub anchor_lead_s: u32,
    #[serde(default = "FocConfig::default_epp")]
    pub epp_period_s: u32,
    #[serde(default = "FocConfig::default_planning_lead")]
    pub planning_lead_s: u32,
    /// A revision must save more than this (kg) to be sent.
    #[serde(default = "FocConfig::default_min_saving")]
    pub min_saving_kg: f64,
    /// Rule ids the planner knows before any reply; every rule of every
    /// validation profile when absent. Other rules are learned from replies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planner_rules: Option<Vec<String>>,
}

impl FocConfig {
    fn default_small_change() -> u32 {
        300
    }
    fn default_anchor() -> u32 {
        120
    }
    fn default_epp() -> u32 {
        60
    }
    fn default_planning_lead() -> u32 {
        3600
    }
    fn default_min_saving() -> f64 {
        1.0
    }
}

impl Default for FocConfig {
    fn default() -> Self {
        Self {
            policy: FocPolicy::default(),
            stage1_levels: None,
            small_change_threshold_s: Self::default_small_change(),
            anchor_lead_s: Self::default_anchor(),
            epp_period_s: Self::default_epp(),
            planning_lead_s: Self::default_planning_lead(),
            min_saving_kg: Self::default_min_saving(),
            planner_rules: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    #[serde(default)]
    id: String,
    airspace: RawAirspace,
    aircraft: Vec<AircraftPerformanceModel>,
    flights: Vec<FlightSpec>,
    latency: LatencyConfig,
    disruptions: Vec<Disruption>,
    validation_profiles: BTreeMap<String, ValidationProfile>,
    #[serde(default)]
    foc: FocConfig,
}

/// A fully validated scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(into = "RawScenarioOut")]
pub struct Scenario {
    pub id: String,
    pub airspace: AirspaceModel,
    pub aircraft: BTreeMap<String, AircraftPerformanceModel>,
    pub flights: Vec<FlightSpec>,
    pub latency: LatencyConfig,
    pub disruptions: Vec<Disruption>,
    pub validation_profiles: BTreeMap<String, ValidationProfile>,
    pub foc: FocConfig,
}

#[derive(Serialize)]
struct RawScenarioOut {
    id: String,
    airspace: AirspaceModel,
    aircraft: Vec<AircraftPerformanceModel>,
    flights: Vec<FlightSpec>,
    latency: LatencyConfig,
    disruptions: Vec<Disruption>,
    validation_profiles: BTreeMap<String, ValidationProfile>,
    foc: FocConfig,
}

impl From<Scenario> for RawScenarioOut {
    fn from(s: Scenario) -> Self {
        RawScenarioOut {
            id: s.id,
            airspace: s.airspace,
            aircraft: s.aircraft.into_values().collect(),
            flights: s.flights,
            latency: s.latency,
            disruptions: s.disruptions,
            validation_profiles: s.validation_profiles,
            foc: s.foc,
        }
    }
}

/// JSON-pointer rendering of a serde path.
fn pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } => out.push_str(&key.replace('~', "~0").replace('/', "~1")),
            Segment::Enum { variant } => out.push_str(variant),
            Segment::Unknown => out.push('?'),
        }
    }
    if out.is_empty() {
        out.push('/');
    }
    out
}

/// Deserialize `T` from JSON text, reporting failures with a JSON pointer.
pub fn from_json_with_pointer<T: serde::de::DeserializeOwned>(text: &str) -> Result<T, ScenarioError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let value: T = serde_path_to_error::deserialize(de).map_err(|e| ScenarioError::Schema {
        pointer: pointer(e.path()),
        message: e.inner().to_string(),
    })?;
    Ok(value)
}

/// Scenarios shipped in this crate's `scenarios/` directory.
pub const BUNDLED: [&str; 5] = ["minimal", "eddf-sbgr", "fig5-corpus", "leg1-latency", "disruption-3fir"];

/// Path of a bundled scenario by name (without `.json`).
pub fn bundled_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.json"))
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io(format!("{}: {e}", path.display())))?;
    let mut s = parse_scenario(&text)?;
    if s.id.is_empty() {
        s.id = path
            .file_stem()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
    }
    Ok(s)
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let raw: RawScenario = from_json_with_pointer(text)?;
    let airspace = AirspaceModel::from_raw(raw.airspace)?;
    let integrity = |m: String| Err(ScenarioError::Integrity(m));

    let mut aircraft = BTreeMap::new();
    for a in raw.aircraft {
        if aircraft.contains_key(&a.type_code) {
            return integrity(format!("duplicate aircraft type {}", a.type_code));
        }
        aircraft.insert(a.type_code.clone(), a);
    }

    for (easp, profile) in &raw.validation_profiles {
        if !airspace.firs().iter().any(|f| &f.easp_id == easp) {
            return integrity(format!("validation profile for unknown eASP {easp}"));
        }
        for id in &profile.rules {
            if airspace.rule(id).is_none() {
                return integrity(format!("validation profile {easp} references unknown rule {id}"));
            }
        }
    }

    if let Some(levels) = &raw.foc.stage1_levels {
        if levels.is_empty() {
            return integrity("foc.stage1_levels must not be empty".into());
        }
    }
    for id in raw.foc.planner_rules.iter().flatten() {
        if airspace.rule(id).is_none() {
            return integrity(format!("foc.planner_rules references unknown rule {id}"));
        }
    }
    let efb = raw.latency.efb_downlink;
    if !(efb.base_ms >= 1.0 && efb.scale_ms >= 0.0 && efb.sigma >= 0.0 && efb.sigma.is_finite() && efb.scale_ms.is_finite()) {
        return integrity("latency.efb_downlink needs base_ms >= 1 and finite, non-negative scale_ms and sigma".into());
    }
    if raw.foc.epp_period_s == 0 {
        return integrity("foc.epp_period_s must be positive".into());
    }
    if raw.foc.policy.max_replan_iterations < 1 {
        return integrity("foc.policy.max_replan_iterations must be at least 1".into());
    }

    for (i, f) in raw.flights.iter().enumerate() {
        let tag = format!("flight {i} ({}-{})", f.origin, f.destination);
        for id in [&f.origin, &f.destination] {
            if airspace.waypoint(id).is_none() {
                return integrity(format!("{tag} references unknown waypoint {id}"));
            }
        }
        if f.origin == f.destination {
            return integrity(format!("{tag}: origin equals destination"));
        }
        let Some(perf) = aircraft.get(&f.aircraft) else {
            return integrity(format!("{tag} references unknown aircraft {}", f.aircraft));
        };
        if perf.check_mass(f.takeoff_mass).is_err() {
            return integrity(format!("{tag}: takeoff mass {} outside the aircraft range", f.takeoff_mass));
        }
        if let Some(l) = f.final_level {
            if !perf.has_level(l) {
                return integrity(format!("{tag}: final level FL{l} not in the performance table"));
            }
        }
        if f.policy.is_some_and(|p| p.max_replan_iterations < 1) {
            return integrity(format!("{tag}: policy.max_replan_iterations must be at least 1"));
        }
        if f.objectives.is_empty() {
            return integrity(format!("{tag}: no objectives"));
        }
        if !airspace.reachable(&f.origin, &f.destination) {
            return integrity(format!("{tag}: destination unreachable from origin"));
        }
        if airspace.controlling_easp(&airspace.position(&f.origin).expect("checked")).is_err() {
            return integrity(format!("{tag}: origin {} lies outside every FIR", f.origin));
        }
        for g in &f.connectivity_gaps {
            if g[0] > g[1] {
                return integrity(format!("{tag}: inverted connectivity gap"));
            }
        }
        if let Some(plan) = &f.filed_plan {
            check_filed_plan(&airspace, f, plan).map_err(|m| ScenarioError::Integrity(format!("{tag}: {m}")))?;
        }
    }

    let mut created = BTreeSet::new();
    for d in &raw.disruptions {
        match &d.action {
            DisruptionAction::Activate { rule_id } | DisruptionAction::Deactivate { rule_id } => {
                if airspace.rule(rule_id).is_none() && !created.contains(rule_id) {
                    return integrity(format!("disruption references unknown rule {rule_id}"));
                }
            }
            DisruptionAction::CloseSegment { rule_id, from, to } => {
                if airspace.rule(rule_id).is_some() {
                    return integrity(format!("closure rule id {rule_id} already exists"));
                }
                airspace.check_rule(&closure_rule(rule_id, from, to))?;
                created.insert(rule_id.clone());
            }
        }
    }

    Ok(Scenario {
        id: raw.id,
        airspace,
        aircraft,
        flights: raw.flights,
        latency: raw.latency,
        disruptions: raw.disruptions,
        validation_profiles: raw.validation_profiles,
        foc: raw.foc,
    })
}

fn check_filed_plan(airspace: &AirspaceModel, f: &FlightSpec, plan: &FiledPlan) -> Result<(), String> {
    if plan.route.len() < 2 || plan.route.len() != plan.levels.len() {
        return Err("filed plan needs at least two points and one level per point".into());
    }
    if plan.route[0] != f.origin || plan.route[plan.route.len() - 1] != f.destination {
        return Err("filed plan must run from origin to destination".into());
    }
    for w in plan.route.windows(2) {
        if airspace.segment(&w[0], &w[1]).is_none() {
            return Err(format!("filed plan uses unknown segment {}-{}", w[0], w[1]));
        }
    }
    if let Some(tags) = &plan.vcps {
        if tags.iter().any(|&(i, _)| i >= plan.route.len()) {
            return Err("filed plan tags a point past the end of the route".into());
        }
    }
    Ok(())
}

/// The HARD rule a CLOSE_SEGMENT disruption installs.
pub fn closure_rule(rule_id: &str, from: &str, to: &str) -> ConstraintRule {
    ConstraintRule {
        id: rule_id.to_string(),
        severity: Severity::Hard,
        kind: crate::airspace::RuleKind::SegmentClosed(SegmentRef::new(from, to)),
        message_template: "{rule}: segment {segment} closed".into(),
        active_window: None,
        actionable: true,
        enabled: true,
    }
}

impl Scenario {
    /// The ruleset an eASP starts with: its profile's rules in airspace order.
    pub fn initial_ruleset(&self, easp: &str) -> Ruleset {
        let ids: BTreeSet<&str> = self
            .validation_profiles
            .get(easp)
            .map(|p| p.rules.iter().map(String::as_str).collect())
            .unwrap_or_default();
        Ruleset::new(
            self.airspace
                .rules()
                .iter()
                .filter(|r| ids.contains(r.id.as_str()))
                .cloned()
                .collect(),
        )
    }

    /// The FOC's starting catalogue: every airspace rule, with the planner
    /// knowing `foc.planner_rules` (or every profile rule).
    pub fn foc_catalogue(&self) -> RuleCatalogue {
        let known: Vec<String> = match &self.foc.planner_rules {
            Some(ids) => ids.clone(),
            None => self.validation_profiles.values().flat_map(|p| p.rules.iter().cloned()).collect(),
        };
        RuleCatalogue::new(self.airspace.rules().to_vec(), known)
    }

    /// The flight's reply policy (its own, else the scenario's).
    pub fn policy_for(&self, flight: &FlightSpec) -> FocPolicy {
        flight.policy.unwrap_or(self.foc.policy)
    }

    pub fn easp_ids(&self) -> Vec<String> {
        self.airspace.firs().iter().map(|f| f.easp_id.clone()).collect::<BTreeSet<_>>().into_iter().collect()
    }

    pub fn perf_for(&self, flight: &FlightSpec) -> &AircraftPerformanceModel {
        &self.aircraft[&flight.aircraft]
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }
}
