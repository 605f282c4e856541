//! Constraint rules as data: five closed kinds with parameter schemas,
//! consumed identically by the planner and the eASP validator.

use serde::{Deserialize, Serialize};

use crate::perf::FlightLevel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Severity {
    Hard,
    Discretionary,
}

/// An airway hop, identified by its endpoint waypoint ids.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentRef {
    pub from: String,
    pub to: String,
}

impl SegmentRef {
    pub fn new(from: impl Into<String>, to: impl Into<String>) -> Self {
        Self {
            from: from.into(),
            to: to.into(),
        }
    }

    /// Same hop regardless of direction.
    pub fn matches_undirected(&self, a: &str, b: &str) -> bool {
        (self.from == a && self.to == b) || (self.from == b && self.to == a)
    }

    pub fn label(&self) -> String {
        format!("{}-{}", self.from, self.to)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CapScope {
    /// Every segment whose midpoint lies in this eASP's FIR.
    Fir(String),
    /// An explicit list of hops, either direction.
    Segments(Vec<SegmentRef>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelCap {
    pub max_level: FlightLevel,
    pub scope: CapScope,
}

/// Flying `from → to` directly is discouraged; the preferred alternative
/// goes `from → via[0] → … → to`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowPreference {
    pub from: String,
    pub to: String,
    pub via: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoParams {}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RuleKind {
    SegmentClosed(SegmentRef),
    LevelCap(LevelCap),
    /// R1: every vertical change point sits on a published waypoint.
    VcpPlacement(NoParams),
    /// R2: cruise level changes are distinct from TOC/BOD and not at or before a previous TOC.
    CruiseChangeOrder(NoParams),
    FlowPreference(FlowPreference),
}

impl RuleKind {
    pub fn name(&self) -> &'static str {
        match self {
            RuleKind::SegmentClosed(_) => "SEGMENT_CLOSED",
            RuleKind::LevelCap(_) => "LEVEL_CAP",
            RuleKind::VcpPlacement(_) => "VCP_PLACEMENT",
            RuleKind::CruiseChangeOrder(_) => "CRUISE_CHANGE_ORDER",
            RuleKind::FlowPreference(_) => "FLOW_PREFERENCE",
        }
    }
}

/// Where a violation happened, used to fill message templates.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Binding {
    pub waypoint: Option<String>,
    pub segment: Option<String>,
    pub level: Option<FlightLevel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintRule {
    pub id: String,
    pub severity: Severity,
    #[serde(flatten)]
    pub kind: RuleKind,
    /// Placeholders: `{rule}`, `{waypoint}`, `{segment}`, `{level}` (the
    /// bare number, e.g. `310`: the cap for level caps, the flown level
    /// otherwise).
    pub message_template: String,
    /// Seconds since epoch, inclusive; absent means always.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub active_window: Option<[i64; 2]>,
    pub actionable: bool,
    #[serde(default = "default_enabled")]
    pub enabled: bool,
}

fn default_enabled() -> bool {
    true
}

impl ConstraintRule {
    /// A message is actionable exactly when it names a concrete waypoint or segment.
    pub fn template_binds_location(&self) -> bool {
        self.message_template.contains("{waypoint}") || self.message_template.contains("{segment}")
    }

    pub fn render(&self, b: &Binding) -> String {
        let mut s = self.message_template.replace("{rule}", &self.id);
        if let Some(w) = &b.waypoint {
            s = s.replace("{waypoint}", w);
        }
        if let Some(seg) = &b.segment {
            s = s.replace("{segment}", seg);
        }
        if let Some(l) = b.level {
            s = s.replace("{level}", &l.to_string());
        }
        s
    }

    /// Enabled and its window intersects `[t0, t1]`.
    pub fn active_over(&self, t0: f64, t1: f64) -> bool {
        self.enabled
            && match self.active_window {
                None => true,
                Some([a, b]) => t1 >= a as f64 && t0 <= b as f64,
            }
    }

    pub fn is_hard(&self) -> bool {
        self.severity == Severity::Hard
    }
}

/// A versioned, copy-on-write rule list. Order is priority (first = highest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ruleset {
    pub version: u64,
    pub rules: Vec<ConstraintRule>,
}

impl Ruleset {
    pub fn new(rules: Vec<ConstraintRule>) -> Self {
        Self { version: 1, rules }
    }

    pub fn get(&self, id: &str) -> Option<&ConstraintRule> {
        self.rules.iter().find(|r| r.id == id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.get(id).is_some()
    }

    /// New version with `id` switched on or off; `None` if the rule is unknown.
    pub fn with_enabled(&self, id: &str, enabled: bool) -> Option<Ruleset> {
        let mut next = self.clone();
        next.rules.iter_mut().find(|r| r.id == id)?.enabled = enabled;
        next.version += 1;
        Some(next)
    }

    /// New version with `rule` added (or replaced if the id exists).
    pub fn with_rule(&self, rule: ConstraintRule) -> Ruleset {
        let mut next = self.clone();
        match next.rules.iter_mut().find(|r| r.id == rule.id) {
            Some(r) => *r = rule,
            None => next.rules.push(rule),
        }
        next.version += 1;
        next
    }

    pub fn enabled(&self) -> impl Iterator<Item = &ConstraintRule> {
        self.rules.iter().filter(|r| r.enabled)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn closure() -> ConstraintRule {
        serde_json::from_value(json!({
            "id": "R3",
            "severity": "HARD",
            "kind": "SEGMENT_CLOSED",
            "params": {"from": "ALPHA", "to": "BRAVO"},
            "message_template": "{rule}: segment {segment} closed",
            "actionable": true
        }))
        .unwrap()
    }

    #[test]
    fn parses_adjacent_kind_and_params() {
        let r = closure();
        assert_eq!(r.kind, RuleKind::SegmentClosed(SegmentRef::new("ALPHA", "BRAVO")));
        assert!(r.enabled);
        let back: ConstraintRule = serde_json::from_value(serde_json::to_value(&r).unwrap()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn unknown_params_rejected() {
        let bad = json!({
            "id": "R3", "severity": "HARD", "kind": "SEGMENT_CLOSED",
            "params": {"from": "A", "to": "B", "extra": 1},
            "message_template": "x", "actionable": false
        });
        assert!(serde_json::from_value::<ConstraintRule>(bad).is_err());
    }

    #[test]
    fn rendering_and_binding() {
        let r = closure();
        assert!(r.template_binds_location());
        let msg = r.render(&Binding {
            segment: Some("ALPHA-BRAVO".into()),
            ..Default::default()
        });
        assert_eq!(msg, "R3: segment ALPHA-BRAVO closed");

        let mut capped = closure();
        capped.message_template = "{rule}: {segment} above FL{level}".into();
        let msg = capped.render(&Binding {
            segment: Some("A-B".into()),
            level: Some(FlightLevel::new(310).unwrap()),
            ..Default::default()
        });
        assert_eq!(msg, "R3: A-B above FL310");
    }

    #[test]
    fn windows_and_versions() {
        let mut r = closure();
        r.active_window = Some([100, 200]);
        assert!(r.active_over(150.0, 160.0));
        assert!(r.active_over(0.0, 100.0));
        assert!(!r.active_over(201.0, 300.0));
        let rs = Ruleset::new(vec![r]);
        let off = rs.with_enabled("R3", false).unwrap();
        assert_eq!(off.version, 2);
        assert!(!off.get("R3").unwrap().active_over(150.0, 160.0));
        assert!(rs.with_enabled("NOPE", false).is_none());
    }
}
