//! The append-only event log and its canonical text form: one record per
//! line, prefixed by the simulated time in milliseconds as 16 hex digits.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::foc::{Objective, Provenance};
use crate::geo::GeoPoint;
use crate::perf::FlightLevel;
use crate::protocol::{FficeMessage, Gufi, LifecycleState, ReplyStatus};
use crate::scenario::DisruptionAction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FlightPhase {
    Climb,
    Cruise,
    Descent,
}

impl FlightPhase {
    pub fn ordinal(self) -> f64 {
        match self {
            FlightPhase::Climb => 0.0,
            FlightPhase::Cruise => 1.0,
            FlightPhase::Descent => 2.0,
        }
    }
}

/// An EPP-like downlink: the avionics view of the flight at `sent_at_ms`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EppDownlink {
    pub gufi: Gufi,
    pub sent_at_ms: i64,
    pub received_at_ms: i64,
    pub phase: FlightPhase,
    pub position: GeoPoint,
    pub level: FlightLevel,
    pub mass_kg: f64,
    pub predicted_eta_s: f64,
    pub predicted_landing_mass_kg: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub toc_eto_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tod_eto_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "SCREAMING_SNAKE_CASE", deny_unknown_fields)]
pub enum LogRecord {
    /// A message, logged when it is delivered.
    Message { message: FficeMessage },
    Transition {
        gufi: Gufi,
        from: LifecycleState,
        to: LifecycleState,
        event: String,
    },
    /// An eASP evaluated a trajectory.
    Validation {
        easp: String,
        gufi: Gufi,
        /// The request validated; absent for eASP-initiated checks.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        request_id: Option<String>,
        status: ReplyStatus,
        ruleset_version: u64,
        failed: Vec<String>,
    },
    /// The FOC produced a candidate.
    Candidate {
        gufi: Gufi,
        candidate_id: String,
        objective: Objective,
        provenance: Provenance,
        fuel_kg: f64,
        duration_s: f64,
        route: Vec<String>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        relaxation_trace: Vec<String>,
    },
    /// A candidate could not be expressed as a trial request.
    ConversionFailed {
        gufi: Gufi,
        candidate_id: String,
        rule_id: String,
        message: String,
    },
    /// The FOC's reply policy chose an action.
    Decision {
        gufi: Gufi,
        candidate_id: String,
        action: String,
    },
    /// Operator attention required; the flight is withdrawn.
    Escalation { gufi: Gufi, reason: String },
    Downlink { downlink: EppDownlink },
    Disruption {
        action: DisruptionAction,
        /// Ruleset version per eASP after the change.
        rulesets: BTreeMap<String, u64>,
    },
    /// A constraint change notice reached the FOC.
    Notice {
        rule_id: String,
        action: String,
        sent_at_ms: i64,
        received_at_ms: i64,
    },
    Renegotiation {
        gufi: Gufi,
        outcome: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        candidate_id: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        remaining_kg: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        new_remaining_kg: Option<f64>,
    },
    ProposalDeclined { gufi: Gufi, rule_id: String, reason: String },
}

impl LogRecord {
    pub fn type_name(&self) -> &'static str {
        match self {
            LogRecord::Message { .. } => "MESSAGE",
            LogRecord::Transition { .. } => "TRANSITION",
            LogRecord::Validation { .. } => "VALIDATION",
            LogRecord::Candidate { .. } => "CANDIDATE",
            LogRecord::ConversionFailed { .. } => "CONVERSION_FAILED",
            LogRecord::Decision { .. } => "DECISION",
            LogRecord::Escalation { .. } => "ESCALATION",
            LogRecord::Downlink { .. } => "DOWNLINK",
            LogRecord::Disruption { .. } => "DISRUPTION",
            LogRecord::Notice { .. } => "NOTICE",
            LogRecord::Renegotiation { .. } => "RENEGOTIATION",
            LogRecord::ProposalDeclined { .. } => "PROPOSAL_DECLINED",
        }
    }

    /// The flight a record is about, if any.
    pub fn gufi(&self) -> Option<&Gufi> {
        match self {
            LogRecord::Message { message } => Some(&message.gufi),
            LogRecord::Transition { gufi, .. }
            | LogRecord::Validation { gufi, .. }
            | LogRecord::Candidate { gufi, .. }
            | LogRecord::ConversionFailed { gufi, .. }
            | LogRecord::Decision { gufi, .. }
            | LogRecord::Escalation { gufi, .. }
            | LogRecord::Renegotiation { gufi, .. }
            | LogRecord::ProposalDeclined { gufi, .. } => Some(gufi),
            LogRecord::Downlink { downlink } => Some(&downlink.gufi),
            LogRecord::Disruption { .. } | LogRecord::Notice { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogEntry {
    pub seq: u64,
    #[serde(skip)]
    pub at_ms: i64,
    pub record: LogRecord,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("log line {line}: {message}")]
pub struct LogParseError {
    pub line: usize,
    pub message: String,
}

/// Timestamps are non-decreasing; `seq` numbers entries from 0.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventLog {
    entries: Vec<LogEntry>,
}

impl EventLog {
    pub fn push(&mut self, at_ms: i64, record: LogRecord) {
        debug_assert!(self.entries.last().is_none_or(|e| e.at_ms <= at_ms), "log time went backwards");
        self.entries.push(LogEntry {
            seq: self.entries.len() as u64,
            at_ms,
            record,
        });
    }

    pub fn entries(&self) -> &[LogEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries with `seq >= since`.
    pub fn since(&self, since: u64) -> &[LogEntry] {
        &self.entries[(since as usize).min(self.entries.len())..]
    }

    /// Delivered messages in log order.
    pub fn messages(&self) -> impl Iterator<Item = &FficeMessage> {
        self.entries.iter().filter_map(|e| match &e.record {
            LogRecord::Message { message } => Some(message),
            _ => None,
        })
    }

    pub fn line(entry: &LogEntry) -> String {
        format!(
            "{:016x} {}",
            entry.at_ms,
            serde_json::to_string(entry).expect("log entries serialize")
        )
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for e in &self.entries {
            s.push_str(&Self::line(e));
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<EventLog, LogParseError> {
        let mut log = EventLog::default();
        for (i, line) in text.lines().enumerate() {
            let err = |message: String| LogParseError { line: i + 1, message };
            let (ts, json) = line.split_once(' ').ok_or_else(|| err("missing timestamp".into()))?;
            if ts.len() != 16 {
                return Err(err(format!("timestamp {ts:?} is not 16 hex digits")));
            }
            let at_ms = i64::from_str_radix(ts, 16).map_err(|e| err(e.to_string()))?;
            let mut entry: LogEntry = serde_json::from_str(json).map_err(|e| err(e.to_string()))?;
            if entry.seq != log.entries.len() as u64 {
                return Err(err(format!("sequence {} out of order", entry.seq)));
            }
            if log.entries.last().is_some_and(|e| e.at_ms > at_ms) {
                return Err(err("timestamp decreases".into()));
            }
            entry.at_ms = at_ms;
            log.entries.push(entry);
        }
        Ok(log)
    }
}
