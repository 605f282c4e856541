//! The FF-ICE style message schema exchanged between FOC, EFB and eASPs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::gufi::Gufi;
use crate::trajectory::Trajectory4D;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ReplyStatus {
    Concur,
    Negotiate,
    NonConcur,
}

impl ReplyStatus {
    pub const ALL: [ReplyStatus; 3] = [ReplyStatus::Concur, ReplyStatus::Negotiate, ReplyStatus::NonConcur];

    pub fn name(self) -> &'static str {
        match self {
            ReplyStatus::Concur => "CONCUR",
            ReplyStatus::Negotiate => "NEGOTIATE",
            ReplyStatus::NonConcur => "NON_CONCUR",
        }
    }

    /// Whether a plan with this status may be filed / becomes agreed.
    pub fn accepts(self) -> bool {
        self != ReplyStatus::NonConcur
    }
}

/// One failed rule as reported to the airline.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationError {
    pub rule_id: String,
    pub message: String,
    pub actionable: bool,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReplyError {
    #[error("CONCUR must carry neither errors nor a proposal")]
    ConcurWithContent,
    #[error("{0} must list at least one error")]
    MissingErrors(&'static str),
    #[error("NON_CONCUR cannot carry a proposal")]
    NonConcurWithProposal,
}

/// Body of TRIAL_REPLY, FILING_STATUS and REVISION_REPLY.
///
/// CONCUR has no errors and no proposal; NON_CONCUR lists its errors and has
/// no proposal; NEGOTIATE lists the failed discretionary rules and carries a
/// proposal whenever one could be built for any of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawReply", into = "RawReply")]
pub struct ReplyBody {
    status: ReplyStatus,
    errors: Vec<ValidationError>,
    proposal: Option<Trajectory4D>,
    ruleset_version: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawReply {
    status: ReplyStatus,
    #[serde(default)]
    errors: Vec<ValidationError>,
    #[serde(default)]
    proposal: Option<Trajectory4D>,
    ruleset_version: u64,
}

impl TryFrom<RawReply> for ReplyBody {
    type Error = ReplyError;
    fn try_from(r: RawReply) -> Result<Self, ReplyError> {
        ReplyBody::new(r.status, r.errors, r.proposal, r.ruleset_version)
    }
}

impl From<ReplyBody> for RawReply {
    fn from(r: ReplyBody) -> Self {
        RawReply {
            status: r.status,
            errors: r.errors,
            proposal: r.proposal,
            ruleset_version: r.ruleset_version,
        }
    }
}

impl ReplyBody {
    pub fn new(
        status: ReplyStatus,
        errors: Vec<ValidationError>,
        proposal: Option<Trajectory4D>,
        ruleset_version: u64,
    ) -> Result<Self, ReplyError> {
        match status {
            ReplyStatus::Concur if !errors.is_empty() || proposal.is_some() => return Err(ReplyError::ConcurWithContent),
            ReplyStatus::Negotiate if errors.is_empty() => return Err(ReplyError::MissingErrors("NEGOTIATE")),
            ReplyStatus::NonConcur if errors.is_empty() => return Err(ReplyError::MissingErrors("NON_CONCUR")),
            ReplyStatus::NonConcur if proposal.is_some() => return Err(ReplyError::NonConcurWithProposal),
            _ => {}
        }
        Ok(ReplyBody {
            status,
            errors,
            proposal,
            ruleset_version,
        })
    }

    pub fn concur(ruleset_version: u64) -> Self {
        ReplyBody {
            status: ReplyStatus::Concur,
            errors: vec![],
            proposal: None,
            ruleset_version,
        }
    }

    pub fn status(&self) -> ReplyStatus {
        self.status
    }

    pub fn errors(&self) -> &[ValidationError] {
        &self.errors
    }

    pub fn proposal(&self) -> Option<&Trajectory4D> {
        self.proposal.as_ref()
    }

    pub fn ruleset_version(&self) -> u64 {
        self.ruleset_version
    }

    /// Every error is actionable (names a waypoint or segment).
    pub fn all_actionable(&self) -> bool {
        self.errors.iter().all(|e| e.actionable)
    }
}

/// A plan submitted for trial or filing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryBody {
    pub candidate_id: String,
    pub trajectory: Trajectory4D,
}

/// An in-flight amendment; points before `anchor_index` are already committed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RevisionBody {
    pub candidate_id: String,
    pub trajectory: Trajectory4D,
    pub anchor_index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgreedBody {
    pub trajectory: Trajectory4D,
    /// eASP that accepted the trajectory.
    pub agreed_by: String,
}

/// A small change (same route and levels) that needs no new clearance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UpdateBody {
    pub trajectory: Trajectory4D,
    pub delay_s: f64,
}

/// eASP-initiated modification of the agreed trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProposalBody {
    pub trajectory: Trajectory4D,
    pub rule_id: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "body", rename_all = "SCREAMING_SNAKE_CASE", deny_unknown_fields)]
pub enum Payload {
    TrialRequest(TrajectoryBody),
    TrialReply(ReplyBody),
    FilingRequest(TrajectoryBody),
    FilingStatus(ReplyBody),
    RevisionRequest(RevisionBody),
    RevisionReply(ReplyBody),
    AgreedTrajectory(AgreedBody),
    TrajectoryUpdate(UpdateBody),
    ProposalRequest(ProposalBody),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MessageKind {
    TrialRequest,
    TrialReply,
    FilingRequest,
    FilingStatus,
    RevisionRequest,
    RevisionReply,
    AgreedTrajectory,
    TrajectoryUpdate,
    ProposalRequest,
}

impl MessageKind {
    pub const ALL: [MessageKind; 9] = [
        MessageKind::TrialRequest,
        MessageKind::TrialReply,
        MessageKind::FilingRequest,
        MessageKind::FilingStatus,
        MessageKind::RevisionRequest,
        MessageKind::RevisionReply,
        MessageKind::AgreedTrajectory,
        MessageKind::TrajectoryUpdate,
        MessageKind::ProposalRequest,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MessageKind::TrialRequest => "TRIAL_REQUEST",
            MessageKind::TrialReply => "TRIAL_REPLY",
            MessageKind::FilingRequest => "FILING_REQUEST",
            MessageKind::FilingStatus => "FILING_STATUS",
            MessageKind::RevisionRequest => "REVISION_REQUEST",
            MessageKind::RevisionReply => "REVISION_REPLY",
            MessageKind::AgreedTrajectory => "AGREED_TRAJECTORY",
            MessageKind::TrajectoryUpdate => "TRAJECTORY_UPDATE",
            MessageKind::ProposalRequest => "PROPOSAL_REQUEST",
        }
    }

    /// Replies answer a request and must carry its id as correlation.
    pub fn is_reply(self) -> bool {
        matches!(self, MessageKind::TrialReply | MessageKind::FilingStatus | MessageKind::RevisionReply)
    }

    /// The reply kind that answers this request kind, if any.
    pub fn reply_kind(self) -> Option<MessageKind> {
        match self {
            MessageKind::TrialRequest => Some(MessageKind::TrialReply),
            MessageKind::FilingRequest => Some(MessageKind::FilingStatus),
            MessageKind::RevisionRequest => Some(MessageKind::RevisionReply),
            _ => None,
        }
    }
}

impl Payload {
    pub fn kind(&self) -> MessageKind {
        match self {
            Payload::TrialRequest(_) => MessageKind::TrialRequest,
            Payload::TrialReply(_) => MessageKind::TrialReply,
            Payload::FilingRequest(_) => MessageKind::FilingRequest,
            Payload::FilingStatus(_) => MessageKind::FilingStatus,
            Payload::RevisionRequest(_) => MessageKind::RevisionRequest,
            Payload::RevisionReply(_) => MessageKind::RevisionReply,
            Payload::AgreedTrajectory(_) => MessageKind::AgreedTrajectory,
            Payload::TrajectoryUpdate(_) => MessageKind::TrajectoryUpdate,
            Payload::ProposalRequest(_) => MessageKind::ProposalRequest,
        }
    }

    pub fn reply(&self) -> Option<&ReplyBody> {
        match self {
            Payload::TrialReply(r) | Payload::FilingStatus(r) | Payload::RevisionReply(r) => Some(r),
            _ => None,
        }
    }

    pub fn trajectory(&self) -> Option<&Trajectory4D> {
        match self {
            Payload::TrialRequest(b) | Payload::FilingRequest(b) => Some(&b.trajectory),
            Payload::RevisionRequest(b) => Some(&b.trajectory),
            Payload::AgreedTrajectory(b) => Some(&b.trajectory),
            Payload::TrajectoryUpdate(b) => Some(&b.trajectory),
            Payload::ProposalRequest(b) => Some(&b.trajectory),
            Payload::TrialReply(_) | Payload::FilingStatus(_) | Payload::RevisionReply(_) => None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MessageError {
    #[error("received_at {received} precedes sent_at {sent}")]
    Acausal { sent: i64, received: i64 },
    #[error("{0} must carry a correlation id")]
    MissingCorrelation(&'static str),
}

/// One message. Times are integer milliseconds of simulated time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMessage", into = "RawMessage")]
pub struct FficeMessage {
    pub id: String,
    pub gufi: Gufi,
    pub sender: String,
    pub receiver: String,
    pub sent_at_ms: i64,
    pub received_at_ms: i64,
    pub correlation_id: Option<String>,
    pub payload: Payload,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMessage {
    id: String,
    gufi: Gufi,
    sender: String,
    receiver: String,
    sent_at_ms: i64,
    received_at_ms: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    correlation_id: Option<String>,
    payload: Payload,
}

impl TryFrom<RawMessage> for FficeMessage {
    type Error = MessageError;
    fn try_from(r: RawMessage) -> Result<Self, MessageError> {
        let m = FficeMessage {
            id: r.id,
            gufi: r.gufi,
            sender: r.sender,
            receiver: r.receiver,
            sent_at_ms: r.sent_at_ms,
            received_at_ms: r.received_at_ms,
            correlation_id: r.correlation_id,
            payload: r.payload,
        };
        m.check()?;
        Ok(m)
    }
}

impl From<FficeMessage> for RawMessage {
    fn from(m: FficeMessage) -> Self {
        RawMessage {
            id: m.id,
            gufi: m.gufi,
            sender: m.sender,
            receiver: m.receiver,
            sent_at_ms: m.sent_at_ms,
            received_at_ms: m.received_at_ms,
            correlation_id: m.correlation_id,
            payload: m.payload,
        }
    }
}

impl FficeMessage {
    pub fn kind(&self) -> MessageKind {
        self.payload.kind()
    }

    /// Causality and reply correlation.
    pub fn check(&self) -> Result<(), MessageError> {
        if self.received_at_ms < self.sent_at_ms {
            return Err(MessageError::Acausal {
                sent: self.sent_at_ms,
                received: self.received_at_ms,
            });
        }
        let kind = self.kind();
        if kind.is_reply() && self.correlation_id.is_none() {
            return Err(MessageError::MissingCorrelation(kind.name()));
        }
        Ok(())
    }
}
