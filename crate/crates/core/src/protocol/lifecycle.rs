//! Per-flight lifecycle: pre-departure trial and filing, in-flight revision
//! management, completion and cancellation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::messages::ReplyStatus;
use crate::trajectory::Trajectory4D;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LifecycleState {
    Planning,
    TrialPending,
    ReadyToFile,
    Filed,
    Agreed,
    Active,
    RevisionPending,
    Completed,
    Cancelled,
}

impl LifecycleState {
    pub const ALL: [LifecycleState; 9] = [
        LifecycleState::Planning,
        LifecycleState::TrialPending,
        LifecycleState::ReadyToFile,
        LifecycleState::Filed,
        LifecycleState::Agreed,
        LifecycleState::Active,
        LifecycleState::RevisionPending,
        LifecycleState::Completed,
        LifecycleState::Cancelled,
    ];

    pub fn is_terminal(self) -> bool {
        matches!(self, LifecycleState::Completed | LifecycleState::Cancelled)
    }

    pub fn name(self) -> &'static str {
        match self {
            LifecycleState::Planning => "PLANNING",
            LifecycleState::TrialPending => "TRIAL_PENDING",
            LifecycleState::ReadyToFile => "READY_TO_FILE",
            LifecycleState::Filed => "FILED",
            LifecycleState::Agreed => "AGREED",
            LifecycleState::Active => "ACTIVE",
            LifecycleState::RevisionPending => "REVISION_PENDING",
            LifecycleState::Completed => "COMPLETED",
            LifecycleState::Cancelled => "CANCELLED",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LifecycleEvent {
    TrialSent,
    /// Reply to a trial; in FILED a NON_CONCUR filing status also uses this.
    Reply(ReplyStatus),
    File,
    /// The filed trajectory was accepted and becomes the agreed one.
    FilingAccepted(Trajectory4D),
    Depart,
    RevisionSent,
    /// Reply to a revision; on acceptance `trajectory` becomes agreed.
    RevisionReply {
        status: ReplyStatus,
        trajectory: Trajectory4D,
    },
    /// A small change (same route and levels) replacing the agreed trajectory.
    UpdateReceived(Trajectory4D),
    Arrive,
    Cancel,
}

impl LifecycleEvent {
    pub fn name(&self) -> String {
        match self {
            LifecycleEvent::TrialSent => "trial_sent".into(),
            LifecycleEvent::Reply(s) => format!("reply({})", s.name()),
            LifecycleEvent::File => "file".into(),
            LifecycleEvent::FilingAccepted(_) => "filing_accepted".into(),
            LifecycleEvent::Depart => "depart".into(),
            LifecycleEvent::RevisionSent => "revision_sent".into(),
            LifecycleEvent::RevisionReply { status, .. } => format!("revision_reply({})", status.name()),
            LifecycleEvent::UpdateReceived(_) => "update_received".into(),
            LifecycleEvent::Arrive => "arrive".into(),
            LifecycleEvent::Cancel => "cancel".into(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("illegal transition: {event} in state {}", state.name())]
pub struct IllegalTransition {
    pub state: LifecycleState,
    pub event: String,
}

/// State, the currently agreed trajectory, and the (time ms, state) history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlightLifecycle {
    pub state: LifecycleState,
    pub agreed: Option<Trajectory4D>,
    pub history: Vec<(i64, LifecycleState)>,
}

impl FlightLifecycle {
    pub fn new(at_ms: i64) -> Self {
        FlightLifecycle {
            state: LifecycleState::Planning,
            agreed: None,
            history: vec![(at_ms, LifecycleState::Planning)],
        }
    }

    /// Apply `event` in place; on error nothing changes.
    pub fn apply(&mut self, event: LifecycleEvent, at_ms: i64) -> Result<LifecycleState, IllegalTransition> {
        use LifecycleEvent as E;
        use LifecycleState as S;
        use ReplyStatus::*;
        let illegal = || IllegalTransition {
            state: self.state,
            event: event.name(),
        };
        let (next, agreed) = match (self.state, &event) {
            (s, E::Cancel) if !s.is_terminal() => (S::Cancelled, None),
            (S::Planning, E::TrialSent) => (S::TrialPending, None),
            // Re-trial of an adopted proposal before filing.
            (S::ReadyToFile, E::TrialSent) => (S::TrialPending, None),
            (S::TrialPending, E::Reply(Concur | Negotiate)) => (S::ReadyToFile, None),
            (S::TrialPending, E::Reply(NonConcur)) => (S::Planning, None),
            (S::ReadyToFile, E::File) => (S::Filed, None),
            (S::Filed, E::FilingAccepted(t)) => (S::Agreed, Some(t.clone())),
            // The ruleset changed between trial and filing.
            (S::Filed, E::Reply(NonConcur)) => (S::Planning, None),
            (S::Agreed, E::Depart) => (S::Active, None),
            (S::Agreed | S::Active, E::UpdateReceived(t)) => (self.state, Some(t.clone())),
            (S::Active, E::RevisionSent) => (S::RevisionPending, None),
            (S::RevisionPending, E::RevisionReply { status, trajectory }) => {
                (S::Active, status.accepts().then(|| trajectory.clone()))
            }
            (S::Active, E::Arrive) => (S::Completed, None),
            _ => return Err(illegal()),
        };
        if let Some(t) = agreed {
            self.agreed = Some(t);
        }
        debug_assert!(
            !matches!(next, S::Agreed | S::Active | S::RevisionPending | S::Completed) || self.agreed.is_some(),
            "agreed states need an agreed trajectory"
        );
        self.state = next;
        self.history.push((at_ms, next));
        Ok(next)
    }
}

/// Pure form of [`FlightLifecycle::apply`].
pub fn next_state(
    lc: &FlightLifecycle,
    event: LifecycleEvent,
    at_ms: i64,
) -> Result<FlightLifecycle, IllegalTransition> {
    let mut next = lc.clone();
    next.apply(event, at_ms)?;
    Ok(next)
}
