//! Whether an amended trajectory needs a new clearance.

use serde::{Deserialize, Serialize};

use crate::trajectory::Trajectory4D;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ChangeClass {
    /// Same route and level schedule, every ETO within the threshold:
    /// propagated as a TRAJECTORY_UPDATE.
    Small,
    /// Anything else needs a REVISION_REQUEST.
    ClearanceRequired,
}

pub fn classify_change(old: &Trajectory4D, new: &Trajectory4D, threshold_s: f64) -> ChangeClass {
    let same_shape = old.waypoint_ids() == new.waypoint_ids() && old.levels() == new.levels();
    let within = old
        .points()
        .iter()
        .zip(new.points())
        .all(|(a, b)| (a.eto - b.eto).abs() <= threshold_s);
    if same_shape && within {
        ChangeClass::Small
    } else {
        ChangeClass::ClearanceRequired
    }
}
