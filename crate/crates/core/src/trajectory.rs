//! The shared 4D trajectory model and vertical change point tagging.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::GeoPoint;
use crate::perf::FlightLevel;

const FUEL_TOLERANCE_KG: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrajectoryError {
    #[error("trajectory needs at least two points, got {0}")]
    TooShort(usize),
    #[error("eto at point {0} is not finite")]
    NonFiniteEto(usize),
    #[error("eto does not increase at point {0}")]
    NonIncreasingEto(usize),
    #[error("mass at point {0} must be positive")]
    NonPositiveMass(usize),
    #[error("mass does not decrease at point {0}")]
    NonDecreasingMass(usize),
    #[error("first point may only carry BOC, found {0:?}")]
    BadFirstVcp(VcpKind),
    #[error("total fuel {stored} disagrees with masses ({computed})")]
    FuelMismatch { stored: f64, computed: f64 },
    #[error("{kind:?} at point {index} contradicts the level sequence")]
    InconsistentVcp { index: usize, kind: VcpKind },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum VcpKind {
    Boc,
    Toc,
    Tod,
    Bod,
    CruiseLevelChange,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryPoint4D {
    pub waypoint_id: String,
    pub position: GeoPoint,
    pub level: FlightLevel,
    /// Seconds since the scenario epoch.
    pub eto: f64,
    pub mass: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vcp: Option<VcpKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTrajectory", into = "RawTrajectory")]
pub struct Trajectory4D {
    points: Vec<TrajectoryPoint4D>,
    total_fuel: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTrajectory {
    points: Vec<TrajectoryPoint4D>,
    total_fuel: f64,
}

impl TryFrom<RawTrajectory> for Trajectory4D {
    type Error = TrajectoryError;

    fn try_from(raw: RawTrajectory) -> Result<Self, Self::Error> {
        let t = Trajectory4D::new(raw.points)?;
        if (t.total_fuel - raw.total_fuel).abs() > FUEL_TOLERANCE_KG {
            return Err(TrajectoryError::FuelMismatch {
                stored: raw.total_fuel,
                computed: t.total_fuel,
            });
        }
        Ok(Trajectory4D {
            total_fuel: raw.total_fuel,
            ..t
        })
    }
}

impl From<Trajectory4D> for RawTrajectory {
    fn from(t: Trajectory4D) -> Self {
        RawTrajectory {
            points: t.points,
            total_fuel: t.total_fuel,
        }
    }
}

impl Trajectory4D {
    pub fn new(points: Vec<TrajectoryPoint4D>) -> Result<Self, TrajectoryError> {
        if points.len() < 2 {
            return Err(TrajectoryError::TooShort(points.len()));
        }
        for (i, p) in points.iter().enumerate() {
            if !p.eto.is_finite() {
                return Err(TrajectoryError::NonFiniteEto(i));
            }
            if !(p.mass > 0.0) {
                return Err(TrajectoryError::NonPositiveMass(i));
            }
            if i > 0 {
                if p.eto <= points[i - 1].eto {
                    return Err(TrajectoryError::NonIncreasingEto(i));
                }
                if p.mass >= points[i - 1].mass {
                    return Err(TrajectoryError::NonDecreasingMass(i));
                }
            }
        }
        if let Some(kind) = points[0].vcp.filter(|k| *k != VcpKind::Boc) {
            return Err(TrajectoryError::BadFirstVcp(kind));
        }
        let total_fuel = points[0].mass - points[points.len() - 1].mass;
        Ok(Self { points, total_fuel })
    }

    pub fn points(&self) -> &[TrajectoryPoint4D] {
        &self.points
    }

    pub fn total_fuel(&self) -> f64 {
        self.total_fuel
    }

    pub fn first(&self) -> &TrajectoryPoint4D {
        &self.points[0]
    }

    pub fn last(&self) -> &TrajectoryPoint4D {
        &self.points[self.points.len() - 1]
    }

    pub fn duration_s(&self) -> f64 {
        self.last().eto - self.first().eto
    }

    pub fn waypoint_ids(&self) -> Vec<&str> {
        self.points.iter().map(|p| p.waypoint_id.as_str()).collect()
    }

    pub fn levels(&self) -> Vec<FlightLevel> {
        self.points.iter().map(|p| p.level).collect()
    }

    /// Same trajectory with every ETO moved by `dt` seconds.
    pub fn time_shifted(&self, dt: f64) -> Trajectory4D {
        let points = self
            .points
            .iter()
            .map(|p| TrajectoryPoint4D {
                eto: p.eto + dt,
                ..p.clone()
            })
            .collect();
        Trajectory4D {
            points,
            total_fuel: self.total_fuel,
        }
    }

    /// Index of the segment being flown at `t` (clamped to the ends).
    pub fn segment_at(&self, t: f64) -> usize {
        let n = self.points.len();
        match self.points.iter().position(|p| p.eto > t) {
            None => n - 2,
            Some(0) => 0,
            Some(i) => i - 1,
        }
    }

    /// Plate-carrée position at time `t`, linear in time between points.
    pub fn position_at(&self, t: f64) -> GeoPoint {
        if t <= self.first().eto {
            return self.first().position;
        }
        if t >= self.last().eto {
            return self.last().position;
        }
        let i = self.segment_at(t);
        let (a, b) = (&self.points[i], &self.points[i + 1]);
        a.position.lerp(&b.position, (t - a.eto) / (b.eto - a.eto))
    }

    /// Mass at time `t`, linear between points.
    pub fn mass_at(&self, t: f64) -> f64 {
        if t <= self.first().eto {
            return self.first().mass;
        }
        if t >= self.last().eto {
            return self.last().mass;
        }
        let i = self.segment_at(t);
        let (a, b) = (&self.points[i], &self.points[i + 1]);
        a.mass + (b.mass - a.mass) * (t - a.eto) / (b.eto - a.eto)
    }

    pub fn vcp_index(&self, kind: VcpKind) -> Option<usize> {
        self.points.iter().position(|p| p.vcp == Some(kind))
    }
}

/// Every tagged point in order, checked against the level sequence.
pub fn extract_vcps(traj: &Trajectory4D) -> Result<Vec<(usize, VcpKind)>, TrajectoryError> {
    let pts = traj.points();
    let mut out = Vec::new();
    for (i, p) in pts.iter().enumerate() {
        let Some(kind) = p.vcp else { continue };
        let prev = i.checked_sub(1).map(|j| pts[j].level);
        let next = pts.get(i + 1).map(|q| q.level);
        let ok = match kind {
            VcpKind::Boc => next.is_some_and(|n| n > p.level),
            VcpKind::Toc => prev.is_some_and(|q| q < p.level),
            VcpKind::Tod => next.is_some_and(|n| n < p.level),
            VcpKind::Bod => prev.is_some_and(|q| q > p.level),
            VcpKind::CruiseLevelChange => next.is_some_and(|n| n != p.level),
        };
        if !ok {
            return Err(TrajectoryError::InconsistentVcp { index: i, kind });
        }
        out.push((i, kind));
    }
    Ok(out)
}

/// Where the first point of a level schedule sits in the vertical profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StartPhase {
    /// On the ground at the origin; a climb from here starts at BOC.
    Origin,
    /// Already inside the initial climb.
    Climb,
    /// Past the top of climb.
    Cruise,
}

/// Change points implied by a level schedule (one level per point).
///
/// The initial strictly-climbing run ends at TOC; the final strictly-descending
/// run starts at TOD and ends at BOD; every other point where a level change
/// starts is a cruise level change. A change that begins exactly at the TOC
/// point coincides with it and is left untagged; placement checks detect it
/// from the levels. The first point only ever carries BOC.
#[allow(clippy::needless_range_loop)]
pub fn tag_levels(levels: &[FlightLevel], start: StartPhase) -> Vec<Option<VcpKind>> {
    let n = levels.len();
    let mut tags = vec![None; n];
    if n < 2 {
        return tags;
    }
    let delta = |k: usize| levels[k + 1].cmp(&levels[k]);
    use std::cmp::Ordering::*;

    let mut climb_end = 0;
    if start != StartPhase::Cruise {
        while climb_end < n - 1 && delta(climb_end) == Greater {
            climb_end += 1;
        }
    }
    let toc = match start {
        StartPhase::Origin if climb_end > 0 => {
            tags[0] = Some(VcpKind::Boc);
            Some(climb_end)
        }
        StartPhase::Climb => Some(climb_end),
        _ => None,
    };
    if let Some(c) = toc {
        tags[c] = Some(VcpKind::Toc);
    }

    let mut descent_start = n - 1;
    while descent_start > climb_end && delta(descent_start - 1) == Less {
        descent_start -= 1;
    }
    if descent_start < n - 1 {
        if toc != Some(descent_start) && descent_start > 0 {
            tags[descent_start] = Some(VcpKind::Tod);
        }
        tags[n - 1] = Some(VcpKind::Bod);
    }
    for k in climb_end.max(1)..descent_start.min(n - 1) {
        if toc == Some(k) {
            continue;
        }
        if delta(k) != Equal {
            tags[k] = Some(VcpKind::CruiseLevelChange);
        }
    }
    tags
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perf::test_support::fl;
    use proptest::prelude::*;

    fn traj(levels: &[u32], tags: &[Option<VcpKind>]) -> Trajectory4D {
        let pts = levels
            .iter()
            .enumerate()
            .map(|(i, &l)| TrajectoryPoint4D {
                waypoint_id: format!("W{i}"),
                position: GeoPoint::new(0.0, i as f64).unwrap(),
                level: fl(l),
                eto: 100.0 * i as f64,
                mass: 200_000.0 - 500.0 * i as f64,
                vcp: tags.get(i).copied().flatten(),
            })
            .collect();
        Trajectory4D::new(pts).unwrap()
    }

    #[test]
    fn constant_level_has_no_vcps() {
        assert_eq!(extract_vcps(&traj(&[350, 350, 350], &[])).unwrap(), vec![]);
    }

    #[test]
    fn climb_cruise_descend() {
        use VcpKind::*;
        let t = traj(&[300, 350, 350, 350, 300], &[None, Some(Toc), None, Some(Tod)]);
        assert_eq!(extract_vcps(&t).unwrap(), vec![(1, Toc), (3, Tod)]);
    }

    #[test]
    fn tod_on_climb_is_inconsistent() {
        let t = traj(&[300, 320, 340], &[None, Some(VcpKind::Tod)]);
        assert_eq!(
            extract_vcps(&t),
            Err(TrajectoryError::InconsistentVcp {
                index: 1,
                kind: VcpKind::Tod
            })
        );
    }

    #[test]
    fn constructor_invariants() {
        let mut pts = traj(&[300, 300], &[]).points().to_vec();
        pts[1].mass = pts[0].mass;
        assert_eq!(Trajectory4D::new(pts.clone()), Err(TrajectoryError::NonDecreasingMass(1)));
        pts[1].mass = 1.0;
        pts[1].eto = pts[0].eto;
        assert_eq!(Trajectory4D::new(pts), Err(TrajectoryError::NonIncreasingEto(1)));
        assert_eq!(Trajectory4D::new(vec![]), Err(TrajectoryError::TooShort(0)));
    }

    #[test]
    fn first_point_only_boc() {
        let mut pts = traj(&[300, 320], &[]).points().to_vec();
        pts[0].vcp = Some(VcpKind::Toc);
        assert_eq!(Trajectory4D::new(pts), Err(TrajectoryError::BadFirstVcp(VcpKind::Toc)));
    }

    #[test]
    fn serde_rejects_fuel_mismatch() {
        let t = traj(&[300, 300, 300], &[]);
        let mut v = serde_json::to_value(&t).unwrap();
        v["total_fuel"] = serde_json::json!(t.total_fuel() + 1.0);
        assert!(serde_json::from_value::<Trajectory4D>(v).is_err());
        let back: Trajectory4D = serde_json::from_value(serde_json::to_value(&t).unwrap()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn tagging_full_profile() {
        use VcpKind::*;
        let lv: Vec<_> = [0, 300, 340, 340, 360, 360, 200, 0].map(fl).to_vec();
        let tags = tag_levels(&lv, StartPhase::Origin);
        assert_eq!(
            tags,
            vec![Some(Boc), None, Some(Toc), Some(CruiseLevelChange), None, Some(Tod), None, Some(Bod)]
        );
    }

    #[test]
    fn tagging_step_at_toc_left_untagged() {
        use VcpKind::*;
        let lv: Vec<_> = [0, 340, 320, 320, 0].map(fl).to_vec();
        let tags = tag_levels(&lv, StartPhase::Origin);
        assert_eq!(tags, vec![Some(Boc), Some(Toc), None, Some(Tod), Some(Bod)]);
    }

    /// Independent description of the tagging rule used as a property oracle.
    fn oracle_tags(lv: &[u32]) -> Vec<(usize, VcpKind)> {
        let n = lv.len();
        let mut c = 0;
        while c + 1 < n && lv[c + 1] > lv[c] {
            c += 1;
        }
        let mut d = n - 1;
        while d > c && lv[d - 1] > lv[d] {
            d -= 1;
        }
        let mut out = Vec::new();
        for i in 0..n {
            let kind = if c > 0 && i == 0 {
                Some(VcpKind::Boc)
            } else if c > 0 && i == c {
                Some(VcpKind::Toc)
            } else if d < n - 1 && i == d && i > 0 {
                Some(VcpKind::Tod)
            } else if d < n - 1 && i == n - 1 {
                Some(VcpKind::Bod)
            } else if i > c && i < d && lv[i + 1] != lv[i] {
                Some(VcpKind::CruiseLevelChange)
            } else {
                None
            };
            if let Some(k) = kind {
                out.push((i, k));
            }
        }
        out
    }

    proptest! {
        #[test]
        fn schedule_round_trips_through_extract(raw in proptest::collection::vec(0u32..6, 2..10)) {
            let lv: Vec<u32> = raw.iter().map(|r| 300 + 20 * r).collect();
            let levels: Vec<FlightLevel> = lv.iter().map(|&l| fl(l)).collect();
            let tags = tag_levels(&levels, StartPhase::Origin);
            let t = traj(&lv, &tags);
            prop_assert_eq!(extract_vcps(&t).unwrap(), oracle_tags(&lv));
        }
    }
}
