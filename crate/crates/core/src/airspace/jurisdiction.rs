//! FIR containment on plate-carrée coordinates.
//!
//! Polygons are treated as planar in (lon, lat); boundaries count as inside
//! and ties between FIRs go to the lexicographically smallest eASP id.
//! Polygons must stay clear of the antimeridian.

use serde::{Deserialize, Serialize};

use crate::geo::GeoPoint;
use crate::trajectory::Trajectory4D;

const EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FirRegion {
    pub easp_id: String,
    pub polygon: Vec<GeoPoint>,
}

type Xy = (f64, f64);

fn xy(p: &GeoPoint) -> Xy {
    (p.lon(), p.lat())
}

fn cross(o: Xy, a: Xy, b: Xy) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

fn on_segment(p: Xy, a: Xy, b: Xy) -> bool {
    let len = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
    if cross(a, b, p).abs() > EPS * len.max(1.0) {
        return false;
    }
    p.0 >= a.0.min(b.0) - EPS && p.0 <= a.0.max(b.0) + EPS && p.1 >= a.1.min(b.1) - EPS && p.1 <= a.1.max(b.1) + EPS
}

impl FirRegion {
    fn edges(&self) -> impl Iterator<Item = (Xy, Xy)> + '_ {
        let n = self.polygon.len();
        (0..n).map(move |i| (xy(&self.polygon[i]), xy(&self.polygon[(i + 1) % n])))
    }

    pub fn on_boundary(&self, p: &GeoPoint) -> bool {
        let q = xy(p);
        self.edges().any(|(a, b)| on_segment(q, a, b))
    }

    /// Winding-number test, boundary inclusive.
    pub fn contains(&self, p: &GeoPoint) -> bool {
        if self.on_boundary(p) {
            return true;
        }
        self.strictly_contains(p)
    }

    fn strictly_contains(&self, p: &GeoPoint) -> bool {
        let q = xy(p);
        let mut wn = 0i32;
        for (a, b) in self.edges() {
            if a.1 <= q.1 {
                if b.1 > q.1 && cross(a, b, q) > 0.0 {
                    wn += 1;
                }
            } else if b.1 <= q.1 && cross(a, b, q) < 0.0 {
                wn -= 1;
            }
        }
        wn != 0
    }

    pub fn strictly_inside(&self, p: &GeoPoint) -> bool {
        !self.on_boundary(p) && self.strictly_contains(p)
    }

    /// Problems with the polygon itself: too few vertices or self-intersection.
    pub fn geometry_problem(&self) -> Option<String> {
        let n = self.polygon.len();
        if n < 3 {
            return Some(format!("FIR {} has {} vertices, need at least 3", self.easp_id, n));
        }
        let edges: Vec<_> = self.edges().collect();
        for i in 0..n {
            for j in i + 1..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if adjacent {
                    continue;
                }
                if segments_touch(edges[i], edges[j]) {
                    return Some(format!("FIR {} polygon self-intersects (edges {i} and {j})", self.easp_id));
                }
            }
        }
        let area: f64 = edges.iter().map(|(a, b)| a.0 * b.1 - b.0 * a.1).sum();
        if area.abs() < EPS {
            return Some(format!("FIR {} polygon is degenerate", self.easp_id));
        }
        None
    }

    fn centroid(&self) -> GeoPoint {
        let n = self.polygon.len() as f64;
        let lat = self.polygon.iter().map(|p| p.lat()).sum::<f64>() / n;
        let lon = self.polygon.iter().map(|p| p.lon()).sum::<f64>() / n;
        GeoPoint::new(lat, lon).expect("centroid of valid points")
    }

    /// True when the interiors of two polygons overlap (shared boundaries allowed).
    pub fn overlaps(&self, other: &FirRegion) -> bool {
        for (a, b) in self.edges() {
            for (c, d) in other.edges() {
                if segments_cross_properly((a, b), (c, d)) {
                    return true;
                }
            }
        }
        self.polygon.iter().any(|p| other.strictly_inside(p))
            || other.polygon.iter().any(|p| self.strictly_inside(p))
            || other.strictly_inside(&self.centroid())
            || self.strictly_inside(&other.centroid())
    }
}

fn segments_touch(s: (Xy, Xy), t: (Xy, Xy)) -> bool {
    segments_cross_properly(s, t) || on_segment(t.0, s.0, s.1) || on_segment(t.1, s.0, s.1) || on_segment(s.0, t.0, t.1) || on_segment(s.1, t.0, t.1)
}

fn segments_cross_properly((a, b): (Xy, Xy), (c, d): (Xy, Xy)) -> bool {
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    ((d1 > EPS && d2 < -EPS) || (d1 < -EPS && d2 > EPS)) && ((d3 > EPS && d4 < -EPS) || (d3 < -EPS && d4 > EPS))
}

/// Parameter along `a→b` where it crosses `c→d`, if it does.
fn crossing_param(a: Xy, b: Xy, c: Xy, d: Xy) -> Option<f64> {
    let r = (b.0 - a.0, b.1 - a.1);
    let s = (d.0 - c.0, d.1 - c.1);
    let denom = r.0 * s.1 - r.1 * s.0;
    if denom.abs() < 1e-15 {
        return None;
    }
    let t = ((c.0 - a.0) * s.1 - (c.1 - a.1) * s.0) / denom;
    let u = ((c.0 - a.0) * r.1 - (c.1 - a.1) * r.0) / denom;
    ((0.0..=1.0).contains(&t) && (-EPS..=1.0 + EPS).contains(&u)).then_some(t)
}

/// Smallest eASP id among FIRs containing `pos`.
pub fn controlling_easp_in<'a>(firs: &'a [FirRegion], pos: &GeoPoint) -> Option<&'a str> {
    firs.iter()
        .filter(|f| f.contains(pos))
        .map(|f| f.easp_id.as_str())
        .min()
}

/// eASPs whose FIRs the rest of the trajectory enters, in encounter order,
/// excluding the one controlling the position at `t_now`.
pub fn downstream_easps_in(firs: &[FirRegion], traj: &Trajectory4D, t_now: f64) -> Vec<String> {
    let start = traj.position_at(t_now);
    let current = controlling_easp_in(firs, &start).map(str::to_owned);
    let mut path = vec![start];
    path.extend(traj.points().iter().filter(|p| p.eto > t_now).map(|p| p.position));

    let mut out: Vec<String> = Vec::new();
    let mut visit = |p: &GeoPoint| {
        if let Some(id) = controlling_easp_in(firs, p) {
            if current.as_deref() != Some(id) && !out.iter().any(|o| o == id) {
                out.push(id.to_owned());
            }
        }
    };
    for w in path.windows(2) {
        let (a, b) = (xy(&w[0]), xy(&w[1]));
        let mut ts = vec![0.0, 1.0];
        for f in firs {
            for (c, d) in f.edges() {
                if let Some(t) = crossing_param(a, b, c, d) {
                    ts.push(t);
                }
            }
        }
        ts.sort_by(f64::total_cmp);
        ts.dedup_by(|x, y| (*x - *y).abs() < 1e-12);
        for pair in ts.windows(2) {
            let mid = w[0].lerp(&w[1], 0.5 * (pair[0] + pair[1]));
            visit(&mid);
        }
    }
    if path.len() == 1 {
        visit(&path[0]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn rect(id: &str, lat0: f64, lon0: f64, lat1: f64, lon1: f64) -> FirRegion {
        let g = |a, b| GeoPoint::new(a, b).unwrap();
        FirRegion {
            easp_id: id.into(),
            polygon: vec![g(lat0, lon0), g(lat0, lon1), g(lat1, lon1), g(lat1, lon0)],
        }
    }

    #[test]
    fn containment_and_boundaries() {
        let a = rect("EASP-A", 0.0, 0.0, 10.0, 10.0);
        assert!(a.contains(&GeoPoint::new(5.0, 5.0).unwrap()));
        assert!(a.contains(&GeoPoint::new(10.0, 5.0).unwrap()));
        assert!(!a.contains(&GeoPoint::new(11.0, 5.0).unwrap()));
        assert!(!a.strictly_inside(&GeoPoint::new(10.0, 5.0).unwrap()));
    }

    #[test]
    fn self_intersection_detected() {
        let g = |a, b| GeoPoint::new(a, b).unwrap();
        let bow = FirRegion {
            easp_id: "X".into(),
            polygon: vec![g(0.0, 0.0), g(10.0, 10.0), g(0.0, 10.0), g(10.0, 0.0)],
        };
        assert!(bow.geometry_problem().is_some());
        assert!(rect("Y", 0.0, 0.0, 1.0, 1.0).geometry_problem().is_none());
    }

    #[test]
    fn overlap_detection() {
        let a = rect("A", 0.0, 0.0, 10.0, 10.0);
        let b = rect("B", 0.0, 10.0, 10.0, 20.0);
        let c = rect("C", 5.0, 5.0, 15.0, 15.0);
        assert!(!a.overlaps(&b));
        assert!(a.overlaps(&c));
        assert!(a.overlaps(&a.clone()));
    }

    #[test]
    fn tie_break_smallest_id() {
        let firs = vec![rect("EASP-B", 0.0, 10.0, 10.0, 20.0), rect("EASP-A", 0.0, 0.0, 10.0, 10.0)];
        let p = GeoPoint::new(5.0, 10.0).unwrap();
        assert_eq!(controlling_easp_in(&firs, &p), Some("EASP-A"));
    }
}
