//! Spherical geometry and the wind triangle.
//!
//! The earth is a sphere on which one nautical mile is one arc-minute, so a
//! degree of great circle is exactly 60 NM.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const NM_PER_DEGREE: f64 = 60.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeoError {
    #[error("latitude {0} outside [-90, 90]")]
    Latitude(f64),
    #[error("longitude {0} is not finite")]
    Longitude(f64),
    #[error("wind component {0} kt exceeds 300 kt")]
    WindComponent(f64),
    #[error("no wind-triangle solution: crosswind {crosswind:.2} kt against tas {tas:.2} kt")]
    InfeasibleWind { tas: f64, crosswind: f64 },
}

/// Latitude/longitude in decimal degrees. Longitude is kept in `[-180, 180)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGeoPoint")]
pub struct GeoPoint {
    lat: f64,
    lon: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGeoPoint {
    lat: f64,
    lon: f64,
}

impl TryFrom<RawGeoPoint> for GeoPoint {
    type Error = GeoError;

    fn try_from(raw: RawGeoPoint) -> Result<Self, Self::Error> {
        GeoPoint::new(raw.lat, raw.lon)
    }
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self, GeoError> {
        if !(-90.0..=90.0).contains(&lat) {
            return Err(GeoError::Latitude(lat));
        }
        if !lon.is_finite() {
            return Err(GeoError::Longitude(lon));
        }
        Ok(Self {
            lat,
            lon: normalize_lon(lon),
        })
    }

    pub fn lat(&self) -> f64 {
        self.lat
    }

    pub fn lon(&self) -> f64 {
        self.lon
    }

    /// Straight-line interpolation in plate-carrée coordinates.
    /// Longitude difference is taken the short way round.
    pub fn lerp(&self, other: &GeoPoint, frac: f64) -> GeoPoint {
        let dlon = normalize_lon(other.lon - self.lon);
        GeoPoint {
            lat: self.lat + (other.lat - self.lat) * frac,
            lon: normalize_lon(self.lon + dlon * frac),
        }
    }
}

fn normalize_lon(lon: f64) -> f64 {
    let l = (lon + 180.0).rem_euclid(360.0) - 180.0;
    // rem_euclid can round up to exactly 360 for tiny negative inputs
    if l >= 180.0 {
        l - 360.0
    } else {
        l
    }
}

/// Central angle in radians, via the atan2 form of the Vincenty sphere formula.
/// Arguments are put in a canonical order so the result is exactly symmetric.
fn central_angle(a: &GeoPoint, b: &GeoPoint) -> f64 {
    let (a, b) = if (a.lat, a.lon) <= (b.lat, b.lon) { (a, b) } else { (b, a) };
    let (p1, p2) = (a.lat.to_radians(), b.lat.to_radians());
    let dl = (b.lon - a.lon).to_radians();
    let x = p2.cos() * dl.sin();
    let y = p1.cos() * p2.sin() - p1.sin() * p2.cos() * dl.cos();
    let z = p1.sin() * p2.sin() + p1.cos() * p2.cos() * dl.cos();
    x.hypot(y).atan2(z)
}

pub fn great_circle_nm(a: &GeoPoint, b: &GeoPoint) -> f64 {
    central_angle(a, b).to_degrees() * NM_PER_DEGREE
}

/// Initial great-circle course from `a` to `b`, degrees true in `[0, 360)`.
pub fn initial_bearing(a: &GeoPoint, b: &GeoPoint) -> f64 {
    let (p1, p2) = (a.lat.to_radians(), b.lat.to_radians());
    let dl = (b.lon - a.lon).to_radians();
    let y = dl.sin() * p2.cos();
    let x = p1.cos() * p2.sin() - p1.sin() * p2.cos() * dl.cos();
    y.atan2(x).to_degrees().rem_euclid(360.0)
}

/// Wind in knots: `u` eastward, `v` northward.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WindVector {
    pub u: f64,
    pub v: f64,
}

impl WindVector {
    pub fn new(u: f64, v: f64) -> Result<Self, GeoError> {
        for c in [u, v] {
            if !c.is_finite() || c.abs() > 300.0 {
                return Err(GeoError::WindComponent(c));
            }
        }
        Ok(Self { u, v })
    }

    pub fn calm() -> Self {
        Self::default()
    }

    pub fn speed(&self) -> f64 {
        self.u.hypot(self.v)
    }

    /// Components along and across a track (degrees true). Positive along is a tailwind.
    pub fn decompose(&self, track_deg: f64) -> (f64, f64) {
        let t = track_deg.to_radians();
        let along = self.u * t.sin() + self.v * t.cos();
        let cross = self.u * t.cos() - self.v * t.sin();
        (along, cross)
    }
}

/// Ground speed from the wind triangle: the aircraft crabs into the crosswind,
/// keeping `sqrt(tas² - xwind²)` along track, and the along-track wind adds on top.
pub fn ground_speed(tas: f64, wind: WindVector, track_deg: f64) -> Result<f64, GeoError> {
    let (along, cross) = wind.decompose(track_deg);
    if cross.abs() >= tas {
        return Err(GeoError::InfeasibleWind {
            tas,
            crosswind: cross.abs(),
        });
    }
    let gs = (tas * tas - cross * cross).sqrt() + along;
    if gs <= 0.0 {
        return Err(GeoError::InfeasibleWind {
            tas,
            crosswind: cross.abs(),
        });
    }
    Ok(gs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    fn haversine_nm(a: &GeoPoint, b: &GeoPoint) -> f64 {
        let dlat = (b.lat() - a.lat()).to_radians();
        let dlon = (b.lon() - a.lon()).to_radians();
        let h = (dlat / 2.0).sin().powi(2)
            + a.lat().to_radians().cos() * b.lat().to_radians().cos() * (dlon / 2.0).sin().powi(2);
        2.0 * h.sqrt().asin() * 180.0 / std::f64::consts::PI * 60.0
    }

    #[test]
    fn identity_distance_is_zero() {
        assert_eq!(great_circle_nm(&p(10.0, 20.0), &p(10.0, 20.0)), 0.0);
    }

    #[test]
    fn quarter_equator() {
        assert!((great_circle_nm(&p(0.0, 0.0), &p(0.0, 90.0)) - 5400.0).abs() < 1e-9);
    }

    #[test]
    fn frankfurt_to_guarulhos_matches_haversine() {
        let a = p(50.03, 8.57);
        let b = p(-23.43, -46.47);
        let oracle = haversine_nm(&a, &b);
        assert!((great_circle_nm(&a, &b) - oracle).abs() < 0.1, "{oracle}");
    }

    #[test]
    fn longitude_normalized() {
        assert_eq!(p(0.0, 180.0).lon(), -180.0);
        assert_eq!(p(0.0, -190.0).lon(), 170.0);
        assert!(GeoPoint::new(91.0, 0.0).is_err());
    }

    #[test]
    fn ground_speed_examples() {
        assert_eq!(ground_speed(450.0, WindVector::calm(), 90.0).unwrap(), 450.0);
        let tail = ground_speed(450.0, WindVector::new(50.0, 0.0).unwrap(), 90.0).unwrap();
        assert!((tail - 500.0).abs() < 1e-9);
        let cross = ground_speed(450.0, WindVector::new(0.0, 60.0).unwrap(), 90.0).unwrap();
        let oracle = (450.0f64 * 450.0 - 60.0 * 60.0).sqrt();
        assert!((cross - oracle).abs() < 1e-9);
        assert!((cross - 445.98).abs() < 0.01);
    }

    #[test]
    fn crosswind_at_tas_is_infeasible() {
        let w = WindVector::new(0.0, 300.0).unwrap();
        assert!(matches!(
            ground_speed(250.0, w, 90.0),
            Err(GeoError::InfeasibleWind { .. })
        ));
    }

    #[test]
    fn wind_components_bounded() {
        assert!(WindVector::new(301.0, 0.0).is_err());
    }

    fn arb_point() -> impl Strategy<Value = GeoPoint> {
        (-89.0f64..89.0, -179.0f64..179.0).prop_map(|(a, b)| p(a, b))
    }

    proptest! {
        #[test]
        fn distance_is_a_metric(a in arb_point(), b in arb_point(), c in arb_point()) {
            let ab = great_circle_nm(&a, &b);
            prop_assert!(ab >= 0.0);
            prop_assert_eq!(ab, great_circle_nm(&b, &a));
            prop_assert!(great_circle_nm(&a, &c) <= ab + great_circle_nm(&b, &c) + 1e-9);
        }

        #[test]
        fn tailwind_increases_ground_speed(tas in 200.0f64..550.0, w1 in -100.0f64..100.0, dw in 0.1f64..50.0, track in 0.0f64..360.0) {
            let t = track.to_radians();
            let mk = |s: f64| WindVector::new(s * t.sin(), s * t.cos()).unwrap();
            let g1 = ground_speed(tas, mk(w1), track).unwrap();
            let g2 = ground_speed(tas, mk(w1 + dw), track).unwrap();
            prop_assert!(g2 > g1);
        }
    }
}
