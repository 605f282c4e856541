use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{GeoPoint, WindVector};
use crate::perf::FlightLevel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WeatherError {
    #[error("({lat:.4}, {lon:.4}) FL{level} outside the weather grid")]
    OutOfHull { lat: f64, lon: f64, level: FlightLevel },
    #[error("invalid weather grid: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    lats: Vec<f64>,
    lons: Vec<f64>,
    levels: Vec<FlightLevel>,
    /// Indexed `[lat][lon][level]`.
    u: Vec<Vec<Vec<f64>>>,
    v: Vec<Vec<Vec<f64>>>,
    #[serde(default)]
    valid_time: i64,
}

/// Wind on a regular lat/lon/level lattice, interpolated trilinearly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid", into = "RawGrid")]
pub struct WeatherGrid {
    lats: Vec<f64>,
    lons: Vec<f64>,
    levels: Vec<FlightLevel>,
    u: Vec<f64>,
    v: Vec<f64>,
    pub valid_time: i64,
}

fn strictly_increasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[0] < w[1]) && xs.iter().all(|x| x.is_finite())
}

impl TryFrom<RawGrid> for WeatherGrid {
    type Error = WeatherError;

    fn try_from(raw: RawGrid) -> Result<Self, Self::Error> {
        let bad = |m: &str| Err(WeatherError::Invalid(m.to_string()));
        if raw.lats.len() < 2 || raw.lons.len() < 2 || raw.levels.len() < 2 {
            return bad("every axis needs at least two nodes");
        }
        if !strictly_increasing(&raw.lats) || !strictly_increasing(&raw.lons) {
            return bad("lat/lon axes must be strictly increasing");
        }
        if !raw.levels.windows(2).all(|w| w[0] < w[1]) {
            return bad("level axis must be strictly increasing");
        }
        let (nl, no, nv) = (raw.lats.len(), raw.lons.len(), raw.levels.len());
        let flatten = |c: &Vec<Vec<Vec<f64>>>| -> Option<Vec<f64>> {
            if c.len() != nl {
                return None;
            }
            let mut out = Vec::with_capacity(nl * no * nv);
            for row in c {
                if row.len() != no {
                    return None;
                }
                for col in row {
                    if col.len() != nv {
                        return None;
                    }
                    out.extend_from_slice(col);
                }
            }
            Some(out)
        };
        let (Some(u), Some(v)) = (flatten(&raw.u), flatten(&raw.v)) else {
            return bad("wind arrays must match the lattice (no holes)");
        };
        for (a, b) in u.iter().zip(&v) {
            if WindVector::new(*a, *b).is_err() {
                return bad("wind component out of range");
            }
        }
        Ok(Self {
            lats: raw.lats,
            lons: raw.lons,
            levels: raw.levels,
            u,
            v,
            valid_time: raw.valid_time,
        })
    }
}

impl From<WeatherGrid> for RawGrid {
    fn from(g: WeatherGrid) -> Self {
        let (no, nv) = (g.lons.len(), g.levels.len());
        let nest = |flat: &[f64]| {
            flat.chunks(no * nv)
                .map(|row| row.chunks(nv).map(|c| c.to_vec()).collect())
                .collect()
        };
        RawGrid {
            u: nest(&g.u),
            v: nest(&g.v),
            lats: g.lats,
            lons: g.lons,
            levels: g.levels,
            valid_time: g.valid_time,
        }
    }
}

/// Cell index and fractional offset of `x` on `axis`; `None` outside.
fn locate(axis: &[f64], x: f64) -> Option<(usize, f64)> {
    let n = axis.len();
    if !(x >= axis[0] && x <= axis[n - 1]) {
        return None;
    }
    let i = match axis.partition_point(|&a| a <= x) {
        0 => 0,
        k if k >= n => n - 2,
        k => k - 1,
    };
    Some((i, (x - axis[i]) / (axis[i + 1] - axis[i])))
}

impl WeatherGrid {
    /// Build from closures, mainly for fixtures and generators.
    pub fn from_fn(
        lats: Vec<f64>,
        lons: Vec<f64>,
        levels: Vec<FlightLevel>,
        valid_time: i64,
        mut wind: impl FnMut(f64, f64, FlightLevel) -> WindVector,
    ) -> Result<Self, WeatherError> {
        let mut u = Vec::new();
        let mut v = Vec::new();
        for &la in &lats {
            let mut ur = Vec::new();
            let mut vr = Vec::new();
            for &lo in &lons {
                let w: Vec<WindVector> = levels.iter().map(|&l| wind(la, lo, l)).collect();
                ur.push(w.iter().map(|w| w.u).collect());
                vr.push(w.iter().map(|w| w.v).collect());
            }
            u.push(ur);
            v.push(vr);
        }
        RawGrid {
            lats,
            lons,
            levels,
            u,
            v,
            valid_time,
        }
        .try_into()
    }

    fn node(&self, i: usize, j: usize, k: usize) -> (f64, f64) {
        let idx = (i * self.lons.len() + j) * self.levels.len() + k;
        (self.u[idx], self.v[idx])
    }

    pub fn contains(&self, pos: &GeoPoint, level: FlightLevel) -> bool {
        self.wind_at(pos, level).is_ok()
    }

    pub fn max_wind_speed(&self) -> f64 {
        self.u
            .iter()
            .zip(&self.v)
            .map(|(a, b)| a.hypot(*b))
            .fold(0.0, f64::max)
    }

    pub fn wind_at(&self, pos: &GeoPoint, level: FlightLevel) -> Result<WindVector, WeatherError> {
        let out = || WeatherError::OutOfHull {
            lat: pos.lat(),
            lon: pos.lon(),
            level,
        };
        let lv: Vec<f64> = self.levels.iter().map(|l| l.value() as f64).collect();
        let (i, fy) = locate(&self.lats, pos.lat()).ok_or_else(out)?;
        let (j, fx) = locate(&self.lons, pos.lon()).ok_or_else(out)?;
        let (k, fz) = locate(&lv, level.value() as f64).ok_or_else(out)?;
        let mut u = 0.0;
        let mut v = 0.0;
        for (di, wy) in [(0, 1.0 - fy), (1, fy)] {
            for (dj, wx) in [(0, 1.0 - fx), (1, fx)] {
                for (dk, wz) in [(0, 1.0 - fz), (1, fz)] {
                    let w = wy * wx * wz;
                    if w == 0.0 {
                        continue;
                    }
                    let (nu, nv) = self.node(i + di, j + dj, k + dk);
                    u += w * nu;
                    v += w * nv;
                }
            }
        }
        Ok(WindVector { u, v })
    }
}
