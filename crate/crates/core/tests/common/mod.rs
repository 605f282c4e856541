//! Seeded generators shared by the optimizer oracle tests.
#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tbo_foc::airspace::{
    AirspaceModel, AirwaySegment, CapScope, ConstraintRule, FlowPreference, LevelCap, NoParams, RawAirspace, RuleKind,
    SegmentRef, Severity, Waypoint, WeatherGrid,
};
use tbo_foc::geo::{great_circle_nm, GeoPoint, WindVector};
use tbo_foc::perf::{AircraftPerformanceModel, CruiseEntry, FlightLevel, MassBracket, PerformanceSpec};

pub fn fl(v: u32) -> FlightLevel {
    FlightLevel::new(v).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Performance table over `levels`. With `brackets == 1` costs do not depend
/// on mass; with more, brackets tile the mass range.
pub fn random_perf(r: &mut ChaCha8Rng, levels: &[FlightLevel], brackets: usize) -> AircraftPerformanceModel {
    let (lo, hi) = (60_000.0, 240_000.0);
    let width = (hi - lo) / brackets as f64;
    let mass_brackets: Vec<MassBracket> = (0..brackets)
        .map(|b| MassBracket {
            min_kg: lo + width * b as f64,
            max_kg: lo + width * (b + 1) as f64,
        })
        .collect();
    let mut entries = vec![];
    for &l in levels {
        let tas = r.gen_range(420.0..500.0);
        for b in 0..brackets {
            entries.push(CruiseEntry {
                level: l,
                bracket: b,
                tas_kt: tas,
                fuel_flow_kg_h: r.gen_range(4000.0..7000.0) + 400.0 * b as f64,
            });
        }
    }
    let climb = r.gen_range(20.0..120.0);
    PerformanceSpec {
        type_code: "RND".into(),
        levels: levels.to_vec(),
        mass_brackets,
        entries,
        climb_cost_kg_per_kft: climb,
        descent_credit_kg_per_kft: r.gen_range(0.0..=climb),
        min_mass_kg: lo,
        max_mass_kg: hi,
    }
    .build()
    .unwrap()
}

/// Smooth random winds of at most ~80 kt covering the generator's area.
pub fn random_weather(r: &mut ChaCha8Rng) -> WeatherGrid {
    let (a, b, c) = (r.gen_range(-50.0..50.0), r.gen_range(-30.0..30.0), r.gen_range(0.1..0.8));
    let lats: Vec<f64> = (-5..=5).map(f64::from).collect();
    let lons: Vec<f64> = (-1..=13).map(f64::from).collect();
    WeatherGrid::from_fn(lats, lons, vec![fl(100), fl(450)], 0, |la, lo, l| {
        let k = l.value() as f64 / 400.0;
        WindVector::new(a * k + 20.0 * (c * lo).sin(), b + 15.0 * (c * la).cos()).unwrap()
    })
    .unwrap()
}

pub struct RandomGraph {
    pub model: AirspaceModel,
    pub levels: Vec<FlightLevel>,
    pub origin: String,
    pub destination: String,
}

pub fn wp_id(i: usize) -> String {
    format!("W{i:02}")
}

fn segment(ws: &[Waypoint], a: usize, b: usize, levels: &[FlightLevel], one_way: bool) -> AirwaySegment {
    AirwaySegment {
        from_id: ws[a].id.clone(),
        to_id: ws[b].id.clone(),
        distance_nm: great_circle_nm(&ws[a].position, &ws[b].position),
        allowed_levels: levels.iter().copied().collect(),
        one_way,
    }
}

/// A random airway graph with at most `max_nodes` nodes and `max_levels`
/// levels. With `rules`, adds random constraints of every kind.
pub fn random_graph(r: &mut ChaCha8Rng, max_nodes: usize, max_levels: usize, rules: bool) -> RandomGraph {
    let n = r.gen_range(3..=max_nodes);
    let nl = r.gen_range(1..=max_levels);
    let mut pool: Vec<u32> = (28..=40).step_by(2).map(|x| x * 10).collect();
    pool.shuffle(r);
    let mut levels: Vec<FlightLevel> = pool[..nl].iter().map(|&v| fl(v)).collect();
    levels.sort();
    let ws: Vec<Waypoint> = (0..n)
        .map(|i| Waypoint {
            id: wp_id(i),
            position: GeoPoint::new(r.gen_range(-4.0..4.0), r.gen_range(0.0..12.0)).unwrap(),
            published: i == 0 || i == n - 1 || r.gen_bool(0.7),
        })
        .collect();
    let mut segments = vec![];
    let mut seen = std::collections::BTreeSet::new();
    let mut add = |segments: &mut Vec<AirwaySegment>, r: &mut ChaCha8Rng, a: usize, b: usize| {
        if a == b || !seen.insert((a.min(b), a.max(b))) {
            return;
        }
        let mut allowed: Vec<FlightLevel> = levels.iter().copied().filter(|_| r.gen_bool(0.75)).collect();
        if allowed.is_empty() {
            allowed.push(*levels.choose(r).unwrap());
        }
        let one_way = r.gen_bool(0.15);
        segments.push(segment(&ws, a, b, &allowed, one_way));
    };
    // A random spanning path keeps most instances connected.
    let mut order: Vec<usize> = (0..n).collect();
    order[1..].shuffle(r);
    for w in order.windows(2) {
        if r.gen_bool(0.9) {
            add(&mut segments, r, w[0], w[1]);
        }
    }
    let extra = r.gen_range(0..=n * 2);
    for _ in 0..extra {
        let (a, b) = (r.gen_range(0..n), r.gen_range(0..n));
        add(&mut segments, r, a, b);
    }
    let origin = wp_id(0);
    let destination = wp_id(n - 1);
    let mut rule_list = vec![];
    if rules && !segments.is_empty() {
        let pick = |r: &mut ChaCha8Rng| segments.choose(r).map(|s| SegmentRef::new(&s.from_id, &s.to_id)).unwrap();
        let mut k = 0;
        let mut push = |kind: RuleKind, r: &mut ChaCha8Rng| {
            k += 1;
            rule_list.push(ConstraintRule {
                id: format!("R{k}"),
                severity: if r.gen_bool(0.5) { Severity::Hard } else { Severity::Discretionary },
                kind,
                message_template: "{rule} violated at {segment}".into(),
                active_window: if r.gen_bool(0.3) {
                    let a = r.gen_range(0..3000);
                    Some([a, a + r.gen_range(300..3000)])
                } else {
                    None
                },
                actionable: true,
                enabled: true,
            });
        };
        if r.gen_bool(0.5) {
            let s = pick(r);
            push(RuleKind::SegmentClosed(s), r);
        }
        if r.gen_bool(0.5) {
            let cap = *levels.choose(r).unwrap();
            let scope = CapScope::Segments((0..r.gen_range(1..4)).map(|_| pick(r)).collect());
            push(RuleKind::LevelCap(LevelCap { max_level: cap, scope }), r);
        }
        if r.gen_bool(0.4) {
            let probe = AirspaceModel::from_raw(RawAirspace {
                waypoints: ws.clone(),
                segments: segments.clone(),
                firs: vec![],
                rules: vec![],
                weather: None,
            })
            .expect("generated airspace is valid");
            let mut triples = vec![];
            for s in &segments {
                for (a, b) in [(&s.from_id, &s.to_id), (&s.to_id, &s.from_id)] {
                    if probe.segment(a, b).is_none() {
                        continue;
                    }
                    for (v, _) in probe.neighbors(a) {
                        if probe.segment(v, b).is_some() {
                            triples.push((a.clone(), b.clone(), v.clone()));
                        }
                    }
                }
            }
            if let Some((from, to, via)) = triples.choose(r).cloned() {
                push(RuleKind::FlowPreference(FlowPreference { from, to, via: vec![via] }), r);
            }
        }
        if r.gen_bool(0.5) {
            push(RuleKind::VcpPlacement(NoParams {}), r);
        }
        if r.gen_bool(0.5) {
            push(RuleKind::CruiseChangeOrder(NoParams {}), r);
        }
    }
    let weather = r.gen_bool(0.5).then(|| random_weather(r));
    let model = AirspaceModel::from_raw(RawAirspace {
        waypoints: ws,
        segments,
        firs: vec![],
        rules: rule_list,
        weather,
    })
    .expect("generated airspace is valid");
    RandomGraph {
        model,
        levels,
        origin,
        destination,
    }
}
