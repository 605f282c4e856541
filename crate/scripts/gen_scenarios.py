#!/usr/bin/env python3
"""Generate the bundled scenarios under crates/core/scenarios/.

The output is deterministic: running the script twice produces identical
files. Distances use the simulator's sphere (1 NM = 1 arc-minute).
"""

import json
import math
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "crates" / "core" / "scenarios"
NM_PER_DEG = 60.0


# ---------------------------------------------------------------- geometry

def to_vec(lat, lon):
    la, lo = math.radians(lat), math.radians(lon)
    return (math.cos(la) * math.cos(lo), math.cos(la) * math.sin(lo), math.sin(la))


def from_vec(v):
    x, y, z = v
    return math.degrees(math.atan2(z, math.hypot(x, y))), math.degrees(math.atan2(y, x))


def gc_nm(a, b):
    va, vb = to_vec(*a), to_vec(*b)
    dot = max(-1.0, min(1.0, sum(p * q for p, q in zip(va, vb))))
    return math.degrees(math.acos(dot)) * NM_PER_DEG


def slerp(a, b, f):
    va, vb = to_vec(*a), to_vec(*b)
    omega = math.acos(max(-1.0, min(1.0, sum(p * q for p, q in zip(va, vb)))))
    if omega < 1e-12:
        return a
    s = math.sin(omega)
    w1, w2 = math.sin((1 - f) * omega) / s, math.sin(f * omega) / s
    return from_vec(tuple(w1 * p + w2 * q for p, q in zip(va, vb)))


def bearing(a, b):
    p1, p2 = math.radians(a[0]), math.radians(b[0])
    dl = math.radians(b[1] - a[1])
    y = math.sin(dl) * math.cos(p2)
    x = math.cos(p1) * math.sin(p2) - math.sin(p1) * math.cos(p2) * math.cos(dl)
    return math.degrees(math.atan2(y, x)) % 360.0


def destination(a, brg_deg, dist_nm):
    d = math.radians(dist_nm / NM_PER_DEG)
    p1, l1, t = math.radians(a[0]), math.radians(a[1]), math.radians(brg_deg)
    p2 = math.asin(math.sin(p1) * math.cos(d) + math.cos(p1) * math.sin(d) * math.cos(t))
    l2 = l1 + math.atan2(math.sin(t) * math.sin(d) * math.cos(p1), math.cos(d) - math.sin(p1) * math.sin(p2))
    return math.degrees(p2), (math.degrees(l2) + 540.0) % 360.0 - 180.0


def r6(x):
    return round(x, 6)


def pos(p):
    return {"lat": r6(p[0]), "lon": r6(p[1])}


class Airspace:
    def __init__(self):
        self.waypoints = {}
        self.order = []
        self.segments = []
        self.firs = []
        self.rules = []
        self.weather = None

    def wp(self, wid, p, published=True):
        assert wid not in self.waypoints, wid
        self.waypoints[wid] = {"id": wid, "position": pos(p), "published": published}
        self.order.append(wid)
        return wid

    def point(self, wid):
        w = self.waypoints[wid]["position"]
        return (w["lat"], w["lon"])

    def seg(self, a, b, levels, one_way=False):
        s = {
            "from_id": a,
            "to_id": b,
            "distance_nm": round(gc_nm(self.point(a), self.point(b)), 3),
            "allowed_levels": sorted(levels),
        }
        if one_way:
            s["one_way"] = True
        self.segments.append(s)

    def fir(self, easp, corners):
        self.firs.append({"easp_id": easp, "polygon": [pos(c) for c in corners]})

    def to_json(self):
        out = {
            "waypoints": [self.waypoints[w] for w in self.order],
            "segments": self.segments,
            "firs": self.firs,
            "rules": self.rules,
        }
        if self.weather is not None:
            out["weather"] = self.weather
        return out


def band_fir(easp, lat0, lat1, lon0, lon1):
    """Counter-clockwise lat/lon box."""
    return easp, [(lat0, lon0), (lat0, lon1), (lat1, lon1), (lat1, lon0)]


def weather_grid(lats, lons, levels, wind):
    u, v = [], []
    for la in lats:
        ur, vr = [], []
        for lo in lons:
            cells = [wind(la, lo, l) for l in levels]
            ur.append([round(c[0], 2) for c in cells])
            vr.append([round(c[1], 2) for c in cells])
        u.append(ur)
        v.append(vr)
    return {"lats": lats, "lons": lons, "levels": levels, "u": u, "v": v, "valid_time": 0}


def rule(rid, severity, kind, params, message, actionable=True, enabled=True, window=None):
    r = {
        "id": rid,
        "severity": severity,
        "kind": kind,
        "params": params,
        "message_template": message,
        "actionable": actionable,
        "enabled": enabled,
    }
    if window is not None:
        r["active_window"] = window
    return r


def placement_rules():
    return [
        rule("R1", "HARD", "VCP_PLACEMENT", {},
             "{rule}: vertical change point at {waypoint} is not a published waypoint"),
        rule("R2", "HARD", "CRUISE_CHANGE_ORDER", {},
             "{rule}: cruise level change at {waypoint} conflicts with the top of climb"),
    ]


def write(name, doc):
    OUT.mkdir(parents=True, exist_ok=True)
    (OUT / name).write_text(json.dumps(doc, indent=1) + "\n")


# ---------------------------------------------------------------- aircraft

def widebody(type_code="B77W"):
    """Long-haul twin. The most economical level rises one step (FL20) per
    mass bracket as fuel burns off; flying off-optimum costs a quadratic
    penalty in fuel flow."""
    levels = [290, 310, 330, 350, 370, 390, 410]
    brackets = [(200000, 225000), (225000, 245000), (245000, 265000), (265000, 300000)]
    optimum = {0: 390, 1: 370, 2: 350, 3: 330}
    table = []
    for b, (lo, hi) in enumerate(brackets):
        mid = (lo + hi) / 2
        base = 6300.0 * mid / 250000.0
        for l in levels:
            steps = (l - optimum[b]) / 20.0
            ff = base * (1.0 + 0.013 * steps * steps)
            tas = 478.0 + (l - 290) / 20.0 * 2.0
            table.append({"level": l, "bracket": b, "tas_kt": round(tas, 1), "fuel_flow_kg_h": round(ff, 1)})
    return {
        "type_code": type_code,
        "levels": levels,
        "mass_brackets": [{"min_kg": lo, "max_kg": hi} for lo, hi in brackets],
        "cruise_table": table,
        "climb_cost_kg_per_kft": 60.0,
        "descent_credit_kg_per_kft": 15.0,
        "min_mass_kg": 200000,
        "max_mass_kg": 300000,
    }


# ---------------------------------------------------------------- eddf-sbgr

def eddf_sbgr():
    """Frankfurt to Sao Paulo analog: a 120-waypoint corridor of three
    parallel tracks with cross links. Only a handful of points are
    published, so level changes the ideal profile places freely must be
    deferred to published points in the constrained one."""
    ac = widebody()
    levels = ac["levels"]
    a = Airspace()
    eddf, sbgr = (50.03, 8.57), (-23.43, -46.47)
    n = 41  # stations 0..n on the centre track
    published_centre = {0, 36, n}
    centre = []
    for i in range(n + 1):
        p = slerp(eddf, sbgr, i / n)
        wid = "EDDF" if i == 0 else "SBGR" if i == n else f"C{i:03d}"
        centre.append(a.wp(wid, p, published=i in published_centre))
    sides = {}
    for side, off in (("L", -45.0), ("R", 45.0)):
        ids = []
        for i in range(2, n):
            c = a.point(centre[i])
            nxt = a.point(centre[i + 1])
            p = destination(c, (bearing(c, nxt) + 90.0) % 360.0, off)
            ids.append(a.wp(f"{side}{i:03d}", p, published=False))
        sides[side] = ids
    assert len(a.waypoints) == 120, len(a.waypoints)
    for i in range(n):
        a.seg(centre[i], centre[i + 1], levels)
    for side, ids in sides.items():
        a.seg(centre[1], ids[0], levels)
        for j in range(len(ids) - 1):
            a.seg(ids[j], ids[j + 1], levels)
        a.seg(ids[-1], centre[n], levels)
        for j in range(4, len(ids) - 4, 6):
            a.seg(ids[j], centre[j + 3], levels)
            a.seg(centre[j + 1], ids[j], levels)
    for easp, lat0, lat1 in (("EASP-EUR", 40, 56), ("EASP-AFR", 15, 40), ("EASP-ATL", -5, 15), ("EASP-BRA", -30, -5)):
        a.fir(*band_fir(easp, lat0, lat1, -60, 20))
    a.rules = placement_rules()

    def wind(lat, lon, level):
        # Mid-latitude westerlies aloft in the north, weak trades south of 25N.
        strength = (level - 250) / 160.0
        if lat > 30:
            u = 35.0 * strength * math.exp(-((lat - 45) / 10.0) ** 2)
        else:
            u = -12.0 * math.exp(-((lat - 10) / 15.0) ** 2)
        return u, 3.0 * math.sin(math.radians(lon * 4))

    a.weather = weather_grid(
        [float(x) for x in range(-30, 58, 2)],
        [float(x) for x in range(-60, 25, 5)],
        [270, 350, 430],
        wind,
    )
    profiles = {f["easp_id"]: {"rules": ["R1", "R2"]} for f in a.firs}
    doc = {
        "id": "eddf-sbgr",
        "airspace": a.to_json(),
        "aircraft": [ac],
        "flights": [{
            "operator": "DLH",
            "origin": "EDDF",
            "destination": "SBGR",
            "aircraft": ac["type_code"],
            "departure_time": 79200,
            "takeoff_mass": 282000,
            "initial_level": 330,
        }],
        "latency": {},
        "disruptions": [],
        "validation_profiles": profiles,
        "foc": {"stage1_levels": [330]},
    }
    write("eddf-sbgr.json", doc)


# ---------------------------------------------------------------- europe grid

def narrowbody(type_code="A320"):
    """Short-haul single aisle; best level FL370 light, FL350 heavy."""
    levels = [270, 290, 310, 330, 350, 370, 390]
    brackets = [(50000, 66000), (66000, 79000)]
    optimum = {0: 370, 1: 350}
    table = []
    for b, (lo, hi) in enumerate(brackets):
        base = 2450.0 * ((lo + hi) / 2) / 68000.0
        for l in levels:
            steps = (l - optimum[b]) / 20.0
            table.append({
                "level": l,
                "bracket": b,
                "tas_kt": round(440.0 + (l - 270) / 20.0 * 2.5, 1),
                "fuel_flow_kg_h": round(base * (1.0 + 0.03 * steps * steps), 1),
            })
    return {
        "type_code": type_code,
        "levels": levels,
        "mass_brackets": [{"min_kg": lo, "max_kg": hi} for lo, hi in brackets],
        "cruise_table": table,
        "climb_cost_kg_per_kft": 40.0,
        "descent_credit_kg_per_kft": 10.0,
        "min_mass_kg": 50000,
        "max_mass_kg": 79000,
    }


AIRPORTS = {
    "EGLL": (51.47, -0.45),
    "EHAM": (52.31, 4.76),
    "LFPG": (49.01, 2.55),
    "EDDF": (50.03, 8.57),
    "EDDM": (48.35, 11.79),
    "LSZH": (47.46, 8.55),
    "LIMC": (45.63, 8.72),
    "LOWW": (48.11, 16.57),
    "EKCH": (55.62, 12.65),
    "LFMN": (43.66, 7.22),
}

SYLLABLES_A = "BDGKLMNPRSTV"
SYLLABLES_V = "AEIOU"


def fix_name(i):
    """Five-letter pronounceable fix name, unique per index."""
    c1 = SYLLABLES_A[i % 12]
    v1 = SYLLABLES_V[(i // 12) % 5]
    c2 = SYLLABLES_A[(i * 7 + 3) % 12]
    v2 = SYLLABLES_V[(i * 3 + 1) % 5]
    c3 = "XRLNK"[(i // 60) % 5]
    return c1 + v1 + c2 + v2 + c3


def europe_grid(levels, lat_rows=(44, 46, 48, 50, 52, 54, 56), lon_step=2.5, lon0=-2.5, cols=9,
                unpublished=lambda r, c: (r * 3 + c) % 7 == 0):
    """Route network: a lat/lon lattice of fixes with orthogonal and
    diagonal airways, plus each airport linked to its three nearest fixes."""
    a = Airspace()
    grid = {}
    k = 0
    for r, lat in enumerate(lat_rows):
        for c in range(cols):
            grid[(r, c)] = a.wp(fix_name(k), (float(lat), lon0 + c * lon_step), published=not unpublished(r, c))
            k += 1
    for (r, c), wid in grid.items():
        for dr, dc in ((0, 1), (1, 0), (1, 1), (1, -1)):
            other = grid.get((r + dr, c + dc))
            if other:
                a.seg(wid, other, levels)
    for apt, p in AIRPORTS.items():
        a.wp(apt, p)
        near = sorted(grid.values(), key=lambda w: gc_nm(p, a.point(w)))[:3]
        for w in near:
            a.seg(apt, w, levels)
    return a, grid


def airport_links(a, apt):
    return [s for s in a.segments if apt in (s["from_id"], s["to_id"])]


def shortest_route(a, origin, dest, banned=()):
    import networkx as nx
    g = nx.Graph()
    for s in a.segments:
        if (s["from_id"], s["to_id"]) in banned or (s["to_id"], s["from_id"]) in banned:
            continue
        g.add_edge(s["from_id"], s["to_id"], weight=s["distance_nm"])
    return nx.shortest_path(g, origin, dest, weight="weight")


# ---------------------------------------------------------------- fig5 corpus

def fig5_corpus():
    """29 flights trialled at the Network Manager eASP on their first
    submission: generated plans (minimum fuel, which ignores discretionary
    flow rules, or robust, which pre-enforces them) and plans filed as
    authored by the airline, some of which break hard rules or cannot be
    expressed with published change points."""
    ac = narrowbody()
    levels = ac["levels"]
    a, grid = europe_grid(levels)
    a.fir(*band_fir("EASP-NM", 40, 60, -10, 25))

    caps = []
    for apt in ("EGLL", "EHAM", "LFPG"):
        caps.append(rule(
            f"CAP-{apt}", "DISCRETIONARY", "LEVEL_CAP",
            {"max_level": 310, "scope": {"segments": [{"from": s["from_id"], "to": s["to_id"]} for s in airport_links(a, apt)]}},
            "{rule}: {segment} is level capped; file FL{level} or below",
        ))
    # Flow preference on the direct Zurich - Munich gate, via the northern fix.
    zm = shortest_route(a, "LSZH", "EDDM")
    fp_from, fp_to = zm[1], zm[2]
    via = sorted(
        (w for w in grid.values()
         if any({s["from_id"], s["to_id"]} == {fp_from, w} for s in a.segments)
         and any({s["from_id"], s["to_id"]} == {w, fp_to} for s in a.segments)),
    )[0]
    flow = rule("FP-ZM", "DISCRETIONARY", "FLOW_PREFERENCE", {"from": fp_from, "to": fp_to, "via": [via]},
                "{rule}: traffic via {segment} should route through " + via)
    # Hard rules: a closed airway and a reserved area capped at FL290.
    fm = shortest_route(a, "LFPG", "EDDM")
    closed = (fm[2], fm[3])
    close = rule("CLS-1", "HARD", "SEGMENT_CLOSED", {"from": closed[0], "to": closed[1]},
                 "{rule}: segment {segment} is closed")
    hv = shortest_route(a, "EHAM", "LOWW")
    reserved = [(hv[2], hv[3]), (hv[3], hv[4])]
    mil = rule("TRA-1", "HARD", "LEVEL_CAP",
               {"max_level": 290, "scope": {"segments": [{"from": f, "to": t} for f, t in reserved]}},
               "{rule}: plan enters a reserved area active above FL{level}; coordinate with the airspace management cell", actionable=False)
    a.rules = placement_rules() + caps + [flow, close, mil]
    rule_ids = [r["id"] for r in a.rules]

    flights = []

    def flight(origin, dest, objective="MIN_FUEL", filed=None, mass=68000):
        f = {
            "operator": "OPR" + "ABCDEFGHJKLMNPQRSTUVWXYZ"[len(flights) % 24],
            "origin": origin,
            "destination": dest,
            "aircraft": ac["type_code"],
            "departure_time": 21600 + 600 * len(flights),
            "takeoff_mass": mass,
            "initial_level": 270,
            "objectives": [objective],
        }
        if filed is not None:
            f["filed_plan"] = filed
        flights.append(f)

    def cruise_plan(route, level, toc_level=None):
        return {"route": route, "levels": [270] + [level] * (len(route) - 1)}

    # CONCUR: robust plans out of capped airports, minimum-fuel plans elsewhere.
    for o, d in (("EGLL", "LIMC"), ("EHAM", "LFMN"), ("LFPG", "LOWW"), ("EGLL", "EKCH"), ("LFPG", "EKCH")):
        flight(o, d, "ROBUST")
    for o, d in (("EDDF", "LOWW"), ("LIMC", "EKCH"), ("LFMN", "LOWW"), ("EDDF", "LFMN")):
        flight(o, d)
    # NEGOTIATE: minimum-fuel plans through capped gates or against the flow rule.
    for o, d in (("EGLL", "EDDF"), ("EGLL", "EDDM"), ("EGLL", "LOWW"), ("EGLL", "LSZH"), ("EHAM", "LIMC"),
                 ("EHAM", "EDDM"), ("EHAM", "LFMN"), ("LFPG", "EDDF"), ("LFPG", "LIMC"), ("LFPG", "LOWW"),
                 ("EDDF", "EGLL"), ("EGLL", "LFMN")):
        flight(o, d)
    for o, d in (("LSZH", "EDDM"), ("EHAM", "LSZH")):
        flight(o, d)
    # NON_CONCUR: filed through the closed airway (actionable) and through
    # the reserved area above its cap (not actionable).
    for o, d in (("LFPG", "EDDM"), ("LFPG", "EDDM")):
        flight(o, d, filed=cruise_plan(shortest_route(a, o, d), 350))
    for o, d in (("EHAM", "LOWW"), ("EHAM", "LOWW")):
        flight(o, d, filed=cruise_plan(shortest_route(a, o, d), 330))
    # n/a: top of climb authored at an unpublished fix; a cruise step at the
    # top of climb.
    unpub = {w for w in a.order if not a.waypoints[w]["published"]}
    route = None
    for o, d in (("EDDF", "EKCH"), ("LSZH", "EKCH"), ("EDDM", "EKCH"), ("EDDF", "LIMC"), ("LOWW", "EGLL")):
        r = shortest_route(a, o, d)
        k = next((i for i in (1, 2) if r[i] in unpub and i < len(r) - 2), None)
        if k is not None:
            route = (r, k)
            break
    assert route is not None, "no route with an unpublished fix near the origin"
    r, k = route
    climb = [270, 350] if k == 1 else [270, 310, 350]
    flight(r[0], r[-1], filed={"route": r, "levels": climb + [350] * (len(r) - len(climb))})
    r = next(
        r for r in (shortest_route(a, o, d) for o, d in (("EDDF", "LOWW"), ("EDDM", "LFPG"), ("LSZH", "EHAM")))
        if len(r) > 3 and r[1] not in unpub and r[2] not in unpub
    )
    flight(r[0], r[-1], filed={"route": r, "levels": [270, 370] + [350] * (len(r) - 2)})
    assert len(flights) == 29, len(flights)

    profile = {"rules": rule_ids}
    doc = {
        "id": "fig5-corpus",
        "airspace": a.to_json(),
        "aircraft": [ac],
        "flights": flights,
        "latency": {},
        "disruptions": [],
        "validation_profiles": {"EASP-NM": profile},
        "foc": {"policy": {"negotiate_handling": "ADOPT_PROPOSAL"}},
    }
    write("fig5-corpus.json", doc)


# ---------------------------------------------------------------- leg1 latency

def leg1_latency():
    """Two long-haul legs on the South Atlantic corridor with EPP-like
    downlinks every minute, for the latency statistics."""
    base = json.loads((OUT / "eddf-sbgr.json").read_text())
    f0 = base["flights"][0]
    f0 = dict(f0, initial_level=290, final_level=290)
    back = dict(f0, origin="SBGR", destination="EDDF", operator="TAM", departure_time=f0["departure_time"] + 1800)
    # Every centre-track fix is published here, so both legs climb out and
    # descend at the ends and the downlinks cover all three phases.
    for w in base["airspace"]["waypoints"]:
        if w["id"][0] == "C":
            w["published"] = True
    base["id"] = "leg1-latency"
    base["flights"] = [f0, back]
    write("leg1-latency.json", base)


# ---------------------------------------------------------------- 3-FIR disruption

def disruption_3fir():
    """Eastbound traffic across three FIRs (west, central, east). While
    the flights are airborne an airway ahead of them closes, a
    discretionary level cap in the east is activated, and the closure is
    later lifted again."""
    ac = narrowbody()
    levels = ac["levels"]
    a, grid = europe_grid(levels)
    a.fir(*band_fir("EASP-W", 40, 60, -10, 5))
    a.fir(*band_fir("EASP-C", 40, 60, 5, 12))
    a.fir(*band_fir("EASP-E", 40, 60, 12, 25))
    main_route = shortest_route(a, "EGLL", "LOWW")
    # The airway closed ahead: first hop of the main route that lies wholly
    # in the central FIR.
    def lon(w):
        return a.point(w)[1]
    hop = next((x, y) for x, y in zip(main_route, main_route[1:]) if 6 < lon(x) < 11 and 6 < lon(y) < 11)
    east_segments = [
        {"from": s["from_id"], "to": s["to_id"]}
        for s in a.segments
        if lon(s["from_id"]) >= 12 and lon(s["to_id"]) >= 12
    ]
    a.rules = placement_rules() + [
        rule("CAP-E", "DISCRETIONARY", "LEVEL_CAP", {"max_level": 330, "scope": {"fir": "EASP-E"}},
             "{rule}: {segment} capped at FL{level} for arrival flow management", enabled=False),
        rule("CAP-E2", "DISCRETIONARY", "LEVEL_CAP", {"max_level": 350, "scope": {"segments": east_segments[:4]}},
             "{rule}: {segment} capped at FL{level}"),
    ]
    flights = []
    for i, (o, d) in enumerate((("EGLL", "LOWW"), ("LFPG", "LOWW"), ("EHAM", "LOWW"), ("EGLL", "EDDM"),
                                ("LFPG", "EDDM"), ("EHAM", "EDDM"), ("EGLL", "LOWW"), ("LFPG", "LOWW"))):
        flights.append({
            "operator": "OP" + "ABCDEFGH"[i],
            "origin": o,
            "destination": d,
            "aircraft": ac["type_code"],
            "departure_time": 21600 + 300 * i,
            "takeoff_mass": 70000,
            "initial_level": 270,
        })
    disruptions = [
        {"at": 22800, "action": "CLOSE_SEGMENT", "rule_id": "CLS-C1", "from": hop[0], "to": hop[1]},
        {"at": 24000, "action": "ACTIVATE", "rule_id": "CAP-E"},
        {"at": 26400, "action": "DEACTIVATE", "rule_id": "CLS-C1"},
    ]
    profiles = {
        "EASP-W": {"rules": ["R1", "R2"]},
        "EASP-C": {"rules": ["R1", "R2"]},
        "EASP-E": {"rules": ["R1", "R2", "CAP-E", "CAP-E2"]},
    }
    doc = {
        "id": "disruption-3fir",
        "airspace": a.to_json(),
        "aircraft": [ac],
        "flights": flights,
        "latency": {},
        "disruptions": disruptions,
        "validation_profiles": profiles,
        "foc": {"policy": {"negotiate_handling": "ADOPT_PROPOSAL", "reaction_timer_s": 30}},
    }
    write("disruption-3fir.json", doc)


def main():
    eddf_sbgr()
    fig5_corpus()
    leg1_latency()
    disruption_3fir()


if __name__ == "__main__":
    main()
