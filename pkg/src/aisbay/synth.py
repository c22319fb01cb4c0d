"""Deterministic synthetic scenarios with machine-readable ground truth.

A scenario scripts a fleet (moorings, moves, absences, transceiver-off
windows) inside a rectangular bay with a main transit area and a cascade
of numbered areas, plus receivers with hard coverage radii and optional
shadow wedges.  generate() emits the NDJSON message stream a provider
would have delivered and, for noise-free scenarios, an expectation of what
a correct processing chain must reconstruct from it (legs, gap verdicts,
stationary periods, transit events, minute-grid count averages).  The
expectations come from a small stand-alone replay of the processing rules,
kept deliberately independent of the pipeline implementation.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import geo
from .geo import KNOT

log = logging.getLogger(__name__)

POS_INTERVAL_S = 60
STATIC_INTERVAL_S = 360

# replay constants mirror the documented processing defaults
_STATIC_SQUARE_M = 100.0
_STATIONARY_KN = 0.5
_SPLIT_GAP_S = 4 * 3600
_SPLIT_DIST_M = 40_000.0
_MERGE_GAP_S = 120
_GAP_MSG_LIMIT = 4
_EDGE_EXCL_S = 3 * 86400


# ---------------------------------------------------------------------------
# Scenario model
# ---------------------------------------------------------------------------


@dataclass
class Wedge:
    azimuth_deg: float
    half_angle_deg: float


@dataclass
class Receiver:
    lat: float
    lon: float
    coverage_m: float | None = None  # None: unlimited
    wedges: list[Wedge] = field(default_factory=list)
    name: str = "rx"
    height_m: float | None = None


@dataclass
class Moor:
    duration_s: int
    off_windows: list[tuple[int, int]] = field(default_factory=list)  # (offset, length)


@dataclass
class Move:
    to_lat: float
    to_lon: float
    speed_kn: float


@dataclass
class Absent:
    exit_lat: float
    exit_lon: float
    speed_kn: float
    dwell_s: int  # time spent at the exit point


@dataclass
class VesselScript:
    mmsi: int
    start_lat: float
    start_lon: float
    phases: list
    ship_type: int | None = None
    gt: float | None = None
    dest: str | None = None


@dataclass
class BayGeometry:
    """Rectangular bay: a southern main transit area plus a cascade of
    numbered bands.  Polygon edges are densified in longitude so the
    great-circle edges stay within centimeters of the parallels."""

    lat_min: float = 34.95
    lat_max: float = 35.70
    lon_min: float = 139.60
    lon_max: float = 140.15
    main_top: float = 35.05
    band_deg: float = 0.05
    n_bands: int = 10
    t0_hours: dict = field(
        default_factory=lambda: {"main": 0.0, "1": 12.0, "default": 48.0}
    )

    def band_bounds(self, i: int) -> tuple[float, float]:
        lo = self.main_top + (i - 1) * self.band_deg
        return lo, lo + self.band_deg

    def t0_of(self, area_id: str) -> float:
        return self.t0_hours.get(area_id, self.t0_hours["default"])

    def area_of(self, lat: float, lon: float) -> str | None:
        """Axis-aligned membership; the replay-side area test."""
        if not (self.lon_min <= lon <= self.lon_max):
            return None
        if self.lat_min <= lat <= self.main_top:
            return "main"
        for i in range(1, self.n_bands + 1):
            lo, hi = self.band_bounds(i)
            if lo <= lat <= hi:
                return str(i)
        return None

    def in_roi(self, lat: float, lon: float) -> bool:
        return (self.lat_min <= lat <= self.lat_max) and (
            self.lon_min <= lon <= self.lon_max
        )

    def _ring(self, lat0, lat1, lon0, lon1, step=0.01) -> list[list[float]]:
        lons = [round(x, 6) for x in np.arange(lon0, lon1, step)] + [lon1]
        ring = [[lon, lat0] for lon in lons]
        ring += [[lon, lat1] for lon in reversed(lons)]
        ring.append([lons[0], lat0])
        return ring

    def roi_geojson(self) -> dict:
        return {
            "type": "FeatureCollection",
            "features": [
                {
                    "type": "Feature",
                    "geometry": {
                        "type": "Polygon",
                        "coordinates": [
                            self._ring(
                                self.lat_min, self.lat_max, self.lon_min, self.lon_max
                            )
                        ],
                    },
                    "properties": {"id": "roi"},
                }
            ],
        }

    def areas_geojson(self) -> dict:
        feats = [
            {
                "type": "Feature",
                "geometry": {
                    "type": "Polygon",
                    "coordinates": [
                        self._ring(self.lat_min, self.main_top, self.lon_min, self.lon_max)
                    ],
                },
                "properties": {"id": "main", "t0_hours": self.t0_of("main")},
            }
        ]
        for i in range(1, self.n_bands + 1):
            lo, hi = self.band_bounds(i)
            feats.append(
                {
                    "type": "Feature",
                    "geometry": {
                        "type": "Polygon",
                        "coordinates": [self._ring(lo, hi, self.lon_min, self.lon_max)],
                    },
                    "properties": {"id": str(i), "t0_hours": self.t0_of(str(i))},
                }
            )
        return {"type": "FeatureCollection", "features": feats}


@dataclass
class Scenario:
    seed: int
    t0: int
    duration_s: int
    geometry: BayGeometry
    receivers: list[Receiver]
    vessels: list[VesselScript]
    pos_interval_s: int = POS_INTERVAL_S
    static_interval_s: int = STATIC_INTERVAL_S
    pos_jitter_m: float = 0.0
    drop_prob: float = 0.0
    speed_max_kn: float = 50.0

    @property
    def window(self) -> tuple[int, int]:
        return (self.t0, self.t0 + self.duration_s)


# ---------------------------------------------------------------------------
# Emission
# ---------------------------------------------------------------------------


def _receivable(scn: Scenario, lats, lons) -> np.ndarray:
    lats = np.atleast_1d(np.asarray(lats, dtype=float))
    lons = np.atleast_1d(np.asarray(lons, dtype=float))
    ok = np.array(
        [scn.geometry.in_roi(la, lo) for la, lo in zip(lats, lons)], dtype=bool
    )
    if not scn.receivers:
        return ok
    heard = np.zeros(lats.shape, dtype=bool)
    for rcv in scn.receivers:
        d, az_fwd, _ = geo.inverse(
            np.full(lats.shape, rcv.lat), np.full(lats.shape, rcv.lon), lats, lons
        )
        d = np.atleast_1d(d)
        az_fwd = np.atleast_1d(az_fwd)
        in_range = np.ones(lats.shape, dtype=bool)
        if rcv.coverage_m is not None:
            in_range = d <= rcv.coverage_m
        blocked = np.zeros(lats.shape, dtype=bool)
        for w in rcv.wedges:
            delta = (az_fwd - w.azimuth_deg + 180.0) % 360.0 - 180.0
            blocked |= np.abs(delta) <= w.half_angle_deg
        heard |= in_range & ~blocked
    return ok & heard


@dataclass
class Emission:
    t: int
    kind: str  # "pos" | "static"
    lat: float
    lon: float
    sog_kn: float | None


def _move_duration(d_m: float, speed_kn: float, tick_s: int) -> int:
    return max(tick_s, int(round(d_m / (speed_kn * KNOT) / tick_s)) * tick_s)


def _emit_vessel(scn: Scenario, script: VesselScript) -> list[Emission]:
    """Simulate one vessel; returns its received reports in time order."""
    out: list[Emission] = []
    t = scn.t0
    lat, lon = script.start_lat, script.start_lon
    t_end = scn.t0 + scn.duration_s

    def emit_statics(t0: int, t1: int, off: list[tuple[int, int]], lat, lon):
        if not _receivable(scn, lat, lon)[0]:
            return
        k = 0
        while True:
            ts = t0 + k * scn.static_interval_s
            k += 1
            if ts >= t1 or ts >= t_end:
                break
            if any(t0 + o <= ts < t0 + o + l for o, l in off):
                continue
            out.append(Emission(ts, "static", lat, lon, None))

    def emit_move(t0: int, lat0, lon0, lat1, lon1, speed_kn: float) -> int:
        if speed_kn > scn.speed_max_kn:
            raise ValueError(
                f"vessel {script.mmsi}: scripted speed {speed_kn} kn exceeds "
                f"{scn.speed_max_kn} kn"
            )
        d = geo.distance(lat0, lon0, lat1, lon1)
        dur = _move_duration(d, speed_kn, scn.pos_interval_s)
        v_eff = round(d / dur / KNOT, 1)
        n = dur // scn.pos_interval_s
        fr = np.arange(n + 1) * scn.pos_interval_s / dur
        pts = geo.slerp_many(geo.to_unit(lat0, lon0), geo.to_unit(lat1, lon1), fr)
        lats, lons = geo.to_latlon(pts)
        lats = np.round(np.atleast_1d(lats), 6)
        lons = np.round(np.atleast_1d(lons), 6)
        ok = _receivable(scn, lats, lons)
        for k in range(n + 1):
            ts = t0 + k * scn.pos_interval_s
            if ts > t_end:
                break
            if ok[k]:
                out.append(Emission(ts, "pos", float(lats[k]), float(lons[k]), v_eff))
        return dur

    for phase in script.phases:
        if t >= t_end:
            break
        if isinstance(phase, Moor):
            emit_statics(t, t + phase.duration_s, phase.off_windows, lat, lon)
            t += phase.duration_s
        elif isinstance(phase, Move):
            dur = emit_move(t, lat, lon, phase.to_lat, phase.to_lon, phase.speed_kn)
            t += dur
            lat, lon = phase.to_lat, phase.to_lon
        elif isinstance(phase, Absent):
            home = (lat, lon)
            dur = emit_move(t, lat, lon, phase.exit_lat, phase.exit_lon, phase.speed_kn)
            t += dur + phase.dwell_s
            dur = emit_move(
                t, phase.exit_lat, phase.exit_lon, home[0], home[1], phase.speed_kn
            )
            t += dur
        else:
            raise TypeError(f"unknown phase {phase!r}")

    out.sort(key=lambda e: (e.t, 0 if e.kind == "pos" else 1))
    return out


def _apply_noise(scn: Scenario, emissions: list[Emission], rng) -> list[Emission]:
    if scn.pos_jitter_m <= 0 and scn.drop_prob <= 0:
        return emissions
    out = []
    for e in emissions:
        if scn.drop_prob > 0 and rng.random() < scn.drop_prob:
            continue
        if scn.pos_jitter_m > 0 and e.kind == "pos":
            az = rng.uniform(0.0, 360.0)
            r = abs(rng.normal(0.0, scn.pos_jitter_m))
            la, lo = geo.direct(e.lat, e.lon, az, r)
            e = Emission(e.t, e.kind, round(la, 6), round(lo, 6), e.sog_kn)
        out.append(e)
    return out


def _iso(t: int) -> str:
    from datetime import datetime, timezone

    return datetime.fromtimestamp(t, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _to_record(script: VesselScript, e: Emission) -> dict:
    if e.kind == "pos":
        return {
            "mmsi": script.mmsi,
            "t": _iso(e.t),
            "lat": e.lat,
            "lon": e.lon,
            "sog": e.sog_kn,
            "kind": "pos",
            "status": 0,
        }
    rec = {"mmsi": script.mmsi, "t": _iso(e.t), "kind": "static"}
    if script.dest is not None:
        rec["dest"] = script.dest
    if script.ship_type is not None:
        rec["type"] = script.ship_type
    return rec


def generate(scenario: Scenario) -> tuple[list[str], dict]:
    """Emit the NDJSON lines and the ground-truth/expectation document.

    Byte-identical for a given scenario (seeded noise included).  The
    rule-replay expectations are only produced for noise-free scenarios.
    """
    rng = np.random.default_rng(scenario.seed)
    per_vessel: dict[int, list[Emission]] = {}
    all_records: list[tuple[int, int, dict]] = []
    for script in scenario.vessels:
        ems = _emit_vessel(scenario, script)
        ems = _apply_noise(scenario, ems, rng)
        per_vessel[script.mmsi] = ems
        for e in ems:
            all_records.append((e.t, script.mmsi, _to_record(script, e)))
    all_records.sort(key=lambda r: (r[0], r[1], r[2]["kind"]))
    lines = [json.dumps(rec, sort_keys=True) for _, _, rec in all_records]

    truth: dict = {
        "window": list(scenario.window),
        "n_messages": len(lines),
        "receivers": [
            {"name": r.name, "lat": r.lat, "lon": r.lon, "height_m": r.height_m}
            for r in scenario.receivers
        ],
        "vessels": {},
    }
    noise_free = scenario.pos_jitter_m == 0 and scenario.drop_prob == 0
    if noise_free:
        for script in scenario.vessels:
            truth["vessels"][str(script.mmsi)] = replay_expectations(
                per_vessel[script.mmsi], scenario
            )
        truth["expected_counts"] = _expected_counts(truth["vessels"], scenario)
    return lines, truth


# ---------------------------------------------------------------------------
# Rule replay (the expectation oracle)
# ---------------------------------------------------------------------------


def _hav_m(lat1, lon1, lat2, lon2) -> float:
    """Plain spherical haversine; deliberately simpler than the pipeline's
    ellipsoidal distances (scenarios keep decisions far from thresholds)."""
    r = 6371008.8
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp = p2 - p1
    dl = math.radians(lon2 - lon1)
    a = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2 * r * math.asin(math.sqrt(a))


def replay_expectations(emissions: list[Emission], scn: Scenario) -> dict:
    """Apply the documented processing rules directly to one vessel's
    received reports; returns expected legs, gaps, periods, and events."""
    g = scn.geometry
    evidence_times = sorted(e.t for e in emissions)

    # static position assignment: nearest position report, earlier on ties
    pos_reports = [(e.t, e.lat, e.lon) for e in emissions if e.kind == "pos"]
    msgs: list[tuple[int, float, float, float | None]] = []  # t, lat, lon, sog
    for e in emissions:
        if e.kind == "pos":
            msgs.append((e.t, e.lat, e.lon, e.sog_kn))
        else:
            best = None
            for pt, plat, plon in pos_reports:
                dt = abs(pt - e.t)
                if best is None or dt < best[0]:
                    best = (dt, plat, plon)
            if best is None or best[0] > _SPLIT_GAP_S:
                continue
            msgs.append((e.t, best[1], best[2], None))
    msgs.sort(key=lambda m: m[0])

    empty = {
        "legs": [],
        "gaps": [],
        "stationary": [],
        "events": [],
        "n_evidence": len(evidence_times),
        "static_removed": False,
    }
    if len(msgs) < 2:
        return empty

    # static-vessel footprint
    lats = [m[1] for m in msgs]
    lons = [m[2] for m in msgs]
    mid = (min(lats) + max(lats)) / 2
    ns = _hav_m(min(lats), lons[0], max(lats), lons[0])
    ew = _hav_m(mid, min(lons), mid, max(lons))
    if ns <= _STATIC_SQUARE_M and ew <= _STATIC_SQUARE_M:
        return {**empty, "static_removed": True}

    # low-speed dedupe: drop repeats of the last retained position
    ded = [msgs[0]]
    for m in msgs[1:]:
        last = ded[-1]
        if m[1] == last[1] and m[2] == last[2] and m[0] - last[0] <= _SPLIT_GAP_S:
            continue
        ded.append(m)
    msgs = ded

    # pair classification and hard breaks
    n = len(msgs)
    breaks = set()
    stationary_pair = []
    for k in range(n - 1):
        dt = msgs[k + 1][0] - msgs[k][0]
        dd = _hav_m(msgs[k][1], msgs[k][2], msgs[k + 1][1], msgs[k + 1][2])
        if dt > _SPLIT_GAP_S or dd > _SPLIT_DIST_M:
            breaks.add(k)
        stationary_pair.append(dd / max(dt, 1) < _STATIONARY_KN * KNOT)

    # track entered and left the main area: cut at the largest gap
    in_main = [g.area_of(m[1], m[2]) == "main" for m in msgs]
    i = 0
    while i < n:
        if not in_main[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and in_main[j + 1]:
            j += 1
        if i > 0 and j < n - 1:
            gaps_kt = [(msgs[k + 1][0] - msgs[k][0], -k) for k in range(i - 1, j + 1)]
            breaks.add(-max(gaps_kt)[1])
        i = j + 1

    # runs -> legs (moving pairs) with the transit-area discard
    legs: list[list[int]] = []
    run_start, run_moving = 0, None
    for k in range(n - 1):
        moving = not stationary_pair[k]
        if k in breaks:
            if run_moving:
                legs.append(list(range(run_start, k + 1)))
            run_start, run_moving = k + 1, None
            continue
        if run_moving is None:
            run_moving = moving
        elif moving != run_moving:
            if run_moving:
                legs.append(list(range(run_start, k + 1)))
            run_start, run_moving = k, moving
    if run_moving:
        legs.append(list(range(run_start, n)))
    legs = [idx for idx in legs if not all(in_main[i] for i in idx)]

    # short-gap merge
    merged: list[list[int]] = []
    for idx in legs:
        if merged and msgs[idx[0]][0] - msgs[merged[-1][-1]][0] <= _MERGE_GAP_S:
            merged[-1] = merged[-1] + idx
        else:
            merged.append(idx)
    legs = merged

    def leg_info(idx: list[int]) -> dict:
        sogs = [msgs[i][3] for i in idx if msgs[i][3] is not None]
        return {
            "start": msgs[idx[0]][0],
            "end": msgs[idx[-1]][0],
            "start_pos": [msgs[idx[0]][1], msgs[idx[0]][2]],
            "end_pos": [msgs[idx[-1]][1], msgs[idx[-1]][2]],
            "v_entry": sogs[0] if sogs else 0.0,
            "v_exit": sogs[-1] if sogs else 0.0,
        }

    leg_docs = [leg_info(idx) for idx in legs]
    leg_members = {i for idx in legs for i in idx}

    gaps = []
    events = []
    stationary = []

    def evidence_between(a: int, b: int) -> int:
        return sum(1 for t in evidence_times if a < t < b)

    for prev, nxt in zip(leg_docs[:-1], leg_docs[1:]):
        thr = None
        for pos in (prev["end_pos"], nxt["start_pos"]):
            aid = g.area_of(*pos)
            if aid is None:
                continue
            v = max(prev["v_exit"], nxt["v_entry"])
            t = math.inf if v == 0 else g.t0_of(aid) * (v / 10.0) ** -4
            thr = t if thr is None else min(thr, t)
        n_msg = evidence_between(prev["end"], nxt["start"])
        dur_h = (nxt["start"] - prev["end"]) / 3600.0
        verdict = (
            "absent"
            if thr is not None and n_msg < _GAP_MSG_LIMIT and dur_h > thr
            else "moored"
        )
        gaps.append(
            {
                "start": prev["end"],
                "end": nxt["start"],
                "verdict": verdict,
                "n_messages": n_msg,
            }
        )
        if verdict == "moored":
            stationary.append(
                {"start": prev["end"], "end": nxt["start"], "anchor": prev["end_pos"]}
            )
        else:
            events.append(
                {"t": prev["end"], "dir": "out",
                 "lat": prev["end_pos"][0], "lon": prev["end_pos"][1]}
            )
            events.append(
                {"t": nxt["start"], "dir": "in",
                 "lat": nxt["start_pos"][0], "lon": nxt["start_pos"][1]}
            )

    if leg_docs:
        head_ev = [t for t in evidence_times if t < leg_docs[0]["start"]]
        if head_ev:
            stationary.insert(
                0,
                {
                    "start": head_ev[0],
                    "end": leg_docs[0]["start"],
                    "anchor": leg_docs[0]["start_pos"],
                },
            )
        elif g.area_of(*leg_docs[0]["start_pos"]) == "main":
            events.insert(
                0,
                {"t": leg_docs[0]["start"], "dir": "in",
                 "lat": leg_docs[0]["start_pos"][0],
                 "lon": leg_docs[0]["start_pos"][1]},
            )
        tail_ev = [t for t in evidence_times if t > leg_docs[-1]["end"]]
        if tail_ev:
            stationary.append(
                {
                    "start": leg_docs[-1]["end"],
                    "end": tail_ev[-1],
                    "anchor": leg_docs[-1]["end_pos"],
                }
            )
        elif g.area_of(*leg_docs[-1]["end_pos"]) == "main":
            events.append(
                {"t": leg_docs[-1]["end"], "dir": "out",
                 "lat": leg_docs[-1]["end_pos"][0],
                 "lon": leg_docs[-1]["end_pos"][1]}
            )
    elif msgs:
        stationary.append(
            {
                "start": evidence_times[0] if evidence_times else msgs[0][0],
                "end": evidence_times[-1] if evidence_times else msgs[-1][0],
                "anchor": [msgs[0][1], msgs[0][2]],
            }
        )

    return {
        "legs": leg_docs,
        "gaps": gaps,
        "stationary": stationary,
        "events": sorted(events, key=lambda e: (e["t"], e["dir"])),
        "n_evidence": len(evidence_times),
        "static_removed": False,
    }


def _expected_counts(vessels: dict, scn: Scenario) -> dict:
    """Minute-grid averages from the replayed timelines."""
    t0, t1 = scn.window
    n = (t1 - t0) // 60
    moving = np.zeros(n, dtype=np.int32)
    stationary = np.zeros(n, dtype=np.int32)
    for doc in vessels.values():
        status = np.zeros(n, dtype=np.int8)

        def fill(a, b, value):
            i0 = max(0, math.ceil((a - t0) / 60))
            i1 = min(n - 1, math.floor((b - t0) / 60))
            if i1 >= i0:
                status[i0 : i1 + 1] = np.maximum(status[i0 : i1 + 1], value)

        for sp in doc["stationary"]:
            fill(sp["start"], sp["end"], 1)
        for leg in doc["legs"]:
            fill(leg["start"], leg["end"], 2)
        moving += status == 2
        stationary += status == 1

    minutes = t0 + 60 * np.arange(n)
    core = (minutes >= t0 + _EDGE_EXCL_S) & (minutes < t1 - _EDGE_EXCL_S)
    out = {
        "avg_total": None,
        "avg_moving": float(moving.mean()) if n else None,
        "avg_stationary": None,
        "n_events": sum(len(d["events"]) for d in vessels.values()),
    }
    if core.any():
        out["avg_total"] = float((moving + stationary)[core].mean())
        out["avg_stationary"] = float(stationary[core].mean())
    return out


# ---------------------------------------------------------------------------
# Shadow segments
# ---------------------------------------------------------------------------


def generate_shadow_segments(
    receiver_lat: float,
    receiver_lon: float,
    azimuths_deg,
    r_inner_m: float = 5000.0,
    r_outer_m: float = 40000.0,
    noise_deg: float = 0.0,
    rng: np.random.Generator | None = None,
    receiver_name: str = "rx",
):
    """Radial shadow segments whose great circles pass through the receiver.

    Construction is on the unit sphere, so with zero noise every segment's
    great circle contains the receiver to float precision.  Angular noise
    perturbs each endpoint's azimuth independently.
    """
    from .georecv import ShadowSegment

    if rng is None:
        rng = np.random.default_rng(0)
    r = geo.to_unit(receiver_lat, receiver_lon)
    z = np.array([0.0, 0.0, 1.0])
    east = np.cross(z, r)
    east /= np.linalg.norm(east)
    north = np.cross(r, east)
    radius = geo.gaussian_radius(receiver_lat)

    out = []
    for k, az in enumerate(azimuths_deg):
        a1 = math.radians(az + (rng.normal(0.0, noise_deg) if noise_deg > 0 else 0.0))
        a2 = math.radians(az + (rng.normal(0.0, noise_deg) if noise_deg > 0 else 0.0))
        t1 = math.cos(a1) * north + math.sin(a1) * east
        t2 = math.cos(a2) * north + math.sin(a2) * east
        th1 = r_inner_m / radius
        th2 = r_outer_m / radius
        p1 = math.cos(th1) * r + math.sin(th1) * t1
        p2 = math.cos(th2) * r + math.sin(th2) * t2
        lat1, lon1 = geo.to_latlon(p1)
        lat2, lon2 = geo.to_latlon(p2)
        out.append(
            ShadowSegment(
                id=str(k), lat1=lat1, lon1=lon1, lat2=lat2, lon2=lon2,
                receiver=receiver_name,
            )
        )
    return out


# ---------------------------------------------------------------------------
# Canned scenarios
# ---------------------------------------------------------------------------

_CATEGORY_TYPES = [60, 35, 70, 52, 80, 30]  # one code per activity class


def reference_scenario(
    n_vessels: int = 50, days: int = 10, seed: int = 20240805
) -> Scenario:
    """The standard noise-free acceptance scenario.

    All vessels are present from the window start.  The fleet shuttles
    between berths deep inside the bay, a third makes round-trip absences
    through the fading southern coverage, one vessel moors 47 h with its
    transceiver off inside a 48 h transit area, and one sits dark for 50 h
    at the same anchorage (the rules call the first moored, the second
    absent).
    """
    t0 = 1722816000  # 2024-08-05T00:00:00Z
    g = BayGeometry()
    rng = np.random.default_rng(seed)
    receiver = Receiver(lat=35.62, lon=139.875, coverage_m=65_000.0, name="north")

    berths = [
        (round(35.58 + 0.004 * (i % 6), 4), round(139.64 + 0.02 * (i // 6), 4), f"BER{i:02d}")
        for i in range(12)
    ]
    anchorage = (35.325, 139.83)  # mid band 6, a 48 h area
    south_exit = (34.80, 139.90)  # outside the ROI

    vessels: list[VesselScript] = []
    for v in range(n_vessels):
        mmsi = 431_000_001 + v
        ship_type = _CATEGORY_TYPES[v % len(_CATEGORY_TYPES)]
        gt = None if v % 10 == 9 else float(rng.integers(300, 60_000))
        b0 = berths[v % len(berths)]
        b1 = berths[(v + 5) % len(berths)]
        if v == 0:
            # 47 h dark mooring; approach at 8 kn keeps the threshold far
            # above the stay, robust to 0.1 kn SOG rounding
            phases = [
                Moor(6 * 3600),
                Move(anchorage[0], anchorage[1], 8.0),
                Moor(47 * 3600, off_windows=[(0, 47 * 3600)]),
                Move(b0[0], b0[1], 8.0),
                Moor(days * 86400),
            ]
        elif v == 1:
            # 50 h dark stay; 12 kn pushes the threshold well below 50 h
            phases = [
                Moor(8 * 3600),
                Move(anchorage[0], anchorage[1], 12.0),
                Moor(50 * 3600, off_windows=[(0, 50 * 3600)]),
                Move(b1[0], b1[1], 12.0),
                Moor(days * 86400),
            ]
        elif v % 3 == 0:
            # absences spread across the window so the core averages see them
            dwell = int(rng.integers(14, 30)) * 3600
            start_moor = int(rng.integers(4, 24 * (days - 2))) * 3600
            exit_lon = south_exit[1] + 0.01 * (v % 5 - 2)
            phases = [
                Moor(start_moor),
                Absent(south_exit[0], exit_lon, 12.0, dwell),
                Moor(days * 86400),
            ]
        else:
            speed = float(rng.choice([8.0, 10.0, 14.0, 16.0]))
            phases = [Moor(int(rng.integers(3, 12)) * 3600)]
            src, dst = b0, b1
            for _ in range(int(rng.integers(3, 7))):
                phases.append(Move(dst[0], dst[1], speed))
                phases.append(Moor(int(rng.integers(5, 20)) * 3600))
                src, dst = dst, src
            phases.append(Moor(days * 86400))
        vessels.append(
            VesselScript(
                mmsi=mmsi,
                start_lat=b0[0],
                start_lon=b0[1],
                phases=phases,
                ship_type=ship_type,
                gt=gt,
                dest=f"JP {b1[2]}",
            )
        )
    return Scenario(
        seed=seed,
        t0=t0,
        duration_s=days * 86400,
        geometry=g,
        receivers=[receiver],
        vessels=vessels,
    )


def random_scenario(seed: int, n_vessels: int = 8, days: int = 6) -> Scenario:
    """Small randomized scenario for property tests (may carry noise)."""
    rng = np.random.default_rng(seed)
    g = BayGeometry()
    receiver = Receiver(lat=35.62, lon=139.875, coverage_m=float(rng.integers(55, 75)) * 1000.0)
    vessels = []
    for v in range(n_vessels):
        lat0 = float(rng.uniform(35.15, 35.65))
        lon0 = float(rng.uniform(139.65, 140.05))
        phases: list = [Moor(int(rng.integers(2, 20)) * 3600)]
        for _ in range(int(rng.integers(1, 4))):
            kind = rng.integers(0, 3)
            if kind == 0:
                phases.append(
                    Move(float(rng.uniform(35.15, 35.65)),
                         float(rng.uniform(139.65, 140.05)),
                         float(rng.choice([6.0, 10.0, 15.0, 20.0])))
                )
                phases.append(Moor(int(rng.integers(4, 24)) * 3600))
            elif kind == 1:
                phases.append(
                    Absent(34.85, float(rng.uniform(139.75, 140.0)),
                           float(rng.choice([10.0, 12.0, 15.0])),
                           int(rng.integers(10, 40)) * 3600)
                )
                phases.append(Moor(int(rng.integers(4, 24)) * 3600))
            else:
                off = [(int(rng.integers(0, 4)) * 3600, int(rng.integers(6, 52)) * 3600)]
                phases.append(Moor(int(rng.integers(12, 60)) * 3600, off_windows=off))
        phases.append(Moor(days * 86400))
        vessels.append(
            VesselScript(
                mmsi=431_100_001 + v,
                start_lat=lat0,
                start_lon=lon0,
                phases=phases,
                ship_type=int(rng.choice(_CATEGORY_TYPES)),
                gt=float(rng.integers(300, 40_000)),
            )
        )
    return Scenario(
        seed=seed,
        t0=1722816000,
        duration_s=days * 86400,
        geometry=g,
        receivers=[receiver],
        vessels=vessels,
        pos_jitter_m=float(rng.choice([0.0, 0.0, 8.0])),
        drop_prob=float(rng.choice([0.0, 0.0, 0.02])),
    )


# ---------------------------------------------------------------------------
# Scenario (de)serialization for the CLI
# ---------------------------------------------------------------------------


def scenario_to_dict(scn: Scenario) -> dict:
    def phase(p):
        if isinstance(p, Moor):
            return {"kind": "moor", "duration_s": p.duration_s,
                    "off_windows": [list(w) for w in p.off_windows]}
        if isinstance(p, Move):
            return {"kind": "move", "to": [p.to_lat, p.to_lon], "speed_kn": p.speed_kn}
        return {"kind": "absent", "exit": [p.exit_lat, p.exit_lon],
                "speed_kn": p.speed_kn, "dwell_s": p.dwell_s}

    return {
        "seed": scn.seed,
        "t0": scn.t0,
        "duration_s": scn.duration_s,
        "pos_interval_s": scn.pos_interval_s,
        "static_interval_s": scn.static_interval_s,
        "pos_jitter_m": scn.pos_jitter_m,
        "drop_prob": scn.drop_prob,
        "speed_max_kn": scn.speed_max_kn,
        "geometry": {
            "lat_min": scn.geometry.lat_min,
            "lat_max": scn.geometry.lat_max,
            "lon_min": scn.geometry.lon_min,
            "lon_max": scn.geometry.lon_max,
            "main_top": scn.geometry.main_top,
            "band_deg": scn.geometry.band_deg,
            "n_bands": scn.geometry.n_bands,
            "t0_hours": scn.geometry.t0_hours,
        },
        "receivers": [
            {
                "name": r.name, "lat": r.lat, "lon": r.lon,
                "coverage_m": r.coverage_m, "height_m": r.height_m,
                "wedges": [
                    {"azimuth_deg": w.azimuth_deg, "half_angle_deg": w.half_angle_deg}
                    for w in r.wedges
                ],
            }
            for r in scn.receivers
        ],
        "vessels": [
            {
                "mmsi": v.mmsi,
                "start": [v.start_lat, v.start_lon],
                "ship_type": v.ship_type,
                "gt": v.gt,
                "dest": v.dest,
                "phases": [phase(p) for p in v.phases],
            }
            for v in scn.vessels
        ],
    }


def scenario_from_dict(doc: dict) -> Scenario:
    def phase(d):
        if d["kind"] == "moor":
            return Moor(d["duration_s"], [tuple(w) for w in d.get("off_windows", [])])
        if d["kind"] == "move":
            return Move(d["to"][0], d["to"][1], d["speed_kn"])
        return Absent(d["exit"][0], d["exit"][1], d["speed_kn"], d["dwell_s"])

    geom = BayGeometry(**doc["geometry"])
    receivers = [
        Receiver(
            lat=r["lat"], lon=r["lon"], coverage_m=r.get("coverage_m"),
            name=r.get("name", "rx"), height_m=r.get("height_m"),
            wedges=[Wedge(w["azimuth_deg"], w["half_angle_deg"])
                    for w in r.get("wedges", [])],
        )
        for r in doc["receivers"]
    ]
    vessels = [
        VesselScript(
            mmsi=v["mmsi"],
            start_lat=v["start"][0],
            start_lon=v["start"][1],
            phases=[phase(p) for p in v["phases"]],
            ship_type=v.get("ship_type"),
            gt=v.get("gt"),
            dest=v.get("dest"),
        )
        for v in doc["vessels"]
    ]
    return Scenario(
        seed=doc["seed"],
        t0=doc["t0"],
        duration_s=doc["duration_s"],
        geometry=geom,
        receivers=receivers,
        vessels=vessels,
        pos_interval_s=doc.get("pos_interval_s", POS_INTERVAL_S),
        static_interval_s=doc.get("static_interval_s", STATIC_INTERVAL_S),
        pos_jitter_m=doc.get("pos_jitter_m", 0.0),
        drop_prob=doc.get("drop_prob", 0.0),
        speed_max_kn=doc.get("speed_max_kn", 50.0),
    )
