"""Per-vessel cleaning cascade.

Order of operations for one vessel:

    static-vessel removal -> static-position assignment -> low-speed
    dedupe -> split -> kinematic filter -> re-split -> short-gap merge

Splitting inserts boundaries between consecutive messages when the implied
speed drops below the stationary threshold, the time gap exceeds the split
bound, the distance exceeds the jump bound, or the track dipped into and
out of the main transit area.  Runs of sub-threshold pairs become
stationary runs; movements entirely inside the main transit area are
discarded.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from . import geo
from .geo import KNOT, SphericalPolygon
from .ingest import AisMessage

log = logging.getLogger(__name__)

STATIC_SQUARE_M = 100.0
STATIONARY_KN = 0.5
SPLIT_GAP_S = 4 * 3600
SPLIT_DIST_M = 40_000.0
SPEED_MAX_KN = 50.0
ACCEL_MAX_MS2 = 1.0
MERGE_GAP_S = 120


@dataclass
class Leg:
    """A contiguous movement of one vessel (>= 2 messages)."""

    mmsi: int
    messages: list[AisMessage]
    v_entry: float = 0.0  # knots, first observed speed
    v_exit: float = 0.0  # knots, last observed speed

    def __post_init__(self):
        if len(self.messages) < 2:
            raise ValueError("a leg needs at least 2 messages")
        if self.v_entry == 0.0 and self.v_exit == 0.0:
            self.v_entry = _observed_speed(self.messages, reverse=False)
            self.v_exit = _observed_speed(self.messages, reverse=True)

    @property
    def start_ts(self) -> int:
        return self.messages[0].timestamp

    @property
    def end_ts(self) -> int:
        return self.messages[-1].timestamp

    @property
    def start_pos(self) -> tuple[float, float]:
        return (self.messages[0].lat, self.messages[0].lon)

    @property
    def end_pos(self) -> tuple[float, float]:
        return (self.messages[-1].lat, self.messages[-1].lon)


@dataclass
class StationaryPeriod:
    """Time at rest; anchor is the centroid of the member positions."""

    mmsi: int
    start_ts: int
    end_ts: int
    anchor_lat: float
    anchor_lon: float
    drift_extent_m: float = 0.0
    messages: list[AisMessage] = field(default_factory=list)

    @property
    def duration_s(self) -> int:
        return self.end_ts - self.start_ts


@dataclass
class PointKinematics:
    dd1: float  # m
    dd2: float  # m
    dt1: float  # s
    dt2: float  # s
    speed: float  # m/s, relative to the previous message
    accel: float  # m/s^2


def accel_from_deltas(dd1: float, dt1: float, dd2: float, dt2: float) -> float:
    """|dv| / mean(dt) from unsigned leg deltas."""
    dv = abs(dd2 / dt2 - dd1 / dt1)
    return dv / ((dt1 + dt2) / 2.0)


def broadcast_spike_accel(n: int, dd_m: float = 0.1) -> float:
    """Acceleration implied by equal dd at 6-minute and n*6-minute spacing.

    Closed form of the low-speed discretization spike: with dt1 = 360 s and
    dt2 = n * 360 s, |a| = dd * (n - 1) / (64800 * n * (n + 1)).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    return dd_m * (n - 1) / (64800.0 * n * (n + 1))


def point_kinematics(prev: AisMessage, cur: AisMessage, nxt: AisMessage) -> PointKinematics:
    """Speed and acceleration attributed to the middle message."""
    dt1 = cur.timestamp - prev.timestamp
    dt2 = nxt.timestamp - cur.timestamp
    if dt1 <= 0 or dt2 <= 0:
        raise ValueError("triplet requires strictly increasing timestamps")
    dd1 = geo.distance(prev.lat, prev.lon, cur.lat, cur.lon)
    dd2 = geo.distance(cur.lat, cur.lon, nxt.lat, nxt.lon)
    return PointKinematics(
        dd1=dd1,
        dd2=dd2,
        dt1=dt1,
        dt2=dt2,
        speed=dd1 / dt1,
        accel=accel_from_deltas(dd1, dt1, dd2, dt2),
    )


def _observed_speed(messages: list[AisMessage], reverse: bool) -> float:
    """First (or last) reported SOG; falls back to the implied edge speed."""
    seq = reversed(messages) if reverse else messages
    for m in seq:
        if m.sog is not None:
            return m.sog
    a, b = (messages[-2], messages[-1]) if reverse else (messages[0], messages[1])
    dt = b.timestamp - a.timestamp
    if dt <= 0:
        return 0.0
    return geo.distance(a.lat, a.lon, b.lat, b.lon) / dt / KNOT


def footprint_m(messages: list[AisMessage]) -> tuple[float, float]:
    """North-south and east-west extent in meters of the positions present."""
    lats = [m.lat for m in messages if m.lat is not None]
    lons = [m.lon for m in messages if m.lat is not None]
    if not lats:
        return 0.0, 0.0
    lat_mid = 0.5 * (min(lats) + max(lats))
    ns = (max(lats) - min(lats)) * geo.meridional_radius(lat_mid) * np.pi / 180.0
    ew = (
        (max(lons) - min(lons))
        * geo.normal_radius(lat_mid)
        * np.cos(np.radians(lat_mid))
        * np.pi
        / 180.0
    )
    return float(ns), float(ew)


def remove_static_vessels(
    per_vessel: dict[int, list[AisMessage]], side_m: float = STATIC_SQUARE_M
) -> tuple[dict[int, list[AisMessage]], list[int]]:
    """Drop vessels whose whole positional footprint fits a side_m square.

    Vessels with fewer than two positioned messages have a degenerate
    footprint and are dropped as well.
    """
    kept: dict[int, list[AisMessage]] = {}
    removed: list[int] = []
    for mmsi, msgs in per_vessel.items():
        n_pos = sum(1 for m in msgs if m.lat is not None)
        if n_pos < 2:
            removed.append(mmsi)
            continue
        ns, ew = footprint_m(msgs)
        if ns <= side_m and ew <= side_m:
            removed.append(mmsi)
        else:
            kept[mmsi] = msgs
    return kept, removed


def dedupe_low_speed(
    messages: list[AisMessage],
    stationary_kn: float = STATIONARY_KN,
    max_gap_s: int = SPLIT_GAP_S,
) -> tuple[list[AisMessage], int]:
    """Collapse runs of identical rounded positions to their first message.

    Only sub-split-bound gaps are bridged; a run interrupted by more than
    max_gap_s is left alone so the split pass still sees the gap.  The
    implied speed of an identical-position pair is zero, hence always below
    the stationary threshold.
    """
    del stationary_kn  # identical positions imply zero speed
    if not messages:
        return [], 0
    out = [messages[0]]
    removed = 0
    for m in messages[1:]:
        prev = out[-1]
        same = (
            m.lat is not None
            and prev.lat == m.lat
            and prev.lon == m.lon
            and m.timestamp - prev.timestamp <= max_gap_s
        )
        if same:
            removed += 1
        else:
            out.append(m)
    return out, removed


def _pair_metrics(messages: list[AisMessage]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(dt_s, dist_m, speed_mps) between consecutive messages."""
    ts = np.array([m.timestamp for m in messages], dtype=np.float64)
    lats = np.array([m.lat for m in messages], dtype=np.float64)
    lons = np.array([m.lon for m in messages], dtype=np.float64)
    dt = np.diff(ts)
    dist = geo.distance(lats[:-1], lons[:-1], lats[1:], lons[1:])
    dist = np.atleast_1d(dist)
    with np.errstate(divide="ignore", invalid="ignore"):
        speed = np.where(dt > 0, dist / np.where(dt > 0, dt, 1.0), np.inf)
    return dt, dist, speed


def kinematic_filter(
    messages: list[AisMessage],
    speed_max_kn: float = SPEED_MAX_KN,
    accel_max: float = ACCEL_MAX_MS2,
) -> tuple[list[AisMessage], int]:
    """Iteratively drop messages violating the speed or acceleration bound.

    Forward scan, restart on removal, until a fixed point.  Speed
    violations (a message too fast relative to its predecessor) are
    cleared first so a teleporting outlier dies before the acceleration
    rule can blame its neighbors; removals never create new speed
    violations, so the acceleration pass cannot undo that.
    """
    msgs = list(messages)
    removed = 0
    vmax = speed_max_kn * KNOT

    while len(msgs) >= 2:  # speed rule
        _, _, speed = _pair_metrics(msgs)
        bad = np.nonzero(speed > vmax)[0]
        if bad.size == 0:
            break
        del msgs[int(bad[0]) + 1]
        removed += 1

    while len(msgs) >= 3:  # acceleration rule
        dt, dist, _ = _pair_metrics(msgs)
        kill = None
        for i in range(1, len(msgs) - 1):
            if dt[i - 1] > 0 and dt[i] > 0:
                if accel_from_deltas(dist[i - 1], dt[i - 1], dist[i], dt[i]) > accel_max:
                    kill = i
                    break
        if kill is None:
            break
        del msgs[kill]
        removed += 1
    return msgs, removed


@dataclass
class SplitResult:
    legs: list[Leg]
    stationary_runs: list[StationaryPeriod]
    isolated: list[AisMessage]
    removed: Counter = field(default_factory=Counter)


def _main_area_breaks(messages: list[AisMessage], in_main: np.ndarray) -> set[int]:
    """Boundary indices for tracks that entered and left the main area.

    A break between messages k and k+1 is encoded as index k.  For every
    maximal run of in-area messages with out-of-area messages on both
    sides, the track is cut at the widest time gap between the bracketing
    out-of-area messages (ties toward the earlier gap).
    """
    breaks: set[int] = set()
    n = len(messages)
    i = 0
    while i < n:
        if not in_main[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and in_main[j + 1]:
            j += 1
        if i > 0 and j < n - 1:  # entered and again left
            lo, hi = i - 1, j + 1
            gaps = [
                messages[k + 1].timestamp - messages[k].timestamp
                for k in range(lo, hi)
            ]
            k_star = lo + int(np.argmax(gaps))
            breaks.add(k_star)
        i = j + 1
    return breaks


def split_periods(
    messages: list[AisMessage],
    roi: SphericalPolygon | None = None,
    main_area: SphericalPolygon | None = None,
    stationary_kn: float = STATIONARY_KN,
    split_gap_s: int = SPLIT_GAP_S,
    split_dist_m: float = SPLIT_DIST_M,
) -> SplitResult:
    """Split one vessel's messages into legs and stationary runs."""
    removed: Counter = Counter()
    msgs = messages
    if roi is not None and msgs:
        lats = np.array([m.lat for m in msgs])
        lons = np.array([m.lon for m in msgs])
        inside = roi.contains(lats, lons)
        removed["outside-roi"] += int((~inside).sum())
        msgs = [m for m, ok in zip(msgs, inside) if ok]

    if len(msgs) == 0:
        return SplitResult([], [], [], removed)
    if len(msgs) == 1:
        return SplitResult([], [], list(msgs), removed)

    dt, dist, speed = _pair_metrics(msgs)
    vthr = stationary_kn * KNOT
    stationary_pair = speed < vthr
    hard_break = (dt > split_gap_s) | (dist > split_dist_m)

    if main_area is not None:
        lats = np.array([m.lat for m in msgs])
        lons = np.array([m.lon for m in msgs])
        in_main = main_area.contains(lats, lons)
        for k in _main_area_breaks(msgs, in_main):
            hard_break[k] = True
    else:
        in_main = np.zeros(len(msgs), dtype=bool)

    legs: list[Leg] = []
    stationary: list[StationaryPeriod] = []
    isolated: list[AisMessage] = []

    def flush(run_start: int, run_end: int, moving: bool):
        chunk = msgs[run_start : run_end + 1]
        if moving:
            if main_area is not None and bool(np.all(in_main[run_start : run_end + 1])):
                removed["transit-area-movement"] += len(chunk)
                return
            legs.append(Leg(mmsi=chunk[0].mmsi, messages=chunk))
        else:
            lats = [m.lat for m in chunk]
            lons = [m.lon for m in chunk]
            alat, alon = geo.to_latlon(geo.to_unit(lats, lons).mean(axis=0))
            stationary.append(
                StationaryPeriod(
                    mmsi=chunk[0].mmsi,
                    start_ts=chunk[0].timestamp,
                    end_ts=chunk[-1].timestamp,
                    anchor_lat=alat,
                    anchor_lon=alon,
                    drift_extent_m=float(
                        geo.distance(chunk[0].lat, chunk[0].lon, chunk[-1].lat, chunk[-1].lon)
                    ),
                    messages=chunk,
                )
            )

    # walk pairs; a message may close a moving run and open a stationary one
    run_start = 0
    run_moving: bool | None = None
    n = len(msgs)
    for k in range(n - 1):
        moving = not stationary_pair[k]
        if hard_break[k]:
            if run_moving is None:
                isolated.append(msgs[k])
            else:
                flush(run_start, k, run_moving)
            run_start = k + 1
            run_moving = None
            continue
        if run_moving is None:
            run_moving = moving
            continue
        if moving != run_moving:
            flush(run_start, k, run_moving)
            run_start = k  # boundary message shared
            run_moving = moving
    if run_moving is None:
        isolated.append(msgs[n - 1])
    else:
        flush(run_start, n - 1, run_moving)

    return SplitResult(legs, stationary, isolated, removed)


def merge_short_gaps(
    result: SplitResult,
    max_gap_s: int = MERGE_GAP_S,
    speed_max_kn: float = SPEED_MAX_KN,
    accel_max: float = ACCEL_MAX_MS2,
) -> SplitResult:
    """Merge legs separated by max_gap_s or less, transitively left to right.

    Messages trapped between merged legs are dropped (counted); a merge is
    skipped when the junction itself would violate the kinematic bounds so
    that legs keep satisfying them by construction.
    """
    legs = sorted(result.legs, key=lambda l: l.start_ts)
    vmax = speed_max_kn * KNOT
    merged: list[Leg] = []
    dropped_windows: list[tuple[int, int]] = []
    for leg in legs:
        if not merged:
            merged.append(leg)
            continue
        prev = merged[-1]
        gap = leg.start_ts - prev.end_ts
        if gap < 0:
            raise ValueError("overlapping legs")
        if gap > max_gap_s:
            merged.append(leg)
            continue
        a, b = prev.messages[-1], leg.messages[0]
        dt = b.timestamp - a.timestamp
        d = geo.distance(a.lat, a.lon, b.lat, b.lon)
        ok = dt > 0 and d / dt <= vmax
        if ok and len(prev.messages) >= 2:
            p2 = prev.messages[-2]
            ok = accel_from_deltas(
                geo.distance(p2.lat, p2.lon, a.lat, a.lon),
                a.timestamp - p2.timestamp,
                d,
                dt,
            ) <= accel_max
        if ok and len(leg.messages) >= 2:
            n2 = leg.messages[1]
            ok = accel_from_deltas(
                d,
                dt,
                geo.distance(b.lat, b.lon, n2.lat, n2.lon),
                n2.timestamp - b.timestamp,
            ) <= accel_max
        if not ok:
            merged.append(leg)
            continue
        dropped_windows.append((prev.end_ts, leg.start_ts))
        merged[-1] = Leg(mmsi=prev.mmsi, messages=prev.messages + leg.messages)

    removed = Counter(result.removed)
    stationary: list[StationaryPeriod] = []
    isolated: list[AisMessage] = []

    def in_dropped(t0: int, t1: int) -> bool:
        return any(a <= t0 and t1 <= b for a, b in dropped_windows)

    for sp in result.stationary_runs:
        if in_dropped(sp.start_ts, sp.end_ts):
            removed["short-gap-merge"] += len(sp.messages)
        else:
            stationary.append(sp)
    for m in result.isolated:
        if in_dropped(m.timestamp, m.timestamp):
            removed["short-gap-merge"] += 1
        else:
            isolated.append(m)

    return SplitResult(merged, stationary, isolated, removed)


@dataclass
class CleanResult:
    """Everything the later stages need for one vessel."""

    mmsi: int
    legs: list[Leg]
    stationary_runs: list[StationaryPeriod]
    isolated: list[AisMessage]
    removed: Counter
    evidence_times: list[int]  # all validated in-window report times
    n_input: int = 0


def clean_vessel(
    mmsi: int,
    messages: list[AisMessage],
    roi: SphericalPolygon | None = None,
    main_area: SphericalPolygon | None = None,
    evidence_times: list[int] | None = None,
    stationary_kn: float = STATIONARY_KN,
    split_gap_s: int = SPLIT_GAP_S,
    split_dist_m: float = SPLIT_DIST_M,
    speed_max_kn: float = SPEED_MAX_KN,
    accel_max: float = ACCEL_MAX_MS2,
    merge_gap_s: int = MERGE_GAP_S,
) -> CleanResult:
    """Run the full cascade for one vessel (post static-position assignment)."""
    n_input = len(messages)
    if evidence_times is None:
        evidence_times = [m.timestamp for m in messages]

    msgs, n_dup = dedupe_low_speed(messages, stationary_kn, split_gap_s)
    first = split_periods(
        msgs, roi, main_area, stationary_kn, split_gap_s, split_dist_m
    )
    retained = _collect_messages(first)
    filtered, n_kin = kinematic_filter(retained, speed_max_kn, accel_max)
    second = split_periods(
        filtered, None, main_area, stationary_kn, split_gap_s, split_dist_m
    )
    final = merge_short_gaps(second, merge_gap_s, speed_max_kn, accel_max)

    removed = Counter(first.removed)
    removed.update(final.removed)
    removed["low-speed-duplicate"] += n_dup
    removed["kinematic"] += n_kin

    return CleanResult(
        mmsi=mmsi,
        legs=final.legs,
        stationary_runs=final.stationary_runs,
        isolated=final.isolated,
        removed=removed,
        evidence_times=evidence_times,
        n_input=n_input,
    )


def _collect_messages(result: SplitResult) -> list[AisMessage]:
    msgs: list[AisMessage] = []
    for leg in result.legs:
        msgs.extend(leg.messages)
    for sp in result.stationary_runs:
        msgs.extend(sp.messages)
    msgs.extend(result.isolated)
    # boundary messages are shared between a leg and a stationary run
    seen: set[int] = set()
    out = []
    for m in sorted(msgs, key=lambda m: m.timestamp):
        if id(m) not in seen:
            seen.add(id(m))
            out.append(m)
    return out


def message_accounting(result: CleanResult) -> dict[str, int]:
    """Partition of the vessel's input messages for conservation checks.

    Messages shared between a leg and an adjacent stationary run are
    counted once, under the leg.
    """
    leg_ids = set()
    for leg in result.legs:
        leg_ids.update(id(m) for m in leg.messages)
    stat_ids = set()
    for sp in result.stationary_runs:
        stat_ids.update(id(m) for m in sp.messages if id(m) not in leg_ids)
    return {
        "leg": len(leg_ids),
        "stationary": len(stat_ids),
        "isolated": len(result.isolated),
        "removed": sum(result.removed.values()),
    }
