"""Moored-vs-absent classification of inter-leg gaps.

A vessel that stops reporting either left the region or sat moored with
its transceiver off.  A gap counts as an absence only when it touches one
of the configured transit areas, carries fewer than four reports, and
outlasts a threshold that drops steeply with the vessel's speed:

    t_thr = t0 * (max(v_exit, v_entry) / 10 kn)^-4

t0 is the per-area looseness (hours); areas deeper inside the region get
larger t0 so that only long switch-offs are mistaken for departures.
"""

from __future__ import annotations

import json
import logging
import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from . import geo
from .clean import CleanResult, Leg, StationaryPeriod
from .geo import SphericalPolygon
from .ingest import AisMessage

log = logging.getLogger(__name__)

MOORED = "moored"
ABSENT = "absent"

MAIN_AREA_ID = "main"
GAP_MESSAGE_LIMIT = 4
REFERENCE_SPEED_KN = 10.0
THRESHOLD_EXPONENT = -4.0


@dataclass
class TransitArea:
    id: str
    polygon: SphericalPolygon
    t0_hours: float

    def __post_init__(self):
        if self.t0_hours < 0:
            raise ValueError("t0 must be >= 0")


def load_polygon(source) -> SphericalPolygon:
    """First Polygon feature of a GeoJSON FeatureCollection (path or dict)."""
    if isinstance(source, str):
        with open(source) as fh:
            source = json.load(fh)
    ring = source["features"][0]["geometry"]["coordinates"][0]
    return SphericalPolygon([c[1] for c in ring], [c[0] for c in ring])


def load_areas(source) -> list[TransitArea]:
    """Transit areas from a GeoJSON FeatureCollection (path or dict).

    Each feature is a Polygon with properties {id, t0_hours}.
    """
    if isinstance(source, str):
        with open(source) as fh:
            source = json.load(fh)
    areas = []
    for feat in source["features"]:
        geom = feat["geometry"]
        if geom["type"] != "Polygon":
            raise ValueError("transit areas must be Polygon features")
        ring = geom["coordinates"][0]
        lons = [c[0] for c in ring]
        lats = [c[1] for c in ring]
        props = feat.get("properties", {})
        areas.append(
            TransitArea(
                id=str(props["id"]),
                polygon=SphericalPolygon(lats, lons),
                t0_hours=float(props["t0_hours"]),
            )
        )
    return areas


@dataclass(frozen=True)
class AreaSetPolicy:
    """Which transit areas participate in the classification."""

    mode: str
    included: frozenset

    @staticmethod
    def of(mode: str) -> "AreaSetPolicy":
        ranges = {"hi": 5, "df": 8, "low": 10}
        if mode in ranges:
            ids = {MAIN_AREA_ID} | {str(i) for i in range(1, ranges[mode] + 1)}
            return AreaSetPolicy(mode, frozenset(ids))
        # custom comma-separated id list; main is always included
        ids = {s.strip() for s in mode.split(",") if s.strip()}
        return AreaSetPolicy("custom", frozenset(ids | {MAIN_AREA_ID}))

    def select(self, areas: list[TransitArea]) -> list[TransitArea]:
        return [a for a in areas if a.id in self.included]


def point_in_area(lat: float, lon: float, polygon: SphericalPolygon) -> bool:
    """Even-odd containment with great-circle edges; boundary counts inside."""
    return bool(polygon.contains(lat, lon))


def absence_threshold(t0_hours: float, v_exit_kn: float, v_entry_kn: float) -> float:
    """Stay-duration threshold in hours; +inf when both speeds are zero."""
    if t0_hours < 0 or v_exit_kn < 0 or v_entry_kn < 0:
        raise ValueError("negative inputs")
    v = max(v_exit_kn, v_entry_kn)
    if v == 0.0:
        return math.inf
    return t0_hours * (v / REFERENCE_SPEED_KN) ** THRESHOLD_EXPONENT


@dataclass
class GapClassification:
    gap_start: int
    gap_end: int
    end_area_id: str | None  # area the previous leg ended in
    start_area_id: str | None  # area the next leg started in
    message_count: int
    verdict: str  # MOORED | ABSENT
    threshold_used_h: float | None

    @property
    def duration_s(self) -> int:
        return self.gap_end - self.gap_start


def _containing_area(areas: list[TransitArea], lat: float, lon: float) -> TransitArea | None:
    hits = [a for a in areas if a.polygon.contains(lat, lon)]
    if not hits:
        return None
    return min(hits, key=lambda a: a.t0_hours)


def classify_gap(
    prev_leg: Leg,
    next_leg: Leg,
    messages_in_gap: int,
    areas: list[TransitArea],
    message_limit: int = GAP_MESSAGE_LIMIT,
) -> GapClassification:
    """Label the gap between two consecutive legs of one vessel.

    Absent requires the gap to be anchored in an included area, fewer than
    message_limit reports during the gap, and a duration above the anchor
    area's speed-dependent threshold (the smaller one when both ends are
    anchored).
    """
    if prev_leg.end_ts > next_leg.start_ts:
        raise ValueError("legs overlap in time; upstream segmentation bug")

    end_area = _containing_area(areas, *prev_leg.end_pos)
    start_area = _containing_area(areas, *next_leg.start_pos)

    threshold = None
    for area in (end_area, start_area):
        if area is None:
            continue
        thr = absence_threshold(area.t0_hours, prev_leg.v_exit, next_leg.v_entry)
        threshold = thr if threshold is None else min(threshold, thr)

    duration_h = (next_leg.start_ts - prev_leg.end_ts) / 3600.0
    verdict = MOORED
    if threshold is not None and messages_in_gap < message_limit and duration_h > threshold:
        verdict = ABSENT

    return GapClassification(
        gap_start=prev_leg.end_ts,
        gap_end=next_leg.start_ts,
        end_area_id=end_area.id if end_area else None,
        start_area_id=start_area.id if start_area else None,
        message_count=messages_in_gap,
        verdict=verdict,
        threshold_used_h=threshold,
    )


@dataclass
class ClassifiedTimeline:
    """One vessel's activity: legs, labeled gaps, final stationary periods."""

    mmsi: int
    legs: list[Leg]
    gaps: list[GapClassification]
    stationary_periods: list[StationaryPeriod]
    removed: Counter
    evidence_times: list[int]
    n_input: int = 0


def _centroid(messages: list[AisMessage]) -> tuple[float, float]:
    lats = [m.lat for m in messages]
    lons = [m.lon for m in messages]
    return geo.to_latlon(geo.to_unit(lats, lons).mean(axis=0))


def build_timeline(
    clean: CleanResult,
    areas: list[TransitArea],
    policy: AreaSetPolicy,
    message_limit: int = GAP_MESSAGE_LIMIT,
) -> ClassifiedTimeline:
    """Classify every inter-leg gap and materialize stationary periods.

    Moored gaps become stationary periods spanning the whole gap.  Head and
    tail evidence (reports before the first leg / after the last) becomes a
    stationary period as well: presence without movement evidence counts as
    staying put.  Evidence inside absent gaps is counted out.
    """
    selected = policy.select(areas)
    legs = sorted(clean.legs, key=lambda l: l.start_ts)
    evidence = np.array(sorted(clean.evidence_times), dtype=np.int64)
    removed = Counter(clean.removed)

    leg_ids = set()
    for leg in legs:
        leg_ids.update(id(m) for m in leg.messages)
    pool: list[AisMessage] = []
    for sp in clean.stationary_runs:
        pool.extend(m for m in sp.messages if id(m) not in leg_ids)
    pool.extend(clean.isolated)
    pool.sort(key=lambda m: m.timestamp)

    def pool_between(t0: int, t1: int) -> list[AisMessage]:
        return [m for m in pool if t0 <= m.timestamp <= t1]

    gaps: list[GapClassification] = []
    periods: list[StationaryPeriod] = []

    if not legs:
        if pool:
            members = pool
            alat, alon = _centroid(members)
            periods.append(
                StationaryPeriod(
                    mmsi=clean.mmsi,
                    start_ts=int(evidence[0]) if evidence.size else members[0].timestamp,
                    end_ts=int(evidence[-1]) if evidence.size else members[-1].timestamp,
                    anchor_lat=alat,
                    anchor_lon=alon,
                    drift_extent_m=float(
                        geo.distance(
                            members[0].lat, members[0].lon,
                            members[-1].lat, members[-1].lon,
                        )
                    ),
                    messages=members,
                )
            )
        return ClassifiedTimeline(
            clean.mmsi, [], [], periods, removed, clean.evidence_times, clean.n_input
        )

    # head: any report before the first leg is presence evidence; without
    # movement in between the vessel is taken as staying put
    head_ev = evidence[evidence < legs[0].start_ts]
    if head_ev.size:
        head = pool_between(-(1 << 62), legs[0].start_ts)
        if head:
            alat, alon = _centroid(head)
        else:
            alat, alon = legs[0].start_pos
        periods.append(
            StationaryPeriod(
                mmsi=clean.mmsi,
                start_ts=int(head_ev[0]),
                end_ts=legs[0].start_ts,
                anchor_lat=alat,
                anchor_lon=alon,
                drift_extent_m=float(
                    geo.distance(head[0].lat, head[0].lon, *legs[0].start_pos)
                ) if head else 0.0,
                messages=head,
            )
        )

    for prev, nxt in zip(legs[:-1], legs[1:]):
        lo = np.searchsorted(evidence, prev.end_ts, side="right")
        hi = np.searchsorted(evidence, nxt.start_ts, side="left")
        n_msg = int(hi - lo)
        gc = classify_gap(prev, nxt, n_msg, selected, message_limit)
        gaps.append(gc)
        members = pool_between(prev.end_ts, nxt.start_ts)
        if gc.verdict == MOORED:
            if members:
                alat, alon = _centroid(members)
            else:
                # the arrival point is a real observation of the moored
                # position; the next leg's start carries a departure offset
                alat, alon = prev.end_pos
            periods.append(
                StationaryPeriod(
                    mmsi=clean.mmsi,
                    start_ts=prev.end_ts,
                    end_ts=nxt.start_ts,
                    anchor_lat=alat,
                    anchor_lon=alon,
                    drift_extent_m=float(geo.distance(*prev.end_pos, *nxt.start_pos)),
                    messages=members,
                )
            )
        else:
            removed["absent-gap-evidence"] += len(members)

    tail_ev = evidence[evidence > legs[-1].end_ts]
    if tail_ev.size:
        tail = pool_between(legs[-1].end_ts, 1 << 62)
        if tail:
            alat, alon = _centroid(tail)
        else:
            alat, alon = legs[-1].end_pos
        periods.append(
            StationaryPeriod(
                mmsi=clean.mmsi,
                start_ts=legs[-1].end_ts,
                end_ts=int(tail_ev[-1]),
                anchor_lat=alat,
                anchor_lon=alon,
                drift_extent_m=float(
                    geo.distance(*legs[-1].end_pos, tail[-1].lat, tail[-1].lon)
                ) if tail else 0.0,
                messages=tail,
            )
        )

    return ClassifiedTimeline(
        clean.mmsi, legs, gaps, periods, removed, clean.evidence_times, clean.n_input
    )


@dataclass
class TransitEvent:
    t: int
    mmsi: int
    direction: str  # "in" | "out"
    lat: float
    lon: float


def transit_events(
    timeline: ClassifiedTimeline, main_area: SphericalPolygon | None
) -> list[TransitEvent]:
    """Entry/exit events: one out+in per absent gap, plus window-edge
    crossings whose first/last leg passes through the main transit area."""
    events: list[TransitEvent] = []
    legs = timeline.legs
    if not legs:
        return events

    first = legs[0]
    head_evidence = any(
        sp.end_ts <= first.start_ts for sp in timeline.stationary_periods
        if sp.start_ts < first.start_ts
    )
    if main_area is not None and not head_evidence and main_area.contains(*first.start_pos):
        events.append(TransitEvent(first.start_ts, timeline.mmsi, "in", *first.start_pos))

    for gc, prev, nxt in zip(timeline.gaps, legs[:-1], legs[1:]):
        if gc.verdict == ABSENT:
            events.append(TransitEvent(gc.gap_start, timeline.mmsi, "out", *prev.end_pos))
            events.append(TransitEvent(gc.gap_end, timeline.mmsi, "in", *nxt.start_pos))

    last = legs[-1]
    tail_evidence = any(
        sp.start_ts >= last.end_ts for sp in timeline.stationary_periods
        if sp.end_ts > last.end_ts
    )
    if main_area is not None and not tail_evidence and main_area.contains(*last.end_pos):
        events.append(TransitEvent(last.end_ts, timeline.mmsi, "out", *last.end_pos))

    events.sort(key=lambda e: (e.t, e.direction, e.mmsi))
    return events


def first_last_contact_stats(events: list[TransitEvent]):
    """Mean first-contact position of entries and last-contact of exits.

    Positions are averaged as unit vectors and renormalized; returns
    ((lat, lon) | None, (lat, lon) | None, n_in, n_out).
    """
    ins = [(e.lat, e.lon) for e in events if e.direction == "in"]
    outs = [(e.lat, e.lon) for e in events if e.direction == "out"]

    def mean_pos(points):
        if not points:
            return None
        v = geo.to_unit([p[0] for p in points], [p[1] for p in points]).mean(axis=0)
        return geo.to_latlon(v)

    return mean_pos(ins), mean_pos(outs), len(ins), len(outs)
