"""Compact per-leg movement model: simplified route + piecewise speeds.

The route is a recursive farthest-point simplification of the leg's
positions with a cross-track tolerance in meters; the speed profile greedily
merges consecutive inter-message speeds while every member stays within a
relative tolerance of the merged value.  Together they reconstruct the leg
within the stated tolerances at a fraction of the message count.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import geo
from .clean import Leg
from .geo import KNOT

log = logging.getLogger(__name__)

D_TOL_M = 10.0
SPEED_REL_TOL = 0.05
SPEED_FLOOR_KN = 0.5


def simplify_route(
    lats: np.ndarray, lons: np.ndarray, d_tol_m: float = D_TOL_M
) -> tuple[np.ndarray, np.ndarray]:
    """Douglas-Peucker on the sphere with geodesic cross-track distance.

    Returns (keep_idx, cover): indices of the kept vertices (endpoints
    always included) and, per input point, the original index of the start
    vertex of the final route edge that covers it.
    """
    lats = np.asarray(lats, dtype=float)
    lons = np.asarray(lons, dtype=float)
    n = lats.size
    if n < 2:
        raise ValueError("need at least 2 points")
    units = geo.to_unit(lats, lons)
    radius = geo.gaussian_radius(float(np.mean(lats)))

    keep = {0, n - 1}
    cover = np.zeros(n, dtype=np.int64)
    stack = [(0, n - 1)]
    while stack:
        i, j = stack.pop()
        if j - i < 2:
            continue
        d, _ = geo.arc_project(units[i + 1 : j], units[i], units[j])
        k = int(np.argmax(d))
        if d[k] * radius > d_tol_m:
            mid = i + 1 + k
            keep.add(mid)
            stack.append((i, mid))
            stack.append((mid, j))
        else:
            cover[i + 1 : j] = i
    keep_idx = np.array(sorted(keep), dtype=np.int64)
    cover[keep_idx] = keep_idx  # vertices cover themselves
    return keep_idx, cover


@dataclass
class Trajectory:
    mmsi: int
    start_ts: int
    end_ts: int
    route_lat: np.ndarray
    route_lon: np.ndarray
    cum_dist: np.ndarray  # meters at each vertex
    seg_t: np.ndarray  # group boundary times (message times), len g+1
    seg_s: np.ndarray  # group boundary cumulative distances, len g+1
    seg_v: np.ndarray  # m/s within each group, len g
    msg_t: np.ndarray | None = None  # source message times
    msg_s: np.ndarray | None = None  # their route-projected distances

    @property
    def length_m(self) -> float:
        return float(self.cum_dist[-1])

    @property
    def duration_s(self) -> float:
        return float(self.end_ts - self.start_ts)

    def position_at_s(self, s: float) -> tuple[float, float]:
        """Interpolate along the route at cumulative distance s."""
        s = min(max(s, 0.0), self.length_m)
        e = int(np.searchsorted(self.cum_dist, s, side="right")) - 1
        e = min(max(e, 0), len(self.cum_dist) - 2)
        span = self.cum_dist[e + 1] - self.cum_dist[e]
        frac = 0.0 if span <= 0 else (s - self.cum_dist[e]) / span
        a = geo.to_unit(self.route_lat[e], self.route_lon[e])
        b = geo.to_unit(self.route_lat[e + 1], self.route_lon[e + 1])
        return geo.to_latlon(geo.slerp_many(a, b, np.array([frac]))[0])

    def s_at_time(self, t: float) -> float:
        if not (self.start_ts <= t <= self.end_ts):
            raise ValueError("time outside the trajectory span")
        g = int(np.searchsorted(self.seg_t, t, side="right")) - 1
        g = min(max(g, 0), len(self.seg_v) - 1)
        return float(self.seg_s[g] + self.seg_v[g] * (t - self.seg_t[g]))

    def time_at_s(self, s: float, t_ref: float) -> float:
        """Earliest-|t - t_ref| time at which the model is at distance s.

        Zero-speed groups occupy an s point for a whole interval; the time
        within the interval closest to t_ref is returned.
        """
        s = min(max(s, 0.0), float(self.seg_s[-1]))
        best = None
        for g in range(len(self.seg_v)):
            s0, s1 = self.seg_s[g], self.seg_s[g + 1]
            if not (s0 <= s <= s1):
                continue
            if self.seg_v[g] > 0:
                t = self.seg_t[g] + (s - s0) / self.seg_v[g]
            else:
                t = min(max(t_ref, self.seg_t[g]), self.seg_t[g + 1])
            if best is None or abs(t - t_ref) < abs(best - t_ref):
                best = float(t)
        return best if best is not None else float(self.seg_t[0])


def fit_speed_profile(
    times: np.ndarray,
    s: np.ndarray,
    rel_tol: float = SPEED_REL_TOL,
    floor_kn: float = SPEED_FLOOR_KN,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Greedy merge of constant-speed stretches along the route.

    times/s are per message; returns (seg_t, seg_s, seg_v).  A merge is
    accepted while the segment speed reconstructs every member interval
    faster than floor_kn within rel_tol relative error.
    """
    times = np.asarray(times, dtype=float)
    s = np.asarray(s, dtype=float)
    if np.any(np.diff(times) <= 0):
        raise ValueError("message times must be strictly increasing")
    n = times.size
    floor = floor_kn * KNOT
    dv = np.diff(s) / np.diff(times)

    bounds = [0]
    g0 = 0
    for e in range(2, n):
        v_seg = (s[e] - s[g0]) / (times[e] - times[g0])
        ok = True
        for i in range(g0, e):
            if dv[i] <= floor:
                continue
            if abs(dv[i] - v_seg) > rel_tol * dv[i]:
                ok = False
                break
        if not ok:
            bounds.append(e - 1)
            g0 = e - 1
    bounds.append(n - 1)

    seg_t = times[bounds]
    seg_s = s[bounds]
    with np.errstate(invalid="ignore"):
        seg_v = np.diff(seg_s) / np.diff(seg_t)
    return seg_t, seg_s, seg_v


def build_trajectory(leg: Leg, d_tol_m: float = D_TOL_M,
                     rel_tol: float = SPEED_REL_TOL) -> Trajectory:
    """Simplify a leg into a route + speed profile."""
    lats = np.array([m.lat for m in leg.messages])
    lons = np.array([m.lon for m in leg.messages])
    times = np.array([m.timestamp for m in leg.messages], dtype=float)

    keep_idx, cover = simplify_route(lats, lons, d_tol_m)
    route_lat = lats[keep_idx]
    route_lon = lons[keep_idx]
    edge_len = np.atleast_1d(
        geo.distance(route_lat[:-1], route_lon[:-1], route_lat[1:], route_lon[1:])
    )
    cum = np.concatenate([[0.0], np.cumsum(edge_len)])

    # project every message onto its covering edge -> cumulative distance
    vert_pos = {int(k): i for i, k in enumerate(keep_idx)}
    units = geo.to_unit(lats, lons)
    s = np.empty(times.size)
    for i in range(times.size):
        if i in vert_pos:
            s[i] = cum[vert_pos[i]]
            continue
        e = vert_pos[int(cover[i])]
        a = geo.to_unit(route_lat[e], route_lon[e])
        b = geo.to_unit(route_lat[e + 1], route_lon[e + 1])
        _, frac = geo.arc_project(units[i], a, b)
        s[i] = cum[e] + frac * edge_len[e]
    s = np.maximum.accumulate(s)  # keep the parameterization monotone

    seg_t, seg_s, seg_v = fit_speed_profile(times, s, rel_tol)
    return Trajectory(
        mmsi=leg.mmsi,
        start_ts=leg.start_ts,
        end_ts=leg.end_ts,
        route_lat=route_lat,
        route_lon=route_lon,
        cum_dist=cum,
        seg_t=seg_t,
        seg_s=seg_s,
        seg_v=seg_v,
        msg_t=times,
        msg_s=s,
    )


def model_position_at(traj: Trajectory, t: float) -> tuple[float, float]:
    """Model position at time t (start <= t <= end)."""
    return traj.position_at_s(traj.s_at_time(t))


def route_nearest(traj: Trajectory, lat: float, lon: float) -> tuple[float, float]:
    """(distance_m, s) of the nearest point on the route to (lat, lon).

    Exact per-edge great-circle projection; ties between equidistant edges
    keep all candidates (callers pick by timing).
    """
    cands = route_nearest_candidates(traj, lat, lon)
    d, s = cands[0]
    return d, s


def route_nearest_candidates(traj: Trajectory, lat: float, lon: float,
                             tie_eps_m: float = 1e-6) -> list[tuple[float, float]]:
    p = geo.to_unit(lat, lon)
    radius = geo.gaussian_radius(float(np.mean(traj.route_lat)))
    best: list[tuple[float, float]] = []
    for e in range(len(traj.route_lat) - 1):
        a = geo.to_unit(traj.route_lat[e], traj.route_lon[e])
        b = geo.to_unit(traj.route_lat[e + 1], traj.route_lon[e + 1])
        d_rad, frac = geo.arc_project(p, a, b)
        d_m = d_rad * radius
        s = traj.cum_dist[e] + frac * (traj.cum_dist[e + 1] - traj.cum_dist[e])
        best.append((float(d_m), float(s)))
    dmin = min(b[0] for b in best)
    return sorted(
        [(d, s) for d, s in best if d <= dmin + tie_eps_m], key=lambda x: x[0]
    )


@dataclass
class FidelityReport:
    """Deviation statistics between original messages and the model."""

    n_messages: int
    pos_at_time_median_m: float
    pos_at_time_p90_m: float
    route_median_m: float
    route_p90_m: float
    timing_median_s: float
    timing_p90_s: float
    rel_pos_median: float  # position deviation / leg route length
    rel_timing_median: float  # timing deviation / leg duration

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def fidelity_report(legs: list[Leg], trajectories: list[Trajectory]) -> FidelityReport:
    """Compare message positions/times against the trajectory model."""
    d_time: list[float] = []
    d_route: list[float] = []
    d_timing: list[float] = []
    rel_pos: list[float] = []
    rel_t: list[float] = []

    for leg, traj in zip(legs, trajectories):
        for m in leg.messages:
            mp = model_position_at(traj, m.timestamp)
            dt_m = float(geo.distance(m.lat, m.lon, *mp))
            d_time.append(dt_m)

            cands = route_nearest_candidates(traj, m.lat, m.lon)
            d_route.append(cands[0][0])
            t_near = None
            for _, s in cands:
                t = traj.time_at_s(s, m.timestamp)
                if t_near is None or abs(t - m.timestamp) < abs(t_near - m.timestamp):
                    t_near = t
            dt_s = abs(t_near - m.timestamp)
            d_timing.append(dt_s)

            if traj.length_m > 0:
                rel_pos.append(dt_m / traj.length_m)
            if traj.duration_s > 0:
                rel_t.append(dt_s / traj.duration_s)

    def med_p90(x):
        if not x:
            return 0.0, 0.0
        return float(np.median(x)), float(np.percentile(x, 90))

    pm, pp = med_p90(d_time)
    rm, rp = med_p90(d_route)
    tm, tp = med_p90(d_timing)
    return FidelityReport(
        n_messages=len(d_time),
        pos_at_time_median_m=pm,
        pos_at_time_p90_m=pp,
        route_median_m=rm,
        route_p90_m=rp,
        timing_median_s=tm,
        timing_p90_s=tp,
        rel_pos_median=float(np.median(rel_pos)) if rel_pos else 0.0,
        rel_timing_median=float(np.median(rel_t)) if rel_t else 0.0,
    )


def to_geojson_feature(traj: Trajectory) -> dict:
    """GeoJSON LineString with per-vertex cumulative distance and the
    speed profile as parallel arrays."""
    return {
        "type": "Feature",
        "geometry": {
            "type": "LineString",
            "coordinates": [
                [float(lon), float(lat)]
                for lat, lon in zip(traj.route_lat, traj.route_lon)
            ],
        },
        "properties": {
            "mmsi": traj.mmsi,
            "start_t": int(traj.start_ts),
            "end_t": int(traj.end_ts),
            "cum_dist_m": [float(x) for x in traj.cum_dist],
            "profile_t": [float(x) for x in traj.seg_t],
            "profile_s_m": [float(x) for x in traj.seg_s],
            "profile_v_mps": [float(x) for x in traj.seg_v],
        },
    }


def from_geojson_feature(feat: dict) -> Trajectory:
    props = feat["properties"]
    coords = feat["geometry"]["coordinates"]
    return Trajectory(
        mmsi=int(props["mmsi"]),
        start_ts=int(props["start_t"]),
        end_ts=int(props["end_t"]),
        route_lat=np.array([c[1] for c in coords]),
        route_lon=np.array([c[0] for c in coords]),
        cum_dist=np.array(props["cum_dist_m"]),
        seg_t=np.array(props["profile_t"]),
        seg_s=np.array(props["profile_s_m"]),
        seg_v=np.array(props["profile_v_mps"]),
    )
