import numpy as np
import pytest

from aisbay import clean, geo, trajectory
from aisbay.geo import KNOT

from conftest import east_track, pos_msg


def leg_from_positions(positions, dt=60, sogs=None):
    msgs = []
    for i, (la, lo) in enumerate(positions):
        sog = sogs[i] if sogs else 10.0
        msgs.append(pos_msg(1, i * dt, la, lo, sog=sog))
    return clean.Leg(1, msgs)


def brute_force_max_route_deviation(lats, lons, keep_idx):
    """Largest distance from any input point to the simplified polyline."""
    units = geo.to_unit(np.asarray(lats), np.asarray(lons))
    radius = geo.gaussian_radius(float(np.mean(lats)))
    worst = 0.0
    for i in range(len(lats)):
        best = np.inf
        for a, b in zip(keep_idx[:-1], keep_idx[1:]):
            d, _ = geo.arc_project(units[i], units[a], units[b])
            best = min(best, d * radius)
        worst = max(worst, best)
    return worst


def test_collinear_points_collapse_to_two_vertices():
    pts = [geo.direct(35.2, 139.8, 90.0, 100.0 * i) for i in range(100)]
    keep, cover = trajectory.simplify_route(
        np.array([p[0] for p in pts]), np.array([p[1] for p in pts]), 10.0
    )
    assert list(keep) == [0, 99]
    assert np.all(cover[1:-1] == 0)


def test_offset_point_beyond_tolerance_is_kept():
    pts = [geo.direct(35.2, 139.8, 90.0, 100.0 * i) for i in range(21)]
    mid_lat, mid_lon = geo.direct(pts[10][0], pts[10][1], 0.0, 11.0)  # 11 m off
    pts[10] = (mid_lat, mid_lon)
    keep, _ = trajectory.simplify_route(
        np.array([p[0] for p in pts]), np.array([p[1] for p in pts]), 10.0
    )
    assert list(keep) == [0, 10, 20]


def test_random_walk_stays_within_tolerance(rng):
    lat, lon = 35.2, 139.8
    lats, lons = [lat], [lon]
    heading = 90.0
    for _ in range(300):
        heading += rng.normal(0.0, 25.0)
        lat, lon = geo.direct(lat, lon, heading, rng.uniform(20.0, 200.0))
        lats.append(lat)
        lons.append(lon)
    keep, _ = trajectory.simplify_route(np.array(lats), np.array(lons), 10.0)
    worst = brute_force_max_route_deviation(lats, lons, list(keep))
    assert worst <= 10.0 + 1e-6
    assert len(keep) < len(lats)


def test_simplification_never_lengthens_route(rng):
    lat, lon = 35.2, 139.8
    lats, lons = [lat], [lon]
    heading = 90.0
    for _ in range(100):
        heading += rng.normal(0.0, 40.0)
        lat, lon = geo.direct(lat, lon, heading, rng.uniform(30.0, 120.0))
        lats.append(lat)
        lons.append(lon)
    keep, _ = trajectory.simplify_route(np.array(lats), np.array(lons), 10.0)
    full = float(
        np.sum(geo.distance(np.array(lats[:-1]), np.array(lons[:-1]),
                            np.array(lats[1:]), np.array(lons[1:])))
    )
    ka = np.array(lats)[keep]
    ko = np.array(lons)[keep]
    simplified = float(np.sum(geo.distance(ka[:-1], ko[:-1], ka[1:], ko[1:])))
    assert simplified <= full + 1e-9


# ---------------------------------------------------------------------------
# speed profile
# ---------------------------------------------------------------------------


def test_constant_speed_single_segment():
    leg = clean.Leg(1, east_track(1, 0, 30, 60, 10 * KNOT))
    traj = trajectory.build_trajectory(leg)
    assert len(traj.seg_v) == 1
    assert traj.seg_v[0] == pytest.approx(10 * KNOT, rel=1e-3)


def test_speed_doubling_needs_two_segments():
    msgs = []
    lat, lon = 35.2, 139.8
    t = 0
    for i in range(15):
        msgs.append(pos_msg(1, t, lat, lon, sog=10.0))
        lat, lon = geo.direct(lat, lon, 90.0, 60 * 10 * KNOT)
        t += 60
    for i in range(15):
        msgs.append(pos_msg(1, t, lat, lon, sog=20.0))
        lat, lon = geo.direct(lat, lon, 90.0, 60 * 20 * KNOT)
        t += 60
    traj = trajectory.build_trajectory(clean.Leg(1, msgs))
    assert len(traj.seg_v) == 2


def test_noisy_constant_speed_merges_to_one_segment(rng):
    # 10 kn +- 0.4 kn per interval stays within the 5% relative tolerance
    msgs = []
    lat, lon = 35.2, 139.8
    t = 0
    for i in range(40):
        msgs.append(pos_msg(1, t, lat, lon, sog=10.0))
        v = (10.0 + rng.uniform(-0.4, 0.4)) * KNOT
        lat, lon = geo.direct(lat, lon, 90.0, 60 * v)
        t += 60
    traj = trajectory.build_trajectory(clean.Leg(1, msgs))
    assert len(traj.seg_v) == 1
    # oracle: every interval speed within 5% of its segment value
    s = np.interp([m.timestamp for m in msgs], traj.seg_t, traj.seg_s)
    dv = np.diff(s) / 60.0
    vseg = traj.seg_v[0]
    fast = dv > 0.5 * KNOT
    assert np.all(np.abs(dv[fast] - vseg) <= 0.05 * vseg + 1e-9)


def test_profile_reconstructs_interval_speeds_within_tolerance(rng):
    # varying speeds; per-interval reconstruction error < 5% above 0.5 kn
    msgs = []
    lat, lon = 35.2, 139.8
    t = 0
    v_kn = 8.0
    for i in range(120):
        msgs.append(pos_msg(1, t, lat, lon, sog=round(v_kn, 1)))
        v_kn = float(np.clip(v_kn + rng.normal(0, 0.8), 2.0, 20.0))
        lat, lon = geo.direct(lat, lon, 90.0, 60 * v_kn * KNOT)
        t += 60
    leg = clean.Leg(1, msgs)
    traj = trajectory.build_trajectory(leg)

    # oracle: per-interval relative error of the model against the
    # route-projected message speeds
    times = traj.msg_t
    dv = np.diff(traj.msg_s) / np.diff(times)
    model_s = np.array([traj.s_at_time(t) for t in times])
    model_dv = np.diff(model_s) / np.diff(times)
    mask = dv > 0.5 * KNOT
    rel = np.abs(model_dv[mask] - dv[mask]) / dv[mask]
    assert np.max(rel) < 0.05 + 1e-9


# ---------------------------------------------------------------------------
# model evaluation
# ---------------------------------------------------------------------------


def test_position_at_start_is_first_vertex():
    leg = clean.Leg(1, east_track(1, 0, 10, 60, 10 * KNOT))
    traj = trajectory.build_trajectory(leg)
    lat, lon = trajectory.model_position_at(traj, traj.start_ts)
    assert lat == pytest.approx(traj.route_lat[0], abs=1e-9)
    assert lon == pytest.approx(traj.route_lon[0], abs=1e-9)


def test_constant_speed_midpoint():
    leg = clean.Leg(1, east_track(1, 0, 11, 60, 10 * KNOT))
    traj = trajectory.build_trajectory(leg)
    t_mid = (traj.start_ts + traj.end_ts) / 2
    lat, lon = trajectory.model_position_at(traj, t_mid)
    expect = traj.position_at_s(traj.length_m / 2)
    assert geo.distance(lat, lon, *expect) < 1e-6


def test_model_against_numeric_integration():
    msgs = []
    lat, lon = 35.2, 139.8
    t = 0
    for v_kn, n in ((8.0, 10), (16.0, 10), (4.0, 10)):
        for _ in range(n):
            msgs.append(pos_msg(1, t, lat, lon, sog=v_kn))
            lat, lon = geo.direct(lat, lon, 90.0, 60 * v_kn * KNOT)
            t += 60
    traj = trajectory.build_trajectory(clean.Leg(1, msgs))
    # integrate the profile on a fine time grid and compare positions
    for t_query in range(0, t - 60, 137):
        s = 0.0
        step = 0.1
        tt = traj.start_ts
        while tt + step <= t_query:
            g = np.searchsorted(traj.seg_t, tt, side="right") - 1
            g = min(max(g, 0), len(traj.seg_v) - 1)
            s += traj.seg_v[g] * step
            tt += step
        la1, lo1 = trajectory.model_position_at(traj, t_query)
        la2, lo2 = traj.position_at_s(s)
        assert geo.distance(la1, lo1, la2, lo2) < 1.0


def test_exceeding_span_raises():
    leg = clean.Leg(1, east_track(1, 0, 5, 60, 10 * KNOT))
    traj = trajectory.build_trajectory(leg)
    with pytest.raises(ValueError):
        trajectory.model_position_at(traj, traj.end_ts + 1)


# ---------------------------------------------------------------------------
# fidelity
# ---------------------------------------------------------------------------


def test_fidelity_exact_model_zero_medians():
    # deviations bottom out at the 6-decimal coordinate rounding (~10 cm)
    leg = clean.Leg(1, east_track(1, 0, 20, 60, 10 * KNOT))
    traj = trajectory.build_trajectory(leg)
    rep = trajectory.fidelity_report([leg], [traj])
    assert rep.pos_at_time_median_m < 0.5
    assert rep.route_median_m < 0.15
    assert rep.timing_median_s < 0.5
    assert rep.route_p90_m >= rep.route_median_m >= 0


def test_fidelity_route_median_within_tolerance_for_rounded_tracks(rng):
    legs, trajs = [], []
    for k in range(5):
        msgs = []
        lat, lon = 35.2 + 0.01 * k, 139.8
        heading = rng.uniform(0, 360)
        t = 0
        for i in range(60):
            msgs.append(pos_msg(1, t, lat, lon, sog=10.0))
            heading += rng.normal(0, 5.0)
            lat, lon = geo.direct(lat, lon, heading, 60 * 10 * KNOT)
            t += 60
        leg = clean.Leg(1, msgs)
        legs.append(leg)
        trajs.append(trajectory.build_trajectory(leg))
    rep = trajectory.fidelity_report(legs, trajs)
    assert rep.route_median_m <= 10.0
    assert rep.route_p90_m <= 10.0 + 1e-6
