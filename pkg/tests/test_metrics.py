import math

import numpy as np
import pytest

from aisbay import classify, clean, metrics
from aisbay.classify import ClassifiedTimeline
from aisbay.metrics import (
    LOWER, SYMMETRIC, UPPER, UncertaintyComponent, combine_uncertainties,
    convergence_fit, daily_profile, low_transit_rate,
)

from conftest import east_track


DAY = 86400


def timeline(mmsi, legs=(), stationary=()):
    sp = [
        clean.StationaryPeriod(mmsi, a, b, 35.3, 139.8) for a, b in stationary
    ]
    leg_objs = []
    for a, b in legs:
        n = max(2, int((b - a) / 60) + 1)
        msgs = east_track(mmsi, a, n, (b - a) // (n - 1) or 1, 5.0)
        leg_objs.append(clean.Leg(mmsi, msgs))
    from collections import Counter

    return ClassifiedTimeline(mmsi, leg_objs, [], sp, Counter(), [], 0)


# ---------------------------------------------------------------------------
# momentary counts
# ---------------------------------------------------------------------------


def test_vessel_moored_whole_window():
    window = (0, 10 * DAY)
    tl = timeline(1, stationary=[(0, 10 * DAY)])
    series = metrics.momentary_counts([tl], window)
    avg = series.averages()
    assert avg["total"] == 1.0
    assert avg["stationary"] == 1.0
    assert avg["moving"] == 0.0


def test_alternating_hourly_split():
    window = (0, 8 * DAY)
    legs, stat = [], []
    t = 0
    while t < 8 * DAY:
        legs.append((t, t + 3600 - 60))
        stat.append((t + 3600, t + 7200 - 60))
        t += 7200
    tl = timeline(1, legs=legs, stationary=stat)
    series = metrics.momentary_counts([tl], window)
    avg = series.averages()
    assert avg["moving"] == pytest.approx(0.5, abs=0.01)
    assert avg["stationary"] == pytest.approx(0.5, abs=0.01)


def test_scripted_fleet_matches_analytic_average():
    window = (0, 10 * DAY)
    tls = []
    # vessel k moored the first k days, absent afterwards
    for k in range(1, 11):
        tls.append(timeline(k, stationary=[(0, k * DAY)]))
    series = metrics.momentary_counts(tls, window, edge_exclusion_days=3)
    # within the core window [3d, 7d): vessel k present while t < k days
    # expected average of presence over the core
    expected = 0.0
    for k in range(1, 11):
        overlap = min(max(k - 3, 0), 4) / 4.0
        expected += overlap
    avg = series.averages()
    assert avg["total"] == pytest.approx(expected, abs=0.01)


def test_counts_identity_total_moving_stationary():
    window = (0, 7 * DAY)
    tl1 = timeline(1, legs=[(0, 2 * DAY)], stationary=[(2 * DAY, 7 * DAY)])
    tl2 = timeline(2, stationary=[(DAY, 5 * DAY)])
    series = metrics.momentary_counts([tl1, tl2], window)
    np.testing.assert_array_equal(series.total, series.moving + series.stationary)
    # category counts sum to the all-vessel counts at every instant
    cat_mov = sum(m for m, _ in series.by_category.values())
    cat_sta = sum(s for _, s in series.by_category.values())
    np.testing.assert_array_equal(cat_mov, series.moving)
    np.testing.assert_array_equal(cat_sta, series.stationary)


def test_short_window_rejects_averages():
    tl = timeline(1, stationary=[(0, 4 * DAY)])
    series = metrics.momentary_counts([tl], (0, 4 * DAY), edge_exclusion_days=3)
    with pytest.raises(ValueError):
        series.averages()


def test_moving_takes_precedence_at_boundary():
    tl = timeline(1, legs=[(3600, 7200)], stationary=[(0, 3600), (7200, 10800)])
    status = metrics.vessel_status(tl, (0, 10800), 60)
    assert status[60] == 2  # minute at 3600 belongs to the leg
    assert status[59] == 1


# ---------------------------------------------------------------------------
# transit rates
# ---------------------------------------------------------------------------


def make_events(times_dirs):
    return [
        classify.TransitEvent(t, 100 + i, d, 35.0, 139.9)
        for i, (t, d) in enumerate(times_dirs)
    ]


def test_daily_round_trips():
    events = []
    for day in range(10):
        for v in range(10):
            events.append(classify.TransitEvent(day * DAY + 3600 * v, v, "out", 35.0, 139.9))
            events.append(classify.TransitEvent(day * DAY + 3600 * v + 1800, v, "in", 35.0, 139.9))
    ledger = metrics.transit_rates(events, (0, 10 * DAY))
    assert ledger.rate_per_day == pytest.approx(20.0)
    assert ledger.in_rate == pytest.approx(10.0)
    assert ledger.out_rate == pytest.approx(10.0)


def test_hourly_histogram_matches_schedule():
    events = make_events([(h * 3600 + 30, "in") for h in range(24)] * 2)
    ledger = metrics.transit_rates(events, (0, 2 * DAY))
    np.testing.assert_allclose(ledger.hourly_in, np.ones(24))
    np.testing.assert_allclose(ledger.hourly_out, np.zeros(24))


def test_net_rate_integrates_to_count_change():
    # event timeline: all presence changes flow through transit events
    window = (0, 2 * DAY)
    tls = [
        timeline(1, stationary=[(0, DAY)]),            # out at t = 1 d
        timeline(2, stationary=[(DAY, 2 * DAY)]),      # in at t = 1 d
        timeline(3, stationary=[(0, 2 * DAY)]),
    ]
    events = [
        classify.TransitEvent(DAY, 1, "out", 35.0, 139.9),
        classify.TransitEvent(DAY, 2, "in", 35.0, 139.9),
    ]
    for t0, t1 in ((0, DAY - 1), (DAY + 1, 2 * DAY - 1), (0, 2 * DAY - 1)):
        n0 = metrics.count_at(tls, t0)["total"]
        n1 = metrics.count_at(tls, t1)["total"]
        net = sum(1 if e.direction == "in" else -1 for e in events if t0 < e.t <= t1)
        assert n1 - n0 == net


# ---------------------------------------------------------------------------
# daily profile
# ---------------------------------------------------------------------------


def test_profile_single_spike():
    times = np.arange(0, 3 * DAY, 60)
    values = np.where((times % DAY) == 12 * 3600, 100.0, 0.0)
    prof = daily_profile(times, values)
    assert prof.mean_time_s == pytest.approx(12 * 3600, abs=prof.bin_s)
    assert prof.sigma_c_hours == pytest.approx(0.0, abs=0.05)
    assert prof.mode_time_s == pytest.approx(12 * 3600, abs=prof.bin_s)


def test_profile_uniform_flagged_undefined():
    times = np.arange(0, 2 * DAY, 60)
    prof = daily_profile(times, np.ones(times.size))
    assert prof.resultant < 1e-9
    assert prof.mean_time_s is None and prof.sigma_c_hours is None


def test_profile_antipodal_spikes_cancel():
    times = np.arange(0, 2 * DAY, 60)
    tod = times % DAY
    values = np.where((tod == 6 * 3600) | (tod == 18 * 3600), 50.0, 0.0)
    prof = daily_profile(times, values)
    assert prof.resultant == pytest.approx(0.0, abs=1e-12)
    assert prof.mean_time_s is None


def test_profile_recovers_von_mises_parameters(rng):
    kappa = 8.0
    mu = 2.0 * np.pi * 9.5 / 24.0
    samples = rng.vonmises(mu, kappa, 200_000)
    tod = ((samples % (2 * np.pi)) / (2 * np.pi) * DAY).astype(int)
    minutes = (tod // 60) * 60
    counts = np.bincount(minutes // 60, minlength=DAY // 60).astype(float)
    times = np.arange(0, DAY, 60)
    prof = daily_profile(times, counts)
    assert prof.mean_time_s == pytest.approx(9.5 * 3600, abs=300)
    # circular std of a von Mises: sqrt(-2 ln(I1/I0(kappa)))
    from scipy.special import iv

    rbar = iv(1, kappa) / iv(0, kappa)
    expected_h = math.sqrt(-2 * math.log(rbar)) / (2 * np.pi) * 24
    assert prof.sigma_c_hours == pytest.approx(expected_h, rel=0.05)


def test_circular_moments_match_brute_force(rng):
    angles = rng.uniform(0, 2 * np.pi, 10_000)
    weights = rng.uniform(0, 5, 10_000)
    r, mean = metrics.circular_moments(angles, weights)
    c = sum(w * math.cos(a) for a, w in zip(angles, weights)) / weights.sum()
    s = sum(w * math.sin(a) for a, w in zip(angles, weights)) / weights.sum()
    assert r == pytest.approx(math.hypot(c, s), abs=1e-12)
    assert mean == pytest.approx(math.atan2(s, c), abs=1e-12)


def test_profile_needs_a_full_day():
    with pytest.raises(ValueError):
        daily_profile(np.arange(0, 3600, 60), np.ones(60))


# ---------------------------------------------------------------------------
# convergence fit / low transit rate
# ---------------------------------------------------------------------------


def test_convergence_fit_noiseless_recovery():
    obs = [(m, 100.0 * math.exp((m + 1) ** -0.5)) for m in range(1, 11)]
    fit = convergence_fit(obs)
    assert fit.n_low == pytest.approx(100.0, rel=1e-6)
    assert fit.a == pytest.approx(-0.5, abs=1e-6)


def test_convergence_fit_asymptote():
    obs = [(m, 250.0 * math.exp((m + 1) ** -0.8)) for m in range(1, 9)]
    fit = convergence_fit(obs)
    assert fit.predict(1e9) == pytest.approx(fit.n_low, rel=1e-6)
    assert fit.a < 0
    assert fit.n_low <= min(n for _, n in obs) * math.e


def test_convergence_fit_rejects_non_decreasing():
    obs = [(1, 100.0), (2, 101.0), (3, 99.0)]
    with pytest.raises(ValueError):
        convergence_fit(obs)


def test_low_transit_rate_reference_row():
    # displayed-value check: (381.0, 370.8, 292.7) -> 312.9 within 0.5
    assert low_transit_rate(381.0, 370.8, 292.7) == pytest.approx(312.9, abs=0.5)


def test_low_transit_rate_degenerate_and_arithmetic():
    assert low_transit_rate(100.0, 100.0, 42.0) == 42.0
    assert low_transit_rate(100.0, 90.0, 0.0) == pytest.approx(20.0)
    with pytest.raises(ValueError):
        low_transit_rate(90.0, 100.0, 0.0)


# ---------------------------------------------------------------------------
# uncertainty combination
# ---------------------------------------------------------------------------


def test_quadrature_three_four_five():
    ledger = combine_uncertainties([
        UncertaintyComponent("a", 0.03, SYMMETRIC),
        UncertaintyComponent("b", 0.04, SYMMETRIC),
    ])
    assert ledger.upper == pytest.approx(0.05)
    assert ledger.lower == pytest.approx(0.05)


def test_lower_only_component():
    ledger = combine_uncertainties([UncertaintyComponent("low", 0.027, LOWER)])
    assert ledger.lower == pytest.approx(0.027)
    assert ledger.upper == 0.0


def test_upper_only_plus_symmetric():
    ledger = combine_uncertainties([
        UncertaintyComponent("dark", 0.16, UPPER),
        UncertaintyComponent("conf", 0.028, SYMMETRIC),
    ])
    assert ledger.upper == pytest.approx(math.sqrt(0.16**2 + 0.028**2), rel=1e-12)
    assert ledger.upper == pytest.approx(0.162, abs=5e-4)
    assert ledger.lower == pytest.approx(0.028)


def test_adding_component_never_shrinks_bounds(rng):
    comps = []
    prev_up = prev_lo = 0.0
    for i in range(20):
        comps.append(UncertaintyComponent(
            f"c{i}", float(rng.uniform(0, 0.2)),
            str(rng.choice([SYMMETRIC, UPPER, LOWER])),
        ))
        ledger = combine_uncertainties(comps)
        assert ledger.upper >= prev_up - 1e-15
        assert ledger.lower >= prev_lo - 1e-15
        prev_up, prev_lo = ledger.upper, ledger.lower


def test_component_validation():
    with pytest.raises(ValueError):
        UncertaintyComponent("bad", -0.1, SYMMETRIC)
    with pytest.raises(ValueError):
        UncertaintyComponent("bad", 0.1, "sideways")


# ---------------------------------------------------------------------------
# GT aggregates
# ---------------------------------------------------------------------------


def _profiles(gts):
    from aisbay.ingest import Category, VesselProfile

    return {
        mmsi: VesselProfile(mmsi=mmsi, category=Category.CARGO, gross_tonnage=gt)
        for mmsi, gt in gts.items()
    }


def test_gt_mean_and_shares():
    events = [
        classify.TransitEvent(0, 1, "in", 35.0, 139.9),
        classify.TransitEvent(10, 2, "in", 35.0, 139.9),
    ]
    agg = metrics.gt_aggregates(events, _profiles({1: 5000.0, 2: 15000.0}), (0, DAY))
    assert agg.mean_gt == pytest.approx(10000.0)
    assert agg.share_lt_split == 0.5
    assert agg.share_ge_split == 0.5
    assert agg.coverage == 1.0


def test_gt_absent_data():
    events = [classify.TransitEvent(0, 1, "in", 35.0, 139.9)]
    agg = metrics.gt_aggregates(events, {}, (0, DAY))
    assert agg.coverage == 0.0
    assert agg.mean_gt is None and agg.yearly_cumulative_gt is None


def test_gt_cumulative_extrapolation():
    events = [
        classify.TransitEvent(t, 1, "in", 35.0, 139.9) for t in range(0, DAY, 7200)
    ]
    agg = metrics.gt_aggregates(events, _profiles({1: 1000.0}), (0, DAY))
    assert agg.yearly_cumulative_gt == pytest.approx(12 * 1000.0 * 365.25)
