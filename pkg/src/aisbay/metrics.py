"""Vessel-count and traffic metrics over classified timelines.

Counting runs on a fixed one-minute grid: a vessel is moving while inside
a leg, stationary while inside a stationary period (moving wins at shared
boundaries), absent otherwise.  Window averages for total/stationary
counts exclude the first and last days to suppress edge effects; the
moving average does not need the exclusion.
"""

from __future__ import annotations

import logging
import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from .classify import ClassifiedTimeline, TransitEvent
from .ingest import Category, VesselProfile

log = logging.getLogger(__name__)

STEP_S = 60
EDGE_EXCLUSION_DAYS = 3
DAY_S = 86400
GT_SPLIT = 10_000.0
YEAR_DAYS = 365.25

GT_BANDS = ("lt-split", "ge-split", "unknown")


def gt_band(profile: VesselProfile | None, split: float = GT_SPLIT) -> str:
    if profile is None or profile.gross_tonnage is None:
        return "unknown"
    return "lt-split" if profile.gross_tonnage < split else "ge-split"


@dataclass
class CountSeries:
    window: tuple[int, int]
    step_s: int
    minutes: np.ndarray  # sample timestamps
    moving: np.ndarray
    stationary: np.ndarray
    by_category: dict  # Category -> (moving, stationary) arrays
    by_gt_band: dict  # band -> (moving, stationary) arrays
    edge_exclusion_s: int

    @property
    def total(self) -> np.ndarray:
        return self.moving + self.stationary

    def _core_mask(self) -> np.ndarray:
        t0, t1 = self.window
        if t1 - t0 < 2 * self.edge_exclusion_s:
            raise ValueError("window shorter than twice the edge exclusion")
        return (self.minutes >= t0 + self.edge_exclusion_s) & (
            self.minutes < t1 - self.edge_exclusion_s
        )

    def averages(self) -> dict:
        """Window means; total/stationary skip the edge-exclusion margins."""
        core = self._core_mask()
        out = {
            "total": float(self.total[core].mean()),
            "stationary": float(self.stationary[core].mean()),
            "moving": float(self.moving.mean()),
        }
        for cat, (mov, sta) in self.by_category.items():
            out[f"{cat.value}:total"] = float((mov + sta)[core].mean())
            out[f"{cat.value}:stationary"] = float(sta[core].mean())
            out[f"{cat.value}:moving"] = float(mov.mean())
        for band, (mov, sta) in self.by_gt_band.items():
            out[f"gt:{band}:total"] = float((mov + sta)[core].mean())
        return out


def _fill_span(arr: np.ndarray, t0: int, step: int, a: float, b: float, value: int):
    """Set arr[i] = max(arr[i], value) for samples t0+step*i in [a, b]."""
    n = arr.size
    i0 = max(0, math.ceil((a - t0) / step))
    i1 = min(n - 1, math.floor((b - t0) / step))
    if i1 < i0:
        return
    np.maximum(arr[i0 : i1 + 1], value, out=arr[i0 : i1 + 1])


def vessel_status(
    timeline: ClassifiedTimeline, window: tuple[int, int], step_s: int = STEP_S
) -> np.ndarray:
    """0 = absent, 1 = stationary, 2 = moving on the sample grid."""
    t0, t1 = window
    n = (t1 - t0) // step_s
    arr = np.zeros(n, dtype=np.int8)
    for sp in timeline.stationary_periods:
        _fill_span(arr, t0, step_s, sp.start_ts, sp.end_ts, 1)
    for leg in timeline.legs:
        _fill_span(arr, t0, step_s, leg.start_ts, leg.end_ts, 2)
    return arr


def momentary_counts(
    timelines: list[ClassifiedTimeline],
    window: tuple[int, int],
    profiles: dict[int, VesselProfile] | None = None,
    edge_exclusion_days: float = EDGE_EXCLUSION_DAYS,
    step_s: int = STEP_S,
    gt_split: float = GT_SPLIT,
) -> CountSeries:
    """Minute-grid counts of moving/stationary vessels with breakdowns."""
    t0, t1 = window
    n = (t1 - t0) // step_s
    minutes = t0 + step_s * np.arange(n, dtype=np.int64)
    moving = np.zeros(n, dtype=np.int32)
    stationary = np.zeros(n, dtype=np.int32)
    by_cat = {
        cat: (np.zeros(n, np.int32), np.zeros(n, np.int32)) for cat in Category
    }
    by_band = {b: (np.zeros(n, np.int32), np.zeros(n, np.int32)) for b in GT_BANDS}

    for tl in timelines:
        status = vessel_status(tl, window, step_s)
        mov = status == 2
        sta = status == 1
        moving += mov
        stationary += sta
        prof = profiles.get(tl.mmsi) if profiles else None
        cat = prof.category if prof else Category.OTHER
        by_cat[cat][0][mov] += 1
        by_cat[cat][1][sta] += 1
        band = gt_band(prof, gt_split)
        by_band[band][0][mov] += 1
        by_band[band][1][sta] += 1

    return CountSeries(
        window=window,
        step_s=step_s,
        minutes=minutes,
        moving=moving,
        stationary=stationary,
        by_category=by_cat,
        by_gt_band=by_band,
        edge_exclusion_s=int(edge_exclusion_days * DAY_S),
    )


def count_at(timelines: list[ClassifiedTimeline], t: float) -> dict:
    """Instantaneous counts at an arbitrary time (moving wins boundaries)."""
    moving = stationary = 0
    for tl in timelines:
        if any(l.start_ts <= t <= l.end_ts for l in tl.legs):
            moving += 1
        elif any(sp.start_ts <= t <= sp.end_ts for sp in tl.stationary_periods):
            stationary += 1
    return {"moving": moving, "stationary": stationary, "total": moving + stationary}


# ---------------------------------------------------------------------------
# Transits
# ---------------------------------------------------------------------------


@dataclass
class TransitLedger:
    events: list[TransitEvent]
    window: tuple[int, int]
    rate_per_day: float
    in_rate: float
    out_rate: float
    hourly_in: np.ndarray  # events per hour-of-day per day, 24 bins
    hourly_out: np.ndarray
    by_category: dict
    by_gt_band: dict

    @property
    def n_days(self) -> float:
        return (self.window[1] - self.window[0]) / DAY_S


def transit_rates(
    events: list[TransitEvent],
    window: tuple[int, int],
    profiles: dict[int, VesselProfile] | None = None,
    gt_split: float = GT_SPLIT,
) -> TransitLedger:
    """Daily transit rates and the hourly in/out profile."""
    days = (window[1] - window[0]) / DAY_S
    if days <= 0:
        raise ValueError("empty window")
    hours_in = np.zeros(24)
    hours_out = np.zeros(24)
    n_in = n_out = 0
    by_cat: dict = defaultdict(int)
    by_band: dict = defaultdict(int)
    for e in events:
        hour = (e.t % DAY_S) // 3600
        if e.direction == "in":
            n_in += 1
            hours_in[hour] += 1
        else:
            n_out += 1
            hours_out[hour] += 1
        prof = profiles.get(e.mmsi) if profiles else None
        by_cat[prof.category if prof else Category.OTHER] += 1
        by_band[gt_band(prof, gt_split)] += 1

    return TransitLedger(
        events=events,
        window=window,
        rate_per_day=len(events) / days,
        in_rate=n_in / days,
        out_rate=n_out / days,
        hourly_in=hours_in / days,
        hourly_out=hours_out / days,
        by_category={k: v / days for k, v in by_cat.items()},
        by_gt_band={k: v / days for k, v in by_band.items()},
    )


# ---------------------------------------------------------------------------
# Daily cycle
# ---------------------------------------------------------------------------


def circular_moments(angles: np.ndarray, weights: np.ndarray) -> tuple[float, float]:
    """(resultant length, mean angle) of weighted circular data."""
    w = np.asarray(weights, dtype=float)
    total = w.sum()
    if total <= 0:
        return 0.0, 0.0
    c = float(np.sum(w * np.cos(angles)) / total)
    s = float(np.sum(w * np.sin(angles)) / total)
    return math.hypot(c, s), math.atan2(s, c)


@dataclass
class DailyProfile:
    bin_s: int
    bins: np.ndarray  # average value per time-of-day bin
    resultant: float  # R-bar of the binned mass
    mean_time_s: float | None  # circular mean; None when undefined
    sigma_c_hours: float | None
    mode_time_s: float  # center of the highest bin

    @property
    def n_bins(self) -> int:
        return self.bins.size


_RESULTANT_FLOOR = 1e-9


def daily_profile(
    times: np.ndarray, values: np.ndarray, bin_s: int = 240
) -> DailyProfile:
    """Fold a time series onto the 24 h cycle.

    Bin averages use all samples falling into each time-of-day bin; the
    circular mean/std come from the first trigonometric moment of the
    binned mass, the mode from the highest bin.
    """
    times = np.asarray(times, dtype=np.int64)
    values = np.asarray(values, dtype=float)
    if times.size == 0:
        raise ValueError("empty series")
    if times.max() - times.min() < DAY_S - bin_s:
        raise ValueError("need at least one day of data")
    if DAY_S % bin_s != 0:
        raise ValueError("bin size must divide one day")
    nbins = DAY_S // bin_s
    idx = (times % DAY_S) // bin_s
    sums = np.bincount(idx, weights=values, minlength=nbins)
    cnts = np.bincount(idx, minlength=nbins)
    with np.errstate(invalid="ignore"):
        bins = np.where(cnts > 0, sums / np.maximum(cnts, 1), 0.0)

    centers = (np.arange(nbins) + 0.5) * bin_s
    angles = 2.0 * np.pi * centers / DAY_S
    rbar, mean_angle = circular_moments(angles, bins)
    if rbar < _RESULTANT_FLOOR:
        mean_time, sigma_h = None, None
    else:
        mean_time = (mean_angle % (2.0 * np.pi)) / (2.0 * np.pi) * DAY_S
        sigma_h = math.sqrt(-2.0 * math.log(rbar)) / (2.0 * np.pi) * 24.0
    mode_time = float(centers[int(np.argmax(bins))])
    return DailyProfile(
        bin_s=bin_s,
        bins=bins,
        resultant=rbar,
        mean_time_s=mean_time,
        sigma_c_hours=sigma_h,
        mode_time_s=mode_time,
    )


# ---------------------------------------------------------------------------
# Area-cascade convergence and uncertainty combination
# ---------------------------------------------------------------------------


@dataclass
class ConvergenceFit:
    observations: list[tuple[int, float]]  # (M, N)
    n_low: float
    a: float
    residuals: np.ndarray  # log-space

    def predict(self, m) -> np.ndarray:
        m = np.asarray(m, dtype=float)
        return self.n_low * np.exp((m + 1.0) ** self.a)


def convergence_fit(observations: list[tuple[int, float]]) -> ConvergenceFit:
    """Fit N(M) = N_low * exp((M+1)^a), a < 0, by log-space least squares."""
    if len(observations) < 3:
        raise ValueError("need at least 3 observations")
    obs = sorted(observations)
    m = np.array([o[0] for o in obs], dtype=float)
    n = np.array([o[1] for o in obs], dtype=float)
    if np.any(n <= 0):
        raise ValueError("counts must be positive")
    if np.any(np.diff(n) >= 0):
        raise ValueError("counts must decrease with the included-area count")
    ln_n = np.log(n)

    def resid(params):
        ln_low, a = params
        return ln_n - (ln_low + (m + 1.0) ** a)

    x0 = np.array([math.log(n.min()), -1.0])
    fit = least_squares(
        resid,
        x0,
        bounds=([-np.inf, -np.inf], [np.inf, -1e-12]),
        xtol=1e-15,
        ftol=1e-15,
        gtol=1e-15,
    )
    n_low = float(math.exp(fit.x[0]))
    return ConvergenceFit(
        observations=obs, n_low=n_low, a=float(fit.x[1]), residuals=fit.fun
    )


def low_transit_rate(n_df: float, n_low: float, ndot_df: float) -> float:
    """Transit rate consistent with the lower vessel-count bound.

    Every vessel discounted from the default case is assumed to have left
    and re-entered once per day: ndot_low = ndot_df + 2 (n_df - n_low) / d.
    """
    if n_df < n_low:
        raise ValueError("n_df must be >= n_low")
    return ndot_df + 2.0 * (n_df - n_low)


SYMMETRIC = "symmetric"
UPPER = "upper"
LOWER = "lower"


@dataclass(frozen=True)
class UncertaintyComponent:
    name: str
    fraction: float
    direction: str  # SYMMETRIC | UPPER | LOWER

    def __post_init__(self):
        if self.fraction < 0:
            raise ValueError("fractions are magnitudes, >= 0")
        if self.direction not in (SYMMETRIC, UPPER, LOWER):
            raise ValueError(f"bad direction {self.direction}")


@dataclass
class UncertaintyLedger:
    components: list[UncertaintyComponent]
    upper: float  # combined fractional bound upward
    lower: float  # combined fractional bound downward

    def to_dict(self) -> dict:
        return {
            "components": [
                {"name": c.name, "fraction": c.fraction, "direction": c.direction}
                for c in self.components
            ],
            "upper": self.upper,
            "lower": self.lower,
        }


def combine_uncertainties(components: list[UncertaintyComponent]) -> UncertaintyLedger:
    """Quadrature combination; one-sided components feed only their side."""
    up = [c.fraction for c in components if c.direction in (SYMMETRIC, UPPER)]
    lo = [c.fraction for c in components if c.direction in (SYMMETRIC, LOWER)]
    return UncertaintyLedger(
        components=list(components),
        upper=math.sqrt(sum(x * x for x in up)),
        lower=math.sqrt(sum(x * x for x in lo)),
    )


# ---------------------------------------------------------------------------
# Gross tonnage
# ---------------------------------------------------------------------------


@dataclass
class GtAggregates:
    n_events: int
    coverage: float  # fraction of transit events with known GT
    mean_gt: float | None
    yearly_cumulative_gt: float | None
    share_lt_split: float  # of all events (lower bound given unknowns)
    share_ge_split: float
    share_unknown: float

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def gt_aggregates(
    events: list[TransitEvent],
    profiles: dict[int, VesselProfile],
    window: tuple[int, int],
    gt_split: float = GT_SPLIT,
) -> GtAggregates:
    """Mean GT per transit, yearly cumulative GT, and band shares."""
    gts = []
    n_lt = n_ge = n_unknown = 0
    for e in events:
        prof = profiles.get(e.mmsi)
        gt = prof.gross_tonnage if prof else None
        if gt is None:
            n_unknown += 1
        else:
            gts.append(gt)
            if gt < gt_split:
                n_lt += 1
            else:
                n_ge += 1
    n = len(events)
    days = (window[1] - window[0]) / DAY_S
    if not gts or days <= 0:
        return GtAggregates(n, 0.0, None, None, 0.0, 0.0, 1.0 if n else 0.0)
    total_gt = float(np.sum(gts))
    return GtAggregates(
        n_events=n,
        coverage=len(gts) / n,
        mean_gt=total_gt / len(gts),
        yearly_cumulative_gt=total_gt / days * YEAR_DAYS,
        share_lt_split=n_lt / n,
        share_ge_split=n_ge / n,
        share_unknown=n_unknown / n,
    )
