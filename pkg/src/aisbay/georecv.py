"""Locate AIS receivers from radio-shadow geodesic segments.

Extended shadow lines focus at the receiver: every pair of shadow great
circles intersects near it.  The pipeline intersects all pairs, rejects
outliers under a von Mises-Fisher model, weights pairs by the sine of
their enclosing angle (near-parallel pairs carry no information), and
summarizes the cloud with spherical mean/median positions plus
Kent-distribution containment and Hotelling-style confidence ellipses.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import betaincinv

from . import geo

log = logging.getLogger(__name__)

WEIGHT_CUTOFF = 0.02
OUTLIER_ALPHA = 0.05
MEDIAN_TOL_RAD = 1e-12
MEDIAN_MIN_SEGMENTS = 7  # below this the median confidence ellipse is suppressed
EARTH_RADIUS_KM = 6371.0


class DegenerateGeometry(ValueError):
    pass


@dataclass
class ShadowSegment:
    id: str
    lat1: float
    lon1: float
    lat2: float
    lon2: float
    receiver: str = ""

    def __post_init__(self):
        if (self.lat1, self.lon1) == (self.lat2, self.lon2):
            raise ValueError("segment endpoints must be distinct")

    @property
    def units(self) -> tuple[np.ndarray, np.ndarray]:
        return geo.to_unit(self.lat1, self.lon1), geo.to_unit(self.lat2, self.lon2)


def load_segments(source) -> list[ShadowSegment]:
    """GeoJSON LineString features with property receiver_association."""
    if isinstance(source, str):
        with open(source) as fh:
            source = json.load(fh)
    out = []
    for i, feat in enumerate(source["features"]):
        geom = feat["geometry"]
        if geom["type"] != "LineString":
            raise ValueError("shadow segments must be LineString features")
        coords = geom["coordinates"]
        props = feat.get("properties", {})
        out.append(
            ShadowSegment(
                id=str(props.get("id", i)),
                lat1=coords[0][1],
                lon1=coords[0][0],
                lat2=coords[-1][1],
                lon2=coords[-1][0],
                receiver=str(props.get("receiver_association", "")),
            )
        )
    return out


def segments_to_geojson(segments: list[ShadowSegment]) -> dict:
    return {
        "type": "FeatureCollection",
        "features": [
            {
                "type": "Feature",
                "geometry": {
                    "type": "LineString",
                    "coordinates": [[s.lon1, s.lat1], [s.lon2, s.lat2]],
                },
                "properties": {"id": s.id, "receiver_association": s.receiver},
            }
            for s in segments
        ],
    }


@dataclass
class Intersection:
    point: np.ndarray  # unit vector
    pair: tuple[int, int]
    gamma_deg: float
    weight: float  # sin(gamma), zeroed below the cutoff

    @property
    def latlon(self) -> tuple[float, float]:
        return geo.to_latlon(self.point)


def pairwise_intersections(
    segments: list[ShadowSegment], weight_cutoff: float = WEIGHT_CUTOFF
) -> tuple[list[Intersection], int]:
    """All pairwise great-circle intersections, C(n, 2) minus degenerates.

    Of each antipodal candidate pair the point nearer the two segment
    midpoints (summed great-circle distance) is kept.  Returns
    (intersections, n_degenerate); identical circles are degenerate.
    """
    n = len(segments)
    if n < 2:
        raise ValueError("need at least 2 segments")
    u1 = np.stack([geo.to_unit(s.lat1, s.lon1) for s in segments])
    u2 = np.stack([geo.to_unit(s.lat2, s.lon2) for s in segments])
    normals = np.cross(u1, u2)
    norm_len = np.linalg.norm(normals, axis=1, keepdims=True)
    if np.any(norm_len < 1e-15):
        raise ValueError("segment with antipodal or identical endpoints")
    normals /= norm_len
    mids = u1 + u2
    mids /= np.linalg.norm(mids, axis=1, keepdims=True)

    ii, jj = np.triu_indices(n, k=1)
    cross = np.cross(normals[ii], normals[jj])
    sin_gamma = np.linalg.norm(cross, axis=1)
    degenerate = sin_gamma < 1e-15

    out: list[Intersection] = []
    safe = np.where(degenerate, 1.0, sin_gamma)
    cand = cross / safe[:, None]
    # pick the candidate (p or -p) closer to the two midpoints
    ang_p = np.arccos(np.clip(np.sum(cand * mids[ii], axis=1), -1, 1)) + np.arccos(
        np.clip(np.sum(cand * mids[jj], axis=1), -1, 1)
    )
    flip = ang_p > np.pi
    cand = np.where(flip[:, None], -cand, cand)

    gamma = np.degrees(np.arcsin(np.clip(sin_gamma, 0.0, 1.0)))
    weight = np.where(sin_gamma < weight_cutoff, 0.0, sin_gamma)
    for k in range(ii.size):
        if degenerate[k]:
            continue
        out.append(
            Intersection(
                point=cand[k],
                pair=(int(ii[k]), int(jj[k])),
                gamma_deg=float(gamma[k]),
                weight=float(weight[k]),
            )
        )
    return out, int(degenerate.sum())


# ---------------------------------------------------------------------------
# Outlier rejection (von Mises-Fisher discordancy)
# ---------------------------------------------------------------------------


def f_quantile(d1: int, d2: int, p: float) -> float:
    """Inverse CDF of the F distribution via the incomplete-beta inverse."""
    if not (0.0 < p < 1.0):
        raise ValueError("p must be in (0, 1)")
    y = betaincinv(d1 / 2.0, d2 / 2.0, p)
    return float(d2 * y / (d1 * (1.0 - y)))


def remove_outliers(
    points: np.ndarray, alpha: float = OUTLIER_ALPHA
) -> tuple[np.ndarray, list[int], bool]:
    """Iterative discordancy test for a vMF sample at confidence 1 - alpha.

    The most extreme point (largest drop in resultant length when removed)
    is tested against an F(2, 2n-4) null with a Bonferroni correction for
    scanning n candidates; removal repeats until nothing is discordant.
    Returns (kept points, removed indices, degenerate_flag); the flag marks
    a fully concentrated sample where the test is undefined.
    """
    pts = np.asarray(points, dtype=float)
    n0 = pts.shape[0]
    if n0 < 5:
        raise ValueError("need at least 5 points")
    mask = np.ones(n0, dtype=bool)
    removed: list[int] = []
    r_vec = pts.sum(axis=0)
    n = n0

    while n >= 5:
        r2 = float(r_vec @ r_vec)
        r = math.sqrt(r2)
        if r >= n - 1e-12:
            return pts[mask], removed, True  # concentration effectively infinite
        # leave-one-out resultants via |R - x|^2 = R^2 - 2 x.R + 1
        r_wo = np.sqrt(np.maximum(r2 - 2.0 * (pts @ r_vec) + 1.0, 0.0))
        denom = n - 1.0 - r_wo
        stat = np.where(
            denom > 1e-12, (n - 2.0) * (r_wo + 1.0 - r) / np.maximum(denom, 1e-12), np.inf
        )
        stat[~mask] = -np.inf
        k = int(np.argmax(stat))
        crit = f_quantile(2, 2 * (n - 2), 1.0 - alpha / n)
        if stat[k] > crit:
            removed.append(k)
            mask[k] = False
            r_vec = r_vec - pts[k]
            n -= 1
        else:
            break
    return pts[mask], removed, False


# ---------------------------------------------------------------------------
# Location estimators
# ---------------------------------------------------------------------------

MEAN = "mean"
MEDIAN = "median"


def spherical_location(
    points: np.ndarray, weights: np.ndarray | None, estimator: str
) -> np.ndarray:
    """Weighted spherical mean or geodesic median (unit vector).

    The mean is the normalized weighted vector sum; the median minimizes
    the weighted sum of great-circle distances via Weiszfeld iteration on
    the sphere to 1e-12 rad.
    """
    pts = np.asarray(points, dtype=float)
    w = np.ones(pts.shape[0]) if weights is None else np.asarray(weights, dtype=float)
    if np.any(w < 0):
        raise ValueError("weights must be >= 0")
    total = w.sum()
    if total <= 0:
        raise ValueError("sum of weights must be positive")

    mean_vec = (w[:, None] * pts).sum(axis=0)
    mean_norm = np.linalg.norm(mean_vec)
    if estimator == MEAN:
        if mean_norm < 1e-12 * total:
            raise DegenerateGeometry("zero resultant: spherical mean undefined")
        return mean_vec / mean_norm
    if estimator != MEDIAN:
        raise ValueError(f"unknown estimator {estimator}")

    x = mean_vec / mean_norm if mean_norm > 1e-12 * total else pts[0].copy()
    for _ in range(200):
        dots = np.clip(pts @ x, -1.0, 1.0)
        tang = pts - dots[:, None] * x[None, :]
        tnorm = np.linalg.norm(tang, axis=1)
        d = np.arctan2(tnorm, dots)  # stable near zero separation
        ok = (tnorm > 1e-15) & (d > 1e-15)
        if not np.any(ok):
            return x
        u = tang[ok] / tnorm[ok, None]
        wk = w[ok]
        num = (wk[:, None] * u).sum(axis=0)
        den = float((wk / d[ok]).sum())
        step = num / den
        slen = np.linalg.norm(step)
        if slen < MEDIAN_TOL_RAD:
            return x
        x = math.cos(slen) * x + math.sin(slen) * step / slen
        x /= np.linalg.norm(x)
    return x


# ---------------------------------------------------------------------------
# Kent distribution
# ---------------------------------------------------------------------------


def _tangent_basis(mean: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(north, east) unit tangents at a point (undefined at the poles)."""
    z = np.array([0.0, 0.0, 1.0])
    east = np.cross(z, mean)
    en = np.linalg.norm(east)
    if en < 1e-12:
        raise DegenerateGeometry("tangent frame undefined at the poles")
    east /= en
    north = np.cross(mean, east)
    return north, east


@dataclass
class KentFit:
    mean: np.ndarray  # unit vector
    kappa: float
    beta: float
    mu: float  # mean resultant length
    sigma2: float  # major tangent std (radians-equivalent)
    sigma3: float  # minor tangent std
    major_axis: np.ndarray  # unit tangent vector
    minor_axis: np.ndarray
    theta_deg: float  # major-axis orientation, clockwise from north, (-90, 90]
    n_points: int

    @property
    def latlon(self) -> tuple[float, float]:
        return geo.to_latlon(self.mean)

    @property
    def a_rad(self) -> float:
        """Angular semi-major axis of the one-sigma ellipse."""
        return self.sigma2 / self.mu

    @property
    def b_rad(self) -> float:
        return self.sigma3 / self.mu

    @property
    def axis_ratio(self) -> float:
        return self.a_rad / self.b_rad


def fit_kent(points: np.ndarray, weights: np.ndarray | None = None) -> KentFit:
    """Moment estimators of the sphere analogue of a bivariate Gaussian.

    Mean direction from the resultant; the tangent-plane second moments
    give the axis orientation and the eigenvalue difference, from which
    concentration kappa and ovalness beta follow.  High-concentration
    tangent standard deviations are sigma2 = (kappa - 2 beta)^-1/2 and
    sigma3 = (kappa + 2 beta)^-1/2.
    """
    pts = np.asarray(points, dtype=float)
    w = np.ones(pts.shape[0]) if weights is None else np.asarray(weights, dtype=float)
    active = w > 0
    if active.sum() < 3:
        raise DegenerateGeometry("need at least 3 points with positive weight")
    pts = pts[active]
    w = w[active]
    total = w.sum()

    mean_vec = (w[:, None] * pts).sum(axis=0) / total
    r_bar = float(np.linalg.norm(mean_vec))
    if r_bar < 1e-12:
        raise DegenerateGeometry("zero resultant")
    mean = mean_vec / r_bar

    north, east = _tangent_basis(mean)
    xn = pts @ north
    xe = pts @ east
    t_nn = float((w * xn * xn).sum() / total)
    t_ee = float((w * xe * xe).sum() / total)
    t_ne = float((w * xn * xe).sum() / total)

    r2 = math.hypot(t_nn - t_ee, 2.0 * t_ne)  # eigenvalue difference
    lo = 2.0 - 2.0 * r_bar - r2
    hi = 2.0 - 2.0 * r_bar + r2
    if lo <= 1e-15:
        raise DegenerateGeometry("rank-deficient scatter: all spread on one axis")
    kappa = 1.0 / lo + 1.0 / hi
    beta = 0.5 * (1.0 / lo - 1.0 / hi)
    if kappa - 2.0 * beta <= 0:
        raise DegenerateGeometry("invalid concentration (kappa <= 2 beta)")

    # major axis: eigenvector of the larger tangent second moment
    ang = 0.5 * math.atan2(2.0 * t_ne, t_nn - t_ee)
    major = math.cos(ang) * north + math.sin(ang) * east
    minor = -math.sin(ang) * north + math.cos(ang) * east
    theta = math.degrees(ang)
    if theta <= -90.0:
        theta += 180.0
    elif theta > 90.0:
        theta -= 180.0

    return KentFit(
        mean=mean,
        kappa=float(kappa),
        beta=float(beta),
        mu=r_bar,
        sigma2=1.0 / math.sqrt(kappa - 2.0 * beta),
        sigma3=1.0 / math.sqrt(kappa + 2.0 * beta),
        major_axis=major,
        minor_axis=minor,
        theta_deg=theta,
        n_points=int(pts.shape[0]),
    )


@dataclass
class Ellipse:
    center_lat: float
    center_lon: float
    a_rad: float
    b_rad: float
    theta_deg: float
    p: float
    kind: str  # "containment" | "confidence"

    def axes_m(self, radius_m: float | None = None) -> tuple[float, float]:
        if radius_m is None:
            radius_m = geo.gaussian_radius(self.center_lat)
        return self.a_rad * radius_m, self.b_rad * radius_m

    def contains_point(self, lat: float, lon: float, fit: KentFit) -> bool:
        """Tangent-plane membership test against this ellipse."""
        v = geo.to_unit(lat, lon)
        radial = float(v @ fit.mean)
        if radial <= 0:
            return False
        n2 = float(v @ fit.major_axis) / radial
        n3 = float(v @ fit.minor_axis) / radial
        return (n2 / self.a_rad) ** 2 + (n3 / self.b_rad) ** 2 <= 1.0


def containment_ellipse(fit: KentFit, p: float) -> Ellipse:
    """Ellipse around the mean enclosing a fraction p of the distribution."""
    if not (0.0 < p < 1.0):
        raise ValueError("p must be in (0, 1)")
    scale = math.sqrt(-2.0 * math.log(1.0 - p))
    lat, lon = fit.latlon
    return Ellipse(lat, lon, fit.a_rad * scale, fit.b_rad * scale,
                   fit.theta_deg, p, "containment")


def confidence_scale(n: int, p: float, m: int = 2) -> float:
    """Hotelling-style semi-axis scale sqrt(m F_{m,n-m,p} / (n - m))."""
    if n <= m:
        raise ValueError(f"need n > {m}")
    return math.sqrt(m * f_quantile(m, n - m, p) / (n - m))


def confidence_scale_bound(n: int, p: float) -> float:
    """Large-n form sqrt(-2 log(1-p) / (n - 2)) of the confidence scale.

    The exact F-based scale approaches this from above as n grows (the
    F quantile exceeds its chi-square limit at any finite n).
    """
    if n <= 2:
        raise ValueError("need n > 2")
    return math.sqrt(-2.0 * math.log(1.0 - p) / (n - 2.0))


def confidence_ellipse(fit: KentFit, n: int, p: float) -> Ellipse:
    """Confidence ellipse of the mean given n independent measurements."""
    scale = confidence_scale(n, p)
    lat, lon = fit.latlon
    return Ellipse(lat, lon, fit.a_rad * scale, fit.b_rad * scale,
                   fit.theta_deg, p, "confidence")


def median_confidence_ellipse(
    points: np.ndarray,
    weights: np.ndarray | None,
    median: np.ndarray,
    n: int,
    p: float,
) -> Ellipse | None:
    """Confidence ellipse of the geodesic median via M-estimator asymptotics.

    The sandwich covariance A^-1 B A^-1 / n uses B = E[u u^T] and
    A = E[cot(d) (I - u u^T)] with u the unit tangent toward each point and
    d its distance; per-point equivalent axes then get the same
    Hotelling-style scale as the mean.  Returns None when n is too small
    for the asymptotics to mean anything.
    """
    if n < MEDIAN_MIN_SEGMENTS:
        return None
    pts = np.asarray(points, dtype=float)
    w = np.ones(pts.shape[0]) if weights is None else np.asarray(weights, dtype=float)
    active = w > 0
    pts, w = pts[active], w[active]
    w = w / w.sum()

    north, east = _tangent_basis(median)
    dots = np.clip(pts @ median, -1.0, 1.0)
    tang_norm = np.linalg.norm(pts - np.outer(dots, median), axis=1)
    d = np.arctan2(tang_norm, dots)
    ok = d > 1e-12
    pts, w, d = pts[ok], w[ok], d[ok]
    w = w / w.sum()
    tang = pts - np.outer(pts @ median, median)
    tang /= np.linalg.norm(tang, axis=1, keepdims=True)
    u = np.stack([tang @ north, tang @ east], axis=1)

    B = (w[:, None, None] * (u[:, :, None] * u[:, None, :])).sum(axis=0)
    eye = np.eye(2)
    cot = np.cos(d) / np.sin(d)
    A = (w[:, None, None] * cot[:, None, None] * (eye - u[:, :, None] * u[:, None, :])).sum(
        axis=0
    )
    try:
        a_inv = np.linalg.inv(A)
    except np.linalg.LinAlgError:
        return None
    cov = a_inv @ B @ a_inv / n

    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals, evecs = evals[order], evecs[:, order]
    if evals[-1] <= 0:
        return None
    # per-point equivalent axes, then the same confidence scaling as the mean
    axes = np.sqrt(evals * n) * confidence_scale(n, p)
    vmaj = evecs[:, 0]
    theta = math.degrees(math.atan2(vmaj[1], vmaj[0]))
    if theta <= -90.0:
        theta += 180.0
    elif theta > 90.0:
        theta -= 180.0
    lat, lon = geo.to_latlon(median)
    return Ellipse(lat, lon, float(axes[0]), float(axes[1]), theta, p, "confidence")


# ---------------------------------------------------------------------------
# Radio horizon
# ---------------------------------------------------------------------------


def radio_horizon_km(h_t_m: float, h_r_m: float, k: float = 4.0 / 3.0) -> float:
    """Maximum geometric VHF range over the horizon, in km.

    sqrt(2 k R_E / 1000 km) (sqrt(h_R) + sqrt(h_T)); k is the effective
    Earth-radius factor for standard refraction.
    """
    if h_t_m < 0 or h_r_m < 0:
        raise ValueError("heights must be >= 0")
    return math.sqrt(2.0 * k * EARTH_RADIUS_KM / 1000.0) * (
        math.sqrt(h_r_m) + math.sqrt(h_t_m)
    )


def receiver_height_for_range(d_km: float, h_t_m: float, k: float = 4.0 / 3.0) -> float:
    """Minimum receiver height for a given range and transmitter height."""
    if d_km < 0 or h_t_m < 0:
        raise ValueError("inputs must be >= 0")
    root = d_km / math.sqrt(2.0 * k * EARTH_RADIUS_KM / 1000.0) - math.sqrt(h_t_m)
    return max(0.0, root) ** 2


# ---------------------------------------------------------------------------
# End-to-end estimate
# ---------------------------------------------------------------------------


@dataclass
class PositionEstimate:
    lat: float
    lon: float
    confidence: Ellipse | None


@dataclass
class ReceiverEstimate:
    receiver: str
    n_segments: int
    n_intersections: int
    n_degenerate: int
    n_outliers_removed: int
    n_zero_weight: int
    weighted_mean: PositionEstimate
    weighted_median: PositionEstimate
    unweighted_mean: PositionEstimate
    unweighted_median: PositionEstimate
    containment: Ellipse | None
    kent_weighted: KentFit | None
    kent_unweighted: KentFit | None

    def to_dict(self) -> dict:
        def pos(p: PositionEstimate):
            out = {"lat": p.lat, "lon": p.lon}
            if p.confidence is not None:
                a_m, b_m = p.confidence.axes_m()
                out["a95_m"] = a_m
                out["b95_m"] = b_m
                out["theta_deg"] = p.confidence.theta_deg
            return out

        d = {
            "receiver": self.receiver,
            "n_segments": self.n_segments,
            "n_intersections": self.n_intersections,
            "n_degenerate_pairs": self.n_degenerate,
            "n_outliers_removed": self.n_outliers_removed,
            "n_zero_weight": self.n_zero_weight,
            "weighted_mean": pos(self.weighted_mean),
            "weighted_median": pos(self.weighted_median),
            "unweighted_mean": pos(self.unweighted_mean),
            "unweighted_median": pos(self.unweighted_median),
        }
        if self.containment is not None:
            a_m, b_m = self.containment.axes_m()
            d["containment_68"] = {
                "lat": self.containment.center_lat,
                "lon": self.containment.center_lon,
                "a_m": a_m,
                "b_m": b_m,
                "theta_deg": self.containment.theta_deg,
            }
        return d


def estimate_receiver(
    segments: list[ShadowSegment],
    alpha: float = OUTLIER_ALPHA,
    weight_cutoff: float = WEIGHT_CUTOFF,
    p_containment: float = 0.68,
    p_confidence: float = 0.95,
) -> ReceiverEstimate:
    """Full pipeline from shadow segments to receiver position estimates."""
    if len(segments) < 3:
        raise ValueError("need at least 3 segments")
    inters, n_degen = pairwise_intersections(segments, weight_cutoff)
    if len(inters) < 5:
        raise ValueError("too few intersections")
    pts = np.stack([x.point for x in inters])
    weights = np.array([x.weight for x in inters])

    kept_pts, removed_idx, degenerate = remove_outliers(pts, alpha)
    keep_mask = np.ones(pts.shape[0], dtype=bool)
    keep_mask[removed_idx] = False
    w = weights[keep_mask]
    if w.sum() == 0.0:
        # every pair is near-parallel: keep the sine weights without the
        # cutoff rather than dropping the receiver entirely
        sines = np.array([math.sin(math.radians(x.gamma_deg)) for x in inters])
        w = sines[keep_mask]
    n_seg = len(segments)

    def build(points, wgt, kent_fit):
        mean = spherical_location(points, wgt, MEAN)
        med = spherical_location(points, wgt, MEDIAN)
        mean_ci = None
        if kent_fit is not None:
            try:
                mean_ci = confidence_ellipse(kent_fit, n_seg, p_confidence)
            except ValueError:
                mean_ci = None
        med_ci = median_confidence_ellipse(points, wgt, med, n_seg, p_confidence)
        mlat, mlon = geo.to_latlon(mean)
        dlat, dlon = geo.to_latlon(med)
        return (
            PositionEstimate(mlat, mlon, mean_ci),
            PositionEstimate(dlat, dlon, med_ci),
        )

    def try_fit(points, wgt):
        try:
            return fit_kent(points, wgt)
        except DegenerateGeometry:
            return None

    kent_w = try_fit(kept_pts, w)
    kent_u = try_fit(kept_pts, None)

    w_mean, w_median = build(kept_pts, w, kent_w)
    u_mean, u_median = build(kept_pts, None, kent_u)

    containment = None
    if kent_w is not None:
        containment = containment_ellipse(kent_w, p_containment)

    return ReceiverEstimate(
        receiver=segments[0].receiver,
        n_segments=n_seg,
        n_intersections=len(inters),
        n_degenerate=n_degen,
        n_outliers_removed=len(removed_idx),
        n_zero_weight=int((weights == 0).sum()),
        weighted_mean=w_mean,
        weighted_median=w_median,
        unweighted_mean=u_mean,
        unweighted_median=u_median,
        containment=containment,
        kent_weighted=kent_w,
        kent_unweighted=kent_u,
    )


def sample_tangent_normal(
    lat: float,
    lon: float,
    sigma_major_rad: float,
    sigma_minor_rad: float,
    theta_deg: float,
    n: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Sample unit vectors from the high-concentration (tangent Gaussian)
    model the Kent estimators assume; used for calibration studies."""
    mean = geo.to_unit(lat, lon)
    north, east = _tangent_basis(mean)
    ang = math.radians(theta_deg)
    major = math.cos(ang) * north + math.sin(ang) * east
    minor = -math.sin(ang) * north + math.cos(ang) * east
    v2 = rng.normal(0.0, sigma_major_rad, n)
    v3 = rng.normal(0.0, sigma_minor_rad, n)
    r2 = v2 * v2 + v3 * v3
    r2 = np.clip(r2, 0.0, 0.9999)
    pts = (
        np.sqrt(1.0 - r2)[:, None] * mean
        + v2[:, None] * major
        + v3[:, None] * minor
    )
    return pts / np.linalg.norm(pts, axis=1, keepdims=True)
