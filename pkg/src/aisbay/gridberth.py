"""Arc-second occupancy/speed/course rasters and berth detection.

Moving vessels deposit occupancy time along their simplified routes,
sampled every few meters with a dwell of sample-spacing / model-speed, so
cell occupancy sums to real vessel-seconds.  Stationary periods deposit
their whole duration at the anchor cell unless the enclosing legs drifted
too far apart.  Berths are overdensities found by thresholding the
smoothed density and splitting the support with a watershed.
"""

from __future__ import annotations

import json
import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from skimage.feature import peak_local_max
from skimage.segmentation import watershed

import shapely
from shapely.geometry import MultiPolygon, Point, Polygon, shape
from shapely.ops import nearest_points, unary_union

from . import geo
from .clean import StationaryPeriod
from .geo import KNOT
from .trajectory import Trajectory

log = logging.getLogger(__name__)

CELL_DEG = 1.0 / 3600.0
SAMPLE_M = 10.0
DRIFT_MAX_M = 500.0
SMOOTH_SIGMA_CELLS = 1.5
SEED_THRESHOLD_PER_KM2 = 10.0
SUPPORT_RATIO = 0.5
SHORE_MAX_M = 200.0

BERTH = "berth"
OFFSHORE = "offshore"


@dataclass
class GridSpec:
    lat_min: float
    lat_max: float
    lon_min: float
    lon_max: float
    cell_deg: float = CELL_DEG

    def __post_init__(self):
        self.nrows = int(round((self.lat_max - self.lat_min) / self.cell_deg))
        self.ncols = int(round((self.lon_max - self.lon_min) / self.cell_deg))
        if self.nrows <= 0 or self.ncols <= 0:
            raise ValueError("empty grid")
        lats = self.lat_min + (np.arange(self.nrows) + 0.5) * self.cell_deg
        arc = self.cell_deg * np.pi / 180.0
        self.row_height_m = geo.meridional_radius(lats) * arc
        self.row_width_m = geo.normal_radius(lats) * np.cos(np.radians(lats)) * arc
        self.row_area_km2 = self.row_height_m * self.row_width_m / 1e6

    def index(self, lat, lon):
        """(row, col, inside) arrays for point coordinates."""
        row = np.floor((np.asarray(lat) - self.lat_min) / self.cell_deg).astype(int)
        col = np.floor((np.asarray(lon) - self.lon_min) / self.cell_deg).astype(int)
        inside = (row >= 0) & (row < self.nrows) & (col >= 0) & (col < self.ncols)
        return row, col, inside

    def cell_center(self, row, col):
        lat = self.lat_min + (np.asarray(row) + 0.5) * self.cell_deg
        lon = self.lon_min + (np.asarray(col) + 0.5) * self.cell_deg
        return lat, lon


@dataclass
class GridRaster:
    spec: GridSpec
    window_s: float
    occupancy_s: np.ndarray  # vessel-seconds
    speed_sum_kn: np.ndarray  # per-sample speeds (distance-weighted)
    speed_cnt: np.ndarray
    course_sin: np.ndarray
    course_cos: np.ndarray
    counters: Counter

    @classmethod
    def empty(cls, spec: GridSpec, window_s: float) -> "GridRaster":
        shp = (spec.nrows, spec.ncols)
        return cls(
            spec=spec,
            window_s=window_s,
            occupancy_s=np.zeros(shp),
            speed_sum_kn=np.zeros(shp),
            speed_cnt=np.zeros(shp),
            course_sin=np.zeros(shp),
            course_cos=np.zeros(shp),
            counters=Counter(),
        )

    def merge(self, other: "GridRaster") -> None:
        self.occupancy_s += other.occupancy_s
        self.speed_sum_kn += other.speed_sum_kn
        self.speed_cnt += other.speed_cnt
        self.course_sin += other.course_sin
        self.course_cos += other.course_cos
        self.counters.update(other.counters)

    def density_vessels(self) -> np.ndarray:
        """Time-average vessel count per cell."""
        return self.occupancy_s / self.window_s

    def density_per_km2(self) -> np.ndarray:
        return self.density_vessels() / self.spec.row_area_km2[:, None]

    def mean_speed_kn(self) -> np.ndarray:
        with np.errstate(invalid="ignore"):
            return np.where(
                self.speed_cnt > 0, self.speed_sum_kn / np.maximum(self.speed_cnt, 1), np.nan
            )

    def mean_course_deg(self) -> np.ndarray:
        with np.errstate(invalid="ignore"):
            course = np.degrees(np.arctan2(self.course_sin, self.course_cos)) % 360.0
        return np.where(self.speed_cnt > 0, course, np.nan)

    def course_resultant(self) -> np.ndarray:
        with np.errstate(invalid="ignore"):
            r = np.hypot(self.course_sin, self.course_cos) / np.maximum(self.speed_cnt, 1)
        return np.where(self.speed_cnt > 0, r, np.nan)


def load_shoreline(source) -> MultiPolygon | Polygon | None:
    """Land polygons from a GeoJSON file or dict; None means all water."""
    if source is None:
        return None
    if isinstance(source, str):
        with open(source) as fh:
            source = json.load(fh)
    geoms = [shape(f["geometry"]) for f in source.get("features", [])]
    if not geoms:
        return None
    return unary_union(geoms)


def _bearings_at(points: np.ndarray, normal: np.ndarray) -> np.ndarray:
    """Travel bearing (deg from north) at unit-sphere points on a great
    circle with the given (normalized) travel normal."""
    tangent = np.cross(normal, points)
    tangent /= np.linalg.norm(tangent, axis=-1, keepdims=True)
    z = np.array([0.0, 0.0, 1.0])
    east = np.cross(z, points)
    east /= np.linalg.norm(east, axis=-1, keepdims=True)
    north = np.cross(points, east)
    return np.degrees(
        np.arctan2(np.sum(tangent * east, axis=-1), np.sum(tangent * north, axis=-1))
    ) % 360.0


def _trajectory_samples(traj: Trajectory, sample_m: float):
    """Midpoint samples (lat, lon, dwell_s, speed_kn, bearing_deg).

    Sampling is normalized per speed-profile group so the dwell of a group
    sums exactly to the group's duration.
    """
    route_units = geo.to_unit(traj.route_lat, traj.route_lon)
    edge_len = np.diff(traj.cum_dist)
    out = []
    for g in range(len(traj.seg_v)):
        s0, s1 = float(traj.seg_s[g]), float(traj.seg_s[g + 1])
        t0, t1 = float(traj.seg_t[g]), float(traj.seg_t[g + 1])
        v = float(traj.seg_v[g])
        length = s1 - s0
        if length <= 0 or v <= 0:
            # dwell without distance: deposit at the fixed point
            lat, lon = traj.position_at_s(s0)
            out.append(
                (
                    np.array([lat]),
                    np.array([lon]),
                    np.array([t1 - t0]),
                    None,
                    None,
                )
            )
            continue
        n = max(1, math.ceil(length / sample_m))
        ds = length / n
        s = s0 + (np.arange(n) + 0.5) * ds
        e = np.clip(
            np.searchsorted(traj.cum_dist, s, side="right") - 1,
            0,
            len(edge_len) - 1,
        )
        span = edge_len[e]
        frac = np.where(span > 0, (s - traj.cum_dist[e]) / np.where(span > 0, span, 1), 0.0)
        a = route_units[e]
        b = route_units[e + 1]
        omega = np.arctan2(
            np.linalg.norm(np.cross(a, b), axis=-1), np.sum(a * b, axis=-1)
        )
        small = omega < 1e-12
        so = np.where(small, 1.0, np.sin(omega))
        w_a = np.where(small, 1.0 - frac, np.sin((1.0 - frac) * omega) / so)
        w_b = np.where(small, frac, np.sin(frac * omega) / so)
        pts = w_a[:, None] * a + w_b[:, None] * b
        pts /= np.linalg.norm(pts, axis=-1, keepdims=True)
        lat, lon = geo.to_latlon(pts)
        normals = np.cross(a, b)
        nn = np.linalg.norm(normals, axis=-1, keepdims=True)
        normals = np.where(nn > 0, normals / np.where(nn == 0, 1, nn), normals)
        bearing = _bearings_at(pts, normals)
        dwell = np.full(n, ds / v)
        out.append((np.atleast_1d(lat), np.atleast_1d(lon), dwell, v / KNOT, bearing))
    return out


def accumulate(
    trajectories: list[Trajectory],
    stationary_periods: list[StationaryPeriod],
    spec: GridSpec,
    window_s: float,
    land=None,
    sample_m: float = SAMPLE_M,
    drift_max_m: float = DRIFT_MAX_M,
) -> GridRaster:
    """Deposit moving and stationary time into the raster.

    Samples outside the grid are clipped (counted), samples over land are
    discarded (counted), stationary periods with drift beyond drift_max_m
    are excluded.  Speed and course moments come from moving samples only.
    """
    raster = GridRaster.empty(spec, window_s)
    c = raster.counters

    for traj in trajectories:
        for lat, lon, dwell, v_kn, bearing in _trajectory_samples(traj, sample_m):
            row, col, inside = spec.index(lat, lon)
            if not np.all(inside):
                c["clipped-samples"] += int((~inside).sum())
                c["clipped-seconds"] += float(dwell[~inside].sum())
            if land is not None:
                on_land = shapely.contains_xy(land, lon, lat)
            else:
                on_land = np.zeros(lat.shape, dtype=bool)
            keep = inside & ~on_land
            over_land = inside & on_land
            if np.any(over_land):
                c["land-samples"] += int(over_land.sum())
                c["land-seconds"] += float(dwell[over_land].sum())
            if not np.any(keep):
                continue
            np.add.at(raster.occupancy_s, (row[keep], col[keep]), dwell[keep])
            c["moving-seconds"] += float(dwell[keep].sum())
            if v_kn is not None:
                np.add.at(raster.speed_sum_kn, (row[keep], col[keep]), v_kn)
                np.add.at(raster.speed_cnt, (row[keep], col[keep]), 1.0)
                rad = np.radians(bearing[keep])
                np.add.at(raster.course_sin, (row[keep], col[keep]), np.sin(rad))
                np.add.at(raster.course_cos, (row[keep], col[keep]), np.cos(rad))

    for sp in stationary_periods:
        dur = float(sp.duration_s)
        if dur <= 0:
            continue
        if sp.drift_extent_m > drift_max_m:
            c["excluded-stationary"] += 1
            c["excluded-stationary-seconds"] += dur
            continue
        row, col, inside = spec.index(sp.anchor_lat, sp.anchor_lon)
        if not inside:
            c["clipped-stationary"] += 1
            c["clipped-seconds"] += dur
            continue
        if land is not None and bool(shapely.contains_xy(land, sp.anchor_lon, sp.anchor_lat)):
            c["land-stationary"] += 1
            c["land-seconds"] += dur
            continue
        raster.occupancy_s[int(row), int(col)] += dur
        c["stationary-seconds"] += dur

    return raster


def smooth(field_arr: np.ndarray, sigma_cells: float = SMOOTH_SIGMA_CELLS) -> np.ndarray:
    """Mass-preserving isotropic Gaussian blur.

    Each source cell's mass is spread over the in-bounds part of its kernel
    (per-source renormalization), so the total is conserved to float
    precision; interior cells see a plain Gaussian.
    """
    norm = ndimage.gaussian_filter(
        np.ones_like(field_arr), sigma_cells, mode="constant", cval=0.0
    )
    return ndimage.gaussian_filter(field_arr / norm, sigma_cells, mode="constant", cval=0.0)


@dataclass
class BerthArea:
    id: int
    cells: np.ndarray  # (n, 2) row/col
    centroid_lat: float
    centroid_lon: float
    area_km2: float
    peak_density_per_km2: float
    # filled by label_and_rank
    kind: str | None = None
    shore_distance_m: float | None = None
    shore_lat: float | None = None
    shore_lon: float | None = None
    n_arrivals: int = 0
    arrivals_per_day: float = 0.0
    occupancy_vessels: float = 0.0
    dominant_destination: str | None = None
    dominant_category: str | None = None
    category_share_min: float | None = None
    category_share_max: float | None = None


def detect_berths(
    density_per_km2: np.ndarray,
    spec: GridSpec,
    seed_threshold: float = SEED_THRESHOLD_PER_KM2,
    support_ratio: float = SUPPORT_RATIO,
) -> tuple[list[BerthArea], np.ndarray]:
    """Find overdensity areas: seeds at local maxima above the seed
    threshold, support above half of it, watershed split between seeds.

    Returns (areas, label_map); label 0 is background.
    """
    support = density_per_km2 >= seed_threshold * support_ratio
    # peak_local_max thresholds strictly; nudge down so the bound is inclusive
    peaks = peak_local_max(
        density_per_km2,
        threshold_abs=np.nextafter(seed_threshold, -np.inf),
        exclude_border=False,
    )
    label_map = np.zeros(density_per_km2.shape, dtype=np.int32)
    if peaks.size == 0:
        return [], label_map
    seed_mask = np.zeros(density_per_km2.shape, dtype=bool)
    seed_mask[peaks[:, 0], peaks[:, 1]] = True
    markers, n_seeds = ndimage.label(seed_mask)  # adjacent peak cells merge
    label_map = watershed(-density_per_km2, markers, mask=support)

    areas: list[BerthArea] = []
    for lbl in range(1, n_seeds + 1):
        rows, cols = np.nonzero(label_map == lbl)
        if rows.size == 0:
            continue
        dens = density_per_km2[rows, cols]
        weights = dens * spec.row_area_km2[rows]  # cell vessel counts
        if weights.sum() <= 0:
            weights = np.ones_like(dens)
        lat_c, lon_c = spec.cell_center(rows, cols)
        centroid_lat = float(np.average(lat_c, weights=weights))
        centroid_lon = float(np.average(lon_c, weights=weights))
        areas.append(
            BerthArea(
                id=int(lbl),
                cells=np.stack([rows, cols], axis=1),
                centroid_lat=centroid_lat,
                centroid_lon=centroid_lon,
                area_km2=float(spec.row_area_km2[rows].sum()),
                peak_density_per_km2=float(dens.max()),
            )
        )
    return areas, label_map


class ShorelineIndex:
    """Nearest-shore queries in a local meter frame."""

    def __init__(self, land, lat0: float, lon0: float):
        self.lat0 = lat0
        self.lon0 = lon0
        self._boundary = None
        if land is not None:
            self._boundary = shapely.transform(land.boundary, self._fwd_arr)

    def _fwd_arr(self, arr: np.ndarray) -> np.ndarray:
        x, y = geo.local_xy(arr[:, 1], arr[:, 0], self.lat0, self.lon0)
        return np.stack([x, y], axis=1)

    def nearest(self, lat: float, lon: float):
        """(distance_m, shore_lat, shore_lon) or None without land."""
        if self._boundary is None:
            return None
        x, y = geo.local_xy(lat, lon, self.lat0, self.lon0)
        p = Point(float(x), float(y))
        d = p.distance(self._boundary)
        q = nearest_points(self._boundary, p)[0]
        m_lat = self.lat0 + q.y / (geo.meridional_radius(self.lat0) * np.pi / 180.0)
        m_lon = self.lon0 + q.x / (
            geo.normal_radius(self.lat0) * np.cos(np.radians(self.lat0)) * np.pi / 180.0
        )
        return float(d), float(m_lat), float(m_lon)


def label_and_rank(
    areas: list[BerthArea],
    label_map: np.ndarray,
    spec: GridSpec,
    trajectories: list[Trajectory],
    stationary_periods: list[StationaryPeriod],
    window_s: float,
    land=None,
    destinations: dict[int, list[tuple[int, str]]] | None = None,
    categories: dict[int, tuple[str, bool]] | None = None,
    shore_max_m: float = SHORE_MAX_M,
) -> list[BerthArea]:
    """Attach arrivals, occupancy, labels, and shore classification.

    destinations: per-MMSI time-ordered (t, code) reports.
    categories: per-MMSI (category name, type_known).
    """
    by_label: dict[int, list] = defaultdict(list)
    for traj in trajectories:
        lat, lon = traj.route_lat[-1], traj.route_lon[-1]
        row, col, inside = spec.index(lat, lon)
        if not inside:
            continue
        lbl = int(label_map[int(row), int(col)])
        if lbl > 0:
            by_label[lbl].append((traj.mmsi, traj.end_ts))

    occupancy: dict[int, float] = defaultdict(float)
    for sp in stationary_periods:
        row, col, inside = spec.index(sp.anchor_lat, sp.anchor_lon)
        if not inside:
            continue
        lbl = int(label_map[int(row), int(col)])
        if lbl > 0:
            occupancy[lbl] += float(sp.duration_s)

    shore = ShorelineIndex(land, (spec.lat_min + spec.lat_max) / 2.0,
                           (spec.lon_min + spec.lon_max) / 2.0)
    days = window_s / 86400.0

    for area in areas:
        arrivals = by_label.get(area.id, [])
        area.n_arrivals = len(arrivals)
        area.arrivals_per_day = len(arrivals) / days if days > 0 else 0.0
        area.occupancy_vessels = occupancy.get(area.id, 0.0) / window_s

        if destinations is not None and arrivals:
            codes = []
            for mmsi, t_end in arrivals:
                code = _dest_at(destinations.get(mmsi, []), t_end)
                if code:
                    codes.append(code)
            if codes:
                counts = Counter(codes)
                top = max(counts.values())
                area.dominant_destination = min(
                    c for c, n in counts.items() if n == top
                )

        if categories is not None and arrivals:
            typed = Counter()
            n_unknown = 0
            for mmsi, _ in arrivals:
                cat, known = categories.get(mmsi, (None, False))
                if known and cat is not None:
                    typed[cat] += 1
                else:
                    n_unknown += 1
            if typed:
                top = max(typed.values())
                dom = min(c for c, n in typed.items() if n == top)
                area.dominant_category = dom
                n_all = len(arrivals)
                area.category_share_min = typed[dom] / n_all
                area.category_share_max = (typed[dom] + n_unknown) / n_all

        hit = shore.nearest(area.centroid_lat, area.centroid_lon)
        if hit is not None:
            area.shore_distance_m, area.shore_lat, area.shore_lon = hit
            area.kind = BERTH if area.shore_distance_m <= shore_max_m else OFFSHORE
        else:
            area.kind = OFFSHORE

    areas.sort(key=lambda a: (-a.arrivals_per_day, a.id))
    return areas


def _dest_at(history: list[tuple[int, str]], t: int) -> str | None:
    """Latest destination reported at or before t."""
    best = None
    for ts, code in history:
        if ts <= t:
            best = code
        else:
            break
    return best


# ---------------------------------------------------------------------------
# Exports
# ---------------------------------------------------------------------------


def write_esri_ascii(path: str, spec: GridSpec, arr: np.ndarray, nodata=-9999.0):
    """ESRI ASCII grid; rows are written north to south."""
    with open(path, "w") as fh:
        fh.write(f"ncols {spec.ncols}\n")
        fh.write(f"nrows {spec.nrows}\n")
        fh.write(f"xllcorner {spec.lon_min}\n")
        fh.write(f"yllcorner {spec.lat_min}\n")
        fh.write(f"cellsize {spec.cell_deg}\n")
        fh.write(f"NODATA_value {nodata}\n")
        out = np.where(np.isnan(arr), nodata, arr)
        for r in range(spec.nrows - 1, -1, -1):
            fh.write(" ".join(repr(float(v)) for v in out[r]))
            fh.write("\n")


def write_raster_csv(path: str, spec: GridSpec, arr: np.ndarray, skip_zero=True):
    """row,col,lat,lon,value records for nonzero (or all) cells."""
    with open(path, "w") as fh:
        fh.write("row,col,lat,lon,value\n")
        rows, cols = np.nonzero(arr != 0) if skip_zero else np.unravel_index(
            np.arange(arr.size), arr.shape
        )
        lats, lons = spec.cell_center(rows, cols)
        for r, c, la, lo in zip(rows, cols, np.atleast_1d(lats), np.atleast_1d(lons)):
            fh.write(f"{r},{c},{la:.7f},{lo:.7f},{arr[r, c]!r}\n")


def write_berth_csv(path: str, areas: list[BerthArea]):
    cols = (
        "id,lat,lon,kind,shore_distance_m,arrivals_per_day,vessels_in_berth,"
        "area_km2,dominant_destination,dominant_category,share_min,share_max\n"
    )
    with open(path, "w") as fh:
        fh.write(cols)
        for a in areas:
            fh.write(
                f"{a.id},{a.centroid_lat:.6f},{a.centroid_lon:.6f},{a.kind},"
                f"{_fmt(a.shore_distance_m)},{a.arrivals_per_day:.3f},"
                f"{a.occupancy_vessels:.3f},{a.area_km2:.4f},"
                f"{a.dominant_destination or ''},{a.dominant_category or ''},"
                f"{_fmt(a.category_share_min)},{_fmt(a.category_share_max)}\n"
            )


def _fmt(x) -> str:
    return "" if x is None else f"{x:.3f}"
