"""Geodesy helpers on the WGS84 ellipsoid and the unit sphere.

Point-to-point distances and azimuths use Vincenty's formulae on the
ellipsoid (vectorized).  Cross-track / arc geometry is done with unit
vectors on the sphere, scaled by the local Gaussian radius; at the few-km
arc lengths handled here the sphere-vs-ellipsoid difference is far below
the tolerances that matter (10 m route tolerance, 40 km split bound).
"""

from __future__ import annotations

import numpy as np

WGS84_A = 6378137.0
WGS84_F = 1.0 / 298.257223563
WGS84_B = WGS84_A * (1.0 - WGS84_F)
WGS84_E2 = WGS84_F * (2.0 - WGS84_F)

ARCSEC_RAD = np.pi / (180.0 * 3600.0)

KNOT = 1852.0 / 3600.0  # m/s


def meridional_radius(lat_deg):
    """Radius of curvature in the meridian plane, meters."""
    s2 = np.sin(np.radians(lat_deg)) ** 2
    return WGS84_A * (1.0 - WGS84_E2) / (1.0 - WGS84_E2 * s2) ** 1.5


def normal_radius(lat_deg):
    """Radius of curvature in the prime vertical, meters."""
    s2 = np.sin(np.radians(lat_deg)) ** 2
    return WGS84_A / np.sqrt(1.0 - WGS84_E2 * s2)


def gaussian_radius(lat_deg):
    """sqrt(M*N): best local sphere radius, meters."""
    return np.sqrt(meridional_radius(lat_deg) * normal_radius(lat_deg))


# ---------------------------------------------------------------------------
# Vincenty inverse / direct
# ---------------------------------------------------------------------------

_VINCENTY_TOL = 1e-13
_VINCENTY_MAXITER = 50


def inverse(lat1, lon1, lat2, lon2):
    """Geodesic between points: (distance_m, azimuth1_deg, azimuth2_deg).

    Vectorized; inputs broadcast.  Azimuths are clockwise from north.
    Near-antipodal pairs are not handled (irrelevant at regional scale).
    """
    lat1, lon1, lat2, lon2 = np.broadcast_arrays(
        *(np.asarray(x, dtype=float) for x in (lat1, lon1, lat2, lon2))
    )
    phi1 = np.radians(lat1)
    phi2 = np.radians(lat2)
    L = np.radians(lon2 - lon1)

    U1 = np.arctan((1.0 - WGS84_F) * np.tan(phi1))
    U2 = np.arctan((1.0 - WGS84_F) * np.tan(phi2))
    sinU1, cosU1 = np.sin(U1), np.cos(U1)
    sinU2, cosU2 = np.sin(U2), np.cos(U2)

    lam = L.copy()
    sin_sig = np.zeros_like(lam)
    cos_sig = np.ones_like(lam)
    sigma = np.zeros_like(lam)
    cos2_alpha = np.ones_like(lam)
    cos_2sigm = np.ones_like(lam)

    for _ in range(_VINCENTY_MAXITER):
        sin_lam, cos_lam = np.sin(lam), np.cos(lam)
        t1 = cosU2 * sin_lam
        t2 = cosU1 * sinU2 - sinU1 * cosU2 * cos_lam
        sin_sig = np.hypot(t1, t2)
        cos_sig = sinU1 * sinU2 + cosU1 * cosU2 * cos_lam
        sigma = np.arctan2(sin_sig, cos_sig)
        coincident = sin_sig == 0.0
        safe_sin_sig = np.where(coincident, 1.0, sin_sig)
        sin_alpha = cosU1 * cosU2 * sin_lam / safe_sin_sig
        cos2_alpha = 1.0 - sin_alpha**2
        # equatorial lines have cos2_alpha == 0
        safe_c2a = np.where(cos2_alpha == 0.0, 1.0, cos2_alpha)
        cos_2sigm = np.where(
            cos2_alpha == 0.0, 0.0, cos_sig - 2.0 * sinU1 * sinU2 / safe_c2a
        )
        C = WGS84_F / 16.0 * cos2_alpha * (4.0 + WGS84_F * (4.0 - 3.0 * cos2_alpha))
        lam_new = L + (1.0 - C) * WGS84_F * sin_alpha * (
            sigma
            + C
            * sin_sig
            * (cos_2sigm + C * cos_sig * (-1.0 + 2.0 * cos_2sigm**2))
        )
        if np.all(np.abs(lam_new - lam) < _VINCENTY_TOL):
            lam = lam_new
            break
        lam = lam_new

    u2 = cos2_alpha * (WGS84_A**2 - WGS84_B**2) / WGS84_B**2
    A = 1.0 + u2 / 16384.0 * (4096.0 + u2 * (-768.0 + u2 * (320.0 - 175.0 * u2)))
    B = u2 / 1024.0 * (256.0 + u2 * (-128.0 + u2 * (74.0 - 47.0 * u2)))
    dsig = (
        B
        * sin_sig
        * (
            cos_2sigm
            + B
            / 4.0
            * (
                cos_sig * (-1.0 + 2.0 * cos_2sigm**2)
                - B
                / 6.0
                * cos_2sigm
                * (-3.0 + 4.0 * sin_sig**2)
                * (-3.0 + 4.0 * cos_2sigm**2)
            )
        )
    )
    dist = WGS84_B * A * (sigma - dsig)

    sin_lam, cos_lam = np.sin(lam), np.cos(lam)
    az1 = np.arctan2(cosU2 * sin_lam, cosU1 * sinU2 - sinU1 * cosU2 * cos_lam)
    az2 = np.arctan2(cosU1 * sin_lam, -sinU1 * cosU2 + cosU1 * sinU2 * cos_lam)
    az1 = np.degrees(az1) % 360.0
    az2 = np.degrees(az2) % 360.0

    same = (lat1 == lat2) & (lon1 == lon2)
    dist = np.where(same, 0.0, dist)
    if dist.ndim == 0:
        return float(dist), float(az1), float(az2)
    return dist, az1, az2


def distance(lat1, lon1, lat2, lon2):
    """Geodesic distance in meters (WGS84)."""
    return inverse(lat1, lon1, lat2, lon2)[0]


def direct(lat1, lon1, azimuth_deg, dist_m):
    """Destination point (lat, lon) after dist_m along azimuth (Vincenty direct)."""
    lat1, lon1, azimuth_deg, dist_m = np.broadcast_arrays(
        *(np.asarray(x, dtype=float) for x in (lat1, lon1, azimuth_deg, dist_m))
    )
    phi1 = np.radians(lat1)
    alpha1 = np.radians(azimuth_deg)

    U1 = np.arctan((1.0 - WGS84_F) * np.tan(phi1))
    sinU1, cosU1 = np.sin(U1), np.cos(U1)
    sin_a1, cos_a1 = np.sin(alpha1), np.cos(alpha1)

    sigma1 = np.arctan2(np.tan(U1), cos_a1)
    sin_alpha = cosU1 * sin_a1
    cos2_alpha = 1.0 - sin_alpha**2
    u2 = cos2_alpha * (WGS84_A**2 - WGS84_B**2) / WGS84_B**2
    A = 1.0 + u2 / 16384.0 * (4096.0 + u2 * (-768.0 + u2 * (320.0 - 175.0 * u2)))
    B = u2 / 1024.0 * (256.0 + u2 * (-128.0 + u2 * (74.0 - 47.0 * u2)))

    sigma = dist_m / (WGS84_B * A)
    for _ in range(_VINCENTY_MAXITER):
        cos_2sigm = np.cos(2.0 * sigma1 + sigma)
        sin_sig, cos_sig = np.sin(sigma), np.cos(sigma)
        dsig = (
            B
            * sin_sig
            * (
                cos_2sigm
                + B
                / 4.0
                * (
                    cos_sig * (-1.0 + 2.0 * cos_2sigm**2)
                    - B
                    / 6.0
                    * cos_2sigm
                    * (-3.0 + 4.0 * sin_sig**2)
                    * (-3.0 + 4.0 * cos_2sigm**2)
                )
            )
        )
        sigma_new = dist_m / (WGS84_B * A) + dsig
        if np.all(np.abs(sigma_new - sigma) < _VINCENTY_TOL):
            sigma = sigma_new
            break
        sigma = sigma_new

    sin_sig, cos_sig = np.sin(sigma), np.cos(sigma)
    cos_2sigm = np.cos(2.0 * sigma1 + sigma)
    tmp = sinU1 * sin_sig - cosU1 * cos_sig * cos_a1
    lat2 = np.arctan2(
        sinU1 * cos_sig + cosU1 * sin_sig * cos_a1,
        (1.0 - WGS84_F) * np.hypot(sin_alpha, tmp),
    )
    lam = np.arctan2(sin_sig * sin_a1, cosU1 * cos_sig - sinU1 * sin_sig * cos_a1)
    C = WGS84_F / 16.0 * cos2_alpha * (4.0 + WGS84_F * (4.0 - 3.0 * cos2_alpha))
    L = lam - (1.0 - C) * WGS84_F * sin_alpha * (
        sigma
        + C * sin_sig * (cos_2sigm + C * cos_sig * (-1.0 + 2.0 * cos_2sigm**2))
    )
    lon2 = (np.degrees(np.radians(lon1) + L) + 540.0) % 360.0 - 180.0
    lat2 = np.degrees(lat2)
    if lat2.ndim == 0:
        return float(lat2), float(lon2)
    return lat2, lon2


# ---------------------------------------------------------------------------
# Unit-sphere helpers
# ---------------------------------------------------------------------------


def to_unit(lat_deg, lon_deg):
    """Unit vectors, shape (..., 3)."""
    lat = np.radians(np.asarray(lat_deg, dtype=float))
    lon = np.radians(np.asarray(lon_deg, dtype=float))
    cl = np.cos(lat)
    return np.stack([cl * np.cos(lon), cl * np.sin(lon), np.sin(lat)], axis=-1)


def to_latlon(v):
    """Inverse of to_unit: (lat_deg, lon_deg)."""
    v = np.asarray(v, dtype=float)
    norm = np.linalg.norm(v, axis=-1)
    lat = np.degrees(np.arcsin(np.clip(v[..., 2] / norm, -1.0, 1.0)))
    lon = np.degrees(np.arctan2(v[..., 1], v[..., 0]))
    if lat.ndim == 0:
        return float(lat), float(lon)
    return lat, lon


def normalize(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def angle_between(u, v):
    """Angle between unit vectors in radians (stable for small angles)."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    cross = np.linalg.norm(np.cross(u, v), axis=-1)
    dot = np.sum(u * v, axis=-1)
    ang = np.arctan2(cross, dot)
    return float(ang) if ang.ndim == 0 else ang


def slerp(u, v, t):
    """Interpolate along the great circle from u to v; t in [0, 1]."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    t = np.asarray(t, dtype=float)[..., None]
    omega = angle_between(u, v)
    if np.isscalar(omega) or np.ndim(omega) == 0:
        if omega < 1e-12:
            return normalize(u + t * (v - u))
        so = np.sin(omega)
        return (np.sin((1.0 - t) * omega) * u + np.sin(t * omega) * v) / so
    raise ValueError("slerp expects a single arc; vectorize over t only")


def arc_project(p, a, b):
    """Project points onto the great-circle arc a->b.

    p: (..., 3) unit vectors; a, b: (3,) unit vectors.
    Returns (angular_dist_rad, t) where t in [0, 1] locates the nearest
    point on the arc as a fraction of the arc angle.
    """
    p = np.asarray(p, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n = np.cross(a, b)
    nn = np.linalg.norm(n)
    omega = angle_between(a, b)
    if nn < 1e-15 or omega < 1e-12:
        # degenerate arc: distance to the single point
        d = np.arctan2(
            np.linalg.norm(np.cross(p, a), axis=-1), np.sum(p * a, axis=-1)
        )
        t = np.zeros(np.shape(d))
        return d, t
    n = n / nn
    # signed position of the foot point along the arc
    dot_n = np.sum(p * n, axis=-1)
    foot = p - dot_n[..., None] * n
    fnorm = np.linalg.norm(foot, axis=-1)
    degenerate = fnorm < 1e-15  # p at a pole of the circle
    foot = np.where(degenerate[..., None], a, foot / np.where(fnorm == 0, 1, fnorm)[..., None])
    # angle of foot from a, signed by arc direction
    ang = np.arctan2(np.sum(np.cross(a, foot) * n, axis=-1), np.sum(foot * a, axis=-1))
    t = np.clip(ang / omega, 0.0, 1.0)
    t = np.where(degenerate, 0.0, t)
    near = slerp_many(a, b, np.atleast_1d(t))
    p2 = np.atleast_2d(p)
    d = np.arctan2(
        np.linalg.norm(np.cross(p2, near), axis=-1), np.sum(p2 * near, axis=-1)
    )
    if p.ndim == 1:
        return float(d[0]), float(np.atleast_1d(t)[0])
    return d, t


def slerp_many(a, b, t):
    """slerp for an array of fractions t along a single arc."""
    omega = angle_between(a, b)
    t = np.asarray(t, dtype=float)
    if omega < 1e-12:
        return np.broadcast_to(a, t.shape + (3,)).copy()
    so = np.sin(omega)
    return (
        np.sin((1.0 - t[..., None]) * omega) * a + np.sin(t[..., None] * omega) * b
    ) / so


def cross_track_m(lat, lon, lat_a, lon_a, lat_b, lon_b):
    """Distance in meters from points to the arc (a, b), sphere approximation."""
    p = to_unit(lat, lon)
    a = to_unit(lat_a, lon_a)
    b = to_unit(lat_b, lon_b)
    d, _ = arc_project(p, a, b)
    mid_lat = 0.5 * (lat_a + lat_b)
    return d * gaussian_radius(mid_lat)


# ---------------------------------------------------------------------------
# Spherical polygons
# ---------------------------------------------------------------------------


class SphericalPolygon:
    """Simple polygon with great-circle edges; even-odd containment.

    Containment is evaluated by gnomonic projection about the query point
    (great circles map to straight lines), then a planar even-odd test.
    Points on an edge or vertex count as inside.  Exact only while the
    polygon stays within the open hemisphere around the query point, which
    holds for any regional geometry.
    """

    def __init__(self, lats, lons):
        lats = np.asarray(lats, dtype=float)
        lons = np.asarray(lons, dtype=float)
        if lats.size != lons.size or lats.size < 3:
            raise ValueError("polygon needs at least 3 vertices")
        # drop an explicitly closed ring's duplicate endpoint
        if lats[0] == lats[-1] and lons[0] == lons[-1] and lats.size > 3:
            lats, lons = lats[:-1], lons[:-1]
            if lats.size < 3:
                raise ValueError("polygon needs at least 3 distinct vertices")
        self.lats = lats
        self.lons = lons
        self._verts = to_unit(lats, lons)
        self._bbox = (lats.min(), lats.max(), lons.min(), lons.max())

    def contains(self, lat, lon):
        """Even-odd containment; boundary points are inside.  Vectorized."""
        lat = np.asarray(lat, dtype=float)
        scalar = lat.ndim == 0
        lat = np.atleast_1d(lat)
        lon = np.atleast_1d(np.asarray(lon, dtype=float))
        p = to_unit(lat, lon)  # (np, 3)

        dots = p @ self._verts.T  # (np, nv)
        reachable = np.any(dots > 0.0, axis=1)

        # tangent-plane basis at each query point
        ref = np.where(
            (np.abs(p[:, 2]) < 0.9)[:, None],
            np.array([0.0, 0.0, 1.0]),
            np.array([1.0, 0.0, 0.0]),
        )
        e1 = normalize(np.cross(ref, p))
        e2 = np.cross(p, e1)

        # gnomonic projection; vertices at/beyond the horizon pushed far out
        safe = np.clip(dots, 1e-9, None)  # (np, nv)
        x = (e1 @ self._verts.T) / safe
        y = (e2 @ self._verts.T) / safe

        x2 = np.roll(x, -1, axis=1)
        y2 = np.roll(y, -1, axis=1)

        # even-odd ray cast along +x from the origin
        straddle = (y > 0.0) != (y2 > 0.0)
        denom = np.where(straddle, y2 - y, 1.0)
        x_cross = x + (0.0 - y) / denom * (x2 - x)
        crossings = np.sum(straddle & (x_cross > 0.0), axis=1)
        inside = (crossings % 2) == 1

        # boundary rule: origin within _EDGE_EPS of an edge counts as inside
        dx = x2 - x
        dy = y2 - y
        seg2 = dx * dx + dy * dy
        seg2_safe = np.where(seg2 == 0.0, 1.0, seg2)
        t = np.clip(-(x * dx + y * dy) / seg2_safe, 0.0, 1.0)
        ex = x + t * dx
        ey = y + t * dy
        on_edge = np.any(ex * ex + ey * ey <= _EDGE_EPS**2, axis=1)

        out = reachable & (inside | on_edge)
        return bool(out[0]) if scalar else out


_EDGE_EPS = 1e-12


def local_xy(lat, lon, lat0, lon0):
    """Equirectangular local projection to meters about (lat0, lon0)."""
    m_per_deg_lat = meridional_radius(lat0) * np.pi / 180.0
    m_per_deg_lon = normal_radius(lat0) * np.cos(np.radians(lat0)) * np.pi / 180.0
    x = (np.asarray(lon, dtype=float) - lon0) * m_per_deg_lon
    y = (np.asarray(lat, dtype=float) - lat0) * m_per_deg_lat
    return x, y
