import numpy as np
import pytest

from aisbay import geo
from aisbay.ingest import AisMessage, POSITION, STATIC


def pos_msg(mmsi, t, lat, lon, sog=10.0, **kw):
    return AisMessage(
        mmsi=mmsi, timestamp=int(t), kind=POSITION,
        lat=round(lat, 6), lon=round(lon, 6), sog=sog, **kw,
    )


def static_msg(mmsi, t, **kw):
    return AisMessage(mmsi=mmsi, timestamp=int(t), kind=STATIC, **kw)


def east_track(mmsi, t0, n, dt_s, speed_mps, lat=35.2, lon=139.8, sog=None):
    """n messages heading east at constant speed."""
    if sog is None:
        sog = speed_mps / geo.KNOT
    out = []
    for i in range(n):
        la, lo = geo.direct(lat, lon, 90.0, i * dt_s * speed_mps)
        out.append(pos_msg(mmsi, t0 + i * dt_s, la, lo, sog=round(sog, 3)))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20240809)
