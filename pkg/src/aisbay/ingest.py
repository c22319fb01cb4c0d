"""Ingest AIS reports from NDJSON: parse, normalize, window, enrich vessels.

One record per line with keys: mmsi, t (RFC 3339 or epoch seconds), lat,
lon, sog (knots), kind ("pos" | "static"), status, dest, type.  Position
reports must carry lat/lon/sog; static reports must not carry sog and get
their positions assigned afterwards from the nearest position report.
"""

from __future__ import annotations

import csv
import json
import logging
import sys
from collections import Counter, defaultdict
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from importlib import resources
from typing import Iterable, Iterator

import numpy as np

log = logging.getLogger(__name__)

POSITION = "pos"
STATIC = "static"

COORD_DECIMALS = 6


class Category(str, Enum):
    PASSENGER = "passenger-highspeed"
    LAW_MILITARY = "law-military"
    CARGO = "cargo"
    PILOT_TUG = "pilot-tug-rescue-dredging"
    TANKER = "tanker"
    OTHER = "other-fishing"


class RecordRejected(ValueError):
    """A single bad input record; carries a short reason for counting."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


@dataclass
class AisMessage:
    mmsi: int
    timestamp: int  # UTC seconds
    kind: str  # POSITION | STATIC
    lat: float | None = None
    lon: float | None = None
    sog: float | None = None  # knots; position reports only
    nav_status: int | None = None
    destination: str | None = None
    ship_type: int | None = None

    def to_record(self) -> dict:
        rec = {
            "mmsi": self.mmsi,
            "t": datetime.fromtimestamp(self.timestamp, tz=timezone.utc).strftime(
                "%Y-%m-%dT%H:%M:%SZ"
            ),
            "kind": self.kind,
        }
        if self.lat is not None:
            rec["lat"] = self.lat
            rec["lon"] = self.lon
        if self.sog is not None:
            rec["sog"] = self.sog
        if self.nav_status is not None:
            rec["status"] = self.nav_status
        if self.destination is not None:
            rec["dest"] = self.destination
        if self.ship_type is not None:
            rec["type"] = self.ship_type
        return rec


@dataclass
class VesselProfile:
    mmsi: int
    category: Category = Category.OTHER
    imo: int | None = None
    gross_tonnage: float | None = None
    fishing: bool = False  # modal reported type is the fishing code (30)
    type_known: bool = False  # any ship_type was ever reported


def _parse_time(value) -> int:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return int(value)
    if isinstance(value, str):
        try:
            dt = datetime.fromisoformat(value.replace("Z", "+00:00"))
        except ValueError as exc:
            raise RecordRejected("bad-value:t") from exc
        if dt.tzinfo is None:
            dt = dt.replace(tzinfo=timezone.utc)
        return int(dt.timestamp())
    raise RecordRejected("bad-value:t")


def parse_record(line: str) -> AisMessage:
    """Parse one NDJSON record into a normalized message.

    Coordinates are rounded to 6 decimals, timestamps truncated to whole
    seconds.  Raises RecordRejected with a short reason on any malformed,
    incomplete, or out-of-range record.
    """
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise RecordRejected("bad-json") from exc
    if not isinstance(obj, dict):
        raise RecordRejected("bad-json")

    for key in ("mmsi", "t", "kind"):
        if key not in obj:
            raise RecordRejected(f"missing-key:{key}")

    mmsi = obj["mmsi"]
    if not isinstance(mmsi, int) or isinstance(mmsi, bool) or not (0 < mmsi <= 999_999_999):
        raise RecordRejected("bad-value:mmsi")

    kind = obj["kind"]
    if kind not in (POSITION, STATIC):
        raise RecordRejected("bad-value:kind")

    ts = _parse_time(obj["t"])

    lat = obj.get("lat")
    lon = obj.get("lon")
    sog = obj.get("sog")

    if kind == POSITION:
        for key in ("lat", "lon", "sog"):
            if obj.get(key) is None:
                raise RecordRejected(f"missing-key:{key}")
    else:
        if sog is not None:
            raise RecordRejected("bad-value:sog")

    if lat is not None or lon is not None:
        if not isinstance(lat, (int, float)) or not isinstance(lon, (int, float)):
            raise RecordRejected("bad-value:lat")
        if not (-90.0 <= lat <= 90.0) or not (-180.0 <= lon <= 180.0):
            raise RecordRejected("out-of-range")
        lat = round(float(lat), COORD_DECIMALS)
        lon = round(float(lon), COORD_DECIMALS)

    if sog is not None:
        if not isinstance(sog, (int, float)) or sog < 0:
            raise RecordRejected("bad-value:sog")
        sog = float(sog)

    status = obj.get("status")
    if status is not None and (not isinstance(status, int) or isinstance(status, bool)):
        raise RecordRejected("bad-value:status")

    ship_type = obj.get("type")
    if ship_type is not None and (
        not isinstance(ship_type, int) or isinstance(ship_type, bool)
    ):
        raise RecordRejected("bad-value:type")

    dest = obj.get("dest")
    if dest is not None and not isinstance(dest, str):
        raise RecordRejected("bad-value:dest")

    return AisMessage(
        mmsi=mmsi,
        timestamp=ts,
        kind=kind,
        lat=lat,
        lon=lon,
        sog=sog,
        nav_status=status,
        destination=dest,
        ship_type=ship_type,
    )


@dataclass
class ParseStats:
    lines: int = 0
    accepted: int = 0
    rejected: Counter = None

    def __post_init__(self):
        if self.rejected is None:
            self.rejected = Counter()

    @property
    def rejected_total(self) -> int:
        return sum(self.rejected.values())


def parse_stream(
    lines: Iterable[str],
    stats: ParseStats | None = None,
    window: tuple[int, int] | None = None,
) -> Iterator[AisMessage]:
    """Yield parsed messages; count every line as accepted or rejected.

    With a window (t0, t1), messages outside [t0, t1] are counted under
    the rejection reason "outside-window" and not yielded.
    """
    if stats is None:
        stats = ParseStats()
    for line in lines:
        if not line.strip():
            continue
        stats.lines += 1
        try:
            msg = parse_record(line)
        except RecordRejected as exc:
            stats.rejected[exc.reason] += 1
            log.debug("rejected record (%s): %.120s", exc.reason, line)
            continue
        if window is not None and not (window[0] <= msg.timestamp <= window[1]):
            stats.rejected["outside-window"] += 1
            continue
        stats.accepted += 1
        yield msg


def read_ndjson(path: str, stats: ParseStats | None = None,
                window: tuple[int, int] | None = None) -> Iterator[AisMessage]:
    if path == "-":
        yield from parse_stream(sys.stdin, stats, window)
        return
    with open(path, "r", encoding="utf-8") as fh:
        yield from parse_stream(fh, stats, window)


def group_by_vessel(messages: Iterable[AisMessage]) -> dict[int, list[AisMessage]]:
    """Split a stream per MMSI, each sequence sorted by time.

    Ties on the timestamp are ordered position-report first so downstream
    passes see a deterministic sequence regardless of input order.
    """
    per: dict[int, list[AisMessage]] = defaultdict(list)
    for msg in messages:
        per[msg.mmsi].append(msg)
    for seq in per.values():
        seq.sort(key=lambda m: (m.timestamp, 0 if m.kind == POSITION else 1))
    return dict(sorted(per.items()))


def assign_static_positions(
    messages: list[AisMessage], max_gap_s: int = 4 * 3600
) -> tuple[list[AisMessage], int]:
    """Give each static report the position of the nearest position report.

    Ties are broken toward the earlier report.  Static reports with no
    position report within max_gap_s on either side are dropped; returns
    (messages, dropped_count).
    """
    pos_idx = [i for i, m in enumerate(messages) if m.kind == POSITION]
    if not pos_idx:
        dropped = sum(1 for m in messages if m.kind == STATIC)
        return [m for m in messages if m.kind != STATIC], dropped

    pos_times = np.array([messages[i].timestamp for i in pos_idx], dtype=np.int64)
    out: list[AisMessage] = []
    dropped = 0
    for m in messages:
        if m.kind != STATIC:
            out.append(m)
            continue
        j = int(np.searchsorted(pos_times, m.timestamp))
        best = None
        best_dt = None
        for k in (j - 1, j):
            if 0 <= k < len(pos_idx):
                dt = abs(int(pos_times[k]) - m.timestamp)
                # strict < keeps the earlier report on ties
                if best_dt is None or dt < best_dt:
                    best, best_dt = k, dt
        if best is None or best_dt > max_gap_s:
            dropped += 1
            continue
        src = messages[pos_idx[best]]
        m.lat = src.lat
        m.lon = src.lon
        out.append(m)
    return out, dropped


# ---------------------------------------------------------------------------
# Vessel enrichment
# ---------------------------------------------------------------------------

FISHING_TYPE_CODE = 30


def load_type_map(path: str | None = None) -> dict[int, Category]:
    """Load the code -> category map (JSON or TOML).

    The file maps category names to lists of codes or "lo-hi" ranges.
    Codes not covered fall back to Category.OTHER.
    """
    if path is None:
        with resources.files("aisbay.data").joinpath("type_categories.json").open() as fh:
            raw = json.load(fh)
    elif path.endswith(".toml"):
        try:
            import tomllib
        except ModuleNotFoundError as exc:  # python < 3.11
            raise RuntimeError("TOML config needs python >= 3.11; use JSON") from exc
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    else:
        with open(path) as fh:
            raw = json.load(fh)

    table: dict[int, Category] = {}
    for name, codes in raw.items():
        cat = Category(name)
        for code in codes:
            if isinstance(code, str):
                lo, hi = code.split("-")
                for c in range(int(lo), int(hi) + 1):
                    table[c] = cat
            else:
                table[int(code)] = cat
    return table


def load_gt_table(path: str) -> dict[int, tuple[int | None, float]]:
    """CSV with columns mmsi and/or imo plus gt; keyed by MMSI."""
    table: dict[int, tuple[int | None, float]] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            mmsi = row.get("mmsi")
            if not mmsi:
                continue
            imo = row.get("imo") or None
            gt = row.get("gt")
            if gt in (None, ""):
                continue
            table[int(mmsi)] = (int(imo) if imo else None, float(gt))
    return table


def enrich(
    mmsi: int,
    static_history: list[AisMessage],
    type_map: dict[int, Category],
    gt_table: dict[int, tuple[int | None, float]] | None = None,
) -> VesselProfile:
    """Build the vessel profile from its static reports.

    The category comes from the modal ship_type across the vessel's static
    reports (ties break toward the lower code); unresolved or absent codes
    map to Category.OTHER.
    """
    counts = Counter(
        m.ship_type for m in static_history if m.ship_type is not None
    )
    modal = None
    if counts:
        top = max(counts.values())
        modal = min(code for code, n in counts.items() if n == top)

    category = type_map.get(modal, Category.OTHER) if modal is not None else Category.OTHER
    imo, gt = (None, None)
    if gt_table and mmsi in gt_table:
        imo, gt = gt_table[mmsi]
        if gt is not None and gt < 0:
            raise ValueError(f"negative gross tonnage for {mmsi}")
    return VesselProfile(
        mmsi=mmsi,
        category=category,
        imo=imo,
        gross_tonnage=gt,
        fishing=modal == FISHING_TYPE_CODE,
        type_known=modal is not None,
    )
