"""Run configuration with the documented processing defaults.

Every threshold of the processing chain lives here so a run can be
reproduced from its config file alone.  The config round-trips through
JSON (and TOML on interpreters that ship tomllib).
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field


@dataclass
class RunConfig:
    # inputs
    input_paths: list[str] = field(default_factory=list)
    roi_path: str | None = None
    areas_path: str | None = None
    shoreline_path: str | None = None
    type_map_path: str | None = None
    gt_table_path: str | None = None
    segments_path: str | None = None
    scenario_path: str | None = None

    # analysis window (epoch seconds); None = unbounded
    window_start: int | None = None
    window_end: int | None = None

    # area policy
    areas_policy: str = "df"

    # cleaning cascade
    static_square_m: float = 100.0
    stationary_kn: float = 0.5
    split_gap_s: int = 4 * 3600
    split_dist_m: float = 40_000.0
    speed_max_kn: float = 50.0
    accel_max_ms2: float = 1.0
    merge_gap_s: int = 120

    # classification
    gap_message_limit: int = 4

    # trajectory model
    d_tol_m: float = 10.0
    speed_rel_tol: float = 0.05

    # metrics
    edge_exclusion_days: float = 3.0
    count_step_s: int = 60
    profile_bin_s: int = 240
    gt_split: float = 10_000.0
    delta_dark: float = 0.16  # untracked-vessel fraction, config input
    delta_aisb: float = 0.12  # voluntary-class fraction, config input
    delta_aisb_file: str | None = None  # per-category overrides (JSON)

    # rasters and berths
    grid_lat_min: float | None = None
    grid_lat_max: float | None = None
    grid_lon_min: float | None = None
    grid_lon_max: float | None = None
    sample_m: float = 10.0
    drift_max_m: float = 500.0
    smooth_sigma_cells: float = 1.5
    seed_threshold_per_km2: float = 10.0
    support_ratio: float = 0.5
    shore_max_m: float = 200.0

    # receiver localization
    outlier_alpha: float = 0.05
    weight_cutoff: float = 0.02
    p_containment: float = 0.68
    p_confidence: float = 0.95

    # execution
    threads: int = 1
    seed: int = 0

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)

    @classmethod
    def load(cls, path: str) -> "RunConfig":
        if path.endswith(".toml"):
            try:
                import tomllib
            except ModuleNotFoundError as exc:
                raise RuntimeError("TOML config needs python >= 3.11; use JSON") from exc
            with open(path, "rb") as fh:
                return cls.from_dict(tomllib.load(fh))
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def save(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @property
    def window(self) -> tuple[int, int] | None:
        if self.window_start is None or self.window_end is None:
            return None
        return (self.window_start, self.window_end)
