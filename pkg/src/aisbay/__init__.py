"""aisbay: reconstruct coastal vessel activity from AIS reports.

Modules:
    ingest      parse and normalize NDJSON position/static reports
    clean       per-vessel cleaning cascade and leg segmentation
    classify    moored-vs-absent gap classification over transit areas
    trajectory  simplified route + speed-profile movement model
    metrics     counts, transit rates, daily cycles, uncertainties
    gridberth   arc-second rasters and berth detection
    georecv     receiver localization from radio-shadow geodesics
    synth       deterministic scenario generator with ground truth
    cli         stage-per-command pipeline driver
"""

__version__ = "0.1.0"
