"""Checkpointable pipeline stages over on-disk artifacts.

Each stage reads the previous stage's files, does its work (per-vessel
parts optionally on a thread pool, merged in MMSI order so results do not
depend on the parallelism degree), and writes its outputs plus a
deterministic JSON manifest of input/output hashes and counters.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from collections import Counter
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import classify, clean, geo, georecv, gridberth, ingest, metrics, synth, trajectory
from .config import RunConfig

log = logging.getLogger(__name__)


def sha256_file(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_json(path: str, doc) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def write_manifest(out_dir: str, stage: str, cfg: RunConfig,
                   inputs: list[str], outputs: list[str], counts: dict) -> str:
    cfg_hash = hashlib.sha256(
        json.dumps(cfg.to_dict(), sort_keys=True).encode()
    ).hexdigest()
    doc = {
        "stage": stage,
        "config_sha256": cfg_hash,
        "inputs": {os.path.basename(p): sha256_file(p) for p in sorted(inputs)},
        "outputs": {os.path.basename(p): sha256_file(p) for p in sorted(outputs)},
        "counts": {k: counts[k] for k in sorted(counts)},
    }
    path = os.path.join(out_dir, "manifest.json")
    write_json(path, doc)
    return path


def map_vessels(fn, items: dict, threads: int) -> dict:
    """Apply fn(mmsi, value) per vessel; deterministic MMSI-ordered merge."""
    keys = sorted(items)
    if threads <= 1:
        return {k: fn(k, items[k]) for k in keys}
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futs = {k: pool.submit(fn, k, items[k]) for k in keys}
        return {k: futs[k].result() for k in keys}


class MissingArtifact(FileNotFoundError):
    pass


def _need(path: str) -> str:
    if not os.path.exists(path):
        raise MissingArtifact(path)
    return path


# ---------------------------------------------------------------------------
# Stage: synth
# ---------------------------------------------------------------------------


def run_synth(cfg: RunConfig, out_dir: str) -> dict:
    os.makedirs(out_dir, exist_ok=True)
    if cfg.scenario_path:
        with open(cfg.scenario_path) as fh:
            scenario = synth.scenario_from_dict(json.load(fh))
        inputs = [cfg.scenario_path]
    else:
        scenario = synth.reference_scenario(seed=cfg.seed or 20240805)
        inputs = []
    lines, truth = synth.generate(scenario)

    msg_path = os.path.join(out_dir, "messages.ndjson")
    with open(msg_path, "w") as fh:
        fh.write("\n".join(lines))
        fh.write("\n")
    truth_path = os.path.join(out_dir, "truth.json")
    write_json(truth_path, truth)
    roi_path = os.path.join(out_dir, "roi.geojson")
    write_json(roi_path, scenario.geometry.roi_geojson())
    areas_path = os.path.join(out_dir, "areas.geojson")
    write_json(areas_path, scenario.geometry.areas_geojson())
    scn_path = os.path.join(out_dir, "scenario.json")
    write_json(scn_path, synth.scenario_to_dict(scenario))
    gt_path = os.path.join(out_dir, "gt_table.csv")
    with open(gt_path, "w") as fh:
        fh.write("mmsi,imo,gt\n")
        for v in scenario.vessels:
            if v.gt is not None:
                fh.write(f"{v.mmsi},,{v.gt}\n")

    counts = {"messages": len(lines), "vessels": len(scenario.vessels)}
    outputs = [msg_path, truth_path, roi_path, areas_path, scn_path, gt_path]
    write_manifest(out_dir, "synth", cfg, inputs, outputs, counts)
    return counts


# ---------------------------------------------------------------------------
# Stage: ingest
# ---------------------------------------------------------------------------


def run_ingest(cfg: RunConfig, out_dir: str) -> dict:
    os.makedirs(out_dir, exist_ok=True)
    if not cfg.input_paths:
        raise MissingArtifact("no input paths configured")
    inputs = [_need(p) for p in cfg.input_paths]

    stats = ingest.ParseStats()
    messages: list[ingest.AisMessage] = []
    for path in inputs:
        messages.extend(ingest.read_ndjson(path, stats, cfg.window))

    per = ingest.group_by_vessel(messages)
    type_map = ingest.load_type_map(cfg.type_map_path)
    gt_table = ingest.load_gt_table(cfg.gt_table_path) if cfg.gt_table_path else {}

    msg_path = os.path.join(out_dir, "messages.ndjson")
    with open(msg_path, "w") as fh:
        for mmsi in per:
            for m in per[mmsi]:
                fh.write(json.dumps(m.to_record(), sort_keys=True))
                fh.write("\n")

    profiles = {}
    dest_hist: dict[int, list] = {}
    for mmsi, seq in per.items():
        statics = [m for m in seq if m.kind == ingest.STATIC]
        profiles[mmsi] = ingest.enrich(mmsi, statics, type_map, gt_table)
        hist = []
        for m in statics:
            if m.destination is not None:
                hist.append([m.timestamp, m.destination])
        dest_hist[mmsi] = hist

    prof_path = os.path.join(out_dir, "vessels.json")
    write_json(
        prof_path,
        {
            str(m): {
                "category": p.category.value,
                "imo": p.imo,
                "gt": p.gross_tonnage,
                "fishing": p.fishing,
                "type_known": p.type_known,
            }
            for m, p in profiles.items()
        },
    )
    dest_path = os.path.join(out_dir, "destinations.json")
    write_json(dest_path, {str(m): h for m, h in dest_hist.items()})

    counts = {
        "lines": stats.lines,
        "accepted": stats.accepted,
        "vessels": len(per),
        **{f"rejected:{k}": v for k, v in stats.rejected.items()},
    }
    write_manifest(out_dir, "ingest", cfg, inputs, [msg_path, prof_path, dest_path], counts)
    return counts


def load_messages(ingest_dir: str) -> dict[int, list[ingest.AisMessage]]:
    path = _need(os.path.join(ingest_dir, "messages.ndjson"))
    stats = ingest.ParseStats()
    return ingest.group_by_vessel(ingest.read_ndjson(path, stats))


# ---------------------------------------------------------------------------
# Stage: clean
# ---------------------------------------------------------------------------


def _leg_doc(leg: clean.Leg) -> dict:
    return {
        "mmsi": leg.mmsi,
        "v_entry": leg.v_entry,
        "v_exit": leg.v_exit,
        "points": [
            [m.timestamp, m.lat, m.lon, m.sog] for m in leg.messages
        ],
    }


def _leg_from_doc(doc: dict) -> clean.Leg:
    msgs = [
        ingest.AisMessage(
            mmsi=doc["mmsi"], timestamp=p[0],
            kind=ingest.POSITION if p[3] is not None else ingest.STATIC,
            lat=p[1], lon=p[2], sog=p[3],
        )
        for p in doc["points"]
    ]
    return clean.Leg(mmsi=doc["mmsi"], messages=msgs,
                     v_entry=doc["v_entry"], v_exit=doc["v_exit"])


def run_clean(cfg: RunConfig, out_dir: str, ingest_dir: str) -> dict:
    os.makedirs(out_dir, exist_ok=True)
    per = load_messages(ingest_dir)
    evidence = {m: [x.timestamp for x in seq] for m, seq in per.items()}

    roi = classify.load_polygon(_need(cfg.roi_path)) if cfg.roi_path else None
    main_poly = None
    if cfg.areas_path:
        areas = classify.load_areas(_need(cfg.areas_path))
        main_poly = next(
            (a.polygon for a in areas if a.id == classify.MAIN_AREA_ID), None
        )

    kept, removed_vessels = clean.remove_static_vessels(per, cfg.static_square_m)

    def work(mmsi, seq):
        assigned, dropped = ingest.assign_static_positions(seq, cfg.split_gap_s)
        res = clean.clean_vessel(
            mmsi, assigned, roi=roi, main_area=main_poly,
            evidence_times=evidence[mmsi],
            stationary_kn=cfg.stationary_kn, split_gap_s=cfg.split_gap_s,
            split_dist_m=cfg.split_dist_m, speed_max_kn=cfg.speed_max_kn,
            accel_max=cfg.accel_max_ms2, merge_gap_s=cfg.merge_gap_s,
        )
        res.removed["unlocatable-static"] += dropped
        res.n_input = len(seq)
        return res

    results = map_vessels(work, kept, cfg.threads)

    legs_path = os.path.join(out_dir, "legs.ndjson")
    with open(legs_path, "w") as fh:
        for mmsi in results:
            for leg in results[mmsi].legs:
                fh.write(json.dumps(_leg_doc(leg), sort_keys=True))
                fh.write("\n")
    runs_path = os.path.join(out_dir, "stationary_runs.ndjson")
    with open(runs_path, "w") as fh:
        for mmsi in results:
            for sp in results[mmsi].stationary_runs:
                fh.write(json.dumps({
                    "mmsi": mmsi,
                    "points": [[m.timestamp, m.lat, m.lon, m.sog] for m in sp.messages],
                }, sort_keys=True))
                fh.write("\n")
    iso_path = os.path.join(out_dir, "isolated.ndjson")
    with open(iso_path, "w") as fh:
        for mmsi in results:
            for m in results[mmsi].isolated:
                fh.write(json.dumps(
                    {"mmsi": mmsi, "point": [m.timestamp, m.lat, m.lon, m.sog]},
                    sort_keys=True,
                ))
                fh.write("\n")
    ev_path = os.path.join(out_dir, "evidence.json")
    write_json(ev_path, {str(m): evidence[m] for m in results})

    removed_total = Counter()
    for res in results.values():
        removed_total.update(res.removed)
    counts = {
        "vessels": len(results),
        "static_vessels_removed": len(removed_vessels),
        "legs": sum(len(r.legs) for r in results.values()),
        "stationary_runs": sum(len(r.stationary_runs) for r in results.values()),
        "isolated": sum(len(r.isolated) for r in results.values()),
        **{f"removed:{k}": v for k, v in removed_total.items()},
    }
    inputs = [os.path.join(ingest_dir, "messages.ndjson")]
    write_manifest(out_dir, "clean", cfg, inputs,
                   [legs_path, runs_path, iso_path, ev_path], counts)
    return counts


def load_clean(clean_dir: str) -> dict[int, clean.CleanResult]:
    legs_path = _need(os.path.join(clean_dir, "legs.ndjson"))
    runs_path = _need(os.path.join(clean_dir, "stationary_runs.ndjson"))
    iso_path = _need(os.path.join(clean_dir, "isolated.ndjson"))
    ev_path = _need(os.path.join(clean_dir, "evidence.json"))

    with open(ev_path) as fh:
        evidence = {int(k): v for k, v in json.load(fh).items()}
    results = {
        m: clean.CleanResult(m, [], [], [], Counter(), ev, len(ev))
        for m, ev in evidence.items()
    }
    with open(legs_path) as fh:
        for line in fh:
            doc = json.loads(line)
            results[doc["mmsi"]].legs.append(_leg_from_doc(doc))
    with open(runs_path) as fh:
        for line in fh:
            doc = json.loads(line)
            msgs = [
                ingest.AisMessage(
                    mmsi=doc["mmsi"], timestamp=p[0],
                    kind=ingest.POSITION if p[3] is not None else ingest.STATIC,
                    lat=p[1], lon=p[2], sog=p[3],
                )
                for p in doc["points"]
            ]
            lats = [m.lat for m in msgs]
            lons = [m.lon for m in msgs]
            alat, alon = geo.to_latlon(geo.to_unit(lats, lons).mean(axis=0))
            results[doc["mmsi"]].stationary_runs.append(
                clean.StationaryPeriod(
                    mmsi=doc["mmsi"], start_ts=msgs[0].timestamp,
                    end_ts=msgs[-1].timestamp, anchor_lat=alat, anchor_lon=alon,
                    messages=msgs,
                )
            )
    with open(iso_path) as fh:
        for line in fh:
            doc = json.loads(line)
            p = doc["point"]
            results[doc["mmsi"]].isolated.append(
                ingest.AisMessage(
                    mmsi=doc["mmsi"], timestamp=p[0],
                    kind=ingest.POSITION if p[3] is not None else ingest.STATIC,
                    lat=p[1], lon=p[2], sog=p[3],
                )
            )
    return results


# ---------------------------------------------------------------------------
# Stage: classify
# ---------------------------------------------------------------------------


def run_classify(cfg: RunConfig, out_dir: str, clean_dir: str) -> dict:
    os.makedirs(out_dir, exist_ok=True)
    results = load_clean(clean_dir)
    areas = classify.load_areas(_need(cfg.areas_path))
    policy = classify.AreaSetPolicy.of(cfg.areas_policy)
    main_poly = next(
        (a.polygon for a in areas if a.id == classify.MAIN_AREA_ID), None
    )

    def work(mmsi, res):
        return classify.build_timeline(res, areas, policy, cfg.gap_message_limit)

    timelines = map_vessels(work, results, cfg.threads)

    gaps_path = os.path.join(out_dir, "gaps.ndjson")
    with open(gaps_path, "w") as fh:
        for mmsi in timelines:
            for g in timelines[mmsi].gaps:
                fh.write(json.dumps({
                    "mmsi": mmsi, "start": g.gap_start, "end": g.gap_end,
                    "end_area": g.end_area_id, "start_area": g.start_area_id,
                    "n_messages": g.message_count, "verdict": g.verdict,
                    "threshold_h": g.threshold_used_h,
                }, sort_keys=True))
                fh.write("\n")
    sp_path = os.path.join(out_dir, "stationary.ndjson")
    with open(sp_path, "w") as fh:
        for mmsi in timelines:
            for sp in timelines[mmsi].stationary_periods:
                fh.write(json.dumps({
                    "mmsi": mmsi, "start": sp.start_ts, "end": sp.end_ts,
                    "anchor": [sp.anchor_lat, sp.anchor_lon],
                    "drift_m": sp.drift_extent_m,
                }, sort_keys=True))
                fh.write("\n")
    events_path = os.path.join(out_dir, "events.ndjson")
    all_events = []
    for mmsi in timelines:
        all_events.extend(classify.transit_events(timelines[mmsi], main_poly))
    all_events.sort(key=lambda e: (e.t, e.mmsi, e.direction))
    with open(events_path, "w") as fh:
        for e in all_events:
            fh.write(json.dumps({
                "t": e.t, "mmsi": e.mmsi, "dir": e.direction,
                "lat": e.lat, "lon": e.lon,
            }, sort_keys=True))
            fh.write("\n")

    first, last, n_in, n_out = classify.first_last_contact_stats(all_events)
    contact_path = os.path.join(out_dir, "contact_stats.json")
    write_json(contact_path, {
        "mean_first_contact": list(first) if first else None,
        "mean_last_contact": list(last) if last else None,
        "n_in": n_in, "n_out": n_out,
    })

    verdicts = Counter(g.verdict for tl in timelines.values() for g in tl.gaps)
    counts = {
        "vessels": len(timelines),
        "gaps": sum(len(tl.gaps) for tl in timelines.values()),
        "absent": verdicts.get(classify.ABSENT, 0),
        "moored": verdicts.get(classify.MOORED, 0),
        "events": len(all_events),
        "stationary_periods": sum(
            len(tl.stationary_periods) for tl in timelines.values()
        ),
    }
    inputs = [os.path.join(clean_dir, "legs.ndjson"), cfg.areas_path]
    write_manifest(out_dir, "classify", cfg, inputs,
                   [gaps_path, sp_path, events_path, contact_path], counts)
    return counts


def load_stationary(classify_dir: str) -> list[clean.StationaryPeriod]:
    path = _need(os.path.join(classify_dir, "stationary.ndjson"))
    out = []
    with open(path) as fh:
        for line in fh:
            doc = json.loads(line)
            out.append(clean.StationaryPeriod(
                mmsi=doc["mmsi"], start_ts=doc["start"], end_ts=doc["end"],
                anchor_lat=doc["anchor"][0], anchor_lon=doc["anchor"][1],
                drift_extent_m=doc["drift_m"],
            ))
    return out


def load_events(classify_dir: str) -> list[classify.TransitEvent]:
    path = _need(os.path.join(classify_dir, "events.ndjson"))
    out = []
    with open(path) as fh:
        for line in fh:
            doc = json.loads(line)
            out.append(classify.TransitEvent(
                t=doc["t"], mmsi=doc["mmsi"], direction=doc["dir"],
                lat=doc["lat"], lon=doc["lon"],
            ))
    return out


def load_timelines(clean_dir: str, classify_dir: str) -> list[classify.ClassifiedTimeline]:
    """Rebuild count-ready timelines from the stage artifacts."""
    results = load_clean(clean_dir)
    sps = load_stationary(classify_dir)
    by_vessel: dict[int, list] = {m: [] for m in results}
    for sp in sps:
        by_vessel.setdefault(sp.mmsi, []).append(sp)
    out = []
    for mmsi, res in results.items():
        out.append(classify.ClassifiedTimeline(
            mmsi=mmsi, legs=sorted(res.legs, key=lambda l: l.start_ts),
            gaps=[], stationary_periods=by_vessel.get(mmsi, []),
            removed=res.removed, evidence_times=res.evidence_times,
            n_input=res.n_input,
        ))
    return out


# ---------------------------------------------------------------------------
# Stage: tracks
# ---------------------------------------------------------------------------


def run_tracks(cfg: RunConfig, out_dir: str, clean_dir: str) -> dict:
    os.makedirs(out_dir, exist_ok=True)
    results = load_clean(clean_dir)

    def work(mmsi, res):
        return [
            trajectory.build_trajectory(leg, cfg.d_tol_m, cfg.speed_rel_tol)
            for leg in sorted(res.legs, key=lambda l: l.start_ts)
        ]

    per = map_vessels(work, results, cfg.threads)

    traj_path = os.path.join(out_dir, "trajectories.geojson")
    feats = []
    legs_flat = []
    trajs_flat = []
    for mmsi in per:
        legs = sorted(results[mmsi].legs, key=lambda l: l.start_ts)
        for leg, traj in zip(legs, per[mmsi]):
            feats.append(trajectory.to_geojson_feature(traj))
            legs_flat.append(leg)
            trajs_flat.append(traj)
    write_json(traj_path, {"type": "FeatureCollection", "features": feats})

    report = trajectory.fidelity_report(legs_flat, trajs_flat)
    fid_path = os.path.join(out_dir, "fidelity.json")
    write_json(fid_path, report.to_dict())

    n_points = sum(len(l.messages) for l in legs_flat)
    n_vertices = sum(len(t.route_lat) for t in trajs_flat)
    counts = {
        "trajectories": len(trajs_flat),
        "input_points": n_points,
        "route_vertices": n_vertices,
    }
    write_manifest(out_dir, "tracks", cfg,
                   [os.path.join(clean_dir, "legs.ndjson")],
                   [traj_path, fid_path], counts)
    return counts


def load_trajectories(tracks_dir: str) -> list[trajectory.Trajectory]:
    path = _need(os.path.join(tracks_dir, "trajectories.geojson"))
    with open(path) as fh:
        doc = json.load(fh)
    return [trajectory.from_geojson_feature(f) for f in doc["features"]]


# ---------------------------------------------------------------------------
# Stage: metrics
# ---------------------------------------------------------------------------


def _load_profiles(ingest_dir: str) -> dict[int, ingest.VesselProfile]:
    path = _need(os.path.join(ingest_dir, "vessels.json"))
    with open(path) as fh:
        doc = json.load(fh)
    out = {}
    for k, v in doc.items():
        out[int(k)] = ingest.VesselProfile(
            mmsi=int(k),
            category=ingest.Category(v["category"]),
            imo=v.get("imo"),
            gross_tonnage=v.get("gt"),
            fishing=v.get("fishing", False),
        )
    return out


def run_metrics(cfg: RunConfig, out_dir: str, ingest_dir: str, clean_dir: str,
                classify_dir: str) -> dict:
    os.makedirs(out_dir, exist_ok=True)
    timelines = load_timelines(clean_dir, classify_dir)
    events = load_events(classify_dir)
    profiles = _load_profiles(ingest_dir)

    window = cfg.window
    if window is None:
        lo = min(
            min((tl.legs[0].start_ts for tl in timelines if tl.legs), default=0),
            min((sp.start_ts for tl in timelines for sp in tl.stationary_periods),
                default=0),
        )
        hi = max(
            max((tl.legs[-1].end_ts for tl in timelines if tl.legs), default=0),
            max((sp.end_ts for tl in timelines for sp in tl.stationary_periods),
                default=0),
        )
        window = (lo, hi)

    series = metrics.momentary_counts(
        timelines, window, profiles,
        edge_exclusion_days=cfg.edge_exclusion_days,
        step_s=cfg.count_step_s, gt_split=cfg.gt_split,
    )
    counts_path = os.path.join(out_dir, "counts.csv")
    with open(counts_path, "w") as fh:
        fh.write("t,total,moving,stationary\n")
        total = series.total
        for i, t in enumerate(series.minutes):
            fh.write(f"{t},{total[i]},{series.moving[i]},{series.stationary[i]}\n")

    averages = series.averages()
    ledger = metrics.transit_rates(events, window, profiles, cfg.gt_split)
    transit_path = os.path.join(out_dir, "transits.csv")
    with open(transit_path, "w") as fh:
        fh.write("hour,in_per_day,out_per_day\n")
        for h in range(24):
            fh.write(f"{h},{ledger.hourly_in[h]!r},{ledger.hourly_out[h]!r}\n")

    profile = metrics.daily_profile(series.minutes, series.total, cfg.profile_bin_s)
    prof_path = os.path.join(out_dir, "daily_profile.csv")
    with open(prof_path, "w") as fh:
        fh.write("bin_start_s,avg_total\n")
        for i, v in enumerate(profile.bins):
            fh.write(f"{i * profile.bin_s},{v!r}\n")

    aggregates = metrics.gt_aggregates(events, profiles, window, cfg.gt_split)

    components = [
        metrics.UncertaintyComponent("dark", cfg.delta_dark, metrics.UPPER),
        metrics.UncertaintyComponent("ais-b", cfg.delta_aisb, metrics.UPPER),
    ]
    uncertainty = metrics.combine_uncertainties(components)
    by_category = None
    if cfg.delta_aisb_file:
        with open(cfg.delta_aisb_file) as fh:
            per_cat = json.load(fh)
        by_category = {
            cat: metrics.combine_uncertainties([
                metrics.UncertaintyComponent("dark", cfg.delta_dark, metrics.UPPER),
                metrics.UncertaintyComponent("ais-b", float(frac), metrics.UPPER),
            ]).to_dict()
            for cat, frac in per_cat.items()
        }

    summary_path = os.path.join(out_dir, "summary.json")
    write_json(summary_path, {
        "window": list(window),
        "averages": averages,
        "transit_rate_per_day": ledger.rate_per_day,
        "in_rate_per_day": ledger.in_rate,
        "out_rate_per_day": ledger.out_rate,
        "daily_profile": {
            "resultant": profile.resultant,
            "mean_time_s": profile.mean_time_s,
            "sigma_c_hours": profile.sigma_c_hours,
            "mode_time_s": profile.mode_time_s,
        },
        "gt": aggregates.to_dict(),
        "uncertainty": uncertainty.to_dict(),
        "uncertainty_by_category": by_category,
    })

    counts = {
        "minutes": int(series.minutes.size),
        "events": len(events),
        "avg_total_x1000": int(round(averages["total"] * 1000)),
    }
    inputs = [
        os.path.join(classify_dir, "stationary.ndjson"),
        os.path.join(classify_dir, "events.ndjson"),
        os.path.join(clean_dir, "legs.ndjson"),
    ]
    write_manifest(out_dir, "metrics", cfg, inputs,
                   [counts_path, transit_path, prof_path, summary_path], counts)
    return counts


# ---------------------------------------------------------------------------
# Stage: grid / berths
# ---------------------------------------------------------------------------


def _grid_spec(cfg: RunConfig, trajectories, stationary) -> gridberth.GridSpec:
    if cfg.grid_lat_min is not None:
        return gridberth.GridSpec(
            cfg.grid_lat_min, cfg.grid_lat_max, cfg.grid_lon_min, cfg.grid_lon_max
        )
    lats = [x for t in trajectories for x in (t.route_lat.min(), t.route_lat.max())]
    lons = [x for t in trajectories for x in (t.route_lon.min(), t.route_lon.max())]
    lats += [sp.anchor_lat for sp in stationary]
    lons += [sp.anchor_lon for sp in stationary]
    if not lats:
        raise MissingArtifact("nothing to rasterize and no grid bbox configured")
    pad = 0.002
    return gridberth.GridSpec(
        min(lats) - pad, max(lats) + pad, min(lons) - pad, max(lons) + pad
    )


def run_grid(cfg: RunConfig, out_dir: str, tracks_dir: str, classify_dir: str) -> dict:
    os.makedirs(out_dir, exist_ok=True)
    trajectories = load_trajectories(tracks_dir)
    stationary = load_stationary(classify_dir)
    land = gridberth.load_shoreline(cfg.shoreline_path) if cfg.shoreline_path else None

    window = cfg.window
    if window is None:
        raise MissingArtifact("grid stage needs an explicit analysis window")
    spec = _grid_spec(cfg, trajectories, stationary)
    raster = gridberth.accumulate(
        trajectories, stationary, spec, window[1] - window[0], land,
        cfg.sample_m, cfg.drift_max_m,
    )

    dens = raster.density_per_km2()
    out_paths = []
    for name, arr in (
        ("density_vessels", raster.density_vessels()),
        ("density_per_km2", dens),
        ("mean_speed_kn", raster.mean_speed_kn()),
        ("mean_course_deg", raster.mean_course_deg()),
        ("course_resultant", raster.course_resultant()),
    ):
        p = os.path.join(out_dir, f"{name}.asc")
        gridberth.write_esri_ascii(p, spec, arr)
        out_paths.append(p)
    csv_path = os.path.join(out_dir, "density_cells.csv")
    gridberth.write_raster_csv(csv_path, spec, raster.occupancy_s)
    out_paths.append(csv_path)

    npz_path = os.path.join(out_dir, "raster.npz")
    np.savez_compressed(
        npz_path,
        occupancy_s=raster.occupancy_s,
        bbox=np.array([spec.lat_min, spec.lat_max, spec.lon_min, spec.lon_max]),
        window=np.array(window, dtype=np.int64),
    )
    out_paths.append(npz_path)

    counts = {
        "cells": spec.nrows * spec.ncols,
        "occupancy_seconds_x1000": int(round(raster.occupancy_s.sum() * 1000)),
        **{k: int(v) for k, v in raster.counters.items()},
    }
    write_manifest(out_dir, "grid", cfg,
                   [os.path.join(tracks_dir, "trajectories.geojson"),
                    os.path.join(classify_dir, "stationary.ndjson")],
                   out_paths, counts)
    return counts


def run_berths(cfg: RunConfig, out_dir: str, grid_dir: str, tracks_dir: str,
               classify_dir: str, ingest_dir: str) -> dict:
    os.makedirs(out_dir, exist_ok=True)
    npz = np.load(_need(os.path.join(grid_dir, "raster.npz")))
    bbox = npz["bbox"]
    window = npz["window"]
    spec = gridberth.GridSpec(bbox[0], bbox[1], bbox[2], bbox[3])
    window_s = float(window[1] - window[0])

    density = npz["occupancy_s"] / window_s / spec.row_area_km2[:, None]
    smoothed = gridberth.smooth(density, cfg.smooth_sigma_cells)
    areas, label_map = gridberth.detect_berths(
        smoothed, spec, cfg.seed_threshold_per_km2, cfg.support_ratio
    )

    trajectories = load_trajectories(tracks_dir)
    stationary = load_stationary(classify_dir)
    land = gridberth.load_shoreline(cfg.shoreline_path) if cfg.shoreline_path else None
    with open(_need(os.path.join(ingest_dir, "destinations.json"))) as fh:
        destinations = {
            int(k): [(t, code) for t, code in v] for k, v in json.load(fh).items()
        }
    with open(_need(os.path.join(ingest_dir, "vessels.json"))) as fh:
        vdoc = json.load(fh)
    categories = {
        int(k): (v["category"], bool(v.get("type_known"))) for k, v in vdoc.items()
    }

    areas = gridberth.label_and_rank(
        areas, label_map, spec, trajectories, stationary, window_s, land,
        destinations, categories, cfg.shore_max_m,
    )
    csv_path = os.path.join(out_dir, "berths.csv")
    gridberth.write_berth_csv(csv_path, areas)

    counts = {
        "areas": len(areas),
        "berths": sum(1 for a in areas if a.kind == gridberth.BERTH),
        "offshore": sum(1 for a in areas if a.kind == gridberth.OFFSHORE),
    }
    write_manifest(out_dir, "berths", cfg,
                   [os.path.join(grid_dir, "raster.npz")], [csv_path], counts)
    return counts


# ---------------------------------------------------------------------------
# Stage: locate-receivers
# ---------------------------------------------------------------------------


def run_locate_receivers(cfg: RunConfig, out_dir: str) -> dict:
    os.makedirs(out_dir, exist_ok=True)
    segments = georecv.load_segments(_need(cfg.segments_path))
    groups: dict[str, list] = {}
    for s in segments:
        groups.setdefault(s.receiver, []).append(s)

    report = {}
    for name in sorted(groups):
        est = georecv.estimate_receiver(
            groups[name], cfg.outlier_alpha, cfg.weight_cutoff,
            cfg.p_containment, cfg.p_confidence,
        )
        report[name or "unnamed"] = est.to_dict()

    out_path = os.path.join(out_dir, "receivers.json")
    write_json(out_path, report)
    counts = {
        "receivers": len(groups),
        "segments": len(segments),
    }
    write_manifest(out_dir, "locate-receivers", cfg, [cfg.segments_path],
                   [out_path], counts)
    return counts
