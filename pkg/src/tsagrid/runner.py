"""Execute a validated scenario config and write CSV tables plus a manifest.

Sweep points run on a small thread pool; rows are buffered per point and
written in sweep order, and floats are written with ``repr`` so that the
same config and seed always yield the same bytes.
"""

from __future__ import annotations

import cmath
import csv
import hashlib
import io
import json
import math
import os
import platform
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import ScenarioConfig
from .event_location import apply_timestamp_attack, locate_event, synthesize_arrivals, MmrRecord
from .gps import GpsScene, SatelliteSignal, default_doppler_bins, run_spoof_scenario, spoof_phase_to_timing_error
from .line_fault import (
    DEFAULT_FAULT_IMPEDANCE,
    DEFAULT_LENGTHS,
    DEFAULT_Y1,
    DEFAULT_Z1,
    FaultScenario,
    sweep_tsa_fault,
)
from .phasor import derive_line_constants, time_offset_to_phase
from .voltage_stability import VoltageScenario, margin_error_metric, margin_traces, run_voltage_scenario

__all__ = ["RunResult", "run", "MAX_WORKERS"]

MAX_WORKERS = 4

FAULT_COLUMNS = ["t", "model", "fault_type", "D_true", "dtheta_deg", "indicator1", "indicator2", "D_est", "error", "clamped_flag"]
FAULT_SUMMARY_COLUMNS = ["dtheta_deg", "D_true", "D_est", "error", "clamped_flag", "detected_at", "false_alarm"]
VOLTAGE_COLUMNS = [
    "t", "V_mag", "V_angle_deg", "I_mag", "I_angle_deg", "e_th_mag", "z_th_mag",
    "k_crit", "margin_z", "margin_p", "dtheta_deg", "stale_flag", "collapse_flag",
]
VOLTAGE_SUMMARY_COLUMNS = ["dtheta_deg", "margin_error"]
EVENT_COLUMNS = ["x_e", "y_e", "t_e", "residual", "iterations", "converged", "victim_id", "delta", "displacement"]
GPS_COLUMNS = [
    "power_ratio", "trial", "code_phase_before", "code_phase_after", "code_shift_chips",
    "timing_error_s", "dtheta_deg", "captured", "ambiguous", "authentic_peak", "spoof_peak", "peak_to_floor",
]
GPS_SUMMARY_COLUMNS = ["power_ratio", "trials", "capture_fraction", "ambiguous_fraction"]
GRID_COLUMNS = ["code_phase", "doppler", "magnitude"]


@dataclass
class RunResult:
    out_dir: Path
    files: dict[str, Path] = field(default_factory=dict)
    manifest: dict = field(default_factory=dict)


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return "nan" if math.isnan(v) else repr(v)
    if v is None:
        return ""
    return str(v)


def _csv_bytes(columns, rows) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in columns])
    return buf.getvalue().encode("utf-8")


def _map_ordered(fn, items, workers=MAX_WORKERS):
    """``[fn(x) for x in items]`` on a bounded pool, results in input order."""
    items = list(items)
    if len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))


# --- fault -------------------------------------------------------------------


def _fault_scenario(p: dict, seed: int) -> FaultScenario:
    model = p["model"]
    line = derive_line_constants(
        DEFAULT_Z1 if p["z1"] is None else p["z1"],
        DEFAULT_Y1 if p["y1"] is None else p["y1"],
        DEFAULT_LENGTHS[model] if p["length"] is None else p["length"],
        long_line=model == "long",
    )
    zf = None if p["no_fault"] else (DEFAULT_FAULT_IMPEDANCE[model] if p["zf"] is None else p["zf"])
    return FaultScenario(
        line=line, model=model, d_true=p["d_true"], zf=zf,
        es=cmath.rect(p["es_magnitude"], math.radians(p["es_angle_deg"])),
        er=cmath.rect(p["er_magnitude"], math.radians(p["er_angle_deg"])),
        zs_s=p["zs_s"], zs_r=p["zs_r"], fault_type=p["fault_type"], z_ground=p["z_ground"],
        t_fault=p["t_fault"], t_end=p["duration"], frame_rate=p["frame_rate"],
        noise_sigma=p["noise_sigma"], seed=seed,
    )


def _run_fault(cfg: ScenarioConfig):
    s = _fault_scenario(cfg.params, cfg.seed)
    ratio = cfg.params["threshold_ratio"]
    results = _map_ordered(lambda d: sweep_tsa_fault(s, [d], ratio), cfg.sweep)
    rows, summary = [], []
    for dth, res in zip(cfg.sweep, results):
        rows.extend(res.rows)
        est, det = res.summary[0], res.detections[0]
        summary.append({
            "dtheta_deg": dth, "D_true": s.d_true, "D_est": est.d_est, "error": est.error,
            "clamped_flag": est.clamped, "detected_at": det,
            "false_alarm": det is not None and det < s.t_fault,
        })
    return {
        "fault_frames.csv": (FAULT_COLUMNS, rows),
        "fault_summary.csv": (FAULT_SUMMARY_COLUMNS, summary),
    }


# --- voltage -----------------------------------------------------------------


def _run_voltage(cfg: ScenarioConfig):
    p = cfg.params
    line = derive_line_constants(p["line_impedance"], 0, 1.0, long_line=False)
    vs = VoltageScenario(
        e0=p["e0"], modulation=p["modulation"], modulation_freq=p["modulation_freq"],
        z_source=p["z_source"], lines=(line, line, line), p_load=p["p_load"],
        power_factor=p["power_factor"],
        fault_start=None if p["no_fault"] else p["fault_start"],
        fault_end=None if p["no_fault"] else p["fault_end"],
        fault_impedance=p["fault_impedance"], trip_times=tuple(p["trip_times"]),
        frame_rate=p["frame_rate"], duration=p["duration"], noise_sigma=p["noise_sigma"],
    )
    frames = run_voltage_scenario(vs, cfg.seed)
    window = p["window"]
    clean = margin_traces(frames, 0.0, window)
    traces = _map_ordered(lambda d: margin_traces(frames, d, window), cfg.sweep)
    rows, summary = [], []
    for dth, tr in zip(cfg.sweep, traces):
        rot = cmath.exp(1j * math.radians(dth))
        for k, tk in enumerate(frames.t):
            v, i = frames.vr[k] * rot, frames.ir[k] * rot
            rows.append({
                "t": tk, "V_mag": abs(v), "V_angle_deg": math.degrees(cmath.phase(v)),
                "I_mag": abs(i), "I_angle_deg": math.degrees(cmath.phase(i)),
                "e_th_mag": abs(tr.e_th[k]), "z_th_mag": abs(tr.z_th[k]),
                "k_crit": tr.k_crit[k], "margin_z": tr.margin_z[k], "margin_p": tr.margin_p[k],
                "dtheta_deg": dth, "stale_flag": tr.stale[k], "collapse_flag": frames.collapsed[k],
            })
        summary.append({"dtheta_deg": dth, "margin_error": margin_error_metric(clean, tr)})
    return {
        "voltage_frames.csv": (VOLTAGE_COLUMNS, rows),
        "voltage_summary.csv": (VOLTAGE_SUMMARY_COLUMNS, summary),
    }


# --- event -------------------------------------------------------------------


def _run_event(cfg: ScenarioConfig):
    p = cfg.params
    ids = [m["id"] for m in p["mmrs"]]
    if p["event"] is not None:
        records = synthesize_arrivals(
            p["event"], [(m["x"], m["y"]) for m in p["mmrs"]], p["v_e"], p["noise_sigma"], cfg.seed, ids
        )
        reference = np.array(p["event"][:2])
    else:
        records = [MmrRecord(m["id"], m["x"], m["y"], m["t"]) for m in p["mmrs"]]
        reference = None
    victim = p["victim_id"] or ids[0]
    if reference is None:
        reference = locate_event(records, p["v_e"]).position

    def one(delta):
        attacked = apply_timestamp_attack(records, victim, delta) if delta else records
        return locate_event(attacked, p["v_e"])

    rows = []
    for delta, sol in zip(cfg.sweep, _map_ordered(one, cfg.sweep)):
        rows.append({
            "x_e": sol.x_e, "y_e": sol.y_e, "t_e": sol.t_e, "residual": sol.residual_norm,
            "iterations": sol.iterations, "converged": sol.converged, "victim_id": victim,
            "delta": delta, "displacement": float(np.hypot(*(sol.position - reference))),
        })
    return {"event_solutions.csv": (EVENT_COLUMNS, rows)}


# --- gps ---------------------------------------------------------------------


def _run_gps(cfg: ScenarioConfig):
    p = cfg.params
    prn = p["prn"]
    auth, spf = p["authentic"], p["spoof"]
    authentic = GpsScene(
        (SatelliteSignal(prn, auth["power"], auth["code_phase"], auth["doppler"]),),
        noise_sigma=p["noise_sigma"], sample_rate=p["sample_rate"], duration_ms=p["duration_ms"],
    )
    bins = default_doppler_bins(p["doppler_span"], p["doppler_step"])
    # independent seed per (ratio, trial) so the pool order cannot matter
    seeds = np.random.SeedSequence(cfg.seed).generate_state(len(cfg.sweep) * p["trials"]).reshape(len(cfg.sweep), -1)
    jobs = [(k, ratio, j) for k, ratio in enumerate(cfg.sweep) for j in range(p["trials"])]

    def one(job):
        k, ratio, j = job
        spoof = GpsScene((SatelliteSignal(prn, ratio * auth["power"], spf["code_phase"], spf["doppler"]),))
        return run_spoof_scenario(authentic, spoof, p["jam_sigma"], prn, bins, int(seeds[k, j]))

    outcomes = _map_ordered(one, jobs)
    rows, summary = [], []
    for (k, ratio, j), o in zip(jobs, outcomes):
        dt = spoof_phase_to_timing_error(o.code_shift_chips)
        rows.append({
            "power_ratio": ratio, "trial": j,
            "code_phase_before": o.before.code_phase_est, "code_phase_after": o.after.code_phase_est,
            "code_shift_chips": o.code_shift_chips, "timing_error_s": dt,
            "dtheta_deg": time_offset_to_phase(dt, p["f0"]),
            "captured": o.captured, "ambiguous": o.ambiguous,
            "authentic_peak": o.authentic_peak, "spoof_peak": o.spoof_peak,
            "peak_to_floor": o.after.peak_to_floor,
        })
    for k, ratio in enumerate(cfg.sweep):
        mine = [o for (kk, _, _), o in zip(jobs, outcomes) if kk == k]
        summary.append({
            "power_ratio": ratio, "trials": len(mine),
            "capture_fraction": sum(o.captured for o in mine) / len(mine),
            "ambiguous_fraction": sum(o.ambiguous for o in mine) / len(mine),
        })
    tables = {
        "gps_trials.csv": (GPS_COLUMNS, rows),
        "gps_summary.csv": (GPS_SUMMARY_COLUMNS, summary),
    }
    if p["dump_grid"]:
        # post-attack search grid of the first trial at the last sweep point
        o = outcomes[(len(cfg.sweep) - 1) * p["trials"]].after
        lags = np.arange(o.grid.shape[0]) / o.samples_per_chip
        grid_rows = [
            {"code_phase": lags[i], "doppler": o.doppler_bins[b], "magnitude": o.grid[i, b]}
            for i in range(o.grid.shape[0])
            for b in range(o.grid.shape[1])
        ]
        tables["gps_grid.csv"] = (GRID_COLUMNS, grid_rows)
    return tables


_DISPATCH = {"fault": _run_fault, "voltage": _run_voltage, "event": _run_event, "gps": _run_gps}


def run(cfg: ScenarioConfig, out_dir=None) -> RunResult:
    """Run ``cfg`` and write its tables and ``manifest.json`` into ``out_dir``.

    ``out_dir`` defaults to the config's ``output_dir``, then to the
    ``TSA_GRID_SIM_OUT`` environment variable, then to ``./out``.
    Exceptions from the simulation propagate to the caller.
    """
    out = Path(out_dir or cfg.output_dir or os.environ.get("TSA_GRID_SIM_OUT", "out"))
    start = time.perf_counter()
    tables = _DISPATCH[cfg.kind](cfg)
    wall = time.perf_counter() - start
    out.mkdir(parents=True, exist_ok=True)
    res = RunResult(out)
    digests = {}
    for name, (cols, rows) in tables.items():
        data = _csv_bytes(cols, rows)
        path = out / name
        path.write_bytes(data)
        res.files[name] = path
        digests[name] = {"sha256": hashlib.sha256(data).hexdigest(), "rows": len(rows)}
    res.manifest = {
        "tool": "tsa-grid-sim",
        "version": __version__,
        "kind": cfg.kind,
        "seed": cfg.seed,
        "sweep": cfg.sweep,
        "config_text": cfg.source,
        "parameters": _jsonable(cfg.params),
        "outputs": digests,
        "wall_time_s": wall,
        "python": platform.python_version(),
        "numpy": np.__version__,
    }
    (out / "manifest.json").write_text(json.dumps(res.manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return res


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, complex):
        return [v.real, v.imag]
    return v
