"""Acceptance suite: nine criteria, each printed as one PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` or directly with
``python tests/test_acceptance.py``.
"""

import math
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

from tsagrid.config import parse_config
from tsagrid.event_location import apply_timestamp_attack, grid_search_event, locate_event, synthesize_arrivals
from tsagrid.gps import GpsScene, SatelliteSignal, acquire, gen_ca_code, run_spoof_scenario, synthesize_baseband
from tsagrid.line_fault import (
    default_scenario,
    indicators,
    locate,
    solve_fault_network,
    sweep_tsa_fault,
)
from tsagrid.phasor import apply_tsa
from tsagrid.runner import run
from tsagrid.voltage_stability import VoltageScenario, estimate_thevenin, run_voltage_scenario, sweep_tsa_voltage

DEMOS = Path(__file__).resolve().parents[1] / "demos" / "configs"
D_GRID = [round(0.1 * k, 10) for k in range(1, 10)]


def criterion_1():
    start = time.perf_counter()
    worst = 0.0
    for model in ("short", "medium", "long"):
        for zf in (0.1, 1.0, 10.0):
            for d in D_GRID:
                s = default_scenario(model, d_true=d, zf=zf)
                sol = solve_fault_network(s)
                k = int(np.flatnonzero(sol.faulted)[0])
                worst = max(worst, locate(sol.measurements.take((k, 0)), s.line, model, d).error)
    elapsed = time.perf_counter() - start
    return worst < 1e-5 and elapsed < 5.0, f"max |D_e - D| = {worst:.2e}, runtime {elapsed:.2f} s"


def criterion_2():
    errs = {}
    for d in (0.5, 0.75):
        errs[d] = sweep_tsa_fault(default_scenario("long", d_true=d), [0, 5, 10, 20, 30]).errors
    in_band = all(0.1 <= e[-1] <= 0.3 for e in errs.values())
    monotone = all(np.all(np.diff(e) > 0) for e in errs.values())
    return in_band and monotone, (
        f"error at 30 deg: D=0.5 -> {errs[0.5][-1]:.3f}, D=0.75 -> {errs[0.75][-1]:.3f}; monotone={monotone}"
    )


def criterion_3():
    errs = {d: sweep_tsa_fault(default_scenario("medium", d_true=d), [30.0]).errors[0] for d in (0.5, 0.75)}
    in_band = all(0.15 <= e <= 0.45 for e in errs.values())
    noisy = default_scenario("medium", noise_sigma=1e-3, seed=2)
    res = sweep_tsa_fault(noisy, [0.0, 25.0], calibrate_at_zero=True)
    t0, t25 = res.detections
    clean_ok = t0 is not None and abs(t0 - noisy.t_fault) <= 1 / noisy.frame_rate + 1e-12
    false_alarm = t25 is not None and t25 < noisy.t_fault
    return in_band and clean_ok and false_alarm, (
        f"error at 30 deg: D=0.5 -> {errs[0.5]:.3f}, D=0.75 -> {errs[0.75]:.3f}; "
        f"detection at 0 deg {t0}, at 25 deg {t25}"
    )


def criterion_4():
    s = default_scenario("short")
    sol = solve_fault_network(s)
    k = int(np.flatnonzero(sol.faulted)[0])
    gaps = []
    for dth in (0.0, 5.0, 25.0):
        m = apply_tsa(sol.measurements, "receiving", dth)
        pre = indicators(m.take((0, 0)), s.line, "short")[0]
        post = indicators(m.take((k, 0)), s.line, "short")[0]
        gaps.append(post - pre)
    return gaps[0] > gaps[1] > gaps[2], "gap(A) at 0/5/25 deg = " + " / ".join(f"{g:.0f}" for g in gaps)


def criterion_5():
    errs = {ft: sweep_tsa_fault(default_scenario("long", fault_type=ft), [20.0]).errors[0] for ft in ("A", "AB", "ABC")}
    ok = errs["A"] >= errs["ABC"] and errs["AB"] >= errs["ABC"]
    return ok, ", ".join(f"{k}: {v:.3f}" for k, v in errs.items())


def criterion_6():
    dths = [5, 15, 25, -5, -15, -25, 20, -20]
    sw = sweep_tsa_voltage(VoltageScenario(), dths)
    mz_dev = 0.0
    ok_mask = np.isfinite(sw.clean.margin_z)
    for tr in sw.traces:
        mz_dev = max(mz_dev, float(np.max(np.abs(tr.margin_z[ok_mask] - sw.clean.margin_z[ok_mask]))))
    m = dict(zip(dths, sw.metrics))
    increasing = m[5] < m[15] < m[25] and m[-5] < m[-15] < m[-25]
    asym = m[20] > m[-20]
    # noiseless recovery on synthetic windows and on the scenario itself
    rng = np.random.default_rng(0)
    e, z = 1.02 + 0.05j, 0.01 + 0.12j
    i = 0.5 * np.exp(-0.5j) * (1 + 0.2 * rng.standard_normal(20))
    est = estimate_thevenin(e - z * i, i)
    rec = max(abs(est.z_th - z) / abs(z), abs(est.e_th - e) / abs(e))
    vs = VoltageScenario()
    f = run_voltage_scenario(vs)
    sl = (f.t >= 0.5) & (f.t < 1.5)
    z_true = vs.lines[0].z_total / 3
    rec = max(rec, abs(estimate_thevenin(f.vr[sl], f.ir[sl], reference=f.vs[sl]).z_th - z_true) / abs(z_true))
    ok = mz_dev <= 1e-9 and increasing and asym and rec < 1e-9
    return ok, (
        f"MARGIN_Z deviation {mz_dev:.1e}; metric +5/+15/+25 = {m[5]:.3f}/{m[15]:.3f}/{m[25]:.3f}, "
        f"-5/-15/-25 = {m[-5]:.3f}/{m[-15]:.3f}/{m[-25]:.3f}; +20 {m[20]:.3f} vs -20 {m[-20]:.3f}; "
        f"Thevenin recovery {rec:.1e}"
    )


EVENT_MMRS = [(0.0, 0.0), (400.0, 0.0), (0.0, 400.0), (400.0, 400.0)]
EVENT_TRUE = (120.0, 160.0, 0.0)


def criterion_7():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(100):
        mmrs = rng.uniform(-300, 300, size=(int(rng.integers(4, 8)), 2))
        ev = (*rng.uniform(-250, 250, 2), rng.uniform(-1, 1))
        sol = locate_event(synthesize_arrivals(ev, mmrs))
        worst = max(worst, math.hypot(sol.x_e - ev[0], sol.y_e - ev[1]))
    recs = synthesize_arrivals(EVENT_TRUE, EVENT_MMRS)
    nearest = min(math.hypot(x - EVENT_TRUE[0], y - EVENT_TRUE[1]) for x, y in EVENT_MMRS)
    attacked = apply_timestamp_attack(recs, "MMR4", 0.2)
    sol = locate_event(attacked)
    gx, gy, _, _, cell = grid_search_event(attacked, 500.0, n=2001)
    disp = math.hypot(sol.x_e - EVENT_TRUE[0], sol.y_e - EVENT_TRUE[1])
    within = abs(sol.x_e - gx) <= cell[0] and abs(sol.y_e - gy) <= cell[1]
    ok = worst < 1e-6 and disp > 50.0 and within and abs(nearest - 200.0) < 1e-9
    return ok, (
        f"worst clean recovery {worst:.1e} mi; attacked displacement {disp:.1f} mi; "
        f"solver ({sol.x_e:.2f}, {sol.y_e:.2f}) vs oracle ({gx:.2f}, {gy:.2f}), cell {cell[0]:.2f} mi"
    )


def criterion_8():
    start = time.perf_counter()
    captured = 0
    total = 0
    for ratio in (2.0, 4.0):
        for k in range(50):
            rng = np.random.default_rng(1000 + k)
            a_ph, s_ph = (float(v) for v in rng.uniform(0, 1023, 2))
            dop = float(rng.choice(np.arange(-10e3, 10e3 + 1, 500.0)))
            auth = GpsScene((SatelliteSignal(1, 1.0, a_ph, dop),), noise_sigma=0.5)
            spoof = GpsScene((SatelliteSignal(1, ratio, s_ph, dop),))
            captured += run_spoof_scenario(auth, spoof, jam_sigma=3.0, seed=1000 + k).captured
            total += 1
    worst_phase = 0.0
    rng = np.random.default_rng(8)
    for _ in range(20):
        ph, prn = float(rng.uniform(0, 1023)), int(rng.integers(1, 33))
        r = acquire(synthesize_baseband(GpsScene((SatelliteSignal(prn, 1.0, ph),))), prn, keep_grid=False)
        worst_phase = max(worst_phase, abs((r.code_phase_est - ph + 511.5) % 1023 - 511.5))
    a, b = gen_ca_code(1), gen_ca_code(2)
    bound = max(abs(int(np.dot(a, np.roll(b, k)))) for k in range(1023))
    elapsed = time.perf_counter() - start
    ok = captured == total and worst_phase <= 0.5 and bound == 65 and elapsed < 30.0
    return ok, (
        f"captured {captured}/{total} at ratio >= 2; noiseless phase error {worst_phase:.3f} chip; "
        f"cross-correlation bound {bound}; runtime {elapsed:.1f} s"
    )


def criterion_9():
    names = ["fault_long", "fault_medium_noisy", "voltage", "event", "gps"]
    mismatched = []
    with tempfile.TemporaryDirectory() as tmp:
        for name in names:
            cfg = parse_config((DEMOS / f"{name}.toml").read_text())
            a = run(cfg, Path(tmp) / name / "a")
            b = run(cfg, Path(tmp) / name / "b")
            for fname, path in a.files.items():
                if path.read_bytes() != b.files[fname].read_bytes():
                    mismatched.append(f"{name}/{fname}")
    return not mismatched, f"{len(names)} demo configs run twice; mismatched files: {mismatched or 'none'}"


CRITERIA = {
    1: ("zero-attack exactness", criterion_1),
    2: ("long-line attack damage", criterion_2),
    3: ("medium-line attack damage and false alarm", criterion_3),
    4: ("short-line indicator gap ordering", criterion_4),
    5: ("fault-type ordering", criterion_5),
    6: ("voltage margins", criterion_6),
    7: ("event mislocation", criterion_7),
    8: ("GPS capture", criterion_8),
    9: ("determinism", criterion_9),
}

_RESULTS: dict[int, str] = {}


def _evaluate(n):
    name, fn = CRITERIA[n]
    ok, detail = fn()
    _RESULTS[n] = f"criterion {n} ({name}): {'PASS' if ok else 'FAIL'} | {detail}"
    return ok, _RESULTS[n]


@pytest.fixture(scope="module", autouse=True)
def _summary(request):
    yield
    reporter = request.config.pluginmanager.get_plugin("terminalreporter")
    if reporter is not None and _RESULTS:
        reporter.write_line("")
        for n in sorted(_RESULTS):
            reporter.write_line(_RESULTS[n])


@pytest.mark.parametrize("n", sorted(CRITERIA))
def test_criterion(n):
    ok, line = _evaluate(n)
    print(line)
    assert ok, line


if __name__ == "__main__":
    for n in sorted(CRITERIA):
        print(_evaluate(n)[1])
