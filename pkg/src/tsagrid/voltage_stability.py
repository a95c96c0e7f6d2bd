"""Thevenin-equivalent voltage stability monitoring under time-stamp attacks.

All quantities are per unit. The test system is an EMF with 1 Hz RMS
modulation feeding a constant-power load bus over three parallel lines. One
PMU sits on the source (sending) bus, one on the load (receiving) bus.

The Thevenin impedance is estimated from the load-bus PMU alone, so a clock
error on that PMU (a common rotation of its phasors) cannot change it. The
power delivered to the load is formed from the load-bus voltage and the feeder
current reported by the sending PMU, which requires the two PMUs to be time
aligned; this is where the attack enters the power margin.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .network import PhasorNetwork
from .phasor import LineParameters, derive_line_constants

__all__ = [
    "ThevEstimate",
    "MarginIndices",
    "VoltageScenario",
    "VoltageFrames",
    "SingularWindowError",
    "run_voltage_scenario",
    "estimate_thevenin",
    "margin_z",
    "margin_p",
    "max_loadability",
    "margin_error_metric",
    "margin_traces",
    "sweep_tsa_voltage",
]


class SingularWindowError(ValueError):
    """The estimation window carries no usable load variation."""


@dataclass(frozen=True)
class ThevEstimate:
    """Thevenin source and impedance seen from the load bus.

    ``e_th`` refers to the last frame of the window. ``condition`` is the
    2-norm condition number of the column-normalized regression matrix.
    """

    e_th: complex
    z_th: complex
    condition: float
    window: int
    residual: float = 0.0

    @property
    def nonphysical(self) -> bool:
        return self.z_th.real < 0


@dataclass(frozen=True)
class MarginIndices:
    k_crit: float
    margin_z: float
    z_l: complex
    margin_p: float = math.nan
    p_lmax: float = math.nan
    p_l: float = math.nan
    clamped: bool = False


def estimate_thevenin(v, i, reference=None, cond_limit: float = 1e6) -> ThevEstimate:
    """Least-squares Thevenin fit over a window of load-bus phasors.

    Without ``reference`` the model is ``V_k = E - Z I_k`` with constant
    ``E``. With a ``reference`` phasor series (the sending-bus voltage) the
    source is allowed to track it, ``V_k = a * ref_k - Z I_k``, which absorbs
    slow EMF modulation; ``e_th`` is then ``a * ref`` at the last frame.

    Raises
    ------
    SingularWindowError
        If the window is shorter than 4 frames or the normalized regression
        is worse conditioned than ``cond_limit``.
    """
    v = np.asarray(v, dtype=complex)
    i = np.asarray(i, dtype=complex)
    if v.shape != i.shape or v.ndim != 1:
        raise ValueError("v and i must be 1-D sequences of equal length")
    if v.size < 4:
        raise SingularWindowError(f"window of {v.size} frames is too short (need >= 4)")
    first = np.ones_like(v) if reference is None else np.asarray(reference, dtype=complex)
    A = np.column_stack([first, -i])
    norms = np.linalg.norm(A, axis=0)
    if np.any(norms == 0) or not np.all(np.isfinite(A)):
        raise SingularWindowError("degenerate window")
    cond = np.linalg.cond(A / norms)
    if not np.isfinite(cond) or cond > cond_limit:
        raise SingularWindowError(f"window lacks load variation (condition number {cond:.3g})")
    x, *_ = np.linalg.lstsq(A, v, rcond=None)
    res = float(np.linalg.norm(A @ x - v) / max(np.linalg.norm(v), 1e-300))
    e_last = x[0] * first[-1]
    return ThevEstimate(complex(e_last), complex(x[1]), float(cond), int(v.size), res)


def margin_z(z_th: complex, z_l: complex) -> MarginIndices:
    """Impedance-ratio margin ``100 * (1 - |Z_th / Z_L|)`` in percent."""
    if abs(z_l) == 0:
        raise ValueError("load impedance must be non-zero")
    k = abs(z_th / z_l)
    return MarginIndices(k, 100.0 * (1.0 - k), complex(z_l))


def max_loadability(e_th: complex, z_th: complex, phi: float) -> float:
    """Largest active power a constant power factor load can draw.

    ``phi`` is the load power-factor angle in radians (positive lagging).
    """
    zmag = abs(z_th)
    denom = 2 * zmag * (1 + math.cos(cmath.phase(z_th) - phi))
    if denom <= 0:
        # load angle opposite the source impedance: no finite limit
        return math.inf
    return abs(e_th) ** 2 * math.cos(phi) / denom


def margin_p(est: ThevEstimate, z_l: complex, p_l: float) -> MarginIndices:
    """Active power margin ``p_Lmax - P_L``, or 0 once ``|Z_L| <= |Z_th|``.

    A negative difference (possible with noisy estimates) is clamped to 0
    and flagged.
    """
    base = margin_z(est.z_th, z_l)
    phi = cmath.phase(z_l)
    p_max = max_loadability(est.e_th, est.z_th, phi)
    if abs(z_l) <= abs(est.z_th):
        return MarginIndices(base.k_crit, base.margin_z, base.z_l, 0.0, p_max, p_l, False)
    m = p_max - p_l
    clamped = m < 0
    return MarginIndices(base.k_crit, base.margin_z, base.z_l, max(m, 0.0), p_max, p_l, clamped)


# ---------------------------------------------------------------------------
# quasi-static scenario


@dataclass(frozen=True)
class VoltageScenario:
    """Source modulation, load, three parallel lines and switching events.

    Lines 1 and 2 trip at ``trip_times`` (either may be omitted); line 1
    carries a shunt fault at its midpoint during ``[fault_start, fault_end)``
    unless both are None.
    """

    e0: float = 1.05
    modulation: float = 0.03
    modulation_freq: float = 1.0
    z_source: complex = 0.005 + 0.05j
    lines: tuple[LineParameters, ...] = field(
        default_factory=lambda: tuple(derive_line_constants(0.02 + 0.30j, 0, 1.0, long_line=False) for _ in range(3))
    )
    p_load: float = 0.6
    power_factor: float = 0.85
    fault_start: float | None = 2.0
    fault_end: float | None = 2.5
    fault_impedance: complex = 0.05
    trip_times: tuple[float, ...] = (4.0, 6.0)
    frame_rate: float = 30.0
    duration: float = 10.0
    noise_sigma: float = 0.0

    def __post_init__(self):
        if (self.fault_start is None) != (self.fault_end is None):
            raise ValueError("fault_start and fault_end must both be given or both be None")
        if len(self.trip_times) > 2:
            raise ValueError("at most two lines can be tripped")
        events = [*([] if self.fault_start is None else [self.fault_start, self.fault_end]), *self.trip_times]
        bad_order = any(b <= a for a, b in zip(events, events[1:]))
        if events and (bad_order or events[0] < 0 or events[-1] >= self.duration):
            raise ValueError("event times must be strictly increasing within the run")
        if len(self.lines) != 3:
            raise ValueError("the test system has exactly three parallel lines")
        if not 0 < self.power_factor <= 1:
            raise ValueError("power factor must lie in (0, 1]")

    @property
    def s_load(self) -> complex:
        phi = math.acos(self.power_factor)
        return self.p_load * (1 + 1j * math.tan(phi))

    @property
    def times(self) -> np.ndarray:
        return np.arange(int(round(self.duration * self.frame_rate))) / self.frame_rate

    def topology(self, t: float) -> tuple[tuple[bool, bool, bool], bool]:
        """Which lines are in service, and whether line 1 is faulted."""
        trips = list(self.trip_times) + [math.inf] * (2 - len(self.trip_times))
        in_service = (t < trips[0], t < trips[1], True)
        faulted = self.fault_start is not None and self.fault_start <= t < self.fault_end
        return in_service, faulted


@dataclass
class VoltageFrames:
    """Per-frame PMU phasors; ``is_`` leaves the source bus, ``ir`` enters the load."""

    t: np.ndarray
    vs: np.ndarray
    is_: np.ndarray
    vr: np.ndarray
    ir: np.ndarray
    collapsed: np.ndarray
    iterations: np.ndarray


def _linear_maps(vs: VoltageScenario, in_service, faulted):
    """Responses of (V_S, I_S, V_R) to unit EMF and to unit load current."""

    def solve(emf, draw):
        net = PhasorNetwork()
        net.add_source("S", emf, vs.z_source)
        for k, (line, on) in enumerate(zip(vs.lines, in_service)):
            if not on:
                continue
            z = line.z_total
            if k == 0 and faulted:
                net.add_impedance("S", "M", z / 2)
                net.add_impedance("M", "R", z / 2)
                net.add_impedance("M", None, vs.fault_impedance)
            else:
                net.add_impedance("S", "R", z)
        net.add_injection("R", -draw)
        v = net.solve()
        i_s = 0j
        for k, (line, on) in enumerate(zip(vs.lines, in_service)):
            if not on:
                continue
            far = "M" if (k == 0 and faulted) else "R"
            zseg = line.z_total / 2 if (k == 0 and faulted) else line.z_total
            i_s += (v["S"] - v[far]) / zseg
        return np.array([v["S"], i_s, v["R"]])

    return solve(1.0, 0.0), solve(0.0, 1.0)


def run_voltage_scenario(vs: VoltageScenario, seed: int = 0, max_iter: int = 100) -> VoltageFrames:
    """Quasi-static solve of every frame with a constant-power load.

    The load-bus voltage is found by fixed-point iteration on
    ``V = E_eq - Z_eq * conj(S_L / V)`` until the delivered power matches
    ``S_L`` to 1e-9 relative. Frames that fail to converge within
    ``max_iter`` iterations (voltage collapse) are flagged and hold NaN.
    """
    t = vs.times
    n = t.size
    out = {k: np.full(n, np.nan + 0j) for k in ("vs", "is_", "vr", "ir")}
    collapsed = np.zeros(n, dtype=bool)
    iters = np.zeros(n, dtype=int)
    cache = {}
    s_l = vs.s_load
    for k, tk in enumerate(t):
        key = vs.topology(tk)
        if key not in cache:
            cache[key] = _linear_maps(vs, *key)
        unit_e, unit_i = cache[key]
        emf = vs.e0 * (1 + vs.modulation * math.sin(2 * math.pi * vs.modulation_freq * tk))
        e_eq, z_eq = emf * unit_e[2], -unit_i[2]
        v = e_eq
        ok = False
        for it in range(1, max_iter + 1):
            if v == 0:
                break
            v = e_eq - z_eq * (s_l / v).conjugate()
            i = (e_eq - v) / z_eq
            if abs(v * i.conjugate() - s_l) < 1e-9 * abs(s_l):
                ok = True
                break
        iters[k] = it
        if not ok or not np.isfinite(v):
            collapsed[k] = True
            continue
        i = (e_eq - v) / z_eq
        resp = emf * unit_e + i * unit_i
        out["vs"][k], out["is_"][k], out["vr"][k], out["ir"][k] = resp[0], resp[1], v, i
    if vs.noise_sigma > 0:
        rng = np.random.default_rng(seed)
        for key in out:
            e = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            out[key] = out[key] * (1 + vs.noise_sigma / math.sqrt(2) * e)
    return VoltageFrames(t, out["vs"], out["is_"], out["vr"], out["ir"], collapsed, iters)


@dataclass
class MarginTrace:
    t: np.ndarray
    e_th: np.ndarray
    z_th: np.ndarray
    k_crit: np.ndarray
    margin_z: np.ndarray
    margin_p: np.ndarray
    stale: np.ndarray


def margin_traces(frames: VoltageFrames, dtheta_r: float = 0.0, window: int = 20, cond_limit: float = 1e6) -> MarginTrace:
    """Sliding-window Thevenin estimate and both margins for every frame.

    ``dtheta_r`` (degrees) rotates the load-bus PMU phasors. Windows that are
    ill conditioned or touch a collapsed frame reuse the last valid estimate
    and are marked stale; frames before the first valid window are NaN.
    """
    rot = cmath.exp(1j * math.radians(dtheta_r))
    vr, ir = frames.vr * rot, frames.ir * rot
    n = frames.t.size
    cols = {k: np.full(n, np.nan) for k in ("k_crit", "margin_z", "margin_p")}
    e_th = np.full(n, np.nan + 0j)
    z_th = np.full(n, np.nan + 0j)
    stale = np.zeros(n, dtype=bool)
    last = None
    for k in range(n):
        est = None
        if k + 1 >= window:
            sl = slice(k + 1 - window, k + 1)
            if not frames.collapsed[sl].any():
                try:
                    est = estimate_thevenin(vr[sl], ir[sl], reference=frames.vs[sl], cond_limit=cond_limit)
                except SingularWindowError:
                    est = None
        if est is None:
            stale[k] = True
            est = last
        else:
            last = est
        if est is None or frames.collapsed[k]:
            continue
        z_l = vr[k] / ir[k]
        p_l = (vr[k] * frames.is_[k].conjugate()).real
        mi = margin_p(est, z_l, p_l)
        e_th[k], z_th[k] = est.e_th, est.z_th
        cols["k_crit"][k], cols["margin_z"][k], cols["margin_p"][k] = mi.k_crit, mi.margin_z, mi.margin_p
    return MarginTrace(frames.t, e_th, z_th, cols["k_crit"], cols["margin_z"], cols["margin_p"], stale)


def margin_error_metric(clean, attacked) -> float:
    """Mean absolute difference between two MARGIN_P traces.

    Accepts :class:`MarginTrace` objects or plain arrays; frames that are NaN
    in either trace are skipped.
    """
    a = np.asarray(getattr(clean, "margin_p", clean), dtype=float)
    b = np.asarray(getattr(attacked, "margin_p", attacked), dtype=float)
    if a.shape != b.shape:
        raise ValueError("traces must have equal length")
    ok = np.isfinite(a) & np.isfinite(b)
    if not ok.any():
        return math.nan
    return float(np.mean(np.abs(b[ok] - a[ok])))


@dataclass
class VoltageSweep:
    dthetas: list[float]
    clean: MarginTrace
    traces: list[MarginTrace]
    metrics: list[float]
    frames: VoltageFrames


def sweep_tsa_voltage(vs: VoltageScenario, dthetas, seed: int = 0, window: int = 20) -> VoltageSweep:
    """Margin traces and error metric for each receiving-PMU phase error."""
    frames = run_voltage_scenario(vs, seed)
    clean = margin_traces(frames, 0.0, window)
    traces, metrics = [], []
    for d in dthetas:
        tr = clean if d == 0 else margin_traces(frames, d, window)
        traces.append(tr)
        metrics.append(margin_error_metric(clean, tr))
    return VoltageSweep(list(dthetas), clean, traces, metrics, frames)
