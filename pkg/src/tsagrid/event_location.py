"""Locating a grid disturbance from wavefront arrival times.

Each monitoring recorder ``i`` at ``(x_i, y_i)`` contributes the residual

    (x_i - x_e)^2 + (y_i - y_e)^2 - v_e^2 (t_i - t_e)^2

and the event ``(x_e, y_e, t_e)`` minimizes their sum of squares. Distances
are in miles and times in seconds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "MmrRecord",
    "EventSolution",
    "synthesize_arrivals",
    "locate_event",
    "residuals",
    "jacobian",
    "apply_timestamp_attack",
    "grid_search_event",
]

DEFAULT_SPEED = 500.0  # miles per second


@dataclass(frozen=True)
class MmrRecord:
    id: str
    x: float
    y: float
    t_arrival: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.x, self.y, self.t_arrival)):
            raise ValueError(f"record {self.id!r} has non-finite fields")


@dataclass
class EventSolution:
    x_e: float
    y_e: float
    t_e: float
    residual_norm: float
    iterations: int
    converged: bool
    ill_conditioned: bool = False
    trace: list = field(default_factory=list)

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x_e, self.y_e])


def synthesize_arrivals(event, mmrs, v_e: float = DEFAULT_SPEED, noise_sigma: float = 0.0, seed: int = 0, ids=None):
    """Arrival times of a wavefront leaving ``event = (x, y, t)``.

    ``mmrs`` is a sequence of ``(x, y)`` positions. Gaussian timing noise of
    standard deviation ``noise_sigma`` seconds is added when positive.
    """
    if not v_e > 0:
        raise ValueError("propagation speed must be positive")
    pos = np.asarray(mmrs, dtype=float).reshape(-1, 2)
    if len(pos) < 4:
        raise ValueError("at least four recorders are required")
    xe, ye, te = event
    t = te + np.hypot(pos[:, 0] - xe, pos[:, 1] - ye) / v_e
    if noise_sigma > 0:
        t = t + np.random.default_rng(seed).normal(0.0, noise_sigma, len(pos))
    ids = ids or [f"MMR{k + 1}" for k in range(len(pos))]
    return [MmrRecord(str(i), float(p[0]), float(p[1]), float(tk)) for i, p, tk in zip(ids, pos, t)]


def _arrays(records):
    xy = np.array([[r.x, r.y] for r in records], dtype=float)
    t = np.array([r.t_arrival for r in records], dtype=float)
    return xy, t


def residuals(p, xy, t, v_e):
    """Residual vector at ``p = (x_e, y_e, t_e)`` in physical units (mi^2)."""
    dx = xy[:, 0] - p[0]
    dy = xy[:, 1] - p[1]
    dt = t - p[2]
    return dx**2 + dy**2 - v_e**2 * dt**2


def jacobian(p, xy, t, v_e):
    dx = xy[:, 0] - p[0]
    dy = xy[:, 1] - p[1]
    dt = t - p[2]
    return np.column_stack([-2 * dx, -2 * dy, 2 * v_e**2 * dt])


def locate_event(
    records,
    v_e: float = DEFAULT_SPEED,
    init=None,
    tol: float = 1e-9,
    max_iter: int = 50,
) -> EventSolution:
    """Damped Gauss-Newton fit of the event position and origin time.

    Positions are scaled by the recorders' bounding-box diagonal and time by
    diagonal / ``v_e`` so that tolerances do not depend on geometry. The
    Levenberg damping starts at 1e-3, grows tenfold on a rejected step and
    shrinks tenfold on an accepted one. Iteration stops when the scaled step
    is shorter than ``tol`` or after ``max_iter`` iterations; the best iterate
    is returned either way.

    The default starting point is the earliest-reporting recorder with an
    origin time a tenth of the arrival spread before the first arrival (a
    tenth of the diagonal travel time if all arrivals coincide).
    """
    records = list(records)
    if len(records) < 4:
        raise ValueError("at least four recorders are required")
    if not v_e > 0:
        raise ValueError("propagation speed must be positive")
    xy, t = _arrays(records)
    origin = xy.mean(axis=0)
    t0 = t.min()
    scale = float(np.hypot(*np.ptp(xy, axis=0))) or 1.0
    tscale = scale / v_e
    # scaled coordinates: X = (x - origin) / scale, T = (t - t0) / tscale
    sxy = (xy - origin) / scale
    st = (t - t0) / tscale

    centred = xy - origin
    sv = np.linalg.svd(centred, compute_uv=False)
    ill = bool(sv[-1] <= 1e-9 * sv[0])

    if init is None:
        k = int(np.argmin(t))
        span = np.ptp(t)
        # with simultaneous arrivals t_e = t0 is a stationary point in time
        lead = 0.1 * span if span > 0 else 0.1 * tscale
        p0 = np.array([xy[k, 0], xy[k, 1], t0 - lead])
    else:
        p0 = np.asarray(init, dtype=float)
    p = np.array([(p0[0] - origin[0]) / scale, (p0[1] - origin[1]) / scale, (p0[2] - t0) / tscale])

    def cost(q):
        r = residuals(q, sxy, st, 1.0)
        return float(r @ r)

    lam = 1e-3
    f = cost(p)
    trace = [p.copy()]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        r = residuals(p, sxy, st, 1.0)
        J = jacobian(p, sxy, st, 1.0)
        g = J.T @ r
        H = J.T @ J
        accepted = False
        while lam < 1e16:
            try:
                step = np.linalg.solve(H + lam * np.eye(3), -g)
            except np.linalg.LinAlgError:
                lam *= 10
                continue
            f_new = cost(p + step)
            if f_new <= f:
                accepted = True
                break
            lam *= 10
        if not accepted:
            converged = bool(np.linalg.norm(g) < 1e-12)
            break
        p = p + step
        f = f_new
        lam = max(lam / 10, 1e-12)
        trace.append(p.copy())
        if np.linalg.norm(step) < tol:
            converged = True
            break
    x_e = p[0] * scale + origin[0]
    y_e = p[1] * scale + origin[1]
    t_e = p[2] * tscale + t0
    rn = float(np.linalg.norm(residuals([x_e, y_e, t_e], xy, t, v_e)))
    phys = [(q[0] * scale + origin[0], q[1] * scale + origin[1], q[2] * tscale + t0) for q in trace]
    return EventSolution(float(x_e), float(y_e), float(t_e), rn, it, converged, ill, phys)


def apply_timestamp_attack(records, victim_id: str, delta: float):
    """Shift the arrival time of one recorder by ``delta`` seconds."""
    records = list(records)
    if victim_id not in {r.id for r in records}:
        raise KeyError(f"unknown recorder id {victim_id!r}")
    return [replace(r, t_arrival=r.t_arrival + delta) if r.id == victim_id else r for r in records]


# ---------------------------------------------------------------------------
# brute-force oracle


def _cubic_roots(a, b, c, d):
    """All complex roots of ``a t^3 + b t^2 + c t + d`` (vectorized, a != 0)."""
    b, c, d = b / a, c / a, d / a
    p = c - b**2 / 3
    q = 2 * b**3 / 27 - b * c / 3 + d
    sq = np.sqrt(((q / 2) ** 2 + (p / 3) ** 3).astype(complex))
    u = (-q / 2 + sq) ** (1 / 3)
    alt = (-q / 2 - sq) ** (1 / 3)
    # pick the larger cube root to avoid dividing by ~0
    u = np.where(np.abs(u) >= np.abs(alt), u, alt)
    zero = np.abs(u) == 0
    v = np.where(zero, 0.0, -p / (3 * np.where(zero, 1.0, u)))
    w = np.exp(2j * np.pi / 3)
    return [u + v - b / 3, w * u + np.conj(w) * v - b / 3, np.conj(w) * u + w * v - b / 3]


def _best_time(d2, t, v_e):
    """Origin time minimizing sum((d2 - v^2 (t_i - s)^2)^2) for each point.

    ``d2`` has shape (n_points, n_mmr). The stationarity condition is a cubic
    in ``s``; every real root is polished by Newton steps and the lowest cost
    wins.
    """
    v2 = v_e**2
    n = t.size
    # f'(s)/(4 v2) = sum_i (d2_i - v2 (t_i - s)^2)(t_i - s) = 0, expanded in s
    S1, S2, S3 = t.sum(), (t**2).sum(), (t**3).sum()
    D0 = d2.sum(axis=1)
    D1 = d2 @ t
    # sum (t_i - s)^3 = S3 - 3 s S2 + 3 s^2 S1 - n s^3 ; sum d2_i (t_i - s) = D1 - s D0
    a3 = v2 * n * np.ones_like(D0)
    a2 = -3 * v2 * S1 * np.ones_like(D0)
    a1 = 3 * v2 * S2 - D0
    a0 = D1 - v2 * S3
    cands = [np.real(r) for r in _cubic_roots(a3, a2, a1, a0)]

    def cost(s):
        r = d2 - v2 * (t[None, :] - s[:, None]) ** 2
        return (r**2).sum(axis=1)

    def polish(s):
        for _ in range(3):
            f1 = a3 * s**3 + a2 * s**2 + a1 * s + a0
            f2 = 3 * a3 * s**2 + 2 * a2 * s + a1
            s = np.where(np.abs(f2) > 0, s - f1 / np.where(f2 == 0, 1, f2), s)
        return s

    cands = [polish(s) for s in cands]
    costs = np.stack([cost(s) for s in cands])
    k = np.argmin(costs, axis=0)
    s_best = np.choose(k, cands)
    return s_best, costs[k, np.arange(k.size)]


def grid_search_event(records, v_e: float = DEFAULT_SPEED, bounds=None, n: int = 2001, chunk: int = 200_000):
    """Exhaustive search over an ``n x n`` planar grid.

    For every grid point the origin time is eliminated exactly (roots of a
    cubic), so the search is over position only. ``bounds`` is
    ``(xmin, xmax, ymin, ymax)``; by default the recorders' bounding box
    padded by half its size on every side. Returns ``(x, y, t, cost, cell)``
    where ``cell`` is the grid spacing ``(dx, dy)``.
    """
    xy, t = _arrays(records)
    if bounds is None:
        lo, hi = xy.min(axis=0), xy.max(axis=0)
        pad = 0.5 * (hi - lo).max()
        bounds = (lo[0] - pad, hi[0] + pad, lo[1] - pad, hi[1] + pad)
    gx = np.linspace(bounds[0], bounds[1], n)
    gy = np.linspace(bounds[2], bounds[3], n)
    X, Y = np.meshgrid(gx, gy, indexing="ij")
    X, Y = X.ravel(), Y.ravel()
    tc = t - t.min()
    best = (math.inf, 0, 0.0)
    for s in range(0, X.size, chunk):
        px, py = X[s : s + chunk], Y[s : s + chunk]
        d2 = (px[:, None] - xy[None, :, 0]) ** 2 + (py[:, None] - xy[None, :, 1]) ** 2
        te, c = _best_time(d2, tc, v_e)
        k = int(np.argmin(c))
        if c[k] < best[0]:
            best = (float(c[k]), s + k, float(te[k]))
    cost, idx, te = best
    return float(X[idx]), float(Y[idx]), te + t.min(), cost, (gx[1] - gx[0], gy[1] - gy[0])
