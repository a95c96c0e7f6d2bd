"""Phasor arithmetic, line constants and the time-stamp-attack rotation.

Angles are kept in radians inside the arithmetic and exposed in degrees at
every public argument named ``*_deg`` or ``dtheta``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "Phasor",
    "LineParameters",
    "TsaOffset",
    "TwoEndMeasurements",
    "principal_sqrt",
    "derive_line_constants",
    "time_offset_to_phase",
    "apply_tsa",
]


def principal_sqrt(z):
    """Complex square root with non-negative real part.

    When the real part vanishes the root with non-negative imaginary part is
    returned, so ``principal_sqrt(-1) == 1j``.
    """
    r = np.sqrt(np.asarray(z, dtype=complex))
    flip = (r.real < 0) | ((r.real == 0) & (r.imag < 0))
    r = np.where(flip, -r, r)
    return complex(r) if r.ndim == 0 else r


@dataclass(frozen=True)
class Phasor:
    """Complex RMS quantity stored as real and imaginary parts."""

    re: float
    im: float = 0.0

    @classmethod
    def from_polar(cls, magnitude: float, angle_deg: float) -> "Phasor":
        z = cmath.rect(magnitude, math.radians(angle_deg))
        return cls(z.real, z.imag)

    @classmethod
    def from_complex(cls, z: complex) -> "Phasor":
        z = complex(z)
        return cls(z.real, z.imag)

    def __complex__(self) -> complex:
        return complex(self.re, self.im)

    @property
    def magnitude(self) -> float:
        return math.hypot(self.re, self.im)

    @property
    def angle_deg(self) -> float:
        # atan2 returns [-pi, pi]; fold -180 onto +180
        a = math.degrees(math.atan2(self.im, self.re))
        return 180.0 if a == -180.0 else a

    def rotate(self, angle_deg: float) -> "Phasor":
        return Phasor.from_complex(complex(self) * cmath.exp(1j * math.radians(angle_deg)))

    def __add__(self, other):
        return Phasor.from_complex(complex(self) + complex(other))

    def __sub__(self, other):
        return Phasor.from_complex(complex(self) - complex(other))

    def __mul__(self, other):
        return Phasor.from_complex(complex(self) * complex(other))

    def __truediv__(self, other):
        return Phasor.from_complex(complex(self) / complex(other))


@dataclass(frozen=True)
class LineParameters:
    """Per-unit-length line constants in Ohm/mile and S/mile.

    ``gamma`` and ``zc`` are ``None`` when the shunt admittance is zero
    (series-only short-line model).
    """

    z1: complex
    y1: complex
    length: float
    gamma: complex | None = None
    zc: complex | None = None

    @property
    def z_total(self) -> complex:
        return self.z1 * self.length

    @property
    def y_total(self) -> complex:
        return self.y1 * self.length

    @property
    def gamma_l(self) -> complex:
        if self.gamma is None:
            raise ValueError("propagation constant undefined for a line with y1 = 0")
        return self.gamma * self.length


def derive_line_constants(z1: complex, y1: complex, length: float, *, long_line: bool = True) -> LineParameters:
    """Build :class:`LineParameters` from series impedance and shunt admittance.

    Parameters
    ----------
    z1 : complex
        Series impedance per mile (Ohm/mi).
    y1 : complex
        Shunt admittance per mile (S/mi). May be zero only when
        ``long_line`` is False.
    length : float
        Line length in miles.
    long_line : bool
        Whether the distributed-parameter constants are required.

    Returns
    -------
    LineParameters
        With ``gamma = sqrt(z1*y1)`` and ``zc = sqrt(z1/y1)`` on the principal
        branch.
    """
    z1, y1 = complex(z1), complex(y1)
    if not length > 0:
        raise ValueError(f"line length must be positive, got {length!r}")
    if z1 == 0:
        raise ValueError("series impedance z1 must be non-zero")
    if z1.real < 0:
        raise ValueError("series resistance must be non-negative")
    if y1 == 0:
        if long_line:
            raise ValueError("long-line model needs a non-zero shunt admittance")
        return LineParameters(z1, y1, float(length))
    gamma = principal_sqrt(z1 * y1)
    zc = principal_sqrt(z1 / y1)
    return LineParameters(z1, y1, float(length), gamma, zc)


def time_offset_to_phase(dt: float, f0: float = 60.0) -> float:
    """Phase error in degrees produced by a clock error ``dt`` at ``f0`` Hz."""
    if not f0 > 0:
        raise ValueError("nominal frequency must be positive")
    return 360.0 * f0 * dt


@dataclass(frozen=True)
class TsaOffset:
    """A PMU clock error and its phase-angle equivalent.

    Construct with either ``dt`` (seconds) or ``dtheta`` (degrees); the other
    field is derived.
    """

    dt: float = 0.0
    dtheta: float = field(default=None)  # type: ignore[assignment]
    f0: float = 60.0

    def __post_init__(self):
        if self.dtheta is None:
            object.__setattr__(self, "dtheta", time_offset_to_phase(self.dt, self.f0))
        elif self.dt == 0.0:
            object.__setattr__(self, "dt", self.dtheta / (360.0 * self.f0))
        elif not math.isclose(self.dtheta, time_offset_to_phase(self.dt, self.f0), rel_tol=1e-12, abs_tol=1e-12):
            raise ValueError("dt and dtheta are inconsistent")

    @classmethod
    def from_degrees(cls, dtheta: float, f0: float = 60.0) -> "TsaOffset":
        return cls(dt=dtheta / (360.0 * f0), dtheta=dtheta, f0=f0)


@dataclass(frozen=True)
class TwoEndMeasurements:
    """Voltages and currents reported by the PMUs at both line terminals.

    Both currents are positive when flowing *into* the line. Fields may be
    complex scalars or complex arrays (per phase and/or per frame).
    """

    vs: complex | np.ndarray
    is_: complex | np.ndarray
    vr: complex | np.ndarray
    ir: complex | np.ndarray
    timestamp: float | np.ndarray = 0.0

    def take(self, index) -> "TwoEndMeasurements":
        """Index every phasor field (e.g. pick one phase or one frame)."""
        ts = self.timestamp
        if np.ndim(ts):
            ts = np.asarray(ts)[index] if np.ndim(ts) == np.ndim(self.vs) else ts
        return TwoEndMeasurements(
            np.asarray(self.vs)[index],
            np.asarray(self.is_)[index],
            np.asarray(self.vr)[index],
            np.asarray(self.ir)[index],
            ts,
        )


def apply_tsa(m: TwoEndMeasurements, end: str, off: TsaOffset | float) -> TwoEndMeasurements:
    """Rotate every phasor reported by one PMU by its clock-error angle.

    ``off`` may be a :class:`TsaOffset` or a bare angle in degrees.
    """
    dtheta = off.dtheta if isinstance(off, TsaOffset) else float(off)
    if end not in ("sending", "receiving"):
        raise ValueError(f"end must be 'sending' or 'receiving', got {end!r}")
    if dtheta == 0.0:
        return m
    rot = cmath.exp(1j * math.radians(dtheta))
    if end == "sending":
        return replace(m, vs=m.vs * rot, is_=m.is_ * rot)
    return replace(m, vr=m.vr * rot, ir=m.ir * rot)
