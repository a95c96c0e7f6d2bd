"""Baseband GPS L1 C/A model: codes, signal synthesis, acquisition, spoofing.

The carrier is removed, so each satellite appears at baseband with only its
Doppler offset. Chips map to ``+1`` (bit 0) and ``-1`` (bit 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

__all__ = [
    "CHIP_RATE",
    "CODE_LENGTH",
    "SatelliteSignal",
    "GpsScene",
    "AcquisitionResult",
    "SpoofOutcome",
    "TimingModel",
    "gen_ca_code",
    "circular_correlation",
    "synthesize_baseband",
    "acquire",
    "default_doppler_bins",
    "run_spoof_scenario",
    "utc_from_receiver",
    "spoof_phase_to_timing_error",
]

CHIP_RATE = 1.023e6
CODE_LENGTH = 1023
SAMPLE_RATE = 4.092e6

# G2 phase-selector tap pairs (1-based register stages) for PRN 1..32.
G2_TAPS = (
    (2, 6), (3, 7), (4, 8), (5, 9), (1, 9), (2, 10), (1, 8), (2, 9),
    (3, 10), (2, 3), (3, 4), (5, 6), (6, 7), (7, 8), (8, 9), (9, 10),
    (1, 4), (2, 5), (3, 6), (4, 7), (5, 8), (6, 9), (1, 3), (4, 6),
    (5, 7), (6, 8), (7, 9), (8, 10), (1, 6), (2, 7), (3, 8), (4, 9),
)


def _lfsr(feedback: tuple[int, ...], outputs: tuple[int, ...]) -> np.ndarray:
    reg = [1] * 10
    out = np.empty(CODE_LENGTH, dtype=np.int8)
    for k in range(CODE_LENGTH):
        bit = 0
        for tap in outputs:
            bit ^= reg[tap - 1]
        out[k] = bit
        fb = 0
        for tap in feedback:
            fb ^= reg[tap - 1]
        reg = [fb] + reg[:-1]
    return out


@lru_cache(maxsize=None)
def _ca_bits(prn: int) -> np.ndarray:
    g1 = _lfsr((3, 10), (10,))
    g2 = _lfsr((2, 3, 6, 8, 9, 10), G2_TAPS[prn - 1])
    bits = g1 ^ g2
    bits.setflags(write=False)
    return bits


def gen_ca_code(prn: int) -> np.ndarray:
    """The 1023-chip C/A Gold code of ``prn`` as a ``+1/-1`` int array."""
    if not isinstance(prn, (int, np.integer)) or not 1 <= prn <= 32:
        raise ValueError(f"PRN must be an integer in 1..32, got {prn!r}")
    return (1 - 2 * _ca_bits(int(prn))).astype(np.int64)


def circular_correlation(a, b) -> np.ndarray:
    """``r[k] = sum_n a[n] * conj(b[n - k])`` for every lag, via FFT."""
    a = np.asarray(a)
    b = np.asarray(b)
    r = np.fft.ifft(np.fft.fft(a) * np.conj(np.fft.fft(b)))
    return r.real if np.isrealobj(a) and np.isrealobj(b) else r


@dataclass(frozen=True)
class SatelliteSignal:
    """One received ranging signal (authentic or forged)."""

    prn: int
    power: float = 1.0
    code_phase: float = 0.0
    doppler: float = 0.0
    nav_bits: tuple[int, ...] = (1,)

    def __post_init__(self):
        if not 1 <= self.prn <= 32:
            raise ValueError(f"PRN must lie in 1..32, got {self.prn}")
        if not 0 <= self.code_phase < CODE_LENGTH:
            raise ValueError(f"code phase must lie in [0, 1023), got {self.code_phase}")
        if abs(self.doppler) > 10e3:
            raise ValueError(f"|doppler| must not exceed 10 kHz, got {self.doppler}")
        if self.power < 0:
            raise ValueError("power must be non-negative")


@dataclass(frozen=True)
class GpsScene:
    satellites: tuple[SatelliteSignal, ...] = ()
    noise_sigma: float = 0.0
    sample_rate: float = SAMPLE_RATE
    duration_ms: float = 1.0

    def __post_init__(self):
        if self.duration_ms < 1:
            raise ValueError("duration must be at least 1 ms")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")

    @property
    def n_samples(self) -> int:
        return int(round(self.sample_rate * self.duration_ms / 1000))


def _sampled_code(prn: int, n: int, fs: float, code_phase: float = 0.0) -> np.ndarray:
    t = np.arange(n) / fs
    idx = np.floor(t * CHIP_RATE - code_phase).astype(np.int64) % CODE_LENGTH
    return gen_ca_code(prn)[idx]


def synthesize_baseband(scene: GpsScene, seed: int = 0) -> np.ndarray:
    """Complex baseband samples of every satellite in ``scene`` plus noise.

    Each satellite contributes ``sqrt(2 P) * C(t - tau) * D(t) * exp(j 2 pi fd t)``.
    Noise is circular complex Gaussian with standard deviation
    ``noise_sigma`` on each of the real and imaginary parts.
    """
    n = scene.n_samples
    fs = scene.sample_rate
    t = np.arange(n) / fs
    x = np.zeros(n, dtype=complex)
    for sat in scene.satellites:
        code = _sampled_code(sat.prn, n, fs, sat.code_phase)
        bits = np.asarray(sat.nav_bits, dtype=float)
        nav = bits[np.minimum((t / 0.02).astype(np.int64), bits.size - 1)]
        x += math.sqrt(2 * sat.power) * code * nav * np.exp(2j * np.pi * sat.doppler * t)
    if scene.noise_sigma > 0:
        rng = np.random.default_rng(seed)
        x += scene.noise_sigma * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    return x


def default_doppler_bins(span: float = 10e3, step: float = 500.0) -> np.ndarray:
    return np.arange(-span, span + step / 2, step)


@dataclass
class AcquisitionResult:
    code_phase_est: float
    doppler_est: float
    peak: float
    peak_to_floor: float
    floor_mean: float = math.nan
    floor_std: float = math.nan
    grid: np.ndarray | None = field(default=None, repr=False)
    doppler_bins: np.ndarray | None = field(default=None, repr=False)
    samples_per_chip: float = 4.0

    def magnitude_at(self, code_phase: float, halfwidth_chips: float = 0.5) -> float:
        """Largest grid magnitude within ``halfwidth_chips`` of ``code_phase``."""
        n = self.grid.shape[0]
        lags = np.arange(n) / self.samples_per_chip
        dist = np.abs((lags - code_phase + CODE_LENGTH / 2) % CODE_LENGTH - CODE_LENGTH / 2)
        return float(self.grid[dist <= halfwidth_chips].max())


def acquire(samples, prn: int, doppler_bins=None, sample_rate: float = SAMPLE_RATE, keep_grid: bool = True) -> AcquisitionResult:
    """Search code phase and Doppler for the strongest correlation peak.

    The first millisecond of ``samples`` is correlated coherently against
    the local replica at every integer-sample code lag for each Doppler bin.
    Ties resolve to the lowest code phase, then the lowest Doppler.
    ``peak_to_floor`` divides the peak by the mean magnitude of every cell
    more than 2 chips away from the peak code phase.
    """
    if doppler_bins is None:
        doppler_bins = default_doppler_bins()
    bins = np.sort(np.asarray(doppler_bins, dtype=float))
    if bins.size == 0:
        raise ValueError("at least one Doppler bin is required")
    n = int(round(sample_rate / 1000))
    x = np.asarray(samples, dtype=complex)
    if x.size < n:
        raise ValueError(f"need at least one code period ({n} samples), got {x.size}")
    x = x[:n]
    t = np.arange(n) / sample_rate
    local_f = np.conj(np.fft.fft(_sampled_code(prn, n, sample_rate)))
    # grid[lag, bin]
    wiped = x[None, :] * np.exp(-2j * np.pi * bins[:, None] * t[None, :])
    grid = np.abs(np.fft.ifft(np.fft.fft(wiped, axis=1) * local_f[None, :], axis=1)).T
    flat = int(np.argmax(grid))
    lag, b = divmod(flat, bins.size)
    spc = sample_rate / CHIP_RATE
    peak = float(grid[lag, b])
    excl = int(math.ceil(2 * spc))
    lag_dist = np.abs((np.arange(n) - lag + n // 2) % n - n // 2)
    floor_cells = grid[lag_dist > excl]
    floor_mean = float(floor_cells.mean())
    return AcquisitionResult(
        code_phase_est=lag / spc,
        doppler_est=float(bins[b]),
        peak=peak,
        peak_to_floor=peak / floor_mean if floor_mean > 0 else math.inf,
        floor_mean=floor_mean,
        floor_std=float(floor_cells.std()),
        grid=grid if keep_grid else None,
        doppler_bins=bins,
        samples_per_chip=spc,
    )


def _chip_distance(a: float, b: float) -> float:
    return abs((a - b + CODE_LENGTH / 2) % CODE_LENGTH - CODE_LENGTH / 2)


@dataclass
class SpoofOutcome:
    """Acquisition before the attack and after jam-then-spoof re-acquisition."""

    before: AcquisitionResult
    after: AcquisitionResult
    captured: bool
    ambiguous: bool
    code_shift_chips: float
    timing_error: float
    authentic_peak: float
    spoof_peak: float


def run_spoof_scenario(
    authentic: GpsScene,
    spoof: GpsScene,
    jam_sigma: float,
    prn: int | None = None,
    doppler_bins=None,
    seed: int = 0,
    tie_sigmas: float = 3.0,
) -> SpoofOutcome:
    """Two-step attack: jam to break lock, then offer a stronger replica.

    ``before`` acquires the authentic scene alone. ``after`` acquires the
    authentic plus forged signals with the noise raised to ``jam_sigma``.
    The outcome is ``ambiguous`` when the correlation peaks at the authentic
    and forged code phases differ by less than ``tie_sigmas`` standard
    deviations of the off-peak floor.
    """
    if prn is None:
        prn = authentic.satellites[0].prn
    if {s.prn for s in spoof.satellites} - {s.prn for s in authentic.satellites}:
        raise ValueError("spoofed PRNs must also be present in the authentic scene")
    auth_sat = next(s for s in authentic.satellites if s.prn == prn)
    spoof_sat = next((s for s in spoof.satellites if s.prn == prn), None)
    rng = np.random.default_rng(seed)
    s_before, s_after = (int(v) for v in rng.integers(0, 2**31, size=2))
    before = acquire(synthesize_baseband(authentic, s_before), prn, doppler_bins, authentic.sample_rate)
    combined = GpsScene(
        authentic.satellites + spoof.satellites,
        noise_sigma=jam_sigma,
        sample_rate=authentic.sample_rate,
        duration_ms=authentic.duration_ms,
    )
    after = acquire(synthesize_baseband(combined, s_after), prn, doppler_bins, authentic.sample_rate)
    a_peak = after.magnitude_at(auth_sat.code_phase)
    if spoof_sat is None or spoof_sat.power == 0:
        s_peak = 0.0
        captured = False
        ambiguous = False
    else:
        s_peak = after.magnitude_at(spoof_sat.code_phase)
        captured = _chip_distance(after.code_phase_est, spoof_sat.code_phase) <= 0.5
        ambiguous = abs(a_peak - s_peak) < tie_sigmas * after.floor_std
    shift = (after.code_phase_est - before.code_phase_est + CODE_LENGTH / 2) % CODE_LENGTH - CODE_LENGTH / 2
    return SpoofOutcome(before, after, captured, ambiguous, float(shift), spoof_phase_to_timing_error(shift), a_peak, s_peak)


@dataclass(frozen=True)
class TimingModel:
    """Receiver clock reading, propagation delay and UTC correction (s)."""

    t_rcv: float
    t_p: float
    dt_utc: float = 0.0

    def __post_init__(self):
        if self.t_p < 0:
            raise ValueError("propagation time must be non-negative")


def utc_from_receiver(t: TimingModel) -> float:
    return t.t_rcv - t.t_p - t.dt_utc


def spoof_phase_to_timing_error(chip_shift: float) -> float:
    """Clock error (s) caused by locking ``chip_shift`` chips off the true code."""
    return chip_shift / CHIP_RATE
