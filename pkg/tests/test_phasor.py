import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tsagrid.phasor import (
    LineParameters,
    Phasor,
    TsaOffset,
    TwoEndMeasurements,
    apply_tsa,
    derive_line_constants,
    principal_sqrt,
    time_offset_to_phase,
)

finite = st.floats(min_value=-1e3, max_value=1e3, allow_nan=False)


def test_phasor_polar_roundtrip():
    p = Phasor.from_polar(2.0, 30.0)
    assert p.magnitude == pytest.approx(2.0)
    assert p.angle_deg == pytest.approx(30.0)
    assert complex(p) == pytest.approx(2 * cmath.exp(1j * math.pi / 6))


def test_angle_range_excludes_minus_180():
    assert Phasor(-1.0, 0.0).angle_deg == 180.0
    assert Phasor(-1.0, -0.0).angle_deg == 180.0


@given(finite, finite)
def test_magnitude_and_angle_range(re, im):
    p = Phasor(re, im)
    assert p.magnitude >= 0
    assert p.magnitude == pytest.approx(math.hypot(re, im))
    assert -180.0 < p.angle_deg <= 180.0


@given(finite, finite)
def test_full_turn_is_identity(re, im):
    p = Phasor(re, im)
    q = p.rotate(360.0)
    assert abs(complex(q) - complex(p)) <= 1e-12 * max(p.magnitude, 1e-300) + 1e-300


def test_phasor_arithmetic():
    a, b = Phasor(1, 2), Phasor(3, -1)
    assert complex(a + b) == 4 + 1j
    assert complex(a - b) == -2 + 3j
    assert complex(a * b) == (1 + 2j) * (3 - 1j)
    assert complex(a / b) == pytest.approx((1 + 2j) / (3 - 1j))


def test_principal_sqrt_branch():
    assert principal_sqrt(-1 + 0j) == 1j
    assert principal_sqrt(-4 - 0j) == 2j
    r = principal_sqrt(np.array([-1 - 1e-30j, 1j, -1j]))
    assert np.all(r.real >= 0)


def test_unit_reactive_line():
    p = derive_line_constants(1j, 1j, 1.0)
    assert p.gamma == pytest.approx(1j)
    assert p.zc == pytest.approx(1.0)


def test_real_parameters_give_real_constants():
    p = derive_line_constants(4.0, 0.25, 1.0)
    assert p.gamma == pytest.approx(1.0)
    assert p.zc == pytest.approx(4.0)
    assert p.gamma.imag == 0 and p.zc.imag == 0


def test_long_line_identities():
    p = derive_line_constants(0.0410 + 0.5530j, 7.57e-6j, 400.0)
    assert abs(p.zc * p.gamma - p.z1) <= 1e-12 * abs(p.z1)
    assert abs(p.gamma / p.zc - p.y1) <= 1e-12 * abs(p.y1)


@pytest.mark.parametrize(
    "z1, y1, length",
    [(1j, 1j, 0.0), (1j, 1j, -3.0), (0j, 1j, 1.0), (-0.1 + 1j, 1j, 1.0), (1j, 0j, 1.0)],
)
def test_line_constant_errors(z1, y1, length):
    with pytest.raises(ValueError):
        derive_line_constants(z1, y1, length)


def test_short_line_allows_zero_shunt():
    p = derive_line_constants(0.1 + 0.5j, 0, 25.0, long_line=False)
    assert p.z_total == pytest.approx((0.1 + 0.5j) * 25)


pos = st.floats(min_value=1e-6, max_value=1e3)
ang = st.floats(min_value=0.0, max_value=math.pi / 2)


@settings(max_examples=1000, deadline=None)
@given(pos, ang, pos, ang)
def test_line_constant_identities_random(zm, za, ym, ya):
    z1 = cmath.rect(zm, za)
    y1 = cmath.rect(ym, ya)
    p = derive_line_constants(z1, y1, 1.0)
    assert abs(p.gamma**2 - z1 * y1) <= 1e-12 * abs(z1 * y1)
    assert abs(p.zc**2 - z1 / y1) <= 1e-12 * abs(z1 / y1)
    assert abs(p.zc * p.gamma - z1) <= 1e-12 * abs(z1)
    assert abs(p.gamma / p.zc - y1) <= 1e-12 * abs(y1)
    assert p.gamma.real >= 0 and p.zc.real >= 0


def test_time_offset_to_phase_examples():
    assert time_offset_to_phase(0.0) == 0.0
    assert time_offset_to_phase(1 / 60, 60.0) == pytest.approx(360.0, abs=1e-12)
    assert time_offset_to_phase(1.38889e-3, 60.0) == pytest.approx(30.000, abs=5e-4)


def test_tsa_offset_fields_are_consistent():
    off = TsaOffset(dt=1e-3)
    assert off.dtheta == 360 * 60 * 1e-3
    back = TsaOffset.from_degrees(30.0)
    assert back.dt * 360 * 60 == pytest.approx(30.0, abs=1e-12)


def _meas():
    return TwoEndMeasurements(
        vs=np.array([1.0 + 0j, 0.9 + 0.1j]),
        is_=np.array([0.2 - 0.1j, 0.3 + 0j]),
        vr=np.array([0.95 - 0.05j, 0.8j]),
        ir=np.array([-0.2 + 0.1j, -0.25j]),
    )


def test_zero_rotation_is_bitwise_identity():
    m = _meas()
    out = apply_tsa(m, "sending", 0.0)
    for f in ("vs", "is_", "vr", "ir"):
        assert np.array_equal(getattr(out, f), getattr(m, f))


def test_sending_rotation_example():
    m = TwoEndMeasurements(vs=1 + 0j, is_=0.5 - 0.5j, vr=0.9 + 0j, ir=-0.4 + 0j)
    out = apply_tsa(m, "sending", TsaOffset.from_degrees(30.0))
    assert Phasor.from_complex(out.vs).angle_deg == pytest.approx(30.0)
    assert abs(out.vs) == pytest.approx(1.0)
    assert out.is_ == pytest.approx((0.5 - 0.5j) * cmath.exp(1j * math.radians(30)))
    assert out.vr == m.vr and out.ir == m.ir


def test_rotation_composition():
    m = _meas()
    a = apply_tsa(apply_tsa(m, "receiving", 20.0), "receiving", 10.0)
    b = apply_tsa(m, "receiving", 30.0)
    for f in ("vr", "ir"):
        assert np.max(np.abs(getattr(a, f) - getattr(b, f))) <= 1e-12


@given(st.floats(-180, 180), st.floats(-180, 180))
def test_rotation_composition_random(a, b):
    m = _meas()
    x = apply_tsa(apply_tsa(m, "sending", a), "sending", b)
    y = apply_tsa(m, "sending", a + b)
    assert np.max(np.abs(x.vs - y.vs)) <= 1e-12


@given(st.floats(-360, 360), st.sampled_from(["sending", "receiving"]))
def test_rotation_preserves_magnitude(dth, end):
    m = _meas()
    out = apply_tsa(m, end, dth)
    for f in ("vs", "is_", "vr", "ir"):
        np.testing.assert_allclose(np.abs(getattr(out, f)), np.abs(getattr(m, f)), rtol=1e-12)


@given(st.floats(-90, 90), st.floats(-90, 90))
def test_relative_asynchronism(ds, dr):
    m = _meas()
    out = apply_tsa(apply_tsa(m, "sending", ds), "receiving", dr)
    shift = np.angle((out.vr / out.vs) / (m.vr / m.vs), deg=True)
    expected = (dr - ds + 180) % 360 - 180
    np.testing.assert_allclose((shift - expected + 180) % 360 - 180, 0.0, atol=1e-9)


def test_bad_end_name():
    with pytest.raises(ValueError):
        apply_tsa(_meas(), "middle", 5.0)


def test_line_parameters_properties():
    p = LineParameters(0.1 + 1j, 2e-6j, 10.0)
    assert p.z_total == pytest.approx(1 + 10j)
    assert p.y_total == pytest.approx(2e-5j)
