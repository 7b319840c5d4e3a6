import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nhfloquet.model import Gauge, LaserField, PotentialModel, evaluate_force, evaluate_potential, quiver_amplitude

XENON = PotentialModel()


def test_potential_at_origin():
    assert evaluate_potential(XENON, 0.0) == pytest.approx(-0.63, abs=1e-15)


def test_potential_vanishes_far_away():
    assert abs(evaluate_potential(XENON, 1e6)) == 0.0


def test_unrotated_complex_point_matches_real():
    x0 = 1.7
    z = x0 * np.exp(1j * 0.0)
    assert evaluate_potential(XENON, z) == pytest.approx(evaluate_potential(XENON, x0), abs=1e-15)


def test_force_zero_at_origin():
    assert evaluate_force(XENON, 0.0) == 0.0


def test_force_matches_central_difference():
    h = 1e-5
    fd = -(evaluate_potential(XENON, 1.0 + h) - evaluate_potential(XENON, 1.0 - h)) / (2 * h)
    assert evaluate_force(XENON, 1.0) == pytest.approx(fd, rel=1e-8)


def test_parity_on_grid():
    x = np.linspace(-30, 30, 1000)
    np.testing.assert_array_equal(evaluate_potential(XENON, x), evaluate_potential(XENON, -x))
    np.testing.assert_array_equal(evaluate_force(XENON, x), -evaluate_force(XENON, -x))


def test_complex_scaling_matches_taylor_series():
    # V(x e^{i th}) = sum_k (i th)^k/k! (x d/dx)^k V, checked against a direct series in u = a x^2 e^{2i th}
    x, th = 1.3, 0.05
    u = XENON.a * x * x * np.exp(2j * th)
    series = XENON.v0 * sum((-u) ** k / math.factorial(k) for k in range(40))
    assert evaluate_potential(XENON, x * np.exp(1j * th)) == pytest.approx(series, abs=1e-14)


def test_quiver_amplitude_xenon_defaults():
    assert quiver_amplitude(LaserField()) == pytest.approx(0.015 / 0.0574**2, rel=1e-14)
    assert quiver_amplitude(LaserField()) == pytest.approx(4.553, abs=1e-3)


def test_quiver_amplitude_zero_field():
    assert quiver_amplitude(LaserField(epsilon0=0.0)) == 0.0


def test_zero_frequency_rejected():
    with pytest.raises(ValueError):
        LaserField(omega_ir=0.0)


def test_negative_field_rejected():
    with pytest.raises(ValueError):
        LaserField(epsilon0=-0.1)


def test_invalid_width_rejected():
    with pytest.raises(ValueError):
        PotentialModel(a=0.0)


def test_ponderomotive_energy():
    laser = LaserField()
    assert laser.ponderomotive_energy == pytest.approx(0.015**2 / (4 * 0.0574**2), rel=1e-14)
    assert laser.period == pytest.approx(2 * math.pi / 0.0574)


def test_gauge_from_string():
    assert Gauge("length") is Gauge.LENGTH
    with pytest.raises(ValueError):
        Gauge("velocity")


def test_gaussian_integral_closed_form():
    assert XENON.integral() == pytest.approx(-0.63 * math.sqrt(math.pi / 0.1424), rel=1e-15)


@given(st.floats(-50, 50), st.floats(0.0, 0.35))
def test_force_is_derivative_along_ray(x, theta):
    z = x * np.exp(1j * theta)
    h = 1e-6
    fd = -(XENON.value(z + h) - XENON.value(z - h)) / (2 * h)
    assert abs(XENON.force(z) - fd) < 1e-7 * max(1.0, abs(fd))
