"""
Reference fields: evaluation, closed-form partials and spec parsing.
"""
import math

import numpy as np
import pytest

from app.errors import CoincidentPointsError, ConfigError, PreconditionError
from app.fields import (
    kernel_values,
    make_bump,
    make_constant,
    make_identity,
    make_power,
    parse_field,
    parse_test_function,
)
from app.geometry import volume_integral, volume_rule
from app.operators import partial_derivatives
from app.quat_core import I, J, Quaternion, qmul


@pytest.mark.parametrize(
    "spec",
    ["const", "const:2", "const:1,2,3,4", "identity", "conj", "power:3", "kernel:1,0,0,0", "bump:0,0,0,0,0.5", "iota"],
)
def test_parse_field_accepts_known_specs(spec):
    field = parse_field(spec)
    value = field(Quaternion(0.3, 0.4, -0.2, 0.1))
    assert isinstance(value, Quaternion)
    assert value.is_finite()


@pytest.mark.parametrize("spec", ["sqrt", "power:-1", "power:x", "kernel:1,2", "const:1,2", "bump:0,0,0,0,0", "identity:2"])
def test_parse_field_rejects_unknown_specs(spec):
    with pytest.raises(ConfigError):
        parse_field(spec)


def test_reference_values():
    q = Quaternion(1.0, 2.0, -1.0, 0.5)
    assert parse_field("identity")(q) == q
    assert parse_field("conj")(q) == q.conj()
    assert parse_field("const:1,2,3,4")(q) == Quaternion(1.0, 2.0, 3.0, 4.0)
    assert np.allclose(parse_field("power:2")(q).to_array(), (q * q).to_array())
    assert np.allclose(parse_field("power:3")(q).to_array(), (q * q * q).to_array())
    iota = parse_field("iota")(Quaternion(5.0, 0.0, 3.0, 4.0))
    assert np.allclose(iota.to_array(), [0.0, 0.0, 0.6, 0.8])


def test_fields_broadcast_over_arrays(rng):
    points = rng.normal(size=(3, 5, 4))
    values = make_power(2)(points)
    assert values.shape == points.shape
    assert np.allclose(values[1, 2], qmul(points[1, 2], points[1, 2]))
    assert make_constant(I)(points).shape == points.shape


def test_kernel_values_match_inverse_form():
    q = np.array([1.0, 0.5, -0.3, 0.2])
    p = np.array([0.2, 0.0, 0.1, -0.4])
    d = Quaternion.from_array(q - p)
    expected = d.conj() / (2.0 * math.pi ** 2 * d.norm() ** 4)
    assert np.allclose(kernel_values(q, p), expected.to_array(), atol=1e-15)


def test_kernel_rejects_coincident_points():
    with pytest.raises(CoincidentPointsError):
        kernel_values(np.ones((2, 4)), np.ones(4))


def _points_within_norm(rng, count, radius):
    directions = rng.normal(size=(count, 4))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    return directions * rng.uniform(0.0, radius, size=(count, 1))


@pytest.mark.parametrize(
    "spec",
    ["const:1,2,3,4", "identity", "conj", "kernel:3,0,0,0", "kernel:0,2,2,0"] + [f"power:{n}" for n in range(6)],
)
def test_closed_form_partials_match_finite_differences(spec, rng, fd_only):
    field = parse_field(spec)
    points = _points_within_norm(rng, 40, 2.0)
    closed = field.partials(points)
    numeric = partial_derivatives(field, points, fd_only)
    assert closed.shape == (40, 4, 4)
    assert np.max(np.abs(closed - numeric)) < 1e-8


def test_kernel_partials_near_the_singularity_match_relatively(rng, fd_only):
    field = parse_field("kernel:1,0,0,0")
    offsets = _points_within_norm(rng, 20, 1.0)
    offsets *= rng.uniform(0.08, 0.1, size=(20, 1)) / np.linalg.norm(offsets, axis=1, keepdims=True)
    points = offsets + np.array([1.0, 0.0, 0.0, 0.0])
    closed = field.partials(points)
    numeric = partial_derivatives(field, points, fd_only)
    scale = np.max(np.abs(closed), axis=(1, 2))
    assert np.all(np.max(np.abs(closed - numeric), axis=(1, 2)) < 1e-6 * scale)


def test_bump_partials_match_finite_differences(rng, fd_only):
    field = parse_field("bump:0.1,0,0,0,0.8")
    points = 0.3 * rng.normal(size=(8, 4))
    assert np.allclose(field.partials(points), partial_derivatives(field, points, fd_only), atol=1e-6)


def test_fields_without_partials_refuse_closed_form():
    with pytest.raises(PreconditionError):
        parse_field("iota").partials(np.ones((1, 4)))


def test_field_sum_and_scaling():
    f = make_identity() + make_constant(Quaternion(1.0))
    assert f(Quaternion(0.0, 1.0)) == Quaternion(1.0, 1.0)
    assert f.has_partials
    g = make_power(2).scaled(-2.0)
    assert g(I) == Quaternion(2.0)
    assert np.allclose(g.partials(np.zeros((1, 4))), 0.0)


def test_bump_vanishes_outside_support():
    phi = make_bump(Quaternion(1.0), 0.5)
    assert phi(Quaternion(1.6)) == Quaternion()
    assert math.isclose(phi(Quaternion(1.0)).w, math.exp(-1.0), rel_tol=1e-15)
    assert math.isclose(phi.peak, math.exp(-1.0))
    assert phi.is_real
    assert phi.support.radius == 0.5
    assert np.allclose(phi.field.partials(np.array([[2.0, 0.0, 0.0, 0.0]])), 0.0)


def test_quaternion_amplitude_bump_is_not_real():
    phi = make_bump(Quaternion(), 1.0, amplitude=J)
    assert not phi.is_real
    assert np.allclose(phi(Quaternion()).to_array(), [0.0, 0.0, math.exp(-1.0), 0.0], rtol=1e-15)


def test_bump_integral_matches_volume_rule():
    phi = parse_test_function("bump:0.2,0,0.1,0,0.6")
    reference = phi.integral()
    value = volume_integral(phi.support, phi.field, volume_rule(phi.support, (48, 8, 8, 16)))
    assert math.isclose(value.w, reference.w, rel_tol=1e-4)


@pytest.mark.parametrize("spec", ["power:2", "ball:0,0,0,0,1", "bump:0,0,0,0,-1", "bump:0,0,0"])
def test_parse_test_function_rejects_non_bumps(spec):
    with pytest.raises(ConfigError):
        parse_test_function(spec)
