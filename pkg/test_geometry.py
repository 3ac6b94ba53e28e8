"""
Domains and quadrature rules: measures, normals, eps-spheres and the
singularity-centred volume rule.
"""
import math

import numpy as np
import pytest

from app.errors import ConfigError, NumericalEvaluationError, PreconditionError
from app.fields import kernel_values
from app.geometry import (
    SPHERE_AREA,
    Ball4,
    Box4,
    boundary_integral,
    boundary_rule,
    eps_sphere_integral,
    eps_sphere_rule,
    parse_domain,
    singular_split_radius,
    singular_volume_integral,
    singular_volume_rule,
    sphere_directions,
    volume_integral,
    volume_rule,
)
from app.quat_core import Quaternion, qnorm2


def constant(value):
    return lambda q: np.broadcast_to(np.asarray(value, dtype=float), q.shape)


def test_parse_domain():
    ball = parse_domain("ball:1,2,3,4,0.5")
    assert ball == Ball4(Quaternion(1.0, 2.0, 3.0, 4.0), 0.5)
    box = parse_domain("box:0,0,0,0,1,2,3,4")
    assert box == Box4(Quaternion(), Quaternion(1.0, 2.0, 3.0, 4.0))
    assert parse_domain(ball.spec) == ball


@pytest.mark.parametrize("spec", ["ball:1,2", "cube:0,0,0,0,1", "ball:0,0,0,0,-1", "box:0,0,0,0,1,1,1,0", "ball:a,b,c,d,e"])
def test_parse_domain_rejects_malformed_specs(spec):
    with pytest.raises(ConfigError):
        parse_domain(spec)


def test_ball_membership_and_exit_distance(unit_ball):
    assert unit_ball.contains(Quaternion(0.5, 0.5, 0.5, 0.0))
    assert not unit_ball.contains(Quaternion(1.0))
    assert unit_ball.on_boundary(Quaternion(0.0, 0.0, 1.0, 0.0))
    directions, _ = sphere_directions(4, 4, 8)
    assert np.allclose(unit_ball.exit_distance(np.zeros(4), directions), 1.0)
    p = np.array([0.5, 0.0, 0.0, 0.0])
    assert np.isclose(unit_ball.exit_distance(p, np.array([[1.0, 0.0, 0.0, 0.0]]))[0], 0.5)
    assert np.isclose(unit_ball.exit_distance(p, np.array([[-1.0, 0.0, 0.0, 0.0]]))[0], 1.5)


def test_box_membership_and_normals(unit_box):
    assert unit_box.contains(Quaternion(0.5, 0.5, 0.5, 0.5))
    assert not unit_box.contains(Quaternion(0.5, 0.5, 0.5, 1.5))
    assert unit_box.on_boundary(Quaternion(0.0, 0.5, 0.5, 0.5))
    normals = unit_box.outward_normal(np.array([[0.5, 0.99, 0.5, 0.5], [0.01, 0.5, 0.5, 0.5]]))
    assert np.allclose(normals, [[0, 1, 0, 0], [-1, 0, 0, 0]])
    center = np.full(4, 0.5)
    assert np.isclose(unit_box.exit_distance(center, np.array([[0.0, 0.0, 0.0, 1.0]]))[0], 0.5)


def test_sphere_directions_are_unit_with_total_area():
    directions, weights = sphere_directions(12, 12, 24)
    assert np.allclose(np.linalg.norm(directions, axis=-1), 1.0)
    assert math.isclose(weights.sum(), SPHERE_AREA, rel_tol=1e-11)
    assert np.all(weights > 0)


def test_volume_rules_integrate_measure(unit_ball, unit_box):
    ball = Ball4(Quaternion(0.3, -0.2, 0.1, 0.0), 0.7)
    assert math.isclose(volume_rule(ball, 12).total_weight, ball.measure, rel_tol=1e-11)
    assert math.isclose(volume_rule(unit_box, 3).total_weight, 1.0, rel_tol=1e-13)
    box = Box4(Quaternion(), Quaternion(1.0, 2.0, 0.5, 3.0))
    assert math.isclose(volume_rule(box, 2).total_weight, 3.0, rel_tol=1e-13)


def test_boundary_rules_integrate_surface_measure(unit_box):
    ball = Ball4(Quaternion(1.0), 2.0)
    rule = boundary_rule(ball, 12)
    assert math.isclose(rule.total_weight, ball.boundary_measure, rel_tol=1e-11)
    assert math.isclose(boundary_rule(unit_box, 3).total_weight, unit_box.boundary_measure, rel_tol=1e-13)


def test_boundary_normals_point_outward(unit_box):
    ball = Ball4(Quaternion(1.0, 1.0, 0.0, 0.0), 0.5)
    for domain in (ball, unit_box):
        rule = boundary_rule(domain, 4)
        offset = rule.nodes - np.full(4, 0.5) if domain is unit_box else rule.nodes - ball.center.to_array()
        assert np.all(np.einsum("ij,ij->i", offset, rule.normals) > 0)
        assert np.allclose(np.linalg.norm(rule.normals, axis=-1), 1.0)


def test_volume_integral_of_norm_squared(unit_ball):
    value = volume_integral(unit_ball, lambda q: qnorm2(q)[:, None] * np.array([1.0, 0, 0, 0]), volume_rule(unit_ball, 12))
    assert math.isclose(value.w, math.pi ** 2 / 3.0, rel_tol=1e-11)


def test_volume_integral_accepts_rules_on_subregions_only(unit_ball, unit_box):
    one = lambda q: np.broadcast_to([1.0, 0.0, 0.0, 0.0], q.shape)
    inner = Ball4(Quaternion(0.1, 0.0, 0.2, 0.0), 0.5)
    value = volume_integral(unit_ball, one, volume_rule(inner, 12))
    assert math.isclose(value.w, inner.measure, rel_tol=1e-10)
    with pytest.raises(PreconditionError, match="outside"):
        volume_integral(unit_ball, one, volume_rule(Ball4(Quaternion(0.8), 0.5), 4))
    with pytest.raises(PreconditionError, match="outside"):
        volume_integral(unit_box, one, volume_rule(unit_ball, 4))


def test_eps_sphere_integral_area():
    rule = eps_sphere_rule(12)
    value = eps_sphere_integral(Quaternion(1.0, 2.0, 0.0, 0.0), 0.3, lambda q, n: constant([1.0, 0, 0, 0])(q), rule)
    assert math.isclose(value.w, SPHERE_AREA * 0.3 ** 3, rel_tol=1e-11)


def test_eps_sphere_rejects_non_positive_radius():
    with pytest.raises(PreconditionError):
        eps_sphere_integral(Quaternion(), 0.0, lambda q, n: q, eps_sphere_rule(4))


def test_rule_kind_is_checked(unit_ball):
    with pytest.raises(PreconditionError):
        volume_integral(unit_ball, lambda q: q, boundary_rule(unit_ball, 4))


def test_non_finite_values_are_reported_with_the_node(unit_ball):
    with pytest.raises(NumericalEvaluationError, match="node"):
        volume_integral(unit_ball, lambda q: np.full(q.shape, np.nan), volume_rule(unit_ball, 4))


def test_split_radius(unit_ball, unit_box):
    assert math.isclose(singular_split_radius(unit_ball, Quaternion(0.6)), 0.2)
    assert math.isclose(singular_split_radius(unit_ball, Quaternion()), 0.5)
    assert math.isclose(singular_split_radius(unit_box, Quaternion(0.5, 0.5, 0.5, 0.5)), 0.25)


def test_singular_rule_integrates_measure(unit_ball):
    p = Quaternion(0.3, 0.1, 0.0, -0.2)
    rule = singular_volume_rule(radial=4, angular=(12, 12, 24))
    value = singular_volume_integral(unit_ball, p, constant([1.0, 0, 0, 0]), rule)
    assert math.isclose(value.w, unit_ball.measure, rel_tol=1e-6)


def test_singular_rule_on_box_measure(unit_box):
    p = Quaternion(0.4, 0.5, 0.6, 0.5)
    rule = singular_volume_rule(radial=2, angular=(16, 16, 32))
    value = singular_volume_integral(unit_box, p, constant([1.0, 0, 0, 0]), rule)
    assert math.isclose(value.w, 1.0, rel_tol=5e-2)


def test_singular_rule_integrates_the_kernel(unit_ball):
    # int_B E(q, p) dV = -conj(p - c) / 4 for interior p
    p = Quaternion(0.2, 0.1, -0.3, 0.05)
    rule = singular_volume_rule(radial=2, angular=(12, 12, 24))
    value = singular_volume_integral(unit_ball, p, lambda q: kernel_values(q, p.to_array()), rule)
    assert np.allclose(value.to_array(), (-0.25 * p.conj()).to_array(), atol=1e-5)


def test_singular_integration_requires_interior_point(unit_ball):
    with pytest.raises(PreconditionError):
        singular_volume_integral(unit_ball, Quaternion(1.5), constant([1.0, 0, 0, 0]), singular_volume_rule(2, 4))


def test_integrals_are_deterministic(unit_ball):
    rule = volume_rule(unit_ball, 6)
    f = lambda q: np.sin(q) + q ** 2
    assert volume_integral(unit_ball, f, rule) == volume_integral(unit_ball, f, rule)
    brule = boundary_rule(unit_ball, 6)
    assert boundary_integral(unit_ball, lambda q, n: q * n, brule) == boundary_integral(unit_ball, lambda q, n: q * n, brule)
