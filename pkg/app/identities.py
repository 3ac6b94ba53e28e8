"""
Integral identities of quaternionic analysis as executable checks.

Covers the quaternionic Gauss and Green formulas, the eps-sphere limit of the
kernel, the test-function/kernel identity, the Newton potential as a weak
inverse of D_l, the Cauchy representation, weak and semiweak residuals and
the two-term representation of Cullen-regular functions.

Product orders follow the displayed formulas exactly: (D_r phi) f, phi h,
E n f, u n v and E (2v/r). Quaternion multiplication does not commute, so
these are never reordered.
"""
import math
import time
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger

from app.errors import AxisProximityError, PreconditionError
from app.fields import QuaternionField, TestFunction, kernel_values
from app.geometry import (
    Ball4,
    Domain,
    QuadratureRule,
    boundary_integral,
    boundary_rule,
    eps_sphere_integral,
    eps_sphere_rule,
    singular_volume_integral,
    singular_volume_integral_many,
    singular_volume_rule,
    volume_integral,
    volume_rule,
)
from app.operators import (
    cullen_v,
    fueter_left,
    fueter_right,
    partial_derivative,
)
from app.quat_core import Quaternion, qmul, qnorm, slice_arrays
from app.schemas import CheckReport, FDConfig

DEFAULT_FD = FDConfig()

# Polar rule on a bump support: (n_r, n_psi, n_theta, n_phi).
WEAK_RESOLUTION = (24, 8, 8, 16)

SPHERE_LIMIT_FLOOR = 1e-10
# Largest deviation from f(p) accepted at any eps, relative to max(1, |f(p)|).
SPHERE_LIMIT_TOLERANCE = 5e-2
SPHERE_LIMIT_ORDER_BAND = (0.7, 2.5)

FieldOrTest = Union[QuaternionField, TestFunction]


@dataclass(frozen=True)
class WeakResidual:
    """
    Value of a weak-formulation functional for one test function.

    `estimated_quadrature_error` is the discrete defect of the identity
    int D_r phi dV = 0 scaled by |f| at the support centre.
    """
    value: Quaternion
    test_function: str
    estimated_quadrature_error: float
    lhs: Optional[Quaternion] = None
    rhs: Optional[Quaternion] = None
    node_count: int = 0


def _field(f: FieldOrTest) -> QuaternionField:
    return f.field if isinstance(f, TestFunction) else f


def fit_order(xs: Sequence[float], errors: Sequence[float], floor: float) -> Tuple[Optional[float], str]:
    """
    Least-squares slope of log(error) against log(x).

    Returns (None, "floor") when every error is below `floor`; errors under the
    floor (or the smallest positive float) are clamped to it before fitting.
    """
    errs = np.asarray(errors, dtype=float)
    if np.all(errs < floor):
        return None, "floor"
    clamped = np.maximum(errs, max(floor, np.finfo(float).tiny))
    slope = float(np.polyfit(np.log(np.asarray(xs, dtype=float)), np.log(clamped), 1)[0])
    return slope, f"{slope:.3f}"


# ============================================================================
# GAUSS AND GREEN
# ============================================================================

def gauss_check(
    d: Domain,
    components: Sequence[QuaternionField],
    vrule: Optional[QuadratureRule] = None,
    brule: Optional[QuadratureRule] = None,
    cfg: Optional[FDConfig] = None,
    tolerance: float = 1e-6,
) -> CheckReport:
    """
    int_{dOmega} (f0 n0 + f1 n1 + f2 n2 + f3 n3) dS = int_Omega (df0/dt + df1/dx + df2/dy + df3/dz) dV.

    Args:
        d: Domain
        components: The four fields f0..f3
        vrule: Volume rule for d (default resolution when omitted)
        brule: Boundary rule for d (default resolution when omitted)
        cfg: Finite-difference settings
        tolerance: Relative tolerance between the two sides

    Returns:
        CheckReport with lhs = boundary side, rhs = volume side
    """
    start = time.perf_counter()
    if len(components) != 4:
        raise PreconditionError(f"Gauss check needs four component fields, got {len(components)}")
    cfg = cfg or DEFAULT_FD
    vrule = vrule or volume_rule(d)
    brule = brule or boundary_rule(d)

    def flux(q: np.ndarray, n: np.ndarray) -> np.ndarray:
        return sum(components[k](q) * n[..., k, None] for k in range(4))

    def divergence(q: np.ndarray) -> np.ndarray:
        return sum(partial_derivative(components[k], q, k, cfg) for k in range(4))

    lhs = boundary_integral(d, flux, brule)
    rhs = volume_integral(d, divergence, vrule)
    return CheckReport.compare(
        "gauss",
        lhs,
        rhs,
        tolerance,
        parameters={"domain": d.spec, "fields": [c.name for c in components]},
        node_counts={"volume": vrule.node_count, "boundary": brule.node_count},
        elapsed_seconds=time.perf_counter() - start,
    )


def green_check(
    d: Domain,
    u: FieldOrTest,
    v: FieldOrTest,
    vrule: Optional[QuadratureRule] = None,
    brule: Optional[QuadratureRule] = None,
    cfg: Optional[FDConfig] = None,
    tolerance: float = 1e-4,
    scale: Optional[float] = None,
) -> CheckReport:
    """
    int_Omega (D_r u) v + u (D_l v) dV = int_{dOmega} u n v dS.

    Returns:
        CheckReport with lhs = volume side, rhs = boundary side
    """
    start = time.perf_counter()
    cfg = cfg or DEFAULT_FD
    u_f, v_f = _field(u), _field(v)
    vrule = vrule or volume_rule(d)
    brule = brule or boundary_rule(d)

    def volume_side(q: np.ndarray) -> np.ndarray:
        return qmul(fueter_right(u_f, q, cfg), v_f(q)) + qmul(u_f(q), fueter_left(v_f, q, cfg))

    def boundary_side(q: np.ndarray, n: np.ndarray) -> np.ndarray:
        return qmul(qmul(u_f(q), n), v_f(q))

    lhs = volume_integral(d, volume_side, vrule)
    rhs = boundary_integral(d, boundary_side, brule)
    return CheckReport.compare(
        "green",
        lhs,
        rhs,
        tolerance,
        scale=scale,
        parameters={"domain": d.spec, "u": u_f.name, "v": v_f.name},
        node_counts={"volume": vrule.node_count, "boundary": brule.node_count},
        elapsed_seconds=time.perf_counter() - start,
    )


# ============================================================================
# KERNEL LIMITS AND INVERSE
# ============================================================================

def eps_sphere_value(p: Quaternion, f: QuaternionField, eps: float, rule: QuadratureRule) -> Quaternion:
    """int_{|q-p|=eps} E(q,p) n(q) f(q) dS with n outward from p."""
    base = p.to_array()
    return eps_sphere_integral(
        p, eps, lambda q, n: qmul(qmul(kernel_values(q, base), n), f(q)), rule
    )


def sphere_limit_check(
    p: Quaternion,
    f: QuaternionField,
    eps_list: Sequence[float],
    rule: Optional[QuadratureRule] = None,
    tolerance: float = SPHERE_LIMIT_TOLERANCE,
    floor: float = SPHERE_LIMIT_FLOOR,
) -> List[CheckReport]:
    """
    eps-sphere integrals of E n f around p, one report per eps (largest first).

    A report passes when its deviation from f(p) is below
    tolerance * max(1, |f(p)|). Each report also records whether the deviation
    sits at the floor (floor * max(1, |f(p)|)) and whether it shrank against
    the previous, larger eps; sphere_limit_summary uses both.
    """
    if len(eps_list) == 0:
        raise PreconditionError("At least one eps is required")
    rule = rule or eps_sphere_rule()
    target = f(p)
    size = max(1.0, target.norm())
    level = floor * size

    reports = []
    previous = math.inf
    for eps in sorted(eps_list, reverse=True):
        start = time.perf_counter()
        value = eps_sphere_value(p, f, eps, rule)
        report = CheckReport.compare(
            "sphere-limit",
            value,
            target,
            tolerance * size,
            absolute=True,
            parameters={"eps": eps, "point": p.to_list(), "field": f.name},
            node_counts={"eps_sphere": rule.node_count},
            elapsed_seconds=time.perf_counter() - start,
        )
        at_floor = report.abs_err < level
        report.parameters["floor"] = level
        report.parameters["at_floor"] = at_floor
        report.parameters["shrinking"] = at_floor or report.abs_err < previous
        reports.append(report)
        previous = report.abs_err
    return reports


def sphere_limit_summary(
    reports: Sequence[CheckReport],
    order_band: Tuple[float, float] = SPHERE_LIMIT_ORDER_BAND,
) -> CheckReport:
    """
    One report for a sphere-limit sweep. Passes when every eps report is
    within tolerance and either every deviation sits at the floor, or the
    deviations shrink monotonically with a log-log slope inside `order_band`.
    """
    eps = [r.parameters["eps"] for r in reports]
    deviations = [r.abs_err for r in reports]
    order, label = fit_order(eps, deviations, reports[0].parameters["floor"])
    within = all(r.passed for r in reports)
    monotone = all(r.parameters["shrinking"] for r in reports)
    in_band = order is None or (order_band[0] <= order <= order_band[1])
    last = reports[-1]
    if order is None:
        logger.debug("sphere-limit deviations are at the rounding floor")
    return CheckReport(
        check_name="sphere-limit",
        parameters={
            **{k: v for k, v in last.parameters.items() if k not in ("eps", "at_floor", "shrinking")},
            "eps": eps,
            "deviations": deviations,
            "empirical_order": label,
            "order_band": list(order_band),
            "monotone": monotone,
        },
        lhs=last.lhs,
        rhs=last.rhs,
        abs_err=last.abs_err,
        rel_err=last.rel_err,
        node_counts=last.node_counts,
        elapsed_seconds=sum(r.elapsed_seconds for r in reports),
        passed=within and monotone and in_band,
    )


def _require_interior(d: Domain, p: Quaternion):
    if not d.contains(p):
        raise PreconditionError(f"Point {p.to_list()} is not interior to the domain")


def _require_support_inside(d: Domain, phi: TestFunction):
    if not d.contains_ball(phi.center, phi.radius):
        raise PreconditionError(
            f"Support of {phi.name} (centre {phi.center.to_list()}, radius {phi.radius}) is not strictly inside the domain"
        )


def test_function_kernel_check(
    d: Domain,
    phi: TestFunction,
    p: Quaternion,
    rule: Optional[QuadratureRule] = None,
    cfg: Optional[FDConfig] = None,
    tolerance: float = 1e-3,
) -> CheckReport:
    """
    int_Omega (D_r phi)(q) E(q, p) dV_q = -phi(p), integrated with the
    singularity-centred rule around p.

    When phi(p) = 0 the tolerance is taken relative to the bump peak.
    """
    start = time.perf_counter()
    cfg = cfg or DEFAULT_FD
    _require_interior(d, p)
    _require_support_inside(d, phi)
    rule = rule or singular_volume_rule()
    base = p.to_array()

    def integrand(q: np.ndarray) -> np.ndarray:
        return qmul(fueter_right(phi.field, q, cfg), kernel_values(q, base))

    lhs = singular_volume_integral(d, p, integrand, rule)
    rhs = -phi(p)
    scale = phi.peak if rhs.norm() == 0.0 else None
    return CheckReport.compare(
        "testfn-kernel",
        lhs,
        rhs,
        tolerance,
        scale=scale,
        parameters={"domain": d.spec, "test_function": phi.name, "point": p.to_list()},
        node_counts={"singular_volume": rule.node_count},
        elapsed_seconds=time.perf_counter() - start,
    )


test_function_kernel_check.__test__ = False  # not a pytest test


def newton_potential_many(
    d: Domain,
    h: QuaternionField,
    points: np.ndarray,
    rule: Optional[QuadratureRule] = None,
) -> np.ndarray:
    """g(p) = -int_Omega E(q, p) h(q) dV_q for each row p of `points`."""
    rule = rule or singular_volume_rule()
    return -singular_volume_integral_many(
        d, points, lambda q, p: qmul(kernel_values(q, p), h(q)), rule
    )


def newton_potential(
    d: Domain,
    h: QuaternionField,
    p: Quaternion,
    rule: Optional[QuadratureRule] = None,
) -> Quaternion:
    """
    g(p) = -int_Omega E(q, p) h(q) dV_q, a weak solution of D_l g = h.

    Raises:
        PreconditionError: If p is not interior to d
    """
    _require_interior(d, p)
    return Quaternion.from_array(newton_potential_many(d, h, p.to_array()[None, :], rule)[0])


def newton_potential_field(
    d: Domain,
    h: QuaternionField,
    rule: Optional[QuadratureRule] = None,
) -> QuaternionField:
    """The Newton potential of h as a field (one singular integral per point)."""
    rule = rule or singular_volume_rule()

    def evaluate(points: np.ndarray) -> np.ndarray:
        flat = points.reshape(-1, 4)
        return newton_potential_many(d, h, flat, rule).reshape(points.shape)

    return QuaternionField(f"newton[{h.name}]", evaluate)


def cauchy_represent(
    d: Domain,
    f: QuaternionField,
    p: Quaternion,
    rule: Optional[QuadratureRule] = None,
) -> Quaternion:
    """
    int_{dOmega} E(q, p) n(q) f(q) dS_q, which equals f(p) for F-regular f.

    Raises:
        PreconditionError: If p is not interior to d
    """
    _require_interior(d, p)
    rule = rule or boundary_rule(d)
    base = p.to_array()
    return boundary_integral(
        d, lambda q, n: qmul(qmul(kernel_values(q, base), n), f(q)), rule
    )


# ============================================================================
# WEAK FORMULATIONS
# ============================================================================

def _require_real_test_function(phi: TestFunction, allow_quaternion_phi: bool):
    if not (phi.is_real or allow_quaternion_phi):
        raise PreconditionError(
            f"Test function {phi.name} has a quaternion amplitude; pass allow_quaternion_phi=True to use it"
        )


def _weak_setup(d, phi, rule, allow_quaternion_phi):
    _require_support_inside(d, phi)
    _require_real_test_function(phi, allow_quaternion_phi)
    return rule or volume_rule(phi.support, WEAK_RESOLUTION)


def _quadrature_defect(phi: TestFunction, f: QuaternionField, rule: QuadratureRule, cfg: FDConfig) -> float:
    defect = volume_integral(phi.support, lambda q: fueter_right(phi.field, q, cfg), rule).norm()
    return defect * max(1.0, f(phi.center).norm())


def weak_residual(
    d: Domain,
    f: QuaternionField,
    phi: TestFunction,
    rule: Optional[QuadratureRule] = None,
    cfg: Optional[FDConfig] = None,
    allow_quaternion_phi: bool = False,
) -> WeakResidual:
    """
    int_Omega (D_r phi) f dV, zero for weak F-regular f.

    The integrand vanishes outside supp phi, so the default rule is a polar
    rule on the support ball.
    """
    cfg = cfg or DEFAULT_FD
    rule = _weak_setup(d, phi, rule, allow_quaternion_phi)
    value = volume_integral(d, lambda q: qmul(fueter_right(phi.field, q, cfg), f(q)), rule)
    return WeakResidual(
        value=value,
        test_function=phi.name,
        estimated_quadrature_error=_quadrature_defect(phi, f, rule, cfg),
        lhs=value,
        rhs=Quaternion(0.0),
        node_count=rule.node_count,
    )


def inhomogeneous_weak_residual(
    d: Domain,
    f: QuaternionField,
    h: QuaternionField,
    phi: TestFunction,
    rule: Optional[QuadratureRule] = None,
    cfg: Optional[FDConfig] = None,
    allow_quaternion_phi: bool = False,
) -> WeakResidual:
    """int_Omega (D_r phi) f + phi h dV, zero for weak solutions of D_l f = h."""
    cfg = cfg or DEFAULT_FD
    rule = _weak_setup(d, phi, rule, allow_quaternion_phi)
    lhs = volume_integral(d, lambda q: qmul(fueter_right(phi.field, q, cfg), f(q)), rule)
    source = volume_integral(d, lambda q: qmul(phi(q), h(q)), rule)
    return WeakResidual(
        value=lhs + source,
        test_function=phi.name,
        estimated_quadrature_error=_quadrature_defect(phi, f, rule, cfg),
        lhs=lhs,
        rhs=-source,
        node_count=rule.node_count,
    )


def _require_support_off_axis(phi: TestFunction, cfg: FDConfig):
    c = phi.center
    rho_xy = math.hypot(c.x, c.y)
    r_max = c.vector.norm() + phi.radius
    if rho_xy - phi.radius <= cfg.axis_threshold * r_max:
        raise AxisProximityError(
            f"Support of {phi.name} meets the axis tube around the t + zk plane"
        )


def semiweak_cullen_residual(
    d: Domain,
    f: QuaternionField,
    phi: TestFunction,
    rule: Optional[QuadratureRule] = None,
    cfg: Optional[FDConfig] = None,
    allow_quaternion_phi: bool = False,
) -> WeakResidual:
    """
    int_Omega (D_r phi) f dV - int_Omega 2 v phi / r dV with v = (1/2) df/d(iota);
    zero for semiweak C-regular f.

    Raises:
        AxisProximityError: If supp phi comes near the t + zk plane
    """
    cfg = cfg or DEFAULT_FD
    _require_support_off_axis(phi, cfg)
    rule = _weak_setup(d, phi, rule, allow_quaternion_phi)

    def angular_term(q: np.ndarray) -> np.ndarray:
        _, r, _ = slice_arrays(q)
        return 2.0 * qmul(cullen_v(f, q, cfg), phi(q)) / r[..., None]

    lhs = volume_integral(d, lambda q: qmul(fueter_right(phi.field, q, cfg), f(q)), rule)
    rhs = volume_integral(d, angular_term, rule)
    return WeakResidual(
        value=lhs - rhs,
        test_function=phi.name,
        estimated_quadrature_error=_quadrature_defect(phi, f, rule, cfg),
        lhs=lhs,
        rhs=rhs,
        node_count=rule.node_count,
    )


def _require_domain_off_axis(d: Domain):
    if isinstance(d, Ball4):
        c = d.center
        clear = math.hypot(c.x, c.y) > d.radius
    else:
        lo, hi = d.min_corner, d.max_corner
        clear = lo.x > 0 or hi.x < 0 or lo.y > 0 or hi.y < 0
    if not clear:
        raise AxisProximityError(f"Domain {d.spec} intersects the t + zk plane")


def cullen_represent_terms(
    d: Domain,
    f: QuaternionField,
    p: Quaternion,
    srule: Optional[QuadratureRule] = None,
    brule: Optional[QuadratureRule] = None,
    cfg: Optional[FDConfig] = None,
) -> Tuple[Quaternion, Quaternion]:
    """(int_Omega E (2v/r) dV, int_{dOmega} E n f dS) for a C-regular f."""
    cfg = cfg or DEFAULT_FD
    _require_interior(d, p)
    _require_domain_off_axis(d)
    srule = srule or singular_volume_rule()
    base = p.to_array()

    def volume_side(q: np.ndarray) -> np.ndarray:
        _, r, _ = slice_arrays(q)
        return qmul(kernel_values(q, base), 2.0 * cullen_v(f, q, cfg) / r[..., None])

    volume = singular_volume_integral(d, p, volume_side, srule)
    boundary = cauchy_represent(d, f, p, brule)
    return volume, boundary


def cullen_represent(
    d: Domain,
    f: QuaternionField,
    p: Quaternion,
    srule: Optional[QuadratureRule] = None,
    brule: Optional[QuadratureRule] = None,
    cfg: Optional[FDConfig] = None,
) -> Quaternion:
    """
    f(p) = int_Omega E(q,p)(2v/r) dV + int_{dOmega} E(q,p) n(q) f(q) dS for C-regular f.

    Raises:
        AxisProximityError: If the domain meets the t + zk plane
    """
    volume, boundary = cullen_represent_terms(d, f, p, srule, brule, cfg)
    return volume + boundary


def classical_from_weak_probe(
    d: Domain,
    f: QuaternionField,
    h: Optional[QuaternionField],
    probes: Sequence[Quaternion],
    cfg: Optional[FDConfig] = None,
    tolerance: float = 1e-7,
) -> CheckReport:
    """
    max over probes of |D_l f - h| (h = 0 when omitted): the pointwise
    companion of the weak residuals for C^1 fields.
    """
    start = time.perf_counter()
    cfg = cfg or DEFAULT_FD
    if len(probes) == 0:
        raise PreconditionError("At least one probe point is required")
    for probe in probes:
        _require_interior(d, probe)

    points = np.array([p.to_list() for p in probes])
    left = fueter_left(f, points, cfg)
    target = h(points) if h is not None else np.zeros_like(points)
    residuals = qnorm(left - target)
    worst = int(np.argmax(residuals))
    return CheckReport.compare(
        "classical-probe",
        Quaternion.from_array(left[worst]),
        Quaternion.from_array(target[worst]),
        tolerance,
        absolute=True,
        parameters={
            "domain": d.spec,
            "field": f.name,
            "rhs_field": h.name if h is not None else None,
            "worst_probe": probes[worst].to_list(),
            "max_residual": float(residuals[worst]),
        },
        node_counts={"probes": len(probes)},
        elapsed_seconds=time.perf_counter() - start,
    )


def weak_report(
    check_name: str,
    residual: WeakResidual,
    tolerance: float,
    scale: float,
    parameters: Optional[dict] = None,
    elapsed_seconds: float = 0.0,
) -> CheckReport:
    """
    CheckReport for a weak residual: lhs and rhs are the two sides of the
    functional, so abs_err is |residual|; the tolerance is relative to `scale`
    (typically |int phi dV| times the size of the field).
    """
    params = dict(parameters or {})
    params.update(
        {
            "test_function": residual.test_function,
            "residual": residual.value.to_list(),
            "estimated_quadrature_error": residual.estimated_quadrature_error,
        }
    )
    return CheckReport.compare(
        check_name,
        residual.lhs if residual.lhs is not None else residual.value,
        residual.rhs if residual.rhs is not None else Quaternion(0.0),
        tolerance,
        scale=scale,
        parameters=params,
        node_counts={"volume": residual.node_count},
        elapsed_seconds=elapsed_seconds,
    )
