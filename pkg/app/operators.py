"""
Differential operators on quaternionic fields.

- left/right Fueter: D_l f = df/dt + i df/dx + j df/dy + k df/dz,
  D_r f = df/dt + (df/dx) i + (df/dy) j + (df/dz) k
- Cullen operator d/dt + iota d/dr and the angular operator d/d(iota)
- the spherical form D_l = d/dt + iota d/dr - (1/r) d/d(iota)

Derivatives come from the field's closed-form partials when available (and
`FDConfig.prefer_closed_form`), otherwise from central differences with
Richardson extrapolation. Every operator accepts a single `Quaternion`
(returns a `Quaternion`) or an array of points (returns an array).
"""
from typing import Callable, Optional, Tuple

import numpy as np

from app.errors import AxisProximityError, PreconditionError
from app.quat_core import BASIS, Quaternion, as_array, qinv, qmul, qnorm, slice_arrays
from app.schemas import FDConfig

DEFAULT_FD = FDConfig()


def _lift(q) -> Tuple[np.ndarray, bool]:
    if isinstance(q, Quaternion):
        return q.to_array()[None, :], True
    return as_array(q), False


def _lower(values: np.ndarray, scalar: bool):
    if scalar:
        return Quaternion.from_array(values[0])
    return values


def _uses_closed_form(f, cfg: FDConfig) -> bool:
    return cfg.prefer_closed_form and getattr(f, "has_partials", False)


def effective_step(points: np.ndarray, cfg: FDConfig) -> np.ndarray:
    """h = step * max(1, |q|) per point."""
    return cfg.step * np.maximum(1.0, qnorm(points))


def richardson(central: Callable[[np.ndarray], np.ndarray], h: np.ndarray, levels: int) -> np.ndarray:
    """
    Extrapolate central differences D(h), D(h/2), ... whose error expands in
    even powers of h; `levels` estimates give order 2 * levels.
    """
    table = []
    for j in range(levels):
        row = [central(h / 2 ** j)]
        for m in range(1, j + 1):
            factor = 4.0 ** m
            row.append(row[m - 1] + (row[m - 1] - table[j - 1][m - 1]) / (factor - 1.0))
        table.append(row)
    return table[-1][-1]


def directional_derivative(f, points: np.ndarray, direction, cfg: FDConfig = DEFAULT_FD) -> np.ndarray:
    """Finite-difference derivative of f along `direction` (broadcast to points)."""
    direction = np.broadcast_to(as_array(direction), points.shape)

    def central(step: np.ndarray) -> np.ndarray:
        hs = step[..., None]
        return (f(points + hs * direction) - f(points - hs * direction)) / (2.0 * hs)

    return richardson(central, effective_step(points, cfg), cfg.richardson_levels)


def partial_derivatives(f, q, cfg: FDConfig = DEFAULT_FD) -> np.ndarray:
    """All four partials, shape (..., 4, 4) with [..., k, :] = df/dx_k."""
    points = as_array(q)
    if _uses_closed_form(f, cfg):
        return f.partials(points)
    return np.stack([directional_derivative(f, points, BASIS[k], cfg) for k in range(4)], axis=-2)


def partial_derivative(f, q, axis: int, cfg: FDConfig = DEFAULT_FD) -> np.ndarray:
    """Single partial df/dx_axis, shape (..., 4)."""
    points = as_array(q)
    if _uses_closed_form(f, cfg):
        return f.partials(points)[..., axis, :]
    return directional_derivative(f, points, BASIS[axis], cfg)


def fueter_left(f, q, cfg: Optional[FDConfig] = None):
    cfg = cfg or DEFAULT_FD
    points, scalar = _lift(q)
    P = partial_derivatives(f, points, cfg)
    out = np.array(P[..., 0, :], dtype=float)
    for k in range(1, 4):
        out += qmul(np.broadcast_to(BASIS[k], points.shape), P[..., k, :])
    return _lower(out, scalar)


def fueter_right(f, q, cfg: Optional[FDConfig] = None):
    cfg = cfg or DEFAULT_FD
    points, scalar = _lift(q)
    P = partial_derivatives(f, points, cfg)
    out = np.array(P[..., 0, :], dtype=float)
    for k in range(1, 4):
        out += qmul(P[..., k, :], np.broadcast_to(BASIS[k], points.shape))
    return _lower(out, scalar)


def _require_off_axis(points: np.ndarray, r: np.ndarray, cfg: FDConfig):
    if np.any(r <= cfg.radial_tolerance):
        bad = points[np.argmax(r <= cfg.radial_tolerance)]
        raise PreconditionError(f"Degenerate slice (r ~ 0) at {bad.tolist()}")


def cullen(f, q, cfg: Optional[FDConfig] = None):
    """(d/dt + iota d/dr) f, with d/dr the radial derivative at fixed iota."""
    cfg = cfg or DEFAULT_FD
    points, scalar = _lift(q)
    _, r, iota = slice_arrays(points)
    _require_off_axis(points, r, cfg)

    if _uses_closed_form(f, cfg):
        P = f.partials(points)
        dt = P[..., 0, :]
        dr = np.einsum("...k,...kc->...c", iota, P)
    else:
        dt = directional_derivative(f, points, BASIS[0], cfg)
        dr = directional_derivative(f, points, iota, cfg)
    return _lower(dt + qmul(iota, dr), scalar)


def angular_frame(points: np.ndarray, cfg: FDConfig = DEFAULT_FD):
    """
    (t, r, alpha, beta, iota_alpha, iota_beta) for off-axis points.

    Raises:
        PreconditionError: If r ~ 0
        AxisProximityError: If x^2 + y^2 < (axis_threshold * r)^2
    """
    t, r, _ = slice_arrays(points)
    _require_off_axis(points, r, cfg)
    rho2 = points[..., 1] ** 2 + points[..., 2] ** 2
    near_axis = rho2 < (cfg.axis_threshold * r) ** 2
    if np.any(near_axis):
        bad = points[np.argmax(near_axis)]
        raise AxisProximityError(f"Point {bad.tolist()} is too close to the t + zk plane for d/d(iota)")

    alpha = np.arctan2(points[..., 2], points[..., 1])
    beta = np.arccos(np.clip(points[..., 3] / r, -1.0, 1.0))
    zero = np.zeros_like(alpha)
    iota_alpha = np.stack((zero, -np.sin(alpha) * np.sin(beta), np.cos(alpha) * np.sin(beta), zero), axis=-1)
    iota_beta = np.stack(
        (zero, np.cos(alpha) * np.cos(beta), np.sin(alpha) * np.cos(beta), -np.sin(beta)), axis=-1
    )
    return t, r, alpha, beta, iota_alpha, iota_beta


def _iota_array(alpha: np.ndarray, beta: np.ndarray) -> np.ndarray:
    zero = np.zeros_like(alpha)
    return np.stack(
        (zero, np.cos(alpha) * np.sin(beta), np.sin(alpha) * np.sin(beta), np.cos(beta)), axis=-1
    )


def d_iota(f, q, cfg: Optional[FDConfig] = None):
    """
    d f / d(iota) = (iota_alpha)^-1 df/dalpha + (iota_beta)^-1 df/dbeta at fixed (t, r).
    """
    cfg = cfg or DEFAULT_FD
    points, scalar = _lift(q)
    t, r, alpha, beta, iota_alpha, iota_beta = angular_frame(points, cfg)

    if _uses_closed_form(f, cfg):
        # dq/dalpha = r iota_alpha, dq/dbeta = r iota_beta
        P = f.partials(points)
        d_alpha = r[..., None] * np.einsum("...k,...kc->...c", iota_alpha, P)
        d_beta = r[..., None] * np.einsum("...k,...kc->...c", iota_beta, P)
    else:
        h = effective_step(points, cfg)

        def at(a: np.ndarray, b: np.ndarray) -> np.ndarray:
            moved = r[..., None] * _iota_array(a, b)
            moved[..., 0] = t
            return f(moved)

        d_alpha = richardson(
            lambda s: (at(alpha + s, beta) - at(alpha - s, beta)) / (2.0 * s[..., None]),
            h,
            cfg.richardson_levels,
        )
        d_beta = richardson(
            lambda s: (at(alpha, beta + s) - at(alpha, beta - s)) / (2.0 * s[..., None]),
            h,
            cfg.richardson_levels,
        )

    out = qmul(qinv(iota_alpha), d_alpha) + qmul(qinv(iota_beta), d_beta)
    return _lower(out, scalar)


def fueter_left_spherical(f, q, cfg: Optional[FDConfig] = None):
    """D_l in slice coordinates: Cullen(f) - (1/r) d f / d(iota)."""
    cfg = cfg or DEFAULT_FD
    points, scalar = _lift(q)
    _, r, _ = slice_arrays(points)
    out = cullen(f, points, cfg) - d_iota(f, points, cfg) / r[..., None]
    return _lower(out, scalar)


def cullen_v(f, q, cfg: Optional[FDConfig] = None):
    """v = (1/2) d f / d(iota)."""
    cfg = cfg or DEFAULT_FD
    points, scalar = _lift(q)
    return _lower(0.5 * d_iota(f, points, cfg), scalar)
