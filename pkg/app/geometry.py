"""
Bounded 4D domains and the quadrature rules used to integrate over them.

Provides:
- `Ball4` / `Box4` domains with membership tests, outward normals and ray exit distances
- product Gauss-Legendre rules for volumes, boundaries and eps-spheres
- a singularity-centred rule for integrands growing like |q - p|^-3

Fields are evaluated on arrays of nodes (last axis = [w, x, y, z]) in chunks of
`CHUNK_SIZE`; partial sums are accumulated in a fixed order so results are
deterministic for a fixed rule.
"""
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger

from app import config
from app.errors import ConfigError, NumericalEvaluationError, PreconditionError
from app.quat_core import Quaternion, as_array, norm

SPHERE_AREA = 2.0 * math.pi ** 2
UNIT_BALL_VOLUME = math.pi ** 2 / 2.0

CHUNK_SIZE = 1 << 16

# Relative tolerance separating interior points from boundary points.
BOUNDARY_TOL = 1e-12

ArrayField = Callable[[np.ndarray], np.ndarray]
BoundaryIntegrand = Callable[[np.ndarray, np.ndarray], np.ndarray]
PairIntegrand = Callable[[np.ndarray, np.ndarray], np.ndarray]


# ============================================================================
# DOMAINS
# ============================================================================

@dataclass(frozen=True)
class Ball4:
    """Open 4-ball |q - center| < radius."""
    center: Quaternion
    radius: float

    def __post_init__(self):
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise PreconditionError(f"Ball4 radius must be positive, got {self.radius}")

    @property
    def spec(self) -> str:
        return "ball:" + ",".join(repr(v) for v in (*self.center, self.radius))

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius

    @property
    def measure(self) -> float:
        return UNIT_BALL_VOLUME * self.radius ** 4

    @property
    def boundary_measure(self) -> float:
        return SPHERE_AREA * self.radius ** 3

    def contains(self, p: Quaternion) -> bool:
        return norm(p - self.center) < self.radius * (1.0 - BOUNDARY_TOL)

    def on_boundary(self, p: Quaternion) -> bool:
        return abs(norm(p - self.center) - self.radius) <= BOUNDARY_TOL * self.radius

    def distance_to_boundary(self, p: Quaternion) -> float:
        return self.radius - norm(p - self.center)

    def outward_normal(self, points: np.ndarray) -> np.ndarray:
        offset = points - self.center.to_array()
        return offset / np.linalg.norm(offset, axis=-1, keepdims=True)

    def exit_distance(self, p: np.ndarray, directions: np.ndarray) -> np.ndarray:
        """Distance s > 0 at which p + s*direction leaves the ball (p interior)."""
        d = p - self.center.to_array()
        b = directions @ d
        c = d @ d - self.radius ** 2
        return -b + np.sqrt(b * b - c)

    def contains_ball(self, center: Quaternion, radius: float) -> bool:
        return norm(center - self.center) + radius < self.radius


@dataclass(frozen=True)
class Box4:
    """Open axis-aligned 4-box min_corner < q < max_corner."""
    min_corner: Quaternion
    max_corner: Quaternion

    def __post_init__(self):
        if not np.all(self.max_corner.to_array() > self.min_corner.to_array()):
            raise PreconditionError(
                f"Box4 needs min_corner < max_corner componentwise, got {self.min_corner} / {self.max_corner}"
            )

    @property
    def spec(self) -> str:
        return "box:" + ",".join(repr(v) for v in (*self.min_corner, *self.max_corner))

    @property
    def _lo(self) -> np.ndarray:
        return self.min_corner.to_array()

    @property
    def _hi(self) -> np.ndarray:
        return self.max_corner.to_array()

    @property
    def extents(self) -> np.ndarray:
        return self._hi - self._lo

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.extents))

    @property
    def measure(self) -> float:
        return float(np.prod(self.extents))

    @property
    def boundary_measure(self) -> float:
        ext = self.extents
        return float(sum(2.0 * np.prod(np.delete(ext, k)) for k in range(4)))

    def contains(self, p: Quaternion) -> bool:
        q = p.to_array()
        margin = BOUNDARY_TOL * self.extents
        return bool(np.all(q > self._lo + margin) and np.all(q < self._hi - margin))

    def on_boundary(self, p: Quaternion) -> bool:
        q = p.to_array()
        margin = BOUNDARY_TOL * self.extents
        inside_closed = np.all(q >= self._lo - margin) and np.all(q <= self._hi + margin)
        touching = np.any(np.abs(q - self._lo) <= margin) or np.any(np.abs(q - self._hi) <= margin)
        return bool(inside_closed and touching)

    def distance_to_boundary(self, p: Quaternion) -> float:
        q = p.to_array()
        return float(np.min(np.minimum(q - self._lo, self._hi - q)))

    def outward_normal(self, points: np.ndarray) -> np.ndarray:
        """Normal of the nearest face (well defined away from edges)."""
        gaps = np.concatenate((points - self._lo, self._hi - points), axis=-1)
        face = np.argmin(np.abs(gaps), axis=-1)
        normals = np.zeros_like(points, dtype=float)
        axis = face % 4
        sign = np.where(face < 4, -1.0, 1.0)
        np.put_along_axis(normals, axis[..., None], sign[..., None], axis=-1)
        return normals

    def exit_distance(self, p: np.ndarray, directions: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            to_hi = np.where(directions > 0, (self._hi - p) / directions, np.inf)
            to_lo = np.where(directions < 0, (self._lo - p) / directions, np.inf)
        return np.min(np.minimum(to_hi, to_lo), axis=-1)

    def contains_ball(self, center: Quaternion, radius: float) -> bool:
        c = center.to_array()
        return bool(np.all(c - radius > self._lo) and np.all(c + radius < self._hi))


Domain = Union[Ball4, Box4]


def parse_domain(spec: str) -> Domain:
    """
    Parse 'ball:w,x,y,z,R' or 'box:w0,x0,y0,z0,w1,x1,y1,z1'.

    Raises:
        ConfigError: If the domain string is malformed
    """
    kind, _, rest = spec.strip().partition(":")
    try:
        values = [float(v) for v in rest.split(",")] if rest else []
    except ValueError:
        raise ConfigError(f"Invalid number in domain spec {spec!r}")

    kind = kind.lower()
    try:
        if kind == "ball" and len(values) == 5:
            return Ball4(Quaternion(*values[:4]), values[4])
        if kind == "box" and len(values) == 8:
            return Box4(Quaternion(*values[:4]), Quaternion(*values[4:]))
    except PreconditionError as e:
        raise ConfigError(f"Invalid domain {spec!r}: {e}")
    raise ConfigError(
        f"Invalid domain spec {spec!r}; expected 'ball:w,x,y,z,R' or 'box:w0,x0,y0,z0,w1,x1,y1,z1'"
    )


# ============================================================================
# QUADRATURE RULES
# ============================================================================

class RuleKind(str, Enum):
    VOLUME = "volume"
    BOUNDARY = "boundary"
    EPS_SPHERE = "eps_sphere"
    SINGULAR_VOLUME = "singular_volume"


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """
    Nodes and positive weights of one rule.

    For `eps_sphere` and `singular_volume` rules the nodes are unit directions on
    S^3 and the weights are the surface element of the unit 3-sphere; the
    integrators place them around the requested centre.
    """
    kind: RuleKind
    resolution: Tuple[int, ...]
    nodes: np.ndarray
    weights: np.ndarray
    normals: Optional[np.ndarray] = None
    radial_nodes: int = 0

    @property
    def node_count(self) -> int:
        if self.kind is RuleKind.SINGULAR_VOLUME:
            return 2 * self.radial_nodes * len(self.weights)
        return len(self.weights)

    @property
    def total_weight(self) -> float:
        return float(np.sum(self.weights))


def gauss_legendre(n: int, a: float, b: float) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [a, b]."""
    if n < 1:
        raise PreconditionError(f"Quadrature needs at least one node, got {n}")
    x, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def sphere_directions(n_psi: int, n_theta: int, n_phi: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Product rule on the unit 3-sphere in hyperspherical angles.

    Gauss-Legendre in psi, theta (absorbing sin^2 psi and sin theta) and the
    uniform periodic rule in phi. Weights sum to 2*pi^2.
    """
    if n_phi < 1:
        raise PreconditionError(f"Quadrature needs at least one node, got {n_phi}")
    psi, w_psi = gauss_legendre(n_psi, 0.0, math.pi)
    theta, w_theta = gauss_legendre(n_theta, 0.0, math.pi)
    phi = 2.0 * math.pi * np.arange(n_phi) / n_phi
    w_phi = np.full(n_phi, 2.0 * math.pi / n_phi)

    w_psi = w_psi * np.sin(psi) ** 2
    w_theta = w_theta * np.sin(theta)

    P, T, F = np.meshgrid(psi, theta, phi, indexing="ij")
    directions = np.stack(
        (
            np.cos(P),
            np.sin(P) * np.cos(T),
            np.sin(P) * np.sin(T) * np.cos(F),
            np.sin(P) * np.sin(T) * np.sin(F),
        ),
        axis=-1,
    ).reshape(-1, 4)
    weights = (w_psi[:, None, None] * w_theta[None, :, None] * w_phi[None, None, :]).reshape(-1)
    return directions, weights


def _angular_resolution(resolution, default: Tuple[int, int, int]) -> Tuple[int, int, int]:
    if resolution is None:
        return tuple(default)
    if isinstance(resolution, int):
        return (resolution, resolution, 2 * resolution)
    values = tuple(int(v) for v in resolution)
    if len(values) != 3:
        raise ConfigError(f"Angular resolution needs (n_psi, n_theta, n_phi), got {resolution}")
    return values


def volume_rule(domain: Domain, resolution: Union[int, Sequence[int], None] = None) -> QuadratureRule:
    """
    Volume rule for a domain.

    Ball4: polar about the centre, Gauss-Legendre radial nodes (weight r^3) times
    sphere directions; an int n means (n_r, n_psi, n_theta, n_phi) = (n, n, n, 2n).
    Box4: tensor Gauss-Legendre with n nodes per coordinate.

    Args:
        domain: Ball4 or Box4
        resolution: Node count scale or explicit per-coordinate counts

    Returns:
        QuadratureRule of kind volume
    """
    if resolution is None:
        resolution = config.get_volume_resolution()

    if isinstance(domain, Ball4):
        if isinstance(resolution, int):
            res = (resolution, resolution, resolution, 2 * resolution)
        else:
            res = tuple(int(v) for v in resolution)
            if len(res) != 4:
                raise ConfigError(f"Ball volume resolution needs (n_r, n_psi, n_theta, n_phi), got {resolution}")
        r, w_r = gauss_legendre(res[0], 0.0, domain.radius)
        directions, w_dir = sphere_directions(*res[1:])
        nodes = domain.center.to_array() + (r[:, None, None] * directions[None, :, :]).reshape(-1, 4)
        weights = ((w_r * r ** 3)[:, None] * w_dir[None, :]).reshape(-1)
        return QuadratureRule(RuleKind.VOLUME, res, nodes, weights)

    res = (resolution,) * 4 if isinstance(resolution, int) else tuple(int(v) for v in resolution)
    if len(res) != 4:
        raise ConfigError(f"Box volume resolution needs four counts, got {resolution}")
    lo, hi = domain.min_corner.to_array(), domain.max_corner.to_array()
    axes = [gauss_legendre(res[k], lo[k], hi[k]) for k in range(4)]
    grids = np.meshgrid(*(a[0] for a in axes), indexing="ij")
    wgrids = np.meshgrid(*(a[1] for a in axes), indexing="ij")
    nodes = np.stack([g.reshape(-1) for g in grids], axis=-1)
    weights = np.prod(np.stack([g.reshape(-1) for g in wgrids], axis=-1), axis=-1)
    return QuadratureRule(RuleKind.VOLUME, res, nodes, weights)


def boundary_rule(domain: Domain, resolution: Union[int, Sequence[int], None] = None) -> QuadratureRule:
    """
    Boundary hypersurface rule with outward unit normals.

    Ball4: sphere directions scaled by the radius (weights R^3 dmu).
    Box4: the 8 faces, each a 3D product Gauss-Legendre rule with n nodes per
    coordinate (n = first entry of the resolution).
    """
    if isinstance(domain, Ball4):
        res = _angular_resolution(resolution, config.get_boundary_resolution())
        directions, w_dir = sphere_directions(*res)
        nodes = domain.center.to_array() + domain.radius * directions
        weights = domain.radius ** 3 * w_dir
        return QuadratureRule(RuleKind.BOUNDARY, res, nodes, weights, normals=directions)

    if resolution is None:
        n = config.get_boundary_resolution()[0]
    elif isinstance(resolution, int):
        n = resolution
    else:
        n = int(tuple(resolution)[0])
    lo, hi = domain.min_corner.to_array(), domain.max_corner.to_array()
    all_nodes, all_weights, all_normals = [], [], []
    for axis in range(4):
        others = [k for k in range(4) if k != axis]
        rules = [gauss_legendre(n, lo[k], hi[k]) for k in others]
        grids = np.meshgrid(*(r[0] for r in rules), indexing="ij")
        wgrids = np.meshgrid(*(r[1] for r in rules), indexing="ij")
        face_w = (wgrids[0] * wgrids[1] * wgrids[2]).reshape(-1)
        for bound, sign in ((lo[axis], -1.0), (hi[axis], 1.0)):
            pts = np.empty((face_w.size, 4))
            pts[:, axis] = bound
            for k, g in zip(others, grids):
                pts[:, k] = g.reshape(-1)
            normal = np.zeros((face_w.size, 4))
            normal[:, axis] = sign
            all_nodes.append(pts)
            all_weights.append(face_w)
            all_normals.append(normal)
    return QuadratureRule(
        RuleKind.BOUNDARY,
        (n, n, n),
        np.concatenate(all_nodes),
        np.concatenate(all_weights),
        normals=np.concatenate(all_normals),
    )


def eps_sphere_rule(resolution: Union[int, Sequence[int], None] = None) -> QuadratureRule:
    res = _angular_resolution(resolution, config.get_sphere_resolution())
    directions, weights = sphere_directions(*res)
    return QuadratureRule(RuleKind.EPS_SPHERE, res, directions, weights, normals=directions)


def singular_volume_rule(
    radial: Optional[int] = None,
    angular: Union[int, Sequence[int], None] = None,
) -> QuadratureRule:
    """
    Singularity-centred rule: sphere directions plus `radial` Gauss-Legendre
    nodes on each of the two radial segments [0, rho0] and [rho0, S(omega)].
    """
    n_r = config.get_singular_radial() if radial is None else int(radial)
    if n_r < 1:
        raise PreconditionError(f"Quadrature needs at least one radial node, got {n_r}")
    res = _angular_resolution(angular, config.get_sphere_resolution())
    directions, weights = sphere_directions(*res)
    return QuadratureRule(
        RuleKind.SINGULAR_VOLUME, (n_r, *res), directions, weights, normals=directions, radial_nodes=n_r
    )


# ============================================================================
# INTEGRATION
# ============================================================================

def _require_kind(rule: QuadratureRule, kind: RuleKind):
    if rule.kind is not kind:
        raise PreconditionError(f"Expected a {kind.value} rule, got {rule.kind.value}")


def _checked(values: np.ndarray, nodes: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.shape != nodes.shape:
        values = np.broadcast_to(values, nodes.shape)
    finite = np.all(np.isfinite(values), axis=-1)
    if not np.all(finite):
        bad = nodes[np.argmin(finite)]
        raise NumericalEvaluationError(f"Non-finite field value at node {bad.tolist()}")
    return values


def _weighted_sum(
    evaluate: Callable[[int, int], np.ndarray],
    nodes: np.ndarray,
    weights: np.ndarray,
) -> np.ndarray:
    total = np.zeros(4)
    for start in range(0, len(weights), CHUNK_SIZE):
        stop = min(start + CHUNK_SIZE, len(weights))
        values = _checked(evaluate(start, stop), nodes[start:stop])
        total += weights[start:stop] @ values
    return total


def _nodes_within(d: Domain, nodes: np.ndarray) -> bool:
    if isinstance(d, Ball4):
        return bool(np.all(np.linalg.norm(nodes - d.center.to_array(), axis=-1) <= d.radius * (1.0 + BOUNDARY_TOL)))
    margin = BOUNDARY_TOL * d.extents
    return bool(np.all(nodes >= d.min_corner.to_array() - margin) and np.all(nodes <= d.max_corner.to_array() + margin))


def volume_integral(d: Domain, f: ArrayField, rule: QuadratureRule) -> Quaternion:
    """
    Sum of weight * f(node) over a volume rule whose nodes lie in `d` (a rule
    on a sub-region such as a bump support is fine).

    Raises:
        PreconditionError: If the rule is not a volume rule or has nodes outside d
    """
    _require_kind(rule, RuleKind.VOLUME)
    if not _nodes_within(d, rule.nodes):
        raise PreconditionError(f"Volume rule has nodes outside {d.spec}")
    total = _weighted_sum(lambda a, b: f(rule.nodes[a:b]), rule.nodes, rule.weights)
    return Quaternion.from_array(total)


def boundary_integral(d: Domain, g: BoundaryIntegrand, rule: QuadratureRule) -> Quaternion:
    """Sum of weight * g(node, outward_normal(node)) over a boundary rule built for `d`."""
    _require_kind(rule, RuleKind.BOUNDARY)
    total = _weighted_sum(
        lambda a, b: g(rule.nodes[a:b], rule.normals[a:b]), rule.nodes, rule.weights
    )
    return Quaternion.from_array(total)


def eps_sphere_integral(
    center: Quaternion,
    eps: float,
    g: BoundaryIntegrand,
    rule: QuadratureRule,
) -> Quaternion:
    """
    Surface integral over |q - center| = eps with normals pointing outward from
    the centre; measure eps^3 sin^2(psi) sin(theta) dpsi dtheta dphi.
    """
    _require_kind(rule, RuleKind.EPS_SPHERE)
    if not eps > 0:
        raise PreconditionError(f"eps must be positive, got {eps}")
    nodes = as_array(center) + eps * rule.nodes
    weights = eps ** 3 * rule.weights
    total = _weighted_sum(lambda a, b: g(nodes[a:b], rule.normals[a:b]), nodes, weights)
    return Quaternion.from_array(total)


def singular_split_radius(d: Domain, p: Quaternion) -> float:
    """rho0 = min(0.5 * dist(p, boundary), 0.25 * diameter)."""
    return min(0.5 * d.distance_to_boundary(p), 0.25 * d.diameter)


def singular_volume_integral_many(
    d: Domain,
    points: np.ndarray,
    integrand: PairIntegrand,
    rule: QuadratureRule,
) -> np.ndarray:
    """
    Weakly singular volume integrals for several evaluation points.

    For each p the domain is split into B(p, rho0) and the rest; both parts are
    parametrised radially from p (Ball4 and Box4 are convex, so every ray
    p + s*omega leaves the domain exactly once, at S(omega)). The Jacobian s^3
    cancels |q - p|^-3 growth.

    Args:
        d: Domain
        points: (P, 4) evaluation points, all interior
        integrand: Callable (q_nodes (M, 4), p (4,)) -> (M, 4)
        rule: singular_volume rule

    Returns:
        (P, 4) array of integrals

    Raises:
        PreconditionError: If a point is not interior to d
    """
    _require_kind(rule, RuleKind.SINGULAR_VOLUME)
    points = np.atleast_2d(as_array(points))
    directions, w_dir = rule.nodes, rule.weights
    x, w = np.polynomial.legendre.leggauss(rule.radial_nodes)
    u = 0.5 * (x + 1.0)
    w_u = 0.5 * w
    per_direction = 2 * rule.radial_nodes
    dir_chunk = max(1, CHUNK_SIZE // per_direction)

    results = np.zeros((len(points), 4))
    for i, p in enumerate(points):
        pq = Quaternion.from_array(p)
        if not d.contains(pq):
            raise PreconditionError(f"Singular integration point {p.tolist()} is not interior to the domain")
        rho0 = singular_split_radius(d, pq)
        exit_s = d.exit_distance(p, directions)
        if i == 0:
            logger.debug(f"singular split radius {rho0:.4g} at p={p.tolist()} ({len(points)} points, {rule.node_count} nodes each)")

        total = np.zeros(4)
        for start in range(0, len(w_dir), dir_chunk):
            stop = min(start + dir_chunk, len(w_dir))
            span = (exit_s[start:stop] - rho0)[:, None]
            s_in = np.broadcast_to(rho0 * u, (stop - start, rule.radial_nodes))
            s_out = rho0 + span * u[None, :]
            s = np.concatenate((s_in, s_out), axis=1)
            ws = np.concatenate(
                (np.broadcast_to(rho0 * w_u, s_in.shape), span * w_u[None, :]), axis=1
            )
            ws = ws * s ** 3 * w_dir[start:stop, None]
            nodes = (p + s[..., None] * directions[start:stop, None, :]).reshape(-1, 4)
            values = _checked(integrand(nodes, p), nodes)
            total += ws.reshape(-1) @ values
        results[i] = total
    return results


def singular_volume_integral(
    d: Domain,
    p: Quaternion,
    f: ArrayField,
    rule: QuadratureRule,
) -> Quaternion:
    """Volume integral of f over d for f allowed to blow up like |q - p|^-3 at p."""
    values = singular_volume_integral_many(d, p.to_array()[None, :], lambda q, _p: f(q), rule)
    return Quaternion.from_array(values[0])
