"""
Reference quaternionic fields and smooth compactly supported test functions.

Every field evaluates on arrays whose last axis is [w, x, y, z] (any leading
shape). Closed-form partials, when present, return an array with an extra axis
before the components: partials(q)[..., k, :] = df/d(t, x, y, z)_k.
"""
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from app.errors import CoincidentPointsError, ConfigError, PreconditionError
from app.geometry import Ball4, SPHERE_AREA, gauss_legendre
from app.quat_core import BASIS, Quaternion, as_array, qconj, qmul, qnorm2, slice_arrays

Evaluator = Callable[[np.ndarray], np.ndarray]

TWO_PI_SQUARED = 2.0 * math.pi ** 2


class QuaternionField:
    """
    A function H -> H, optionally carrying closed-form partial derivatives.
    """

    def __init__(
        self,
        name: str,
        evaluate: Evaluator,
        partials: Optional[Evaluator] = None,
        real_valued: bool = False,
    ):
        """
        Args:
            name: Descriptive name (also the CLI spelling where one exists)
            evaluate: Vectorised evaluation on (..., 4) arrays
            partials: Optional vectorised closed-form partials (..., 4, 4)
            real_valued: True when every value has zero imaginary part
        """
        self.name = name
        self._evaluate = evaluate
        self._partials = partials
        self.real_valued = real_valued

    def __repr__(self) -> str:
        return f"QuaternionField({self.name!r})"

    def __call__(self, q):
        if isinstance(q, Quaternion):
            return Quaternion.from_array(self._evaluate(q.to_array()))
        points = as_array(q)
        return np.broadcast_to(self._evaluate(points), points.shape)

    @property
    def has_partials(self) -> bool:
        return self._partials is not None

    def partials(self, points: np.ndarray) -> np.ndarray:
        if self._partials is None:
            raise PreconditionError(f"Field {self.name!r} has no closed-form partials")
        points = as_array(points)
        return np.broadcast_to(self._partials(points), points.shape[:-1] + (4, 4))

    def __add__(self, other: "QuaternionField") -> "QuaternionField":
        partials = None
        if self.has_partials and other.has_partials:
            partials = lambda q: self.partials(q) + other.partials(q)
        return QuaternionField(
            f"({self.name}+{other.name})",
            lambda q: self(q) + other(q),
            partials,
            real_valued=self.real_valued and other.real_valued,
        )

    def scaled(self, factor: float) -> "QuaternionField":
        """Real multiple factor * f."""
        factor = float(factor)
        partials = (lambda q: factor * self.partials(q)) if self.has_partials else None
        return QuaternionField(f"{factor!r}*{self.name}", lambda q: factor * self(q), partials, self.real_valued)


@dataclass(frozen=True)
class TestFunction:
    """Mollifier bump amplitude * exp(-1 / (1 - s^2)), s = |q - center| / radius."""
    __test__ = False  # not a pytest class

    field: QuaternionField
    center: Quaternion
    radius: float
    amplitude: Quaternion

    @property
    def name(self) -> str:
        return self.field.name

    @property
    def support(self) -> Ball4:
        return Ball4(self.center, self.radius)

    @property
    def is_real(self) -> bool:
        a = self.amplitude
        return a.x == 0.0 and a.y == 0.0 and a.z == 0.0

    @property
    def peak(self) -> float:
        return self.amplitude.norm() * math.exp(-1.0)

    def __call__(self, q):
        return self.field(q)

    def integral(self, radial_nodes: int = 200) -> Quaternion:
        """
        Integral of phi over its support by a 1D radial rule times 2*pi^2;
        independent of the volume rules used by the identity checks.
        """
        s, w = gauss_legendre(radial_nodes, 0.0, 1.0)
        profile = np.exp(-1.0 / (1.0 - s * s))
        radial = float(np.sum(w * profile * s ** 3)) * self.radius ** 4
        return self.amplitude * (SPHERE_AREA * radial)


# ============================================================================
# FACTORIES
# ============================================================================

def make_constant(c: Quaternion) -> QuaternionField:
    value = c.to_array()
    return QuaternionField(
        f"const:{','.join(repr(v) for v in c)}",
        lambda q: np.broadcast_to(value, q.shape).copy(),
        lambda q: np.zeros(q.shape[:-1] + (4, 4)),
        real_valued=(c.x == 0.0 and c.y == 0.0 and c.z == 0.0),
    )


def make_identity() -> QuaternionField:
    return QuaternionField(
        "identity",
        lambda q: np.array(q, dtype=float),
        lambda q: np.broadcast_to(BASIS, q.shape[:-1] + (4, 4)).copy(),
    )


def make_conjugate() -> QuaternionField:
    conj_basis = qconj(BASIS)
    return QuaternionField(
        "conj",
        qconj,
        lambda q: np.broadcast_to(conj_basis, q.shape[:-1] + (4, 4)).copy(),
    )


def _powers(q: np.ndarray, n: int):
    powers = [np.broadcast_to(BASIS[0], q.shape).copy()]
    for _ in range(n):
        powers.append(qmul(powers[-1], q))
    return powers


def make_power(n: int) -> QuaternionField:
    """
    q^n by repeated multiplication; partials from the product rule
    d(q^n)/dx_k = sum_m q^m e_k q^(n-1-m).
    """
    if n < 0:
        raise PreconditionError(f"Power must be non-negative, got {n}")

    def evaluate(q: np.ndarray) -> np.ndarray:
        return _powers(q, n)[n]

    def partials(q: np.ndarray) -> np.ndarray:
        out = np.zeros(q.shape[:-1] + (4, 4))
        if n == 0:
            return out
        powers = _powers(q, n - 1)
        for k in range(4):
            e_k = np.broadcast_to(BASIS[k], q.shape)
            for m in range(n):
                out[..., k, :] += qmul(qmul(powers[m], e_k), powers[n - 1 - m])
        return out

    return QuaternionField(f"power:{n}", evaluate, partials, real_valued=(n == 0))


def kernel_values(q: np.ndarray, p: np.ndarray) -> np.ndarray:
    """
    E(q, p) = conj(q - p) / (2 pi^2 |q - p|^4), vectorised.

    Raises:
        CoincidentPointsError: If any q equals p
    """
    d = q - p
    n2 = qnorm2(d)
    if np.any(n2 == 0.0):
        raise CoincidentPointsError("Kernel E(q, p) is undefined at q = p")
    return qconj(d) / (TWO_PI_SQUARED * n2 * n2)[..., None]


def kernel_partials(q: np.ndarray, p: np.ndarray) -> np.ndarray:
    """dE/dx_k = (conj(e_k) / |d|^4 - 4 d_k conj(d) / |d|^6) / (2 pi^2)."""
    d = q - p
    n2 = qnorm2(d)
    if np.any(n2 == 0.0):
        raise CoincidentPointsError("Kernel E(q, p) is undefined at q = p")
    conj_d = qconj(d)
    conj_basis = qconj(BASIS)
    out = np.empty(d.shape[:-1] + (4, 4))
    for k in range(4):
        out[..., k, :] = (
            conj_basis[k] / (n2 * n2)[..., None]
            - 4.0 * (d[..., k] / n2 ** 3)[..., None] * conj_d
        )
    return out / TWO_PI_SQUARED


def make_kernel_section(p0: Quaternion) -> QuaternionField:
    """q -> E(q, p0), left and right F-regular away from p0."""
    base = p0.to_array()
    return QuaternionField(
        f"kernel:{','.join(repr(v) for v in p0)}",
        lambda q: kernel_values(q, base),
        lambda q: kernel_partials(q, base),
    )


def make_iota() -> QuaternionField:
    """q -> iota(q), the unit direction of the imaginary part (k on the real axis)."""

    def evaluate(q: np.ndarray) -> np.ndarray:
        return slice_arrays(q)[2]

    return QuaternionField("iota", evaluate)


def make_bump(center: Quaternion, radius: float, amplitude: Quaternion = Quaternion(1.0)) -> TestFunction:
    """
    Mollifier test function with closed-form gradient.

    phi(q) = amplitude * exp(-1 / (1 - s^2)) for s = |q - center| / radius < 1, else 0.
    """
    if not radius > 0:
        raise PreconditionError(f"Bump radius must be positive, got {radius}")
    c = center.to_array()
    a = amplitude.to_array()

    def profile(q: np.ndarray):
        u = qnorm2(q - c) / radius ** 2
        inside = u < 1.0
        gap = np.where(inside, 1.0 - u, 1.0)
        value = np.where(inside, np.exp(-1.0 / gap), 0.0)
        return u, inside, gap, value

    def evaluate(q: np.ndarray) -> np.ndarray:
        _, _, _, value = profile(q)
        return value[..., None] * a

    def partials(q: np.ndarray) -> np.ndarray:
        _, inside, gap, value = profile(q)
        # d/dx_k exp(-1/(1-u)) = -exp(-1/(1-u)) / (1-u)^2 * 2 (q-c)_k / R^2
        factor = np.where(inside, -2.0 * value / (gap * gap * radius ** 2), 0.0)
        grad = factor[..., None] * (q - c)
        return grad[..., :, None] * a

    field = QuaternionField(
        f"bump:{','.join(repr(v) for v in center)},{radius!r}",
        evaluate,
        partials,
        real_valued=(amplitude.x == 0.0 and amplitude.y == 0.0 and amplitude.z == 0.0),
    )
    return TestFunction(field=field, center=center, radius=float(radius), amplitude=amplitude)


# ============================================================================
# NAME PARSING
# ============================================================================

def _numbers(text: str, spec: str, count: Optional[int] = None):
    try:
        values = [float(v) for v in text.split(",")] if text else []
    except ValueError:
        raise ConfigError(f"Invalid number in field spec {spec!r}")
    if count is not None and len(values) != count:
        raise ConfigError(f"Field spec {spec!r} needs {count} numbers, got {len(values)}")
    return values


def parse_field(spec: str) -> QuaternionField:
    """
    Build a field from its CLI spelling.

    Accepted: 'const' / 'const:w,x,y,z', 'identity', 'conj', 'power:n',
    'kernel:w,x,y,z', 'bump:w,x,y,z,radius', 'iota'.

    Raises:
        ConfigError: If the field string is not recognised
    """
    kind, _, rest = spec.strip().partition(":")
    kind = kind.lower()
    if kind == "const":
        if not rest:
            return make_constant(Quaternion(1.0))
        values = _numbers(rest, spec)
        if len(values) == 1:
            return make_constant(Quaternion(values[0]))
        if len(values) == 4:
            return make_constant(Quaternion(*values))
        raise ConfigError(f"Field spec {spec!r} needs 1 or 4 numbers")
    if kind == "identity" and not rest:
        return make_identity()
    if kind == "conj" and not rest:
        return make_conjugate()
    if kind == "iota" and not rest:
        return make_iota()
    if kind == "power":
        try:
            n = int(rest)
        except ValueError:
            raise ConfigError(f"Field spec {spec!r} needs an integer exponent")
        if n < 0:
            raise ConfigError(f"Field spec {spec!r} needs a non-negative exponent")
        return make_power(n)
    if kind == "kernel":
        return make_kernel_section(Quaternion(*_numbers(rest, spec, 4)))
    if kind == "bump":
        values = _numbers(rest, spec, 5)
        if values[4] <= 0:
            raise ConfigError(f"Bump radius must be positive in {spec!r}")
        return make_bump(Quaternion(*values[:4]), values[4]).field
    raise ConfigError(f"Unknown field spec {spec!r}")


def parse_test_function(spec: str) -> TestFunction:
    """Parse 'bump:w,x,y,z,radius' into a real-valued TestFunction."""
    kind, _, rest = spec.strip().partition(":")
    if kind.lower() != "bump":
        raise ConfigError(f"Test functions must be bumps, got {spec!r}")
    values = _numbers(rest, spec, 5)
    if values[4] <= 0:
        raise ConfigError(f"Bump radius must be positive in {spec!r}")
    return make_bump(Quaternion(*values[:4]), values[4])
