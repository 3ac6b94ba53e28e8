"""
Quaternion algebra in double precision.

Provides:
- the immutable `Quaternion` value type (w + xi + yj + zk)
- slice coordinates q = t + r*iota and the spherical parametrization of iota
- array forms (`qmul`, `qconj`, `qnorm`, `qinv`) over numpy arrays whose last
  axis holds the four components [w, x, y, z]
"""
import math
from dataclasses import dataclass
from typing import Iterator, Union

import numpy as np

from app.errors import QuaternionDomainError


@dataclass(frozen=True)
class Quaternion:
    """Element w + xi + yj + zk of the quaternion algebra."""
    w: float = 0.0
    x: float = 0.0
    y: float = 0.0
    z: float = 0.0

    @classmethod
    def from_array(cls, values) -> "Quaternion":
        arr = np.asarray(values, dtype=float).reshape(4)
        return cls(float(arr[0]), float(arr[1]), float(arr[2]), float(arr[3]))

    @classmethod
    def real(cls, value: float) -> "Quaternion":
        return cls(float(value), 0.0, 0.0, 0.0)

    def to_array(self) -> np.ndarray:
        return np.array([self.w, self.x, self.y, self.z], dtype=float)

    def to_list(self) -> list:
        return [self.w, self.x, self.y, self.z]

    def __iter__(self) -> Iterator[float]:
        return iter((self.w, self.x, self.y, self.z))

    @property
    def scalar(self) -> float:
        return self.w

    @property
    def vector(self) -> "Quaternion":
        return Quaternion(0.0, self.x, self.y, self.z)

    def conj(self) -> "Quaternion":
        return conj(self)

    def norm(self) -> float:
        return norm(self)

    def is_finite(self) -> bool:
        return all(math.isfinite(c) for c in self)

    def __add__(self, other: "QuaternionOrReal") -> "Quaternion":
        o = _coerce(other)
        return Quaternion(self.w + o.w, self.x + o.x, self.y + o.y, self.z + o.z)

    __radd__ = __add__

    def __sub__(self, other: "QuaternionOrReal") -> "Quaternion":
        o = _coerce(other)
        return Quaternion(self.w - o.w, self.x - o.x, self.y - o.y, self.z - o.z)

    def __rsub__(self, other: "QuaternionOrReal") -> "Quaternion":
        return _coerce(other) - self

    def __neg__(self) -> "Quaternion":
        return Quaternion(-self.w, -self.x, -self.y, -self.z)

    def __mul__(self, other: "QuaternionOrReal") -> "Quaternion":
        if isinstance(other, Quaternion):
            return mul(self, other)
        s = float(other)
        return Quaternion(self.w * s, self.x * s, self.y * s, self.z * s)

    def __rmul__(self, other: float) -> "Quaternion":
        # Reals commute with every quaternion.
        return self * other

    def __truediv__(self, other: float) -> "Quaternion":
        s = float(other)
        return Quaternion(self.w / s, self.x / s, self.y / s, self.z / s)


QuaternionOrReal = Union[Quaternion, float, int]

ONE = Quaternion(1.0, 0.0, 0.0, 0.0)
I = Quaternion(0.0, 1.0, 0.0, 0.0)
J = Quaternion(0.0, 0.0, 1.0, 0.0)
K = Quaternion(0.0, 0.0, 0.0, 1.0)

# Basis e_0..e_3 = 1, i, j, k as a (4, 4) array, row k is e_k.
BASIS = np.eye(4)


def _coerce(value: QuaternionOrReal) -> Quaternion:
    if isinstance(value, Quaternion):
        return value
    return Quaternion.real(float(value))


@dataclass(frozen=True)
class SliceCoords:
    """Slice decomposition q = t + r*iota with iota a pure unit quaternion."""
    t: float
    r: float
    iota: Quaternion
    degenerate: bool = False


@dataclass(frozen=True)
class SphericalAngles:
    """Angles of iota = (cos a sin b) i + (sin a sin b) j + (cos b) k."""
    alpha: float
    beta: float


def mul(a: Quaternion, b: Quaternion) -> Quaternion:
    """Hamilton product a*b."""
    return Quaternion(
        a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
        a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
        a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
        a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
    )


def conj(q: Quaternion) -> Quaternion:
    return Quaternion(q.w, -q.x, -q.y, -q.z)


def norm2(q: Quaternion) -> float:
    return q.w * q.w + q.x * q.x + q.y * q.y + q.z * q.z


def norm(q: Quaternion) -> float:
    return math.sqrt(norm2(q))


def inv(q: Quaternion) -> Quaternion:
    """
    Multiplicative inverse conj(q)/|q|^2.

    Raises:
        QuaternionDomainError: If q is zero
    """
    n2 = norm2(q)
    if n2 == 0.0:
        raise QuaternionDomainError("Quaternion 0 has no inverse")
    return conj(q) / n2


def to_slice(q: Quaternion) -> SliceCoords:
    """
    Split q into t + r*iota.

    On the real axis (r = 0) iota is set to k and the result is flagged
    degenerate; callers needing d/d(iota) must reject flagged points.
    """
    r = math.hypot(q.x, q.y, q.z)
    if r == 0.0:
        return SliceCoords(t=q.w, r=0.0, iota=K, degenerate=True)
    return SliceCoords(t=q.w, r=r, iota=Quaternion(0.0, q.x / r, q.y / r, q.z / r))


def recompose(s: SliceCoords) -> Quaternion:
    return Quaternion.real(s.t) + s.r * s.iota


def iota_from_angles(a: SphericalAngles) -> Quaternion:
    sb = math.sin(a.beta)
    return Quaternion(0.0, math.cos(a.alpha) * sb, math.sin(a.alpha) * sb, math.cos(a.beta))


def angles_from_iota(iota: Quaternion) -> SphericalAngles:
    """Inverse of `iota_from_angles`; alpha is reported in [0, 2*pi)."""
    alpha = math.atan2(iota.y, iota.x) % (2.0 * math.pi)
    beta = math.acos(max(-1.0, min(1.0, iota.z)))
    return SphericalAngles(alpha=alpha, beta=beta)


# ============================================================================
# ARRAY FORMS
# ============================================================================

def as_array(q) -> np.ndarray:
    """Quaternion or array-like -> float array with last axis of length 4."""
    if isinstance(q, Quaternion):
        return q.to_array()
    arr = np.asarray(q, dtype=float)
    if arr.shape[-1:] != (4,):
        raise ValueError(f"Expected trailing axis of length 4, got shape {arr.shape}")
    return arr


def qmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product over the last axis, broadcasting leading axes."""
    a0, a1, a2, a3 = a[..., 0], a[..., 1], a[..., 2], a[..., 3]
    b0, b1, b2, b3 = b[..., 0], b[..., 1], b[..., 2], b[..., 3]
    return np.stack(
        (
            a0 * b0 - a1 * b1 - a2 * b2 - a3 * b3,
            a0 * b1 + a1 * b0 + a2 * b3 - a3 * b2,
            a0 * b2 - a1 * b3 + a2 * b0 + a3 * b1,
            a0 * b3 + a1 * b2 - a2 * b1 + a3 * b0,
        ),
        axis=-1,
    )


def qconj(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float, copy=True)
    out[..., 1:] *= -1.0
    return out


def qnorm2(a: np.ndarray) -> np.ndarray:
    return np.sum(a * a, axis=-1)


def qnorm(a: np.ndarray) -> np.ndarray:
    return np.sqrt(qnorm2(a))


def qinv(a: np.ndarray) -> np.ndarray:
    n2 = qnorm2(a)
    if np.any(n2 == 0.0):
        raise QuaternionDomainError("Quaternion 0 has no inverse")
    return qconj(a) / n2[..., None]


def slice_arrays(points: np.ndarray):
    """
    Vectorised `to_slice`: returns (t, r, iota) with iota = k where r = 0.
    """
    t = points[..., 0]
    r = np.sqrt(points[..., 1] ** 2 + points[..., 2] ** 2 + points[..., 3] ** 2)
    iota = np.zeros_like(points)
    safe = r > 0.0
    iota[..., 1:] = np.where(safe[..., None], points[..., 1:] / np.where(safe, r, 1.0)[..., None], 0.0)
    iota[..., 3] = np.where(safe, iota[..., 3], 1.0)
    return t, r, iota
