"""
The Cauchy-Fueter kernel E(q, p) = (q - p)^-1 / (2 pi^2 |q - p|^2) and checks
of its algebraic identities and of its two-sided regularity.
"""
import math
import time
from typing import List, Optional, Sequence, Tuple

import numpy as np

from app.errors import PreconditionError
from app.fields import TWO_PI_SQUARED, kernel_values, make_kernel_section
from app.operators import fueter_left, fueter_right
from app.quat_core import Quaternion, qnorm
from app.schemas import CheckReport, FDConfig

# E values are plain quaternions.
KernelValue = Quaternion

IDENTITY_TOLERANCE = 1e-12
REGULARITY_TOLERANCE = 1e-7
MIN_REGULARITY_DISTANCE = 0.25


def eval_kernel(q: Quaternion, p: Quaternion) -> KernelValue:
    """
    E(q, p), evaluated as conj(q - p) / (2 pi^2 |q - p|^4).

    Raises:
        CoincidentPointsError: If q = p
    """
    return Quaternion.from_array(kernel_values(q.to_array(), p.to_array()))


def random_pairs(
    count: int,
    min_distance: float,
    max_distance: float,
    seed: int = 0,
    log_uniform: bool = True,
) -> List[Tuple[Quaternion, Quaternion]]:
    """Seeded (q, p) pairs with |q - p| in [min_distance, max_distance]."""
    rng = np.random.default_rng(seed)
    p = rng.normal(size=(count, 4))
    direction = rng.normal(size=(count, 4))
    direction /= np.linalg.norm(direction, axis=-1, keepdims=True)
    if log_uniform:
        dist = np.exp(rng.uniform(math.log(min_distance), math.log(max_distance), size=count))
    else:
        dist = rng.uniform(min_distance, max_distance, size=count)
    q = p + dist[:, None] * direction
    return [(Quaternion.from_array(a), Quaternion.from_array(b)) for a, b in zip(q, p)]


def kernel_identities_check(
    samples: int,
    seed: int = 0,
    pairs: Optional[Sequence[Tuple[Quaternion, Quaternion]]] = None,
    tolerance: float = IDENTITY_TOLERANCE,
) -> CheckReport:
    """
    Max deviation of E(q,p) = -E(p,q) and |E(q,p)| = 1 / (2 pi^2 |q-p|^3)
    over seeded random pairs with 0.1 <= |q - p| <= 10.

    Args:
        samples: Number of random pairs (ignored when `pairs` is given)
        seed: Random seed
        pairs: Explicit (q, p) pairs
        tolerance: Pass threshold on the absolute deviation

    Returns:
        CheckReport with lhs = [max deviation, 0, 0, 0] and rhs = 0
    """
    start = time.perf_counter()
    if pairs is None:
        if samples < 1:
            raise PreconditionError(f"samples must be >= 1, got {samples}")
        pairs = random_pairs(samples, 0.1, 10.0, seed)
    elif len(pairs) == 0:
        raise PreconditionError("At least one (q, p) pair is required")

    q = np.array([a.to_list() for a, _ in pairs])
    p = np.array([b.to_list() for _, b in pairs])
    forward = kernel_values(q, p)
    backward = kernel_values(p, q)
    antisymmetry = float(np.max(qnorm(forward + backward)))
    distance = qnorm(q - p)
    norm_law = float(np.max(np.abs(qnorm(forward) - 1.0 / (TWO_PI_SQUARED * distance ** 3))))
    worst = max(antisymmetry, norm_law)

    return CheckReport.compare(
        "kernel-identities",
        Quaternion(worst),
        Quaternion(0.0),
        tolerance,
        absolute=True,
        parameters={
            "samples": len(pairs),
            "seed": seed,
            "antisymmetry_max_err": antisymmetry,
            "norm_law_max_err": norm_law,
        },
        node_counts={"pairs": len(pairs)},
        elapsed_seconds=time.perf_counter() - start,
    )


def kernel_regularity_check(
    points: Sequence[Tuple[Quaternion, Quaternion]],
    cfg: Optional[FDConfig] = None,
    tolerance: float = REGULARITY_TOLERANCE,
) -> CheckReport:
    """
    max |D_l E(., p)(q)| and |D_r E(., p)(q)| over the pairs, by finite differences.

    The kernel's closed-form partials are bypassed so the check exercises the
    Richardson stencils.

    Raises:
        PreconditionError: If a pair has |q - p| < 0.25
    """
    start = time.perf_counter()
    if len(points) == 0:
        raise PreconditionError("At least one (q, p) pair is required")
    cfg = (cfg or FDConfig()).model_copy(update={"prefer_closed_form": False})

    worst_left = 0.0
    worst_right = 0.0
    for q, p in points:
        if (q - p).norm() < MIN_REGULARITY_DISTANCE:
            raise PreconditionError(
                f"Pair q={q.to_list()}, p={p.to_list()} is closer than {MIN_REGULARITY_DISTANCE} to the singularity"
            )
        section = make_kernel_section(p)
        worst_left = max(worst_left, fueter_left(section, q, cfg).norm())
        worst_right = max(worst_right, fueter_right(section, q, cfg).norm())

    worst = max(worst_left, worst_right)
    return CheckReport.compare(
        "kernel-regularity",
        Quaternion(worst),
        Quaternion(0.0),
        tolerance,
        absolute=True,
        parameters={
            "pairs": len(points),
            "left_max_residual": worst_left,
            "right_max_residual": worst_right,
            "fd_step": cfg.step,
            "richardson_levels": cfg.richardson_levels,
        },
        node_counts={"pairs": len(points), "stencil_points_per_pair": 2 * 4 * cfg.richardson_levels},
        elapsed_seconds=time.perf_counter() - start,
    )
