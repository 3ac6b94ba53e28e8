"""
Shared fixtures: reference domains, FD settings and seeded point sets.
"""
import numpy as np
import pytest

from app.geometry import Ball4, Box4
from app.history import get_report_history
from app.quat_core import Quaternion
from app.schemas import FDConfig


@pytest.fixture
def unit_ball() -> Ball4:
    return Ball4(Quaternion(), 1.0)


@pytest.fixture
def unit_box() -> Box4:
    return Box4(Quaternion(), Quaternion(1.0, 1.0, 1.0, 1.0))


@pytest.fixture
def off_axis_ball() -> Ball4:
    """Ball4(2 + 2i + 2j, 0.8): clear of the t + zk plane."""
    return Ball4(Quaternion(2.0, 2.0, 2.0, 0.0), 0.8)


@pytest.fixture
def fd() -> FDConfig:
    return FDConfig()


@pytest.fixture
def fd_only() -> FDConfig:
    """Finite differences even when closed-form partials exist."""
    return FDConfig(prefer_closed_form=False)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def off_axis_points(rng) -> np.ndarray:
    """100 points with sqrt(x^2 + y^2) in [0.5, 2]."""
    n = 100
    rho = rng.uniform(0.5, 2.0, n)
    angle = rng.uniform(0.0, 2.0 * np.pi, n)
    return np.stack(
        (rng.uniform(-1.0, 1.0, n), rho * np.cos(angle), rho * np.sin(angle), rng.uniform(-1.0, 1.0, n)),
        axis=-1,
    )


@pytest.fixture
def empty_history():
    history = get_report_history()
    history.clear()
    yield history
    history.clear()
