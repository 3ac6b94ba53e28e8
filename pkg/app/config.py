"""
Environment-backed defaults (quadrature resolutions, FD step, report paths).

Every value can be overridden from the process environment or a `.env` file.
"""
import os
from pathlib import Path
from typing import Tuple

from dotenv import load_dotenv

from app.errors import ConfigError

# Load environment variables
load_dotenv()


def _int_tuple(name: str, default: str) -> Tuple[int, ...]:
    raw = os.getenv(name, default)
    try:
        values = tuple(int(v) for v in raw.split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"{name} must be a comma-separated list of integers, got {raw!r}")
    if not values or any(v < 1 for v in values):
        raise ConfigError(f"{name} must contain positive integers, got {raw!r}")
    return values


def get_volume_resolution() -> int:
    """Per-coordinate node count of the default volume rule."""
    return _int_tuple("FUETER_VOLUME_RESOLUTION", "24")[0]


def get_boundary_resolution() -> Tuple[int, int, int]:
    """(n_psi, n_theta, n_phi) of the default ball boundary rule."""
    values = _int_tuple("FUETER_BOUNDARY_RESOLUTION", "32,32,64")
    if len(values) != 3:
        raise ConfigError("FUETER_BOUNDARY_RESOLUTION needs three values")
    return values


def get_sphere_resolution() -> Tuple[int, int, int]:
    """(n_psi, n_theta, n_phi) of the default eps-sphere and singular angular rule."""
    values = _int_tuple("FUETER_SPHERE_RESOLUTION", "24,24,48")
    if len(values) != 3:
        raise ConfigError("FUETER_SPHERE_RESOLUTION needs three values")
    return values


def get_singular_radial() -> int:
    return _int_tuple("FUETER_SINGULAR_RADIAL", "32")[0]


def get_fd_step() -> float:
    raw = os.getenv("FUETER_FD_STEP", "1e-4")
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"FUETER_FD_STEP must be a number, got {raw!r}")


def get_richardson_levels() -> int:
    return _int_tuple("FUETER_RICHARDSON_LEVELS", "2")[0]


def get_report_dir() -> str:
    """
    Get the report directory from environment or use default.

    Returns:
        Absolute path of the directory reports are written to
    """
    report_dir = os.getenv("FUETER_REPORT_DIR", "./reports")
    return str(Path(report_dir).resolve())


def get_history_size() -> int:
    return _int_tuple("FUETER_HISTORY_SIZE", "50")[0]
