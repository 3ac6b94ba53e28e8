"""
Pydantic models for run configuration and machine-readable reports.
"""
import csv
import io
import math
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, Field, field_validator

from app.quat_core import Quaternion, norm

# Denominator floor for relative errors.
REL_ERR_FLOOR = 1e-300


class FDConfig(BaseModel):
    """Finite-difference settings for the differential operators."""
    step: float = Field(1e-4, gt=0, description="Base step; the effective step is step * max(1, |q|)")
    richardson_levels: int = Field(2, ge=1, description="Richardson levels; order of accuracy is 2 * levels")
    prefer_closed_form: bool = Field(True, description="Use closed-form partials when the field provides them")
    axis_threshold: float = Field(1e-4, gt=0, description="Reject d/d(iota) when x^2 + y^2 < (threshold * r)^2")
    radial_tolerance: float = Field(1e-8, gt=0, description="Points with r below this are treated as on the real axis")

    class Config:
        frozen = True
        json_schema_extra = {
            "example": {
                "step": 1e-4,
                "richardson_levels": 2,
                "prefer_closed_form": True,
            }
        }

    @property
    def order(self) -> int:
        return 2 * self.richardson_levels


class CheckReport(BaseModel):
    """Outcome of one identity verification."""
    check_name: str = Field(..., description="Registered check name")
    parameters: Dict[str, Any] = Field(default_factory=dict, description="Inputs and derived quantities")
    lhs: List[float] = Field(..., min_length=4, max_length=4, description="Left-hand side as [w, x, y, z]")
    rhs: List[float] = Field(..., min_length=4, max_length=4, description="Right-hand side as [w, x, y, z]")
    abs_err: float = Field(..., description="|lhs - rhs|")
    rel_err: float = Field(..., description="abs_err / max(|lhs|, |rhs|, 1e-300)")
    node_counts: Dict[str, int] = Field(default_factory=dict, description="Quadrature nodes used per rule")
    elapsed_seconds: float = Field(0.0, ge=0)
    passed: bool = Field(..., alias="pass", description="Whether the check met its tolerance")

    class Config:
        populate_by_name = True  # Allow both "passed" and "pass"
        json_schema_extra = {
            "example": {
                "check_name": "cauchy",
                "parameters": {"domain": "ball:0,0,0,0,1", "field": "const", "tolerance": 1e-6},
                "lhs": [1.0, 0.0, 0.0, 0.0],
                "rhs": [1.0, 0.0, 0.0, 0.0],
                "abs_err": 2.2e-16,
                "rel_err": 2.2e-16,
                "node_counts": {"boundary": 65536},
                "elapsed_seconds": 0.41,
                "pass": True,
            }
        }

    @classmethod
    def compare(
        cls,
        check_name: str,
        lhs: Quaternion,
        rhs: Quaternion,
        tolerance: float,
        *,
        parameters: Optional[Dict[str, Any]] = None,
        node_counts: Optional[Dict[str, int]] = None,
        elapsed_seconds: float = 0.0,
        absolute: bool = False,
        scale: Optional[float] = None,
    ) -> "CheckReport":
        """
        Build a report from the two sides of an identity.

        Passing rule: abs_err < tolerance when `absolute`, otherwise
        abs_err < tolerance * max(|lhs|, |rhs|, scale).

        Args:
            check_name: Registered check name
            lhs: Computed side
            rhs: Reference side
            tolerance: Allowed error (strict inequality, so 0 never passes)
            parameters: Extra key-value data recorded in the report
            node_counts: Quadrature node counts
            elapsed_seconds: Wall time of the check
            absolute: Compare abs_err directly against tolerance
            scale: Lower bound for the magnitude the tolerance is relative to

        Returns:
            CheckReport
        """
        abs_err = norm(lhs - rhs)
        magnitude = max(norm(lhs), norm(rhs))
        rel_err = abs_err / max(magnitude, REL_ERR_FLOOR)
        if absolute:
            passed = abs_err < tolerance
        else:
            reference = max(magnitude, scale or 0.0)
            passed = abs_err < tolerance * reference

        params = dict(parameters or {})
        params.setdefault("tolerance", tolerance)
        if scale is not None:
            params.setdefault("scale", scale)

        return cls(
            check_name=check_name,
            parameters=params,
            lhs=lhs.to_list(),
            rhs=rhs.to_list(),
            abs_err=abs_err,
            rel_err=rel_err,
            node_counts=dict(node_counts or {}),
            elapsed_seconds=elapsed_seconds,
            passed=bool(passed and math.isfinite(abs_err)),
        )

    @property
    def lhs_quaternion(self) -> Quaternion:
        return Quaternion.from_array(self.lhs)

    @property
    def rhs_quaternion(self) -> Quaternion:
        return Quaternion.from_array(self.rhs)

    def to_json(self, include_timing: bool = True) -> str:
        exclude = None if include_timing else {"elapsed_seconds"}
        return self.model_dump_json(by_alias=True, indent=2, exclude=exclude)

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["check_name", "abs_err", "rel_err", "pass"])
        writer.writerow([self.check_name, repr(self.abs_err), repr(self.rel_err), str(self.passed).lower()])
        return buffer.getvalue()


class RunConfig(BaseModel):
    """One check invocation; JSON config files and CLI flags both populate it."""
    check: str = Field(..., description="Registered check name (e.g. cauchy, sphere-limit)")
    domain: Optional[str] = Field(None, description="Domain spec, e.g. 'ball:0,0,0,0,1' or 'box:0,0,0,0,1,1,1,1'")
    field: Optional[str] = Field(None, description="Field name, e.g. 'identity', 'power:2', 'kernel:3,0,0,0'")
    rhs_field: Optional[str] = Field(None, description="Right-hand side h (or the second field v of green)")
    test_function: Optional[str] = Field(None, description="Bump spec 'bump:w,x,y,z,radius' for weak-formulation checks")
    point: Optional[List[float]] = Field(None, min_length=4, max_length=4, description="Evaluation point p as [w, x, y, z]")
    eps: Optional[List[float]] = Field(None, description="Sphere radii for the sphere-limit check")
    resolution: Optional[int] = Field(None, ge=2, description="Quadrature resolution scale n")
    fd_step: Optional[float] = Field(None, gt=0, description="Base finite-difference step")
    tolerance: Optional[float] = Field(None, ge=0, description="Override for the check's default tolerance")
    samples: Optional[int] = Field(None, description="Random sample count for sampled checks")
    out: Optional[Path] = Field(None, description="Where to write the JSON report")
    seed: int = Field(0, description="Random seed for sampled checks")
    format: Literal["json", "csv"] = Field("json", description="CLI output format; convergence tables fall back to csv when unset")

    class Config:
        json_schema_extra = {
            "example": {
                "check": "cauchy",
                "domain": "ball:0,0,0,0,1",
                "field": "kernel:3,0,0,0",
                "point": [0.2, 0.1, 0.0, -0.1],
                "resolution": 32,
                "seed": 0,
            }
        }

    @field_validator("eps")
    @classmethod
    def _positive_eps(cls, value: Optional[List[float]]) -> Optional[List[float]]:
        if value is not None and any(e <= 0 for e in value):
            raise ValueError("eps values must be positive")
        return value

    def fd_config(self) -> FDConfig:
        """FD settings: --fd-step when given, otherwise the environment defaults."""
        from app import config

        step = self.fd_step if self.fd_step is not None else config.get_fd_step()
        return FDConfig(step=step, richardson_levels=config.get_richardson_levels())


class ConvergenceRow(BaseModel):
    resolution: float
    abs_err: float
    rel_err: float
    elapsed_seconds: float


class ConvergenceTable(BaseModel):
    """Errors of one check across a resolution sweep, with the fitted order."""
    check_name: str
    sweep_parameter: str = Field("resolution", description="What the resolution column varies")
    rows: List[ConvergenceRow] = Field(default_factory=list)
    empirical_order: Optional[float] = Field(None, description="Least-squares log-log slope")
    order_label: str = Field(..., description="Formatted order, or 'floor' when errors sit at rounding level")

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow([self.sweep_parameter, "abs_err", "rel_err", "elapsed_seconds"])
        for row in self.rows:
            writer.writerow([repr(row.resolution), repr(row.abs_err), repr(row.rel_err), f"{row.elapsed_seconds:.6f}"])
        writer.writerow(["order", self.order_label, "", ""])
        return buffer.getvalue()


class SuiteEntryResult(BaseModel):
    check_name: str
    passed: bool = Field(..., alias="pass")
    abs_err: Optional[float] = None
    rel_err: Optional[float] = None
    error: Optional[str] = Field(None, description="Error message when the check raised")

    class Config:
        populate_by_name = True


class SuiteSummary(BaseModel):
    """Per-check pass/fail of a suite run, sorted by check name."""
    total: int
    failures: int
    passed: bool = Field(..., alias="pass")
    checks: List[SuiteEntryResult] = Field(default_factory=list)
    reports: List[CheckReport] = Field(default_factory=list)

    class Config:
        populate_by_name = True

    def to_json(self, include_timing: bool = True) -> str:
        exclude = None if include_timing else {"reports": {"__all__": {"elapsed_seconds"}}}
        return self.model_dump_json(by_alias=True, indent=2, exclude=exclude)
