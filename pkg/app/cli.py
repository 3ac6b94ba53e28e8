"""
Command-line driver: one subcommand per identity check plus `convergence`,
`suite` and `run`.

Reports go to stdout as JSON (or CSV); status lines go to stderr.
Exit codes: 0 pass, 1 tolerance failure, 2 usage/config/precondition error,
3 numerical evaluation error.
"""
import sys
from pathlib import Path
from typing import Any, Callable, Dict, Optional

import typer
from loguru import logger
from pydantic import ValidationError
from rich.console import Console

from app import checks
from app.errors import ConfigError, FueterCheckError, NumericalEvaluationError
from app.schemas import CheckReport, RunConfig
from app.utils import parse_float_list

app = typer.Typer(help="Numerical checks of quaternionic integral identities", no_args_is_help=True)
console = Console(stderr=True)

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_NUMERICAL = 3

DOMAIN_OPTION = typer.Option(None, "--domain", help="'ball:w,x,y,z,R' or 'box:w0,x0,y0,z0,w1,x1,y1,z1'")
FIELD_OPTION = typer.Option(None, "--field", help="Field spec, e.g. identity, power:2, kernel:3,0,0,0")
RHS_FIELD_OPTION = typer.Option(None, "--rhs-field", help="Right-hand side h (second field v for green)")
PHI_OPTION = typer.Option(None, "--phi", help="Test function 'bump:w,x,y,z,radius'")
POINT_OPTION = typer.Option(None, "--point", help="Evaluation point 'w,x,y,z'")
EPS_OPTION = typer.Option(None, "--eps", help="Sphere radii, e.g. '0.2,0.1,0.05'")
RESOLUTION_OPTION = typer.Option(None, "--resolution", help="Quadrature resolution scale")
FD_STEP_OPTION = typer.Option(None, "--fd-step", help="Base finite-difference step")
TOL_OPTION = typer.Option(None, "--tol", help="Tolerance override")
SAMPLES_OPTION = typer.Option(None, "--samples", help="Sample or probe count")
SEED_OPTION = typer.Option(None, "--seed", help="Random seed")
OUT_OPTION = typer.Option(None, "--out", help="Write the report to this path")
FORMAT_OPTION = typer.Option(None, "--format", help="json (default) or csv")
CONFIG_OPTION = typer.Option(None, "--config", exists=True, dir_okay=False, help="RunConfig JSON file")
TIMING_OPTION = typer.Option(True, "--timing/--no-timing", help="Include elapsed_seconds in JSON output")
RESOLUTIONS_OPTION = typer.Option(..., "--resolutions", help="Comma-separated resolutions (eps values for sphere-limit)")
WORKERS_OPTION = typer.Option(1, "--workers", min=1, help="Suite entries run concurrently")


@app.callback()
def main(verbose: bool = typer.Option(False, "--verbose", "-v", help="Debug logging")):
    logger.remove()
    logger.add(sys.stderr, level="DEBUG" if verbose else "WARNING")


def _fail(exc: Exception):
    code = EXIT_NUMERICAL if isinstance(exc, NumericalEvaluationError) else EXIT_USAGE
    console.print(f"⚠ {type(exc).__name__}: {exc}")
    raise typer.Exit(code=code)


def _overrides(
    domain, field, rhs_field, phi, point, eps, resolution, fd_step, tol, samples, seed, out, fmt=None
) -> Dict[str, Any]:
    values = {
        "domain": domain,
        "field": field,
        "rhs_field": rhs_field,
        "test_function": phi,
        "point": parse_float_list(point, "point"),
        "eps": parse_float_list(eps, "eps"),
        "resolution": resolution,
        "fd_step": fd_step,
        "tolerance": tol,
        "samples": samples,
        "seed": seed,
        "out": out,
        "format": fmt,
    }
    return {k: v for k, v in values.items() if v is not None}


def build_config(check: Optional[str], config_path: Optional[Path], overrides: Dict[str, Any]) -> RunConfig:
    """RunConfig from an optional JSON file with CLI flags taking precedence."""
    base: Dict[str, Any] = {}
    if config_path is not None:
        base = checks.load_run_config(config_path).model_dump(exclude_none=True, exclude_unset=True)
    if check is not None:
        base["check"] = check
    try:
        return RunConfig.model_validate({**base, **overrides})
    except ValidationError as exc:
        raise ConfigError(f"Invalid run configuration: {exc}")


def _emit(report: CheckReport, fmt: str, timing: bool):
    if fmt == "csv":
        typer.echo(report.to_csv(), nl=False)
    else:
        typer.echo(report.to_json(include_timing=timing))
    if report.passed:
        console.print(f"✓ {report.check_name} passed (abs_err {report.abs_err:.3e}, rel_err {report.rel_err:.3e})")
    else:
        console.print(f"⚠ {report.check_name} failed (abs_err {report.abs_err:.3e}, rel_err {report.rel_err:.3e})")


def _execute(check: Optional[str], config_path: Optional[Path], timing: bool, **flags):
    try:
        cfg = build_config(check, config_path, _overrides(**flags))
        report = checks.run_check(cfg)
    except (FueterCheckError, ValidationError) as exc:
        _fail(exc)
    _emit(report, cfg.format, timing)
    raise typer.Exit(code=EXIT_PASS if report.passed else EXIT_FAIL)


def _check_command(name: str) -> Callable:
    def command(
        domain: Optional[str] = DOMAIN_OPTION,
        field: Optional[str] = FIELD_OPTION,
        rhs_field: Optional[str] = RHS_FIELD_OPTION,
        phi: Optional[str] = PHI_OPTION,
        point: Optional[str] = POINT_OPTION,
        eps: Optional[str] = EPS_OPTION,
        resolution: Optional[int] = RESOLUTION_OPTION,
        fd_step: Optional[float] = FD_STEP_OPTION,
        tol: Optional[float] = TOL_OPTION,
        samples: Optional[int] = SAMPLES_OPTION,
        seed: Optional[int] = SEED_OPTION,
        out: Optional[Path] = OUT_OPTION,
        fmt: Optional[str] = FORMAT_OPTION,
        config: Optional[Path] = CONFIG_OPTION,
        timing: bool = TIMING_OPTION,
    ):
        _execute(
            name, config, timing,
            domain=domain, field=field, rhs_field=rhs_field, phi=phi, point=point, eps=eps,
            resolution=resolution, fd_step=fd_step, tol=tol, samples=samples, seed=seed, out=out, fmt=fmt,
        )

    command.__doc__ = checks.CHECKS[name].description
    return command


for _name in checks.CHECKS:
    app.command(_name)(_check_command(_name))


@app.command("run")
def run_cmd(
    config: Path = typer.Option(..., "--config", exists=True, dir_okay=False, help="RunConfig JSON file"),
    domain: Optional[str] = DOMAIN_OPTION,
    field: Optional[str] = FIELD_OPTION,
    rhs_field: Optional[str] = RHS_FIELD_OPTION,
    phi: Optional[str] = PHI_OPTION,
    point: Optional[str] = POINT_OPTION,
    eps: Optional[str] = EPS_OPTION,
    resolution: Optional[int] = RESOLUTION_OPTION,
    fd_step: Optional[float] = FD_STEP_OPTION,
    tol: Optional[float] = TOL_OPTION,
    samples: Optional[int] = SAMPLES_OPTION,
    seed: Optional[int] = SEED_OPTION,
    out: Optional[Path] = OUT_OPTION,
    fmt: Optional[str] = FORMAT_OPTION,
    timing: bool = TIMING_OPTION,
):
    """Run the check described by a RunConfig JSON file; flags override its fields."""
    _execute(
        None, config, timing,
        domain=domain, field=field, rhs_field=rhs_field, phi=phi, point=point, eps=eps,
        resolution=resolution, fd_step=fd_step, tol=tol, samples=samples, seed=seed, out=out, fmt=fmt,
    )


@app.command("convergence")
def convergence_cmd(
    check: str = typer.Argument(..., help="Registered check name"),
    resolutions: str = RESOLUTIONS_OPTION,
    domain: Optional[str] = DOMAIN_OPTION,
    field: Optional[str] = FIELD_OPTION,
    rhs_field: Optional[str] = RHS_FIELD_OPTION,
    phi: Optional[str] = PHI_OPTION,
    point: Optional[str] = POINT_OPTION,
    fd_step: Optional[float] = FD_STEP_OPTION,
    tol: Optional[float] = TOL_OPTION,
    samples: Optional[int] = SAMPLES_OPTION,
    seed: Optional[int] = SEED_OPTION,
    out: Optional[Path] = OUT_OPTION,
    fmt: Optional[str] = typer.Option(None, "--format", help="csv (default) or json"),
    config: Optional[Path] = CONFIG_OPTION,
):
    """Run a check over a resolution sweep and report the empirical order."""
    try:
        values = parse_float_list(resolutions, "resolutions") or []
        cfg = build_config(
            check,
            config,
            _overrides(
                domain, field, rhs_field, phi, point, None, None, fd_step, tol, samples, seed, None, fmt
            ),
        )
        table = checks.run_convergence(cfg, values)
    except (FueterCheckError, ValidationError) as exc:
        _fail(exc)

    # tables default to csv unless the flag or the config file asked otherwise
    table_format = cfg.format if "format" in cfg.model_fields_set else "csv"
    text = table.to_csv() if table_format == "csv" else table.model_dump_json(indent=2) + "\n"
    if out is not None:
        checks.write_text_output(text, out)
    typer.echo(text, nl=False)
    console.print(f"✓ {table.check_name}: empirical order {table.order_label} over {len(table.rows)} runs")


@app.command("suite")
def suite_cmd(
    path: Path = typer.Argument(..., exists=True, dir_okay=False, help="Suite JSON file"),
    workers: int = WORKERS_OPTION,
    out: Optional[Path] = OUT_OPTION,
    timing: bool = TIMING_OPTION,
):
    """Run every check listed in a suite file; exit 0 only if all pass."""
    try:
        summary = checks.run_suite(path, workers)
    except (FueterCheckError, ValidationError) as exc:
        _fail(exc)

    text = summary.to_json(include_timing=timing)
    if out is not None:
        checks.write_text_output(text, out)
    typer.echo(text)
    for entry in summary.checks:
        mark = "✓" if entry.passed else "⚠"
        detail = entry.error or f"rel_err {entry.rel_err:.3e}"
        console.print(f"{mark} {entry.check_name}: {detail}")
    console.print(f"{summary.total - summary.failures}/{summary.total} checks passed")
    raise typer.Exit(code=EXIT_PASS if summary.passed else EXIT_FAIL)


if __name__ == "__main__":
    app()
