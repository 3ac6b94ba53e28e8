"""
Registry of identity checks and the orchestration shared by the CLI and the service.

Provides:
- `CHECKS`: every registered check with defaults that pass
- `run_check`: one check from a RunConfig (writes the JSON report when `out` is set)
- `run_convergence`: a resolution (or eps) sweep with the fitted empirical order
- `run_suite`: a JSON list of RunConfigs, optionally on a thread pool
"""
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger
from pydantic import ValidationError

from app import config
from app.errors import ConfigError, FueterCheckError, UnknownCheckError
from app.fields import QuaternionField, parse_field, parse_test_function
from app.geometry import (
    Ball4,
    Domain,
    boundary_rule,
    eps_sphere_rule,
    parse_domain,
    singular_volume_rule,
    volume_rule,
)
from app.identities import (
    SPHERE_LIMIT_TOLERANCE,
    cauchy_represent,
    classical_from_weak_probe,
    cullen_represent_terms,
    fit_order,
    gauss_check,
    green_check,
    inhomogeneous_weak_residual,
    newton_potential_field,
    newton_potential_many,
    semiweak_cullen_residual,
    sphere_limit_check,
    sphere_limit_summary,
    test_function_kernel_check,
    weak_report,
    weak_residual,
)
from app.kernel import (
    IDENTITY_TOLERANCE,
    REGULARITY_TOLERANCE,
    kernel_identities_check,
    kernel_regularity_check,
    random_pairs,
)
from app.quat_core import Quaternion
from app.schemas import (
    CheckReport,
    ConvergenceRow,
    ConvergenceTable,
    RunConfig,
    SuiteEntryResult,
    SuiteSummary,
)
from app.utils import ensure_keys, load_json_document, load_json_file

Runner = Callable[[RunConfig], CheckReport]

# Errors below this (relative to the reference value) count as rounding level.
CONVERGENCE_FLOOR = 1e-13


@dataclass(frozen=True)
class CheckDefinition:
    name: str
    description: str
    runner: Runner
    defaults: Dict[str, Any] = field(default_factory=dict)


CHECKS: Dict[str, CheckDefinition] = {}


def register(name: str, description: str, **defaults):
    def decorator(runner: Runner) -> Runner:
        CHECKS[name] = CheckDefinition(name, description, runner, defaults)
        return runner

    return decorator


def get_check(name: str) -> CheckDefinition:
    """
    Raises:
        UnknownCheckError: If `name` is not registered
    """
    try:
        return CHECKS[name]
    except KeyError:
        raise UnknownCheckError(f"Unknown check {name!r}; available: {', '.join(sorted(CHECKS))}")


def resolve_config(cfg: RunConfig) -> RunConfig:
    """Fill every field the caller left unset from the check's defaults."""
    definition = get_check(cfg.check)
    overrides = cfg.model_dump(exclude_none=True, exclude={"check"})
    try:
        return RunConfig(**{**definition.defaults, **overrides, "check": cfg.check})
    except ValidationError as exc:
        raise ConfigError(f"Invalid configuration for {cfg.check}: {exc}")


# ============================================================================
# INPUT HELPERS
# ============================================================================

def _required(value, what: str, check: str):
    if value is None:
        raise ConfigError(f"Check {check!r} needs {what}")
    return value


def _domain(cfg: RunConfig) -> Domain:
    return parse_domain(_required(cfg.domain, "--domain", cfg.check))


def _field(cfg: RunConfig) -> QuaternionField:
    return parse_field(_required(cfg.field, "--field", cfg.check))


def _point(cfg: RunConfig) -> Quaternion:
    return Quaternion(*_required(cfg.point, "--point", cfg.check))


def _tolerance(cfg: RunConfig, default: float) -> float:
    return default if cfg.tolerance is None else cfg.tolerance


def _support_resolution(n: Optional[int], default: int) -> Tuple[int, int, int, int]:
    """Polar rule on a bump support: n radial nodes and a coarser angular grid."""
    n = n or default
    a = max(6, n // 3)
    return (n, a, a, 2 * a)


def interior_probes(d: Domain, count: int, seed: int, fill: float = 0.5) -> List[Quaternion]:
    """Seeded points well inside d (within `fill` of the centre-to-boundary distance)."""
    if count < 1:
        raise ConfigError(f"Probe count must be >= 1, got {count}")
    rng = np.random.default_rng(seed)
    if isinstance(d, Ball4):
        direction = rng.normal(size=(count, 4))
        direction /= np.linalg.norm(direction, axis=-1, keepdims=True)
        radius = fill * d.radius * rng.uniform(0.0, 1.0, size=count) ** 0.25
        points = d.center.to_array() + radius[:, None] * direction
    else:
        lo, hi = d.min_corner.to_array(), d.max_corner.to_array()
        points = 0.5 * (lo + hi) + fill * 0.5 * (hi - lo) * rng.uniform(-1.0, 1.0, size=(count, 4))
    return [Quaternion.from_array(p) for p in points]


def component_fields(f: QuaternionField) -> List[QuaternionField]:
    """The four real-valued component fields of f (f_k = k-th coordinate of f)."""

    def component(k: int) -> QuaternionField:
        def evaluate(q: np.ndarray) -> np.ndarray:
            out = np.zeros(q.shape)
            out[..., 0] = f(q)[..., k]
            return out

        partials = None
        if f.has_partials:
            def partials(q: np.ndarray) -> np.ndarray:
                out = np.zeros(q.shape[:-1] + (4, 4))
                out[..., :, 0] = f.partials(q)[..., :, k]
                return out

        return QuaternionField(f"{f.name}[{k}]", evaluate, partials, real_valued=True)

    return [component(k) for k in range(4)]


def _field_scale(phi, f: QuaternionField) -> float:
    """|int phi dV| times the size of f at the centre of supp phi."""
    return phi.integral().norm() * max(1.0, f(phi.center).norm())


# ============================================================================
# CHECKS
# ============================================================================

@register(
    "gauss",
    "Divergence theorem for the four real components of a field",
    domain="ball:0,0,0,0,1",
    field="identity",
)
def _run_gauss(cfg: RunConfig) -> CheckReport:
    d = _domain(cfg)
    components = component_fields(_field(cfg))
    return gauss_check(
        d,
        components,
        volume_rule(d, cfg.resolution),
        boundary_rule(d, cfg.resolution),
        cfg.fd_config(),
        _tolerance(cfg, 1e-6),
    )


@register(
    "green",
    "Quaternionic Green formula for u (--field) and v (--rhs-field)",
    domain="ball:0,0,0,0,1",
    field="bump:0.1,0,0,0,0.6",
    rhs_field="kernel:3,0,0,0",
)
def _run_green(cfg: RunConfig) -> CheckReport:
    d = _domain(cfg)
    v = parse_field(_required(cfg.rhs_field, "--rhs-field", cfg.check))
    scale = None
    if cfg.field and cfg.field.startswith("bump"):
        phi = parse_test_function(cfg.field)
        u = phi.field
        scale = phi.integral().norm()
        if d.contains_ball(phi.center, phi.radius):
            vrule = volume_rule(phi.support, _support_resolution(cfg.resolution, 32))
        else:
            vrule = volume_rule(d, cfg.resolution)
    else:
        u = _field(cfg)
        vrule = volume_rule(d, cfg.resolution)
    return green_check(
        d, u, v, vrule, boundary_rule(d, cfg.resolution), cfg.fd_config(), _tolerance(cfg, 1e-4), scale
    )


@register(
    "sphere-limit",
    "eps-sphere integral of E n f tends to f(p)",
    point=[0.3, 0.2, -0.1, 0.4],
    field="power:2",
    eps=[0.2, 0.1, 0.05],
)
def _run_sphere_limit(cfg: RunConfig) -> CheckReport:
    reports = sphere_limit_check(
        _point(cfg),
        _field(cfg),
        _required(cfg.eps, "--eps", cfg.check),
        eps_sphere_rule(cfg.resolution),
        tolerance=_tolerance(cfg, SPHERE_LIMIT_TOLERANCE),
    )
    return sphere_limit_summary(reports)


@register(
    "kernel-identities",
    "Antisymmetry and norm law of E over random pairs",
    samples=10000,
)
def _run_kernel_identities(cfg: RunConfig) -> CheckReport:
    return kernel_identities_check(cfg.samples, cfg.seed, tolerance=_tolerance(cfg, IDENTITY_TOLERANCE))


@register(
    "kernel-regularity",
    "D_l E = D_r E = 0 by finite differences",
    samples=100,
)
def _run_kernel_regularity(cfg: RunConfig) -> CheckReport:
    pairs = random_pairs(max(cfg.samples, 0), 0.5, 2.0, cfg.seed)
    return kernel_regularity_check(pairs, cfg.fd_config(), _tolerance(cfg, REGULARITY_TOLERANCE))


@register(
    "testfn-kernel",
    "int (D_r phi) E(., p) dV = -phi(p)",
    domain="ball:0,0,0,0,1",
    test_function="bump:0,0,0,0,0.5",
    point=[0.0, 0.0, 0.0, 0.0],
)
def _run_testfn_kernel(cfg: RunConfig) -> CheckReport:
    phi = parse_test_function(_required(cfg.test_function, "--phi", cfg.check))
    return test_function_kernel_check(
        _domain(cfg),
        phi,
        _point(cfg),
        singular_volume_rule(radial=cfg.resolution),
        cfg.fd_config(),
        _tolerance(cfg, 1e-3),
    )


@register(
    "newton-potential",
    "D_l of the Newton potential of h equals h at interior probes",
    domain="ball:0,0,0,0,1",
    rhs_field="const:-2",
    samples=10,
    fd_step=1e-3,
)
def _run_newton_potential(cfg: RunConfig) -> CheckReport:
    start = time.perf_counter()
    d = _domain(cfg)
    h = parse_field(_required(cfg.rhs_field, "--rhs-field", cfg.check))
    n = cfg.resolution or 12
    rule = singular_volume_rule(radial=max(2, n // 3), angular=n)
    probes = interior_probes(d, cfg.samples, cfg.seed)
    g = newton_potential_field(d, h, rule)
    probe_cfg = cfg.fd_config().model_copy(update={"prefer_closed_form": False})

    points = np.array([p.to_list() for p in probes])
    magnitude = max(1.0, float(np.max(np.linalg.norm(h(points), axis=-1))))
    report = classical_from_weak_probe(d, g, h, probes, probe_cfg, _tolerance(cfg, 1e-2) * magnitude)

    params = dict(report.parameters)
    if isinstance(d, Ball4) and h.name.startswith("const"):
        # g(p) = conj(p - c) h / 4 for constant h on a ball
        values = newton_potential_many(d, h, points, rule)
        c = d.center
        exact = np.array([((p - c).conj() * h(p) / 4.0).to_list() for p in probes])
        params["closed_form_max_err"] = float(np.max(np.linalg.norm(values - exact, axis=-1)))
    return report.model_copy(
        update={
            "check_name": "newton-potential",
            "parameters": params,
            "node_counts": {**report.node_counts, "singular_volume": rule.node_count},
            "elapsed_seconds": time.perf_counter() - start,
        }
    )


@register(
    "cauchy",
    "Boundary Cauchy integral reproduces an F-regular field",
    domain="ball:0,0,0,0,1",
    field="kernel:3,0,0,0",
    point=[0.2, 0.1, 0.0, -0.1],
)
def _run_cauchy(cfg: RunConfig) -> CheckReport:
    start = time.perf_counter()
    d, f, p = _domain(cfg), _field(cfg), _point(cfg)
    rule = boundary_rule(d, cfg.resolution)
    value = cauchy_represent(d, f, p, rule)
    params = {"domain": d.spec, "field": f.name, "point": p.to_list()}
    if isinstance(d, Ball4) and f.name == "identity":
        params["identity_closed_form"] = (p + (p - d.center).conj() / 2.0).to_list()
    return CheckReport.compare(
        "cauchy",
        value,
        f(p),
        _tolerance(cfg, 1e-4),
        parameters=params,
        node_counts={"boundary": rule.node_count},
        elapsed_seconds=time.perf_counter() - start,
    )


@register(
    "weak",
    "Weak F-regularity residual int (D_r phi) f dV",
    domain="ball:0,0,0,0,1",
    field="kernel:3,0,0,0",
    test_function="bump:0.1,0,0,0,0.5",
)
def _run_weak(cfg: RunConfig) -> CheckReport:
    start = time.perf_counter()
    d, f = _domain(cfg), _field(cfg)
    phi = parse_test_function(_required(cfg.test_function, "--phi", cfg.check))
    rule = volume_rule(phi.support, _support_resolution(cfg.resolution, 24))
    residual = weak_residual(d, f, phi, rule, cfg.fd_config())
    return weak_report(
        "weak",
        residual,
        _tolerance(cfg, 1e-4),
        _field_scale(phi, f),
        {"domain": d.spec, "field": f.name},
        time.perf_counter() - start,
    )


@register(
    "weak-inhom",
    "Inhomogeneous weak residual int (D_r phi) f + phi h dV ('newton' as --field uses the potential of h)",
    domain="ball:0,0,0,0,1",
    field="identity",
    rhs_field="const:-2",
    test_function="bump:0.1,0,0,0,0.5",
)
def _run_weak_inhom(cfg: RunConfig) -> CheckReport:
    start = time.perf_counter()
    d = _domain(cfg)
    h = parse_field(_required(cfg.rhs_field, "--rhs-field", cfg.check))
    phi = parse_test_function(_required(cfg.test_function, "--phi", cfg.check))
    node_counts = {}
    if cfg.field == "newton":
        # each support node costs one singular integral
        n = cfg.resolution or 16
        potential_rule = singular_volume_rule(radial=max(2, n // 6), angular=max(8, n // 2))
        f = newton_potential_field(d, h, potential_rule)
        rule = volume_rule(phi.support, _support_resolution(n, 16))
        node_counts["singular_volume"] = potential_rule.node_count
    else:
        f = _field(cfg)
        rule = volume_rule(phi.support, _support_resolution(cfg.resolution, 24))
    residual = inhomogeneous_weak_residual(d, f, h, phi, rule, cfg.fd_config())
    report = weak_report(
        "weak-inhom",
        residual,
        _tolerance(cfg, 1e-3),
        _field_scale(phi, h),
        {"domain": d.spec, "field": f.name, "rhs_field": h.name},
        time.perf_counter() - start,
    )
    return report.model_copy(update={"node_counts": {**report.node_counts, **node_counts}})


@register(
    "semiweak-cullen",
    "Semiweak C-regularity residual int (D_r phi) f - 2 v phi / r dV",
    domain="ball:0.5,2,2,0,1",
    field="power:2",
    test_function="bump:0.5,2,2,0,0.5",
)
def _run_semiweak(cfg: RunConfig) -> CheckReport:
    start = time.perf_counter()
    d, f = _domain(cfg), _field(cfg)
    phi = parse_test_function(_required(cfg.test_function, "--phi", cfg.check))
    rule = volume_rule(phi.support, _support_resolution(cfg.resolution, 24))
    residual = semiweak_cullen_residual(d, f, phi, rule, cfg.fd_config())
    return weak_report(
        "semiweak-cullen",
        residual,
        _tolerance(cfg, 1e-3),
        _field_scale(phi, f),
        {"domain": d.spec, "field": f.name},
        time.perf_counter() - start,
    )


@register(
    "cullen-represent",
    "Two-term representation of a C-regular field off the axis plane",
    domain="ball:2,2,2,0,0.8",
    field="identity",
    point=[2.1, 2.2, 1.9, 0.1],
)
def _run_cullen_represent(cfg: RunConfig) -> CheckReport:
    start = time.perf_counter()
    d, f, p = _domain(cfg), _field(cfg), _point(cfg)
    srule = singular_volume_rule(radial=cfg.resolution)
    brule = boundary_rule(d, cfg.resolution)
    volume, boundary = cullen_represent_terms(d, f, p, srule, brule, cfg.fd_config())
    return CheckReport.compare(
        "cullen-represent",
        volume + boundary,
        f(p),
        _tolerance(cfg, 1e-3),
        parameters={
            "domain": d.spec,
            "field": f.name,
            "point": p.to_list(),
            "volume_term": volume.to_list(),
            "boundary_term": boundary.to_list(),
        },
        node_counts={"singular_volume": srule.node_count, "boundary": brule.node_count},
        elapsed_seconds=time.perf_counter() - start,
    )


@register(
    "classical-probe",
    "max |D_l f - h| at seeded interior probes (h = 0 without --rhs-field)",
    domain="ball:0,0,0,0,1",
    field="kernel:3,0,0,0",
    samples=10,
)
def _run_classical_probe(cfg: RunConfig) -> CheckReport:
    d, f = _domain(cfg), _field(cfg)
    h = parse_field(cfg.rhs_field) if cfg.rhs_field else None
    probe_cfg = cfg.fd_config().model_copy(update={"prefer_closed_form": False})
    return classical_from_weak_probe(
        d, f, h, interior_probes(d, cfg.samples, cfg.seed), probe_cfg, _tolerance(cfg, 1e-7)
    )


# ============================================================================
# ORCHESTRATION
# ============================================================================

def write_text_output(text: str, out: Union[str, Path]) -> Path:
    """
    Write a report, table or summary. A bare file name lands in the report
    directory (FUETER_REPORT_DIR); any other path is used as given.
    """
    path = Path(out)
    if path.parent == Path("."):
        path = Path(config.get_report_dir()) / path
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text if text.endswith("\n") else text + "\n", encoding="utf-8")
    logger.debug(f"wrote {path}")
    return path


def write_report(report: CheckReport, out: Union[str, Path]) -> Path:
    return write_text_output(report.to_json(), out)


def run_check(cfg: RunConfig) -> CheckReport:
    """
    Execute one registered check.

    Args:
        cfg: Run configuration; unset fields take the check's defaults

    Returns:
        CheckReport (also written to cfg.out when set)

    Raises:
        UnknownCheckError: If the check is not registered
        ConfigError: If a spec string or value is malformed
        PreconditionError: If the inputs violate the check's preconditions
        NumericalEvaluationError: If a field is non-finite at a node
    """
    resolved = resolve_config(cfg)
    definition = get_check(resolved.check)
    logger.debug(f"running {resolved.check} with {resolved.model_dump(exclude_none=True)}")
    report = definition.runner(resolved)
    logger.info(
        f"{report.check_name}: abs_err={report.abs_err:.3e} rel_err={report.rel_err:.3e} pass={report.passed}"
    )
    if resolved.out is not None:
        write_report(report, resolved.out)
    return report


def run_convergence(cfg: RunConfig, resolutions: Sequence[float]) -> ConvergenceTable:
    """
    Run a check at several resolutions and fit the empirical order.

    For `sphere-limit` the sweep is over eps (the values in `resolutions`) and
    the order is the slope of log(err) against log(eps); otherwise it is minus
    the slope against log(resolution).

    Raises:
        ConfigError: If fewer than three resolutions are given
    """
    if len(resolutions) < 3:
        raise ConfigError(f"Convergence needs at least 3 resolutions, got {len(resolutions)}")
    resolved = resolve_config(cfg)
    values = sorted(resolutions)

    if resolved.check == "sphere-limit":
        if any(v <= 0 for v in values):
            raise ConfigError("eps values must be positive")
        reports = sphere_limit_check(
            _point(resolved),
            _field(resolved),
            values,
            eps_sphere_rule(resolved.resolution),
            tolerance=_tolerance(resolved, SPHERE_LIMIT_TOLERANCE),
        )
        rows = [
            ConvergenceRow(
                resolution=r.parameters["eps"],
                abs_err=r.abs_err,
                rel_err=r.rel_err,
                elapsed_seconds=r.elapsed_seconds,
            )
            for r in reports
        ]
        sweep, sign = "eps", 1.0
        reference = reports[0].rhs_quaternion.norm()
    else:
        definition = get_check(resolved.check)
        rows, reference = [], 0.0
        for n in values:
            try:
                run_cfg = resolved.model_copy(update={"resolution": int(n), "out": None})
                RunConfig.model_validate(run_cfg.model_dump())
            except ValidationError as exc:
                raise ConfigError(f"Invalid resolution {n}: {exc}")
            report = definition.runner(run_cfg)
            reference = max(reference, report.rhs_quaternion.norm())
            rows.append(
                ConvergenceRow(
                    resolution=int(n),
                    abs_err=report.abs_err,
                    rel_err=report.rel_err,
                    elapsed_seconds=report.elapsed_seconds,
                )
            )
        sweep, sign = "resolution", -1.0

    rows.sort(key=lambda row: row.resolution)
    floor = CONVERGENCE_FLOOR * max(1.0, reference)
    slope, label = fit_order([r.resolution for r in rows], [r.abs_err for r in rows], floor)
    order = None if slope is None else sign * slope
    if order is not None:
        label = f"{order:.3f}"
    else:
        logger.warning(f"{resolved.check}: every error is at the rounding floor, no order fitted")
    return ConvergenceTable(
        check_name=resolved.check,
        sweep_parameter=sweep,
        rows=rows,
        empirical_order=order,
        order_label=label,
    )


def load_suite(text: str, source: str = "<suite>") -> List[RunConfig]:
    """
    Parse a suite document: a JSON list of RunConfig objects, or an object
    with a "checks" list.

    Raises:
        ConfigError: On invalid JSON (with line and column), invalid entries or
            unknown check names
    """
    document = load_json_document(text, source)
    if isinstance(document, dict):
        document = ensure_keys(document, ["checks"], source)["checks"]
    if not isinstance(document, list):
        raise ConfigError(f"{source}: a suite is a list of check configurations")

    configs = []
    for index, entry in enumerate(document):
        try:
            configs.append(RunConfig.model_validate(entry))
        except ValidationError as exc:
            raise ConfigError(f"{source}: entry {index} is invalid: {exc}")
        get_check(configs[-1].check)
    return configs


def _run_entry(cfg: RunConfig) -> Tuple[SuiteEntryResult, Optional[CheckReport]]:
    try:
        report = run_check(cfg)
    except FueterCheckError as exc:
        logger.warning(f"{cfg.check} raised {type(exc).__name__}: {exc}")
        return SuiteEntryResult(check_name=cfg.check, passed=False, error=f"{type(exc).__name__}: {exc}"), None
    entry = SuiteEntryResult(
        check_name=cfg.check, passed=report.passed, abs_err=report.abs_err, rel_err=report.rel_err
    )
    return entry, report


def run_suite_configs(configs: Sequence[RunConfig], workers: int = 1) -> SuiteSummary:
    """Run every entry (concurrently when workers > 1); results sorted by check name."""
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_run_entry, configs))
    else:
        outcomes = [_run_entry(cfg) for cfg in configs]

    outcomes.sort(key=lambda outcome: outcome[0].check_name)
    entries = [entry for entry, _ in outcomes]
    reports = [report for _, report in outcomes if report is not None]
    failures = sum(1 for entry in entries if not entry.passed)
    return SuiteSummary(
        total=len(entries),
        failures=failures,
        passed=failures == 0,
        checks=entries,
        reports=reports,
    )


def run_suite(path: Union[str, Path], workers: int = 1) -> SuiteSummary:
    """Load a suite file and run it."""
    path = Path(path)
    configs = load_suite(_read_suite(path), str(path))
    logger.info(f"suite {path}: {len(configs)} checks, {workers} worker(s)")
    return run_suite_configs(configs, workers)


def _read_suite(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"Cannot read suite {path}: {exc}")


def load_run_config(path: Union[str, Path]) -> RunConfig:
    """Parse a single RunConfig JSON file."""
    document = load_json_file(path)
    try:
        return RunConfig.model_validate(ensure_keys(document, ["check"], str(path)))
    except ValidationError as exc:
        raise ConfigError(f"{path}: invalid run configuration: {exc}")
