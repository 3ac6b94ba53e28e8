"""
Check registry, config resolution, convergence sweeps and suites.
"""
import json

import numpy as np
import pytest

from app import checks
from app.errors import ConfigError, UnknownCheckError
from app.fields import parse_field
from app.geometry import boundary_rule, parse_domain, singular_volume_rule
from app.schemas import RunConfig

EXPECTED_CHECKS = {
    "gauss",
    "green",
    "sphere-limit",
    "kernel-identities",
    "kernel-regularity",
    "testfn-kernel",
    "newton-potential",
    "cauchy",
    "weak",
    "weak-inhom",
    "semiweak-cullen",
    "cullen-represent",
    "classical-probe",
}


def test_every_check_is_registered():
    assert set(checks.CHECKS) == EXPECTED_CHECKS
    for name, definition in checks.CHECKS.items():
        assert definition.name == name
        assert definition.description


def test_unknown_check():
    with pytest.raises(UnknownCheckError):
        checks.get_check("stokes")
    with pytest.raises(ConfigError):
        checks.run_check(RunConfig(check="stokes"))


def test_resolve_config_prefers_explicit_values():
    resolved = checks.resolve_config(RunConfig(check="cauchy", field="const", resolution=12))
    assert resolved.field == "const"
    assert resolved.resolution == 12
    assert resolved.domain == "ball:0,0,0,0,1"
    assert resolved.point == [0.2, 0.1, 0.0, -0.1]


def test_malformed_specs_raise_config_errors():
    with pytest.raises(ConfigError):
        checks.run_check(RunConfig(check="cauchy", domain="sphere:1"))
    with pytest.raises(ConfigError):
        checks.run_check(RunConfig(check="cauchy", field="power:x"))


def test_kernel_identities_run():
    report = checks.run_check(RunConfig(check="kernel-identities", samples=200, seed=5))
    assert report.passed
    assert report.parameters["seed"] == 5


def test_gauss_run_on_components():
    report = checks.run_check(RunConfig(check="gauss", resolution=8))
    assert report.passed
    # sum of the component divergences of q is 4, integrated over the unit ball
    assert np.allclose(report.rhs, [2.0 * np.pi ** 2, 0.0, 0.0, 0.0], rtol=1e-8)


def test_cauchy_run_and_negative_control():
    assert checks.run_check(RunConfig(check="cauchy", field="const", resolution=12, tolerance=1e-6)).passed
    report = checks.run_check(RunConfig(check="cauchy", field="identity", resolution=12))
    assert not report.passed
    assert np.allclose(report.lhs, report.parameters["identity_closed_form"], atol=1e-8)


def test_sphere_limit_run():
    report = checks.run_check(RunConfig(check="sphere-limit", resolution=16))
    assert report.passed
    assert report.parameters["empirical_order"] == "2.000"
    assert report.parameters["deviations"][0] > report.parameters["deviations"][-1]


def test_sphere_limit_with_zero_tolerance_fails():
    report = checks.run_check(RunConfig(check="sphere-limit", resolution=16, tolerance=0.0))
    assert not report.passed


def test_weak_and_semiweak_runs():
    assert checks.run_check(RunConfig(check="weak")).passed
    assert checks.run_check(RunConfig(check="weak-inhom")).passed
    assert checks.run_check(RunConfig(check="semiweak-cullen")).passed
    failing = checks.run_check(RunConfig(check="weak", field="conj"))
    assert not failing.passed


def test_newton_potential_run():
    report = checks.run_check(RunConfig(check="newton-potential", resolution=8, samples=3))
    assert report.check_name == "newton-potential"
    assert report.passed, report.parameters
    assert report.parameters["closed_form_max_err"] < 1e-3
    assert report.node_counts["probes"] == 3


def test_cullen_represent_run():
    report = checks.run_check(RunConfig(check="cullen-represent", resolution=12))
    assert report.passed
    assert set(report.parameters) >= {"volume_term", "boundary_term"}
    d = parse_domain("ball:2,2,2,0,0.8")
    assert report.node_counts["boundary"] == boundary_rule(d, 12).node_count
    assert report.node_counts["singular_volume"] == singular_volume_rule(radial=12).node_count


def test_weak_inhom_newton_rule_follows_the_resolution(monkeypatch):
    rules = []

    def recording(d, h, rule=None):
        rules.append(rule)
        return parse_field("identity")

    monkeypatch.setattr(checks, "newton_potential_field", recording)
    for n in (12, 24):
        report = checks.run_check(RunConfig(check="weak-inhom", field="newton", resolution=n))
        assert report.passed
        assert report.node_counts["singular_volume"] == rules[-1].node_count
    assert rules[0].node_count < rules[1].node_count


def test_classical_probe_run():
    assert checks.run_check(RunConfig(check="classical-probe", samples=4)).passed
    report = checks.run_check(RunConfig(check="classical-probe", field="conj", samples=4))
    assert not report.passed


def test_run_check_writes_the_report(tmp_path):
    out = tmp_path / "reports" / "kernel.json"
    checks.run_check(RunConfig(check="kernel-identities", samples=20, out=out))
    data = json.loads(out.read_text())
    assert data["check_name"] == "kernel-identities"
    assert data["pass"] is True
    assert "elapsed_seconds" in data


def test_bare_report_names_land_in_the_report_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("FUETER_REPORT_DIR", str(tmp_path / "reports"))
    checks.run_check(RunConfig(check="kernel-identities", samples=10, out="kernel.json"))
    assert (tmp_path / "reports" / "kernel.json").exists()


def test_interior_probes_are_seeded_and_inside():
    for spec in ("ball:1,0,0,0,0.5", "box:0,0,0,0,1,2,1,1"):
        d = parse_domain(spec)
        probes = checks.interior_probes(d, 25, seed=3)
        assert probes == checks.interior_probes(d, 25, seed=3)
        assert all(d.contains(p) for p in probes)
    with pytest.raises(ConfigError):
        checks.interior_probes(parse_domain("ball:0,0,0,0,1"), 0, seed=0)


def test_component_fields(rng):
    f = parse_field("power:2")
    points = rng.normal(size=(6, 4))
    parts = checks.component_fields(f)
    values = f(points)
    for k, part in enumerate(parts):
        assert np.allclose(part(points)[:, 0], values[:, k])
        assert np.allclose(part(points)[:, 1:], 0.0)
        assert np.allclose(part.partials(points)[:, :, 0], f.partials(points)[:, :, k])


# ----------------------------------------------------------------------------
# convergence
# ----------------------------------------------------------------------------

def test_convergence_of_the_cauchy_integral():
    table = checks.run_convergence(RunConfig(check="cauchy"), [8, 4, 6])
    assert [row.resolution for row in table.rows] == [4, 6, 8]
    assert table.sweep_parameter == "resolution"
    assert table.empirical_order is not None and table.empirical_order >= 2.0
    csv_text = table.to_csv()
    assert csv_text.splitlines()[0] == "resolution,abs_err,rel_err,elapsed_seconds"
    assert csv_text.splitlines()[-1].startswith("order,")


def test_convergence_at_the_floor():
    table = checks.run_convergence(RunConfig(check="cauchy", field="const"), [16, 20, 24])
    assert table.order_label == "floor"
    assert table.empirical_order is None


def test_convergence_over_eps():
    table = checks.run_convergence(RunConfig(check="sphere-limit", resolution=16), [0.2, 0.1, 0.05])
    assert table.sweep_parameter == "eps"
    assert [row.resolution for row in table.rows] == [0.05, 0.1, 0.2]
    assert abs(table.empirical_order - 2.0) < 1e-6


def test_convergence_needs_three_runs():
    with pytest.raises(ConfigError):
        checks.run_convergence(RunConfig(check="cauchy"), [4, 8])


# ----------------------------------------------------------------------------
# suites
# ----------------------------------------------------------------------------

SUITE = [
    {"check": "kernel-identities", "samples": 50},
    {"check": "cauchy", "field": "const", "resolution": 8, "tolerance": 1e-6},
    {"check": "cauchy", "field": "identity", "resolution": 8},
    {"check": "cauchy", "point": [2, 0, 0, 0], "resolution": 8},
]


def test_load_suite_accepts_lists_and_objects():
    assert len(checks.load_suite(json.dumps(SUITE))) == 4
    assert len(checks.load_suite(json.dumps({"checks": SUITE}))) == 4
    fenced = "notes\n```json\n" + json.dumps(SUITE) + "\n```\n"
    assert len(checks.load_suite(fenced)) == 4


@pytest.mark.parametrize(
    "text, match",
    [
        ('[{"check": "cauchy",}]', "line 1"),
        ('{"entries": []}', "missing required keys"),
        ('"cauchy"', "list of check configurations"),
        ('[{"domain": "ball:0,0,0,0,1"}]', "entry 0"),
        ('[{"check": "stokes"}]', "Unknown check"),
    ],
)
def test_load_suite_errors(text, match):
    with pytest.raises(ConfigError, match=match):
        checks.load_suite(text)


def test_suite_run_collects_failures_and_errors():
    summary = checks.run_suite_configs(checks.load_suite(json.dumps(SUITE)))
    assert summary.total == 4
    assert summary.failures == 2
    assert not summary.passed
    assert [entry.check_name for entry in summary.checks] == ["cauchy", "cauchy", "cauchy", "kernel-identities"]
    errored = [entry for entry in summary.checks if entry.error]
    assert len(errored) == 1
    assert errored[0].error.startswith("PreconditionError")
    assert len(summary.reports) == 3


def test_empty_suite_passes():
    summary = checks.run_suite_configs(checks.load_suite("[]"))
    assert summary.total == 0
    assert summary.passed


def test_suite_results_do_not_depend_on_workers():
    configs = checks.load_suite(json.dumps(SUITE))
    serial = checks.run_suite_configs(configs, workers=1)
    threaded = checks.run_suite_configs(configs, workers=3)
    assert [e.model_dump() for e in serial.checks] == [e.model_dump() for e in threaded.checks]


def test_run_suite_from_file(tmp_path):
    path = tmp_path / "suite.json"
    path.write_text(json.dumps(SUITE[:2]))
    summary = checks.run_suite(path)
    assert summary.passed
    data = json.loads(summary.to_json(include_timing=False))
    assert data["pass"] is True
    assert all("elapsed_seconds" not in report for report in data["reports"])
    with pytest.raises(ConfigError):
        checks.run_suite(tmp_path / "missing.json")


def test_load_run_config(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"check": "cauchy", "resolution": 10}))
    assert checks.load_run_config(path).resolution == 10
    path.write_text(json.dumps({"resolution": 10}))
    with pytest.raises(ConfigError):
        checks.load_run_config(path)


def test_repeated_suite_runs_are_byte_identical_without_timing():
    configs = checks.load_suite(json.dumps(SUITE + [{"check": "classical-probe", "samples": 3, "seed": 11}]))
    first = checks.run_suite_configs(configs, workers=2).to_json(include_timing=False)
    second = checks.run_suite_configs(configs, workers=2).to_json(include_timing=False)
    assert first == second
