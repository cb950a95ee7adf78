import numpy as np
import pytest

from sinckrein.experiments import (
    SuiteConfig,
    numeric_fingerprint,
    obstruction_report,
    run_suite,
    validate_bundle,
    volterra_demo,
)


def test_volterra_mu_zero_is_identity_conjugation():
    rep = volterra_demo(0.0, 5.0)
    assert rep.W_equals_V and rep.max_eig_difference == 0.0


def test_volterra_spectral_radius_shrinks():
    coarse = volterra_demo(0.5, 10.0, panels_per_unit=2)
    fine = volterra_demo(0.5, 10.0, panels_per_unit=4)
    assert coarse.spectral_radius <= 0.05
    assert fine.spectral_radius < coarse.spectral_radius


def test_volterra_similarity_trace_invariants():
    rep = volterra_demo(0.5, 10.0)
    assert rep.trace_power_defect < 1e-12


def test_volterra_eigenvalues_match():
    rep = volterra_demo(0.5, 10.0)
    assert rep.max_eig_difference <= 1e-8


@pytest.fixture(scope="module")
def obstruction(table_half):
    return obstruction_report(0.5, (5.0, 10.0), (1j, 2j), table=table_half)


def test_obstruction_constants(obstruction):
    rep = obstruction
    assert rep.G_at_zero == 2.0
    assert np.allclose(rep.G_at_zero_numeric, 2.0, atol=1e-12)
    assert rep.mismatch_ratio == pytest.approx(4.0)
    assert rep.H_candidates["2C|hatPi(0)|"]["closed"] == pytest.approx(0.5, abs=1e-14)
    assert rep.H_candidates["-2C*Pi(0)"]["closed"] == pytest.approx(-2.0, abs=1e-14)


def test_obstruction_records_trends(obstruction):
    rep = obstruction
    assert rep.xi_ladder == [5.0, 10.0, 20.0]
    assert len(rep.cauchy_delta) == 2 and rep.delta_trend in ("increasing", "decreasing", "mixed")
    assert len(rep.probes) == 2
    assert len(rep.probes[0]["w21"]) == 3
    assert isinstance(rep.to_dict()["probes"][0]["z"], dict)


@pytest.mark.parametrize("mu", [0.01, 0.05])
def test_mismatch_ratio_small_mu(mu):
    ratio = 1 / (1 - mu) ** 2
    assert 1 < ratio < 1.11


def test_obstruction_rejects_bad_input():
    with pytest.raises(ValueError):
        obstruction_report(0.5, (10.0, 5.0))


def test_partial_suite_is_deterministic_and_valid():
    cfg = SuiteConfig(jobs=1)
    a = run_suite(cfg, tasks=["C8", "C10"])
    b = run_suite(cfg, tasks=["C8", "C10"])
    assert numeric_fingerprint(a) == numeric_fingerprint(b)
    assert validate_bundle(a) == (True, "")
    assert {c["check_id"] for c in a["checks"]} == {"C8.w21", "C10.spectrum"}


def test_suite_reports_task_errors_without_aborting(monkeypatch):
    from sinckrein import experiments

    def boom(cfg):
        raise RuntimeError("x")

    monkeypatch.setitem(experiments._TASKS, "C8", boom)
    bundle = run_suite(SuiteConfig(jobs=1), tasks=["C8", "C10"])
    ids = [c["check_id"] for c in bundle["checks"]]
    assert ids == ["C8.error", "C10.spectrum"]
    assert validate_bundle(bundle)[0]


def test_tolerance_override():
    bundle = run_suite(SuiteConfig(jobs=1, tolerances={"C8.w21": 0.0}), tasks=["C8"])
    assert bundle["checks"][0]["tolerance"] == 0.0
