"""Acceptance criteria, each run at its stated tolerance.

The full suite runs once per session; every criterion below asserts all of
its checks and prints one PASS/FAIL line.  Run directly with
``python3 tests/test_acceptance.py`` for the lines alone.
"""

import os

import pytest

from sinckrein.experiments import SuiteConfig, numeric_fingerprint, run_suite

CRITERIA = {
    1: ("diagonal resolvent limit", ["C1.diag_limit", "C1.diag_limit_corrected"]),
    2: ("q1 limit for three couplings",
        ["C2.q1_limit.mu=0.25", "C2.q1_limit.mu=0.5", "C2.q1_limit.mu=0.75"]),
    3: ("product identity q1 q2 = 1/2", ["C3.q_product"]),
    4: ("Tracy-Widom ODE residual and its order", ["C4.tw_ode", "C4.tw_ode_order"]),
    5: ("corner oscillation envelope and zero spacing", ["C5.corner_peaks", "C5.zero_spacing"]),
    6: ("Krein ODE against the closed form", ["C6.krein_vs_closed", "C6.closed_vs_quadrature"]),
    7: ("spectral identities", ["C7.pi_limit", "C7.v_at_zero", "C7.hat_pi"]),
    8: ("w21 double representation", ["C8.w21"]),
    9: ("obstruction constants",
        ["C9.G_at_zero", "C9.H_closed", "C9.H_ode", "C9.mismatch_ratio"]),
    10: ("finite-section spectrum", ["C10.spectrum"]),
    11: ("factor kernel against resolvent", ["C11.factor_kernel", "C11.factor_refinement"]),
    12: ("property suites, schema, determinism, runtime",
         ["C12.conservation", "C12.det_H", "C12.reverse_cholesky", "C12.determinism",
          "C12.schema", "C12.runtime"]),
}


@pytest.fixture(scope="session")
def bundle():
    return run_suite(SuiteConfig(jobs=os.cpu_count()))


def _line(n, checks):
    name, ids = CRITERIA[n]
    ok = all(checks[i]["pass"] for i in ids)
    parts = [f"{i}={checks[i]['value']:.3g}" if checks[i]["value"] is not None else f"{i}=error"
             for i in ids]
    return ok, f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {name}: " + ", ".join(parts)


@pytest.mark.parametrize("n", sorted(CRITERIA))
def test_criterion(n, bundle, acceptance_lines):
    checks = {c["check_id"]: c for c in bundle["checks"]}
    missing = [i for i in CRITERIA[n][1] if i not in checks]
    assert not missing, f"checks not produced: {missing}"
    ok, line = _line(n, checks)
    print(line)
    acceptance_lines.append(line)
    failed = [(i, checks[i]["value"], checks[i]["target"], checks[i]["tolerance"])
              for i in CRITERIA[n][1] if not checks[i]["pass"]]
    assert ok, f"failed checks (id, value, target, tolerance): {failed}"


def test_rerun_is_bitwise_identical(bundle):
    tasks = ["C6+C7", "C8", "C10"]
    again = run_suite(SuiteConfig(jobs=1), tasks=tasks)
    ids = {c["check_id"] for c in again["checks"]}
    first = [f for f in numeric_fingerprint(bundle) if f[0] in ids]
    assert first == numeric_fingerprint(again)


if __name__ == "__main__":
    result = run_suite(SuiteConfig(jobs=os.cpu_count()))
    checks = {c["check_id"]: c for c in result["checks"]}
    for n in sorted(CRITERIA):
        print(_line(n, checks)[1])
