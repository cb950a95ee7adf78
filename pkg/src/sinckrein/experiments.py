"""Obstruction report, Volterra similarity demo and the acceptance suite."""

from __future__ import annotations

import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from importlib import resources

import numpy as np
from scipy.integrate import quad

from .asymptotics import (
    asymptotics_report,
    corner_envelope,
    corner_values,
    painleve_constants,
    uniform_grid,
)
from .finite_section import (
    DEFAULT_ORDER,
    DEFAULT_PANELS_PER_UNIT,
    build_section,
    check_mu,
    resolvent_of_q,
)
from .krein_factor import factor_vs_resolvent, reverse_cholesky
from .krein_system import (
    G_function,
    canonical_system,
    hat_pi_closed,
    integrate_krein,
    pi_closed,
    sample_B,
    weyl_v,
    w21,
)

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1


def load_schema() -> dict:
    text = resources.files("sinckrein").joinpath("report_schema.json").read_text()
    return json.loads(text)


# --------------------------------------------------------------------------
# obstruction


def _nystrom_solution(section, f, u, x) -> np.ndarray:
    """Extend a node solution of ``S u = f`` to points ``x`` in [0, xi]."""
    from .quadrature import sinc_kernel

    g = section.grid
    x = np.asarray(x, dtype=float)
    H = sinc_kernel(x[:, None] - g.nodes[None, :]) * g.weights[None, :]
    return f(x) + section.mu * H @ u


def _l2(grid, values) -> float:
    return float(np.sqrt(np.dot(grid.weights, np.abs(values) ** 2)))


def ode_limits(mu: float, table=None, ys=(0.1, 0.05)) -> dict:
    """``Pi(iy)`` and ``hat Pi(iy)`` from the Krein ODE, extrapolated to y = 0.

    Values at the two ``ys`` are combined linearly, which removes the O(y)
    term of the approach along the imaginary axis.
    """
    if table is None:
        table = sample_B(mu, 40.0)
    y1, y2 = ys
    z = np.array([1j * y1, 1j * y2])
    std = integrate_krein(table, z)
    hat = integrate_krein(table, z, init_kind="hat")
    pi = [complex(t.Pstar[-1]) for t in std]
    hp = [complex(t.Pstar[-1]) for t in hat]

    def extrap(v):
        return (y1 * v[1] - y2 * v[0]) / (y1 - y2)

    return {
        "ys": [float(y1), float(y2)],
        "Pi": pi,
        "hatPi": hp,
        "Pi_0": extrap(pi),
        "hatPi_0": extrap(hp),
    }


@dataclass
class ObstructionReport:
    mu: float
    xi_ladder: list
    norm_Rxi: list
    T_list: list
    cauchy_delta: list
    delta_sqrt_T: list
    delta_trend: str
    G_at_zero: float
    G_at_zero_numeric: list
    H_candidates: dict
    mismatch_ratio: float
    probes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))


def _trend(values) -> str:
    d = np.diff(values)
    if len(d) == 0:
        return "n/a"
    if np.all(d > 0):
        return "increasing"
    if np.all(d < 0):
        return "decreasing"
    return "mixed"


def obstruction_report(
    mu: float, T_list=(5.0, 10.0, 20.0), z_probe_list=(1j, 2j), table=None,
    panels_per_unit: int = DEFAULT_PANELS_PER_UNIT, order: int = DEFAULT_ORDER,
) -> ObstructionReport:
    """Amplitude constants on both sides, plus ``R_xi`` norms and Cauchy gaps.

    ``R_xi = S_xi^{-1} q`` with ``q = M - (1 - mu)/2``.  ``delta(T)`` compares
    ``R_{2T}`` restricted to [0, T] with ``R_T``; its trend is recorded, not
    judged.
    """
    from .finite_section import q_remainder

    mu = check_mu(mu, allow_zero=False)
    T = [float(t) for t in T_list]
    if not T or np.any(np.diff(T) <= 0):
        raise ValueError("T_list must be non-empty and ascending")
    xi_ladder = sorted(set(T) | {2 * t for t in T})
    sections = {
        x: build_section(mu, x, panels_per_unit=panels_per_unit, order=order) for x in xi_ladder
    }
    Rq = {x: resolvent_of_q(s) for x, s in sections.items()}
    norms = [_l2(sections[x].grid, Rq[x]) for x in xi_ladder]

    def q(x):
        return q_remainder(x, mu)

    deltas = []
    for t in T:
        short = sections[t]
        on_short = _nystrom_solution(sections[2 * t], q, Rq[2 * t], short.grid.nodes)
        deltas.append(_l2(short.grid, on_short - Rq[t]))
    dsT = [d * np.sqrt(t) for d, t in zip(deltas, T)]

    G0 = 1.0 / (1.0 - mu)
    G0_num = [G_function(sections[x], 0.0, Rq[x]).real for x in xi_ladder]

    C = 1.0 / np.sqrt(1.0 - mu)
    if table is None:
        table = sample_B(mu, 40.0)
    lim = ode_limits(mu, table)
    hat_closed = hat_pi_closed(mu, 0.0)
    pi0 = pi_closed(mu, 0.0)
    H = {
        "2C|hatPi(0)|": {
            "closed": 2 * C * abs(hat_closed),
            "ode": 2 * C * abs(lim["hatPi_0"]),
        },
        "-2C*Pi(0)": {
            "closed": (-2 * C * pi0).real,
            "ode": (-2 * C * lim["Pi_0"]).real,
        },
        "hatPi(0)": {"closed": hat_closed, "ode": lim["hatPi_0"]},
        "Pi(0)": {"closed": pi0, "ode": lim["Pi_0"]},
    }

    probes = []
    for z in z_probe_list:
        z = complex(z)
        if z.imag <= 0:
            continue
        w = [w21(sections[x], z).resolvent_form for x in xi_ladder]
        krein_side = 2 * C * hat_pi_closed(mu, z)
        dist = [abs(v - krein_side) for v in w]
        probes.append({
            "z": z,
            "w21": w,
            "krein_side": krein_side,
            "distance": dist,
            "stabilizes": bool(len(w) > 1 and abs(w[-1] - w[-2]) <= 1e-2),
            "approaches_krein_side": bool(dist[-1] <= 1e-2),
        })

    return ObstructionReport(
        mu=mu, xi_ladder=xi_ladder, norm_Rxi=norms, T_list=T, cauchy_delta=deltas,
        delta_sqrt_T=dsT, delta_trend=_trend(dsT), G_at_zero=G0, G_at_zero_numeric=G0_num,
        H_candidates=H, mismatch_ratio=G0 / (1.0 - mu), probes=probes,
    )


# --------------------------------------------------------------------------
# Volterra similarity


@dataclass(frozen=True)
class VolterraReport:
    mu: float
    xi: float
    n: int
    spectral_radius: float
    max_eig_difference: float
    trace_power_defect: float
    norm_W: float
    W_equals_V: bool


def volterra_matrix(grid) -> np.ndarray:
    """Weight-scaled ``exp(-(x + y))`` for ``y < x``; the diagonal gets half weight."""
    s = grid.nodes
    sw = grid.sqrt_weights
    K = np.exp(-(s[:, None] + s[None, :])) * sw[:, None] * sw[None, :]
    return np.tril(K, -1) + np.diag(0.5 * np.diag(K))


def _match_eigenvalues(a, b) -> float:
    from scipy.optimize import linear_sum_assignment

    cost = np.abs(a[:, None] - b[None, :])
    r, c = linear_sum_assignment(cost)
    return float(cost[r, c].max())


def volterra_demo(
    mu: float, xi: float = 10.0, panels_per_unit: int = DEFAULT_PANELS_PER_UNIT,
    order: int = DEFAULT_ORDER, powers: int = 4,
) -> VolterraReport:
    """Conjugate the discrete Volterra operator by the section's square root.

    ``W = S^{1/2} V S^{-1/2}`` with ``S^{1/2}`` from a symmetric
    eigendecomposition.  ``max_eig_difference`` pairs the eigenvalues of
    ``W`` with the diagonal of ``V``; ``trace_power_defect`` compares
    ``tr W^k`` and ``tr V^k`` for ``k <= powers``.
    """
    sec = build_section(mu, xi, panels_per_unit=panels_per_unit, order=order)
    V = volterra_matrix(sec.grid)
    lam, Q = np.linalg.eigh(sec.matrix)
    root = (Q * np.sqrt(lam)) @ Q.T
    inv_root = (Q / np.sqrt(lam)) @ Q.T
    W = root @ V @ inv_root
    ev = np.diag(V).astype(complex)
    ew = np.linalg.eigvals(W)
    tr = 0.0
    Vk, Wk = np.eye(len(V)), np.eye(len(V))
    for _ in range(powers):
        Vk, Wk = Vk @ V, Wk @ W
        tr = max(tr, abs(np.trace(Wk) - np.trace(Vk)))
    return VolterraReport(
        mu=float(mu), xi=float(sec.xi), n=sec.n,
        spectral_radius=float(np.max(np.abs(ev))),
        max_eig_difference=_match_eigenvalues(ev, ew),
        trace_power_defect=float(tr),
        norm_W=float(np.linalg.norm(W, 2)),
        W_equals_V=bool(np.array_equal(W, V)),
    )


# --------------------------------------------------------------------------
# suite


@dataclass
class SuiteConfig:
    mu: float = 0.5
    panels_per_unit: int = DEFAULT_PANELS_PER_UNIT
    order: int = DEFAULT_ORDER
    t_list: tuple = (5.0, 10.0, 20.0)
    xi_list: tuple = (1.0, 5.0, 10.0, 20.0)
    z_probes: tuple = (1j, 2j)
    q_mus: tuple = (0.25, 0.5, 0.75)
    tolerances: dict = field(default_factory=dict)
    jobs: int | None = None


def pi_quadrature(mu: float, z) -> complex:
    """``Pi(z)`` with the band integral done by adaptive quadrature (Im z > 0)."""
    lam = complex(z) / 2
    if lam.imag <= 0:
        raise ValueError("quadrature oracle needs Im z > 0")
    re = quad(lambda t: ((t - lam) ** -1).real, -np.pi, np.pi, epsabs=1e-13, epsrel=1e-12)[0]
    im = quad(lambda t: ((t - lam) ** -1).imag, -np.pi, np.pi, epsabs=1e-13, epsrel=1e-12)[0]
    return complex(np.exp(np.log1p(-mu) / (2j * np.pi) * complex(re, im)))


def _check(cfg, check_id, what, value, target, tol, mode="abs", **extra) -> dict:
    tol = float(cfg.tolerances.get(check_id, tol))
    if value is None or not np.isfinite(value):
        ok = False
    elif mode == "abs":
        ok = abs(value - target) <= tol
    elif mode == "le":
        ok = value <= tol
    else:
        raise ValueError(mode)
    return {"check_id": check_id, "paper_ref": what, "value": value, "target": target,
            "tolerance": tol, "pass": bool(ok), **extra}


def _grid(cfg) -> dict:
    return {"panels_per_unit": cfg.panels_per_unit, "order": cfg.order}


def _c1(cfg):
    mu = cfg.mu
    a, b = painleve_constants(mu)
    t = 10.0
    d, _ = corner_values(mu, t, **_grid(cfg))
    target = -np.log1p(-mu)
    return [
        _check(cfg, "C1.diag_limit", "diagonal resolvent limit -log(1-mu) at t=10",
               d, target, 1e-2),
        _check(cfg, "C1.diag_limit_corrected", "diagonal limit with the -b/(2t) correction",
               d, target - b / (2 * t), 3e-3),
    ]


def _c23(cfg):
    out = []
    worst = 0.0
    for mu in cfg.q_mus:
        table = sample_B(mu, 40.0 if mu == 0.5 else 30.0)
        xs = table.xs
        k = int(np.argmin(np.abs(xs - 30.0)))
        out.append(_check(cfg, f"C2.q1_limit.mu={mu}", "q1(30) against 1/sqrt(1-mu)",
                          float(table.q1[k]), 1 / np.sqrt(1 - mu), 1e-2))
        keep = (xs >= 0.5) & (xs <= 30.0 + 1e-12)
        worst = max(worst, float(np.max(np.abs(table.q1[keep] * table.q2[keep] - 0.5))))
    out.append(_check(cfg, "C3.q_product", "max |q1 q2 - 1/2| on [0.5, 30]",
                      worst, 0.0, 5e-4, mode="le"))
    return out


def _c4(cfg):
    t = uniform_grid(2.0, 10.0, 0.05)
    r1 = asymptotics_report(cfg.mu, t, 0.05, **_grid(cfg))
    r2 = asymptotics_report(cfg.mu, t, 0.025, **_grid(cfg))
    ratio = r2.max_ode_residual / r1.max_ode_residual
    a = r1.a
    sig = r1.sigma[-1] / (2 * np.pi * r1.t_grid[-1])
    return [
        _check(cfg, "C4.tw_ode", "max |d diag/dt - 2 corner^2| on [2, 10], dt=0.05",
               r1.max_ode_residual, 0.0, 1e-3, mode="le"),
        _check(cfg, "C4.tw_ode_order", "residual ratio when dt is halved",
               ratio, 0.0, 0.5, mode="le"),
        _check(cfg, "C4.sigma_roundtrip", "sigma(2 pi t)/(2 pi t) against a at t=10",
               float(sig), a, 0.02),
    ]


def _c5(cfg):
    mu = cfg.mu
    env = corner_envelope(mu, 10.0, 20.0, table=sample_B(mu, 40.0))
    a = abs(env.a)
    rel = float(np.max(np.abs(env.peak_heights / a - 1.0))) if len(env.peak_heights) else np.nan
    sp = float(np.max(np.abs(env.zero_spacings - 1.0))) if len(env.zeros) > 1 else np.nan
    return [
        _check(cfg, "C5.corner_peaks", "max |peak of t|B(t)| / |a| - 1| on [10, 20]",
               rel, 0.0, 0.2, mode="le", n_peaks=len(env.peak_heights)),
        _check(cfg, "C5.zero_spacing", "max |zero spacing of B - 1| on [10, 20]",
               sp, 0.0, 0.05, mode="le", n_zeros=len(env.zeros),
               first_extremum_sign=env.first_extremum_sign),
    ]


def _c67(cfg):
    mu = cfg.mu
    table = sample_B(mu, 40.0)
    z = 2j
    tr = integrate_krein(table, z, 40.0)
    closed = pi_closed(mu, z)
    oracle = pi_quadrature(mu, z)
    flipped = integrate_krein(table, z, 40.0, b_sign=-1.0)
    lim = ode_limits(mu, table)
    v0 = weyl_v(mu, 0.0)
    hat = integrate_krein(table, z, 40.0, init_kind="hat")
    hat_closed = hat_pi_closed(mu, z)
    return [
        _check(cfg, "C6.krein_vs_closed", "|P*(40, 2i) - Pi_closed(2i)|",
               abs(tr.Pstar[-1] - closed), 0.0, 1e-2, mode="le",
               ode=tr.Pstar[-1], closed=closed,
               flipped_sign_ode_times_closed=flipped.Pstar[-1] * closed),
        _check(cfg, "C6.closed_vs_quadrature", "|Pi_closed(2i) - quadrature of the band integral|",
               abs(closed - oracle), 0.0, 1e-6, mode="le"),
        _check(cfg, "C7.pi_limit", "Pi(iy), y -> 0 from the Krein ODE, against sqrt(1-mu)",
               float(lim["Pi_0"].real), float(np.sqrt(1 - mu)), 1e-2,
               pi_at_ys=lim["Pi"]),
        _check(cfg, "C7.v_at_zero", "|v(0) - i(1-mu)/2| from the closed form",
               abs(v0 - 0.5j * (1 - mu)), 0.0, 1e-15, mode="le"),
        _check(cfg, "C7.hat_pi", "|hat Pi_ode(2i) - i v(2i) Pi(2i)|",
               abs(hat.Pstar[-1] - hat_closed), 0.0, 1e-2, mode="le",
               ode=hat.Pstar[-1], closed=hat_closed),
    ]


def _c8(cfg):
    sec = build_section(cfg.mu, 10.0, **_grid(cfg))
    rep = w21(sec, 1.0)
    return [_check(cfg, "C8.w21", "resolvent form against direct form of w21 at (10, 1)",
                   rep.difference, 0.0, 1e-8, mode="le",
                   phase_convention=rep.phase_convention)]


def _c9(cfg):
    mu = cfg.mu
    rep = obstruction_report(mu, cfg.t_list, cfg.z_probes, table=sample_B(mu, 40.0), **_grid(cfg))
    H = rep.H_candidates["2C|hatPi(0)|"]
    G_dev = float(np.max(np.abs(np.array(rep.G_at_zero_numeric) - rep.G_at_zero)))
    return [
        _check(cfg, "C9.G_at_zero", "max |G(xi, 0) - 1/(1-mu)| over the xi ladder",
               G_dev, 0.0, 1e-12, mode="le"),
        _check(cfg, "C9.H_closed", "2C|hat Pi(0)| from the closed form against 1-mu",
               float(H["closed"]), 1 - mu, 2e-2),
        _check(cfg, "C9.H_ode", "2C|hat Pi(0)| from ODE limits against 1-mu",
               float(H["ode"]), 1 - mu, 2e-2),
        _check(cfg, "C9.mismatch_ratio", "G(0)/H(0) against (1-mu)^-2",
               rep.G_at_zero / float(H["closed"]), 1 / (1 - mu) ** 2, 0.1),
    ], rep.to_dict()


def _c10(cfg):
    mu = cfg.mu
    ev = build_section(mu, 10.0, **_grid(cfg)).eigenvalues()
    excursion = max(0.0, (1 - mu) - ev.min(), ev.max() - 1.0)
    return [_check(cfg, "C10.spectrum", "eigenvalues of the xi=10 section inside [1-mu, 1]",
                   float(excursion), 0.0, 1e-8, mode="le",
                   min_eig=float(ev.min()), max_eig=float(ev.max()))]


def _c11(cfg):
    mu = cfg.mu
    p = cfg.panels_per_unit
    c1 = factor_vs_resolvent(mu, 10.0, p, cfg.order)
    c2 = factor_vs_resolvent(mu, 10.0, 2 * p, cfg.order)
    return [
        _check(cfg, "C11.factor_kernel", "factor kernel against resolvent, relative, xi=10",
               c1.max_rel_error, 0.0, 1e-3, mode="le", raw=c1.raw_max_rel_error,
               n_pairs=c1.n_pairs),
        _check(cfg, "C11.factor_refinement", "error ratio after doubling panels",
               c2.max_rel_error / c1.max_rel_error, 0.0, 1.0, mode="le"),
    ]


def _determinism_probe(mu):
    table = sample_B(mu, 10.0)
    tr = integrate_krein(table, 1.0 + 1j)
    sec = build_section(mu, 5.0)
    return [tr.Pstar[-1], tr.P[-1], w21(sec, 1.0).resolvent_form, float(sec.chol[-1, -1])]


def _c12(cfg):
    mu = cfg.mu
    table = sample_B(mu, 40.0)
    tr = integrate_krein(table, 1.0)
    x = tr.xs[1:]
    cons = float(np.max(tr.conservation_defect()[1:] / x))
    can = canonical_system(table, 1.0, 20.0)
    sec = build_section(mu, 10.0, **_grid(cfg))
    V = reverse_cholesky(sec.matrix).matrix
    recon = float(np.max(np.abs(sec.matrix @ (V.T @ V) - np.eye(sec.n))))
    a = _determinism_probe(mu)
    b = _determinism_probe(mu)
    same = all(complex(p) == complex(q) for p, q in zip(a, b))
    return [
        _check(cfg, "C12.conservation", "max (|P|^2 - |P*|^2 - 1)/x, z=1",
               cons, 0.0, 1e-8, mode="le"),
        _check(cfg, "C12.det_H", "max det H(x) of the canonical Hamiltonian",
               can.det_H_max, 0.0, 5e-4, mode="le"),
        _check(cfg, "C12.reverse_cholesky", "max |A V^T V - I| at xi=10",
               recon, 0.0, 1e-10, mode="le"),
        _check(cfg, "C12.determinism", "bitwise mismatches between two identical runs",
               float(not same), 0.0, 0.0, mode="le"),
    ]


_TASKS = {
    "C1": _c1, "C2+C3": _c23, "C4": _c4, "C5": _c5, "C6+C7": _c67, "C8": _c8,
    "C9": _c9, "C10": _c10, "C11": _c11, "C12": _c12,
}


def _run_task(name: str, cfg: SuiteConfig):
    t0 = time.perf_counter()
    report = None
    try:
        res = _TASKS[name](cfg)
        if isinstance(res, tuple):
            res, report = res
    except Exception as exc:  # report and keep going
        log.exception("task %s failed", name)
        res = [{"check_id": f"{name}.error", "paper_ref": "task raised", "value": None,
                "target": None, "tolerance": None, "pass": False, "error": repr(exc)}]
    dt = time.perf_counter() - t0
    for r in res:
        r["seconds"] = dt
    return name, res, report


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": _jsonable(obj.real), "im": _jsonable(obj.imag)}
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if np.isfinite(f) else None
    return obj


def run_suite(config: SuiteConfig | None = None, tasks=None) -> dict:
    """Run the acceptance checks and assemble one report bundle.

    Tasks run in worker processes when ``config.jobs > 1``; the bundle keeps
    the fixed task order regardless.  A failing task yields a failed check
    instead of aborting the bundle.
    """
    cfg = config or SuiteConfig()
    check_mu(cfg.mu, allow_zero=False)
    names = list(_TASKS) if tasks is None else list(tasks)
    jobs = cfg.jobs or os.cpu_count() or 1
    t0 = time.perf_counter()
    if jobs > 1 and len(names) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(names))) as ex:
            results = list(ex.map(_run_task, names, [cfg] * len(names)))
    else:
        results = [_run_task(n, cfg) for n in names]
    checks, reports = [], {}
    for name, res, rep in results:
        log.info("task %s done in %.1fs", name, res[0]["seconds"] if res else 0.0)
        checks.extend(res)
        if rep is not None:
            reports["obstruction"] = rep
    total = time.perf_counter() - t0
    if tasks is None:
        checks.append(_check(cfg, "C12.runtime", "wall time of the full suite in seconds",
                             total, 0.0, 600.0, mode="le", seconds=total))
    bundle = _jsonable({
        "schema_version": SCHEMA_VERSION,
        "config": {k: v for k, v in asdict(cfg).items() if k != "jobs"},
        "checks": checks,
        "reports": reports,
    })
    valid, msg = validate_bundle(bundle)
    if tasks is None:
        bundle["checks"].append(_jsonable(_check(
            cfg, "C12.schema", "bundle validates against the report schema",
            0.0 if valid else 1.0, 0.0, 0.0, mode="le", seconds=0.0, message=msg)))
    bundle["summary"] = {
        "n_checks": len(bundle["checks"]),
        "n_pass": sum(c["pass"] for c in bundle["checks"]),
        "seconds": total,
    }
    return bundle


def validate_bundle(bundle: dict) -> tuple[bool, str]:
    import jsonschema

    try:
        jsonschema.validate(bundle, load_schema())
    except jsonschema.ValidationError as exc:
        return False, exc.message
    return True, ""


def numeric_fingerprint(bundle: dict) -> list:
    """Check fields that must be identical across reruns (timings excluded)."""
    return [
        (c["check_id"], c["value"], c["target"], c["tolerance"], c["pass"])
        for c in bundle["checks"]
        if c["check_id"] != "C12.runtime"
    ]
