"""Command-line front end.

Every subcommand writes CSV or JSON.  ``--output`` takes either a format
name (``csv`` / ``json``, written to stdout) or a file path whose suffix
picks the format.  Logging goes to stderr.

Exit codes: 0 success, 1 a check failed, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, SincKreinError

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

log = logging.getLogger("sinckrein")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

MU_REMEDY = "mu must satisfy 0 < mu < 1"

COLUMNS = {
    "quad": ["index", "node", "weight", "panel"],
    "resolvent": ["xi", "x", "t", "value"],
    "factor": ["quantity", "x", "value"],
    "asymptotics": ["t", "diag", "corner", "ode_residual", "envelope", "sigma"],
    "krein-ode": ["x", "P_re", "P_im", "Pstar_re", "Pstar_im"],
    "obstruction": ["quantity", "value"],
    "volterra-demo": ["quantity", "value"],
    "suite": ["check_id", "value", "target", "tolerance", "pass", "seconds"],
}


class UsageError(Exception):
    def __init__(self, flag: str, message: str):
        super().__init__(f"{flag}: {message}")
        self.flag = flag


# --------------------------------------------------------------------------
# parsing helpers


def parse_mu(text) -> float:
    try:
        mu = float(text)
    except (TypeError, ValueError):
        raise argparse.ArgumentTypeError(f"{text!r} is not a number; {MU_REMEDY}")
    if not 0.0 < mu < 1.0:
        raise argparse.ArgumentTypeError(f"got {mu}; {MU_REMEDY}")
    return mu


def parse_complex(text) -> complex:
    """``"0+2i"``, ``"2j"``, ``"1,0.5"`` (re,im) or a plain number."""
    if isinstance(text, (int, float, complex)):
        return complex(text)
    s = str(text).strip().replace(" ", "")
    try:
        if "," in s:
            re, im = s.split(",")
            return complex(float(re), float(im))
        return complex(s.replace("i", "j"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"cannot read {text!r} as a complex number")


def parse_float_list(text) -> list[float]:
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"cannot read {text!r} as a comma-separated list")


def parse_complex_list(text) -> list[complex]:
    return [parse_complex(v) for v in str(text).split(",") if v.strip()]


def parse_probe(text) -> tuple[float, float]:
    vals = parse_float_list(text)
    if len(vals) != 2:
        raise argparse.ArgumentTypeError(f"probe must be 'x,t', got {text!r}")
    return vals[0], vals[1]


# --------------------------------------------------------------------------
# run configuration


@dataclass
class RunConfig:
    mu: float = 0.5
    panels_per_unit: int = 2
    order: int = 10
    t_list: list = field(default_factory=lambda: [5.0, 10.0, 20.0])
    xi_list: list = field(default_factory=lambda: [1.0, 5.0, 10.0, 20.0])
    z_probes: list = field(default_factory=lambda: [1j, 2j])
    output_format: str = "json"
    output_path: str | None = None
    tolerances: dict = field(default_factory=dict)

    def validate(self) -> RunConfig:
        if not 0.0 < self.mu < 1.0:
            raise UsageError("--mu", f"got {self.mu}; {MU_REMEDY}")
        for name in ("t_list", "xi_list"):
            vals = getattr(self, name)
            if not vals or np.any(np.diff(vals) <= 0):
                raise UsageError(name, "must be non-empty and ascending")
        if not self.z_probes:
            raise UsageError("z_probes", "must be non-empty")
        if self.output_format not in ("csv", "json"):
            raise UsageError("--output", "format must be csv or json")
        return self

    def suite_config(self, jobs: int | None):
        from .experiments import SuiteConfig

        return SuiteConfig(
            mu=self.mu, panels_per_unit=self.panels_per_unit, order=self.order,
            t_list=tuple(self.t_list), xi_list=tuple(self.xi_list),
            z_probes=tuple(self.z_probes), tolerances=dict(self.tolerances), jobs=jobs,
        )


def load_config(path: str | os.PathLike) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise UsageError("--config", f"file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise UsageError("--config", f"invalid TOML: {exc}")
    cfg = RunConfig()
    if "mu" in data:
        cfg.mu = float(data["mu"])
    grid = data.get("grid", {})
    cfg.panels_per_unit = int(grid.get("panels_per_unit", cfg.panels_per_unit))
    cfg.order = int(grid.get("order", cfg.order))
    lad = data.get("ladders", {})
    cfg.t_list = [float(v) for v in lad.get("t_list", cfg.t_list)]
    cfg.xi_list = [float(v) for v in lad.get("xi_list", cfg.xi_list)]
    if "z_probes" in lad:
        try:
            cfg.z_probes = [parse_complex(v) for v in lad["z_probes"]]
        except argparse.ArgumentTypeError as exc:
            raise UsageError("z_probes", str(exc))
    out = data.get("output", {})
    cfg.output_format = out.get("format", cfg.output_format)
    cfg.output_path = out.get("path", cfg.output_path)
    cfg.tolerances = {str(k): float(v) for k, v in data.get("tolerances", {}).items()}
    return cfg


# --------------------------------------------------------------------------
# writers


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    if v is None:
        return ""
    return str(v)


def csv_text(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def json_text(obj) -> str:
    from .experiments import _jsonable

    return json.dumps(_jsonable(obj), indent=2, allow_nan=False) + "\n"


def resolve_output(arg: str | None, cfg: RunConfig | None = None) -> tuple[str, str | None]:
    """Map ``--output`` to ``(format, path)``."""
    if arg is None:
        if cfg is not None:
            return cfg.output_format, cfg.output_path
        return "csv", None
    if arg in ("csv", "json"):
        return arg, None
    suffix = Path(arg).suffix.lower().lstrip(".")
    if suffix not in ("csv", "json"):
        raise UsageError("--output", f"use csv, json or a path ending in .csv/.json (got {arg!r})")
    return suffix, arg


def emit(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        Path(path).write_text(text)
        log.info("wrote %s", path)


# --------------------------------------------------------------------------
# subcommands


def cmd_quad(args) -> tuple[list, dict]:
    from .quadrature import composite_grid

    g = composite_grid(args.xi, args.panels_per_unit, args.order)
    rows = [(i, s, w, p) for i, (s, w, p) in enumerate(zip(g.nodes, g.weights, g.panel_index))]
    meta = {"xi": g.xi, "order": g.order, "n_panels": g.n_panels,
            "panel_boundaries": g.panel_boundaries, "rows": [dict(zip(COLUMNS["quad"], r)) for r in rows]}
    return rows, meta


def cmd_resolvent(args) -> tuple[list, dict]:
    from .finite_section import ResolventField, build_section

    sec = build_section(args.mu, args.xi, panels_per_unit=args.panels_per_unit, order=args.order)
    pts = [(sec.xi, sec.xi), (sec.xi, 0.0)] + list(args.probe or [])
    for x, t in pts:
        if not (0 <= x <= sec.xi and 0 <= t <= sec.xi):
            raise UsageError("--probe", f"({x}, {t}) lies outside [0, {sec.xi}]^2")
    xs = np.array([p[0] for p in pts])
    ts = np.array([p[1] for p in pts])
    vals = np.atleast_1d(ResolventField(sec).evaluate(xs, ts))
    rows = [(sec.xi, x, t, v) for x, t, v in zip(xs, ts, vals)]
    meta = {"mu": args.mu, "xi": sec.xi, "R_xi_xi": vals[0], "R_xi_0": vals[1],
            "probes": [dict(zip(COLUMNS["resolvent"], r)) for r in rows[2:]]}
    return rows, meta


def cmd_factor(args) -> tuple[list, dict]:
    from .finite_section import build_section
    from .krein_factor import (
        factor_vs_resolvent,
        is_lower_triangular,
        q_functions,
        reverse_cholesky,
        scalar_factor,
    )

    kw = {"panels_per_unit": args.panels_per_unit, "order": args.order}
    sec = build_section(args.mu, args.xi, **kw)
    fac = reverse_cholesky(sec.matrix, grid=sec.grid)
    resid = float(np.max(np.abs(sec.matrix @ fac.gram() - np.eye(sec.n))))
    tri_ok, tri_worst, _ = is_lower_triangular(fac.matrix, sec.grid)
    cmp = factor_vs_resolvent(args.mu, args.xi, **kw)
    xs = np.arange(1.0, np.floor(args.xi) + 1.0)
    qp = q_functions(args.mu, xs, **kw)
    th_x = xs[(xs >= 1.0) & (xs <= args.xi - 0.5)]
    th = scalar_factor(args.mu, th_x, **kw) if len(th_x) else None
    rows = [
        ("factor_residual", None, resid),
        ("triangular", None, float(tri_ok)),
        ("triangular_worst", None, tri_worst),
        ("kernel_max_rel_error", None, cmp.max_rel_error),
        ("kernel_raw_max_rel_error", None, cmp.raw_max_rel_error),
    ]
    rows += [("q1", x, v) for x, v in zip(qp.xs, qp.q1)]
    rows += [("q2", x, v) for x, v in zip(qp.xs, qp.q2)]
    if th is not None:
        rows += [("M", x, v) for x, v in zip(th.xi, th.M)]
        rows += [("M_prime", x, v) for x, v in zip(th.xi, th.M_prime)]
        rows += [("R", x, v) for x, v in zip(th.xi, th.R)]
    meta = {
        "mu": args.mu, "xi": sec.xi, "factor_residual": resid,
        "triangular": tri_ok, "triangular_worst": tri_worst,
        "kernel_comparison": vars(cmp),
        "q_table": {"x": qp.xs, "q1": qp.q1, "q2": qp.q2, "product_defect": qp.product_defect()},
        "scalar_factor_table": None if th is None else {
            "xi": th.xi, "M": th.M, "M_prime": th.M_prime, "R": th.R, "positive": th.positive},
    }
    return rows, meta


def cmd_asymptotics(args) -> tuple[list, dict]:
    from .asymptotics import asymptotics_report, uniform_grid

    if args.t_min <= args.dt or args.t_max < args.t_min:
        raise UsageError("--t-min", "need dt < t_min <= t_max")
    rep = asymptotics_report(args.mu, uniform_grid(args.t_min, args.t_max, args.dt), args.dt,
                             panels_per_unit=args.panels_per_unit, order=args.order)
    rows = list(zip(rep.t_grid, rep.diag, rep.corner, rep.ode_residual, rep.envelope, rep.sigma))
    meta = {"mu": rep.mu, "a": rep.a, "b": rep.b, "dt": rep.dt,
            "max_ode_residual": rep.max_ode_residual,
            "rows": [dict(zip(COLUMNS["asymptotics"], r)) for r in rows]}
    return rows, meta


def cmd_krein_ode(args) -> tuple[list, dict]:
    from .krein_system import hat_pi_closed, integrate_krein, pi_closed, sample_B, weyl_v

    z = args.z
    if z.imag < 0:
        raise UsageError("--z", "need Im z >= 0")
    table = sample_B(args.mu, float(np.ceil(args.x_max)))
    tr = integrate_krein(table, z, args.x_max, init_kind="hat" if args.hat else "standard")
    stride = max(1, (len(tr.xs) - 1) // max(1, args.samples))
    idx = list(range(0, len(tr.xs), stride))
    if idx[-1] != len(tr.xs) - 1:
        idx.append(len(tr.xs) - 1)
    rows = [(tr.xs[k], tr.P[k].real, tr.P[k].imag, tr.Pstar[k].real, tr.Pstar[k].imag) for k in idx]
    block = {"Pstar_end": tr.Pstar[-1]}
    try:
        block["Pi_closed"] = pi_closed(args.mu, z)
        block["v_closed"] = weyl_v(args.mu, z)
        block["hatPi_both"] = {"closed": hat_pi_closed(args.mu, z),
                               "ode": tr.Pstar[-1] if args.hat else None}
    except SincKreinError as exc:
        block["closed_form_error"] = str(exc)
    log.info("comparison block: %s", json.dumps(_plain(block)))
    meta = {"mu": args.mu, "z": z, "x_max": float(tr.xs[-1]), "init": tr.init_kind,
            "comparison": block, "rows": [dict(zip(COLUMNS["krein-ode"], r)) for r in rows]}
    return rows, meta


def _plain(obj):
    from .experiments import _jsonable

    return _jsonable(obj)


def cmd_obstruction(args) -> tuple[list, dict]:
    from .experiments import obstruction_report

    rep = obstruction_report(args.mu, args.t_list, args.z_probes,
                             panels_per_unit=args.panels_per_unit, order=args.order)
    H = rep.H_candidates
    rows = [
        ("G_at_zero", rep.G_at_zero),
        ("H_2C_abs_hatPi0_closed", H["2C|hatPi(0)|"]["closed"]),
        ("H_2C_abs_hatPi0_ode", H["2C|hatPi(0)|"]["ode"]),
        ("H_minus_2C_Pi0_closed", H["-2C*Pi(0)"]["closed"]),
        ("H_minus_2C_Pi0_ode", H["-2C*Pi(0)"]["ode"]),
        ("mismatch_ratio", rep.mismatch_ratio),
    ]
    rows += [(f"norm_Rxi[{x:g}]", v) for x, v in zip(rep.xi_ladder, rep.norm_Rxi)]
    rows += [(f"cauchy_delta[{t:g}]", v) for t, v in zip(rep.T_list, rep.cauchy_delta)]
    return rows, rep.to_dict()


def cmd_volterra(args) -> tuple[list, dict]:
    from dataclasses import asdict

    from .experiments import volterra_demo

    rep = volterra_demo(args.mu, args.xi, args.panels_per_unit, args.order)
    d = asdict(rep)
    return list(d.items()), d


def cmd_suite(args, cfg: RunConfig) -> tuple[list, dict, bool]:
    from .experiments import run_suite

    bundle = run_suite(cfg.suite_config(args.jobs))
    for c in bundle["checks"]:
        log.info("%-28s %s", c["check_id"], "pass" if c["pass"] else "FAIL")
    rows = [tuple(c[k] for k in COLUMNS["suite"]) for c in bundle["checks"]]
    ok = all(c["pass"] for c in bundle["checks"])
    return rows, bundle, ok


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--jobs", type=int, default=None,
                        help="worker processes (default: available cores)")
    common.add_argument("--log-level", choices=["debug", "info", "warning"], default="warning")
    common.add_argument("--output", default=None, help="csv, json, or a .csv/.json path")
    common.add_argument("--config", default=None, help="TOML run configuration")

    grid = argparse.ArgumentParser(add_help=False)
    grid.add_argument("--panels-per-unit", type=int, default=None)
    grid.add_argument("--order", type=int, default=None)

    mu = argparse.ArgumentParser(add_help=False)
    mu.add_argument("--mu", type=parse_mu, default=None, help="coupling, 0 < mu < 1")

    p = argparse.ArgumentParser(prog="sinckrein", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    q = sub.add_parser("quad", parents=[common, grid], help="quadrature nodes and weights")
    q.add_argument("--xi", type=float, required=True)

    r = sub.add_parser("resolvent", parents=[common, grid, mu], help="resolvent corner values and probes")
    r.add_argument("--xi", type=float, required=True)
    r.add_argument("--probe", type=parse_probe, action="append", help="x,t (repeatable)")

    f = sub.add_parser("factor", parents=[common, grid, mu], help="reverse Cholesky diagnostics")
    f.add_argument("--xi", type=float, required=True)

    a = sub.add_parser("asymptotics", parents=[common, grid, mu], help="corner values for large t")
    a.add_argument("--t-min", type=float, default=2.0)
    a.add_argument("--t-max", type=float, default=10.0)
    a.add_argument("--dt", type=float, default=0.05)

    k = sub.add_parser("krein-ode", parents=[common, mu], help="integrate the Krein system")
    k.add_argument("--z", type=parse_complex, required=True, help="re,im or 0+2i")
    k.add_argument("--x-max", type=float, default=40.0)
    k.add_argument("--hat", action="store_true", help="use the (1/2, -1/2) initial data")
    k.add_argument("--samples", type=int, default=400, help="approximate number of output rows")

    o = sub.add_parser("obstruction", parents=[common, grid, mu], help="amplitude constant mismatch")
    o.add_argument("--t-list", type=parse_float_list, default=None)
    o.add_argument("--z-probes", type=parse_complex_list, default=None)

    v = sub.add_parser("volterra-demo", parents=[common, grid, mu], help="Volterra similarity demo")
    v.add_argument("--xi", type=float, default=10.0)

    sub.add_parser("suite", parents=[common, grid, mu], help="run the acceptance suite")
    return p


def _merge(args, cfg: RunConfig) -> RunConfig:
    """Flags override config values."""
    if getattr(args, "mu", None) is not None:
        cfg.mu = args.mu
    if getattr(args, "panels_per_unit", None) is not None:
        cfg.panels_per_unit = args.panels_per_unit
    if getattr(args, "order", None) is not None:
        cfg.order = args.order
    if getattr(args, "t_list", None) is not None:
        cfg.t_list = args.t_list
    if getattr(args, "z_probes", None) is not None:
        cfg.z_probes = args.z_probes
    return cfg.validate()


_HANDLERS = {
    "quad": cmd_quad,
    "resolvent": cmd_resolvent,
    "factor": cmd_factor,
    "asymptotics": cmd_asymptotics,
    "krein-ode": cmd_krein_ode,
    "obstruction": cmd_obstruction,
    "volterra-demo": cmd_volterra,
}


def parse_and_dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    logging.basicConfig(stream=sys.stderr, level=args.log_level.upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        cfg = _merge(args, cfg)
        args.mu = cfg.mu
        args.panels_per_unit, args.order = cfg.panels_per_unit, cfg.order
        if hasattr(args, "t_list"):
            args.t_list, args.z_probes = cfg.t_list, cfg.z_probes
        default_fmt = "json" if args.command in ("suite", "obstruction", "volterra-demo") else "csv"
        if args.output is None and not args.config:
            fmt_, path = default_fmt, None
        else:
            fmt_, path = resolve_output(args.output, cfg)
        ok = True
        if args.command == "suite":
            rows, meta, ok = cmd_suite(args, cfg)
        else:
            rows, meta = _HANDLERS[args.command](args)
    except UsageError as exc:
        print(f"sinckrein {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"sinckrein {args.command}: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SincKreinError as exc:
        print(f"sinckrein {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_FAIL
    text = csv_text(COLUMNS[args.command], rows) if fmt_ == "csv" else json_text(meta)
    emit(text, path)
    return EXIT_OK if ok else EXIT_FAIL


def main() -> None:
    sys.exit(parse_and_dispatch())


if __name__ == "__main__":
    main()
