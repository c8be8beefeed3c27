"""Command-line front end for densities, moments, and verification suites.

Every run is reproducible: the effective parameters (defaults resolved,
seeds included) are echoed in the output, JSON numbers carry 17
significant digits with sorted keys, and identical configurations produce
byte-identical output.  Data goes to stdout, diagnostics to stderr; exit
code 0 means pass, 1 a failed verification, 2 a usage or regime error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass

import numpy as np

from .distributions import (
    FreePoissonParams,
    alpha1_regime_split,
    kummer_delta,
    kummer_measure,
    kummer_sigma,
    mp_measure,
)
from .errors import DomainError, InconsistencyError, NumericError, UsageError
from .hv import (
    compute_constants,
    determine_from_equations,
    hv_instance_from_params,
    hv_instance_random,
    k_series_bruteforce,
    k_series_closedform,
    regression_residual,
    verify_hv_property,
)
from .partitions import MomentOracle, verify_boolmain, verify_product_formula
from .subordination import subordination_series, verify_useful_identity

VERSION = "0.1.0"

WEIGHT_TAGS = ((), "r", (("x", -1),), (("r", 1), ("x", 1)))

VERIFY_SUITES = ("hv", "k", "subordination", "partitions", "characterize")


# ---------------------------------------------------------------------------
# deterministic serialization


def _fmt_number(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    v = float(x)
    if not np.isfinite(v):
        raise NumericError("non-finite value in report")
    return f"{v:.17g}"


def _to_json(obj) -> str:
    """Hand-rolled emitter so float formatting is pinned, keys sorted."""
    if isinstance(obj, dict):
        parts = (f"{json.dumps(str(k))}:{_to_json(v)}" for k, v in sorted(obj.items()))
        return "{" + ",".join(parts) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(_to_json(v) for v in obj) + "]"
    if isinstance(obj, str):
        return json.dumps(obj)
    if obj is None:
        return "null"
    return _fmt_number(obj)


def _csv(meta, columns, rows) -> str:
    lines = [f"# {k}={_fmt_number(v)}" for k, v in meta]
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_fmt_number(v) for v in row))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class RunConfig:
    command: str
    fmt: str
    dist: str | None = None
    suite: str | None = None
    case: int | None = None
    alpha: float | None = None
    beta: float | None = None
    gamma: float | None = None
    lam: float | None = None
    order: int | None = None
    n: int | None = None
    tol: float | None = None
    seed: int | None = None
    grid_lo: float | None = None
    grid_hi: float | None = None
    grid_n: int | None = None
    z: float | None = None
    check_series: bool = False


def _config(args) -> RunConfig:
    cfg = RunConfig(
        command=args.command,
        fmt=getattr(args, "format", "csv"),
        dist=getattr(args, "dist", None),
        suite=getattr(args, "suite", None),
        case=getattr(args, "case", None),
        alpha=getattr(args, "alpha", None),
        beta=getattr(args, "beta", None),
        gamma=getattr(args, "gamma", None),
        lam=getattr(args, "lam", None),
        order=getattr(args, "order", None),
        n=getattr(args, "n", None),
        tol=getattr(args, "tol", None),
        seed=getattr(args, "seed", None),
        grid_lo=getattr(args, "grid_lo", None),
        grid_hi=getattr(args, "grid_hi", None),
        grid_n=getattr(args, "grid_n", None),
        z=getattr(args, "z", None),
        check_series=getattr(args, "check_series", False),
    )
    if cfg.tol is not None and cfg.tol <= 0.0:
        raise UsageError("--tol must be positive")
    for value, name in ((cfg.order, "--order"), (cfg.n, "-n"), (cfg.grid_n, "--grid-n")):
        if value is not None and value < 1:
            raise UsageError(f"{name} must be at least 1")
    return cfg


def _capped(order, what="order") -> int:
    raw = os.environ.get("FREEKUMMER_MAX_ORDER")
    if raw is not None:
        try:
            cap = int(raw)
        except ValueError as exc:
            raise UsageError("FREEKUMMER_MAX_ORDER must be an integer") from exc
        if order > cap:
            raise UsageError(f"{what} {order} exceeds FREEKUMMER_MAX_ORDER={cap}")
    return order


def _need(cfg, *names):
    for name in names:
        if getattr(cfg, name) is None:
            flag = "--lambda" if name == "lam" else f"--{name}"
            raise UsageError(f"{cfg.command} requires {flag}")


def _measure(cfg):
    if cfg.dist == "kummer":
        _need(cfg, "alpha", "beta", "gamma")
        return kummer_measure(cfg.alpha, cfg.beta, cfg.gamma), {
            "alpha": cfg.alpha,
            "beta": cfg.beta,
            "gamma": cfg.gamma,
        }
    _need(cfg, "lam", "gamma")
    mu = mp_measure(FreePoissonParams(cfg.lam, cfg.gamma))
    return mu, {"lambda": cfg.lam, "gamma": cfg.gamma}


# ---------------------------------------------------------------------------
# table commands


def cmd_density(cfg):
    mu, params = _measure(cfg)
    lo, hi = mu.support
    if cfg.grid_lo is not None:
        lo = cfg.grid_lo
    if cfg.grid_hi is not None:
        hi = cfg.grid_hi
    if not lo < hi:
        raise UsageError("grid bounds must satisfy lo < hi")
    n = cfg.grid_n if cfg.grid_n is not None else 1001
    if n < 2:
        raise UsageError("--grid-n must be at least 2 for a density table")
    xs = np.linspace(lo, hi, n)
    with np.errstate(invalid="ignore", divide="ignore"):
        fs = np.asarray(mu.density(xs), dtype=float)
    keep = np.isfinite(fs)
    if not keep.all():
        # A hard support edge can carry an integrable singularity; a
        # defaulted edge row is dropped instead of printed as non-finite.
        allowed = set()
        if cfg.grid_lo is None:
            allowed.add(0)
        if cfg.grid_hi is None:
            allowed.add(n - 1)
        if not set(np.flatnonzero(~keep)) <= allowed:
            raise NumericError("density is not finite on the requested grid")
        xs, fs = xs[keep], fs[keep]
    meta = [("atom0", mu.atom0), ("a", mu.support[0]), ("b", mu.support[1])]
    if cfg.dist == "kummer":
        meta.append(("delta", kummer_delta(cfg.alpha, cfg.beta, cfg.gamma)))
        if cfg.alpha == 1.0 and alpha1_regime_split(cfg.beta, cfg.gamma):
            meta.append(("sigma", kummer_sigma(cfg.beta, cfg.gamma)))
    params = dict(params, grid_lo=lo, grid_hi=hi, grid_n=n)
    results = dict(meta, rows=[[float(x), float(f)] for x, f in zip(xs, fs)])
    return params, results, (meta, ("x", "density"), results["rows"]), True


def cmd_moments(cfg):
    mu, params = _measure(cfg)
    n = _capped(cfg.n if cfg.n is not None else 6, "-n")
    rows = [[k, float(mu.moment(k))] for k in range(1, n + 1)]
    meta = [("atom0", mu.atom0)]
    params = dict(params, n=n)
    results = {"atom0": mu.atom0, "rows": rows}
    return params, results, (meta, ("k", "moment"), rows), True


def cmd_endpoints(cfg):
    _need(cfg, "alpha", "beta", "gamma")
    mu = kummer_measure(cfg.alpha, cfg.beta, cfg.gamma)
    meta = [
        ("a", mu.support[0]),
        ("b", mu.support[1]),
        ("atom0", mu.atom0),
        ("delta", kummer_delta(cfg.alpha, cfg.beta, cfg.gamma)),
    ]
    columns = ["a", "b", "atom0", "delta"]
    if cfg.alpha == 1.0 and alpha1_regime_split(cfg.beta, cfg.gamma):
        meta.append(("sigma", kummer_sigma(cfg.beta, cfg.gamma)))
        columns.append("sigma")
    params = {"alpha": cfg.alpha, "beta": cfg.beta, "gamma": cfg.gamma}
    results = dict(meta)
    return params, results, ([], columns, [[v for _, v in meta]]), True


def _instance(cfg):
    """Free pair for subordination-style commands: seeded atoms or laws."""
    if cfg.seed is not None:
        return hv_instance_random(cfg.seed), {"seed": cfg.seed}
    _need(cfg, "alpha", "beta", "gamma")
    inst = hv_instance_from_params(cfg.alpha, cfg.beta, cfg.gamma)
    return inst, {"alpha": cfg.alpha, "beta": cfg.beta, "gamma": cfg.gamma}


def cmd_subordination(cfg):
    inst, params = _instance(cfg)
    order = _capped(cfg.order if cfg.order is not None else 8)
    pair = subordination_series(
        (inst.r_nodes, inst.r_weights), (inst.y_nodes, inst.y_weights), order
    )
    if cfg.z is not None:
        if cfg.z >= 0.0:
            raise UsageError("--z must be negative")
        pts = [cfg.z]
        params = dict(params, z=cfg.z)
    else:
        lo = cfg.grid_lo if cfg.grid_lo is not None else -5.0
        hi = cfg.grid_hi if cfg.grid_hi is not None else -0.05
        n = cfg.grid_n if cfg.grid_n is not None else 11
        if not lo < hi < 0.0:
            raise UsageError("subordination grids live on the negative axis")
        pts = list(-np.geomspace(-lo, -hi, n))
        params = dict(params, grid_lo=lo, grid_hi=hi, grid_n=n)
    rows = [
        [z, pair.m_product_at(z), pair.omega1_at(z), pair.omega2_at(z)]
        for z in pts
    ]
    params = dict(params, order=order)
    results = {"order": order, "rows": rows}
    if cfg.check_series:
        zc = max(pts)
        series_val = sum(
            complex(pair.omega2.coefficient(k)).real * zc**k
            for k in range(order + 1)
        )
        point_val = pair.omega2_at(zc)
        results["series_check"] = {
            "z": zc,
            "omega2": point_val,
            "omega2_series": series_val,
            "gap": abs(point_val - series_val),
        }
    columns = ("z", "m_product", "omega1", "omega2")
    return params, results, ([("order", order)], columns, rows), True


# ---------------------------------------------------------------------------
# verification suites


def _series_gap(got, want, order):
    worst = 0.0
    for i in range(order + 1):
        for j in range(order + 1 - i):
            a = complex(got.coefficient(i, j))
            b = complex(want.coefficient(i, j))
            worst = max(worst, abs(a - b) / max(1.0, abs(b)))
    return worst


def _suite_hv(cfg):
    _need(cfg, "alpha", "beta", "gamma")
    order = _capped(cfg.order if cfg.order is not None else 8)
    tol = cfg.tol if cfg.tol is not None else 1e-6
    rep = verify_hv_property(cfg.alpha, cfg.beta, cfg.gamma, order=order, tol=tol)
    params = {
        "alpha": cfg.alpha,
        "beta": cfg.beta,
        "gamma": cfg.gamma,
        "order": order,
        "tol": tol,
    }
    residuals = list(rep.u_dev) + list(rep.v_dev)
    return params, residuals, {}


def _suite_k(cfg):
    seed = cfg.seed if cfg.seed is not None else 0
    order = _capped(cfg.order if cfg.order is not None else 6)
    tol = cfg.tol if cfg.tol is not None else 1e-8
    inst = hv_instance_random(seed)
    residuals = []
    for g1 in WEIGHT_TAGS:
        for g2 in WEIGHT_TAGS:
            brute = k_series_bruteforce(inst, g1, g2, order)
            closed = k_series_closedform(inst, g1, g2, order)
            residuals.append(_series_gap(closed.total, brute, order))
    return {"seed": seed, "order": order, "tol": tol}, residuals, {}


def _suite_subordination(cfg):
    seed = cfg.seed if cfg.seed is not None else 0
    order = _capped(cfg.order if cfg.order is not None else 8)
    tol = cfg.tol if cfg.tol is not None else 1e-9
    inst = hv_instance_random(seed)
    pair = subordination_series(
        (inst.r_nodes, inst.r_weights), (inst.y_nodes, inst.y_weights), order
    )
    grid = tuple(-np.geomspace(0.05, 5.0, 10))
    residual = verify_useful_identity(pair, order, grid)
    return {"seed": seed, "order": order, "tol": tol}, [residual], {}


def _suite_partitions(cfg):
    seed = cfg.seed if cfg.seed is not None else 0
    order = _capped(cfg.order if cfg.order is not None else 6)
    tol = cfg.tol if cfg.tol is not None else 1e-10
    oracle = MomentOracle.random(seed)
    candidates = [
        (order,),
        (1, order - 1),
        (order - 1, 1),
        (2, order - 2),
        (1, 1, order - 2),
        (2, 2, order - 4),
    ]
    residuals = []
    for split in candidates:
        if all(part >= 1 for part in split):
            residuals.append(verify_product_formula(split, oracle, order))
    nb = min(order, 6)
    residuals.append(verify_boolmain(1, nb, oracle))
    residuals.append(verify_boolmain(3, nb, oracle))
    return {"seed": seed, "order": order, "tol": tol}, residuals, {}


def _suite_characterize(cfg):
    if cfg.case is None:
        raise UsageError("verify characterize requires --case")
    _need(cfg, "alpha", "beta", "gamma")
    tol = cfg.tol if cfg.tol is not None else 1e-5
    inst = hv_instance_from_params(cfg.alpha, cfg.beta, cfg.gamma)
    consts = compute_constants(inst, cfg.case)
    out = determine_from_equations(cfg.case, consts)
    expected = {
        "x_alpha": cfg.alpha,
        "x_beta": cfg.alpha + cfg.beta,
        "x_gamma": cfg.gamma,
        "y_lambda": cfg.alpha + cfg.beta,
        "y_scale": 1.0 / cfg.gamma,
    }
    recovered = {
        "x_alpha": out.x_params.alpha,
        "x_beta": out.x_params.beta,
        "x_gamma": out.x_params.gamma,
        "y_lambda": out.y_params.lam,
        "y_scale": out.y_params.gamma_scale,
    }
    residuals = [abs(recovered[k] - expected[k]) for k in sorted(expected)]
    extras = {
        "case": cfg.case,
        "recovered": recovered,
        "expected": expected,
        "regression_residual": regression_residual(cfg.case, inst, consts),
    }
    params = {
        "alpha": cfg.alpha,
        "beta": cfg.beta,
        "gamma": cfg.gamma,
        "case": cfg.case,
        "tol": tol,
    }
    return params, residuals, extras


def cmd_verify(cfg):
    if cfg.fmt != "json":
        raise UsageError("verify reports are JSON only; use --format json")
    suites = {
        "hv": _suite_hv,
        "k": _suite_k,
        "subordination": _suite_subordination,
        "partitions": _suite_partitions,
        "characterize": _suite_characterize,
    }
    params, residuals, extras = suites[cfg.suite](cfg)
    tol = params.get("tol", cfg.tol if cfg.tol is not None else 1e-8)
    worst = max(residuals)
    ok = bool(worst <= tol)
    results = {
        "suite": cfg.suite,
        "residuals": [float(r) for r in residuals],
        "max_residual": float(worst),
        "pass": ok,
    }
    results.update(extras)
    return dict(params, suite=cfg.suite), results, None, ok


# ---------------------------------------------------------------------------
# wiring


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="freekummer",
        description="Free-Kummer and free-Poisson laws: densities, moments, "
        "subordination, and verification suites.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def law_flags(p):
        p.add_argument("--alpha", type=float)
        p.add_argument("--beta", type=float)
        p.add_argument("--gamma", type=float)
        p.add_argument("--lambda", dest="lam", type=float)

    def grid_flags(p):
        p.add_argument("--grid-lo", type=float)
        p.add_argument("--grid-hi", type=float)
        p.add_argument("--grid-n", type=int)

    p = sub.add_parser("density", help="tabulate a density")
    law_flags(p)
    grid_flags(p)
    p.add_argument("--dist", choices=("kummer", "mp"), required=True)
    p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("moments", help="tabulate moments")
    law_flags(p)
    p.add_argument("--dist", choices=("kummer", "mp"), required=True)
    p.add_argument("-n", type=int)
    p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("endpoints", help="support endpoints and constants")
    law_flags(p)
    p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("subordination", help="subordination functions on a grid")
    law_flags(p)
    grid_flags(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--order", type=int)
    p.add_argument("--z", type=float)
    p.add_argument("--check-series", action="store_true")
    p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("verify", help="run a verification suite")
    p.add_argument("suite", choices=VERIFY_SUITES)
    law_flags(p)
    p.add_argument("--order", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--case", type=int, choices=(1, 2, 3))
    p.add_argument("--format", choices=("csv", "json"), default="json")

    return parser


COMMANDS = {
    "density": cmd_density,
    "moments": cmd_moments,
    "endpoints": cmd_endpoints,
    "subordination": cmd_subordination,
    "verify": cmd_verify,
}


def _render(cfg, params, results, table, ok) -> str:
    if cfg.fmt == "json":
        payload = {
            "version": VERSION,
            "command": cfg.command,
            "params": params,
            "results": results,
            "pass": ok,
        }
        return _to_json(payload) + "\n"
    meta, columns, rows = table
    return _csv(meta, columns, rows)


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        return int(code) if code else 0
    try:
        cfg = _config(args)
        params, results, table, ok = COMMANDS[cfg.command](cfg)
        text = _render(cfg, params, results, table, ok)
    except (UsageError, DomainError, NumericError, InconsistencyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    sys.stdout.write(text)
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
