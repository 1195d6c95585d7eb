"""Command-line surface: lp-solve, flow-solve, lewis-weights, barrier-probe
and an invariant-suite runner (diagnose).

Exit codes: 0 success, 2 parse/validation error, 3 numeric failure
(NotConverged / CenteringDiverged / RankDeficient), 4 iteration cap.
"""

from __future__ import annotations

import argparse
import json
import math
import re
import sys

import numpy as np

from . import lewisbarrier
from .errors import (
    CenteringDiverged,
    DisconnectedGraph,
    InvalidP,
    InvalidTolerance,
    IterationCap,
    LewisLpError,
    NotConverged,
    OutOfDomain,
    ParseError,
    RankDeficient,
    RepairFailed,
    ValidationError,
)
from .flow import FlowInstance, build_flow_lp, perturb_costs, solve_min_cost_flow, validate_flow
from .lewis import compute_initial_weight, lewis_residual
from .linalg import leverage_scores, projection_bundle, sketched_leverage_scores
from .pathfollow import LpProblem, PathConfig, centering_inexact, initial_path_state, lp_solve, newton_step, weight_function

SCHEMA_VERSION = 1

_PARSE_ERRORS = (ParseError, ValidationError, DisconnectedGraph, InvalidP, InvalidTolerance)
_NUMERIC_ERRORS = (NotConverged, CenteringDiverged, RankDeficient, OutOfDomain, RepairFailed)


def fmt(x: float) -> str:
    return f"{float(x):.17g}"


def dump_json(obj) -> str:
    """Deterministic JSON with every float at 17 significant digits."""
    mark = "@F@"

    def conv(o):
        if isinstance(o, (float, np.floating)):
            return mark + fmt(float(o)) + mark
        if isinstance(o, (np.integer,)):
            return int(o)
        if isinstance(o, np.ndarray):
            return [conv(v) for v in o.tolist()]
        if isinstance(o, dict):
            return {k: conv(v) for k, v in o.items()}
        if isinstance(o, (list, tuple)):
            return [conv(v) for v in o]
        return o

    s = json.dumps(conv(obj), sort_keys=True, indent=1)
    return re.sub(f'"{mark}([^"]*){mark}"', r"\1", s) + "\n"


# ---------------------------------------------------------------------------
# parsers
# ---------------------------------------------------------------------------


def read_matrix(path: str) -> np.ndarray:
    """Matrix text format: first line "m n", then m rows of n decimals."""
    try:
        with open(path) as fh:
            lines = [ln.strip() for ln in fh if ln.strip()]
    except OSError as exc:
        raise ParseError(str(exc)) from exc
    if not lines:
        raise ParseError(f"{path}: empty matrix file")
    try:
        m, n = (int(v) for v in lines[0].split())
    except ValueError as exc:
        raise ParseError(f"{path}:1: expected 'm n' header") from exc
    if len(lines) - 1 != m:
        raise ParseError(f"{path}: expected {m} rows, found {len(lines) - 1}")
    rows = []
    for k, ln in enumerate(lines[1:], start=2):
        vals = ln.split()
        if len(vals) != n:
            raise ParseError(f"{path}:{k}: expected {n} entries")
        try:
            rows.append([float(v) for v in vals])
        except ValueError as exc:
            raise ParseError(f"{path}:{k}: bad number") from exc
    return np.array(rows)


def parse_lp_json(path: str):
    """LP JSON: m, n, A, b, c, lower, upper (null = infinite), x0."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ParseError(str(exc)) from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    for key in ("m", "n", "A", "b", "c", "lower", "upper", "x0"):
        if key not in data:
            raise ParseError(f"{path}: missing field {key!r}")
    m, n = int(data["m"]), int(data["n"])
    A = np.asarray(data["A"], dtype=float)
    if A.shape != (m, n):
        raise ValidationError(f"A has shape {A.shape}, expected ({m}, {n})")

    def bound(vals, sign):
        out = np.empty(len(vals))
        for i, v in enumerate(vals):
            out[i] = sign * math.inf if v is None else float(v)
        return out

    lower = bound(data["lower"], -1.0)
    upper = bound(data["upper"], +1.0)
    if lower.size != m or upper.size != m:
        raise ValidationError("bound vectors must have length m")
    problem = LpProblem(
        A=A,
        b=np.asarray(data["b"], dtype=float),
        c=np.asarray(data["c"], dtype=float),
        lower=lower,
        upper=upper,
    )
    x0 = problem.check_start(np.asarray(data["x0"], dtype=float))
    return problem, x0


def parse_dimacs(path: str, maxflow: bool = False) -> FlowInstance:
    """DIMACS min-cost flow ("p min"), or max-flow with synthesized zero
    costs when ``maxflow`` is set."""
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ParseError(str(exc)) from exc
    n_vertices = None
    nodes = []
    arcs = []
    want = "max" if maxflow else "min"
    for k, raw in enumerate(lines, start=1):
        ln = raw.strip()
        if not ln or ln.startswith("c"):
            continue
        parts = ln.split()
        if parts[0] == "p":
            if len(parts) != 4 or parts[1] != want:
                raise ParseError(f"{path}:{k}: expected 'p {want} N M'")
            n_vertices = int(parts[2])
        elif parts[0] == "n":
            nodes.append((k, parts[1:]))
        elif parts[0] == "a":
            arcs.append((k, parts[1:]))
        else:
            raise ParseError(f"{path}:{k}: unknown line type {parts[0]!r}")
    if n_vertices is None:
        raise ParseError(f"{path}: missing 'p' line")
    if len(nodes) != 2:
        raise ValidationError(f"{path}: expected exactly two node lines, got {len(nodes)}")

    if maxflow:
        src = sink = None
        for k, fields in nodes:
            if len(fields) != 2:
                raise ParseError(f"{path}:{k}: expected 'n v s|t'")
            if fields[1] == "s":
                src = int(fields[0])
            elif fields[1] == "t":
                sink = int(fields[0])
            else:
                raise ParseError(f"{path}:{k}: node tag must be s or t")
        if src is None or sink is None:
            raise ValidationError(f"{path}: need one source and one sink node line")
        edges = []
        for k, fields in arcs:
            if len(fields) != 3:
                raise ParseError(f"{path}:{k}: expected 'a u v cap'")
            u, v, cap = (int(f) for f in fields)
            edges.append((u - 1, v - 1, cap, 0))
    else:
        balances = []
        for k, fields in nodes:
            if len(fields) != 2:
                raise ParseError(f"{path}:{k}: expected 'n v b'")
            balances.append((int(fields[0]), float(fields[1])))
        pos = [v for v, bal in balances if bal > 0]
        neg = [v for v, bal in balances if bal < 0]
        if len(pos) != 1 or len(neg) != 1:
            raise ValidationError(f"{path}: need one positive and one negative node line")
        src, sink = pos[0], neg[0]
        edges = []
        for k, fields in arcs:
            if len(fields) != 5:
                raise ParseError(f"{path}:{k}: expected 'a u v low cap cost'")
            u, v, low, cap, cost = (int(f) for f in fields)
            if low != 0:
                raise ValidationError(f"{path}:{k}: nonzero lower bound unsupported")
            edges.append((u - 1, v - 1, cap, cost))
    return FlowInstance(n_vertices, edges, src - 1, sink - 1)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _write_out(text: str, out: str | None):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_lp_solve(args) -> int:
    problem, x0 = parse_lp_json(args.file)
    cfg = PathConfig.for_problem(problem, args.profile)
    x, stats = lp_solve(problem, x0, args.eps, cfg, seed=args.seed)
    result = {
        "schema": SCHEMA_VERSION,
        "x": x,
        "objective": float(problem.c @ x),
        "delta_history": stats.delta_history,
        "iterations": stats.iterations,
        "newton_solves": stats.newton_solves,
        "weight_updates": stats.weight_updates,
        "drift_max": stats.drift_max,
        "violations": stats.violations,
    }
    _write_out(dump_json(result), args.out)
    return 0


def cmd_flow_solve(args) -> int:
    inst = parse_dimacs(args.file, maxflow=args.maxflow)
    sol = solve_min_cost_flow(inst, seed=args.seed)
    result = {
        "schema": SCHEMA_VERSION,
        "flow": sol.flow,
        "value": sol.value,
        "cost": sol.cost,
        "retries": sol.retries,
        "iterations": sol.lp_stats.iterations if sol.lp_stats else 0,
    }
    _write_out(dump_json(result), args.out)
    return 0


def cmd_lewis_weights(args) -> int:
    A = read_matrix(args.file)
    mode = "approximate" if args.mode == "approx" else "exact"
    w = compute_initial_weight(A, args.p, args.eps, mode=mode, seed=args.seed)
    lines = [fmt(v) for v in w]
    res = lewis_residual(A, w, args.p) if args.p != 2.0 else 0.0
    lines.append(f"residual {fmt(res)} eps {fmt(args.eps)}")
    _write_out("\n".join(lines) + "\n", args.out)
    return 0


def cmd_barrier_probe(args) -> int:
    A = read_matrix(args.file)
    m, n = A.shape
    b = -np.ones(m)
    x = np.zeros(n)
    if args.point:
        x = read_matrix(args.point).ravel()
    q = args.q if args.q is not None else lewisbarrier.default_q(m)
    ev = lewisbarrier.psi_hessian(A, b, x, q)
    force = float(ev.grad @ np.linalg.solve(ev.hess, ev.grad))
    rng = np.random.default_rng(args.seed)
    probes = []
    for _ in range(args.probes):
        ratio, bound = lewisbarrier.self_concordance_probe(
            A, b, x, rng.standard_normal(n), q
        )
        probes.append({"ratio": ratio, "bound": bound, "ok": bool(ratio <= bound * 1.05)})
    result = {
        "schema": SCHEMA_VERSION,
        "q": q,
        "psi": ev.psi,
        "grad": ev.grad,
        "force_bound": force,
        "force_limit": float(n),
        "n_spectrum_max": float(ev.n_spectrum.max()),
        "probes": probes,
    }
    _write_out(dump_json(result), args.out)
    return 0


def _check(name, value, bound, ok) -> dict:
    return {"name": name, "value": value, "bound": bound, "passed": bool(ok)}


def _diagnose_matrix(path: str, seed: int) -> list:
    A = read_matrix(path)
    m, n = A.shape
    checks = []
    bundle = projection_bundle(A)
    sig = leverage_scores(A)
    row_gap = float(np.max(np.abs(bundle.sigma - bundle.proj_squared.sum(axis=1))))
    checks.append(_check("sigma_row_sums", row_gap, 1e-8, row_gap <= 1e-8))
    mass = abs(float(sig.sum()) - n)
    checks.append(_check("leverage_mass", mass, 1e-8, mass <= 1e-8))
    eig = float(np.linalg.eigvalsh(bundle.lap).min())
    checks.append(_check("laplacian_psd", eig, -1e-8, eig >= -1e-8))
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(20):
        v = rng.standard_normal(m)
        lhs = float(np.max(np.abs(bundle.proj_squared @ v / bundle.sigma)))
        cap = min(float(np.max(np.abs(v))), float(np.sqrt(np.sum(bundle.sigma * v**2))))
        worst = max(worst, lhs - cap)
    checks.append(_check("projection_inf_contraction", worst, 1e-10, worst <= 1e-10))
    sk = sketched_leverage_scores(A, np.ones(m), 0.3, seed=seed)
    dev = float(np.max(np.abs(sk / sig - 1.0)))
    checks.append(_check("sketch_accuracy", dev, 0.3, dev <= 0.3))
    return checks


def _diagnose_lp(path: str, seed: int) -> list:
    problem, x0 = parse_lp_json(path)
    m, n = problem.shape
    checks = []
    cfg = PathConfig.for_problem(problem, "practical")
    w = weight_function(problem, x0, cfg, eps=1e-9, seed=seed)
    mass = abs(float(np.sum(w - cfg.c0)) - n)
    checks.append(_check("weight_mass", mass, 1e-6, mass <= 1e-6))
    in_range = bool(np.all(w > cfg.c0) and np.all(w <= 1.0 + cfg.c0 + 1e-9))
    checks.append(_check("weight_range", float(w.max()), 1.0 + cfg.c0, in_range))
    state, d = initial_path_state(problem, x0, cfg, seed)
    h, rep = newton_step(problem, state, cfg, cost=d)
    null = float(np.max(np.abs(problem.A.T @ h)))
    scale = 1e-8 * (1.0 + float(np.max(np.abs(problem.A))) * float(np.max(np.abs(h))))
    checks.append(_check("newton_null_space", null, scale, null <= scale))
    checks.append(_check("initial_centrality", rep.delta_hat, 1e-6,
                         rep.delta_hat <= max(1e-6, 40.0 * rep.delta_floor)))
    st = state
    drift_ok = True
    stats_probe = None
    from .pathfollow import SolveStats

    stats_probe = SolveStats()
    for _ in range(3):
        st = centering_inexact(problem, st, cfg.kbound, cfg, seed, cost=d, stats=stats_probe)
    checks.append(_check("system_drift", stats_probe.drift_max, 0.1,
                         stats_probe.drift_max <= 0.1 + 1e-9))
    return checks


def _diagnose_flow(path: str, seed: int, maxflow: bool = False) -> list:
    inst = parse_dimacs(path, maxflow=maxflow)
    checks = []
    qt = perturb_costs(inst, seed)
    M = inst.magnitude
    bound = 8 * inst.n_edges**2 * M**3
    qmax = int(np.max(np.abs(qt)))
    checks.append(_check("perturbed_cost_bound", qmax, bound, qmax <= bound))
    problem, x0, _ = build_flow_lp(inst, qtilde=qt)
    margin = float(min(np.min(x0 - problem.lower), np.min(problem.upper - x0)))
    checks.append(_check("interior_margin", margin, 0.0, margin > 0.0))
    det = perturb_costs(inst, seed)
    checks.append(_check("perturbation_deterministic", float(np.max(np.abs(det - qt))), 0.0,
                         bool(np.array_equal(det, qt))))
    zero = validate_flow(np.zeros(inst.n_edges), inst)
    checks.append(_check("zero_flow_valid", 0.0, 0.0, zero["ok"]))
    return checks


def cmd_diagnose(args) -> int:
    kind = args.kind
    if kind == "auto":
        if args.file.endswith(".json"):
            kind = "lp"
        elif args.file.endswith(".dimacs"):
            kind = "flow"
        else:
            kind = "matrix"
    if kind == "matrix":
        checks = _diagnose_matrix(args.file, args.seed)
    elif kind == "lp":
        checks = _diagnose_lp(args.file, args.seed)
    elif kind == "flow":
        checks = _diagnose_flow(args.file, args.seed)
    else:
        raise ValidationError(f"unknown diagnose kind {kind!r}")
    all_pass = all(c["passed"] for c in checks)
    report = {
        "schema": SCHEMA_VERSION,
        "kind": kind,
        "checks": checks,
        "all_pass": all_pass,
    }
    _write_out(dump_json(report), args.out)
    return 0 if all_pass else 3


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lewislp")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--eps", type=float, default=1e-6)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--profile", choices=["strict", "practical"], default="practical")
        p.add_argument("--out", default=None)

    p = sub.add_parser("lp-solve", help="solve an LP JSON instance")
    common(p)
    p.add_argument("file")
    p.set_defaults(run=cmd_lp_solve)

    p = sub.add_parser("flow-solve", help="solve a DIMACS min-cost flow instance")
    common(p)
    p.add_argument("--maxflow", action="store_true", help="max-flow input, costs set to 0")
    p.add_argument("file")
    p.set_defaults(run=cmd_flow_solve)

    p = sub.add_parser("lewis-weights", help="Lewis weights of a matrix file")
    common(p)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--mode", choices=["exact", "approx"], default="exact")
    p.add_argument("file")
    p.set_defaults(run=cmd_lewis_weights)

    p = sub.add_parser("barrier-probe", help="Lewis weight barrier report")
    common(p)
    p.add_argument("--q", type=float, default=None)
    p.add_argument("--point", default=None, help="vector file with the interior point")
    p.add_argument("--probes", type=int, default=5)
    p.add_argument("file")
    p.set_defaults(run=cmd_barrier_probe)

    p = sub.add_parser("diagnose", help="run the invariant suite on an instance")
    common(p)
    p.add_argument("--kind", choices=["auto", "matrix", "lp", "flow"], default="auto")
    p.add_argument("file")
    p.set_defaults(run=cmd_diagnose)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if hasattr(args, "eps") and not 0.0 < args.eps < 1.0:
        print("error: eps must lie in (0, 1)", file=sys.stderr)
        return 2
    try:
        return args.run(args)
    except _PARSE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except IterationCap as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except _NUMERIC_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except LewisLpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
