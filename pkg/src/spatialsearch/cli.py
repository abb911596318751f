"""Experiment runner: ``spatialsearch <subcommand> [options]``.

Options may also come from a flat ``key = value`` file given with
``--config``; command-line flags win.  Relative output paths are resolved
against ``$SPATIALSEARCH_OUT`` when it is set.  Exit codes: 0 success,
2 configuration error, 3 numerical-invariant failure.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from . import amplify, clustersearch, commsim, gridsearch, hybridlab, locality
from .graph import Graph, dimension_constant, make_grid, make_starfish, read_graph
from .rng import stream
from .simcore import SimulationError, answer_probability, count_ops

OUT_ENV = "SPATIALSEARCH_OUT"
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class ConfigError(ValueError):
    pass


class InvariantFailure(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Parsing helpers


def parse_range(text: str) -> list[int]:
    """``a..b`` (inclusive, empty when ``b < a``), ``a,b,c`` or a single integer."""
    text = str(text).strip()
    if not text:
        return []
    if ".." in text:
        a, b = text.split("..", 1)
        return list(range(int(a), int(b) + 1))
    return [int(t) for t in text.split(",") if t.strip()]


def parse_numbers(text: str) -> list[float]:
    """Comma-separated numbers; fractions such as ``1/9`` are accepted."""
    return [float(Fraction(t.strip())) for t in str(text).split(",") if t.strip()]


def parse_graph(spec: str) -> Graph:
    """``grid:D:SIDE``, ``starfish:M:LEG`` or a path to an edge-list file."""
    parts = spec.split(":")
    try:
        if parts[0] == "grid" and len(parts) == 3:
            return make_grid(int(parts[1]), int(parts[2]))
        if parts[0] == "starfish" and len(parts) == 3:
            return make_starfish(int(parts[1]), int(parts[2]))
    except ValueError as exc:
        raise ConfigError(f"graph: {exc}") from None
    path = resolve_path(spec[5:] if spec.startswith("file:") else spec)
    if not path.exists():
        raise ConfigError(f"graph: no such file {path}")
    return read_graph(path)


def parse_marked(spec: str, n: int, seed: int, pool: Sequence[int] | None = None) -> np.ndarray:
    """``i,j,...`` (1-based), ``random:k`` (drawn from ``pool`` when given) or ``none``."""
    x = np.zeros(n, dtype=np.int8)
    spec = str(spec).strip()
    if spec in ("", "none"):
        return x
    if spec.startswith("random:"):
        k = int(spec.split(":", 1)[1])
        src = np.arange(1, n + 1) if pool is None else np.asarray(pool)
        if not 0 <= k <= len(src):
            raise ConfigError(f"marked: cannot draw {k} of {len(src)} vertices")
        x[stream(seed, "cli.marked").choice(src, size=k, replace=False) - 1] = 1
        return x
    try:
        idx = [int(t) for t in spec.split(",")]
    except ValueError:
        raise ConfigError(f"marked: expected 'i,j,...', 'random:k' or 'none', got {spec!r}") from None
    if any(not 1 <= i <= n for i in idx):
        raise ConfigError(f"marked: vertices must lie in 1..{n}")
    x[np.asarray(idx) - 1] = 1
    return x


def parse_bits(spec: str, n: int, seed: int, name: str) -> np.ndarray:
    """A 0/1 string of length ``n``, ``random`` (fair coins) or ``random:k`` (exactly ``k`` ones)."""
    spec = str(spec).strip()
    rng = stream(seed, "cli.bits." + name)
    if spec == "random":
        return rng.integers(0, 2, size=n).astype(np.int8)
    if spec.startswith("random:"):
        x = np.zeros(n, dtype=np.int8)
        x[rng.choice(n, size=int(spec.split(":", 1)[1]), replace=False)] = 1
        return x
    if len(spec) != n or set(spec) - {"0", "1"}:
        raise ConfigError(f"{name}: expected {n} bits, 'random' or 'random:k'")
    return np.array([int(c) for c in spec], dtype=np.int8)


def resolve_path(p: str | Path) -> Path:
    p = Path(p)
    base = os.environ.get(OUT_ENV)
    return p if p.is_absolute() or not base else Path(base) / p


def read_config(path: str | Path) -> dict[str, str]:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string("[run]\n" + Path(path).read_text())
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"config: {exc}") from None
    return {k.replace("-", "_"): v for k, v in cp["run"].items()}


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def emit_json(payload: dict, out: str | None) -> None:
    text = json.dumps(_jsonable(payload), indent=2, sort_keys=True)
    if out:
        path = resolve_path(out)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text + "\n")
    else:
        print(text)


def csv_text(rows: Sequence[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, columns, extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    w.writerows(_jsonable(list(rows)))
    return buf.getvalue()


def emit_csv(text: str, out: str | None) -> None:
    if out:
        path = resolve_path(out)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    else:
        sys.stdout.write(text)


def _echo(args: argparse.Namespace) -> dict:
    return {k: v for k, v in vars(args).items() if k not in ("handler", "config")}


def _grid_params(args: argparse.Namespace, d: int) -> gridsearch.GridParams:
    return gridsearch.GridParams(d, beta=args.beta, mu=args.mu, l0=args.l0, repetitions=args.repetitions)


def _irregular_params(args: argparse.Namespace) -> clustersearch.IrregularParams:
    return clustersearch.IrregularParams(d=args.d, n1=args.n1, beta=args.beta, repetitions=args.repetitions,
                                         attempts=args.attempts, top_rule=args.top_rule)


# ---------------------------------------------------------------------------
# Subcommands


def cmd_search_grid(args: argparse.Namespace) -> int:
    g = make_grid(args.d, args.side)
    p = _grid_params(args, args.d)
    x = parse_marked(args.marked, g.n, args.seed)
    k = int(x.sum())
    mode = args.mode if args.mode != "auto" else ("unique" if k <= 1 else "k")
    payload: dict[str, Any] = {"command": "search-grid", "config": _echo(args), "mode": mode,
                               "marked": (np.flatnonzero(x) + 1).tolist()}
    if mode == "unique":
        out = gridsearch.search_unique(g, x, p, args.seed)
        table = gridsearch.level_table(g, x, p)
        payload["levels"] = table
        worst = max((row.get("delta", 0.0) for row in table), default=0.0)
        payload["max_level_delta"] = worst
    elif mode == "k":
        out = gridsearch.search_k(g, x, max(k, 1), args.seed, p)
        worst = 0.0
    else:
        out = gridsearch.search_unknown(g, x, args.seed, p)
        worst = 0.0
    payload["outcome"] = out.to_dict()
    emit_json(payload, args.out)
    if worst > 1e-9:
        raise InvariantFailure(f"level success deviates from the prediction by {worst:.3e}")
    if not k and out.answer_one_probability != 0:
        raise InvariantFailure("false-positive probability is nonzero on an unmarked input")
    return EXIT_OK


def cmd_search_irregular(args: argparse.Namespace) -> int:
    g = parse_graph(args.graph)
    p = _irregular_params(args)
    x = parse_marked(args.marked, g.n, args.seed)
    k = args.k or max(int(x.sum()), 1)
    payload: dict[str, Any] = {"command": "search-irregular", "config": _echo(args),
                               "marked": (np.flatnonzero(x) + 1).tolist()}
    kappa = dimension_constant(g, p.d)
    if k == 1:
        run, prog = clustersearch.irregular_run(g, p, args.seed, kappa)
        out = gridsearch.execute_runs([run], x, stream(args.seed, "clustersearch.sample"), args.seed,
                                      {"n": g.n, "d": p.d, "n1": p.n1, "beta": p.beta})
        out.extra.update(run.info)
        audit = clustersearch.audit_goodness(prog.tree, kappa, g.n, p.d)
        payload["cluster_tree"] = prog.tree.to_dict()
        payload["audit"] = {"passed": audit.passed, "thresholds": audit.thresholds,
                            "max_radius": [float(r.max(initial=0)) for r in audit.radii],
                            "offenders": audit.offenders}
    else:
        out = clustersearch.search_irregular_k(g, x, k, args.seed, p, kappa)
    payload["outcome"] = out.to_dict()
    emit_json(payload, args.out)
    return EXIT_OK


def cmd_search_scattered(args: argparse.Namespace) -> int:
    g = parse_graph(args.graph)
    p = _irregular_params(args)
    if args.potential.startswith("random:"):
        h = int(args.potential.split(":", 1)[1])
        if not 1 <= h <= g.n:
            raise ConfigError(f"potential: cannot draw {h} of {g.n} vertices")
        pool = np.sort(stream(args.seed, "cli.potential").choice(np.arange(1, g.n + 1), size=h, replace=False))
    else:
        pool = np.asarray(sorted({int(t) for t in args.potential.split(",")}))
    x = parse_marked(args.marked, g.n, args.seed, pool)
    k = args.k or max(int(x.sum()), 1)
    out = clustersearch.search_scattered(g, pool, k, x, args.seed, p)
    emit_json({"command": "search-scattered", "config": _echo(args), "potential": pool.tolist(),
               "marked": (np.flatnonzero(x) + 1).tolist(), "outcome": out.to_dict()}, args.out)
    return EXIT_OK


def cmd_verify_locality(args: argparse.Namespace) -> int:
    g = parse_graph(args.graph_file)
    path = resolve_path(args.matrix_file)
    try:
        m = locality.read_matrix(path)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"matrix_file: {exc}") from None
    u = locality.DenseUnitary(m, locality.vertex_annotation(m.shape[0], g))
    if args.mode == "z":
        ok, bad = locality.check_z_local(u, g)
        result = {"verdict": "true" if ok else "false", "violations": bad[:50]}
    elif args.mode == "c":
        rep = locality.check_c_local_dense(u, g)
        result = {"verdict": "true" if rep.ok else "false", "cause": rep.cause, "blocks": rep.blocks,
                  "detail": rep.detail}
    else:
        try:
            verdict, info = locality.check_h_local(u, g)
        except locality.EigendecompositionFailure as exc:
            raise InvariantFailure(str(exc)) from None
        result = {"verdict": verdict.value, **info}
    emit_json({"command": "verify-locality", "config": _echo(args), **result}, args.out)
    return EXIT_OK


AMPLIFY_COLUMNS = ["epsilon", "m", "calls", "predicted", "simulated", "delta"]


def cmd_amplify_demo(args: argparse.Namespace) -> int:
    rows = []
    for eps in parse_numbers(args.epsilon):
        if not 0 < eps <= 1:
            raise ConfigError("epsilon: must lie in (0, 1]")
        rows += amplify.demo_rows(eps, parse_range(args.m))
    emit_csv(csv_text(rows, AMPLIFY_COLUMNS), args.out)
    worst = max((r["delta"] for r in rows), default=0.0)
    if worst > 1e-9:
        raise InvariantFailure(f"simulation deviates from the prediction by {worst:.3e}")
    return EXIT_OK


def cmd_hybrid(args: argparse.Namespace) -> int:
    if args.graph == "starfish":
        lay = hybridlab.starfish_layout(args.legs, args.leg_len)
        if args.algo != "diameter":
            raise ConfigError("algo: the starfish layout runs the diameter search only")
        run = hybridlab.diameter_run(lay.graph)
    else:
        try:
            lay = hybridlab.grid_layout(args.side, args.k, args.grid_d)
        except ValueError as exc:
            raise ConfigError(f"k: {exc}") from None
        run = (hybridlab.grid_search_run(lay, args.k, args.seed) if args.algo == "grid-search"
               else hybridlab.diameter_run(lay.graph))
    res = hybridlab.run_lab(lay, run, args.c)
    emit_csv(res.trace.to_csv(), args.out)
    if args.summary:
        emit_json({"command": "hybrid-lowerbound", "config": _echo(args), **res.summary()}, args.summary)
    if not res.report.holds or not res.trace.monotone:
        raise InvariantFailure("hybrid divergence chain violated")
    return EXIT_OK


def cmd_disjointness(args: argparse.Namespace) -> int:
    try:
        commsim.embed_cube(args.n)
    except ValueError as exc:
        raise ConfigError(f"n: {exc}") from None
    x = parse_bits(args.x, args.n, args.seed, "x")
    y = parse_bits(args.y, args.n, args.seed, "y")
    tally = commsim.Tally(args.query_message_qubits, args.relay_message_qubits)
    res = commsim.run_disjointness(x, y, args.seed, tally=tally)
    emit_json({"command": "disjointness", "config": _echo(args), "x": "".join(map(str, x)),
               "y": "".join(map(str, y)), "intersect": bool(np.any(x & y)), **res.to_dict()}, args.out)
    if not res.sync_ok:
        raise InvariantFailure("vertex registers fell out of sync")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Sweeps

SWEEP_COLUMNS = {
    "grid": ["d", "R", "side", "steps", "queries", "success", "predicted", "error"],
    "amplify": ["epsilon", "m", "steps", "queries", "success", "predicted", "error"],
    "audit": ["side", "seed", "passed", "steps", "queries", "success", "predicted", "error"],
    "disjointness": ["n", "qubits", "per_sqrt_n", "steps", "queries", "success", "predicted", "error"],
}


def _sweep_grid(d: int, R: int) -> dict:
    p = gridsearch.GridParams(d)
    side = gridsearch.table_levels(p, R)[-1].side
    g = make_grid(d, side)
    run, plan, _ = gridsearch.unique_run(g, p)
    x = np.zeros(g.n, dtype=np.int8)
    x[g.n // 2] = 1
    c = count_ops(run.ops)
    return {"d": d, "R": R, "side": side, "steps": c.steps, "queries": c.queries,
            "success": answer_probability(run.execute(x)),
            "predicted": gridsearch.predicted_fold(plan.levels, d)[-1]}


def _sweep_amplify(eps: float, m: int) -> dict:
    row = amplify.demo_rows(eps, [m])[0]
    return {"epsilon": eps, "m": m, "steps": 2 * m + 1 + 2 * m, "queries": 0,
            "success": row["simulated"], "predicted": row["predicted"]}


def _sweep_audit(side: int, seed: int) -> dict:
    g = make_grid(3, side)
    p = clustersearch.IrregularParams()
    kappa = dimension_constant(g, p.d)
    tree = clustersearch.build_cluster_tree(g, p.n1, p.beta, seed, d=p.d)
    return {"side": side, "seed": seed, "passed": clustersearch.audit_goodness(tree, kappa, g.n, p.d).passed}


def _sweep_disjointness(n: int) -> dict:
    z = np.zeros(n, dtype=np.int8)
    r = commsim.run_disjointness(z, z, 0)
    return {"n": n, "qubits": r.qubit_count, "per_sqrt_n": r.qubit_count / math.sqrt(n),
            "queries": r.queries, "success": r.success_probability}


def _sweep_point(kind: str, point: tuple) -> dict:
    fn: Callable[..., dict] = {"grid": _sweep_grid, "amplify": _sweep_amplify, "audit": _sweep_audit,
                               "disjointness": _sweep_disjointness}[kind]
    try:
        return fn(*point)
    except Exception as exc:  # a failed point is reported in its row and the sweep continues
        names = SWEEP_COLUMNS[kind]
        return {**dict(zip(names, point)), "error": f"{type(exc).__name__}: {exc}"}


def sweep_points(args: argparse.Namespace) -> list[tuple]:
    if args.kind == "grid":
        return [(args.d, R) for R in parse_range(args.R)]
    if args.kind == "amplify":
        return [(e, m) for e in parse_numbers(args.epsilon) for m in parse_range(args.m)]
    if args.kind == "audit":
        return [(args.side, s) for s in parse_range(args.seeds)]
    return [(n,) for n in parse_range(args.n)]


def run_sweep(kind: str, points: Sequence[tuple], jobs: int = 1) -> list[dict]:
    if jobs > 1 and len(points) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(_sweep_point, [kind] * len(points), points))
    return [_sweep_point(kind, pt) for pt in points]


def cmd_sweep(args: argparse.Namespace) -> int:
    rows = run_sweep(args.kind, sweep_points(args), args.jobs)
    if args.kind == "audit" and rows:
        passed = [r for r in rows if r.get("passed")]
        rows.append({"side": args.side, "seed": "summary", "passed": f"{len(passed)}/{len(rows)}",
                     "success": len(passed) / len(rows)})
    emit_csv(csv_text(rows, SWEEP_COLUMNS[args.kind]), args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser


def _grid_knobs(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--beta", type=float, default=0.8)
    sp.add_argument("--mu", type=float, default=5 / 11)
    sp.add_argument("--l0", type=int, default=0, help="base side; 0 picks 3 for d=2 and 2 otherwise")
    sp.add_argument("--repetitions", type=int, default=None)


def _irregular_knobs(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--graph", default="grid:3:8", help="grid:D:SIDE, starfish:M:LEG or an edge-list file")
    sp.add_argument("--d", type=float, default=3)
    sp.add_argument("--n1", type=float, default=50)
    sp.add_argument("--beta", type=float, default=0.75)
    sp.add_argument("--repetitions", type=int, default=None)
    sp.add_argument("--attempts", type=int, default=5)
    sp.add_argument("--top-rule", choices=["count", "fold"], default="count")
    sp.add_argument("--k", type=int, default=0, help="marked count; 0 means the number of marked vertices")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spatialsearch", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, handler: Callable, help_: str) -> argparse.ArgumentParser:
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", help="flat key = value file; flags override it")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", default=None)
        sp.set_defaults(handler=handler)
        return sp

    sp = add("search-grid", cmd_search_grid, "search a d-dimensional grid")
    sp.add_argument("--d", type=int, default=3)
    sp.add_argument("--side", type=int, default=4)
    sp.add_argument("--marked", default="random:1")
    sp.add_argument("--mode", choices=["auto", "unique", "k", "unknown"], default="auto")
    _grid_knobs(sp)

    sp = add("search-irregular", cmd_search_irregular, "cluster-based search on an arbitrary graph")
    sp.add_argument("--marked", default="random:1")
    _irregular_knobs(sp)

    sp = add("search-scattered", cmd_search_scattered, "search among a scattered set of candidates")
    sp.add_argument("--potential", default="random:32")
    sp.add_argument("--marked", default="random:1")
    _irregular_knobs(sp)

    sp = add("verify-locality", cmd_verify_locality, "check a unitary against a graph")
    sp.add_argument("--matrix-file", required=False, default=None)
    sp.add_argument("--graph-file", default=None)
    sp.add_argument("--mode", choices=["z", "c", "h"], default="z")

    sp = add("amplify-demo", cmd_amplify_demo, "predicted against simulated amplification")
    sp.add_argument("--epsilon", default="1/9")
    sp.add_argument("--m", default="0..5")

    sp = add("hybrid-lowerbound", cmd_hybrid, "instrument the hybrid argument")
    sp.add_argument("--graph", choices=["starfish", "grid"], default="starfish")
    sp.add_argument("--algo", choices=["diameter", "grid-search"], default="diameter")
    sp.add_argument("--legs", type=int, default=6)
    sp.add_argument("--leg-len", type=int, default=2)
    sp.add_argument("--side", type=int, default=4)
    sp.add_argument("--k", type=int, default=8)
    sp.add_argument("--grid-d", type=int, default=3)
    sp.add_argument("--c", type=float, default=0.25)
    sp.add_argument("--summary", default=None, help="also write a JSON summary here")

    sp = add("disjointness", cmd_disjointness, "two-party disjointness protocol")
    sp.add_argument("--n", type=int, default=8)
    sp.add_argument("--x", default="random")
    sp.add_argument("--y", default="random")
    sp.add_argument("--query-message-qubits", type=int, default=2)
    sp.add_argument("--relay-message-qubits", type=int, default=1)

    sp = add("sweep", cmd_sweep, "parameter sweep to CSV")
    sp.add_argument("--kind", choices=sorted(SWEEP_COLUMNS), default="grid")
    sp.add_argument("--d", type=int, default=2)
    sp.add_argument("--R", default="1..2")
    sp.add_argument("--epsilon", default="1/4")
    sp.add_argument("--m", default="0..3")
    sp.add_argument("--side", type=int, default=8)
    sp.add_argument("--seeds", default="0..19")
    sp.add_argument("--n", default="8,64")
    sp.add_argument("--jobs", type=int, default=1)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: Sequence[str]) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if not getattr(args, "config", None):
        return args
    values = read_config(resolve_path(args.config))
    sp = parser._subparsers._group_actions[0].choices[args.command]  # type: ignore[union-attr]
    known = {a.dest for a in sp._actions}
    unknown = sorted(set(values) - known - {"command"})
    if unknown:
        raise ConfigError(f"config: unknown keys {unknown}")
    values.pop("command", None)
    sp.set_defaults(**values)
    return parser.parse_args(argv)


def _validate(args: argparse.Namespace) -> None:
    if args.command == "verify-locality" and not (args.matrix_file and args.graph_file):
        raise ConfigError("matrix_file/graph_file: both are required")
    if getattr(args, "jobs", 1) < 1:
        raise ConfigError("jobs: must be at least 1")
    if args.command == "search-grid":
        _grid_params(args, args.d)
    elif args.command == "sweep" and args.kind == "grid":
        gridsearch.GridParams(args.d)
    elif args.command in ("search-irregular", "search-scattered"):
        _irregular_params(args)
    elif args.command == "hybrid-lowerbound" and not 0 < args.c < 0.5:
        raise ConfigError("c: the switch-stride constant must lie in (0, 1/2)")


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = _apply_config(parser, argv)
        _validate(args)
        return args.handler(args)
    except SystemExit as exc:  # argparse usage errors already print their message
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    except (ConfigError, gridsearch.ParameterError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InvariantFailure, SimulationError, ArithmeticError) as exc:
        print(f"invariant failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
