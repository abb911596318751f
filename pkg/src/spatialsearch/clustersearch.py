"""Search on irregular graphs through a random hierarchy of clusters.

Level-``r`` clusters group level-``(r-1)`` clusters around randomly chosen
pegs, Voronoi style.  Basis states carry the label of the cluster currently
being searched in the ``cluster`` register, so clusters that share a peg stay
distinguishable.

Every cluster of one level runs the same step list in lockstep.  Padding
("dummy") clusters must ignore the global oracle, so their answer bit is
parked in ``|+>`` for the duration of their search; the oracle acts on it
trivially and the closing Hadamard returns it to ``|0>``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.sparse.csgraph import shortest_path

from .amplify import amplified_ops, optimal_rounds, predicted_success
from .graph import Graph, dimension_constant
from .gridsearch import ParameterError, SearchRun, execute_runs
from .report import SearchOutcome
from .rng import stream
from .simcore import (ORACLE, SWAP, Basis, BasisState, BlockGroup, CostCounters, LocalStep, Op, QuantumState,
                      SimulationError, count_ops, init_state, run_ops)

HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)


class BadClustering(SimulationError):
    """A cluster's radius exceeds its level threshold."""


@dataclass
class ClusterLevel:
    peg: np.ndarray  # vertex of each cluster
    dummy: np.ndarray  # bool
    children: list[np.ndarray]  # indices into the level below (real children first, then dummies)
    offset: int  # global label of cluster i is offset + i

    def __len__(self) -> int:
        return len(self.peg)

    def labels(self) -> np.ndarray:
        return self.offset + np.arange(len(self.peg))

    @property
    def real(self) -> np.ndarray:
        return np.flatnonzero(~self.dummy)


@dataclass
class ClusterTree:
    graph: Graph
    sizes: list[float]  # n_0 = 1, n_1, ..., n_R
    K: list[int]  # children per cluster at each level (K[0] unused)
    levels: list[ClusterLevel]
    base: np.ndarray  # level-0 vertices
    seed: int = 0

    @property
    def R(self) -> int:
        return len(self.levels) - 1

    @property
    def root_label(self) -> int:
        top = self.levels[-1]
        return top.offset + len(top)

    def m(self, r: int) -> int:
        """Largest m with 2m + 1 <= sqrt(n_r / n_{r-1})."""
        return max(0, math.floor((math.sqrt(self.sizes[r] / self.sizes[r - 1]) - 1) / 2 + 1e-12))

    def real_children(self, r: int, i: int) -> np.ndarray:
        lower = self.levels[r - 1]
        ch = self.levels[r].children[i]
        return ch[~lower.dummy[ch]]

    def to_dict(self) -> dict:
        out = {"sizes": self.sizes, "K": self.K, "seed": self.seed, "levels": []}
        for r, lv in enumerate(self.levels):
            out["levels"].append([{"label": int(lv.offset + i), "peg": int(lv.peg[i]), "dummy": bool(lv.dummy[i]),
                                   "children": [int(self.levels[r - 1].offset + c) for c in lv.children[i]]
                                   if r else []} for i in range(len(lv))])
        return out


def irregular_schedule(n: int, d: float, n1: float, beta: float) -> list[float]:
    """Cluster sizes ``n_0 = 1 < n_1 < ...``, stopping at the largest size <= n.

    For ``d = 2`` sizes grow by the fixed factor ``2^sqrt(log2 n)``; otherwise
    ``n_r = n_{r-1}^(1/beta)``.
    """
    if n1 <= 1:
        raise ParameterError("n1: must exceed 1")
    if d == 2:
        f = 2 ** math.sqrt(math.log2(max(n, 2)))
        sizes = [1.0, f]
        while sizes[-1] * f <= n:
            sizes.append(sizes[-1] * f)
        return sizes
    if not 2 / d < beta < 1:
        raise ParameterError(f"beta: must lie in (2/d, 1) = ({2 / d:.3f}, 1), got {beta}")
    sizes = [1.0, float(n1)]
    while sizes[-1] ** (1 / beta) <= n:
        sizes.append(sizes[-1] ** (1 / beta))
    return sizes


def build_cluster_tree(g: Graph, n1: float, beta: float, seed: int = 0, *, d: float = 3,
                       base: Sequence[int] | None = None) -> ClusterTree:
    """Random cluster hierarchy over the ``base`` vertices (default: all of ``g``)."""
    rng = stream(seed, "clustertree")
    base = np.arange(1, g.n + 1) if base is None else np.asarray(sorted(set(int(b) for b in base)), dtype=np.int64)
    N = len(base)
    if N == 0:
        raise ParameterError("base: need at least one level-0 vertex")
    sizes = irregular_schedule(N, d, n1, beta) if n1 < N else [1.0, float(max(N, 1))]
    levels = [ClusterLevel(base.copy(), np.zeros(N, bool), [], 1)]
    K = [1]
    for r in range(1, len(sizes)):
        ratio = sizes[r] / sizes[r - 1]
        cap = max(1, math.floor(ratio + 1e-9))
        kr = 2 * math.ceil(ratio - 1e-9)
        lower = levels[-1]
        count = min(g.n, 2 ** (r - 1) * math.ceil(N / sizes[r] - 1e-9)) if n1 < N else 1
        pegs = rng.choice(np.arange(1, g.n + 1), size=count, replace=False)
        dist = g.distance_rows(pegs.tolist())
        lower_real = lower.real
        owner = np.argmin(dist[:, lower.peg[lower_real] - 1], axis=0)
        pegs_out, kids = [], []
        for j in range(count):
            members = np.sort(lower_real[owner == j])
            for start in range(0, len(members), cap):
                pegs_out.append(int(pegs[j]))
                kids.append(members[start:start + cap])
        # dummies: extra level-(r-1) clusters parked on the parent's peg
        lower_pegs = list(lower.peg)
        lower_dummy = list(lower.dummy)
        children = []
        for peg, real in zip(pegs_out, kids):
            pad = np.arange(len(lower_pegs), len(lower_pegs) + kr - len(real))
            lower_pegs.extend([peg] * len(pad))
            lower_dummy.extend([True] * len(pad))
            children.append(np.concatenate([real, pad]).astype(np.int64))
        extra = len(lower_pegs) - len(lower.peg)
        lower_children = lower.children + [np.zeros(0, np.int64)] * extra if r > 1 else []
        levels[-1] = ClusterLevel(np.array(lower_pegs, dtype=np.int64), np.array(lower_dummy, bool),
                                  lower_children, lower.offset)
        offset = lower.offset + len(lower_pegs)
        levels.append(ClusterLevel(np.array(pegs_out, dtype=np.int64), np.zeros(len(pegs_out), bool),
                                   children, offset))
        K.append(kr)
    return ClusterTree(g, sizes, K, levels, base, seed)


@dataclass
class GoodnessAudit:
    radii: list[np.ndarray]
    thresholds: list[float]
    passed: bool
    offenders: list[tuple[int, int, int, float]] = field(default_factory=list)  # (level, label, radius, threshold)


def level_threshold(kappa: float, n_r: float, log_arg: float, d: float, scale: float = 1.0) -> float:
    return ((2 / kappa) * scale * n_r * math.log(max(log_arg, 2))) ** (1 / d)


def audit_goodness(t: ClusterTree, kappa: float, n: int, d: float = 3, *, scale: float = 1.0,
                   log_arg: float | None = None) -> GoodnessAudit:
    """Compare each cluster's peg-to-child-peg radius with ``((2/kappa) scale n_r ln(log_arg))^(1/d)``."""
    log_arg = n if log_arg is None else log_arg
    radii, thresholds, offenders = [np.zeros(len(t.levels[0]))], [0.0], []
    for r in range(1, len(t.levels)):
        lv = t.levels[r]
        dist = t.graph.distance_rows(np.unique(lv.peg).tolist())
        row = {int(p): i for i, p in enumerate(np.unique(lv.peg))}
        rad = np.zeros(len(lv))
        for i in range(len(lv)):
            ch = t.real_children(r, i)
            if len(ch):
                rad[i] = dist[row[int(lv.peg[i])], t.levels[r - 1].peg[ch] - 1].max()
        thr = level_threshold(kappa, t.sizes[r], log_arg, d, scale) if math.isfinite(kappa) else math.inf
        for i in np.flatnonzero(rad > thr):
            offenders.append((r, int(lv.offset + i), int(rad[i]), thr))
        radii.append(rad)
        thresholds.append(thr)
    return GoodnessAudit(radii, thresholds, not offenders, offenders)


def _householder(k: int) -> np.ndarray:
    """Reflection swapping ``e_0`` with the uniform vector on the other ``k`` coordinates."""
    v = np.zeros(k + 1)
    v[0] = 1.0
    v[1:] = -1 / math.sqrt(k)
    return (np.eye(k + 1) - np.outer(v, v)).astype(complex)  # |v|^2 = 2


class _Router:
    """Shortest-path trees of ``g`` rooted at peg vertices, computed in batches."""

    def __init__(self, g: Graph):
        self.g = g
        self.pred: dict[int, np.ndarray] = {}

    def prepare(self, sources: Sequence[int]) -> None:
        todo = sorted({int(s) for s in sources} - self.pred.keys())
        if todo:
            _, pred = shortest_path(self.g.csr, unweighted=True, indices=np.array(todo) - 1,
                                    return_predecessors=True)
            for s, row in zip(todo, pred):
                self.pred[s] = row

    def path(self, src: int, dst: int) -> list[int]:
        row = self.pred[src]
        out = [dst]
        while out[-1] != src:
            p = row[out[-1] - 1]
            if p < 0:
                raise ParameterError(f"vertex {dst} unreachable from {src}")
            out.append(int(p) + 1)
        return out[::-1]


def _merge(basis: Basis, a: LocalStep | None, b: LocalStep | None, label: str) -> LocalStep:
    groups = (a.groups if a else []) + (b.groups if b else [])
    return LocalStep(basis, groups, label)


class ClusterProgram:
    """Step lists ``A_r`` for all clusters of each level, plus the top-level search from ``start``."""

    def __init__(self, tree: ClusterTree, start: int = 1, m_top: int | None = None, top_rule: str = "count"):
        self.tree = tree
        g = tree.graph
        self.basis = basis = Basis(g)
        self.start = BasisState(start, 0, tree.root_label)
        router = _Router(g)
        lv0 = tree.levels[0]
        real0 = lv0.real
        for v, lab in zip(lv0.peg[real0], lv0.labels()[real0]):
            basis.add((int(v), 0, int(lab)))
        self.flip_w = LocalStep(basis, [BlockGroup(np.array([[basis.lookup((int(v), 1, int(lab)))]
                                                             for v, lab in zip(lv0.peg[real0], lv0.labels()[real0])],
                                                            dtype=np.int64).reshape(-1, 1),
                                                   np.array([[-1]], dtype=complex))], "W")
        self.A: list[list[Op]] = []
        self.U: list[list[Op] | None] = [None]
        self.spread_len: list[int] = [0]
        self.A.append(self._wrap_dummies(0, [ORACLE]))
        for r in range(1, len(tree.levels)):
            lv = tree.levels[r]
            real = lv.real
            spread = self._spread(router, lv.peg[real], lv.labels()[real],
                                  [tree.levels[r - 1].peg[lv.children[i]] for i in real],
                                  [tree.levels[r - 1].labels()[lv.children[i]] for i in real], f"U{r}")
            u = spread + self.A[-1]
            flip_s = self._flip_start(lv.peg[real], lv.labels()[real], f"S{r}")
            self.U.append(u)
            self.spread_len.append(len(spread))
            self.A.append(self._wrap_dummies(r, amplified_ops(u, self.flip_w, flip_s, tree.m(r))))
        top = tree.levels[-1]
        spread = self._spread(router, np.array([start]), np.array([tree.root_label]),
                              [top.peg], [top.labels()], "Utop")
        self.U_top = spread + self.A[-1]
        self.predicted = self._predicted_fold()
        if m_top is None:
            # "count": as many rounds as suit a single marked cluster among the top-level clusters,
            # leaving the lower-level loss to repetitions; "fold": tuned to the predicted success.
            base = 1.0 if top_rule == "count" else self.predicted[-1]
            m_top = optimal_rounds(base / len(top))
        self.m_top = m_top
        flip_s = self._flip_start(np.array([start]), np.array([tree.root_label]), "Stop")
        self.top = amplified_ops(self.U_top, self.flip_w, flip_s, self.m_top)

    def _predicted_fold(self) -> list[float]:
        p = [1.0]
        for r in range(1, len(self.tree.levels)):
            p.append(predicted_success(p[-1] / self.tree.K[r], self.tree.m(r)))
        return p

    def predicted_top(self) -> float:
        return predicted_success(self.predicted[-1] / len(self.tree.levels[-1]), self.m_top)

    def _flip_start(self, pegs: np.ndarray, labels: np.ndarray, label: str) -> LocalStep:
        idx = [self.basis.add((int(v), 0, int(c))) for v, c in zip(pegs, labels)]
        return LocalStep(self.basis, [BlockGroup(np.array(idx, dtype=np.int64).reshape(-1, 1),
                                                 np.array([[-1]], dtype=complex))], label)

    def _wrap_dummies(self, r: int, ops: list[Op]) -> list[Op]:
        lv = self.tree.levels[r]
        dummies = np.flatnonzero(lv.dummy)
        if not len(dummies):
            return ops
        pairs = [(self.basis.add((int(lv.peg[i]), 0, int(lv.offset + i))),
                  self.basis.lookup((int(lv.peg[i]), 1, int(lv.offset + i)))) for i in dummies]
        had = LocalStep(self.basis, [BlockGroup(np.array(pairs, dtype=np.int64), HADAMARD)], f"park{r}")
        ops = list(ops)
        if ops and ops[0] is not ORACLE:
            ops[0] = _merge(self.basis, had, ops[0], f"park{r}+{ops[0].label}")
        else:
            ops.insert(0, had)
        if ops[-1] is not ORACLE and len(ops) > 1:
            ops[-1] = _merge(self.basis, ops[-1], had, f"{ops[-1].label}+park{r}")
        else:
            ops.append(had)
        return ops

    def _spread(self, router: _Router, pegs: np.ndarray, labels: np.ndarray, child_pegs: list[np.ndarray],
                child_labels: list[np.ndarray], name: str) -> list[LocalStep]:
        """Reflect each parent label into the uniform child-label superposition, then walk children home."""
        basis = self.basis
        router.prepare(pegs.tolist())
        by_k: dict[int, list[list[int]]] = {}
        walks = []
        for peg, lab, cp, cl in zip(pegs, labels, child_pegs, child_labels):
            peg, k = int(peg), len(cl)
            for z in (0, 1):
                row = [basis.add((peg, z, int(lab)))] + [basis.add((peg, z, int(c))) for c in cl]
                by_k.setdefault(k, []).append(row)
            for w, c in zip(cp, cl):
                if int(w) != peg:
                    walks.append((router.path(peg, int(w)), int(c)))
        groups = [BlockGroup(np.array(rows, dtype=np.int64), _householder(k)) for k, rows in by_k.items()]
        steps = [LocalStep(basis, groups, f"{name}.split")]
        depth = max((len(p) - 1 for p, _ in walks), default=0)
        for t in range(depth):
            pairs = []
            for path, c in walks:
                if t < len(path) - 1:
                    for z in (0, 1):
                        pairs.append((basis.add((path[t], z, c)), basis.add((path[t + 1], z, c))))
            steps.append(LocalStep(basis, [BlockGroup(np.array(pairs, dtype=np.int64), SWAP)], f"{name}.walk{t}"))
        return steps

    def run_level(self, r: int, i: int, x: np.ndarray, c: CostCounters | None = None) -> QuantumState:
        lv = self.tree.levels[r]
        state = init_state(self.basis, BasisState(int(lv.peg[i]), 0, int(lv.offset + i)))
        run_ops(state, self.A[r], x, c)
        return state

    def level_costs(self) -> list[dict]:
        rows = []
        for r in range(len(self.tree.levels)):
            a = count_ops(self.A[r])
            row = {"r": r, "K": self.tree.K[r], "m": self.tree.m(r) if r else 0, "T_A": a.steps, "Q_A": a.queries,
                   "clusters": int((~self.tree.levels[r].dummy).sum()), "predicted": self.predicted[r]}
            if r:
                row["T_U"] = count_ops(self.U[r]).steps
                row["spread"] = self.spread_len[r]
            rows.append(row)
        return rows


@dataclass(frozen=True)
class IrregularParams:
    d: float = 3
    n1: float = 50
    beta: float = 0.75
    repetitions: int | None = None
    attempts: int = 5
    top_rule: str = "count"

    def __post_init__(self) -> None:
        if self.d < 2:
            raise ParameterError("d: irregular search needs d >= 2")
        if self.d != 2 and not 2 / self.d < self.beta < 1:
            raise ParameterError(f"beta: must lie in (2/d, 1), got {self.beta}")
        if self.n1 <= 1:
            raise ParameterError("n1: must exceed 1")
        if self.top_rule not in ("count", "fold"):
            raise ParameterError(f"top_rule: expected 'count' or 'fold', got {self.top_rule!r}")
        if self.attempts < 1:
            raise ParameterError("attempts: must be at least 1")

    def default_repetitions(self, n: int) -> int:
        return self.repetitions if self.repetitions is not None else 2 * math.ceil(math.log(max(n, 2)) ** 2)


def _good_tree(g: Graph, p: IrregularParams, seed: int, kappa: float, base=None, scale: float = 1.0,
               log_arg: float | None = None, tag: str = "") -> tuple[ClusterTree, GoodnessAudit]:
    last = None
    for attempt in range(p.attempts):
        sub = int(stream(seed, "clustersearch.reseed" + tag, attempt).integers(0, 2 ** 62))
        tree = build_cluster_tree(g, p.n1, p.beta, sub if attempt else seed, d=p.d, base=base)
        audit = audit_goodness(tree, kappa, g.n, p.d, scale=scale, log_arg=log_arg)
        if audit.passed:
            return tree, audit
        last = audit
    raise BadClustering(f"no good clustering after {p.attempts} attempts; offenders {last.offenders[:3]}")


def irregular_run(g: Graph, p: IrregularParams, seed: int, kappa: float | None = None, *, base=None,
                  scale: float = 1.0, log_arg: float | None = None, tag: str = "") -> tuple[SearchRun, ClusterProgram]:
    kappa = dimension_constant(g, p.d) if kappa is None else kappa
    tree, audit = _good_tree(g, p, seed, kappa, base, scale, log_arg, tag)
    prog = ClusterProgram(tree, top_rule=p.top_rule)
    info = {"R": tree.R, "sizes": tree.sizes, "K": tree.K, "m_top": prog.m_top, "kappa": kappa,
            "predicted_per_run": prog.predicted_top(), "steps_per_run": count_ops(prog.top).steps,
            "audit_thresholds": audit.thresholds}
    run = SearchRun(prog.basis, prog.top, prog.start, p.default_repetitions(g.n), None, "irregular", info)
    return run, prog


def run_irregular_search(g: Graph, x: np.ndarray, d: float = 3, seed: int = 0, p: IrregularParams | None = None,
                         kappa: float | None = None) -> SearchOutcome:
    p = p or IrregularParams(d=d)
    run, _ = irregular_run(g, p, seed, kappa)
    out = execute_runs([run], x, stream(seed, "clustersearch.sample"), seed,
                       {"n": g.n, "d": p.d, "n1": p.n1, "beta": p.beta})
    out.extra.update(run.info)
    return out


def _iterated(g: Graph, x: np.ndarray, k: int, seed: int, p: IrregularParams, pool: np.ndarray,
              kappa: float | None, name: str) -> SearchOutcome:
    kappa = dimension_constant(g, p.d) if kappa is None else kappa
    h = len(pool)
    if not 1 <= k <= h:
        raise ParameterError(f"k: must lie in 1..{h}")
    runs = []
    for j in range(int(math.floor(math.log2(h / k))) + 1):
        count = math.ceil(h / (2 ** j * k))
        base = stream(seed, name + ".base", j).choice(pool, size=count, replace=False)
        scale = g.n / count
        run, _ = irregular_run(g, p, seed, kappa, base=base, scale=scale, log_arg=h / k, tag=f".{j}")
        run.label = f"{name}[j={j}]"
        runs.append(run)
    out = execute_runs(runs, x, stream(seed, name + ".sample"), seed,
                       {"n": g.n, "k": k, "h": h, "d": p.d, "n1": p.n1, "beta": p.beta})
    out.extra["iterations"] = len(runs)
    return out


def search_irregular_k(g: Graph, x: np.ndarray, k: int, seed: int = 0, p: IrregularParams | None = None,
                       kappa: float | None = None) -> SearchOutcome:
    """Iterations ``j = 0..log2(n/k)`` over ``ceil(n / (2^j k))`` sampled level-0 vertices."""
    return _iterated(g, x, k, seed, p or IrregularParams(), np.arange(1, g.n + 1), kappa, "irregular_k")


def search_scattered(g: Graph, potential: Sequence[int], k: int, x: np.ndarray, seed: int = 0,
                     p: IrregularParams | None = None, kappa: float | None = None) -> SearchOutcome:
    """As :func:`search_irregular_k`, but level-0 vertices are drawn from the potentially marked set."""
    pool = np.asarray(sorted(set(int(v) for v in potential)), dtype=np.int64)
    x = np.asarray(x)
    outside = np.setdiff1d(np.flatnonzero(x) + 1, pool)
    if len(outside):
        raise ParameterError(f"marked vertices outside the potential set: {outside[:5].tolist()}")
    return _iterated(g, x, k, seed, p or IrregularParams(), pool, kappa, "scattered")
