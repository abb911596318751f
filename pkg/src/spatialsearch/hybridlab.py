"""Hybrid-argument instrumentation: query magnitudes, hybrid inputs and the divergence chain.

A run on the all-zero input ``X_0`` is traced to get the query magnitude
``Gamma_j(t)``, the probability mass inside region ``j`` right after query
``t``.  Hybrid ``X_q`` answers queries ``1 .. T - q*stride`` from ``X_0`` and
the rest from ``Y``; the lab reruns every hybrid and measures the squared
distance between neighbouring final states.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .graph import Graph, GridCoords, make_grid, make_starfish, starfish_legs
from .gridsearch import GridParams, SearchRun, box_run, choose_box_side, diameter_program
from .rng import stream
from .simcore import (ORACLE, BasisState, QuantumState, answer_probability, count_ops, init_state, l2_distance_sq,
                      run_ops)

SLACK = 1e-9


@dataclass
class RegionPartition:
    """Disjoint named vertex sets; vertices outside every region map to ``-1``."""

    n: int
    names: tuple[str, ...]
    members: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        if len(self.names) != len(self.members):
            raise ValueError("one name per region")
        self.members = tuple(np.asarray(sorted(set(int(v) for v in m)), dtype=np.int64) for m in self.members)
        membership = np.full(self.n, -1, dtype=np.int64)
        for j, m in enumerate(self.members):
            if m.size and (m.min() < 1 or m.max() > self.n):
                raise ValueError(f"region {self.names[j]} has vertices outside 1..{self.n}")
            if np.any(membership[m - 1] >= 0):
                raise ValueError(f"region {self.names[j]} overlaps an earlier region")
            membership[m - 1] = j
        self.membership = membership

    @classmethod
    def from_sets(cls, n: int, regions: Mapping[str, Sequence[int]]) -> "RegionPartition":
        return cls(n, tuple(regions), tuple(np.asarray(list(v), dtype=np.int64) for v in regions.values()))

    def __len__(self) -> int:
        return len(self.names)

    def masses(self, s: QuantumState) -> np.ndarray:
        """Probability mass of ``s`` inside each region."""
        p = s.probabilities()
        owner = self.membership[s.basis.arrays[0] - 1]
        inside = owner >= 0
        return np.bincount(owner[inside], weights=p[inside], minlength=len(self))


def _query_count(run: SearchRun) -> int:
    return count_ops(run.ops).queries


def trace_query_magnitudes(run: SearchRun, x0: np.ndarray, regions: RegionPartition,
                           keep_snapshots: bool = False) -> tuple[np.ndarray, list[dict]]:
    """Gamma table of shape ``(regions, T + 1)``; column ``t`` is taken right after query ``t``.

    Column 0 is the state before the first query.  Snapshots, when kept, are
    sparse ``{basis key: amplitude}`` maps.
    """
    T = _query_count(run)
    gamma = np.zeros((len(regions), T + 1))
    snaps: list[dict] = []
    state = init_state(run.basis, run.start)
    ops = list(run.ops)
    # mass before the first query: run the prefix up to it
    first = next((i for i, op in enumerate(ops) if op is ORACLE), len(ops))
    run_ops(state, ops[:first], run.physical_input(x0))
    gamma[:, 0] = regions.masses(state)
    if keep_snapshots:
        snaps.append(state.amplitudes())

    def record(t: int, s: QuantumState) -> None:
        gamma[:, t] = regions.masses(s)
        if keep_snapshots:
            snaps.append(s.amplitudes())

    run_ops(state, ops[first:], run.physical_input(x0), None, record)
    return gamma, snaps


@dataclass
class HybridTrace:
    regions: RegionPartition
    j_star: int
    stride: int
    T: int
    gamma: np.ndarray
    D: list[float]  # D[q-1] = D(q-1, q)
    D0w: float
    switch_points: list[int]  # T - q*stride, clipped at 0, for q = 1..w
    monotone: bool = True
    label: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def w(self) -> int:
        return len(self.D)

    def gamma_at_switches(self) -> np.ndarray:
        return self.gamma[self.j_star, self.switch_points]

    def rows(self) -> list[dict]:
        g = self.gamma_at_switches()
        name = self.regions.names[self.j_star]
        return [{"q": q + 1, "region": name, "Gamma": float(g[q]), "D": self.D[q],
                 "bound": 4 * float(g[q]), "slack": 4 * float(g[q]) - self.D[q]} for q in range(self.w)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.DictWriter(buf, ["q", "region", "Gamma", "D", "bound", "slack"], lineterminator="\n")
        wr.writeheader()
        wr.writerows(self.rows())
        return buf.getvalue()


def _hybrid_input(x0: np.ndarray, y: np.ndarray, cut: int):
    return lambda t: x0 if t <= cut else y


def _run_with_snapshots(run: SearchRun, x, T: int) -> tuple[QuantumState, list[np.ndarray]]:
    snaps: list[np.ndarray] = [np.zeros(0)] * (T + 1)
    state = init_state(run.basis, run.start)

    def record(t: int, s: QuantumState) -> None:
        s._sync()
        snaps[t] = s.amps.copy()

    run_ops(state, run.ops, x, None, record)
    return state, snaps


def hybrid_divergences(run: SearchRun, x0: np.ndarray, y: np.ndarray, stride: int,
                       regions: RegionPartition | None = None, j_star: int = 0,
                       gamma: np.ndarray | None = None) -> HybridTrace:
    """Rerun every hybrid ``X_q`` and record ``D(q-1, q)`` between neighbouring final states.

    Also checks that two neighbouring hybrids stay at a constant distance after
    the last query on which they differ.
    """
    if stride < 1:
        raise ValueError("stride must be at least 1")
    T = _query_count(run)
    px0, py = run.physical_input(x0), run.physical_input(y)
    if regions is None:
        regions = RegionPartition(run.basis.graph.n, ("all",), (np.arange(1, run.basis.graph.n + 1),))
        j_star = 0
    if gamma is None:
        gamma, _ = trace_query_magnitudes(run, x0, regions)
    w = max(1, math.ceil(T / stride))
    cuts = [max(0, T - q * stride) for q in range(w + 1)]
    D: list[float] = []
    monotone = True
    prev_state, prev_snaps = _run_with_snapshots(run, _hybrid_input(px0, py, cuts[0]), T)
    first_state = prev_state
    for q in range(1, w + 1):
        state, snaps = _run_with_snapshots(run, _hybrid_input(px0, py, cuts[q]), T)
        dq = l2_distance_sq(prev_state, state)
        D.append(dq)
        # after the last query where X_{q-1} and X_q differ, unitarity keeps the distance fixed
        for t in range(cuts[q - 1], T + 1):
            if t == 0:
                continue
            a, b = prev_snaps[t], snaps[t]
            n = min(len(a), len(b))
            diff = float(np.sum(np.abs(a[:n] - b[:n]) ** 2) + np.sum(np.abs(a[n:]) ** 2) + np.sum(np.abs(b[n:]) ** 2))
            if abs(diff - dq) > 1e-9:
                monotone = False
                break
        prev_state, prev_snaps = state, snaps
    D0w = l2_distance_sq(first_state, prev_state)
    return HybridTrace(regions, j_star, stride, T, gamma, D, D0w, cuts[1:], monotone)


@dataclass
class ChainReport:
    sqrt_D0w: float
    sum_sqrt_D: float
    two_sum_sqrt_gamma: float
    cauchy_schwarz: float
    links: list[bool]
    per_query: list[bool]
    tightness: list[float]
    implied_T_bound: float
    T: int

    @property
    def holds(self) -> bool:
        return all(self.links) and all(self.per_query)

    def to_dict(self) -> dict:
        return {"sqrt_D0w": self.sqrt_D0w, "sum_sqrt_D": self.sum_sqrt_D,
                "two_sum_sqrt_gamma": self.two_sum_sqrt_gamma, "cauchy_schwarz": self.cauchy_schwarz,
                "links": self.links, "per_query": all(self.per_query), "tightness": self.tightness,
                "implied_T_bound": self.implied_T_bound, "T": self.T, "holds": self.holds}


def _ratio(a: float, b: float) -> float:
    return a / b if b > 0 else (1.0 if a <= 0 else math.inf)


def verify_chain(trace: HybridTrace) -> ChainReport:
    """Check ``sqrt D(0,w) <= sum sqrt D <= 2 sum sqrt Gamma <= 2 sqrt(w sum Gamma)``.

    The implied bound on ``T`` uses ``sum Gamma <= w / M`` for the best region
    among ``M``: a correct algorithm needs ``T >= stride * sqrt(M * D(0,w)) / 2``.
    """
    g = np.clip(trace.gamma_at_switches(), 0.0, None)
    D = np.clip(np.asarray(trace.D, dtype=float), 0.0, None)
    a = math.sqrt(max(trace.D0w, 0.0))
    b = float(np.sum(np.sqrt(D)))
    c = 2 * float(np.sum(np.sqrt(g)))
    e = 2 * math.sqrt(trace.w * float(np.sum(g)))
    links = [a <= b + SLACK, b <= c + SLACK, c <= e + SLACK]
    per_query = [bool(dq <= 4 * gq + SLACK) for dq, gq in zip(D, g)]
    M = len(trace.regions)
    return ChainReport(a, b, c, e, links, per_query, [_ratio(a, b), _ratio(b, c), _ratio(c, e)],
                       trace.stride * math.sqrt(M * trace.D0w) / 2, trace.T)


# ---------------------------------------------------------------------------
# Layouts


@dataclass
class Layout:
    graph: Graph
    regions: RegionPartition
    targets: list[list[int]]  # vertices marked by Y when region j is chosen
    distance: int  # travel distance protecting the targets; stride = max(1, floor(c * distance))
    name: str


def starfish_layout(legs: int = 6, leg_len: int = 2) -> Layout:
    g = make_starfish(legs, leg_len)
    L = starfish_legs(legs, leg_len)
    regions = RegionPartition.from_sets(g.n, {f"L{j + 1}": leg for j, leg in enumerate(L)})
    return Layout(g, regions, [[leg[-1]] for leg in L], 2 * leg_len, f"starfish({legs},{leg_len})")


def grid_layout(side: int = 4, k: int = 8, d: int = 3) -> Layout:
    """Regularly spaced subcubes of ``k`` vertices, each padded by one subcube on every side.

    Subcubes in the chosen set sit ``3`` subcube widths apart, so padded regions
    are disjoint; when fewer than one fits, a single corner subcube is used.
    """
    a = round(k ** (1 / d))
    if a ** d != k or side % a:
        raise ValueError("k must be a perfect d-th power whose root divides the side")
    g = make_grid(d, side)
    gc = GridCoords(d, side)
    coords = gc.coord_array()
    blocks = side // a
    starts = list(range(0, blocks, 3)) or [0]
    regions: dict[str, list[int]] = {}
    targets: list[list[int]] = []
    for corner in np.array(np.meshgrid(*[starts] * d, indexing="ij")).reshape(d, -1).T:
        lo = corner * a
        inner = np.all((coords >= lo) & (coords < lo + a), axis=1)
        padded = np.all((coords >= lo - a) & (coords < lo + 2 * a), axis=1)
        regions["C" + "".join(str(int(t)) for t in corner)] = (np.flatnonzero(padded) + 1).tolist()
        targets.append((np.flatnonzero(inner) + 1).tolist())
    return Layout(g, RegionPartition.from_sets(g.n, regions), targets, a, f"grid(d={d},side={side},k={k})")


def diameter_run(g: Graph) -> SearchRun:
    prog = diameter_program(g)
    return SearchRun(prog.basis, prog.ops, BasisState(1, 0, 0), 1, None, "diameter")


def grid_search_run(layout: Layout, k: int, seed: int = 0) -> SearchRun:
    g = layout.graph
    p = GridParams(g.grid.d)
    s = choose_box_side(g, k, p)
    return box_run(g, p, s, stream(seed, "hybridlab.grid", s))


@dataclass
class LabResult:
    layout: Layout
    trace: HybridTrace
    report: ChainReport
    success_x0: float
    success_y: float

    def summary(self) -> dict:
        t = self.trace
        return {"layout": self.layout.name, "T": t.T, "stride": t.stride, "w": t.w,
                "region": t.regions.names[t.j_star], "D0w": t.D0w, "monotone": t.monotone,
                "success_x0": self.success_x0, "success_y": self.success_y, **self.report.to_dict()}


def run_lab(layout: Layout, run: SearchRun, c: float = 0.25) -> LabResult:
    """Trace ``X_0``, pick the region with the least magnitude at the switch points, mark it and run hybrids."""
    n = layout.graph.n
    x0 = np.zeros(n, dtype=np.int8)
    gamma, _ = trace_query_magnitudes(run, x0, layout.regions)
    T = gamma.shape[1] - 1
    stride = max(1, math.floor(c * layout.distance))
    w = max(1, math.ceil(T / stride))
    cols = [max(0, T - q * stride) for q in range(1, w + 1)]
    j_star = int(np.argmin(gamma[:, cols].sum(axis=1)))
    y = x0.copy()
    y[np.asarray(layout.targets[j_star]) - 1] = 1
    trace = hybrid_divergences(run, x0, y, stride, layout.regions, j_star, gamma)
    trace.label = layout.name
    p0 = 1 - answer_probability(run.execute(x0))
    p1 = answer_probability(run.execute(y))
    return LabResult(layout, trace, verify_chain(trace), p0, p1)


def starfish_experiment(legs: int = 6, leg_len: int = 2, c: float = 0.25) -> LabResult:
    lay = starfish_layout(legs, leg_len)
    return run_lab(lay, diameter_run(lay.graph), c)


def grid_experiment(side: int = 4, k: int = 8, d: int = 3, c: float = 0.25, seed: int = 0) -> LabResult:
    lay = grid_layout(side, k, d)
    return run_lab(lay, grid_search_run(lay, k, seed), c)
