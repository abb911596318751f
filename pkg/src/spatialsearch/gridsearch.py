"""Search on hypercube grids: the recursive amplified algorithm and its relatives.

Level ``r`` of the recursion searches a subcube of side ``side_r`` starting
and ending at its corner.  All subcubes of one level run the same program in
lockstep, so each level's operator list is built once per grid and reused for
every input.  The step lists are reusable because the oracle is applied
globally: it XORs the input into the answer bit wherever amplitude sits.
"""
from __future__ import annotations

import functools
import itertools
import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .amplify import amplified_ops, optimal_rounds, predicted_success
from .graph import Graph, GridCoords, dfs_segments, dfs_walk, make_grid
from .report import CostReport, SearchOutcome
from .rng import stream
from .simcore import (ORACLE, SWAP, Basis, BasisState, CostCounters, LocalStep, Op, QuantumState,
                      SimulationError, answer_probability, count_ops, diagonal_step, init_state, inverse_ops,
                      pair_step, rotation, run_ops)


class ParameterError(ValueError):
    pass


@dataclass(frozen=True)
class GridParams:
    """Recursion parameters.  ``l0 = 0`` selects the default base side (3 for d = 2, else 2)."""

    d: int
    beta: float = 0.8
    mu: float = 5 / 11
    l0: int = 0
    repetitions: int | None = None

    def __post_init__(self) -> None:
        if self.l0 == 0:
            object.__setattr__(self, "l0", 3 if self.d == 2 else 2)
        self.validate()

    def validate(self) -> None:
        if self.d < 2:
            raise ParameterError("d: grid search needs d >= 2 (use classical_scan on paths)")
        if self.repetitions is not None and self.repetitions < 1:
            raise ParameterError("repetitions: must be at least 1")
        if self.d == 2:
            if self.l0 < 3 or self.l0 % 2 == 0:
                raise ParameterError(f"l0: must be odd and >= 3 for d = 2, got {self.l0}")
            return
        if not 2 / 3 < self.beta < 1:
            raise ParameterError(f"beta: must lie in (2/3, 1), got {self.beta}")
        if not 1 / 3 < self.mu < 1 / 2:
            raise ParameterError(f"mu: must lie in (1/3, 1/2), got {self.mu}")
        if self.beta * self.mu <= 1 / 3:
            raise ParameterError(f"beta*mu: must exceed 1/3, got {self.beta * self.mu:.4f}")
        if self.l0 < 2:
            raise ParameterError(f"l0: must be >= 2, got {self.l0}")


@dataclass(frozen=True)
class Level:
    r: int
    side: int
    m: int
    ratio: int  # side_r / side_{r-1}; 1 at the base
    extra: bool = False

    def n(self, d: int) -> int:
        return self.side ** d


def level_sides(p: GridParams, upto: int) -> list[Level]:
    """Levels of the recursion table, stopping at the first side >= ``upto``."""
    if p.d == 2:
        out = [Level(0, 1, 0, 1)]
        while out[-1].side < upto:
            out.append(Level(len(out), out[-1].side * p.l0, (p.l0 - 1) // 2, p.l0))
        return out
    out = [Level(0, p.l0, 0, 1)]
    while out[-1].side < upto:
        prev = out[-1].side
        ratio = math.ceil(prev ** (1 / p.beta - 1) - 1e-9)
        target = ratio ** (p.d * p.mu)
        m = max(0, math.ceil((target - 1) / 2 - 1e-9))
        out.append(Level(len(out), prev * ratio, m, ratio))
    return out


def table_levels(p: GridParams, R: int) -> list[Level]:
    """Levels ``0..R`` of the recursion table."""
    upto = 1
    while True:
        t = level_sides(p, upto)
        if len(t) > R:
            return t[:R + 1]
        upto = t[-1].side + 1


def grid_side(n: int, d: int) -> int:
    side = round(n ** (1 / d))
    for cand in (side - 1, side, side + 1):
        if cand >= 1 and cand ** d == n:
            return cand
    raise ParameterError(f"n = {n} is not a perfect {d}-th power")


def predicted_fold(levels: Sequence[Level], d: int) -> list[float]:
    """Closed-form success of each level for a single marked vertex."""
    out = [1.0]
    for lv in levels[1:]:
        out.append(predicted_success(out[-1] / lv.ratio ** d, lv.m))
    return out


@dataclass(frozen=True)
class LevelPlan:
    d: int
    n: int
    levels: tuple[Level, ...]
    padded_side: int

    @property
    def side(self) -> int:
        return grid_side(self.n, self.d)

    @property
    def n_embedded(self) -> int:
        return self.padded_side ** self.d

    @property
    def top(self) -> Level:
        return self.levels[-1]

    @property
    def R(self) -> int:
        """Index of the highest table level (the extra padding level, if any, is not counted)."""
        return self.levels[-1].r - (1 if self.levels[-1].extra else 0)


def plan_levels(n: int, d: int, p: GridParams) -> LevelPlan:
    if p.d != d:
        raise ParameterError(f"d: parameters are for d = {p.d}, grid has d = {d}")
    side = grid_side(n, d)
    if d == 2:
        table = level_sides(p, side)
        return LevelPlan(d, n, tuple(table), table[-1].side)
    if n < p.l0 ** d:
        raise ParameterError(f"n = {n} is smaller than the base subcube {p.l0}^{d}")
    table = level_sides(p, side)
    if table[-1].side == side:
        return LevelPlan(d, n, tuple(table), side)
    base = table[:-1]
    top = base[-1]
    t = math.ceil(side / top.side)
    padded = top.side * t
    if padded ** d > 2 ** d * top.n(d) ** 1.5:
        raise ParameterError(f"padded size {padded ** d} is not within O(n_R^(3/2)) of n_R = {top.n(d)}")
    p_r = predicted_fold(base, d)[-1]
    extra = Level(top.r + 1, padded, optimal_rounds(p_r / t ** d), t, extra=True)
    return LevelPlan(d, n, tuple(base) + (extra,), padded)


class GridGeometry:
    """A grid together with the full ``(v, z, 0)`` basis, indexed as ``2(v-1) + z``."""

    def __init__(self, d: int, side: int):
        self.d, self.side = d, side
        self.graph = make_grid(d, side)
        self.coords = self.graph.grid.coord_array()
        self.strides = side ** np.arange(d)
        self.basis = Basis(self.graph)
        for v in range(1, self.graph.n + 1):
            self.basis.add((v, 0, 0))

    def vertex(self, coords: np.ndarray) -> np.ndarray:
        return 1 + np.asarray(coords, dtype=np.int64) @ self.strides

    def idx(self, coords: np.ndarray, z: int) -> np.ndarray:
        return 2 * (self.vertex(coords) - 1) + z

    def lattice(self, spacing: int, extent: int | None = None) -> np.ndarray:
        """All points whose coordinates are multiples of ``spacing`` in ``[0, extent)``."""
        extent = self.side if extent is None else extent
        axis = np.arange(0, extent, spacing)
        return np.array(list(itertools.product(axis, repeat=self.d)), dtype=np.int64).reshape(-1, self.d)[:, ::-1]


def _moves(geo: GridGeometry, src: np.ndarray, dst: np.ndarray, label: str) -> LocalStep:
    a = np.concatenate([geo.idx(src, 0), geo.idx(src, 1)])
    b = np.concatenate([geo.idx(dst, 0), geo.idx(dst, 1)])
    return pair_step(geo.basis, a, b, SWAP, label)


def build_spread_steps(geo: GridGeometry, corners: np.ndarray, axis: int, ratio: int,
                       sub_side: int) -> list[LocalStep]:
    """Spread amplitude from each corner over ``ratio`` sub-corners along ``axis``.

    Sub-corners on earlier axes are assumed already populated.  Each
    transition is one rotation that keeps the right share in place, followed
    by hops that carry the rest to the next sub-corner.
    """
    corners = np.asarray(corners, dtype=np.int64).reshape(-1, geo.d)
    steps: list[LocalStep] = []
    if ratio <= 1:
        return steps
    earlier = [range(0, ratio * sub_side, sub_side) if j < axis else range(1) for j in range(geo.d)]
    offs = np.array(list(itertools.product(*earlier)), dtype=np.int64)
    base = (corners[:, None, :] + offs[None, :, :]).reshape(-1, geo.d)
    e = np.zeros(geo.d, dtype=np.int64)
    e[axis] = 1
    for i in range(1, ratio):
        at = base + (i - 1) * sub_side * e
        a = np.concatenate([geo.idx(at, 0), geo.idx(at, 1)])
        b = np.concatenate([geo.idx(at + e, 0), geo.idx(at + e, 1)])
        steps.append(pair_step(geo.basis, a, b, rotation(1 / math.sqrt(ratio - i + 1)), f"spread{axis}.{i}"))
        for h in range(1, sub_side):
            steps.append(_moves(geo, at + h * e, at + (h + 1) * e, f"hop{axis}.{i}.{h}"))
    return steps


def snake_order(d: int, a: int) -> list[tuple[int, ...]]:
    """Boustrophedon ordering of ``[0, a)^d``; consecutive points are grid neighbours."""
    if d == 0:
        return [()]
    inner = snake_order(d - 1, a)
    out = []
    for k in range(a):
        out.extend(c + (k,) for c in (inner if k % 2 == 0 else inner[::-1]))
    return out


def _scan_ops(geo: GridGeometry, a0: int) -> list[Op]:
    base = geo.lattice(a0)
    order = [np.array(c, dtype=np.int64) for c in snake_order(geo.d, a0)]
    ops: list[Op] = [ORACLE]
    for prev, nxt in zip(order, order[1:]):
        ops.append(_moves(geo, base + prev, base + nxt, "scan"))
        ops.append(ORACLE)
    pos = order[-1].copy()
    for j in range(geo.d):
        while pos[j] > 0:
            nxt = pos.copy()
            nxt[j] -= 1
            ops.append(_moves(geo, base + pos, base + nxt, "return"))
            pos = nxt
    return ops


class GridProgram:
    """Operator lists ``A_r`` and ``U_r`` for every level on one grid."""

    def __init__(self, d: int, side: int, levels: Sequence[Level]):
        if side % levels[-1].side:
            raise ParameterError(f"top level side {levels[-1].side} does not divide grid side {side}")
        self.levels = tuple(levels)
        self.geo = geo = GridGeometry(d, side)
        odd = np.arange(1, len(geo.basis), 2)
        self.flip_w = diagonal_step(geo.basis, odd, -1, "W")
        self.A: list[list[Op]] = [_scan_ops(geo, levels[0].side)]
        self.U: list[list[Op] | None] = [None]
        self.spread: list[list[LocalStep]] = [[]]
        for lv in levels[1:]:
            corners = geo.lattice(lv.side)
            sub = lv.side // lv.ratio
            spread = [st for j in range(d) for st in build_spread_steps(geo, corners, j, lv.ratio, sub)]
            u = spread + self.A[-1]
            flip_s = diagonal_step(geo.basis, geo.idx(corners, 0), -1, f"S{lv.r}")
            self.spread.append(spread)
            self.U.append(u)
            self.A.append(amplified_ops(u, self.flip_w, flip_s, lv.m, inverse_ops(u)))

    @property
    def basis(self) -> Basis:
        return self.geo.basis

    @property
    def top(self) -> list[Op]:
        return self.A[-1]

    def level_costs(self) -> list[dict]:
        rows = []
        for r, lv in enumerate(self.levels):
            a = count_ops(self.A[r])
            row = {"r": r, "side": lv.side, "m": lv.m, "T_A": a.steps, "Q_A": a.queries, "extra": lv.extra}
            if r:
                row["T_U"] = count_ops(self.U[r]).steps
                row["spread"] = len(self.spread[r])
            rows.append(row)
        return rows

    def run_level(self, r: int, corner: int, x: np.ndarray, c: CostCounters | None = None) -> QuantumState:
        state = init_state(self.basis, BasisState(corner, 0, 0))
        run_ops(state, self.A[r], x, c)
        return state


@functools.lru_cache(maxsize=32)
def _program(d: int, side: int, levels: tuple[Level, ...]) -> GridProgram:
    return GridProgram(d, side, levels)


def grid_program(plan: LevelPlan) -> GridProgram:
    return _program(plan.d, plan.padded_side, plan.levels)


def run_AR(grid: Graph, r: int, corner: int, x: np.ndarray, p: GridParams,
           c: CostCounters | None = None) -> QuantumState:
    """Run level ``r`` from ``corner`` on every level-``r`` subcube of ``grid`` in lockstep."""
    side = _grid_side_of(grid)
    levels = tuple(level_sides(p, side)[: r + 1])
    if len(levels) <= r or side % levels[-1].side:
        raise ParameterError(f"level {r} subcubes do not tile a grid of side {side}")
    coords = np.array(grid.grid.coords(corner))
    if np.any(coords % levels[-1].side):
        raise ParameterError(f"vertex {corner} is not a level-{r} corner")
    return _program(grid.grid.d, side, levels).run_level(r, corner, np.asarray(x), c)


def _grid_side_of(grid: Graph) -> int:
    if grid.grid is None:
        raise ParameterError("graph carries no grid coordinates")
    return grid.grid.side


@dataclass
class SearchRun:
    """One executable program: reset to ``start``, run ``ops``, read the answer bit, up to ``repetitions`` times."""

    basis: Basis
    ops: list[Op]
    start: BasisState
    repetitions: int = 1
    input_map: np.ndarray | None = None  # physical vertex of each input position
    label: str = ""
    info: dict = field(default_factory=dict)

    def physical_input(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.int8)
        if self.input_map is None:
            return x
        out = np.zeros(self.basis.graph.n, dtype=np.int8)
        out[self.input_map - 1] = x
        return out

    def execute(self, x: np.ndarray, c: CostCounters | None = None, on_query=None) -> QuantumState:
        state = init_state(self.basis, self.start)
        run_ops(state, self.ops, self.physical_input(x) if not callable(x) else x, c, on_query)
        return state


def execute_runs(runs: Sequence[SearchRun], x: np.ndarray, rng: np.random.Generator, seed: int | None,
                 params: dict | None = None) -> SearchOutcome:
    """Run each program, then sample repetitions in order until the first 1 is read."""
    x = np.asarray(x)
    t0 = time.perf_counter()
    p_zero = 1.0
    cost = CostReport(seed=seed, params=params or {})
    per_run = []
    answer, runs_done, done = 0, 0, False
    for run in runs:
        c = CostCounters()
        state = run.execute(x, c)
        p = answer_probability(state)
        per_run.append(p)
        p_zero *= (1 - p) ** run.repetitions
        for _ in range(run.repetitions):
            if done:
                break
            runs_done += 1
            cost.steps += c.steps
            cost.queries += c.queries
            if rng.random() < p:
                answer, done = 1, True
    p_one = 1 - p_zero
    marked = bool(np.any(x))
    cost.success_probability = p_one if marked else 1 - p_one
    cost.wall_time = time.perf_counter() - t0
    return SearchOutcome(None, answer, cost.success_probability, cost,
                         per_run_probability=per_run[0] if len(per_run) == 1 else max(per_run, default=0.0),
                         answer_one_probability=p_one, runs=runs_done, extra={"per_program": per_run})


def default_repetitions(plan: LevelPlan, p: GridParams) -> int:
    if p.repetitions is not None:
        return p.repetitions
    if plan.d == 2:
        return 3 * math.ceil(math.sqrt(max(plan.R, 1)))
    return max(1, math.ceil(plan.n ** (0.5 - p.mu)))


def unique_run(grid: Graph, p: GridParams) -> tuple[SearchRun, LevelPlan, GridProgram]:
    plan = plan_levels(grid.n, grid.grid.d, p)
    prog = grid_program(plan)
    imap = None
    if plan.padded_side != grid.grid.side:
        imap = prog.geo.vertex(grid.grid.coord_array())
    reps = default_repetitions(plan, p)
    if p.repetitions is None and predicted_fold(plan.levels, plan.d)[-1] >= 2 / 3:
        reps = 1  # a single run already meets the target
    run = SearchRun(prog.basis, prog.top, BasisState(1, 0, 0), reps, imap, f"unique(side={plan.padded_side})")
    return run, plan, prog


def level_table(grid: Graph, x: np.ndarray, p: GridParams) -> list[dict]:
    """Per-level predicted and measured success, measured on the subcube holding the first marked vertex."""
    _, plan, prog = unique_run(grid, p)
    pred = predicted_fold(plan.levels, plan.d)
    costs = prog.level_costs()
    marks = np.flatnonzero(np.asarray(x))
    xp = np.asarray(x, dtype=np.int8)
    if plan.padded_side != grid.grid.side:
        xp = np.zeros(prog.geo.graph.n, dtype=np.int8)
        xp[prog.geo.vertex(grid.grid.coord_array()) - 1] = x
    rows = []
    for r, lv in enumerate(plan.levels):
        row = dict(costs[r], predicted=pred[r])
        if len(marks):
            target = prog.geo.coords[np.flatnonzero(xp)[0]]
            corner = prog.geo.vertex((target // lv.side) * lv.side)
            c = CostCounters()
            row["measured"] = answer_probability(prog.run_level(r, int(corner), xp, c))
            row["delta"] = abs(row["measured"] - pred[r])
            row["T_A_measured"] = c.steps
        rows.append(row)
    return rows


def search_unique(grid: Graph, x: np.ndarray, p: GridParams | None = None, seed: int = 0) -> SearchOutcome:
    p = p or GridParams(grid.grid.d)
    x = np.asarray(x, dtype=np.int8)
    if len(x) != grid.n:
        raise ParameterError(f"input has {len(x)} bits for {grid.n} vertices")
    run, plan, _ = unique_run(grid, p)
    out = execute_runs([run], x, stream(seed, "gridsearch.unique"), seed, _echo(p, grid))
    out.extra.update(R=plan.R, padded_side=plan.padded_side, repetitions=run.repetitions)
    return out


def _echo(p: GridParams, grid: Graph) -> dict:
    return {"d": p.d, "beta": p.beta, "mu": p.mu, "l0": p.l0, "repetitions": p.repetitions, "n": grid.n}


# ---------------------------------------------------------------------------
# Searching a sub-grid of box representatives


def _monotone_path(a: np.ndarray, b: np.ndarray) -> list[np.ndarray]:
    path = [a.copy()]
    cur = a.copy()
    for j in range(len(a)):
        step = 1 if b[j] > cur[j] else -1
        while cur[j] != b[j]:
            cur = cur.copy()
            cur[j] += step
            path.append(cur)
    return path


class SubgridEmbedding:
    """Realizes a program written for a virtual grid on chosen physical vertices.

    Virtual vertex ``u`` lives at physical vertex ``phi[u-1]``.  A two-vertex
    block is carried out along a monotone path between the two images inside
    the union of their boxes; amplitude in transit carries the virtual vertex
    it came from in the cluster register, which keeps transits of different
    blocks apart.  Swaps travel both ways at once (``L`` steps); any other
    block brings one side next to the other, acts, and returns
    (``2L - 1`` steps).
    """

    def __init__(self, phys: Graph, phi: np.ndarray):
        self.phys = phys
        self.phi = np.asarray(phi, dtype=np.int64)
        if len(np.unique(self.phi)) != len(self.phi) or self.phi.min() < 1 or self.phi.max() > phys.n:
            raise ParameterError("embedding must map virtual vertices to distinct physical vertices")
        self.basis = Basis(phys)
        self.coords = phys.grid.coord_array()
        self._cache: dict[int, tuple[LocalStep, list[LocalStep]]] = {}

    def _path(self, a: int, b: int) -> list[int]:
        ca, cb = self.coords[self.phi[a - 1] - 1], self.coords[self.phi[b - 1] - 1]
        return [self.phys.grid.index(tuple(int(t) for t in c)) for c in _monotone_path(ca, cb)]

    def expand(self, vstep: LocalStep) -> list[LocalStep]:
        hit = self._cache.get(id(vstep))
        if hit is not None and hit[0] is vstep:
            return hit[1]
        vkeys = vstep.basis.keys
        local, swaps, rots = [], [], []
        for keys, mat in vstep.blocks():
            verts = {k.vertex for k in keys}
            if len(verts) == 1:
                local.append(([(int(self.phi[k.vertex - 1]), k.work, 0) for k in keys], mat))
            elif len(keys) == 2:
                (swaps if np.allclose(mat, SWAP) else rots).append((keys[0], keys[1], mat))
            else:
                raise SimulationError(f"cannot embed a {len(keys)}-state two-vertex block")
        del vkeys
        sched: dict[int, list] = {0: list(local)}
        total = 1
        for ka, kb, _ in swaps:
            path = self._path(ka.vertex, kb.vertex)
            L = len(path) - 1
            A = [(path[0], ka.work, 0)] + [(path[i], ka.work, ka.vertex) for i in range(1, L)] + [(path[L], kb.work, 0)]
            if L == 1:
                sched[0].append((A, SWAP))
                continue
            B = ([(path[L], kb.work, 0)] + [(path[L - i], kb.work, kb.vertex) for i in range(1, L)]
                 + [(path[0], ka.work, 0)])
            for t in range(L):
                sched.setdefault(t, []).extend([([A[t], A[t + 1]], SWAP), ([B[t], B[t + 1]], SWAP)])
            total = max(total, L)
        if rots:
            paths = [self._path(ka.vertex, kb.vertex) for ka, kb, _ in rots]
            lmax = max(len(pth) - 1 for pth in paths)
            mid = lmax - 1
            for (ka, kb, mat), path in zip(rots, paths):
                L = len(path) - 1
                B = [(path[L], kb.work, 0)] + [(path[L - i], kb.work, kb.vertex) for i in range(1, L)]
                off = lmax - L
                for t in range(L - 1):
                    sched.setdefault(off + t, []).append(([B[t], B[t + 1]], SWAP))
                    sched.setdefault(mid + L - 1 - t, []).append(([B[t + 1], B[t]], SWAP))
                sched.setdefault(mid, []).append(([(path[0], ka.work, 0), B[L - 1]], mat))
            total = max(total, 2 * lmax - 1)
        out = [LocalStep.from_blocks(self.basis, sched.get(t, []), f"{vstep.label}@{t}") for t in range(total)]
        self._cache[id(vstep)] = (vstep, out)
        return out

    def embed(self, ops: Sequence[Op]) -> list[Op]:
        out: list[Op] = []
        for op in ops:
            if op is ORACLE:
                out.append(ORACLE)
            else:
                out.extend(self.expand(op))
        return out


def walk_ops(basis: Basis, path: Sequence[int], label: str = "walk") -> list[LocalStep]:
    """Classical moves along ``path`` for both answer-bit values."""
    return [LocalStep.from_blocks(basis, [([(u, 0, 0), (v, 0, 0)], SWAP), ([(u, 1, 0), (v, 1, 0)], SWAP)], label)
            for u, v in zip(path, path[1:])]


def _exact_virtual(d: int, S: int, p: GridParams) -> bool:
    if S == 1:
        return True
    try:
        return plan_levels(S ** d, d, p).padded_side == S
    except ParameterError:
        return False


def valid_box_sides(grid: Graph, p: GridParams) -> list[int]:
    """Box sides ``s`` dividing the grid side whose sub-grid needs no padding, ascending."""
    side, d = grid.grid.side, grid.grid.d
    return [s for s in range(1, side + 1) if side % s == 0 and _exact_virtual(d, side // s, p)]


def choose_box_side(grid: Graph, k: int, p: GridParams) -> int:
    d = grid.grid.d
    sides = valid_box_sides(grid, p)
    inside = [s for s in sides if s ** d / 3 < k < 2 * s ** d / 3]
    if inside:
        return inside[0]
    return min(sides, key=lambda s: abs(math.log(s ** d / (1.5 * max(k, 1)))))


def box_run(grid: Graph, p: GridParams, box_side: int, rng: np.random.Generator) -> SearchRun:
    """Pick one vertex per box and build the search over the picked vertices."""
    d, side = grid.grid.d, grid.grid.side
    if side % box_side:
        raise ParameterError(f"box side {box_side} does not divide grid side {side}")
    S = side // box_side
    vcoords = GridCoords(d, S).coord_array()
    picks = vcoords * box_side + rng.integers(0, box_side, size=vcoords.shape)
    phi = 1 + picks @ (side ** np.arange(d))
    origin = np.zeros(d, dtype=np.int64)
    to_first = [grid.grid.index(tuple(int(t) for t in c)) for c in _monotone_path(origin, picks[0])]
    info = {"box_side": box_side, "gamma": box_side ** d, "picked": phi.tolist()}
    if S == 1:
        basis = Basis(grid)
        ops = walk_ops(basis, to_first) + [ORACLE]
        return SearchRun(basis, ops, BasisState(1, 0, 0), 1, None, f"sample(gamma={box_side ** d})", info)
    vplan = plan_levels(S ** d, d, p)
    vprog = grid_program(vplan)
    emb = SubgridEmbedding(grid, phi)
    ops = walk_ops(emb.basis, to_first) + emb.embed(vprog.top)
    info["virtual_R"] = vplan.R
    return SearchRun(emb.basis, ops, BasisState(1, 0, 0), default_repetitions(vplan, p), None,
                     f"boxes(gamma={box_side ** d})", info)


def search_k(grid: Graph, x: np.ndarray, k: int, seed: int = 0, p: GridParams | None = None,
             box_side: int | None = None) -> SearchOutcome:
    p = p or GridParams(grid.grid.d)
    s = box_side or choose_box_side(grid, k, p)
    run = box_run(grid, p, s, stream(seed, "gridsearch.k", s))
    out = execute_runs([run], x, stream(seed, "gridsearch.k.sample", s), seed, dict(_echo(p, grid), k=k))
    out.extra.update(run.info)
    return out


def unknown_runs(grid: Graph, seed: int, p: GridParams) -> list[SearchRun]:
    """Box sizes from single vertices up to the whole grid, then one random vertex check."""
    runs = [box_run(grid, p, s, stream(seed, "gridsearch.unknown", j)) for j, s in enumerate(valid_box_sides(grid, p))]
    rng = stream(seed, "gridsearch.unknown.final")
    target = int(rng.integers(1, grid.n + 1))
    origin = np.zeros(grid.grid.d, dtype=np.int64)
    path = [grid.grid.index(tuple(int(t) for t in c))
            for c in _monotone_path(origin, np.array(grid.grid.coords(target)))]
    basis = Basis(grid)
    runs.append(SearchRun(basis, walk_ops(basis, path) + [ORACLE], BasisState(1, 0, 0), 1, None,
                          "final-check", {"target": target}))
    return runs


def search_unknown(grid: Graph, x: np.ndarray, seed: int = 0, p: GridParams | None = None) -> SearchOutcome:
    p = p or GridParams(grid.grid.d)
    runs = unknown_runs(grid, seed, p)
    out = execute_runs(runs, x, stream(seed, "gridsearch.unknown.sample"), seed, _echo(p, grid))
    out.extra["programs"] = [r.label for r in runs]
    return out


def single_pick_frequency(gamma: int, k: int, trials: int, seed: int = 0, boxes: int = 8) -> tuple[float, float]:
    """Monte-Carlo frequency that exactly one marked vertex is among one uniform pick per box.

    ``k`` marked vertices are placed uniformly at random among ``boxes * gamma``
    vertices in each trial.  Returns the frequency and the binomial standard error.
    """
    if k > boxes * gamma:
        raise ParameterError("more marked vertices than vertices")
    rng = stream(seed, "single_pick")
    n = boxes * gamma
    keys = rng.random((trials, n))
    marked = np.argsort(keys, axis=1)[:, :k]
    box_counts = np.zeros((trials, boxes), dtype=np.int64)
    np.add.at(box_counts, (np.repeat(np.arange(trials), k), (marked // gamma).ravel()), 1)
    picked = rng.integers(0, gamma, size=(trials, boxes)) < box_counts
    hits = picked.sum(axis=1) == 1
    f = float(hits.mean())
    return f, math.sqrt(max(f * (1 - f), 1e-300) / trials)


def single_pick_bound(gamma: int, k: int) -> float:
    return k / gamma - (k / gamma) ** 2


# ---------------------------------------------------------------------------
# Arbitrary graphs: diameter-based search and the classical baseline


def _prep_unitary(q: int) -> np.ndarray:
    """Real orthogonal matrix whose first column is uniform (a Householder reflection)."""
    u = np.full(q, 1 / math.sqrt(q))
    e = np.zeros(q)
    e[0] = 1.0
    v = e - u
    nv = v @ v
    if nv < 1e-30:
        return np.eye(q, dtype=complex)
    return (np.eye(q) - 2 * np.outer(v, v) / nv).astype(complex)


@dataclass
class DiameterProgram:
    basis: Basis
    U: list[Op]
    ops: list[Op]
    q: int
    m: int
    segment_length: int
    stride: int = 1


def diameter_program(g: Graph, delta: int | None = None, root: int = 1, m: int | None = None) -> DiameterProgram:
    """Grover search over DFS segments.

    Work register: bit 0 answer, bit 1 accumulator, higher bits segment index.
    Each time step is one controlled move followed by ``O``, a CNOT from the
    answer bit into the accumulator at the segment's discovery points, and
    ``O`` again, so only the accumulator remembers hits.
    """
    delta = delta or max(1, g.diameter)
    sched = dfs_segments(g, delta, root)
    q = len(sched.segments)
    walks = [s.walk() for s in sched.segments]
    L = max(len(w) - 1 for w in walks)
    walks = [w + [root] * (L + 1 - len(w)) for w in walks]
    basis = Basis(g)
    sectors = [(a, acc) for a in (0, 1) for acc in (0, 1)]

    def key(v: int, a: int, acc: int, i: int) -> tuple[int, int, int]:
        return (v, a + 2 * acc + 4 * i, 0)

    ops: list[Op] = []
    if q > 1:
        F = _prep_unitary(q)
        ops.append(LocalStep.from_blocks(basis, [([key(root, a, acc, i) for i in range(q)], F)
                                                 for a, acc in sectors], "prepare"))
    first_hit: dict[tuple[int, int], int] = {}
    for i, (w, seg) in enumerate(zip(walks, sched.segments)):
        for t, v in enumerate(w):
            if v in seg.discovered:
                first_hit.setdefault((i, v), t)
    hits_at: dict[int, list[tuple[int, int]]] = {}
    for (i, v), t in first_hit.items():
        hits_at.setdefault(t, []).append((i, v))
    for t in range(L + 1):
        if t:
            blocks = [([key(w[t - 1], a, acc, i), key(w[t], a, acc, i)], SWAP)
                      for i, w in enumerate(walks) if w[t] != w[t - 1] for a, acc in sectors]
            ops.append(LocalStep.from_blocks(basis, blocks, f"move{t}"))
        ops.append(ORACLE)
        blocks = [([key(v, 1, 0, i), key(v, 1, 1, i)], SWAP) for i, v in hits_at.get(t, [])]
        ops.append(LocalStep.from_blocks(basis, blocks, f"record{t}"))
        ops.append(ORACLE)
    ops.append(LocalStep.from_blocks(basis, [([key(root, 1, 0, i), key(root, 0, 1, i)], SWAP) for i in range(q)],
                                     "swap-acc"))
    # ensure every reachable key exists before the witness flip is built
    for v in range(1, g.n + 1):
        for i in range(q):
            for a, acc in sectors:
                basis.add(key(v, a, acc, i))
    u = ops
    if m is None:
        m = optimal_rounds(1 / q)
    w_flip = diagonal_step(basis, np.flatnonzero(basis.arrays[1] & 1), -1, "W")
    s_flip = diagonal_step(basis, [basis.lookup((root, 0, 0))], -1, "S")
    return DiameterProgram(basis, u, amplified_ops(u, w_flip, s_flip, m), q, m, L)


def search_by_diameter(g: Graph, x: np.ndarray, seed: int = 0, delta: int | None = None,
                       repetitions: int | None = None) -> SearchOutcome:
    prog = diameter_program(g, delta)
    if repetitions is None:
        p_hat = predicted_success(1 / prog.q, prog.m)
        repetitions = 1 if p_hat >= 2 / 3 else math.ceil(math.log(1 / 3) / math.log(1 - p_hat))
    run = SearchRun(prog.basis, prog.ops, BasisState(1, 0, 0), repetitions, None, "diameter",
                    {"segments": prog.q, "m": prog.m, "segment_length": prog.segment_length})
    out = execute_runs([run], x, stream(seed, "gridsearch.diameter"), seed, {"n": g.n, "delta": delta})
    out.extra.update(run.info)
    return out


def classical_scan(g: Graph, x: np.ndarray, root: int = 1) -> SearchOutcome:
    """Walk the depth-first traversal, querying each newly reached vertex; stop at the first hit."""
    x = np.asarray(x)
    walk = dfs_walk(g, root)
    seen: set[int] = set()
    cost = CostReport()
    first: dict[int, int] = {}
    for i, v in enumerate(walk):
        first.setdefault(v, i)
    last_new = max(first.values())
    for i, v in enumerate(walk[: last_new + 1]):
        if i:
            cost.steps += 1
        if v in seen:
            continue
        seen.add(v)
        cost.queries += 1
        if x[v - 1]:
            cost.success_probability = 1.0
            return SearchOutcome(v, 1, 1.0, cost, 1.0, 1.0)
    cost.success_probability = 1.0
    return SearchOutcome(None, 0, 1.0, cost, 1.0, 0.0)
