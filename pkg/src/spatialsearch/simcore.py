"""Sparse state-vector simulation of a robot walking on a graph.

A basis state is ``(vertex, work, cluster)``.  Bit 0 of ``work`` is the answer
bit that the oracle writes to; higher bits are free for auxiliary registers,
and ``cluster`` is an optional label register.

Amplitudes live in a numpy vector indexed through a growable :class:`Basis`;
only basis states that some step or oracle can reach are ever enumerated, so
the vector stays proportional to the support actually touched.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, NamedTuple, Sequence, Union

import numpy as np

from .graph import Graph

PRUNE = 1e-14
NORM_TOL = 1e-9
UNITARY_TOL = 1e-12


class SimulationError(RuntimeError):
    pass


class LocalityViolation(SimulationError):
    pass


class NonUnitaryBlock(SimulationError):
    pass


class DimensionMismatch(SimulationError):
    pass


class OverlappingBlocks(SimulationError):
    pass


class NormDrift(SimulationError):
    pass


class BasisState(NamedTuple):
    vertex: int
    work: int = 0
    cluster: int = 0


class Basis:
    """Enumeration of basis states for one graph.

    Adding a state also adds its oracle partner (answer bit flipped), so the
    oracle can always be applied as a permutation of existing indices.
    """

    def __init__(self, graph: Graph):
        self.graph = graph
        self.keys: list[BasisState] = []
        self.index: dict[BasisState, int] = {}
        self._arrays: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None
        self._oracle_cache: dict[bytes, tuple[int, np.ndarray, np.ndarray]] = {}

    def __len__(self) -> int:
        return len(self.keys)

    def _insert(self, key: BasisState) -> int:
        i = self.index.get(key)
        if i is None:
            if not 1 <= key.vertex <= self.graph.n:
                raise DimensionMismatch(f"vertex {key.vertex} outside 1..{self.graph.n}")
            if key.work < 0:
                raise DimensionMismatch("work register must be non-negative")
            i = self.index[key] = len(self.keys)
            self.keys.append(key)
            self._arrays = None
        return i

    def add(self, key: BasisState | tuple) -> int:
        key = BasisState(*key)
        i = self._insert(key)
        self._insert(BasisState(key.vertex, key.work ^ 1, key.cluster))
        return i

    def add_many(self, vertices: Iterable[int], works: Iterable[int], clusters: Iterable[int]) -> np.ndarray:
        return np.fromiter((self.add(BasisState(int(v), int(w), int(c)))
                            for v, w, c in zip(vertices, works, clusters)), dtype=np.int64)

    def lookup(self, key: BasisState | tuple) -> int:
        return self.index[BasisState(*key)]

    @property
    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(vertex, work, cluster)`` arrays aligned with the indices."""
        if self._arrays is None:
            a = np.array(self.keys, dtype=np.int64).reshape(-1, 3)
            self._arrays = (a[:, 0], a[:, 1], a[:, 2])
        return self._arrays

    def oracle_pairs(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Index pairs swapped by the oracle for input ``x`` (answer bit 0 <-> 1 at marked vertices)."""
        tag = np.packbits(x.astype(bool)).tobytes() + len(x).to_bytes(8, "little")
        hit = self._oracle_cache.get(tag)
        if hit is not None and hit[0] == len(self.keys):
            return hit[1], hit[2]
        v, w, c = self.arrays
        lo = np.flatnonzero((x[v - 1] != 0) & ((w & 1) == 0))
        hi = np.fromiter((self.index[BasisState(int(v[i]), int(w[i]) | 1, int(c[i]))] for i in lo),
                         dtype=np.int64, count=len(lo))
        if len(self._oracle_cache) > 64:
            self._oracle_cache.clear()
        self._oracle_cache[tag] = (len(self.keys), lo, hi)
        return lo, hi


class QuantumState:
    """Amplitudes over a :class:`Basis`; behaves like a sparse map for inspection."""

    def __init__(self, basis: Basis, amps: np.ndarray | None = None):
        self.basis = basis
        self.amps = np.zeros(len(basis), dtype=complex) if amps is None else amps
        self.drift = 0.0

    def _sync(self) -> None:
        extra = len(self.basis) - len(self.amps)
        if extra > 0:
            self.amps = np.concatenate([self.amps, np.zeros(extra, dtype=complex)])

    def copy(self) -> "QuantumState":
        self._sync()
        out = QuantumState(self.basis, self.amps.copy())
        out.drift = self.drift
        return out

    def amplitudes(self) -> dict[BasisState, complex]:
        self._sync()
        nz = np.flatnonzero(self.amps)
        return {self.basis.keys[i]: complex(self.amps[i]) for i in nz}

    def __getitem__(self, key: BasisState | tuple) -> complex:
        i = self.basis.index.get(BasisState(*key))
        return 0j if i is None or i >= len(self.amps) else complex(self.amps[i])

    def norm_sq(self) -> float:
        return float(np.vdot(self.amps, self.amps).real)

    def support_size(self) -> int:
        return int(np.count_nonzero(self.amps))

    def probabilities(self) -> np.ndarray:
        self._sync()
        return np.abs(self.amps) ** 2


@dataclass
class CostCounters:
    steps: int = 0
    queries: int = 0

    def merge(self, other: "CostCounters", times: int = 1) -> None:
        if times < 0:
            raise ValueError("counters are monotone")
        self.steps += other.steps * times
        self.queries += other.queries * times

    def snapshot(self) -> tuple[int, int]:
        return self.steps, self.queries


@dataclass
class BlockGroup:
    """Blocks of equal size ``k``: ``idx`` has shape ``(B, k)``; ``mats`` is ``(k, k)`` shared or ``(B, k, k)``."""

    idx: np.ndarray
    mats: np.ndarray

    @property
    def shared(self) -> bool:
        return self.mats.ndim == 2

    def matrices(self) -> np.ndarray:
        return np.broadcast_to(self.mats, (len(self.idx),) + self.mats.shape[-2:]) if self.shared else self.mats


class LocalStep:
    """One unit-time C-local operation, validated against the graph when built."""

    def __init__(self, basis: Basis, groups: Sequence[BlockGroup] = (), label: str = "", *, validate: bool = True):
        self.basis = basis
        self.groups = [g for g in groups if len(g.idx)]
        self.label = label
        self._inverse: LocalStep | None = None
        if validate:
            validate_step(self)

    @classmethod
    def identity(cls, basis: Basis, label: str = "idle") -> "LocalStep":
        return cls(basis, (), label)

    @classmethod
    def from_blocks(cls, basis: Basis, blocks: Iterable[tuple[Sequence[BasisState | tuple], np.ndarray]],
                    label: str = "") -> "LocalStep":
        by_size: dict[int, tuple[list, list]] = {}
        for keys, mat in blocks:
            mat = np.asarray(mat, dtype=complex)
            if mat.shape != (len(keys), len(keys)):
                raise DimensionMismatch(f"block on {len(keys)} states has matrix shape {mat.shape}")
            idx = [basis.add(k) for k in keys]
            bucket = by_size.setdefault(len(keys), ([], []))
            bucket[0].append(idx)
            bucket[1].append(mat)
        groups = [BlockGroup(np.array(i, dtype=np.int64), np.array(m)) for i, m in by_size.values()]
        return cls(basis, groups, label)

    @property
    def block_count(self) -> int:
        return sum(len(g.idx) for g in self.groups)

    def inverse(self) -> "LocalStep":
        if self._inverse is None:
            inv = LocalStep(self.basis, [BlockGroup(g.idx, np.conj(np.swapaxes(g.mats, -1, -2)))
                                         for g in self.groups], f"inv({self.label})", validate=False)
            inv._inverse = self
            self._inverse = inv
        return self._inverse

    def blocks(self) -> list[tuple[list[BasisState], np.ndarray]]:
        keys = self.basis.keys
        return [([keys[i] for i in row], m) for g in self.groups for row, m in zip(g.idx, g.matrices())]

    def is_classical(self) -> bool:
        """True when every block is a permutation matrix."""
        for g in self.groups:
            m = np.abs(g.mats)
            if not (np.allclose(m.sum(axis=-1), 1) and np.all(np.isclose(m, 0) | np.isclose(m, 1))):
                return False
        return True


def validate_step(step: LocalStep, graph: Graph | None = None) -> None:
    """Raise unless ``step`` is a valid C-local operation on ``graph`` (default: its basis' graph)."""
    g = graph or step.basis.graph
    vert = step.basis.arrays[0]
    seen = []
    for grp in step.groups:
        if grp.idx.ndim != 2:
            raise DimensionMismatch("block index array must be two-dimensional")
        k = grp.idx.shape[1]
        if grp.mats.shape[-2:] != (k, k) or (not grp.shared and len(grp.mats) != len(grp.idx)):
            raise DimensionMismatch(f"blocks of size {k} carry matrices of shape {grp.mats.shape}")
        if grp.idx.min() < 0 or grp.idx.max() >= len(step.basis):
            raise DimensionMismatch("block refers to a basis index that does not exist")
        seen.append(grp.idx.ravel())
        vs = vert[grp.idx]
        lo, hi = vs.min(axis=1), vs.max(axis=1)
        if not np.all((vs == lo[:, None]) | (vs == hi[:, None])):
            raise LocalityViolation(f"{step.label}: a block touches more than two vertices")
        pair = lo != hi
        if pair.any():
            ok = g.adjacent_pairs(lo[pair], hi[pair])
            if not ok.all():
                bad = np.flatnonzero(pair)[~ok][0]
                raise LocalityViolation(f"{step.label}: block spans non-adjacent vertices "
                                        f"{int(lo[bad])} and {int(hi[bad])}")
        mats = grp.mats
        err = np.abs(np.conj(np.swapaxes(mats, -1, -2)) @ mats - np.eye(k)).max()
        if err > UNITARY_TOL:
            raise NonUnitaryBlock(f"{step.label}: block deviates from unitary by {err:.3e}")
    if seen:
        flat = np.concatenate(seen)
        if len(np.unique(flat)) != len(flat):
            raise OverlappingBlocks(f"{step.label}: blocks share basis states")


def init_state(basis: Basis, b: BasisState | tuple) -> QuantumState:
    i = basis.add(b)
    s = QuantumState(basis)
    s.amps[i] = 1.0
    return s


def apply_step(s: QuantumState, step: LocalStep, c: CostCounters | None = None) -> QuantumState:
    """Apply ``step`` in place (and return ``s``).  The step was validated when constructed."""
    if step.basis is not s.basis:
        raise DimensionMismatch("step and state use different bases")
    s._sync()
    amps = s.amps
    drift = 0.0
    for grp in step.groups:
        old = amps[grp.idx]
        if grp.idx.shape[1] == 1:
            new = old * grp.mats[..., 0]
        elif grp.shared:
            new = old @ grp.mats.T
        else:
            new = np.einsum("bij,bj->bi", grp.mats, old)
        new[np.abs(new) < PRUNE] = 0
        drift += float(np.vdot(new, new).real - np.vdot(old, old).real)
        amps[grp.idx] = new
    s.drift += drift
    if abs(s.drift) > NORM_TOL:
        raise NormDrift(f"norm drifted by {s.drift:.3e}")
    if c is not None:
        c.steps += 1
    return s


def apply_oracle(s: QuantumState, x: np.ndarray, c: CostCounters | None = None) -> QuantumState:
    """XOR ``x[vertex]`` into the answer bit of every basis state (in place)."""
    x = np.asarray(x)
    if len(x) != s.basis.graph.n:
        raise DimensionMismatch(f"input has {len(x)} bits, graph has {s.basis.graph.n} vertices")
    s._sync()
    lo, hi = s.basis.oracle_pairs(x)
    s.amps[lo], s.amps[hi] = s.amps[hi], s.amps[lo].copy()
    if c is not None:
        c.queries += 1
    return s


def success_probability(s: QuantumState, pred: Callable[[BasisState], bool]) -> float:
    s._sync()
    nz = np.flatnonzero(s.amps)
    keep = np.fromiter((bool(pred(s.basis.keys[i])) for i in nz), dtype=bool, count=len(nz))
    return float(np.sum(np.abs(s.amps[nz[keep]]) ** 2))


def answer_probability(s: QuantumState) -> float:
    """Probability that the answer bit reads 1."""
    s._sync()
    w = s.basis.arrays[1]
    return float(np.sum(np.abs(s.amps[(w & 1) == 1]) ** 2))


def l2_distance_sq(a: QuantumState, b: QuantumState) -> float:
    if a.basis is b.basis:
        a._sync(), b._sync()
        d = a.amps - b.amps
        return float(np.vdot(d, d).real)
    da, db = a.amplitudes(), b.amplitudes()
    return float(sum(abs(da.get(k, 0) - db.get(k, 0)) ** 2 for k in da.keys() | db.keys()))


def invert_step(step: LocalStep) -> LocalStep:
    return step.inverse()


class _Oracle:
    __slots__ = ()

    def __repr__(self) -> str:
        return "ORACLE"


ORACLE = _Oracle()
Op = Union[LocalStep, _Oracle]
InputSource = Union[np.ndarray, Callable[[int], np.ndarray]]


def inverse_ops(ops: Sequence[Op]) -> list[Op]:
    return [op if op is ORACLE else op.inverse() for op in reversed(ops)]


def count_ops(ops: Sequence[Op]) -> CostCounters:
    q = sum(1 for op in ops if op is ORACLE)
    return CostCounters(len(ops) - q, q)


def run_ops(s: QuantumState, ops: Sequence[Op], x: InputSource, c: CostCounters | None = None,
            on_query: Callable[[int, QuantumState], None] | None = None, first_query: int = 1) -> int:
    """Execute ``ops`` on ``s`` in place.

    ``x`` is either a fixed input or a function of the 1-based query number,
    which is how hybrid inputs are expressed.  ``on_query(t, s)`` fires after
    query ``t``.  Returns the number of the next query.
    """
    t = first_query
    fixed = None if callable(x) else np.asarray(x)
    for op in ops:
        if op is ORACLE:
            apply_oracle(s, fixed if fixed is not None else x(t), c)
            if on_query is not None:
                on_query(t, s)
            t += 1
        else:
            apply_step(s, op, c)
    return t


def dump_state(s: QuantumState) -> str:
    """Golden-file text form: ``vertex work cluster re im`` per line, sorted by basis key."""
    rows = sorted(s.amplitudes().items())
    return "".join(f"{k.vertex} {k.work} {k.cluster} {a.real:.17g} {a.imag:.17g}\n" for k, a in rows)


def load_state(basis: Basis, text: str) -> QuantumState:
    s = QuantumState(basis)
    entries = []
    for line in text.splitlines():
        if line.strip():
            v, w, c, re, im = line.split()
            entries.append((basis.add(BasisState(int(v), int(w), int(c))), complex(float(re), float(im))))
    s._sync()
    for i, a in entries:
        s.amps[i] = a
    return s


def diagonal_step(basis: Basis, idx: np.ndarray, phases: np.ndarray | complex, label: str = "") -> LocalStep:
    idx = np.asarray(idx, dtype=np.int64).reshape(-1, 1)
    ph = np.broadcast_to(np.asarray(phases, dtype=complex), (len(idx),)).reshape(-1, 1, 1).copy()
    return LocalStep(basis, [BlockGroup(idx, ph)], label)


def pair_step(basis: Basis, a: np.ndarray, b: np.ndarray, mat: np.ndarray, label: str = "") -> LocalStep:
    """The same 2x2 unitary on every pair ``(a[i], b[i])`` of basis indices."""
    idx = np.stack([np.asarray(a, dtype=np.int64), np.asarray(b, dtype=np.int64)], axis=1)
    return LocalStep(basis, [BlockGroup(idx, np.asarray(mat, dtype=complex))], label)


SWAP = np.array([[0, 1], [1, 0]], dtype=complex)


def rotation(keep: float) -> np.ndarray:
    """Real rotation sending ``|a>`` to ``keep|a> + sqrt(1-keep^2)|b>``."""
    s = keep
    c = np.sqrt(max(0.0, 1.0 - s * s))
    return np.array([[s, -c], [c, s]], dtype=complex)
