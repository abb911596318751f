"""Two-party disjointness by simulating the unknown-count grid search across a shared cube.

Alice holds ``x`` and runs the search; Bob holds ``y`` and keeps a copy of
Alice's vertex register.  A query becomes a round trip of the answer bit and
an auxiliary qubit.  A step that moves amplitude between vertices becomes one
or two relays of the auxiliary qubit, during which Bob moves his copy.
Communication is tallied in qubits per one-way message.
"""
from __future__ import annotations

import math
import time
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .graph import make_grid
from .gridsearch import GridParams, SearchRun, unknown_runs
from .rng import stream
from .simcore import ORACLE, LocalStep, QuantumState, SimulationError, answer_probability

Key = tuple  # (alice_vertex, work, cluster, aux, bob_vertex)
TOL = 1e-12


class ProtocolError(SimulationError):
    """A step shape the relay construction does not cover."""


@dataclass(frozen=True)
class CubeEmbedding:
    n: int
    side: int

    def index(self, j: int, k: int, l: int) -> int:
        s = self.side
        for c in (j, k, l):
            if not 0 <= c < s:
                raise ValueError(f"coordinate {c} outside [0, {s})")
        return s * s * j + s * k + l + 1

    def coords(self, i: int) -> tuple[int, int, int]:
        if not 1 <= i <= self.n:
            raise ValueError(f"index {i} outside 1..{self.n}")
        j, rest = divmod(i - 1, self.side ** 2)
        k, l = divmod(rest, self.side)
        return j, k, l


def embed_cube(n: int) -> CubeEmbedding:
    side = round(n ** (1 / 3))
    if n < 1 or side ** 3 != n:
        raise ValueError(f"{n} is not a perfect cube")
    return CubeEmbedding(n, side)


@dataclass
class Tally:
    """Qubits per one-way message.

    The query gadget ships ``z`` plus the auxiliary bit; a relay ships the auxiliary bit alone.
    """

    query_message: int = 2
    relay_message: int = 1


@dataclass
class JointState:
    amps: dict = field(default_factory=dict)
    qubits: int = 0
    messages: int = 0
    queries: int = 0
    relays: int = 0

    @classmethod
    def start(cls, vertex: int) -> "JointState":
        return cls({(vertex, 0, 0, 0, vertex): 1 + 0j})

    def to_coo(self) -> tuple[np.ndarray, np.ndarray]:
        keys = np.array(list(self.amps), dtype=np.int64).reshape(-1, 5)
        return keys, np.array(list(self.amps.values()), dtype=complex)

    def send(self, qubits: int) -> None:
        self.qubits += qubits
        self.messages += 1

    def prune(self) -> None:
        self.amps = {k: a for k, a in self.amps.items() if abs(a) > TOL}

    def answer_probability(self) -> float:
        return float(sum(abs(a) ** 2 for k, a in self.amps.items() if k[1] & 1))

    def alice_view(self) -> dict:
        """Alice's amplitudes ``(vertex, work, cluster) -> amp``; only meaningful while synchronized."""
        out: dict = {}
        for (a, w, c, aux, b), amp in self.amps.items():
            if abs(amp) > TOL:
                out[(a, w, c)] = out.get((a, w, c), 0) + amp
        return out


def audit_sync(s: JointState) -> bool:
    """True iff every supported basis state has equal vertex registers and a clear auxiliary bit."""
    return all(k[0] == k[4] and k[3] == 0 for k, a in s.amps.items() if abs(a) > TOL)


# ---------------------------------------------------------------------------
# Party-local operations


def _alice(s: JointState, blocks: Sequence[tuple[list, np.ndarray]]) -> None:
    """Apply unitaries on Alice's registers ``(vertex, work, cluster, aux)``, whatever Bob holds."""
    where: dict = {}
    for bi, (keys, _) in enumerate(blocks):
        for pos, k in enumerate(keys):
            where[k] = (bi, pos)
    groups: dict = defaultdict(dict)
    rest = {}
    for k, amp in s.amps.items():
        hit = where.get(k[:4])
        if hit is None:
            rest[k] = amp
        else:
            groups[(hit[0], k[4])][hit[1]] = amp
    for (bi, b), entries in groups.items():
        keys, mat = blocks[bi]
        vec = np.zeros(len(keys), dtype=complex)
        for pos, amp in entries.items():
            vec[pos] = amp
        out = mat @ vec
        for pos, amp in enumerate(out):
            if abs(amp) > TOL:
                rest[keys[pos] + (b,)] = rest.get(keys[pos] + (b,), 0) + amp
    s.amps = rest


def _bob_move(s: JointState, partner: dict) -> None:
    """Bob, holding the auxiliary bit, moves his vertex copy to its matched partner when the bit is set."""
    out = {}
    for (a, w, c, aux, b), amp in s.amps.items():
        if aux:
            if b not in partner:
                raise ProtocolError(f"Bob has no relay partner for vertex {b}")
            b = partner[b]
        out[(a, w, c, aux, b)] = amp
    s.amps = out


X = np.array([[0, 1], [1, 0]], dtype=complex)


def _query(s: JointState, x: np.ndarray, y: np.ndarray, tally: Tally, audits: list) -> None:
    def alice_xor(amps: dict) -> dict:
        return {(a, w, c, aux ^ int(x[a - 1]), b): amp for (a, w, c, aux, b), amp in amps.items()}

    s.amps = alice_xor(s.amps)
    s.send(tally.query_message)
    s.amps = {(a, w ^ (aux & int(y[b - 1])), c, aux, b): amp for (a, w, c, aux, b), amp in s.amps.items()}
    s.send(tally.query_message)
    s.amps = alice_xor(s.amps)
    s.queries += 1
    audits.append(audit_sync(s))


def _relay(s: JointState, partner: dict, tally: Tally) -> None:
    s.send(tally.relay_message)
    _bob_move(s, partner)
    s.send(tally.relay_message)
    s.relays += 1


def _matchings(blocks: list) -> list[list]:
    """Greedy split so that no vertex occurs twice within a class."""
    classes: list[tuple[set, list]] = []
    for blk in blocks:
        vs = {blk[0][0][0], blk[0][1][0]}
        for used, members in classes:
            if not used & vs:
                used |= vs
                members.append(blk)
                break
        else:
            classes.append((set(vs), [blk]))
    return [m for _, m in classes]


def _classify(step: LocalStep) -> tuple[list, list, list]:
    local, swaps, mixes = [], [], []
    for keys, mat in step.blocks():
        keys = [tuple(k) for k in keys]
        verts = {k[0] for k in keys}
        if len(verts) == 1 or np.allclose(mat, np.diag(np.diag(mat))):
            local.append(([k + (0,) for k in keys], mat))
        elif len(keys) == 2 and abs(mat[0, 0]) < TOL and abs(mat[1, 1]) < TOL:
            swaps.append((keys, mat))
        elif len(keys) == 2:
            mixes.append((keys, mat))
        else:
            raise ProtocolError(f"block of {len(keys)} keys spans {len(verts)} vertices in step {step.label!r}")
    return local, swaps, mixes


def _swap_class(s: JointState, blocks: list, tally: Tally) -> None:
    flag, finish, partner = [], [], {}
    for (A, B), mat in blocks:
        p, q = mat[0, 1], mat[1, 0]  # new A = p * old B, new B = q * old A
        flag += [([A + (0,), A + (1,)], X), ([B + (0,), B + (1,)], X)]
        finish += [([A + (1,), B + (0,)], np.array([[0, np.conj(q)], [q, 0]])),
                   ([B + (1,), A + (0,)], np.array([[0, np.conj(p)], [p, 0]]))]
        partner[A[0]], partner[B[0]] = B[0], A[0]
    _alice(s, flag)
    _relay(s, partner, tally)
    _alice(s, finish)


def _mix_class(s: JointState, blocks: list, tally: Tally) -> None:
    """Pull the second key to the first key's vertex, mix there, push it back."""
    flag, pull, act, partner = [], [], [], {}
    for (A, B), mat in blocks:
        u, v = A[0], B[0]
        near = (u,) + B[1:]
        flag.append(([B + (0,), B + (1,)], X))
        pull.append(([B + (1,), near + (1,)], X))
        act.append(([A + (0,), near + (1,)], mat))
        partner[u], partner[v] = v, u
    _alice(s, flag)
    _relay(s, partner, tally)
    _alice(s, pull)
    _alice(s, act)
    _alice(s, pull)  # the pull swap is its own inverse
    _relay(s, partner, tally)
    _alice(s, flag)


def _step(s: JointState, step: LocalStep, tally: Tally, audits: list) -> None:
    local, swaps, mixes = _classify(step)
    if local:
        _alice(s, local)
    for cls in _matchings(swaps):
        _swap_class(s, cls, tally)
        audits.append(audit_sync(s))
    for cls in _matchings(mixes):
        _mix_class(s, cls, tally)
        audits.append(audit_sync(s))


def run_protocol(run: SearchRun, x: np.ndarray, y: np.ndarray, tally: Tally | None = None,
                 audits: list | None = None) -> JointState:
    """One execution of ``run`` as a protocol; appends a sync verdict per completed exchange to ``audits``."""
    tally = tally or Tally()
    audits = audits if audits is not None else []
    s = JointState({(run.start.vertex, run.start.work, run.start.cluster, 0, run.start.vertex): 1 + 0j})
    audits.append(audit_sync(s))
    for op in run.ops:
        if op is ORACLE:
            _query(s, x, y, tally, audits)
        else:
            _step(s, op, tally, audits)
    return s


@dataclass
class DisjointnessResult:
    answer: int
    qubit_count: int
    success_probability: float
    answer_one_probability: float
    queries: int
    relays: int
    messages: int
    sync_ok: bool
    boundaries: int
    qubits_used: int
    per_program: list[float]
    wall_time: float = 0.0

    def __iter__(self) -> Iterator:
        return iter((self.answer, self.qubit_count, self.success_probability))

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def cube_runs(n: int, seed: int, p: GridParams | None = None) -> list[SearchRun]:
    emb = embed_cube(n)
    return unknown_runs(make_grid(3, emb.side), seed, p or GridParams(3))


def run_disjointness(X: Sequence[int], Y: Sequence[int], seed: int = 0, p: GridParams | None = None,
                     tally: Tally | None = None) -> DisjointnessResult:
    """Decide whether ``X`` and ``Y`` intersect.

    ``qubit_count`` is the cost of the whole schedule (every program, every
    repetition); ``qubits_used`` stops at the first repetition that reads 1.
    """
    t0 = time.perf_counter()
    x, y = np.asarray(X, dtype=np.int8), np.asarray(Y, dtype=np.int8)
    if x.shape != y.shape:
        raise ValueError("inputs must have equal length")
    n = len(x)
    tally = tally or Tally()
    rng = stream(seed, "commsim.sample")
    audits: list[bool] = []
    p_zero, total, used, answer, done = 1.0, 0, 0, 0, False
    per_program: list[float] = []
    queries = relays = messages = 0
    for run in cube_runs(n, seed, p):
        s = run_protocol(run, x, y, tally, audits)
        expected = 2 * s.queries * tally.query_message + 2 * s.relays * tally.relay_message
        if s.qubits != expected:
            raise ProtocolError(f"qubit tally {s.qubits} disagrees with {expected}")
        pr = s.answer_probability()
        per_program.append(pr)
        p_zero *= (1 - pr) ** run.repetitions
        total += s.qubits * run.repetitions
        queries += s.queries * run.repetitions
        relays += s.relays * run.repetitions
        messages += s.messages * run.repetitions
        for _ in range(run.repetitions):
            if done:
                break
            used += s.qubits
            if rng.random() < pr:
                answer, done = 1, True
    p_one = 1 - p_zero
    intersect = bool(np.any(x & y))
    return DisjointnessResult(answer, total, p_one if intersect else 1 - p_one, p_one, queries, relays, messages,
                              all(audits), len(audits), used, per_program, time.perf_counter() - t0)


def compare_with_local(X: Sequence[int], Y: Sequence[int], seed: int = 0, p: GridParams | None = None) -> float:
    """Largest amplitude gap between Alice's final state and the local search on ``x AND y``, over all programs."""
    x, y = np.asarray(X, dtype=np.int8), np.asarray(Y, dtype=np.int8)
    worst = 0.0
    for run in cube_runs(len(x), seed, p):
        joint = run_protocol(run, x, y)
        if not audit_sync(joint):
            return math.inf
        local: QuantumState = run.execute(x & y)
        ref = {tuple(k): a for k, a in local.amplitudes().items()}
        got = joint.alice_view()
        for k in ref.keys() | got.keys():
            worst = max(worst, abs(ref.get(k, 0) - got.get(k, 0)))
        worst = max(worst, abs(joint.answer_probability() - answer_probability(local)))
    return worst


def scaling_table(sizes: Sequence[int] = (8, 64, 512), seed: int = 0) -> list[dict]:
    rows = []
    for n in sizes:
        r = run_disjointness(np.zeros(n, dtype=np.int8), np.zeros(n, dtype=np.int8), seed)
        rows.append({"n": n, "qubits": r.qubit_count, "queries": r.queries, "relays": r.relays,
                     "per_sqrt_n": r.qubit_count / math.sqrt(n)})
    return rows
