"""Amplitude amplification over step programs, plus its closed-form predictions."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .graph import Graph
from .simcore import (ORACLE, Basis, BasisState, CostCounters, LocalStep, Op, QuantumState, answer_probability,
                      diagonal_step, init_state, inverse_ops, pair_step, rotation, run_ops)


def amplified_ops(u: Sequence[Op], w: LocalStep, s: LocalStep, m: int,
                  u_inv: Sequence[Op] | None = None) -> list[Op]:
    """``U`` followed by ``m`` rounds of ``W, U^-1, S, U``: ``2m + 1`` invocations of ``U`` or its inverse."""
    if m < 0:
        raise ValueError("round count must be non-negative")
    u = list(u)
    u_inv = inverse_ops(u) if u_inv is None else list(u_inv)
    out = list(u)
    for _ in range(m):
        out.append(w)
        out.extend(u_inv)
        out.append(s)
        out.extend(u)
    return out


@dataclass
class AmplSpec:
    basis: Basis
    algo: Sequence[Op]
    flip_w: LocalStep
    flip_s: LocalStep
    m: int
    start: BasisState


@dataclass
class AmplResult:
    state: QuantumState
    calls: int
    counters: CostCounters


def run_amplification(spec: AmplSpec, x: np.ndarray | None = None, c: CostCounters | None = None) -> AmplResult:
    c = c if c is not None else CostCounters()
    x = np.zeros(spec.basis.graph.n, dtype=np.int8) if x is None else np.asarray(x)
    state = init_state(spec.basis, spec.start)
    u = list(spec.algo)
    u_inv = inverse_ops(u)
    calls = 0
    run_ops(state, u, x, c)
    calls += 1
    for _ in range(spec.m):
        run_ops(state, [spec.flip_w], x, c)
        run_ops(state, u_inv, x, c)
        calls += 1
        run_ops(state, [spec.flip_s], x, c)
        run_ops(state, u, x, c)
        calls += 1
    return AmplResult(state, calls, c)


def predicted_success(eps: float, m: int) -> float:
    eps = min(max(eps, 0.0), 1.0)
    return math.sin((2 * m + 1) * math.asin(math.sqrt(eps))) ** 2


def ampl_lower_bound(eps: float, m: int) -> tuple[float, int]:
    """Polynomial lower bound on the amplified success and the largest ``m`` for which it is valid."""
    if not 0 < eps <= 1:
        raise ValueError("epsilon must lie in (0, 1]")
    k2 = (2 * m + 1) ** 2 * eps
    m_max = math.floor(math.pi / (4 * math.asin(math.sqrt(eps))) - 0.5 + 1e-9)
    return (1 - k2 / 3) * k2, m_max


def optimal_rounds(eps: float) -> int:
    """Largest round count with ``(2m+1) asin(sqrt(eps)) <= pi/2``, so the rotation never overshoots."""
    if eps <= 0:
        return 0
    return max(0, math.floor(math.pi / (4 * math.asin(math.sqrt(min(eps, 1.0)))) - 0.5 + 1e-9))


def synthetic_spec(eps: float, m: int) -> AmplSpec:
    """Two-vertex instance where ``U|1,0> = sqrt(1-eps)|1,0> + sqrt(eps)|2,1>``."""
    g = Graph.from_edges(2, [(1, 2)], name="edge")
    basis = Basis(g)
    a, b = basis.add((1, 0, 0)), basis.add((2, 1, 0))
    u = pair_step(basis, [a], [b], rotation(math.sqrt(1 - eps)), "synthetic-U")
    witnesses = np.flatnonzero(basis.arrays[1] & 1)
    w = diagonal_step(basis, witnesses, -1, "flip-witness")
    s = diagonal_step(basis, [a], -1, "flip-start")
    return AmplSpec(basis, [u], w, s, m, BasisState(1, 0, 0))


def demo_rows(eps: float, ms: Sequence[int]) -> list[dict]:
    rows = []
    for m in ms:
        res = run_amplification(synthetic_spec(eps, m))
        sim = answer_probability(res.state)
        pred = predicted_success(eps, m)
        rows.append({"epsilon": eps, "m": m, "calls": res.calls, "predicted": pred,
                     "simulated": sim, "delta": abs(sim - pred)})
    return rows


__all__ = ["AmplSpec", "AmplResult", "amplified_ops", "run_amplification", "predicted_success",
           "ampl_lower_bound", "optimal_rounds", "synthetic_spec", "demo_rows", "ORACLE"]
