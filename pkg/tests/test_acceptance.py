"""Acceptance suite: one check per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` or directly with
``python tests/test_acceptance.py``.
"""
from __future__ import annotations

import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from spatialsearch.amplify import amplified_ops, ampl_lower_bound, predicted_success, run_amplification, synthetic_spec
from spatialsearch.clustersearch import (IrregularParams, audit_goodness, build_cluster_tree, irregular_run,
                                         run_irregular_search, search_irregular_k, search_scattered)
from spatialsearch.commsim import (Tally, compare_with_local, cube_runs, run_disjointness, run_protocol,
                                   scaling_table)
from spatialsearch.graph import dimension_constant, make_grid, make_starfish
from spatialsearch.gridsearch import (GridParams, box_run, classical_scan, diameter_program, single_pick_bound,
                                      single_pick_frequency, search_by_diameter, search_k, search_unique,
                                      search_unknown, unique_run, unknown_runs, valid_box_sides)
from spatialsearch.hybridlab import grid_experiment, starfish_experiment
from spatialsearch.locality import (DenseUnitary, Verdict, check_c_local, check_h_local, check_z_local,
                                    random_edge_hamiltonian, vertex_annotation)
from spatialsearch.simcore import (ORACLE, SWAP, Basis, BasisState, BlockGroup, CostCounters, LocalityViolation,
                                   LocalStep, answer_probability, init_state, run_ops)

RESULTS: dict[int, tuple[bool, str]] = {}


def report(n: int, ok: bool, detail: str) -> tuple[bool, str]:
    RESULTS[n] = (ok, detail)
    return ok, f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"


def _unit(n: int, v: int) -> np.ndarray:
    x = np.zeros(n, dtype=np.int8)
    x[v - 1] = 1
    return x


# -- criteria -----------------------------------------------------------------

def criterion_1():
    t0 = time.perf_counter()
    worst = 0.0
    for side, expected in ((3, 529 / 729), (9, (404041 / 531441) ** 2)):
        g = make_grid(2, side)
        run, _, _ = unique_run(g, GridParams(2))
        for v in (1, (g.n + 1) // 2, g.n):
            worst = max(worst, abs(answer_probability(run.execute(_unit(g.n, v))) - expected))
    dt = time.perf_counter() - t0
    return report(1, worst < 1e-9 and dt < 1, f"max |p - law| = {worst:.2e}, {dt:.2f}s")


def criterion_2():
    t0 = time.perf_counter()
    g = make_grid(3, 4)
    run, _, _ = unique_run(g, GridParams(3, beta=4 / 5, mu=5 / 11, l0=2))
    worst = max(abs(answer_probability(run.execute(_unit(64, v))) - 25 / 32) for v in range(1, 65))
    dt = time.perf_counter() - t0
    return report(2, worst < 1e-9 and dt < 1, f"max |p - 25/32| over all 64 targets = {worst:.2e}, {dt:.2f}s")


def criterion_3():
    t0 = time.perf_counter()
    worst, bound_ok = 0.0, True
    for k in range(2, 13):
        eps = 1 / k ** 2
        _, m_max = ampl_lower_bound(eps, 0)
        for m in range(21):
            pred = predicted_success(eps, m)
            worst = max(worst, abs(answer_probability(run_amplification(synthetic_spec(eps, m)).state) - pred))
            if m <= m_max:
                bound_ok &= ampl_lower_bound(eps, m)[0] <= pred + 1e-12
    dt = time.perf_counter() - t0
    return report(3, worst < 1e-9 and bound_ok and dt < 5,
                  f"max |sim - pred| = {worst:.2e}, bound below prediction: {bound_ok}, {dt:.2f}s")


def _measured(ops, basis, start, x) -> int:
    c = CostCounters()
    run_ops(init_state(basis, start), ops, x, c)
    return c.steps


def criterion_4():
    checked, bad = 0, []
    for d, side in ((2, 3), (2, 9), (3, 4)):
        g = make_grid(d, side)
        _, plan, prog = unique_run(g, GridParams(d))
        x = _unit(g.n, 1)
        start = BasisState(1, 0, 0)
        for r in range(1, len(plan.levels)):
            lv = plan.levels[r]
            t_a = _measured(prog.A[r], prog.basis, start, x)
            t_u = _measured(prog.U[r], prog.basis, start, x)
            t_prev = _measured(prog.A[r - 1], prog.basis, start, x)
            ok = t_a <= (2 * lv.m + 1) * t_u + 2 * lv.m and t_u - t_prev <= 4 * d * lv.side
            checked += 1
            if not ok:
                bad.append((d, side, r, t_a, t_u, t_prev))
    return report(4, not bad, f"{checked} levels checked, violations {bad}")


def criterion_5():
    g = make_grid(3, 4)
    star = make_starfish(6, 2)
    z64, z13 = np.zeros(64, dtype=np.int8), np.zeros(13, dtype=np.int8)
    entry = {
        "search_unique": lambda s: search_unique(g, z64, seed=s),
        "search_k": lambda s: search_k(g, z64, 4, seed=s),
        "search_unknown": lambda s: search_unknown(g, z64, seed=s),
        "search_by_diameter": lambda s: search_by_diameter(star, z13, seed=s),
        "classical_scan": lambda s: classical_scan(star, z13, root=1 + s % 13),
        "run_irregular_search": lambda s: run_irregular_search(g, z64, seed=s),
        "search_irregular_k": lambda s: search_irregular_k(g, z64, 2, seed=s),
        "search_scattered": lambda s: search_scattered(g, range(1, 40), 2, z64, seed=s),
        "run_disjointness": lambda s: run_disjointness(np.zeros(8, np.int8), np.zeros(8, np.int8), seed=s),
    }
    failures = []
    for name, fn in entry.items():
        for seed in range(20):
            out = fn(seed)
            if out.answer != 0 or out.answer_one_probability != 0.0:
                failures.append((name, seed))
    return report(5, not failures, f"{len(entry)} entry points x 20 seeds, false positives: {failures[:5]}")


def criterion_6():
    t0 = time.perf_counter()
    f, se = single_pick_frequency(12, 5, 100_000, seed=0)
    target = single_pick_bound(12, 5)
    dt = time.perf_counter() - t0
    return report(6, f >= target - 3 * se and dt < 5,
                  f"frequency {f:.4f} vs 35/144 - 3 sigma = {target - 3 * se:.4f}, {dt:.2f}s")


def criterion_7():
    t0 = time.perf_counter()
    star, grid = starfish_experiment(), grid_experiment(side=4, k=8, d=3)
    dt = time.perf_counter() - t0
    ok = star.report.holds and grid.report.holds and dt < 30
    return report(7, ok, f"starfish T={star.trace.T} w={star.trace.w} holds={star.report.holds}; "
                         f"grid T={grid.trace.T} w={grid.trace.w} regions={len(grid.trace.regions)} "
                         f"holds={grid.report.holds}; {dt:.2f}s")


def _all_programs():
    runs = []
    for d, side in ((2, 3), (2, 9), (3, 4), (3, 8)):
        runs.append(unique_run(make_grid(d, side), GridParams(d))[0])
    g64 = make_grid(3, 4)
    runs += unknown_runs(g64, 0, GridParams(3))
    runs += [box_run(g64, GridParams(3), s, np.random.default_rng(s)) for s in valid_box_sides(g64, GridParams(3))]
    runs.append(irregular_run(g64, IrregularParams(), 0)[0])
    runs.append(irregular_run(g64, IrregularParams(), 0, base=range(1, 33), tag=".sub")[0])
    runs += cube_runs(8, 0)
    ops = [op for r in runs for op in r.ops]
    ops += diameter_program(make_starfish(6, 2)).ops
    ops += amplification_ops()
    return [op for op in ops if op is not ORACLE]


def amplification_ops():
    spec = synthetic_spec(0.1, 3)
    return amplified_ops(spec.algo, spec.flip_w, spec.flip_s, 3)


def criterion_8():
    t0 = time.perf_counter()
    steps = {id(op): op for op in _all_programs()}
    passed = sum(check_c_local(op).ok for op in steps.values())
    path = make_grid(1, 4)
    b = Basis(path)
    i, j = b.add((1, 0, 0)), b.add((3, 0, 0))
    injected = LocalStep(b, [BlockGroup(np.array([[i, j]]), SWAP)], "injected", validate=False)
    rejected = check_c_local(injected).cause == "LocalityViolation"
    try:
        LocalStep(b, [BlockGroup(np.array([[i, j]]), SWAP)], "injected")
        rejected = False
    except LocalityViolation:
        pass
    rng = np.random.default_rng(0)
    g = make_grid(2, 4)
    edges = g.edges()
    accepted = 0
    for _ in range(50):
        _, U = random_edge_hamiltonian(g, edges[int(rng.integers(len(edges)))], rng)
        accepted += check_h_local(DenseUnitary(U, vertex_annotation(g.n, g)), g)[0] is Verdict.TRUE
    refused = 0
    for _ in range(50):
        while True:
            u, v = (int(t) for t in rng.choice(np.arange(1, g.n + 1), 2, replace=False))
            if not g.has_edge(u, v):
                break
        m = np.eye(g.n, dtype=complex)
        m[[u - 1, v - 1]] = m[[v - 1, u - 1]]
        refused += not check_z_local(DenseUnitary(m, vertex_annotation(g.n, g)), g)[0]
    dt = time.perf_counter() - t0
    ok = passed == len(steps) and rejected and accepted == 50 and refused == 50 and dt < 30
    return report(8, ok, f"{passed}/{len(steps)} steps C-local, injected block rejected: {rejected}, "
                         f"h-local accepted {accepted}/50, non-adjacent swaps refused {refused}/50, {dt:.2f}s")


def criterion_9():
    t0 = time.perf_counter()
    g = make_grid(3, 8)
    kappa = dimension_constant(g, 3)
    passes = sum(audit_goodness(build_cluster_tree(g, 50, 0.75, s), kappa, g.n).passed for s in range(20))
    dt = time.perf_counter() - t0
    return report(9, passes >= 18 and dt < 30, f"kappa = {kappa:.6f}, audits passed {passes}/20, {dt:.2f}s")


def _delete_edges(g, count: int, seed: int):
    rng = np.random.default_rng(seed)
    kappa0 = dimension_constant(g, 3)
    removed: list[tuple[int, int]] = []
    h = g
    while len(removed) < count:
        e = g.edges()[int(rng.integers(g.num_edges))]
        if e in removed:
            continue
        cand = h.without_edges([e])
        if not cand.is_connected():
            continue
        kappa = dimension_constant(cand, 3)
        tree = build_cluster_tree(cand, 50, 0.75, 0)
        if kappa <= 0 or not audit_goodness(tree, kappa, cand.n).passed:
            continue
        h, removed = cand, removed + [e]
    return h, removed, kappa0


def criterion_10():
    t0 = time.perf_counter()
    g = make_grid(3, 8)
    h, removed, _ = _delete_edges(g, 5, seed=10)
    lows = {}
    for name, graph in (("L3(512)", g), ("L3(512)-5", h)):
        kappa = dimension_constant(graph, 3)
        rng = np.random.default_rng(2024)
        probs = [run_irregular_search(graph, _unit(graph.n, int(rng.integers(1, graph.n + 1))), seed=s,
                                      kappa=kappa).success_probability for s in range(50)]
        lows[name] = min(probs)
    steps = {}
    for n, side in ((64, 4), (512, 8)):
        run, _ = irregular_run(make_grid(3, side), IrregularParams(), 0)
        steps[n] = run.info["steps_per_run"] / (math.sqrt(n) * math.log(n) ** (1 / 3))
    ratio = max(steps.values()) / min(steps.values())
    dt = time.perf_counter() - t0
    ok = all(v >= 0.5 for v in lows.values()) and ratio <= 2 and dt < 120
    norm = {n: round(v, 2) for n, v in steps.items()}
    return report(10, ok, f"{len(removed)} edges removed, min success {lows}, "
                          f"steps/(sqrt n (ln n)^1/3) {norm} ratio {ratio:.2f}, {dt:.1f}s")


def criterion_11():
    t0 = time.perf_counter()
    g = make_grid(3, 4)
    rates, means = {}, {}
    for k in (1, 3, 9, 27):
        hits, probs = 0, []
        for s in range(50):
            x = np.zeros(64, dtype=np.int8)
            x[np.random.default_rng(1000 + s).choice(64, k, replace=False)] = 1
            out = search_unknown(g, x, seed=s)
            hits += out.answer
            probs.append(out.success_probability)
        rates[k], means[k] = hits / 50, float(np.mean(probs))
    dt = time.perf_counter() - t0
    ok = all(r >= 2 / 3 for r in rates.values()) and dt < 120
    return report(11, ok, f"sampled success rate {rates}, mean exact probability "
                          f"{ {k: round(v, 3) for k, v in means.items()} }, {dt:.1f}s")


def criterion_12():
    t0 = time.perf_counter()
    rng = np.random.default_rng(12)
    gap = 0.0
    for _ in range(6):
        x, y = rng.integers(0, 2, 8), rng.integers(0, 2, 8)
        gap = max(gap, compare_with_local(x, y))
    dist_gap = 0.0
    for _ in range(3):
        x = (rng.random(64) < 0.1).astype(np.int8)
        y = (rng.random(64) < 0.1).astype(np.int8)
        r = run_disjointness(x, y, seed=0)
        local = search_unknown(make_grid(3, 4), x & y, seed=0)
        dist_gap = max(dist_gap, abs(r.answer_one_probability - local.answer_one_probability))
    audits: list[bool] = []
    for n in (8, 64):
        for run in cube_runs(n, 0):
            run_protocol(run, _unit(n, n), _unit(n, n), Tally(), audits)
    table = scaling_table((8, 64, 512))
    per = [row["per_sqrt_n"] for row in table]
    spread = max(per) / min(per)
    dt = time.perf_counter() - t0
    ok = gap < 1e-9 and dist_gap < 1e-9 and all(audits) and spread <= 4 and dt < 120
    return report(12, ok, f"n=8 amplitude gap {gap:.1e}, n=64 answer gap {dist_gap:.1e}, "
                          f"sync at {len(audits)} boundaries: {all(audits)}, qubits/sqrt(n) "
                          f"{[round(p, 1) for p in per]} spread {spread:.2f} (limit 4), {dt:.1f}s")


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
            criterion_7, criterion_8, criterion_9, criterion_10, criterion_11, criterion_12]


@pytest.mark.parametrize("check", CRITERIA, ids=[f"criterion_{i}" for i in range(1, 13)])
def test_criterion(check, capsys):
    ok, line = check()
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


if __name__ == "__main__":
    sys.path.insert(0, str(Path(__file__).parent))
    failed = 0
    for check in CRITERIA:
        ok, line = check()
        print(line, flush=True)
        failed += not ok
    sys.exit(1 if failed else 0)
