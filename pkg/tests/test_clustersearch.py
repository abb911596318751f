import math

import numpy as np
import pytest

from spatialsearch.clustersearch import (BadClustering, ClusterProgram, IrregularParams, audit_goodness,
                                         build_cluster_tree, irregular_run, irregular_schedule, level_threshold,
                                         run_irregular_search, search_irregular_k, search_scattered)
from spatialsearch.gridsearch import ParameterError
from spatialsearch.locality import check_c_local
from spatialsearch.simcore import ORACLE, answer_probability

from conftest import unit


def test_schedule_d3():
    sizes = irregular_schedule(512, 3, 50, 0.75)
    assert sizes[:2] == [1.0, 50.0]
    assert sizes[2] == pytest.approx(50 ** (4 / 3))
    assert len(sizes) == 3


def test_schedule_d2_uses_fixed_factor():
    sizes = irregular_schedule(4096, 2, 50, 0.75)
    f = 2 ** math.sqrt(12)
    assert all(b / a == pytest.approx(f) for a, b in zip(sizes, sizes[1:]))
    assert sizes[-1] <= 4096 < sizes[-1] * f


@pytest.mark.parametrize("beta", [0.5, 1.0])
def test_schedule_rejects_beta(beta):
    with pytest.raises(ParameterError, match="beta"):
        irregular_schedule(512, 3, 50, beta)


@pytest.mark.parametrize("seed", range(4))
def test_tree_structure(cube64, seed):
    t = build_cluster_tree(cube64, 8, 0.75, seed)
    covered = np.concatenate([t.real_children(1, i) for i in range(len(t.levels[1]))])
    assert sorted(covered.tolist()) == list(range(cube64.n))
    for r in range(1, len(t.levels)):
        lv, lower = t.levels[r], t.levels[r - 1]
        for i in lv.real:
            ch = lv.children[i]
            assert len(ch) == t.K[r]
            assert np.all(lower.peg[ch[lower.dummy[ch]]] == lv.peg[i])


def test_audit_thresholds(cube64):
    t = build_cluster_tree(cube64, 8, 0.75, 0)
    assert audit_goodness(t, math.inf, 64).passed
    assert not audit_goodness(t, 1e9, 64).passed
    assert level_threshold(2.0, 8, math.e, 3) == pytest.approx(2.0)


def test_bad_clustering_raises(cube64):
    with pytest.raises(BadClustering):
        irregular_run(cube64, IrregularParams(n1=8, attempts=2), 0, kappa=1e9)


def test_level_one_matches_prediction(cube64):
    t = build_cluster_tree(cube64, 8, 0.75, 1)
    prog = ClusterProgram(t)
    lv = t.levels[1]
    i = int(lv.real[0])
    v = int(t.levels[0].peg[t.real_children(1, i)[0]])
    p = answer_probability(prog.run_level(1, i, unit(64, v)))
    assert abs(p - prog.predicted[1]) < 1e-9


def test_all_steps_local(cube64):
    run, prog = irregular_run(cube64, IrregularParams(n1=8), 0)
    steps = [op for op in run.ops if op is not ORACLE]
    assert steps and all(check_c_local(op).ok for op in steps)


@pytest.mark.parametrize("search", [
    lambda g, x, s: run_irregular_search(g, x, seed=s, p=IrregularParams(n1=8)),
    lambda g, x, s: search_irregular_k(g, x, 1, seed=s, p=IrregularParams(n1=8)),
    lambda g, x, s: search_scattered(g, range(1, 33), 1, x, seed=s, p=IrregularParams(n1=8)),
])
def test_zero_input_sound(cube64, search):
    out = search(cube64, np.zeros(64, dtype=np.int8), 3)
    assert out.answer == 0 and out.answer_one_probability == 0.0


@pytest.mark.parametrize("n1", [8, 50])
def test_per_run_success_matches_fold(cube64, n1):
    out = run_irregular_search(cube64, unit(64, 22), seed=0, p=IrregularParams(n1=n1))
    assert abs(out.per_run_probability - out.extra["predicted_per_run"]) < 1e-9


def test_unique_search_on_small_cube(cube64):
    out = run_irregular_search(cube64, unit(64, 22), seed=0)
    assert out.success_probability >= 0.5
    assert out.extra["steps_per_run"] > 0


def test_scattered_rejects_marks_outside_pool(cube64):
    with pytest.raises(ParameterError, match="outside"):
        search_scattered(cube64, [1, 2, 3], 1, unit(64, 10))


def test_irregular_k_rejects_k(cube64):
    with pytest.raises(ParameterError):
        search_irregular_k(cube64, unit(64, 1), 0)


@pytest.mark.parametrize("kwargs", [dict(d=1), dict(beta=0.6), dict(n1=1), dict(top_rule="x"), dict(attempts=0)])
def test_params_validation(kwargs):
    with pytest.raises(ParameterError):
        IrregularParams(**kwargs)


def test_reproducible(cube64):
    a = run_irregular_search(cube64, unit(64, 5), seed=7, p=IrregularParams(n1=8))
    b = run_irregular_search(cube64, unit(64, 5), seed=7, p=IrregularParams(n1=8))
    assert a.success_probability == b.success_probability and a.answer == b.answer
