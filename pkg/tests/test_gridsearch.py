import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spatialsearch.graph import make_grid, make_starfish as starfish
from spatialsearch.gridsearch import (GridParams, ParameterError, SubgridEmbedding, box_run, classical_scan,
                                      level_sides, single_pick_bound, single_pick_frequency, plan_levels,
                                      predicted_fold, run_AR, search_by_diameter, search_k, search_unique,
                                      search_unknown, table_levels, unique_run, valid_box_sides)
from spatialsearch.locality import check_c_local
from spatialsearch.simcore import ORACLE, answer_probability

from conftest import unit


@pytest.mark.parametrize("d,side,expected", [
    (2, 3, 529 / 729),
    (2, 9, (404041 / 531441) ** 2),
    (3, 4, 25 / 32),
])
def test_single_run_laws(d, side, expected):
    g = make_grid(d, side)
    run, plan, _ = unique_run(g, GridParams(d))
    for target in (1, g.n // 2 + 1, g.n):
        p = answer_probability(run.execute(unit(g.n, target)))
        assert abs(p - expected) < 1e-9
    assert abs(predicted_fold(plan.levels, d)[-1] - expected) < 1e-12


@pytest.mark.parametrize("d,side", [(2, 3), (2, 9), (3, 4), (3, 8)])
def test_step_recurrences(d, side):
    _, plan, prog = unique_run(make_grid(d, side), GridParams(d))
    rows = prog.level_costs()
    for prev, row in zip(rows, rows[1:]):
        m = row["m"]
        assert row["T_A"] <= (2 * m + 1) * row["T_U"] + 2 * m
        assert row["T_U"] - prev["T_A"] <= 4 * d * row["side"]


def test_level_tables():
    assert [lv.side for lv in level_sides(GridParams(2), 81)] == [1, 3, 9, 27, 81]
    assert [lv.side for lv in table_levels(GridParams(3), 2)] == [2, 4, 8]
    assert all(lv.m == 1 for lv in table_levels(GridParams(2, l0=3), 4)[1:])
    assert [lv.m for lv in table_levels(GridParams(2, l0=5), 2)] == [0, 2, 2]


def test_padding_adds_extra_level():
    plan = plan_levels(6 ** 3, 3, GridParams(3))
    assert plan.padded_side == 8 and plan.levels[-1].extra
    g = make_grid(3, 6)
    out = search_unique(g, unit(g.n, 100))
    assert out.success_probability >= 2 / 3


@pytest.mark.parametrize("kwargs,field", [
    (dict(d=1), "d"),
    (dict(d=3, beta=0.6), "beta"),
    (dict(d=3, mu=0.6), "mu"),
    (dict(d=3, beta=0.7, mu=0.4), "beta*mu"),
    (dict(d=2, l0=4), "l0"),
    (dict(d=3, repetitions=0), "repetitions"),
])
def test_parameter_validation(kwargs, field):
    with pytest.raises(ParameterError, match=field.replace("*", r"\*")):
        GridParams(**kwargs)


def test_run_ar_rejects_non_corner():
    g = make_grid(2, 9)
    with pytest.raises(ParameterError):
        run_AR(g, 1, 2, unit(g.n, 1), GridParams(2))
    state = run_AR(g, 1, 1, unit(g.n, 11), GridParams(2))
    assert answer_probability(state) == pytest.approx(529 / 729)


ENTRY_POINTS = {
    "unique": lambda g, x, s: search_unique(g, x, seed=s),
    "k": lambda g, x, s: search_k(g, x, 4, seed=s),
    "unknown": lambda g, x, s: search_unknown(g, x, seed=s),
    "diameter": lambda g, x, s: search_by_diameter(g, x, seed=s),
}


@pytest.mark.parametrize("name", sorted(ENTRY_POINTS))
def test_zero_input_is_sound(name):
    g = make_grid(3, 4)
    for seed in range(3):
        out = ENTRY_POINTS[name](g, np.zeros(g.n, dtype=np.int8), seed)
        assert out.answer == 0
        assert out.answer_one_probability == 0.0
        assert out.success_probability == 1.0


def test_search_k_finds_planted_vertices():
    g = make_grid(3, 4)
    rng = np.random.default_rng(5)
    x = np.zeros(g.n, dtype=np.int8)
    x[rng.choice(g.n, 9, replace=False)] = 1
    assert search_k(g, x, 9, seed=1).success_probability > 0.5


def test_unknown_runs_every_box_size():
    g = make_grid(3, 4)
    out = search_unknown(g, unit(g.n, 7), seed=0)
    assert len(out.extra["programs"]) == len(valid_box_sides(g, GridParams(3))) + 1
    assert out.success_probability >= 2 / 3


def test_box_programs_are_local():
    g = make_grid(3, 4)
    out_ops = []
    for s in valid_box_sides(g, GridParams(3)):
        run = box_run(g, GridParams(3), s, np.random.default_rng(s))
        out_ops.extend(op for op in run.ops if op is not ORACLE)
    assert out_ops and all(check_c_local(op).ok for op in out_ops)


def test_embedding_rejects_bad_maps():
    g = make_grid(2, 4)
    with pytest.raises(ParameterError):
        SubgridEmbedding(g, np.array([1, 1, 2, 3]))
    with pytest.raises(ParameterError):
        SubgridEmbedding(g, np.array([0, 1, 2, 3]))


def test_single_pick_rate():
    f, se = single_pick_frequency(12, 5, 20000, seed=0)
    assert f >= single_pick_bound(12, 5) - 3 * se
    assert single_pick_bound(12, 5) == pytest.approx(35 / 144)
    with pytest.raises(ParameterError):
        single_pick_frequency(2, 100, 10)


@settings(max_examples=10, deadline=None)
@given(st.integers(1, 13))
def test_diameter_search_on_starfish(target):
    g = starfish(6, 2)
    out = search_by_diameter(g, unit(g.n, target))
    assert out.success_probability >= 2 / 3


def test_classical_scan_counts():
    g = make_grid(1, 5)
    hit = classical_scan(g, unit(5, 3))
    assert hit.found_vertex == 3 and hit.cost.queries == 3
    miss = classical_scan(g, np.zeros(5))
    assert miss.answer == 0 and miss.cost.queries == 5
    assert miss.cost.steps == 4


def test_single_run_at_target_uses_one_repetition():
    run, _, _ = unique_run(make_grid(3, 4), GridParams(3))
    assert run.repetitions == 1
    run, _, _ = unique_run(make_grid(3, 8), GridParams(3))
    assert run.repetitions == math.ceil(512 ** (0.5 - 5 / 11))
