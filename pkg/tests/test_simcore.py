import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spatialsearch.graph import make_grid
from spatialsearch.simcore import (ORACLE, SWAP, Basis, BasisState, CostCounters, DimensionMismatch, LocalityViolation,
                                   LocalStep, NonUnitaryBlock, OverlappingBlocks, QuantumState, answer_probability,
                                   apply_oracle, apply_step, count_ops, diagonal_step, dump_state, init_state,
                                   inverse_ops, l2_distance_sq, load_state, pair_step, rotation, run_ops,
                                   success_probability)

H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)


@pytest.fixture
def path3():
    return Basis(make_grid(1, 3))


def test_initial_state(path3):
    s = init_state(path3, (1, 0, 0))
    assert s.norm_sq() == 1 and s.support_size() == 1
    assert success_probability(s, lambda k: k == BasisState(1, 0, 0)) == 1
    assert l2_distance_sq(s, init_state(path3, (1, 0, 0))) == 0


def test_identity_step_counts(path3):
    s = init_state(path3, (2, 0, 0))
    c = CostCounters()
    apply_step(s, LocalStep.identity(path3), c)
    assert c.steps == 1 and s[(2, 0, 0)] == 1


def test_edge_hadamard_splits(path3):
    step = LocalStep.from_blocks(path3, [([(1, 0, 0), (2, 0, 0)], H)])
    s = apply_step(init_state(path3, (1, 0, 0)), step)
    assert abs(s[(1, 0, 0)]) == pytest.approx(abs(s[(2, 0, 0)]))
    assert s.norm_sq() == pytest.approx(1)


def test_step_then_inverse(path3):
    s = init_state(path3, (1, 0, 0))
    ref = s.copy()
    step = LocalStep.from_blocks(path3, [([(1, 0, 0), (2, 0, 0)], rotation(0.3))])
    apply_step(s, step)
    apply_step(s, step.inverse())
    assert l2_distance_sq(s, ref) < 1e-24


def test_non_adjacent_block_rejected(path3):
    with pytest.raises(LocalityViolation):
        LocalStep.from_blocks(path3, [([(1, 0, 0), (3, 0, 0)], SWAP)])


def test_three_vertex_block_rejected(path3):
    with pytest.raises(LocalityViolation):
        LocalStep.from_blocks(path3, [([(1, 0, 0), (2, 0, 0), (3, 0, 0)], np.eye(3))])


def test_non_unitary_rejected(path3):
    with pytest.raises(NonUnitaryBlock):
        LocalStep.from_blocks(path3, [([(1, 0, 0), (2, 0, 0)], np.ones((2, 2)))])


def test_overlap_rejected(path3):
    with pytest.raises(OverlappingBlocks):
        LocalStep.from_blocks(path3, [([(1, 0, 0), (2, 0, 0)], SWAP), ([(2, 0, 0)], np.eye(1))])


def test_shape_mismatch_rejected(path3):
    with pytest.raises(DimensionMismatch):
        LocalStep.from_blocks(path3, [([(1, 0, 0), (2, 0, 0)], np.eye(3))])


def test_oracle_examples():
    b = Basis(make_grid(1, 4))
    x = np.array([0, 0, 1, 0])
    s = init_state(b, (3, 0, 0))
    apply_oracle(s, x)
    assert s[(3, 1, 0)] == 1
    apply_oracle(s, x)
    assert s[(3, 0, 0)] == 1
    t = init_state(b, (3, 0, 0))
    apply_oracle(t, np.zeros(4))
    assert t[(3, 0, 0)] == 1
    with pytest.raises(DimensionMismatch):
        apply_oracle(t, np.zeros(3))


def test_success_probability_predicates():
    g = make_grid(2, 3)
    b = Basis(g)
    idx = [b.add((v, 0, 0)) for v in range(1, 10)]
    s = QuantumState(b)
    s._sync()
    s.amps[idx] = 1 / 3
    assert success_probability(s, lambda k: True) == pytest.approx(1)
    assert success_probability(s, lambda k: False) == 0
    assert success_probability(s, lambda k: k.vertex == 5) == pytest.approx(1 / 9)


def test_distance_examples(path3):
    a = init_state(path3, (1, 0, 0))
    b = init_state(path3, (2, 0, 0))
    assert l2_distance_sq(a, b) == pytest.approx(2)
    c = a.copy()
    c.amps *= -1
    assert l2_distance_sq(a, c) == pytest.approx(4)


def test_inverse_examples(path3):
    ident = LocalStep.identity(path3)
    assert inverse_ops([ident])[0].block_count == 0
    r = LocalStep.from_blocks(path3, [([(1, 0, 0), (2, 0, 0)], rotation(math.cos(0.4)))])
    (inv,) = inverse_ops([r])
    assert np.allclose(inv.blocks()[0][1], rotation(math.cos(0.4)).T)  # rotation by -theta
    flip = diagonal_step(path3, [path3.lookup((1, 0, 0))], -1)
    assert np.allclose(flip.inverse().blocks()[0][1], flip.blocks()[0][1])
    assert inverse_ops([r, ORACLE, flip]) == [flip.inverse(), ORACLE, r.inverse()]


def test_run_ops_with_query_schedule(path3):
    s = init_state(path3, (2, 0, 0))
    seen = []
    nxt = run_ops(s, [ORACLE, ORACLE, ORACLE], lambda t: np.array([0, t % 2, 0]), None,
                  lambda t, st: seen.append((t, answer_probability(st))))
    assert nxt == 4
    assert seen == [(1, 1.0), (2, 1.0), (3, 0.0)]
    assert count_ops([ORACLE, LocalStep.identity(path3)]).snapshot() == (1, 1)


def test_dump_load_round_trip(path3):
    s = apply_step(init_state(path3, (1, 0, 0)), LocalStep.from_blocks(path3, [([(1, 0, 0), (2, 0, 0)], H)]))
    text = dump_state(s)
    assert text.splitlines()[0].startswith("1 0 0 0.70710678118654")
    t = load_state(Basis(path3.graph), text)
    assert dump_state(t) == text


@settings(max_examples=40)
@given(st.floats(0, 2 * math.pi), st.floats(0, 2 * math.pi), st.floats(0, math.pi / 2))
def test_random_edge_unitaries_preserve_norm(a, b, theta):
    basis = Basis(make_grid(1, 3))
    u = np.array([[math.cos(theta), -np.exp(1j * b) * math.sin(theta)],
                  [np.exp(1j * a) * math.sin(theta), np.exp(1j * (a + b)) * math.cos(theta)]])
    step = pair_step(basis, [basis.add((1, 0, 0))], [basis.add((2, 1, 0))], u)
    s = init_state(basis, (1, 0, 0))
    apply_step(s, step)
    assert s.norm_sq() == pytest.approx(1, abs=1e-12)
    apply_step(s, step.inverse())
    assert abs(s[(1, 0, 0)] - 1) < 1e-12
