import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_topology
from nnformation.controller import Gains, control_law, coordinate_transform, formation_errors, gain_check
from nnformation.graph import Topology, augmented_laplacian, kron_identity
from nnformation.nn import DimensionError


def test_on_formation_is_zero():
    p = np.array([[1.0, 0.0], [0.0, 1.0]])
    lx, lv = np.array([2.0, 3.0]), np.array([0.5, -0.5])
    zx, zv = coordinate_transform(lx + p, np.tile(lv, (2, 1)), lx, lv, p)
    assert np.all(zx == 0) and np.all(zv == 0)


def test_transform_examples():
    zx, _ = coordinate_transform([[1.0, 2.0]], [[0.0, 0.0]], np.zeros(2), np.zeros(2), np.zeros((1, 2)))
    assert np.array_equal(zx, [[1, 2]])
    zx, _ = coordinate_transform([[4.0, 6.0]], [[0.0, 0.0]], np.array([5.0, 5.0]), np.zeros(2), [[3.0, 0.0]])
    assert np.array_equal(zx, [[-4, 1]])


def test_transform_shape_mismatch():
    with pytest.raises(DimensionError):
        coordinate_transform(np.zeros((2, 2)), np.zeros((3, 2)), np.zeros(2), np.zeros(2), np.zeros((2, 2)))


def test_errors_examples():
    one = Topology(np.zeros((1, 1)), [1.0])
    ex, _ = formation_errors([[1.0, 0.0]], [[0.0, 0.0]], one)
    assert np.array_equal(ex, [[1, 0]])
    two = Topology.from_edges(2, [[0, 1, 1]], [1, 0])
    ex, ev = formation_errors([[1.0, 0.0], [0.0, 0.0]], np.zeros((2, 2)), two)
    assert np.array_equal(ex, [[2, 0], [-1, 0]])
    assert np.all(ev == 0)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 12), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_errors_match_kronecker_product(n, d, seed):
    rng = np.random.default_rng(seed)
    t = random_topology(rng, n)
    zx, zv = rng.normal(size=(n, d)), rng.normal(size=(n, d))
    ex, ev = formation_errors(zx, zv, t)
    k = kron_identity(augmented_laplacian(t), d)
    assert np.abs(ex.ravel() - k @ zx.ravel()).max() <= 1e-12 * max(1.0, np.abs(zx).max() * n * 3)
    assert np.abs(ev.ravel() - k @ zv.ravel()).max() <= 1e-12 * max(1.0, np.abs(zv).max() * n * 3)


def test_control_examples():
    g = Gains(2.0, 3.0)
    assert np.all(control_law(np.zeros(2), np.zeros(2), np.zeros((3, 2)), np.zeros(3), g) == 0)
    u = control_law([1.0, 0.0], [0.0, 1.0], np.zeros((3, 2)), np.ones(3), g)
    assert np.array_equal(u, [-2, -3])
    w = np.array([[0.5, -0.5]])
    u = control_law(np.zeros(2), np.zeros(2), w, np.array([1.0]), g)
    assert np.array_equal(u, [-0.5, 0.5])


def test_control_stacked_matches_single(rng):
    g = Gains(4.0, 7.0)
    ex, ev = rng.normal(size=(5, 2)), rng.normal(size=(5, 2))
    w, phi = rng.normal(size=(5, 6, 2)), rng.uniform(0, 1, (5, 6))
    stacked = control_law(ex, ev, w, phi, g)
    for i in range(5):
        assert np.allclose(stacked[i], control_law(ex[i], ev[i], w[i], phi[i], g), rtol=1e-14)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_control_linear_in_errors(seed):
    rng = np.random.default_rng(seed)
    g = Gains(*rng.uniform(0.1, 10, 2))
    w, phi = rng.normal(size=(4, 2)), rng.uniform(0, 1, 4)
    e1, e2, e3, e4 = rng.normal(size=(4, 2))
    a = rng.normal()
    comp = control_law(np.zeros(2), np.zeros(2), w, phi, g)
    lhs = control_law(e1 + a * e3, e2 + a * e4, w, phi, g) - comp
    rhs = (control_law(e1, e2, w, phi, g) - comp) + a * (control_law(e3, e4, w, phi, g) - comp)
    assert np.allclose(lhs, rhs, atol=1e-10)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 8), st.integers(0, 2**32 - 1))
def test_translation_invariance(n, seed):
    rng = np.random.default_rng(seed)
    t = random_topology(rng, n)
    x, v, p = rng.normal(size=(n, 2)), rng.normal(size=(n, 2)), rng.normal(size=(n, 2))
    lx, lv = rng.normal(size=2), rng.normal(size=2)
    w, phi = rng.normal(size=(n, 3, 2)), rng.uniform(0, 1, (n, 3))
    shift = rng.normal(size=2) * 10
    g = Gains(2.0, 3.0)

    def pipeline(xx, leader):
        zx, zv = coordinate_transform(xx, v, leader, lv, p)
        ex, ev = formation_errors(zx, zv, t)
        return zx, ex, control_law(ex, ev, w, phi, g)

    for a, b in zip(pipeline(x, lx), pipeline(x + shift, lx + shift)):
        assert np.allclose(a, b, atol=1e-9)


def test_gain_check_pass():
    rep = gain_check(Gains(2.0, 3.0), 1.0)
    assert rep.passed
    assert [q.margin for q in rep.inequalities] == pytest.approx([1.0, 1.0, 4.0])


def test_gain_check_first_inequality():
    rep = gain_check(Gains(0.5, 100.0), 1.0)
    assert not rep.passed
    assert rep.first_failure is rep.inequalities[0]


def test_gain_check_second_inequality():
    rep = gain_check(Gains(100.0, 3.0), 0.5)
    assert rep.inequalities[1].bound == pytest.approx(3.5)
    assert rep.first_failure is rep.inequalities[1]


def test_gain_check_third_inequality_can_fail():
    rep = gain_check(Gains(0.5, 0.4), 1.0)
    assert not rep.inequalities[2].passed
    assert rep.inequalities[2].bound == pytest.approx(1.0)


@settings(max_examples=200, deadline=None)
@given(st.floats(1.0001, 50), st.floats(0.01, 500), st.floats(0.01, 5))
def test_first_two_conditions_imply_third(gx, gv, lam):
    rep = gain_check(Gains(gx, gv), lam)
    if rep.inequalities[0].passed and rep.inequalities[1].passed:
        assert rep.inequalities[2].passed


def test_gain_check_rejects_nonpositive_lambda():
    with pytest.raises(ValueError):
        gain_check(Gains(2.0, 3.0), 0.0)


def test_gains_must_be_positive():
    with pytest.raises(ValueError):
        Gains(0.0, 1.0)


def test_report_serialises():
    d = gain_check(Gains(2.0, 3.0), 1.0).to_dict()
    assert d["passed"] is True and len(d["inequalities"]) == 3
    assert gain_check(Gains(2.0, 3.0), 1.0).lines()[1].startswith("PASS")


@settings(max_examples=200, deadline=None)
@given(st.floats(0.01, 20), st.floats(0.01, 20), st.floats(0.01, 5), st.floats(0, 10), st.floats(0, 10))
def test_gain_check_monotone(gx, gv, lam, dx, dv):
    if gain_check(Gains(gx, gv), lam).passed:
        assert gain_check(Gains(gx + dx, gv + dv), lam).passed
