"""Tests for the numeric foundations: links, Fisher matrices, solvers."""

import numpy as np
import pytest

from logbandit.core import (
    ArmSet,
    DesignWeights,
    fisher_counts,
    fisher_weighted,
    g_value,
    h_value,
    inv_quad,
    inv_quad_many,
    mu,
    mudot,
    spd_solve,
)
from logbandit.errors import DimensionMismatch, Singular
from logbandit.glm import PullLog


def test_mu_basic_values():
    assert mu(0.0) == 0.5
    assert 1.0 - 1e-13 < mu(30.0) <= 1.0
    assert mu(2.399) == pytest.approx(0.9167510167, abs=1e-9)
    # monotone increasing on a grid
    z = np.linspace(-30, 30, 1001)
    assert np.all(np.diff(mu(z)) > 0)


def test_mudot_basic_values():
    assert mudot(0.0) == 0.25
    assert mudot(3.7) == mudot(-3.7)
    assert mudot(2.399) == pytest.approx(0.0763185901, abs=1e-9)


def test_mudot_bounded_by_quarter():
    z = np.linspace(-50, 50, 10**4)
    v = mudot(z)
    assert np.all(v <= 0.25)
    assert np.all(v[np.abs(z) > 1e-6] < 0.25)


def test_mudot_stable_in_far_tail():
    # expit(z)*expit(-z) keeps relative accuracy where 1-mu cancels
    assert mudot(40.0) == pytest.approx(np.exp(-40.0), rel=1e-6)
    assert mudot(700.0) > 0.0


def test_armset_validation():
    with pytest.raises(ValueError):
        ArmSet(np.zeros((0, 2)))
    with pytest.raises(ValueError):
        ArmSet([[1.0, np.nan]])
    with pytest.raises(ValueError):
        ArmSet([[1.1, 0.0]])
    arms = ArmSet([[1.0, 0.0], [0.0, 0.5]])
    assert arms.d == 2 and len(arms) == 2
    assert arms.norms[1] == pytest.approx(0.5)
    with pytest.raises(ValueError):
        arms.vectors[0, 0] = 9.0  # immutable


def test_design_weights_validation():
    w = DesignWeights([0.25, 0.75, 0.0])
    assert np.array_equal(w.support, [0, 1])
    with pytest.raises(ValueError):
        DesignWeights([0.5, 0.6])
    with pytest.raises(ValueError):
        DesignWeights([-0.1, 1.1])
    pm = DesignWeights.point_mass(4, 2)
    assert pm.weights[2] == 1.0 and pm.support.tolist() == [2]


def test_fisher_weighted_examples():
    arms = ArmSet([[1.0, 0.0]])
    h = fisher_weighted(arms, DesignWeights([1.0]), np.zeros(2))
    assert h == pytest.approx(np.array([[0.25, 0.0], [0.0, 0.0]]))

    basis = ArmSet(np.eye(2))
    h = fisher_weighted(basis, DesignWeights([0.5, 0.5]), np.zeros(2))
    assert h == pytest.approx(0.125 * np.eye(2))

    h = fisher_weighted(basis, DesignWeights([0.3, 0.7]), np.array([2.0, 0.0]))
    assert h == pytest.approx(np.diag([0.3 * mudot(2.0), 0.7 * 0.25]))

    with pytest.raises(DimensionMismatch):
        fisher_weighted(basis, DesignWeights([0.5, 0.5]), np.zeros(3))


def test_fisher_weighted_linear_in_weights():
    rng = np.random.default_rng(7)
    arms = ArmSet(rng.normal(size=(6, 3)) / 4.0)
    theta = rng.normal(size=3)
    w1 = rng.dirichlet(np.ones(6))
    w2 = rng.dirichlet(np.ones(6))
    a = 0.3
    lhs = fisher_weighted(arms, DesignWeights(a * w1 + (1 - a) * w2), theta)
    rhs = a * fisher_weighted(arms, DesignWeights(w1), theta) + (
        1 - a
    ) * fisher_weighted(arms, DesignWeights(w2), theta)
    assert lhs == pytest.approx(rhs, abs=1e-12)


def test_fisher_counts_examples():
    one = ArmSet([[1.0]])
    log = PullLog.from_counts([10], [4])
    assert fisher_counts(one, log, np.zeros(1))[0, 0] == pytest.approx(2.5)

    basis = ArmSet(np.eye(2))
    log = PullLog.from_counts([4, 6], [0, 0])
    h = fisher_counts(basis, log, np.zeros(2))
    assert h == pytest.approx(np.diag([1.0, 1.5]))

    # an arm with zero pulls contributes nothing
    three = ArmSet(np.eye(3))
    log = PullLog.from_counts([4, 6, 0], [0, 0, 0])
    h3 = fisher_counts(three, log, np.zeros(3))
    assert h3[2, 2] == 0.0


def test_inv_quad_examples():
    assert inv_quad(np.eye(3), np.array([0.0, 1.0, 0.0])) == pytest.approx(1.0)
    x = np.array([0.6, 0.8])
    assert inv_quad(2.0 * np.eye(2), x) == pytest.approx(0.5)
    assert inv_quad(np.diag([0.25, 0.5]), np.ones(2)) == pytest.approx(6.0)
    with pytest.raises(DimensionMismatch):
        inv_quad(np.eye(2), np.ones(3))


def test_inv_quad_singular_policy():
    a = np.diag([1.0, 0.0])
    with pytest.raises(Singular):
        inv_quad(a, np.array([0.0, 1.0]))
    # a ridge makes the same evaluation finite
    v = inv_quad(a, np.array([0.0, 1.0]), ridge=1e-6)
    assert v == pytest.approx(1e6, rel=1e-6)


def test_inv_quad_matches_explicit_inverse():
    rng = np.random.default_rng(11)
    for _ in range(20):
        d = int(rng.integers(1, 7))
        m = rng.normal(size=(d, d))
        a = m @ m.T + 0.1 * np.eye(d)
        x = rng.normal(size=d)
        expect = float(x @ np.linalg.inv(a) @ x)
        assert inv_quad(a, x) == pytest.approx(expect, rel=1e-9)
        many = inv_quad_many(a, np.vstack([x, 2 * x]))
        assert many[1] == pytest.approx(4 * many[0], rel=1e-9)


def test_spd_solve_clips_rounding_noise():
    # a PSD matrix with a tiny negative eigenvalue from rounding still solves
    q = np.array([[1.0, 1.0], [1.0, 1.0 + 1e-15]])
    sol = spd_solve(q, np.ones(2), ridge=1e-9)
    assert np.all(np.isfinite(sol))


def test_g_value_examples():
    basis = ArmSet(np.eye(2))
    uni = DesignWeights([0.5, 0.5])
    val = g_value(basis, [0, 1], uni, np.zeros(2))
    assert val == pytest.approx(8.0)

    one = ArmSet([[1.0, 0.0]])
    v1 = g_value(one, [0], DesignWeights([1.0]), np.zeros(2), ridge=1e-12)
    assert v1 == pytest.approx(4.0, rel=1e-6)


def test_g_value_brute_force_d2():
    # at theta=0 the optimum over the simplex on an orthonormal basis is 4d
    basis = ArmSet(np.eye(2))
    grid = np.arange(0.05, 1.0, 0.05)
    best = min(
        g_value(basis, [0, 1], DesignWeights([a, 1 - a]), np.zeros(2))
        for a in grid
    )
    assert best == pytest.approx(8.0, rel=1e-9)


def test_h_value_examples():
    basis = ArmSet(np.eye(2))
    uni = DesignWeights([0.5, 0.5])
    g = g_value(basis, [0, 1], uni, np.zeros(2))
    h = h_value(basis, [0, 1], uni, np.zeros(2))
    assert h == pytest.approx(g / 16.0)


def test_g_h_value_midpoint_convexity():
    rng = np.random.default_rng(23)
    raw = rng.normal(size=(7, 3))
    arms = ArmSet(raw / np.linalg.norm(raw, axis=1).max())
    theta = rng.normal(size=3) * 0.5
    active = np.arange(7)
    for _ in range(20):
        w1 = DesignWeights(rng.dirichlet(np.ones(7)))
        w2 = DesignWeights(rng.dirichlet(np.ones(7)))
        mid = DesignWeights(0.5 * (w1.weights + w2.weights))
        for fn in (g_value, h_value):
            lhs = fn(arms, active, mid, theta)
            rhs = 0.5 * fn(arms, active, w1, theta) + 0.5 * fn(arms, active, w2, theta)
            assert lhs <= rhs + 1e-9
