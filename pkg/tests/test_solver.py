"""Solver tests: objective, initialization, block updates, full iteration.

Each proximal block update is checked against its own optimality condition by
central finite differences — the update must be a stationary point of the
block's prox objective, computed without reusing the solver's algebra.
"""

from functools import reduce

import numpy as np
import pytest

from grdmf.exceptions import DimensionError, ParameterError, SolverError
from grdmf.linalg import truncated_svd
from grdmf.solver import (
    FactorSet,
    HyperParams,
    fit,
    init_factors,
    objective,
    update_middle,
    update_u1,
    update_v,
    update_x,
)
from helpers import block_walk, descent_instance

# ---------------------------------------------------------------------------
# HyperParams


def test_hyperparams_validation():
    good = dict(mu=1.0, theta=1.0, alpha=0.5, dims=(4, 2))
    HyperParams(**good)
    with pytest.raises(ParameterError):
        HyperParams(**{**good, "mu": -0.1})
    with pytest.raises(ParameterError):
        HyperParams(**{**good, "theta": 0.0})
    with pytest.raises(ParameterError):
        HyperParams(**{**good, "alpha": 0.0})
    with pytest.raises(ParameterError):
        HyperParams(**{**good, "alpha": 2.0})
    with pytest.raises(ParameterError):
        HyperParams(**{**good, "dims": (4,)})
    with pytest.raises(ParameterError):
        HyperParams(**{**good, "dims": (4, 2, 2, 1)})
    with pytest.raises(ParameterError):
        HyperParams(**{**good, "dims": (4, 0)})
    with pytest.raises(ParameterError):
        HyperParams(**good, p=0)
    with pytest.raises(ParameterError):
        HyperParams(**good, iters=0)


def test_hyperparams_coercion_and_fixed_prox_weight():
    hp = HyperParams(mu=1.0, theta=2.0, alpha=0.5, dims=[np.int64(4), np.int64(2)])
    assert hp.dims == (4, 2)
    assert all(isinstance(d, int) for d in hp.dims)
    assert hp.sigma == 1.0


# ---------------------------------------------------------------------------
# objective


def _objective_oracle(x, fs, y, mask, l_d, l_v, mu, theta):
    prod = fs.u1
    for mid in fs.middles:
        prod = prod @ mid
    prod = prod @ fs.v
    val = float(np.sum((y - mask * x) ** 2))
    val += theta * float(np.sum((x - prod) ** 2))
    val += 2.0 * mu * float(np.trace(fs.u1.T @ l_d @ fs.u1))
    val += 2.0 * mu * float(np.trace(fs.v @ l_v @ fs.v.T))
    return val


def test_objective_matches_termwise_oracle():
    rng = np.random.default_rng(10)
    for _ in range(10):
        m, n, k1, k2 = 6, 5, 4, 3
        y = (rng.random((m, n)) < 0.4).astype(float)
        mask = (rng.random((m, n)) < 0.8).astype(float)
        x = rng.random((m, n))
        fs = FactorSet(
            u1=rng.standard_normal((m, k1)),
            middles=[rng.standard_normal((k1, k2))],
            v=rng.standard_normal((k2, n)),
        )
        l_d = rng.random((m, m))
        l_d = 0.5 * (l_d + l_d.T)
        l_v = rng.random((n, n))
        l_v = 0.5 * (l_v + l_v.T)
        mu, theta = float(rng.uniform(0, 3)), float(rng.uniform(0.1, 3))
        got = objective(x, fs, y, mask, l_d, l_v, mu, theta)
        want = _objective_oracle(x, fs, y, mask, l_d, l_v, mu, theta)
        assert got == pytest.approx(want, rel=1e-12)


def test_objective_shape_checks():
    fs = FactorSet(u1=np.ones((3, 2)), middles=[np.ones((2, 2))], v=np.ones((2, 4)))
    y = np.zeros((3, 4))
    with pytest.raises(DimensionError):
        objective(np.zeros((3, 3)), fs, y, np.ones_like(y), np.eye(3), np.eye(4), 1, 1)
    with pytest.raises(DimensionError):
        objective(y, fs, y, np.ones_like(y), np.eye(4), np.eye(4), 1, 1)


# ---------------------------------------------------------------------------
# initialization


def test_init_product_equals_truncated_reconstruction():
    rng = np.random.default_rng(11)
    y = rng.random((9, 7))
    for dims in ((5, 3), (6, 4, 3), (5, 5)):
        fs = init_factors(y, dims)
        svd = truncated_svd(y, dims[-1])
        recon = (svd.left * svd.singular) @ svd.right.T
        assert np.allclose(fs.product(), recon, atol=1e-10)
        assert fs.u1.shape == (9, dims[0])
        assert fs.v.shape == (dims[-1], 7)
        for mid, (a, b) in zip(fs.middles, zip(dims[:-1], dims[1:])):
            assert mid.shape == (a, b)


def test_init_pads_oversized_interior_dims():
    # an interior width above the rank budget is legal; padding keeps the
    # product exact
    rng = np.random.default_rng(12)
    y = rng.random((5, 4))
    fs = init_factors(y, (6, 3))
    svd = truncated_svd(y, 3)
    recon = (svd.left * svd.singular) @ svd.right.T
    assert fs.u1.shape == (5, 6)
    assert np.allclose(fs.product(), recon, atol=1e-10)


def test_init_rejects_oversized_last_dim():
    with pytest.raises(ParameterError):
        init_factors(np.ones((5, 4)), (3, 5))


def test_init_is_deterministic():
    rng = np.random.default_rng(13)
    y = rng.random((8, 6))
    a = init_factors(y, (4, 2))
    b = init_factors(y, (4, 2))
    assert np.array_equal(a.u1, b.u1)
    assert np.array_equal(a.v, b.v)


# ---------------------------------------------------------------------------
# X update


def test_update_x_formula_and_crop():
    rng = np.random.default_rng(14)
    m, n = 5, 4
    x = rng.random((m, n))
    y = (rng.random((m, n)) < 0.5).astype(float)
    mask = (rng.random((m, n)) < 0.7).astype(float)
    product = rng.standard_normal((m, n)) * 2.0  # negative entries exercise the crop
    alpha, theta = 0.7, 1.3
    out = update_x(x, product, y, mask, alpha, theta)
    b = x + alpha * (mask * (y - mask * x))
    expected = np.maximum((b + theta * product) / (1.0 + theta), 0.0)
    assert np.array_equal(out, expected)
    assert out.min() >= 0.0


def test_update_x_fixed_point_fully_observed():
    # with every cell observed and alpha = 1 the map fixes the blend of data
    # and product in one application
    rng = np.random.default_rng(15)
    y = (rng.random((4, 3)) < 0.5).astype(float)
    product = rng.random((4, 3))
    theta = 2.0
    star = (y + theta * product) / (1.0 + theta)
    out = update_x(star, product, y, np.ones_like(y), 1.0, theta)
    assert np.allclose(out, star, atol=1e-12)


def test_update_x_validates():
    x = np.zeros((2, 2))
    with pytest.raises(ParameterError):
        update_x(x, x, x, np.ones_like(x), 0.0, 1.0)
    with pytest.raises(ParameterError):
        update_x(x, x, x, np.ones_like(x), 0.5, 0.0)
    with pytest.raises(DimensionError):
        update_x(x, np.zeros((2, 3)), x, np.ones_like(x), 0.5, 1.0)


# ---------------------------------------------------------------------------
# factor updates: each is a stationary point of its prox objective


def _directional_derivative(f, point, direction, eps=1e-6):
    return (f(point + eps * direction) - f(point - eps * direction)) / (2.0 * eps)


def test_update_u1_is_stationary():
    rng = np.random.default_rng(16)
    m, n, k = 7, 5, 3
    x = rng.random((m, n))
    tail = rng.standard_normal((k, n))
    u1_prev = rng.standard_normal((m, k))
    l_d = rng.random((m, m))
    l_d = 0.5 * (l_d + l_d.T)
    mu, theta = 0.4, 1.2

    def f(u):
        return (
            theta * np.sum((x - u @ tail) ** 2)
            + 2.0 * mu * np.trace(u.T @ l_d @ u)
            + np.sum((u - u1_prev) ** 2)
        )

    u_new = update_u1(x, u1_prev, tail, l_d, mu, theta)
    scale = 1.0 + abs(f(u_new))
    for _ in range(6):
        d = rng.standard_normal((m, k))
        d /= np.linalg.norm(d)
        assert abs(_directional_derivative(f, u_new, d)) <= 1e-5 * scale
    # and it actually improves on the tethered point
    assert f(u_new) <= f(u1_prev) + 1e-10


def test_update_v_is_stationary():
    rng = np.random.default_rng(17)
    m, n, k = 6, 5, 3
    x = rng.random((m, n))
    head = rng.standard_normal((m, k))
    v_prev = rng.standard_normal((k, n))
    l_v = rng.random((n, n))
    l_v = 0.5 * (l_v + l_v.T)
    mu, theta = 0.3, 0.9

    def f(v):
        return (
            theta * np.sum((x - head @ v) ** 2)
            + 2.0 * mu * np.trace(v @ l_v @ v.T)
            + np.sum((v - v_prev) ** 2)
        )

    v_new = update_v(x, v_prev, head, l_v, mu, theta)
    scale = 1.0 + abs(f(v_new))
    for _ in range(6):
        d = rng.standard_normal((k, n))
        d /= np.linalg.norm(d)
        assert abs(_directional_derivative(f, v_new, d)) <= 1e-5 * scale
    assert f(v_new) <= f(v_prev) + 1e-10


def test_update_middle_is_stationary():
    rng = np.random.default_rng(18)
    m, n, k1, k2 = 8, 6, 4, 3
    x = rng.random((m, n))
    left = rng.standard_normal((m, k1))  # full column rank w.p. 1
    right = rng.standard_normal((k2, n))
    f_prev = rng.standard_normal((k1, k2))
    theta = 1.1

    def f(mid):
        return theta * np.sum((x - left @ mid @ right) ** 2) + np.sum(
            (mid - f_prev) ** 2
        )

    mid_new = update_middle(x, f_prev, left, right, theta)
    scale = 1.0 + abs(f(mid_new))
    for _ in range(6):
        d = rng.standard_normal((k1, k2))
        d /= np.linalg.norm(d)
        assert abs(_directional_derivative(f, mid_new, d)) <= 1e-5 * scale
    assert f(mid_new) <= f(f_prev) + 1e-10


def test_update_middle_reports_flooring():
    rng = np.random.default_rng(19)
    left = np.zeros((6, 3))
    left[:, :2] = rng.standard_normal((6, 2))  # third column dead
    right = rng.standard_normal((2, 5))
    x = rng.random((6, 5))
    f_prev = rng.standard_normal((3, 2))
    out, floored = update_middle(x, f_prev, left, right, 1.0, return_floor_count=True)
    assert floored >= 1
    assert np.all(np.isfinite(out))


def test_update_limits():
    rng = np.random.default_rng(20)
    m, n, k = 6, 5, 3
    x = rng.random((m, n))
    tail = rng.standard_normal((k, n))
    u1_prev = rng.standard_normal((m, k))
    zeros = np.zeros((m, m))
    # theta huge, mu = 0: least-squares fit of X onto the tail dominates
    big = update_u1(x, u1_prev, tail, zeros, 0.0, 1e8)
    ls = x @ tail.T @ np.linalg.inv(tail @ tail.T)
    assert np.allclose(big, ls, atol=1e-5)
    # theta tiny, mu = 0: the prox tether pins the block to its previous value
    small = update_u1(x, u1_prev, tail, zeros, 0.0, 1e-12)
    assert np.allclose(small, u1_prev, atol=1e-9)


# ---------------------------------------------------------------------------
# per-block descent along the real iteration


def test_block_updates_never_increase_their_prox_objective():
    # F(new) + ||Delta||^2 <= F(old): the defining inequality of a unit-weight
    # proximal step, checked across whole runs of the actual iteration
    for seed in (0, 1, 2):
        y, mask, l_d, l_v, hp = descent_instance(seed)
        init = init_factors(y, hp.dims)
        for label, before, after, delta_sq in block_walk(y, mask, l_d, l_v, hp, init):
            assert after + delta_sq <= before + 1e-8, (seed, label)


# ---------------------------------------------------------------------------
# fit


def test_fit_trace_shape_and_nonnegativity():
    y, mask, l_d, l_v, hp = descent_instance(3)
    res = fit(y, mask, l_d, l_v, hp)
    assert len(res.trace.loss) == hp.iters + 1
    assert all(np.isfinite(v) for v in res.trace.loss)
    assert res.x.min() >= 0.0
    assert res.trace.wall_time > 0.0
    assert res.trace.floor_events >= 0
    assert res.x.shape == y.shape


def test_fit_trace_starts_at_initial_objective():
    y, mask, l_d, l_v, hp = descent_instance(4)
    res = fit(y, mask, l_d, l_v, hp)
    fs = init_factors(y, hp.dims)
    f0 = objective(y, fs, y, mask, l_d, l_v, hp.mu, hp.theta)
    assert res.trace.loss[0] == pytest.approx(f0, rel=1e-12)


def test_fit_monotone_on_planted_family():
    for seed in (5, 6, 7):
        y, mask, l_d, l_v, hp = descent_instance(seed)
        loss = np.array(fit(y, mask, l_d, l_v, hp).trace.loss)
        rel = np.diff(loss[1:]) / np.maximum(loss[1:-1], 1e-30)
        assert rel.max() <= 1e-9


def test_fit_is_deterministic():
    y, mask, l_d, l_v, hp = descent_instance(8)
    a = fit(y, mask, l_d, l_v, hp)
    b = fit(y, mask, l_d, l_v, hp)
    assert np.array_equal(a.x, b.x)
    assert a.trace.loss == b.trace.loss


def test_fit_respects_and_preserves_custom_init():
    y, mask, l_d, l_v, hp = descent_instance(9)
    init = init_factors(y, hp.dims)
    u1_before = init.u1.copy()
    fit(y, mask, l_d, l_v, hp, init=init)
    assert np.array_equal(init.u1, u1_before)  # caller's factors not mutated


def test_fit_validates_inputs():
    y = np.zeros((4, 3))
    hp = HyperParams(mu=1.0, theta=1.0, alpha=0.5, dims=(2, 2))
    with pytest.raises(ParameterError):
        fit(y, np.full_like(y, 0.5), np.eye(4), np.eye(3), hp)
    with pytest.raises(DimensionError):
        fit(y, np.ones((3, 4)), np.eye(4), np.eye(3), hp)
    with pytest.raises(DimensionError):
        fit(y, np.ones_like(y), np.eye(3), np.eye(3), hp)


def test_fit_wraps_iteration_failures():
    # a rank-one matrix makes the SVD init carry an exactly-zero factor
    # column; l_v = -I/2 with mu = 1 zeroes the right coefficient matrix of
    # the V solve, so the Sylvester system is singular inside iteration 1
    y = np.outer(np.ones(6), np.ones(4))
    hp = HyperParams(mu=1.0, theta=1.0, alpha=0.5, dims=(2, 2), iters=3)
    with pytest.raises(SolverError, match="iteration 1"):
        fit(y, np.ones_like(y), np.zeros((6, 6)), -0.5 * np.eye(4), hp)


# ---------------------------------------------------------------------------
# three-layer chain


def test_three_layer_extension_preserves_objective():
    y, mask, l_d, l_v, hp = descent_instance(10)
    k1, k2 = hp.dims
    two = init_factors(y, (k1, k2))
    three = FactorSet(
        u1=two.u1.copy(),
        middles=[two.middles[0].copy(), np.eye(k2)],
        v=two.v.copy(),
    )
    f2 = objective(y, two, y, mask, l_d, l_v, hp.mu, hp.theta)
    f3 = objective(y, three, y, mask, l_d, l_v, hp.mu, hp.theta)
    assert abs(f3 - f2) <= 1e-6 * (1.0 + abs(f2))


def test_three_layer_fit_runs_and_descends():
    y, mask, l_d, l_v, hp2 = descent_instance(11)
    k1, k2 = hp2.dims
    hp3 = HyperParams(
        mu=hp2.mu, theta=hp2.theta, alpha=hp2.alpha, dims=(k1, k2, k2),
        p=hp2.p, iters=hp2.iters,
    )
    res = fit(y, mask, l_d, l_v, hp3)
    loss = np.array(res.trace.loss)
    assert np.all(np.isfinite(loss))
    rel = np.diff(loss[1:]) / np.maximum(loss[1:-1], 1e-30)
    assert rel.max() <= 1e-9
    assert res.x.min() >= 0.0
    assert len(res.factors.middles) == 2


def test_factorset_product_chains_left_to_right():
    rng = np.random.default_rng(21)
    u1 = rng.standard_normal((5, 4))
    m1 = rng.standard_normal((4, 3))
    m2 = rng.standard_normal((3, 3))
    v = rng.standard_normal((3, 6))
    fs = FactorSet(u1=u1, middles=[m1, m2], v=v)
    assert np.allclose(fs.product(), reduce(np.matmul, [u1, m1, m2, v]))
    cp = fs.copy()
    cp.u1[0, 0] += 1.0
    assert fs.u1[0, 0] != cp.u1[0, 0]
