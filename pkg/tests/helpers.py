"""Shared instance generators and brute-force oracles for the test suite.

Everything here is deliberately independent of the library internals: the
oracles re-derive each quantity from its definition (pairwise loops, Kronecker
lifts, explicit products) so that agreement with the fast implementations is
evidence, not tautology.
"""

from functools import reduce

import numpy as np

from grdmf.graphs import build_laplacian
from grdmf.solver import (
    FactorSet,
    HyperParams,
    objective,
    update_middle,
    update_u1,
    update_v,
    update_x,
)
from grdmf.synthetic import make_synthetic_problem


# ---------------------------------------------------------------------------
# planted solver instances
#
# The descent suite is a fixed family of planted low-rank problems. The graph
# weight is kept in [0.05, 0.2]: strong enough to anchor the factor blocks,
# weak enough that the relaxed completion step cannot drag the recorded
# objective back up after the initial plunge (the X step's fixed point solves
# an alpha-reweighted data term, so monotonicity of the trace is a property of
# the instance family, not of the iteration in general).


def descent_instance(seed: int):
    """One planted solver instance: returns (y, mask, l_d, l_v, hp).

    ``y`` already has the hidden cells zeroed, matching what ``fit`` expects.
    """
    rng = np.random.default_rng(seed)
    m = int(rng.integers(8, 21))
    n = int(rng.integers(5, 13))
    rank = int(rng.integers(2, 4))
    pct = float(rng.uniform(60.0, 80.0))
    prob = make_synthetic_problem(m=m, n=n, rank=rank, seed=seed, percentile=pct)
    y = prob.dataset.y
    k2 = min(rank, min(m, n))
    k1 = min(k2 + 2, min(m, n))
    mask = (rng.random(y.shape) >= rng.uniform(0.05, 0.15)).astype(float)
    p = min(3, n - 1)
    l_d = build_laplacian(list(prob.similarities.drug.values()), p)
    l_v = build_laplacian(list(prob.similarities.virus.values()), p)
    mu = float(rng.uniform(0.05, 0.2))
    theta = float(rng.uniform(0.8, 1.5))
    hp = HyperParams(mu=mu, theta=theta, alpha=0.5, dims=(k1, k2), p=p, iters=10)
    return y * mask, mask, l_d, l_v, hp


def block_walk(y, mask, l_d, l_v, hp, init):
    """Re-run the block iteration by hand, recording every factor update.

    Yields one record per U1/middle/V update: (label, f_before, f_after,
    delta_sq) where delta_sq is the squared Frobenius norm of the block's
    move and the objective values bracket that single update. The X update
    happens between iterations exactly as in ``fit`` but is not a record: the
    descent inequality under test is the one the proximal factor steps obey.
    """
    u1 = init.u1.copy()
    middles = [m.copy() for m in init.middles]
    v = init.v.copy()
    x = y.copy()

    def f(x_, u1_, middles_, v_):
        fs = FactorSet(u1=u1_, middles=list(middles_), v=v_)
        return objective(x_, fs, y, mask, l_d, l_v, hp.mu, hp.theta)

    for _ in range(hp.iters):
        product = reduce(np.matmul, [u1, *middles, v])
        x = update_x(x, product, y, mask, hp.alpha, hp.theta)

        before = f(x, u1, middles, v)
        tail = reduce(np.matmul, [*middles, v])
        u1_new = update_u1(x, u1, tail, l_d, hp.mu, hp.theta)
        after = f(x, u1_new, middles, v)
        yield "u1", before, after, float(np.sum((u1_new - u1) ** 2))
        u1 = u1_new

        for i in range(len(middles)):
            before = f(x, u1, middles, v)
            left = reduce(np.matmul, [u1, *middles[:i]])
            right = reduce(np.matmul, [*middles[i + 1 :], v])
            mid_new = update_middle(x, middles[i], left, right, hp.theta)
            trial = list(middles)
            trial[i] = mid_new
            after = f(x, u1, trial, v)
            yield (
                f"middle{i}",
                before,
                after,
                float(np.sum((mid_new - middles[i]) ** 2)),
            )
            middles[i] = mid_new

        before = f(x, u1, middles, v)
        head = reduce(np.matmul, [u1, *middles])
        v_new = update_v(x, v, head, l_v, hp.mu, hp.theta)
        after = f(x, u1, middles, v_new)
        yield "v", before, after, float(np.sum((v_new - v) ** 2))
        v = v_new


# ---------------------------------------------------------------------------
# brute-force metric oracles


def auc_oracle(scores, labels) -> float:
    """Pairwise Mann-Whitney count: ties between classes count one half."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=float)
    pos = scores[labels == 1.0]
    neg = scores[labels == 0.0]
    wins = 0.0
    for p in pos:
        for q in neg:
            if p > q:
                wins += 1.0
            elif p == q:
                wins += 0.5
    return wins / (pos.size * neg.size)


def aupr_oracle(scores, labels) -> float:
    """Average precision by explicit walk down the ranking (stable ties)."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=float)
    order = np.argsort(-scores, kind="stable")
    hits = labels[order]
    seen = 0.0
    precisions = []
    for rank, h in enumerate(hits, start=1):
        seen += h
        if h == 1.0:
            precisions.append(seen / rank)
    return float(np.mean(precisions))


def topk_oracle(scores, labels, k: int) -> tuple[float, float]:
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=float)
    k = min(k, scores.size)
    order = np.argsort(-scores, kind="stable")[:k]
    hits = float(labels[order].sum())
    return hits / k, hits / float(labels.sum())


def random_scores_labels(rng, size: int, quantize: bool):
    """A random scored binary vector with both classes present.

    ``quantize=True`` snaps scores to a coarse grid so ties actually occur.
    """
    scores = rng.random(size)
    if quantize:
        scores = np.round(scores * 5.0) / 5.0
    labels = (rng.random(size) < 0.4).astype(float)
    if labels.sum() == 0:
        labels[int(rng.integers(size))] = 1.0
    if labels.sum() == size:
        labels[int(rng.integers(size))] = 0.0
    return scores, labels


# ---------------------------------------------------------------------------
# dense Sylvester oracle


def kron_solve(a, b, c) -> np.ndarray:
    """Solve a @ x + x @ b = c by lifting to the Kronecker normal equations."""
    n = a.shape[0]
    k = b.shape[0]
    big = np.kron(np.eye(k), a) + np.kron(b.T, np.eye(n))
    return np.linalg.solve(big, c.flatten(order="F")).reshape((n, k), order="F")


def random_spd(rng, size: int, lo: float = 0.5, hi: float = 2.0) -> np.ndarray:
    """Symmetric positive-definite matrix with spectrum in [lo, hi]."""
    q, _ = np.linalg.qr(rng.standard_normal((size, size)))
    values = rng.uniform(lo, hi, size)
    return (q * values) @ q.T
