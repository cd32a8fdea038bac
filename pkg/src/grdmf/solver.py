"""Deep matrix factorization with multi-graph regularization.

The model completes a binary association matrix Y (drugs x viruses) through a
relaxed completion variable X tied to a deep nonnegative-rank factorization
U1 @ U2 @ ... @ V. The objective is

    F(X, U1, ..., V) = ||Y - M.X||_F^2 + theta * ||X - U1...V||_F^2
                       + 2*mu*tr(U1.T @ L_d @ U1) + 2*mu*tr(V @ L_v @ V.T)

with X >= 0, where M is the binary observation mask (``.`` is the Hadamard
product) and L_d, L_v are graph Laplacians over drugs and viruses. Each outer
iteration performs one proximal block update per variable: a hybrid
gradient/proximal step on X followed by exact Sylvester solves for U1, the
middle factors and V, each tethered to its previous value by a unit proximal
weight. X stays feasible by cropping at zero.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from functools import reduce
from typing import Optional, Sequence

import numpy as np

from .exceptions import DimensionError, ParameterError, SolverError
from .linalg import _as_matrix, solve_sylvester_sym, spd_inverse, truncated_svd

__all__ = [
    "HyperParams",
    "FactorSet",
    "SolveTrace",
    "FitResult",
    "objective",
    "init_factors",
    "update_x",
    "update_u1",
    "update_middle",
    "update_v",
    "fit",
]


@dataclass(frozen=True)
class HyperParams:
    """Solver hyperparameters.

    mu     -- graph regularization weight, >= 0
    theta  -- coupling weight between X and the factor product, > 0
    alpha  -- relaxation step for the X update, in the open interval (0, 2)
    dims   -- inner factor dimensions (k1, k2) or (k1, k2, k3)
    p      -- nearest-neighbour count used when sparsifying similarity graphs
    iters  -- number of outer iterations
    sigma  -- proximal weight; fixed at 1 and kept visible for traceability
    """

    mu: float
    theta: float
    alpha: float
    dims: tuple[int, ...]
    p: int = 2
    iters: int = 10
    sigma: float = field(default=1.0, init=False)

    def __post_init__(self):
        if self.mu < 0:
            raise ParameterError(f"mu must be >= 0, got {self.mu}")
        if self.theta <= 0:
            raise ParameterError(f"theta must be > 0, got {self.theta}")
        if not 0.0 < self.alpha < 2.0:
            raise ParameterError(f"alpha must lie in (0, 2), got {self.alpha}")
        dims = tuple(int(d) for d in self.dims)
        if len(dims) not in (2, 3):
            raise ParameterError(f"dims must have 2 or 3 entries, got {self.dims}")
        if any(d < 1 for d in dims):
            raise ParameterError(f"factor dimensions must be >= 1, got {self.dims}")
        object.__setattr__(self, "dims", dims)
        if int(self.p) < 1:
            raise ParameterError(f"p must be >= 1, got {self.p}")
        object.__setattr__(self, "p", int(self.p))
        if int(self.iters) < 1:
            raise ParameterError(f"iters must be >= 1, got {self.iters}")
        object.__setattr__(self, "iters", int(self.iters))


@dataclass
class FactorSet:
    """The factor matrices U1 (m, k1), middles [(k1, k2), ...], V (k_last, n)."""

    u1: np.ndarray
    middles: list[np.ndarray]
    v: np.ndarray

    def product(self) -> np.ndarray:
        """Full product U1 @ middles... @ V."""
        return reduce(np.matmul, [self.u1, *self.middles, self.v])

    def copy(self) -> "FactorSet":
        return FactorSet(
            u1=self.u1.copy(),
            middles=[m.copy() for m in self.middles],
            v=self.v.copy(),
        )


@dataclass
class SolveTrace:
    """Per-fit diagnostics: objective values, flooring count, wall time."""

    loss: list[float]
    floor_events: int
    wall_time: float


@dataclass
class FitResult:
    x: np.ndarray
    factors: FactorSet
    trace: SolveTrace


def objective(x, factors: FactorSet, y, mask, l_d, l_v, mu: float, theta: float) -> float:
    """Evaluate F at the given point; see the module docstring for the formula."""
    x = _as_matrix(x, "x")
    y = _as_matrix(y, "y")
    mask = _as_matrix(mask, "mask")
    l_d = _as_matrix(l_d, "l_d")
    l_v = _as_matrix(l_v, "l_v")
    if x.shape != y.shape or mask.shape != y.shape:
        raise DimensionError(
            f"x {x.shape}, y {y.shape} and mask {mask.shape} must share one shape"
        )
    prod = factors.product()
    if prod.shape != y.shape:
        raise DimensionError(
            f"factor product has shape {prod.shape}, expected {y.shape}"
        )
    if l_d.shape != (y.shape[0], y.shape[0]):
        raise DimensionError(f"l_d must be {y.shape[0]}x{y.shape[0]}, got {l_d.shape}")
    if l_v.shape != (y.shape[1], y.shape[1]):
        raise DimensionError(f"l_v must be {y.shape[1]}x{y.shape[1]}, got {l_v.shape}")
    data = float(np.sum((y - mask * x) ** 2))
    couple = theta * float(np.sum((x - prod) ** 2))
    reg = 2.0 * mu * (
        float(np.vdot(factors.u1, l_d @ factors.u1))
        + float(np.vdot(factors.v, factors.v @ l_v))
    )
    return data + couple + reg


def _factor_pair(a: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Split ``a`` (rows, cols) into (rows, k) @ (k, cols) via a truncated SVD.

    When k exceeds min(rows, cols) the pair is zero-padded, which keeps the
    product exactly equal to ``a``.
    """
    r = min(k, *a.shape)
    svd = truncated_svd(a, r)
    root = np.sqrt(svd.singular)
    left = svd.left * root
    rest = root[:, None] * svd.right.T
    if r < k:
        left = np.pad(left, ((0, 0), (0, k - r)))
        rest = np.pad(rest, ((0, k - r), (0, 0)))
    return left, rest


def init_factors(y, dims: Sequence[int]) -> FactorSet:
    """SVD-based initialization of the factor chain.

    A rank-k_last truncated SVD of Y supplies the outermost split
    A = U @ sqrt(S), V0 = sqrt(S) @ Vt; the left block A is then split
    recursively, left to right, one truncated SVD per remaining dimension.
    For non-increasing dims the telescoped product reproduces the rank-k_last
    reconstruction of Y exactly.
    """
    y = _as_matrix(y, "y")
    m, n = y.shape
    dims = tuple(int(d) for d in dims)
    if len(dims) < 2:
        raise ParameterError(f"need at least two factor dimensions, got {dims}")
    if any(d < 1 for d in dims):
        raise ParameterError(f"factor dimensions must be >= 1, got {dims}")
    k_last = dims[-1]
    if k_last > min(m, n):
        raise ParameterError(
            f"last factor dimension {k_last} exceeds min(m, n) = {min(m, n)}"
        )
    svd = truncated_svd(y, k_last)
    root = np.sqrt(svd.singular)
    block = svd.left * root          # (m, k_last)
    v = root[:, None] * svd.right.T  # (k_last, n)
    chain: list[np.ndarray] = []
    for k in dims[:-1]:
        head, block = _factor_pair(block, k)
        chain.append(head)
    chain.append(block)
    return FactorSet(u1=chain[0], middles=chain[1:], v=v)


def update_x(x, product, y, mask, alpha: float, theta: float) -> np.ndarray:
    """Hybrid gradient/proximal update of the completion variable.

    B = X + alpha * (M . (Y - M . X)), then the proximal step
    X+ = max((B + theta * P) / (1 + theta), 0) with P the factor product.
    """
    x = _as_matrix(x, "x")
    product = _as_matrix(product, "product")
    y = _as_matrix(y, "y")
    mask = _as_matrix(mask, "mask")
    if not (x.shape == product.shape == y.shape == mask.shape):
        raise DimensionError("x, product, y and mask must share one shape")
    if not 0.0 < alpha < 2.0:
        raise ParameterError(f"alpha must lie in (0, 2), got {alpha}")
    if theta <= 0:
        raise ParameterError(f"theta must be > 0, got {theta}")
    b = x + alpha * (mask * (y - mask * x))
    return np.maximum((b + theta * product) / (1.0 + theta), 0.0)


def update_u1(x, u1_prev, tail_product, l_d, mu: float, theta: float) -> np.ndarray:
    """Proximal update of the leftmost factor.

    Solves (2*mu*L_d + I) @ U1 + U1 @ (theta*T@T.T) = theta*X@T.T + U1_prev
    where T is the product of every factor to the right of U1.
    """
    x = _as_matrix(x, "x")
    u1_prev = _as_matrix(u1_prev, "u1_prev")
    tail = _as_matrix(tail_product, "tail_product")
    l_d = _as_matrix(l_d, "l_d")
    m = x.shape[0]
    if u1_prev.shape[0] != m or tail.shape != (u1_prev.shape[1], x.shape[1]):
        raise DimensionError(
            f"inconsistent shapes: x {x.shape}, u1_prev {u1_prev.shape}, tail {tail.shape}"
        )
    a = 2.0 * mu * l_d + np.eye(m)
    b = theta * (tail @ tail.T)
    b = 0.5 * (b + b.T)
    c = theta * (x @ tail.T) + u1_prev
    return solve_sylvester_sym(a, b, c)


def update_middle(
    x,
    factor_prev,
    left_product,
    right_product,
    theta: float,
    return_floor_count: bool = False,
):
    """Proximal update of one middle factor.

    With G = (L.T @ L)^-1 for the fresh left product L and R the stale right
    product, solves G @ F + F @ (theta*R@R.T) = theta*G@L.T@X@R.T + G@F_prev.
    Near-singular L.T @ L is handled by eigenvalue flooring inside
    :func:`spd_inverse`; pass ``return_floor_count=True`` to observe it.
    """
    x = _as_matrix(x, "x")
    factor_prev = _as_matrix(factor_prev, "factor_prev")
    left = _as_matrix(left_product, "left_product")
    right = _as_matrix(right_product, "right_product")
    if left.shape != (x.shape[0], factor_prev.shape[0]):
        raise DimensionError(
            f"left product must be {(x.shape[0], factor_prev.shape[0])}, got {left.shape}"
        )
    if right.shape != (factor_prev.shape[1], x.shape[1]):
        raise DimensionError(
            f"right product must be {(factor_prev.shape[1], x.shape[1])}, got {right.shape}"
        )
    g, floored = spd_inverse(left.T @ left, return_floor_count=True)
    b = theta * (right @ right.T)
    b = 0.5 * (b + b.T)
    c = theta * (g @ (left.T @ x) @ right.T) + g @ factor_prev
    out = solve_sylvester_sym(g, b, c)
    if return_floor_count:
        return out, floored
    return out


def update_v(x, v_prev, head_product, l_v, mu: float, theta: float) -> np.ndarray:
    """Proximal update of the rightmost factor.

    Solves (theta*H.T@H) @ V + V @ (2*mu*L_v + I) = theta*H.T@X + V_prev
    where H is the product of every factor to the left of V.
    """
    x = _as_matrix(x, "x")
    v_prev = _as_matrix(v_prev, "v_prev")
    head = _as_matrix(head_product, "head_product")
    l_v = _as_matrix(l_v, "l_v")
    n = x.shape[1]
    if v_prev.shape[1] != n or head.shape != (x.shape[0], v_prev.shape[0]):
        raise DimensionError(
            f"inconsistent shapes: x {x.shape}, v_prev {v_prev.shape}, head {head.shape}"
        )
    a = theta * (head.T @ head)
    a = 0.5 * (a + a.T)
    b = 2.0 * mu * l_v + np.eye(n)
    c = theta * (head.T @ x) + v_prev
    return solve_sylvester_sym(a, b, c)


def fit(y, mask, l_d, l_v, hp: HyperParams, init: Optional[FactorSet] = None) -> FitResult:
    """Run the block-coordinate solver for ``hp.iters`` outer iterations.

    y     -- (m, n) observed association matrix, hidden cells zeroed
    mask  -- (m, n) binary observation mask, zeros where cells are hidden
    l_d   -- (m, m) summed drug-side graph Laplacian
    l_v   -- (n, n) summed virus-side graph Laplacian
    hp    -- hyperparameters; ``hp.dims`` sets the factor chain depth
    init  -- optional starting factors; defaults to the SVD initialization

    X starts at Y; each iteration updates X, then U1, then the middle factors
    left to right, then V, every block consuming the freshest values of the
    others. The returned trace holds ``iters + 1`` objective values (the
    initial point included), the count of eigenvalue-flooring events and the
    wall-clock time.
    """
    start = time.perf_counter()
    y = _as_matrix(y, "y")
    mask = _as_matrix(mask, "mask")
    if mask.shape != y.shape:
        raise DimensionError(f"mask shape {mask.shape} != y shape {y.shape}")
    if not np.isin(mask, (0.0, 1.0)).all():
        raise ParameterError("mask must be binary (0/1 entries)")
    l_d = _as_matrix(l_d, "l_d")
    l_v = _as_matrix(l_v, "l_v")
    m, n = y.shape
    if l_d.shape != (m, m):
        raise DimensionError(f"l_d must be {m}x{m}, got {l_d.shape}")
    if l_v.shape != (n, n):
        raise DimensionError(f"l_v must be {n}x{n}, got {l_v.shape}")

    if init is None:
        factors = init_factors(y, hp.dims)
    else:
        factors = init.copy()
    u1, middles, v = factors.u1, factors.middles, factors.v
    x = y.copy()

    loss = [objective(x, factors, y, mask, l_d, l_v, hp.mu, hp.theta)]
    floor_events = 0
    for it in range(1, hp.iters + 1):
        try:
            product = reduce(np.matmul, [u1, *middles, v])
            x = update_x(x, product, y, mask, hp.alpha, hp.theta)
            tail = reduce(np.matmul, [*middles, v])
            u1 = update_u1(x, u1, tail, l_d, hp.mu, hp.theta)
            for i in range(len(middles)):
                left = reduce(np.matmul, [u1, *middles[:i]])
                right = reduce(np.matmul, [*middles[i + 1 :], v])
                middles[i], floored = update_middle(
                    x, middles[i], left, right, hp.theta, return_floor_count=True
                )
                floor_events += floored
            head = reduce(np.matmul, [u1, *middles])
            v = update_v(x, v, head, l_v, hp.mu, hp.theta)
        except Exception as exc:
            raise SolverError(f"iteration {it} failed: {exc}") from exc
        factors = FactorSet(u1=u1, middles=middles, v=v)
        loss.append(objective(x, factors, y, mask, l_d, l_v, hp.mu, hp.theta))

    trace = SolveTrace(
        loss=loss,
        floor_events=floor_events,
        wall_time=time.perf_counter() - start,
    )
    return FitResult(x=x, factors=FactorSet(u1=u1, middles=middles, v=v), trace=trace)
