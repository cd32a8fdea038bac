"""Similarity graphs and the Laplacians that regularize the factor matrices.

The pipeline is: binary feature profiles -> cosine similarity -> p-nearest
neighbour sparsification -> graph Laplacian -> entrywise sum over graphs.
"""

from __future__ import annotations

import warnings
from typing import Sequence

import numpy as np

from .exceptions import DimensionError, ParameterError, ZeroProfileWarning
from .linalg import _as_matrix, _require_symmetric

__all__ = [
    "cosine_similarity",
    "sparsify_pnn",
    "laplacian",
    "combine_laplacians",
    "build_laplacian",
]


def cosine_similarity(indicator) -> np.ndarray:
    """Pairwise cosine similarity of the rows of a binary indicator matrix.

    Rows with no features get similarity 0 to everything else and 1 to
    themselves, and a :class:`ZeroProfileWarning` is emitted for them.
    """
    indicator = _as_matrix(indicator, "indicator")
    if not np.isin(indicator, (0.0, 1.0)).all():
        raise ParameterError("indicator matrix must be binary (0/1 entries)")
    norms = np.sqrt((indicator * indicator).sum(axis=1))
    zero_rows = np.flatnonzero(norms == 0.0)
    if zero_rows.size:
        warnings.warn(
            f"{zero_rows.size} profile row(s) are all-zero (indices {zero_rows.tolist()}); "
            "their off-diagonal similarities are set to 0",
            ZeroProfileWarning,
            stacklevel=2,
        )
    safe = np.where(norms == 0.0, 1.0, norms)
    sim = (indicator @ indicator.T) / np.outer(safe, safe)
    sim[zero_rows, :] = 0.0
    sim[:, zero_rows] = 0.0
    sim = 0.5 * (sim + sim.T)
    np.clip(sim, 0.0, 1.0, out=sim)
    np.fill_diagonal(sim, 1.0)
    return sim


def sparsify_pnn(s, p: int) -> np.ndarray:
    """Keep, per row, only the ``p`` largest off-diagonal entries of ``s``.

    An off-diagonal entry survives if either of its two rows selects it
    (OR rule), so the output stays symmetric; ties are broken toward the
    lower column index and the diagonal is left untouched.
    """
    s = _as_matrix(s, "similarity")
    _require_symmetric(s, "similarity")
    n = s.shape[0]
    if not isinstance(p, (int, np.integer)):
        raise ParameterError(f"p must be an integer, got {p!r}")
    if not 1 <= p <= n - 1:
        raise ParameterError(f"p={p} out of range [1, {n - 1}] for {n} entities")
    sym = 0.5 * (s + s.T)
    ranked = sym.copy()
    np.fill_diagonal(ranked, -np.inf)
    # stable argsort of the negated row: descending value, ties toward lower column
    top = np.argsort(-ranked, axis=1, kind="stable")[:, :p]
    keep = np.zeros((n, n), dtype=bool)
    np.put_along_axis(keep, top, True, axis=1)
    keep |= keep.T
    out = np.where(keep, sym, 0.0)
    np.fill_diagonal(out, np.diagonal(sym))
    return out


def laplacian(s) -> np.ndarray:
    """Graph Laplacian ``L = D - S`` with degrees ``D_ii = sum_j S_ij``.

    The degree sum runs over every column including the diagonal, so row sums
    of ``L`` vanish and ``x.T @ L @ x == 0.5 * sum_ij S_ij (x_i - x_j)^2``.
    """
    s = _as_matrix(s, "similarity")
    _require_symmetric(s, "similarity")
    sym = 0.5 * (s + s.T)
    lap = np.diag(sym.sum(axis=1)) - sym
    return lap


def combine_laplacians(parts: Sequence[np.ndarray]) -> np.ndarray:
    """Entrywise sum of Laplacians over several graphs on the same entities."""
    if len(parts) == 0:
        raise ParameterError("need at least one Laplacian to combine")
    mats = [_as_matrix(p, f"laplacian {i}") for i, p in enumerate(parts)]
    shape = mats[0].shape
    for i, m in enumerate(mats):
        if m.shape != shape:
            raise DimensionError(
                f"laplacian {i} has shape {m.shape}, expected {shape}"
            )
    total = np.zeros(shape)
    for m in mats:
        total += m
    return total


def build_laplacian(similarities: Sequence[np.ndarray], p: int) -> np.ndarray:
    """Sparsify each similarity with ``p`` neighbours, then sum the Laplacians."""
    return combine_laplacians([laplacian(sparsify_pnn(s, p)) for s in similarities])
