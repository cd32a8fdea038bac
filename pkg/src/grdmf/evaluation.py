"""Cross-validation protocols and ranking metrics.

Three random schemes (hiding cells, virus columns or drug rows), a
leave-one-virus-out protocol, and a similarity-source ablation. All fold
assignments derive deterministically from an integer seed, and aggregation
never depends on evaluation order, so identical inputs give identical
reports.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .data import AssociationDataset, SimilaritySet
from .exceptions import (
    ConfigError,
    FoldSkippedWarning,
    ParameterError,
    TopKClampWarning,
    UndefinedMetricError,
)
from .graphs import build_laplacian
from .solver import HyperParams, fit

__all__ = [
    "FoldSplit",
    "FoldMetrics",
    "EvalReport",
    "split_entries",
    "split_axis",
    "auc",
    "aupr",
    "topk_metrics",
    "run_cv",
    "run_loocv",
    "run_ablation",
]

#: signature of the pluggable scoring backend used by the protocols:
#: (y_train, mask, l_d, l_v, hp) -> score matrix of y's shape
FitFn = Callable[..., np.ndarray]


@dataclass(frozen=True)
class FoldSplit:
    """One fold: the cells hidden from training, as an (k, 2) index array."""

    fold_id: int
    hidden_cells: np.ndarray


@dataclass
class FoldMetrics:
    """Metrics of a single fold (or a single left-out virus)."""

    fold_id: int
    n_hidden: int
    n_positive: int
    auc: Optional[float] = None
    aupr: Optional[float] = None
    pre_at_k: Optional[dict[int, float]] = None
    rec_at_k: Optional[dict[int, float]] = None
    name: Optional[str] = None
    seed: Optional[int] = None
    skipped: bool = False

    def to_dict(self) -> dict:
        return {
            "fold": self.fold_id,
            "name": self.name,
            "seed": self.seed,
            "n_hidden": self.n_hidden,
            "n_positive": self.n_positive,
            "auc": self.auc,
            "aupr": self.aupr,
            "pre_at_k": _str_keys(self.pre_at_k),
            "rec_at_k": _str_keys(self.rec_at_k),
            "skipped": self.skipped,
        }


@dataclass
class EvalReport:
    """Aggregated evaluation results for one protocol run."""

    scheme: str
    seed: Optional[int]
    auc: Optional[float]
    aupr: Optional[float]
    pre_at_k: dict[int, float]
    rec_at_k: dict[int, float]
    per_fold: list[FoldMetrics]
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme,
            "seed": self.seed,
            "auc": self.auc,
            "aupr": self.aupr,
            "pre_at_k": _str_keys(self.pre_at_k),
            "rec_at_k": _str_keys(self.rec_at_k),
            "folds": [f.to_dict() for f in self.per_fold],
            "notes": list(self.notes),
        }


def _str_keys(d: Optional[Mapping[int, float]]) -> Optional[dict[str, float]]:
    if d is None:
        return None
    return {str(k): v for k, v in sorted(d.items())}


def split_entries(
    shape: tuple[int, int],
    fraction: float = 0.1,
    folds: Optional[int] = None,
    seed: int = 0,
) -> list[FoldSplit]:
    """Partition all m*n cells into near-equal random folds.

    Fold sizes differ by at most one. When ``folds`` is omitted it is taken
    as round(1/fraction), so the default hides 10% of cells per fold.
    """
    m, n = shape
    if m < 1 or n < 1:
        raise ParameterError(f"degenerate shape {shape}")
    if folds is None:
        if not 0.0 < fraction < 1.0:
            raise ParameterError(f"fraction must lie in (0, 1), got {fraction}")
        folds = round(1.0 / fraction)
    folds = int(folds)
    if not 2 <= folds <= m * n:
        raise ParameterError(f"folds={folds} out of range [2, {m * n}]")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(m * n)
    out = []
    for f, group in enumerate(np.array_split(perm, folds)):
        rows, cols = np.unravel_index(np.sort(group), (m, n))
        out.append(FoldSplit(fold_id=f, hidden_cells=np.column_stack([rows, cols])))
    return out


def split_axis(
    shape: tuple[int, int],
    axis: str,
    folds: int = 10,
    seed: int = 0,
) -> list[FoldSplit]:
    """Partition one axis into random folds; each fold hides whole lines.

    ``axis="rows"`` hides every cell of the selected drug rows, and
    ``axis="cols"`` hides whole virus columns.
    """
    m, n = shape
    if axis not in ("rows", "cols"):
        raise ParameterError(f"axis must be 'rows' or 'cols', got {axis!r}")
    length = m if axis == "rows" else n
    folds = int(folds)
    if not 2 <= folds <= length:
        raise ParameterError(f"folds={folds} out of range [2, {length}]")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(length)
    out = []
    for f, group in enumerate(np.array_split(perm, folds)):
        lines = np.sort(group)
        if axis == "rows":
            rows = np.repeat(lines, n)
            cols = np.tile(np.arange(n), lines.size)
        else:
            rows = np.tile(np.arange(m), lines.size)
            cols = np.repeat(lines, m)
        cells = np.column_stack([rows, cols])
        cells = cells[np.lexsort((cells[:, 1], cells[:, 0]))]
        out.append(FoldSplit(fold_id=f, hidden_cells=cells))
    return out


def _check_scores_labels(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    scores = np.asarray(scores, dtype=float).ravel()
    labels = np.asarray(labels, dtype=float).ravel()
    if scores.shape != labels.shape:
        raise ParameterError(
            f"scores and labels must have equal length, got {scores.size} and {labels.size}"
        )
    if not np.all(np.isfinite(scores)):
        raise ParameterError("scores contain non-finite values")
    if not np.isin(labels, (0.0, 1.0)).all():
        raise ParameterError("labels must be binary (0/1)")
    return scores, labels


def _midranks(x: np.ndarray) -> np.ndarray:
    """1-based ranks with ties assigned the mean rank of their group."""
    order = np.argsort(x, kind="stable")
    sx = x[order]
    bounds = np.flatnonzero(np.diff(sx)) + 1
    starts = np.concatenate(([0], bounds))
    ends = np.concatenate((bounds, [x.size]))
    ranks = np.empty(x.size)
    for s, e in zip(starts, ends):
        ranks[order[s:e]] = 0.5 * (s + 1 + e)
    return ranks


def auc(scores, labels) -> float:
    """Area under the ROC curve, Mann-Whitney form with ties counted 1/2.

    Equals the fraction of (positive, negative) pairs the scores order
    correctly, tied pairs contributing one half.
    """
    scores, labels = _check_scores_labels(scores, labels)
    pos = labels == 1.0
    n_pos = int(pos.sum())
    n_neg = scores.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError(
            f"AUC undefined: {n_pos} positives, {n_neg} negatives"
        )
    ranks = _midranks(scores)
    return float((ranks[pos].sum() - 0.5 * n_pos * (n_pos + 1)) / (n_pos * n_neg))


def aupr(scores, labels) -> float:
    """Average precision: mean of precision-at-rank over the positives.

    Candidates are ordered by descending score; tied scores keep their
    original order (stable sort), so the value is reproducible.
    """
    scores, labels = _check_scores_labels(scores, labels)
    if not (labels == 1.0).any():
        raise UndefinedMetricError("average precision undefined without positives")
    order = np.argsort(-scores, kind="stable")
    hits = labels[order]
    cum = np.cumsum(hits)
    at = np.flatnonzero(hits == 1.0)
    return float(np.mean(cum[at] / (at + 1)))


def topk_metrics(scores, labels, k: int) -> tuple[float, float]:
    """Precision and recall among the k highest-scoring candidates.

    A ``k`` beyond the number of candidates is clamped with a warning. Raises
    :class:`UndefinedMetricError` when there are no positives, since recall
    has no denominator then.
    """
    scores, labels = _check_scores_labels(scores, labels)
    if int(k) < 1:
        raise ParameterError(f"k must be >= 1, got {k}")
    k = int(k)
    if k > scores.size:
        warnings.warn(
            f"k={k} exceeds the {scores.size} candidates; clamping",
            TopKClampWarning,
            stacklevel=2,
        )
        k = scores.size
    total_pos = float(labels.sum())
    if total_pos == 0:
        raise UndefinedMetricError("recall undefined without positives")
    order = np.argsort(-scores, kind="stable")[:k]
    hits = float(labels[order].sum())
    return hits / k, hits / total_pos


def _default_fit_fn(y_train, mask, l_d, l_v, hp) -> np.ndarray:
    return fit(y_train, mask, l_d, l_v, hp).x


def _mean_or_none(values: list[float]) -> Optional[float]:
    return float(np.mean(values)) if values else None


def _hide(y: np.ndarray, cells: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mask = np.ones_like(y)
    mask[cells[:, 0], cells[:, 1]] = 0.0
    return y * mask, mask


def run_cv(
    dataset: AssociationDataset,
    similarities: SimilaritySet,
    scheme: str,
    hp: HyperParams,
    seed: int = 0,
    folds: int = 10,
    fit_fn: Optional[FitFn] = None,
) -> EvalReport:
    """One repetition of k-fold cross-validation under the given scheme.

    scheme  -- "entries" (hide random cells), "viruses" (hide whole columns)
               or "drugs" (hide whole rows)

    Hidden cells are zeroed in both the mask and the training copy of Y; the
    completed matrix scores them against the true labels. Folds whose hidden
    cells are single-class are skipped with a warning and excluded from the
    means. Similarity matrices must already be aligned to the dataset
    registries.
    """
    if fit_fn is None:
        fit_fn = _default_fit_fn
    y = dataset.y
    if scheme == "entries":
        splits = split_entries(y.shape, folds=folds, seed=seed)
    elif scheme == "viruses":
        splits = split_axis(y.shape, "cols", folds=folds, seed=seed)
    elif scheme == "drugs":
        splits = split_axis(y.shape, "rows", folds=folds, seed=seed)
    else:
        raise ParameterError(
            f"scheme must be 'entries', 'viruses' or 'drugs', got {scheme!r}"
        )
    l_d = build_laplacian(list(similarities.drug.values()), hp.p)
    l_v = build_laplacian(list(similarities.virus.values()), hp.p)

    per_fold: list[FoldMetrics] = []
    notes: list[str] = []
    for split in splits:
        cells = split.hidden_cells
        y_train, mask = _hide(y, cells)
        scores_matrix = fit_fn(y_train, mask, l_d, l_v, hp)
        scores = scores_matrix[cells[:, 0], cells[:, 1]]
        labels = y[cells[:, 0], cells[:, 1]]
        n_pos = int(labels.sum())
        record = FoldMetrics(
            fold_id=split.fold_id,
            n_hidden=cells.shape[0],
            n_positive=n_pos,
            seed=seed,
        )
        if n_pos == 0 or n_pos == labels.size:
            record.skipped = True
            note = (
                f"fold {split.fold_id}: hidden cells are single-class "
                f"({n_pos} of {labels.size} positive); metrics skipped"
            )
            notes.append(note)
            warnings.warn(note, FoldSkippedWarning, stacklevel=2)
        else:
            record.auc = auc(scores, labels)
            record.aupr = aupr(scores, labels)
        per_fold.append(record)

    kept = [f for f in per_fold if not f.skipped]
    return EvalReport(
        scheme=scheme,
        seed=seed,
        auc=_mean_or_none([f.auc for f in kept]),
        aupr=_mean_or_none([f.aupr for f in kept]),
        pre_at_k={},
        rec_at_k={},
        per_fold=per_fold,
        notes=notes,
    )


def run_loocv(
    dataset: AssociationDataset,
    similarities: SimilaritySet,
    hp: HyperParams,
    ks: Sequence[int] = (3, 5, 7),
    fit_fn: Optional[FitFn] = None,
) -> EvalReport:
    """Leave-one-virus-out: hide each virus column, rank all drugs for it.

    Reports Pre@k and Rec@k per virus plus their means. Viruses with no known
    positives keep their precision (necessarily 0) but are excluded from the
    recall means, with a note in the report. There is no randomness here, so
    the report carries no seed.
    """
    if fit_fn is None:
        fit_fn = _default_fit_fn
    ks = [int(k) for k in ks]
    if any(k < 1 for k in ks):
        raise ParameterError(f"cutoffs must be >= 1, got {ks}")
    y = dataset.y
    m, n = y.shape
    l_d = build_laplacian(list(similarities.drug.values()), hp.p)
    l_v = build_laplacian(list(similarities.virus.values()), hp.p)

    per_virus: list[FoldMetrics] = []
    notes: list[str] = []
    for j, virus in enumerate(dataset.viruses):
        cells = np.column_stack([np.arange(m), np.full(m, j)])
        y_train, mask = _hide(y, cells)
        scores_matrix = fit_fn(y_train, mask, l_d, l_v, hp)
        scores = scores_matrix[:, j]
        labels = y[:, j]
        n_pos = int(labels.sum())
        record = FoldMetrics(
            fold_id=j,
            n_hidden=m,
            n_positive=n_pos,
            name=virus,
            pre_at_k={},
            rec_at_k={},
        )
        if n_pos == 0:
            notes.append(
                f"virus {virus!r} has no known positives; excluded from recall means"
            )
            for k in ks:
                record.pre_at_k[k] = 0.0
        else:
            for k in ks:
                pre, rec = topk_metrics(scores, labels, k)
                record.pre_at_k[k] = pre
                record.rec_at_k[k] = rec
            if n_pos < m:
                record.auc = auc(scores, labels)
                record.aupr = aupr(scores, labels)
            else:
                notes.append(f"virus {virus!r} is all-positive; AUC/AUPR skipped")
        per_virus.append(record)

    kept = per_virus
    pre_means = {
        k: _mean_or_none([f.pre_at_k[k] for f in kept if k in (f.pre_at_k or {})])
        for k in ks
    }
    rec_means = {
        k: _mean_or_none([f.rec_at_k[k] for f in kept if k in (f.rec_at_k or {})])
        for k in ks
    }
    return EvalReport(
        scheme="loo",
        seed=None,
        auc=_mean_or_none([f.auc for f in kept if f.auc is not None]),
        aupr=_mean_or_none([f.aupr for f in kept if f.aupr is not None]),
        pre_at_k={k: v for k, v in pre_means.items() if v is not None},
        rec_at_k={k: v for k, v in rec_means.items() if v is not None},
        per_fold=per_virus,
        notes=notes,
    )


def run_ablation(
    dataset: AssociationDataset,
    similarities: SimilaritySet,
    combos: Sequence[tuple[Sequence[str], Sequence[str]]],
    hp: HyperParams,
    seed: int = 0,
    folds: int = 10,
    fit_fn: Optional[FitFn] = None,
) -> dict[str, EvalReport]:
    """Cross-validate each named similarity combination.

    Every combo selects at least one drug-side and one virus-side similarity
    by name from ``similarities``; results are keyed by a label of the form
    ``"s1_d+s2_d,s1_v"``. All combos share the same seed, so their fold
    assignments are identical and the comparison isolates the graphs.
    """
    reports: dict[str, EvalReport] = {}
    for drug_names, virus_names in combos:
        drug_names = list(drug_names)
        virus_names = list(virus_names)
        if not drug_names or not virus_names:
            raise ConfigError(
                "each combo needs at least one drug and one virus similarity"
            )
        unknown = [nm for nm in drug_names if nm not in similarities.drug]
        unknown += [nm for nm in virus_names if nm not in similarities.virus]
        if unknown:
            known = sorted(similarities.drug) + sorted(similarities.virus)
            raise ConfigError(
                f"unknown similarity name(s) {unknown}; available: {known}"
            )
        subset = SimilaritySet(
            drug={nm: similarities.drug[nm] for nm in drug_names},
            virus={nm: similarities.virus[nm] for nm in virus_names},
        )
        label = "+".join(drug_names) + "," + "+".join(virus_names)
        reports[label] = run_cv(
            dataset, subset, "entries", hp, seed=seed, folds=folds, fit_fn=fit_fn
        )
    return reports
