"""Command-line interface: fit, predict, cv and ablation subcommands.

Every flag can also come from a JSON config file (``--config``); flags win
over the file, the file wins over the per-scheme defaults. Each emitted
report embeds the fully resolved configuration, including SHA-256 digests of
the input files, so a result can be traced back to its inputs.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .data import (
    AssociationDataset,
    SimilaritySet,
    align_profile,
    align_similarity,
    load_association_csv,
    load_profile_csv,
    load_similarity_csv,
    write_matrix_csv,
)
from .evaluation import EvalReport, run_ablation, run_cv, run_loocv
from .exceptions import (
    ConfigError,
    GrdmfError,
    ParameterError,
    TopKClampWarning,
    UnknownNameError,
)
from .graphs import build_laplacian, cosine_similarity
from .solver import FitResult, HyperParams, fit

__all__ = [
    "RunConfig",
    "Recommendation",
    "RecommendationList",
    "predict_topk",
    "resolve_config",
    "main",
]

logger = logging.getLogger("grdmf")

#: tuned defaults per (evaluation scheme, factor depth)
DEFAULT_HYPERPARAMS: dict[tuple[str, int], dict] = {
    ("entries", 2): dict(theta=1.0, mu=100.0, alpha=0.05, p=2, dims=(17, 15)),
    ("viruses", 2): dict(theta=10.0, mu=50.0, alpha=0.01, p=2, dims=(20, 15)),
    ("drugs", 2): dict(theta=2.0, mu=10.0, alpha=0.1, p=5, dims=(17, 10)),
    ("entries", 3): dict(theta=1.0, mu=5.0, alpha=1.0, p=5, dims=(23, 10, 7)),
    ("viruses", 3): dict(theta=1.0, mu=0.01, alpha=1.0, p=5, dims=(20, 15, 10)),
    ("drugs", 3): dict(theta=2.0, mu=5.0, alpha=1.5, p=5, dims=(23, 10, 7)),
}

DEFAULT_ITERS = 10


@dataclass(frozen=True)
class Recommendation:
    rank: int
    drug: str
    score: float
    known: bool


@dataclass(frozen=True)
class RecommendationList:
    """Ranked drug recommendations for one virus."""

    virus: str
    entries: tuple[Recommendation, ...]


@dataclass
class RunConfig:
    """Fully resolved run configuration."""

    command: str
    association: Path
    drug_sims: dict[str, Path]
    virus_sims: dict[str, Path]
    drug_profile: Optional[Path]
    virus_profile: Optional[Path]
    hyperparams: HyperParams
    scheme: str
    folds: int
    repeats: int
    seed: int
    ks: tuple[int, ...]
    k: int
    virus: Optional[str]
    combos: Optional[list[tuple[list[str], list[str]]]]
    out: Path
    digests: dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        hp = self.hyperparams
        return {
            "command": self.command,
            "association": str(self.association),
            "drug_sims": {k: str(v) for k, v in self.drug_sims.items()},
            "virus_sims": {k: str(v) for k, v in self.virus_sims.items()},
            "drug_profile": str(self.drug_profile) if self.drug_profile else None,
            "virus_profile": str(self.virus_profile) if self.virus_profile else None,
            "hyperparams": {
                "mu": hp.mu,
                "theta": hp.theta,
                "alpha": hp.alpha,
                "dims": list(hp.dims),
                "p": hp.p,
                "iters": hp.iters,
                "sigma": hp.sigma,
            },
            "scheme": self.scheme,
            "folds": self.folds,
            "repeats": self.repeats,
            "seed": self.seed,
            "ks": list(self.ks),
            "k": self.k,
            "virus": self.virus,
            "out": str(self.out),
            "digests": dict(sorted(self.digests.items())),
        }


def predict_topk(
    fit_result: FitResult,
    dataset: AssociationDataset,
    virus_name: str,
    k: int,
    training_positives: Optional[set] = None,
) -> RecommendationList:
    """Rank all drugs for one virus by completed score, highest first.

    Drugs already known positive in training stay in the ranking and are
    flagged via ``known``. Ties keep registry order; a ``k`` beyond the drug
    count returns the full ranking with a warning.
    """
    if virus_name not in dataset.viruses:
        raise UnknownNameError(
            f"unknown virus {virus_name!r}; the dataset has {len(dataset.viruses)} viruses"
        )
    if int(k) < 1:
        raise ParameterError(f"k must be >= 1, got {k}")
    k = int(k)
    j = dataset.viruses.index(virus_name)
    scores = np.asarray(fit_result.x, dtype=float)[:, j]
    if k > scores.size:
        warnings.warn(
            f"k={k} exceeds the {scores.size} drugs; returning the full ranking",
            TopKClampWarning,
            stacklevel=2,
        )
        k = scores.size
    known = set(training_positives or ())
    order = np.argsort(-scores, kind="stable")[:k]
    entries = tuple(
        Recommendation(
            rank=i + 1,
            drug=dataset.drugs[idx],
            score=float(scores[idx]),
            known=dataset.drugs[idx] in known,
        )
        for i, idx in enumerate(order)
    )
    return RecommendationList(virus=virus_name, entries=entries)


# ---------------------------------------------------------------------------
# configuration resolution


def _parse_int_list(text: str, what: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError as exc:
        raise ConfigError(f"cannot parse {what} {text!r}: {exc}") from exc


def _parse_combos(spec) -> list[tuple[list[str], list[str]]]:
    """Accept "s1_d,s1_v;s1_d+s2_d,s1_v" strings or [[...],[...]] pairs."""
    if isinstance(spec, str):
        combos = []
        for chunk in spec.split(";"):
            chunk = chunk.strip()
            if not chunk:
                continue
            parts = chunk.split(",")
            if len(parts) != 2:
                raise ConfigError(
                    f"combo {chunk!r} must be 'drugnames,virusnames' with '+' joining names"
                )
            combos.append(
                ([p.strip() for p in parts[0].split("+")],
                 [p.strip() for p in parts[1].split("+")])
            )
        if not combos:
            raise ConfigError("no combos given")
        return combos
    combos = []
    for pair in spec:
        if len(pair) != 2:
            raise ConfigError(f"combo {pair!r} must pair drug names with virus names")
        combos.append(([str(s) for s in pair[0]], [str(s) for s in pair[1]]))
    return combos


def _named_paths(items, suffix: str, taken=()) -> dict[str, Path]:
    """Assign default names s1_d, s2_d, ... to unnamed similarity paths."""
    if isinstance(items, dict):
        return {str(name): Path(p) for name, p in items.items()}
    out: dict[str, Path] = {}
    used = set(taken)
    counter = 1
    for item in items or []:
        if "=" in str(item):
            name, _, path = str(item).partition("=")
            name = name.strip()
        else:
            path = str(item)
            while f"s{counter}_{suffix}" in used:
                counter += 1
            name = f"s{counter}_{suffix}"
        if name in out or name in used:
            raise ConfigError(f"duplicate similarity name {name!r}")
        used.add(name)
        out[name] = Path(path)
    return out


def _next_name(taken, suffix: str) -> str:
    counter = 1
    while f"s{counter}_{suffix}" in taken:
        counter += 1
    return f"s{counter}_{suffix}"


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Merge per-scheme defaults, the config file and command-line flags."""
    file_cfg: dict = {}
    if getattr(args, "config", None):
        config_path = Path(args.config)
        if not config_path.is_file():
            raise ConfigError(f"config file not found: {config_path}")
        try:
            file_cfg = json.loads(config_path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {config_path} is not valid JSON: {exc}") from exc

    def pick(flag: str, key: str, default=None):
        value = getattr(args, flag, None)
        if value is not None:
            return value
        return file_cfg.get(key, default)

    command = args.command
    scheme = str(pick("scheme", "scheme", "entries"))
    if scheme not in ("entries", "viruses", "drugs", "loo"):
        raise ConfigError(
            f"scheme must be one of entries, viruses, drugs, loo; got {scheme!r}"
        )

    dims_raw = pick("dims", "dims")
    if isinstance(dims_raw, str):
        dims = _parse_int_list(dims_raw, "dims")
    elif dims_raw is not None:
        dims = tuple(int(d) for d in dims_raw)
    else:
        dims = None
    layers = int(pick("layers", "layers", len(dims) if dims else 2))
    if dims is not None:
        layers = len(dims)
    default_key = ("entries" if scheme == "loo" else scheme, layers)
    if default_key not in DEFAULT_HYPERPARAMS:
        raise ConfigError(f"no defaults for {layers} layers; supply --dims")
    hp_defaults = DEFAULT_HYPERPARAMS[default_key]

    try:
        hyperparams = HyperParams(
            mu=float(pick("mu", "mu", hp_defaults["mu"])),
            theta=float(pick("theta", "theta", hp_defaults["theta"])),
            alpha=float(pick("alpha", "alpha", hp_defaults["alpha"])),
            dims=dims if dims is not None else hp_defaults["dims"],
            p=int(pick("p", "p", hp_defaults["p"])),
            iters=int(pick("iters", "iters", DEFAULT_ITERS)),
        )
    except ParameterError as exc:
        raise ConfigError(f"bad hyperparameters: {exc}") from exc

    association = pick("association", "association")
    if association is None:
        raise ConfigError("an association matrix is required (--association)")
    association = Path(association)

    drug_sims = _named_paths(pick("drug_sim", "drug_sims", []), "d")
    virus_sims = _named_paths(pick("virus_sim", "virus_sims", []), "v")
    drug_profile = pick("drug_profile", "drug_profile")
    virus_profile = pick("virus_profile", "virus_profile")
    drug_profile = Path(drug_profile) if drug_profile else None
    virus_profile = Path(virus_profile) if virus_profile else None
    if not drug_sims and drug_profile is None:
        raise ConfigError("at least one drug-side similarity or profile is required")
    if not virus_sims and virus_profile is None:
        raise ConfigError("at least one virus-side similarity or profile is required")

    combos_raw = pick("combos", "combos")
    combos = _parse_combos(combos_raw) if combos_raw is not None else None

    virus = pick("virus", "virus")
    if command == "predict" and not virus:
        raise ConfigError("predict needs a virus name (--virus)")

    ks_raw = pick("ks", "ks", (3, 5, 7))
    ks = _parse_int_list(ks_raw, "ks") if isinstance(ks_raw, str) else tuple(
        int(v) for v in ks_raw
    )

    cfg = RunConfig(
        command=command,
        association=association,
        drug_sims=drug_sims,
        virus_sims=virus_sims,
        drug_profile=drug_profile,
        virus_profile=virus_profile,
        hyperparams=hyperparams,
        scheme=scheme,
        folds=int(pick("folds", "folds", 10)),
        repeats=int(pick("repeats", "repeats", 10)),
        seed=int(pick("seed", "seed", 0)),
        ks=ks,
        k=int(pick("k", "k", 10)),
        virus=str(virus) if virus else None,
        combos=combos,
        out=Path(pick("out", "out", "grdmf_out")),
    )

    referenced = [cfg.association, *cfg.drug_sims.values(), *cfg.virus_sims.values()]
    referenced += [p for p in (cfg.drug_profile, cfg.virus_profile) if p]
    for path in referenced:
        if not path.is_file():
            raise ConfigError(f"input file not found: {path}")
    cfg.digests = {str(path): _sha256(path) for path in referenced}
    return cfg


def _load_inputs(cfg: RunConfig) -> tuple[AssociationDataset, SimilaritySet]:
    """Parse every referenced file and align it to the dataset registries."""
    dataset = load_association_csv(cfg.association)
    drug: dict[str, np.ndarray] = {}
    for name, path in cfg.drug_sims.items():
        drug[name] = align_similarity(load_similarity_csv(path), dataset.drugs)
    if cfg.drug_profile is not None:
        indicator = align_profile(load_profile_csv(cfg.drug_profile), dataset.drugs)
        drug[_next_name(drug, "d")] = cosine_similarity(indicator)
    virus: dict[str, np.ndarray] = {}
    for name, path in cfg.virus_sims.items():
        virus[name] = align_similarity(load_similarity_csv(path), dataset.viruses)
    if cfg.virus_profile is not None:
        indicator = align_profile(load_profile_csv(cfg.virus_profile), dataset.viruses)
        virus[_next_name(virus, "v")] = cosine_similarity(indicator)
    logger.info(
        "inputs: %d drugs, %d viruses, %d drug-side and %d virus-side similarities",
        len(dataset.drugs), len(dataset.viruses), len(drug), len(virus),
    )
    return dataset, SimilaritySet(drug=drug, virus=virus)


# ---------------------------------------------------------------------------
# subcommands


def _config_comment(cfg: RunConfig) -> str:
    return "config " + json.dumps(cfg.to_dict(), sort_keys=True)


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _full_fit(cfg: RunConfig, dataset: AssociationDataset, sims: SimilaritySet) -> FitResult:
    hp = cfg.hyperparams
    l_d = build_laplacian(list(sims.drug.values()), hp.p)
    l_v = build_laplacian(list(sims.virus.values()), hp.p)
    mask = np.ones_like(dataset.y)
    return fit(dataset.y, mask, l_d, l_v, hp)


def _latent_names(count: int, stem: str) -> list[str]:
    return [f"{stem}{i}" for i in range(count)]


def cmd_fit(cfg: RunConfig, dataset: AssociationDataset, sims: SimilaritySet) -> int:
    result = _full_fit(cfg, dataset, sims)
    out = cfg.out
    out.mkdir(parents=True, exist_ok=True)
    comment = [_config_comment(cfg)]
    write_matrix_csv(
        out / "completed.csv", dataset.drugs, dataset.viruses, result.x, comment
    )
    chain = [result.factors.u1, *result.factors.middles, result.factors.v]
    names = ["u1"] + [f"u{i + 2}" for i in range(len(result.factors.middles))] + ["v"]
    for name, factor in zip(names, chain):
        rows = dataset.drugs if name == "u1" else _latent_names(factor.shape[0], "k")
        cols = dataset.viruses if name == "v" else _latent_names(factor.shape[1], "k")
        write_matrix_csv(out / f"factor_{name}.csv", rows, cols, factor, comment)
    with (out / "trace.csv").open("w") as handle:
        handle.write(f"# {comment[0]}\n")
        handle.write("iteration,loss\n")
        for i, value in enumerate(result.trace.loss):
            handle.write(f"{i},{value!r}\n")
    logger.info(
        "fit finished: loss %.6g -> %.6g in %d iterations (%.3f s, %d floored eigenvalues)",
        result.trace.loss[0], result.trace.loss[-1],
        cfg.hyperparams.iters, result.trace.wall_time, result.trace.floor_events,
    )
    print(out / "completed.csv")
    return 0


def cmd_predict(cfg: RunConfig, dataset: AssociationDataset, sims: SimilaritySet) -> int:
    result = _full_fit(cfg, dataset, sims)
    j = None
    if cfg.virus in dataset.viruses:
        j = dataset.viruses.index(cfg.virus)
    positives = (
        {dataset.drugs[i] for i in np.flatnonzero(dataset.y[:, j] == 1.0)}
        if j is not None
        else set()
    )
    ranking = predict_topk(result, dataset, cfg.virus, cfg.k, positives)
    out = cfg.out
    out.mkdir(parents=True, exist_ok=True)
    path = out / "recommendations.csv"
    with path.open("w") as handle:
        handle.write(f"# {_config_comment(cfg)}\n")
        handle.write("rank,drug,score,known\n")
        for entry in ranking.entries:
            handle.write(
                f"{entry.rank},{entry.drug},{entry.score!r},{int(entry.known)}\n"
            )
    for entry in ranking.entries:
        marker = "*" if entry.known else " "
        print(f"{entry.rank:3d} {marker} {entry.drug}  {entry.score:.6f}")
    return 0


def _merged_cv_payload(reports: list[EvalReport]) -> dict:
    folds = [f.to_dict() for report in reports for f in report.per_fold]
    kept = [f for f in folds if not f["skipped"]]
    aucs = [f["auc"] for f in kept if f["auc"] is not None]
    auprs = [f["aupr"] for f in kept if f["aupr"] is not None]
    pre: dict[str, list[float]] = {}
    rec: dict[str, list[float]] = {}
    for f in kept:
        for key, value in (f["pre_at_k"] or {}).items():
            pre.setdefault(key, []).append(value)
        for key, value in (f["rec_at_k"] or {}).items():
            rec.setdefault(key, []).append(value)
    mean = {
        "auc": float(np.mean(aucs)) if aucs else None,
        "aupr": float(np.mean(auprs)) if auprs else None,
        "pre_at_k": {k: float(np.mean(v)) for k, v in sorted(pre.items())},
        "rec_at_k": {k: float(np.mean(v)) for k, v in sorted(rec.items())},
    }
    notes = [note for report in reports for note in report.notes]
    return {"folds": folds, "mean": mean, "notes": notes}


def cmd_cv(cfg: RunConfig, dataset: AssociationDataset, sims: SimilaritySet) -> int:
    hp = cfg.hyperparams
    if cfg.scheme == "loo":
        reports = [run_loocv(dataset, sims, hp, ks=cfg.ks)]
        seeds: list[int] = []
    else:
        seeds = [cfg.seed + i for i in range(cfg.repeats)]
        reports = [
            run_cv(dataset, sims, cfg.scheme, hp, seed=s, folds=cfg.folds)
            for s in seeds
        ]
    payload = {
        "config": cfg.to_dict(),
        "scheme": cfg.scheme,
        "seeds": seeds,
        **_merged_cv_payload(reports),
    }
    cfg.out.mkdir(parents=True, exist_ok=True)
    path = cfg.out / "metrics.json"
    _write_json(path, payload)
    mean = payload["mean"]
    logger.info("cv %s: mean AUC %s, mean AUPR %s", cfg.scheme, mean["auc"], mean["aupr"])
    print(path)
    return 0


def _default_combos(sims: SimilaritySet) -> list[tuple[list[str], list[str]]]:
    """Every single (drug, virus) similarity pair, plus everything combined."""
    drug_names = list(sims.drug)
    virus_names = list(sims.virus)
    combos: list[tuple[list[str], list[str]]] = [
        ([d], [v]) for d in drug_names for v in virus_names
    ]
    if len(drug_names) > 1 or len(virus_names) > 1:
        combos.append((drug_names, virus_names))
    return combos


def cmd_ablation(cfg: RunConfig, dataset: AssociationDataset, sims: SimilaritySet) -> int:
    combos = cfg.combos if cfg.combos is not None else _default_combos(sims)
    seeds = [cfg.seed + i for i in range(cfg.repeats)]
    merged: dict[str, dict] = {}
    for seed in seeds:
        reports = run_ablation(
            dataset, sims, combos, cfg.hyperparams, seed=seed, folds=cfg.folds
        )
        for label, report in reports.items():
            merged.setdefault(label, {"reports": []})["reports"].append(report)
    combo_payload = {
        label: _merged_cv_payload(entry["reports"]) for label, entry in merged.items()
    }
    payload = {
        "config": cfg.to_dict(),
        "scheme": "entries",
        "seeds": seeds,
        "combos": combo_payload,
    }
    cfg.out.mkdir(parents=True, exist_ok=True)
    path = cfg.out / "ablation.json"
    _write_json(path, payload)
    for label, entry in combo_payload.items():
        logger.info("ablation %s: mean AUC %s", label, entry["mean"]["auc"])
    print(path)
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="grdmf",
        description="Multi-graph regularized deep matrix factorization "
        "for binary association-matrix completion.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="JSON config file; flags override its values")
        p.add_argument("--association", help="association matrix CSV")
        p.add_argument(
            "--drug-sim", action="append", dest="drug_sim", metavar="[NAME=]PATH",
            help="drug-side similarity CSV, repeatable; default names s1_d, s2_d, ...",
        )
        p.add_argument(
            "--virus-sim", action="append", dest="virus_sim", metavar="[NAME=]PATH",
            help="virus-side similarity CSV, repeatable; default names s1_v, s2_v, ...",
        )
        p.add_argument(
            "--drug-profile", dest="drug_profile",
            help="binary drug feature profile CSV; converted to a cosine similarity",
        )
        p.add_argument(
            "--virus-profile", dest="virus_profile",
            help="binary virus feature profile CSV; converted to a cosine similarity",
        )
        p.add_argument("--theta", type=float, help="coupling weight, > 0")
        p.add_argument("--mu", type=float, help="graph regularization weight, >= 0")
        p.add_argument("--alpha", type=float, help="relaxation step in (0, 2)")
        p.add_argument("--p", type=int, help="neighbours kept per row when sparsifying")
        p.add_argument("--dims", help="factor dimensions, e.g. 17,15 or 23,10,7")
        p.add_argument("--layers", type=int, choices=(2, 3), help="factor depth for defaults")
        p.add_argument("--iters", type=int, help="outer iterations")
        p.add_argument("--seed", type=int, help="base RNG seed")
        p.add_argument("--out", help="output directory")

    p_fit = sub.add_parser("fit", help="fit on all observed data, emit the completed matrix")
    add_common(p_fit)

    p_predict = sub.add_parser("predict", help="rank drugs for one virus")
    add_common(p_predict)
    p_predict.add_argument("--virus", help="virus name to rank drugs for")
    p_predict.add_argument("--k", type=int, help="number of recommendations (default 10)")

    p_cv = sub.add_parser("cv", help="cross-validate under a hiding scheme")
    add_common(p_cv)
    p_cv.add_argument(
        "--scheme", choices=("entries", "viruses", "drugs", "loo"),
        help="what to hide per fold (default entries)",
    )
    p_cv.add_argument("--folds", type=int, help="fold count (default 10)")
    p_cv.add_argument("--repeats", type=int, help="repetitions with derived seeds (default 10)")
    p_cv.add_argument("--ks", help="cutoffs for loo Pre@k/Rec@k, e.g. 3,5,7")

    p_ab = sub.add_parser("ablation", help="compare similarity-source combinations")
    add_common(p_ab)
    p_ab.add_argument(
        "--combos",
        help="semicolon-separated combos 'DRUGS,VIRUSES' with '+' joining names, "
        "e.g. 's1_d,s1_v;s1_d+s2_d,s1_v+s2_v' (default: each pair, then all combined)",
    )
    p_ab.add_argument("--folds", type=int, help="fold count (default 10)")
    p_ab.add_argument("--repeats", type=int, help="repetitions with derived seeds (default 10)")

    return parser


_COMMANDS = {
    "fit": cmd_fit,
    "predict": cmd_predict,
    "cv": cmd_cv,
    "ablation": cmd_ablation,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(message)s",
        stream=sys.stderr,
    )
    try:
        cfg = resolve_config(args)
        dataset, sims = _load_inputs(cfg)
        return _COMMANDS[args.command](cfg, dataset, sims)
    except GrdmfError as exc:
        logger.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
