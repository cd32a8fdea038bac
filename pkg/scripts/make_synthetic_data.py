#!/usr/bin/env python3
"""Emit a synthetic CSV bundle for exercising the CLI.

Plants a low-rank nonnegative structure, binarizes it at a percentile, and
writes the association matrix, both similarity matrices (cosine similarity of
the true latent factors) and thresholded binary feature profiles.

Example:

    python scripts/make_synthetic_data.py --out data/synthetic --seed 0
    grdmf fit --association data/synthetic/association.csv \
        --drug-sim data/synthetic/drug_sim.csv \
        --virus-sim data/synthetic/virus_sim.csv \
        --mu 1 --theta 1 --alpha 0.5 --p 5 --dims 5,3 --out runs/demo
"""

import argparse

from grdmf.synthetic import make_synthetic_problem, write_synthetic_csvs


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--drugs", type=int, default=40, help="number of drug rows")
    parser.add_argument("--viruses", type=int, default=20, help="number of virus columns")
    parser.add_argument("--rank", type=int, default=3, help="planted latent rank")
    parser.add_argument("--seed", type=int, default=0, help="RNG seed")
    parser.add_argument(
        "--percentile", type=float, default=70.0,
        help="binarization threshold percentile (default 70)",
    )
    args = parser.parse_args()

    problem = make_synthetic_problem(
        m=args.drugs, n=args.viruses, rank=args.rank,
        seed=args.seed, percentile=args.percentile,
    )
    paths = write_synthetic_csvs(problem, args.out)
    density = problem.dataset.y.mean()
    print(
        f"{args.drugs} drugs x {args.viruses} viruses, rank {args.rank}, "
        f"{density:.1%} positive"
    )
    for name, path in paths.items():
        print(f"  {name}: {path}")


if __name__ == "__main__":
    main()
