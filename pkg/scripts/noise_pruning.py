"""Monte Carlo check that cross-validated pruning collapses trees grown on pure noise."""
import argparse

import numpy as np

from draftlmt.dataset import from_arrays
from draftlmt.tree import TreeConfig, grow, prune


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--runs", type=int, default=20)
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--features", type=int, default=3)
    args = ap.parse_args()

    single = 0
    for s in range(args.runs):
        rng = np.random.default_rng(1000 + s)
        data = from_arrays(rng.normal(size=(args.n, args.features)), rng.integers(0, 2, args.n))
        grown = grow(data, TreeConfig(seed=s))
        pruned = prune(grown, data) if grown.n_leaves > 1 else grown
        single += pruned.n_leaves == 1
        print(f"seed {s:2d}: grown {grown.n_leaves:3d} leaves -> pruned {pruned.n_leaves}")
    print(f"{single}/{args.runs} runs pruned to a single leaf")


if __name__ == "__main__":
    main()
