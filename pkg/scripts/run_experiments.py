"""Train-on-cohort / test-on-later-year experiments, printed as a correlation table.

With no arguments this runs on the bundled synthetic fixture. Point --data at
the public draft CSV to run the four benchmark cohort splits.
"""
import argparse
import json
import time
from importlib import resources
from pathlib import Path

from draftlmt.dataset import load_dataset, split_by_years
from draftlmt.evaluation import evaluate
from draftlmt.tree import TreeConfig, train

COHORT_SPLITS = [
    ((1998, 1999, 2000), 2001),
    ((1998, 1999, 2000), 2002),
    ((2004, 2005, 2006), 2007),
    ((2004, 2005, 2006), 2008),
]
FIXTURE_SPLITS = [((2001, 2002, 2003), 2004), ((2001, 2002), 2004)]


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--data", type=Path, default=None, help="draft CSV (default: bundled fixture)")
    ap.add_argument("--columns", default=None, help="JSON map from expected to actual column names")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--criterion", choices=("logitboost", "entropy"), default="logitboost")
    ap.add_argument("--json", type=Path, default=None, help="also write all reports here")
    args = ap.parse_args()

    if args.data is None:
        path, splits = Path(str(resources.files("draftlmt") / "data" / "synthetic_draft.csv")), FIXTURE_SPLITS
    else:
        path, splits = args.data, COHORT_SPLITS
    data, _ = load_dataset(path, columns=json.loads(args.columns) if args.columns else None)
    cfg = TreeConfig(seed=args.seed, criterion=args.criterion)

    print(f"{'train':>18} {'test':>5} {'n':>5} {'groups':>6} {'draft SRC':>9} {'acc %':>6} {'model SRC':>9}"
          f" {'draft r':>7} {'model r':>7} {'sec':>5}")
    reports = []
    for train_years, test_year in splits:
        start = time.perf_counter()
        train_set, test = split_by_years(data, train_years, [test_year])
        if len(test) == 0 or len(train_set) == 0:
            print(f"{','.join(map(str, train_years)):>18} {test_year:>5}  (years missing from data)")
            continue
        tree = train(train_set, cfg)
        rep = evaluate(tree, test)
        reports.append({**rep.to_dict(), "groups": tree.n_leaves})
        print(f"{','.join(map(str, train_years)):>18} {test_year:>5} {rep.n_test:>5} {tree.n_leaves:>6}"
              f" {rep.draft_order_src:>9.2f} {100 * rep.model_accuracy:>6.2f} {rep.model_src:>9.2f}"
              f" {rep.draft_order_pearson_ranks:>7.2f} {rep.model_pearson_ranks:>7.2f}"
              f" {time.perf_counter() - start:>5.1f}")
    if args.json:
        args.json.write_text(json.dumps(reports, indent=2, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
