"""Regenerate the bundled synthetic draft CSV (or write one with other years/size)."""
import argparse
from importlib import resources
from pathlib import Path

from draftlmt.dataset import load_dataset
from draftlmt.synthetic import write_draft_fixture


def main() -> None:
    default = Path(str(resources.files("draftlmt") / "data" / "synthetic_draft.csv"))
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=default)
    ap.add_argument("--years", default="2001,2002,2003,2004", help="comma-separated draft years")
    ap.add_argument("--per-year", type=int, default=150)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    years = tuple(int(y) for y in args.years.split(","))
    path = write_draft_fixture(args.out, n_per_year=args.per_year, years=years, seed=args.seed)
    data, report = load_dataset(path)
    print(f"{path}: {len(data)} skaters after preprocessing, "
          f"{len(report.goalies_excluded)} goalies dropped, {len(report.merges)} merged stints, "
          f"played-any rate {data.y.mean():.3f}")


if __name__ == "__main__":
    main()
