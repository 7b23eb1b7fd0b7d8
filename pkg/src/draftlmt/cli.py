"""Command-line front end: ingest, train, evaluate, groups, explain.

Runs are driven by a flat JSON config file; any key can be overridden by the
matching command-line flag. Exit codes: 0 ok, 2 usage, 3 data validation,
4 schema/model mismatch.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from draftlmt import __version__
from draftlmt.analysis import explain_player, profile_groups, top_players, write_figure_bundle
from draftlmt.dataset import (
    DataError,
    Dataset,
    FeatureSchema,
    MissingColumnError,
    SchemaError,
    file_hash,
    load_dataset,
)
from draftlmt.evaluation import evaluate, write_ranking_csv
from draftlmt.tree import ModelTree, TreeConfig, train

log = logging.getLogger("draftlmt")

EXIT_USAGE, EXIT_DATA, EXIT_SCHEMA = 2, 3, 4


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    data: str = ""
    train_years: list[int] = field(default_factory=list)
    test_years: list[int] = field(default_factory=list)
    out: str = "out"
    min_leaf: int = 10
    min_split: int = 30
    max_depth: int = 6
    min_gain: float = 1e-3
    boost_stages: int = 20
    prune_folds: int = 5
    ridge: float = 1e-6
    criterion: str = "logitboost"
    seed: int = 0
    include_overall: bool = False
    exclude_features: list[str] = field(default_factory=list)
    height_unit: str = "cm"
    weight_unit: str = "kg"

    def __post_init__(self) -> None:
        self.train_years = sorted(int(y) for y in self.train_years)
        self.test_years = sorted(int(y) for y in self.test_years)
        overlap = set(self.train_years) & set(self.test_years)
        if overlap:
            raise UsageError(f"train_years and test_years overlap: {sorted(overlap)}")
        try:
            self.tree_config()
        except ValueError as exc:
            raise UsageError(str(exc)) from None

    def tree_config(self) -> TreeConfig:
        return TreeConfig(
            min_leaf=self.min_leaf, min_split=self.min_split, min_gain=self.min_gain,
            max_depth=self.max_depth, boost_stages=self.boost_stages, prune_folds=self.prune_folds,
            ridge=self.ridge, criterion=self.criterion, seed=self.seed,
        )

    def schema(self) -> FeatureSchema:
        return FeatureSchema.default(self.include_overall, self.exclude_features)


def _parse_years(text: str) -> list[int]:
    years: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part:
            a, b = part.split("-")
            years += list(range(int(a), int(b) + 1))
        elif part:
            years.append(int(part))
    return years


def _bool(text: str) -> bool:
    return text.lower() in ("1", "true", "yes", "y", "on")


_FLAG_TYPES = {
    "data": str, "out": str, "train_years": _parse_years, "test_years": _parse_years,
    "min_leaf": int, "min_split": int, "max_depth": int, "min_gain": float, "boost_stages": int,
    "prune_folds": int, "ridge": float, "criterion": str, "seed": int, "include_overall": _bool,
    "exclude_features": lambda s: [p.strip() for p in s.split(",") if p.strip()],
    "height_unit": str, "weight_unit": str,
}


def load_config(args: argparse.Namespace) -> RunConfig:
    values: dict = {}
    if args.config:
        path = Path(args.config)
        try:
            values = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from None
        if not isinstance(values, dict) or any(isinstance(v, dict) for v in values.values()):
            raise UsageError("config must be a flat JSON object")
        unknown = set(values) - {f.name for f in fields(RunConfig)}
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        if values.get("data") and not Path(values["data"]).is_absolute():
            values["data"] = str((path.parent / values["data"]).resolve())
    for key in _FLAG_TYPES:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    return RunConfig(**values)


# --------------------------------------------------------------------------- io helpers

def _dump(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, allow_nan=False) + "\n")


def _provenance(cfg: RunConfig, input_hash: str, schema_hash: str) -> dict:
    snapshot = {k: v for k, v in asdict(cfg).items() if k != "out"}
    return {"config": snapshot, "input_hash": input_hash, "schema_hash": schema_hash,
            "tool_version": __version__}


def _require_data(cfg: RunConfig) -> Path:
    if not cfg.data:
        raise UsageError("no data path given (config key 'data' or --data)")
    path = Path(cfg.data)
    if not path.is_file():
        raise DataError(f"data file not found: {path}")
    return path


def _load(cfg: RunConfig) -> tuple[Dataset, dict, str]:
    """Encoded dataset from the cache when it matches the input, else fresh."""
    path = _require_data(cfg)
    digest = file_hash(path)
    schema = cfg.schema()
    cache = Path(cfg.out) / "dataset.json"
    if cache.is_file():
        blob = json.loads(cache.read_text())
        prov = blob.get("provenance", {})
        if prov.get("input_hash") == digest and prov.get("schema_hash") == schema.hash:
            return Dataset.from_dict(blob["dataset"]), blob.get("validation", {}), digest
        log.info("cache %s is stale; re-ingesting", cache)
    data, report = load_dataset(path, schema, height_unit=cfg.height_unit, weight_unit=cfg.weight_unit)
    return data, report.to_dict(), digest


def _load_model(args, cfg: RunConfig) -> ModelTree:
    path = Path(args.model) if args.model else Path(cfg.out) / "model.json"
    if not path.is_file():
        raise DataError(f"model file not found: {path}")
    try:
        return ModelTree.from_json(path.read_text())
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        if isinstance(exc, SchemaError):
            raise
        raise DataError(f"cannot read model {path}: {exc}") from None


def _check_model(tree: ModelTree, data: Dataset) -> None:
    if tree.schema.hash != data.schema.hash:
        raise SchemaError(f"model schema {tree.schema.hash} does not match data schema {data.schema.hash}")


def _years_subset(data: Dataset, years: list[int]) -> Dataset:
    return data.subset(np.flatnonzero(np.isin(data.years, years)))


# --------------------------------------------------------------------------- commands

def cmd_ingest(args, cfg: RunConfig) -> int:
    path = _require_data(cfg)
    schema = cfg.schema()
    data, report = load_dataset(path, schema, height_unit=cfg.height_unit, weight_unit=cfg.weight_unit)
    digest = file_hash(path)
    prov = _provenance(cfg, digest, schema.hash)
    out = Path(cfg.out)
    _dump(out / "dataset.json", {"provenance": prov, "validation": report.to_dict(), "dataset": data.to_dict()})
    _dump(out / "validation_report.json", {"provenance": prov, "n_rows": len(data), **report.to_dict()})
    print(f"ingested {len(data)} players from {path} -> {out / 'dataset.json'}")
    return 0


def cmd_train(args, cfg: RunConfig) -> int:
    data, _, digest = _load(cfg)
    if not cfg.train_years:
        raise UsageError("no train_years given")
    train_set = _years_subset(data, cfg.train_years)
    if len(train_set) == 0:
        raise DataError(f"no players in training years {cfg.train_years}")
    tree = train(train_set, cfg.tree_config())
    tree.train_years = list(cfg.train_years)
    payload = tree.to_dict()
    payload["provenance"] = _provenance(cfg, digest, tree.schema.hash)
    path = Path(cfg.out) / "model.json"
    _dump(path, payload)
    print(f"trained tree with {tree.n_leaves} groups (depth {tree.depth}) on {len(train_set)} players -> {path}")
    return 0


def cmd_evaluate(args, cfg: RunConfig) -> int:
    data, _, digest = _load(cfg)
    tree = _load_model(args, cfg)
    _check_model(tree, data)
    years = cfg.test_years
    if not years:
        raise UsageError("no test_years given")
    test = _years_subset(data, years)
    if len(test) == 0:
        raise DataError(f"no players in test years {years}")
    report = evaluate(tree, test)
    out = Path(cfg.out)
    _dump(out / "evaluation.json", {"provenance": _provenance(cfg, digest, tree.schema.hash), **report.to_dict()})
    write_ranking_csv(tree, test, out / "ranking.csv")
    print(report.summary())
    return 0


def cmd_groups(args, cfg: RunConfig) -> int:
    data, _, digest = _load(cfg)
    tree = _load_model(args, cfg)
    _check_model(tree, data)
    ref = _years_subset(data, tree.train_years or cfg.train_years)
    if len(ref) == 0:
        raise DataError("no training-year players to profile")
    outdir = Path(cfg.out) / "groups"
    write_figure_bundle(tree, ref, outdir)
    profiles = [p.to_dict(ref.schema.names) for p in profile_groups(tree, ref)]
    _dump(outdir / "group_profiles.json",
          {"provenance": _provenance(cfg, digest, tree.schema.hash), "groups": profiles})
    print(f"wrote {len(profiles)} group profiles and figure data to {outdir}")
    return 0


def cmd_explain(args, cfg: RunConfig) -> int:
    data, _, digest = _load(cfg)
    tree = _load_model(args, cfg)
    _check_model(tree, data)
    ref = _years_subset(data, tree.train_years or cfg.train_years)
    if len(ref) == 0:
        raise DataError("no training-year players to use as group reference")
    prov = _provenance(cfg, digest, tree.schema.hash)
    if args.top is not None:
        body = top_players(tree, ref, per_group=args.top, k=args.k)
    else:
        hits = np.flatnonzero(data.ids == args.player)
        if args.year is not None:
            hits = hits[data.years[hits] == args.year]
        if len(hits) == 0:
            raise DataError(f"unknown player id {args.player!r}")
        profiles = profile_groups(tree, ref)
        body = {"players": [explain_player(tree, data, int(i), profiles, args.k) for i in hits]}
    path = Path(cfg.out) / "explain.json"
    _dump(path, {"provenance": prov, **body})
    print(f"wrote {path}")
    return 0


# --------------------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat JSON run config")
    common.add_argument("--out", default=None, help="output directory")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--verbose", "-v", action="count", default=0)
    common.add_argument("--data", default=None, help="draft CSV")
    common.add_argument("--train-years", dest="train_years", type=_parse_years, default=None,
                        help="e.g. 2004-2006 or 1998,1999,2000")
    common.add_argument("--test-years", dest="test_years", type=_parse_years, default=None)
    for key in ("min_leaf", "min_split", "max_depth", "boost_stages", "prune_folds"):
        common.add_argument("--" + key.replace("_", "-"), dest=key, type=int, default=None)
    for key in ("min_gain", "ridge"):
        common.add_argument("--" + key.replace("_", "-"), dest=key, type=float, default=None)
    common.add_argument("--criterion", choices=("logitboost", "entropy"), default=None)
    common.add_argument("--include-overall", dest="include_overall", type=_bool, default=None)
    common.add_argument("--exclude-features", dest="exclude_features", type=_FLAG_TYPES["exclude_features"],
                        default=None)
    common.add_argument("--height-unit", dest="height_unit", choices=("cm", "in"), default=None)
    common.add_argument("--weight-unit", dest="weight_unit", choices=("kg", "lb"), default=None)

    parser = argparse.ArgumentParser(prog="draftlmt", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("ingest", parents=[common], help="validate and encode the draft CSV")
    sub.add_parser("train", parents=[common], help="grow and prune a logistic model tree")
    for name, helptext in (("evaluate", "rank correlations and accuracy on held-out years"),
                           ("groups", "group profiles and figure data")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--model", default=None)
    p = sub.add_parser("explain", parents=[common], help="strong and weak points of players")
    p.add_argument("--model", default=None)
    who = p.add_mutually_exclusive_group(required=True)
    who.add_argument("--player", help="player id")
    who.add_argument("--top", type=int, help="top N players per group")
    p.add_argument("--year", type=int, default=None, help="draft year, when an id was drafted twice")
    p.add_argument("-k", type=int, default=3, help="number of strongest/weakest features")
    return parser


COMMANDS = {
    "ingest": cmd_ingest,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "groups": cmd_groups,
    "explain": cmd_explain,
}


def _fail(code: int, kind: str, message: str) -> int:
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args)
        return COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        return _fail(EXIT_USAGE, "usage", str(exc))
    except MissingColumnError as exc:
        return _fail(EXIT_DATA, "data", str(exc))
    except SchemaError as exc:
        return _fail(EXIT_SCHEMA, "schema", str(exc))
    except DataError as exc:
        return _fail(EXIT_DATA, "data", str(exc))


if __name__ == "__main__":
    sys.exit(main())
