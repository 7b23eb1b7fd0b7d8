"""Draft CSV ingestion, preprocessing and feature encoding.

Pipeline order used by :func:`load_dataset`::

    load_csv -> pool_countries -> aggregate_multi_team -> impute_css_rank
             -> check_consistency -> encode

Every step is a pure function over row lists; the optional ``report`` argument
collects what was changed so the run can be audited afterwards.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
import warnings
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

COUNTRIES = ("CAN", "USA", "EURO")
POSITIONS = ("L", "R", "C", "D")
GOALIE = "G"

SEASON_COUNTS = ("GP", "G", "A", "P", "PIM", "PlusMinus")
COUNT_COLUMNS = tuple(f"rs_{c}" for c in SEASON_COUNTS) + tuple(f"po_{c}" for c in SEASON_COUNTS)
# columns that describe the player rather than one team stint; must agree across stints
DEMOGRAPHIC_COLUMNS = (
    "DraftAge", "Country", "Position", "Overall", "CSS_rank", "Height", "Weight",
    "sum_7yr_GP", "sum_7yr_TOI", "GP_greater_than_0",
)
REQUIRED_COLUMNS = (
    ("id", "DraftYear", "DraftAge", "Country", "Position", "Overall", "CSS_rank")
    + COUNT_COLUMNS
    + ("sum_7yr_GP", "sum_7yr_TOI", "GP_greater_than_0", "Height", "Weight")
)
NUMERIC_FEATURES = ("DraftAge", "Height", "Weight", "CSS_rank") + COUNT_COLUMNS

_INCH_CM = 2.54
_LB_KG = 0.45359237


class DataError(ValueError):
    """Input data violates the CSV contract or a preprocessing precondition."""


class SchemaError(DataError):
    """A required column is missing or a schema does not match."""


class MissingColumnError(SchemaError):
    pass


@dataclass(frozen=True)
class RawRow:
    """One CSV line (or several merged lines) in canonical column names."""

    id: str
    DraftYear: int
    DraftAge: float
    Country: str
    Position: str
    Overall: int
    CSS_rank: float | None
    Height: float
    Weight: float
    rs_GP: float = 0.0
    rs_G: float = 0.0
    rs_A: float = 0.0
    rs_P: float = 0.0
    rs_PIM: float = 0.0
    rs_PlusMinus: float = 0.0
    po_GP: float = 0.0
    po_G: float = 0.0
    po_A: float = 0.0
    po_P: float = 0.0
    po_PIM: float = 0.0
    po_PlusMinus: float = 0.0
    sum_7yr_GP: float = 0.0
    sum_7yr_TOI: float = 0.0
    GP_greater_than_0: bool | None = None
    lines: tuple[int, ...] = ()

    @property
    def played_any(self) -> bool:
        return self.sum_7yr_GP > 0

    @property
    def key(self) -> tuple[str, int]:
        return (self.id, self.DraftYear)


@dataclass
class ValidationReport:
    goalies_excluded: list[dict] = field(default_factory=list)
    pooled: list[dict] = field(default_factory=list)
    merges: list[dict] = field(default_factory=list)
    imputations: list[dict] = field(default_factory=list)
    consistency_flags: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "n_goalies_excluded": len(self.goalies_excluded),
            "goalies_excluded": self.goalies_excluded,
            "pooled": self.pooled,
            "merges": self.merges,
            "imputations": self.imputations,
            "consistency_flags": self.consistency_flags,
        }


# --------------------------------------------------------------------------- load

def _parse_float(text: str, column: str, line: int, default: float | None = 0.0) -> float | None:
    text = text.strip()
    if text == "" or text.upper() in ("NA", "NAN", "NULL", "NONE"):
        return default
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"line {line}: column {column!r} is not numeric: {text!r}") from None
    if not math.isfinite(value):
        raise DataError(f"line {line}: column {column!r} is not finite: {text!r}")
    return value


def _parse_flag(text: str, line: int) -> bool | None:
    t = text.strip().lower()
    if t == "":
        return None
    if t in ("1", "1.0", "true", "yes", "y", "t"):
        return True
    if t in ("0", "0.0", "false", "no", "n", "f"):
        return False
    raise DataError(f"line {line}: column 'GP_greater_than_0' is not a boolean: {text!r}")


def load_csv(
    path: str | Path,
    columns: dict[str, str] | None = None,
    *,
    height_unit: str = "cm",
    weight_unit: str = "kg",
    report: ValidationReport | None = None,
) -> list[RawRow]:
    """Read a draft CSV into :class:`RawRow` objects, dropping goalies.

    ``columns`` maps canonical column names to the header names used in the
    file, for files that spell them differently. Heights in inches and weights
    in pounds are converted to cm / kg when the unit arguments say so.
    """
    if height_unit not in ("cm", "in"):
        raise ValueError(f"height_unit must be 'cm' or 'in', got {height_unit!r}")
    if weight_unit not in ("kg", "lb"):
        raise ValueError(f"weight_unit must be 'kg' or 'lb', got {weight_unit!r}")
    colmap = {c: c for c in REQUIRED_COLUMNS}
    colmap.update(columns or {})

    path = Path(path)
    with path.open(newline="", encoding="utf-8-sig") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise DataError(f"{path}: empty file")
        header = [h.strip() for h in reader.fieldnames]
        reader.fieldnames = header
        for canonical in REQUIRED_COLUMNS:
            if colmap[canonical] not in header:
                raise MissingColumnError(f"{path}: missing required column {colmap[canonical]!r}")

        rows: list[RawRow] = []
        for raw in reader:
            line = reader.line_num
            get = lambda c: (raw.get(colmap[c]) or "")  # noqa: E731
            position = get("Position").strip().upper()
            player_id = get("id").strip()
            if not player_id:
                raise DataError(f"line {line}: empty id")
            if position == GOALIE:
                if report is not None:
                    report.goalies_excluded.append({"id": player_id, "line": line})
                continue
            if position not in POSITIONS:
                raise DataError(f"line {line}: unknown position {position!r}")
            year = _parse_float(get("DraftYear"), "DraftYear", line, default=None)
            if year is None:
                raise DataError(f"line {line}: missing DraftYear")
            overall = _parse_float(get("Overall"), "Overall", line, default=None)
            if overall is None or overall < 1:
                raise DataError(f"line {line}: Overall must be a positive integer")
            css = _parse_float(get("CSS_rank"), "CSS_rank", line, default=None)
            if css is not None and css <= 0:
                css = None  # non-positive rank is the unranked marker in some exports
            height = _parse_float(get("Height"), "Height", line)
            weight = _parse_float(get("Weight"), "Weight", line)
            if height_unit == "in":
                height *= _INCH_CM
            if weight_unit == "lb":
                weight *= _LB_KG
            values = {c: _parse_float(get(c), c, line) for c in COUNT_COLUMNS}
            for c in ("sum_7yr_GP", "sum_7yr_TOI"):
                values[c] = _parse_float(get(c), c, line)
            rows.append(RawRow(
                id=player_id,
                DraftYear=int(year),
                DraftAge=_parse_float(get("DraftAge"), "DraftAge", line),
                Country=get("Country").strip(),
                Position=position,
                Overall=int(overall),
                CSS_rank=css,
                Height=height,
                Weight=weight,
                GP_greater_than_0=_parse_flag(get("GP_greater_than_0"), line),
                lines=(line,),
                **values,
            ))
    if not rows and (report is None or not report.goalies_excluded):
        raise DataError(f"{path}: no data rows")
    return rows


# --------------------------------------------------------------------------- preprocessing

def pool_countries(row: RawRow, report: ValidationReport | None = None) -> RawRow:
    """Map every nationality other than CAN and USA to EURO."""
    country = row.Country.strip().upper()
    if not country:
        raise DataError(f"player {row.id}: empty nationality")
    pooled = country if country in ("CAN", "USA") else "EURO"
    if report is not None and pooled != row.Country:
        report.pooled.append({"id": row.id, "from": row.Country, "to": pooled})
    return replace(row, Country=pooled)


def aggregate_multi_team(rows: Sequence[RawRow], report: ValidationReport | None = None) -> list[RawRow]:
    """Merge stints of one player in one draft year by summing count columns."""
    groups: dict[tuple[str, int], list[RawRow]] = {}
    for row in rows:
        groups.setdefault(row.key, []).append(row)

    out = []
    for key, entries in groups.items():
        if len(entries) == 1:
            out.append(entries[0])
            continue
        first = entries[0]
        for other in entries[1:]:
            for c in DEMOGRAPHIC_COLUMNS:
                if getattr(other, c) != getattr(first, c):
                    raise DataError(
                        f"player {first.id} ({first.DraftYear}): conflicting {c} across team entries "
                        f"({getattr(first, c)!r} vs {getattr(other, c)!r})"
                    )
        sums = {c: float(sum(getattr(e, c) for e in entries)) for c in COUNT_COLUMNS}
        lines = tuple(sorted(l for e in entries for l in e.lines))
        out.append(replace(first, lines=lines, **sums))
        if report is not None:
            report.merges.append({"id": first.id, "draft_year": first.DraftYear,
                                  "entries": len(entries), "lines": list(lines)})
    return out


def impute_css_rank(rows: Sequence[RawRow], report: ValidationReport | None = None) -> list[RawRow]:
    """Give unranked players (1 + the largest CSS rank of their draft year)."""
    max_rank: dict[int, float] = {}
    years = set()
    for row in rows:
        years.add(row.DraftYear)
        if row.CSS_rank is not None:
            max_rank[row.DraftYear] = max(max_rank.get(row.DraftYear, -math.inf), row.CSS_rank)
    missing = sorted(years - set(max_rank))
    if missing:
        raise DataError(f"draft year(s) {missing} have no CSS-ranked players; cannot impute")

    out = []
    for row in rows:
        if row.CSS_rank is None:
            rank = max_rank[row.DraftYear] + 1
            row = replace(row, CSS_rank=rank)
            if report is not None:
                report.imputations.append({"id": row.id, "draft_year": row.DraftYear, "css_rank": rank})
        out.append(row)
    return out


def check_consistency(rows: Iterable[RawRow], report: ValidationReport) -> None:
    """Flag (but keep) rows whose recorded values contradict each other."""
    for row in rows:
        for prefix in ("rs", "po"):
            g, a, p = (getattr(row, f"{prefix}_{s}") for s in ("G", "A", "P"))
            if p != g + a:
                report.consistency_flags.append({
                    "id": row.id, "draft_year": row.DraftYear,
                    "check": f"{prefix}_P == {prefix}_G + {prefix}_A", "values": [g, a, p],
                })
        if row.GP_greater_than_0 is not None and row.GP_greater_than_0 != row.played_any:
            report.consistency_flags.append({
                "id": row.id, "draft_year": row.DraftYear,
                "check": "GP_greater_than_0 == (sum_7yr_GP > 0)",
                "values": [row.GP_greater_than_0, row.sum_7yr_GP],
            })


def preprocess(rows: Sequence[RawRow], report: ValidationReport | None = None) -> list[RawRow]:
    rows = [pool_countries(r, report) for r in rows]
    rows = aggregate_multi_team(rows, report)
    return impute_css_rank(rows, report)


# --------------------------------------------------------------------------- encoding

@dataclass(frozen=True)
class Feature:
    name: str
    kind: str  # "numeric" | "onehot"
    column: str
    level: str | None = None


@dataclass(frozen=True)
class FeatureSchema:
    features: tuple[Feature, ...]
    label: str = "played_any"

    @classmethod
    def default(cls, include_overall: bool = False, exclude: Iterable[str] = ()) -> "FeatureSchema":
        """Numeric Table-1 features, then Country and Position one-hots."""
        exclude = set(exclude)
        numeric = list(NUMERIC_FEATURES)
        if include_overall:
            numeric.append("Overall")
        feats = [Feature(c, "numeric", c) for c in numeric if c not in exclude]
        if "Country" not in exclude:
            feats += [Feature(f"Country={lv}", "onehot", "Country", lv) for lv in COUNTRIES]
        if "Position" not in exclude:
            feats += [Feature(f"Position={lv}", "onehot", "Position", lv) for lv in POSITIONS]
        return cls(tuple(feats))

    @property
    def width(self) -> int:
        return len(self.features)

    @property
    def names(self) -> list[str]:
        return [f.name for f in self.features]

    def index(self, name: str) -> int:
        for i, f in enumerate(self.features):
            if f.name == name:
                return i
        raise KeyError(f"no feature named {name!r}")

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "features": [{"name": f.name, "kind": f.kind, "column": f.column, "level": f.level}
                         for f in self.features],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureSchema":
        return cls(tuple(Feature(**f) for f in d["features"]), d.get("label", "played_any"))

    @property
    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def encode_row(self, row: RawRow) -> np.ndarray:
        out = np.empty(self.width)
        for i, f in enumerate(self.features):
            if f.kind == "numeric":
                out[i] = float(getattr(row, f.column))
            else:
                out[i] = 1.0 if getattr(row, f.column) == f.level else 0.0
        return out

    def decode(self, vector: Sequence[float]) -> dict:
        """Invert :meth:`encode_row` for the columns the schema carries."""
        if len(vector) != self.width:
            raise SchemaError(f"vector length {len(vector)} != schema width {self.width}")
        out: dict = {}
        for f, v in zip(self.features, vector):
            if f.kind == "numeric":
                out[f.column] = float(v)
            elif v == 1.0:
                if f.column in out:
                    raise DataError(f"two active levels for {f.column}")
                out[f.column] = f.level
        return out


@dataclass
class Dataset:
    """Encoded design matrix plus the evaluation metadata kept out of ``X``."""

    schema: FeatureSchema
    ids: np.ndarray  # str
    years: np.ndarray  # int
    X: np.ndarray
    y: np.ndarray  # 0/1 int
    games: np.ndarray  # sum_7yr_GP
    overall: np.ndarray  # draft pick
    positions: np.ndarray  # str

    def __post_init__(self) -> None:
        n = len(self.ids)
        if self.X.shape != (n, self.schema.width):
            raise SchemaError(f"X has shape {self.X.shape}, expected ({n}, {self.schema.width})")
        seen = set()
        for pid, yr in zip(self.ids, self.years):
            if (pid, yr) in seen:
                raise DataError(f"duplicate player id {pid} in draft year {yr}")
            seen.add((pid, yr))

    def __len__(self) -> int:
        return len(self.ids)

    def subset(self, idx) -> "Dataset":
        return Dataset(self.schema, self.ids[idx], self.years[idx], self.X[idx], self.y[idx],
                       self.games[idx], self.overall[idx], self.positions[idx])

    def to_dict(self) -> dict:
        return {
            "schema": self.schema.to_dict(),
            "schema_hash": self.schema.hash,
            "rows": [
                {"id": str(i), "draft_year": int(yr), "x": [float(v) for v in x], "label": int(lab),
                 "sum_7yr_GP": float(g), "overall": int(o), "position": str(p)}
                for i, yr, x, lab, g, o, p in zip(self.ids, self.years, self.X, self.y,
                                                  self.games, self.overall, self.positions)
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Dataset":
        schema = FeatureSchema.from_dict(d["schema"])
        rows = d["rows"]
        return cls(
            schema,
            np.array([r["id"] for r in rows], dtype=object),
            np.array([r["draft_year"] for r in rows], dtype=int),
            np.array([r["x"] for r in rows], dtype=float).reshape(len(rows), schema.width),
            np.array([r["label"] for r in rows], dtype=int),
            np.array([r["sum_7yr_GP"] for r in rows], dtype=float),
            np.array([r["overall"] for r in rows], dtype=int),
            np.array([r["position"] for r in rows], dtype=object),
        )


def encode(rows: Sequence[RawRow], schema: FeatureSchema) -> Dataset:
    n = len(rows)
    X = np.array([schema.encode_row(r) for r in rows], dtype=float).reshape(n, schema.width)
    return Dataset(
        schema=schema,
        ids=np.array([r.id for r in rows], dtype=object),
        years=np.array([r.DraftYear for r in rows], dtype=int),
        X=X,
        y=np.array([int(r.played_any) for r in rows], dtype=int),
        games=np.array([r.sum_7yr_GP for r in rows], dtype=float),
        overall=np.array([r.Overall for r in rows], dtype=int),
        positions=np.array([r.Position for r in rows], dtype=object),
    )


def split_by_years(data: Dataset, train_years: Iterable[int], test_years: Iterable[int]) -> tuple[Dataset, Dataset]:
    train_years, test_years = set(map(int, train_years)), set(map(int, test_years))
    overlap = train_years & test_years
    if overlap:
        raise DataError(f"train and test years overlap: {sorted(overlap)}")
    present = set(data.years.tolist())
    for yr in sorted((train_years | test_years) - present):
        warnings.warn(f"draft year {yr} has no rows in the dataset", stacklevel=2)
    train = np.isin(data.years, sorted(train_years))
    test = np.isin(data.years, sorted(test_years))
    return data.subset(np.flatnonzero(train)), data.subset(np.flatnonzero(test))


def load_dataset(
    path: str | Path,
    schema: FeatureSchema | None = None,
    columns: dict[str, str] | None = None,
    **units,
) -> tuple[Dataset, ValidationReport]:
    report = ValidationReport()
    rows = load_csv(path, columns, report=report, **units)
    rows = preprocess(rows, report)
    check_consistency(rows, report)
    return encode(rows, schema or FeatureSchema.default()), report


def file_hash(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def raw_row_fields() -> list[str]:
    return [f.name for f in fields(RawRow) if f.name != "lines"]


def from_arrays(
    X,
    y,
    names: Sequence[str] | None = None,
    *,
    ids=None,
    years=None,
    games=None,
    overall=None,
    positions=None,
) -> Dataset:
    """Wrap a plain numeric design matrix as a :class:`Dataset`.

    Used for synthetic data; omitted metadata gets neutral defaults (games
    played equal to the label, draft pick equal to row order).
    """
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    names = list(names) if names is not None else [f"x{j}" for j in range(d)]
    schema = FeatureSchema(tuple(Feature(nm, "numeric", nm) for nm in names))
    y = np.asarray(y, dtype=int)
    return Dataset(
        schema=schema,
        ids=np.array([f"p{i:06d}" for i in range(n)] if ids is None else list(ids), dtype=object),
        years=np.zeros(n, dtype=int) if years is None else np.asarray(years, dtype=int),
        X=X,
        y=y,
        games=y.astype(float) if games is None else np.asarray(games, dtype=float),
        overall=np.arange(1, n + 1) if overall is None else np.asarray(overall, dtype=int),
        positions=np.array(["C"] * n if positions is None else list(positions), dtype=object),
    )
