"""Group profiles, weight tables, proportion curves and log-odds attribution."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from draftlmt.dataset import POSITIONS, Dataset, SchemaError
from draftlmt.logistic import LogisticModel


@dataclass(eq=False)
class GroupProfile:
    group_id: int
    n: int
    mean_features: np.ndarray  # raw scale
    prop_played: float
    gp_quartiles: tuple[float, float, float, float, float]
    position_counts: dict[str, int] = field(default_factory=dict)

    @property
    def empty(self) -> bool:
        return self.n == 0

    def to_dict(self, names: list[str]) -> dict:
        return {
            "group": self.group_id,
            "n": self.n,
            "empty": self.empty,
            "prop_played": None if self.empty else self.prop_played,
            "gp_quartiles": None if self.empty else list(self.gp_quartiles),
            "mean_features": None if self.empty else dict(zip(names, map(float, self.mean_features))),
            "position_counts": self.position_counts,
        }


def _quartiles(values: np.ndarray) -> tuple[float, ...]:
    # linear interpolation between closest ranks
    return tuple(float(v) for v in np.percentile(values, [0, 25, 50, 75, 100], method="linear"))


def profile_groups(tree, data: Dataset) -> list[GroupProfile]:
    if tree.schema.hash != data.schema.hash:
        raise SchemaError("schema hash mismatch between model and data")
    groups = tree.assign_groups(data.X)
    out = []
    for lf in tree.leaves:
        m = groups == lf.group_id
        n = int(m.sum())
        counts = {p: int(np.sum(data.positions[m] == p)) for p in POSITIONS}
        if n == 0:
            nan = float("nan")
            out.append(GroupProfile(lf.group_id, 0, np.full(data.schema.width, nan), nan, (nan,) * 5, counts))
            continue
        out.append(GroupProfile(
            lf.group_id, n, data.X[m].mean(axis=0), float(data.y[m].mean()), _quartiles(data.games[m]), counts,
        ))
    return out


# --------------------------------------------------------------------------- attribution

@dataclass(eq=False)
class Attribution:
    player_id: str
    group_id: int
    total_log_odds_diff: float
    contributions: np.ndarray
    strongest: list[tuple[str, float]]
    weakest: list[tuple[str, float]]

    def to_dict(self) -> dict:
        return {
            "id": self.player_id,
            "group": self.group_id,
            "total_log_odds_diff": float(self.total_log_odds_diff),
            "strongest": [{"feature": f, "contribution": float(c)} for f, c in self.strongest],
            "weakest": [{"feature": f, "contribution": float(c)} for f, c in self.weakest],
        }


def contributions(model: LogisticModel, x: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """Per-feature w_j (z_j(x) - z_j(reference)) on the model's standardized scale."""
    return model.weights * (model.standardize(x) - model.standardize(reference))


def attribute(player_id: str, x, profile: GroupProfile, model: LogisticModel, names: list[str],
              k: int = 3) -> Attribution:
    """Explain how far a player's log-odds sit above or below the group-average player."""
    if k < 1:
        raise ValueError("k must be >= 1")
    x = np.asarray(x, dtype=float)
    if x.shape != (model.width,) or len(names) != model.width:
        raise SchemaError("player vector does not match the model's feature width")
    if profile.empty:
        raise ValueError(f"group {profile.group_id} has no reference players")
    c = contributions(model, x, profile.mean_features)
    desc = sorted(range(len(c)), key=lambda j: (-c[j], j))
    asc = sorted(range(len(c)), key=lambda j: (c[j], j))
    return Attribution(
        player_id,
        profile.group_id,
        float(np.sum(c)),
        c,
        [(names[j], float(c[j])) for j in desc[:k]],
        [(names[j], float(c[j])) for j in asc[:k]],
    )


def explain_player(tree, data: Dataset, index: int, profiles: list[GroupProfile], k: int = 3) -> dict:
    x = data.X[index]
    gid = tree.assign_group(x)
    model = tree.leaf(gid).model
    prof = profiles[gid - 1]
    att = attribute(str(data.ids[index]), x, prof, model, data.schema.names, k)
    d = att.to_dict()
    d["draft_year"] = int(data.years[index])
    d["probability"] = float(model.predict_proba(x))
    d["log_odds"] = float(model.log_odds(x))
    d["group_mean_log_odds"] = float(model.log_odds(prof.mean_features))
    names = data.schema.names
    for entry in d["strongest"] + d["weakest"]:
        j = names.index(entry["feature"])
        entry["value"] = float(x[j])
        entry["group_mean"] = float(prof.mean_features[j])
    return d


def top_players(tree, data: Dataset, per_group: int = 1, k: int = 3, reference: Dataset | None = None) -> dict:
    """Per group, the highest-probability players of ``data`` with their k strongest points.

    Group means come from ``reference`` (the training set, normally) or from
    ``data`` itself.
    """
    profiles = profile_groups(tree, reference if reference is not None else data)
    groups = tree.assign_groups(data.X)
    prob = tree.predict_proba(data.X)
    report = []
    for prof in profiles:
        idx = np.flatnonzero(groups == prof.group_id)
        order = sorted(idx, key=lambda i: (-prob[i], str(data.ids[i]), int(data.years[i])))
        players = []
        if not prof.empty:
            for rank, i in enumerate(order[:per_group], start=1):
                e = explain_player(tree, data, int(i), profiles, k)
                e["rank_in_group"] = rank
                players.append(e)
        report.append({"group": prof.group_id, "n_reference": prof.n, "n_ranked": len(idx), "players": players})
    return {"per_group": per_group, "k": k, "groups": report}


# --------------------------------------------------------------------------- figure data

@dataclass(frozen=True)
class CurvePoint:
    center: float
    proportion: float
    count: int
    low_support: bool


def proportion_curve(data: Dataset, feature: str | int, bin_width: float | None = None,
                     min_support: int = 3, mask=None) -> list[CurvePoint]:
    """Share of players with any professional games per bin of one feature.

    Bins are centred on multiples of ``bin_width``; unit width is the default
    for integer-valued features, a twentieth of the range otherwise. Empty
    bins are omitted; bins with fewer than ``min_support`` players are
    flagged as low support.
    """
    j = feature if isinstance(feature, int) else data.schema.index(feature)
    if data.schema.features[j].kind != "numeric":
        raise ValueError("proportion curves need a numeric feature")
    x = data.X[:, j] if mask is None else data.X[mask, j]
    played = (data.games > 0) if mask is None else (data.games[mask] > 0)
    if len(x) == 0:
        raise ValueError("no players to bin")
    if bin_width is None:
        if np.all(x == np.round(x)):
            bin_width = 1.0
        else:
            span = float(x.max() - x.min())
            bin_width = span / 20 if span > 0 else 1.0
    if not bin_width > 0:
        raise ValueError("bin width must be positive")
    bins = np.floor(x / bin_width + 0.5).astype(np.int64)
    out = []
    for b in np.unique(bins):
        m = bins == b
        cnt = int(m.sum())
        out.append(CurvePoint(float(b * bin_width), float(played[m].mean()), cnt, cnt < min_support))
    return out


def scatter_correlation(data: Dataset, feature: str, mask=None) -> float:
    """Pearson correlation of a raw feature with games played."""
    j = data.schema.index(feature)
    x = data.X[:, j] if mask is None else data.X[mask, j]
    g = data.games if mask is None else data.games[mask]
    if len(x) < 2 or x.std() == 0 or g.std() == 0:
        return float("nan")
    return float(np.corrcoef(x, g)[0, 1])


def weight_table(tree) -> list[dict]:
    """Feature x group table of standardized-scale weights, intercepts first."""
    rows = [{"feature": "(intercept)", **{f"group_{lf.group_id}": float(lf.model.intercept) for lf in tree.leaves}}]
    for j, name in enumerate(tree.schema.names):
        rows.append({"feature": name, **{f"group_{lf.group_id}": float(lf.model.weights[j]) for lf in tree.leaves}})
    return rows


def position_distribution(profiles: list[GroupProfile]) -> list[dict]:
    rows = []
    for p in profiles:
        forwards = sum(p.position_counts.get(pos, 0) for pos in ("L", "R", "C"))
        defense = p.position_counts.get("D", 0)
        rows.append({
            "group": p.group_id, "n": p.n, **p.position_counts,
            "forwards": forwards, "defense": defense,
            "forward_share": forwards / p.n if p.n else float("nan"),
        })
    return rows


def _write_csv(path: Path, rows: list[dict]) -> None:
    if not rows:
        path.write_text("")
        return
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})


def write_figure_bundle(tree, data: Dataset, outdir: str | Path,
                        curve_features=("CSS_rank", "rs_P", "rs_PlusMinus"), k: int = 3,
                        per_group: int = 3) -> dict[str, Path]:
    """One file per figure family; returns {family: path}."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    profiles = profile_groups(tree, data)
    names = data.schema.names
    groups = tree.assign_groups(data.X)

    box = [{"group": p.group_id, "n": p.n, "prop_played": p.prop_played,
            **dict(zip(("min", "q1", "median", "q3", "max"), p.gp_quartiles))} for p in profiles]
    means = [{"feature": nm, **{f"group_{p.group_id}": float(p.mean_features[j]) for p in profiles},
              "all": float(data.X[:, j].mean())} for j, nm in enumerate(names)]
    curves = []
    for feat in curve_features:
        if feat not in names:
            continue
        for p in profiles:
            m = groups == p.group_id
            if not m.any():
                continue
            r = scatter_correlation(data, feat, m)
            for pt in proportion_curve(data, feat, mask=m):
                curves.append({"group": p.group_id, "feature": feat, "center": pt.center,
                               "proportion": pt.proportion, "count": pt.count,
                               "low_support": pt.low_support, "scatter_pearson": r})

    paths = {
        "boxplot": outdir / "boxplot_stats.csv",
        "group_means": outdir / "group_means.csv",
        "weights": outdir / "weights.csv",
        "proportions": outdir / "proportion_curves.csv",
        "positions": outdir / "position_distribution.csv",
        "top_players": outdir / "top_players.json",
    }
    _write_csv(paths["boxplot"], box)
    _write_csv(paths["group_means"], means)
    _write_csv(paths["weights"], weight_table(tree))
    _write_csv(paths["proportions"], curves)
    _write_csv(paths["positions"], position_distribution(profiles))
    paths["top_players"].write_text(
        json.dumps(top_players(tree, data, per_group, k), indent=2, sort_keys=True) + "\n")
    return paths
