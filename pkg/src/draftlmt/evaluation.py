"""Rankings, Spearman correlations (squared-difference and Pearson-on-ranks) and reports."""
from __future__ import annotations

import csv
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable

import numpy as np
from scipy.stats import rankdata

from draftlmt.dataset import Dataset, SchemaError


@dataclass(eq=False)
class Ranking:
    ids: list[str]
    scores: np.ndarray
    ranks: np.ndarray  # 1 = best; tied scores share their average position
    descending: bool = True
    tie_policy: str = "average"

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def has_ties(self) -> bool:
        return len(np.unique(self.scores)) < len(self.scores)

    def ordered(self) -> list[tuple[str, float, float]]:
        """(id, score, rank) best first; ids break ties for display only."""
        order = sorted(range(len(self.ids)), key=lambda i: (self.ranks[i], self.ids[i]))
        return [(self.ids[i], float(self.scores[i]), float(self.ranks[i])) for i in order]

    def aligned_to(self, ids: list[str]) -> np.ndarray:
        pos = {pid: i for i, pid in enumerate(self.ids)}
        if len(pos) != len(self.ids):
            raise ValueError("ranking contains duplicate ids")
        if set(ids) != set(pos) or len(ids) != len(pos):
            raise ValueError("rankings cover different id sets")
        return self.ranks[[pos[i] for i in ids]]


def rank_by(scores: Iterable[tuple[str, float]], descending: bool = True) -> Ranking:
    """Rank ids by score with fractional (average) ranks for ties."""
    pairs = list(scores)
    if not pairs:
        raise ValueError("cannot rank an empty score list")
    ids = [str(p[0]) for p in pairs]
    vals = np.array([p[1] for p in pairs], dtype=float)
    if np.isnan(vals).any():
        raise ValueError("NaN score")
    ranks = rankdata(-vals if descending else vals, method="average")
    return Ranking(ids, vals, ranks.astype(float), descending)


def _paired(rank_x: Ranking, rank_y: Ranking) -> tuple[np.ndarray, np.ndarray]:
    x = rank_x.ranks
    y = rank_y.aligned_to(rank_x.ids)
    if len(x) < 2:
        raise ValueError("rank correlation needs n >= 2")
    return x, y


def spearman_d2(rank_x: Ranking, rank_y: Ranking) -> float:
    """1 - 6 sum d^2 / (n (n^2 - 1)); exact only when neither ranking has ties."""
    x, y = _paired(rank_x, rank_y)
    n = len(x)
    d = x - y
    return float(1.0 - 6.0 * np.dot(d, d) / (n * (n * n - 1.0)))


def spearman_pearson(rank_x: Ranking, rank_y: Ranking) -> float:
    """Pearson correlation of the paired (fractional) ranks."""
    x, y = _paired(rank_x, rank_y)
    xc, yc = x - x.mean(), y - y.mean()
    sxx, syy = np.dot(xc, xc), np.dot(yc, yc)
    if sxx == 0 or syy == 0:
        raise ValueError("rank correlation undefined for a constant ranking")
    return float(np.dot(xc, yc) / np.sqrt(sxx * syy))


def accuracy(predictions, labels) -> float:
    """Fraction of rows where (p >= 0.5) equals the label."""
    p = np.asarray(predictions, dtype=float)
    y = np.asarray(labels)
    if p.shape != y.shape:
        raise ValueError("predictions and labels differ in length")
    if p.size == 0:
        raise ValueError("accuracy of an empty set")
    return float(np.mean((p >= 0.5).astype(int) == y))


@dataclass
class EvaluationReport:
    train_years: list[int]
    test_years: list[int]
    n_test: int
    draft_order_src: float
    model_src: float
    model_accuracy: float
    draft_order_pearson_ranks: float
    model_pearson_ranks: float
    outcome_ties: bool
    model_ties: bool
    in_sample: bool
    overall_is_feature: bool
    schema_hash: str

    def to_dict(self) -> dict:
        return asdict(self)

    def summary(self) -> str:
        return (
            f"train {self.train_years} -> test {self.test_years} (n={self.n_test}"
            f"{', IN-SAMPLE' if self.in_sample else ''}): "
            f"draft-order SRC {self.draft_order_src:.2f}, model SRC {self.model_src:.2f}, "
            f"accuracy {100 * self.model_accuracy:.2f}%, "
            f"Pearson-of-ranks draft {self.draft_order_pearson_ranks:.2f} / model {self.model_pearson_ranks:.2f}"
        )


def rankings(tree, test: Dataset) -> tuple[np.ndarray, Ranking, Ranking, Ranking]:
    if tree.schema.hash != test.schema.hash:
        raise SchemaError(f"schema hash mismatch: model {tree.schema.hash} vs data {test.schema.hash}")
    if len(test) == 0:
        raise ValueError("empty test set")
    ids = [f"{pid}@{yr}" for pid, yr in zip(test.ids, test.years)]
    prob = tree.predict_proba(test.X)
    model = rank_by(zip(ids, prob), descending=True)
    games = rank_by(zip(ids, test.games), descending=True)
    draft = rank_by(zip(ids, test.overall.astype(float)), descending=False)
    return prob, model, games, draft


def evaluate(tree, test: Dataset) -> EvaluationReport:
    """Compare model, draft-order and realized-games rankings on ``test``."""
    prob, model, games, draft = rankings(tree, test)
    test_years = sorted(set(int(v) for v in test.years))
    return EvaluationReport(
        train_years=[int(v) for v in tree.train_years],
        test_years=test_years,
        n_test=len(test),
        draft_order_src=spearman_d2(draft, games),
        model_src=spearman_d2(model, games),
        model_accuracy=accuracy(prob, test.y),
        draft_order_pearson_ranks=spearman_pearson(draft, games),
        model_pearson_ranks=spearman_pearson(model, games),
        outcome_ties=games.has_ties,
        model_ties=model.has_ties,
        in_sample=bool(set(test_years) & set(int(v) for v in tree.train_years)),
        overall_is_feature="Overall" in test.schema.names,
        schema_hash=tree.schema.hash,
    )


def write_ranking_csv(tree, test: Dataset, path: str | Path) -> Path:
    prob, model, games, draft = rankings(tree, test)
    path = Path(path)
    rows = sorted(
        zip(test.ids, test.years, prob, model.ranks, games.ranks, draft.ranks),
        key=lambda r: (r[3], str(r[0]), int(r[1])),
    )
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "draft_year", "probability", "model_rank", "games_rank", "draft_rank"])
        for pid, yr, p, mr, gr, dr in rows:
            w.writerow([pid, int(yr), repr(float(p)), float(mr), float(gr), float(dr)])
    return path
