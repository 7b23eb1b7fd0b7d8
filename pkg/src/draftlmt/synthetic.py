"""Seeded synthetic data: the two-regime benchmark and a draft-format CSV fixture."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
from scipy.special import expit

from draftlmt.dataset import REQUIRED_COLUMNS


def two_regime(n: int = 4000, seed: int = 0, noise_features: int = 0):
    """x0 ~ U(0, 10), x1 ~ N(0, 1); P(y=1) = sigmoid(2 x1) if x0 < 5 else sigmoid(-2 x1).

    Returns ``(X, y, p)`` with ``p`` the true class-1 probability per row.
    """
    rng = np.random.default_rng(seed)
    x0 = rng.uniform(0.0, 10.0, n)
    x1 = rng.standard_normal(n)
    cols = [x0, x1] + [rng.standard_normal(n) for _ in range(noise_features)]
    p = np.where(x0 < 5.0, expit(2.0 * x1), expit(-2.0 * x1))
    y = (rng.uniform(size=n) < p).astype(int)
    return np.column_stack(cols), y, p


def bayes_accuracy(p: np.ndarray) -> float:
    """Expected accuracy of the rule predicting 1 iff p >= 0.5."""
    return float(np.mean(np.maximum(p, 1.0 - p)))


_EURO = ("SWE", "FIN", "RUS", "CZE", "SVK", "GER", "SUI", "EURO")


def draft_fixture(n_per_year: int = 150, years=(2001, 2002, 2003, 2004), seed: int = 7) -> list[dict]:
    """Draft-format rows whose outcome follows a two-regime rule on CSS rank.

    Scouted players (CSS rank < 60) succeed on points; for the rest
    plus-minus helps and points count against. The file also exercises preprocessing:
    unranked players, European nationalities, goalies and two-team seasons.
    """
    rng = np.random.default_rng(seed)
    out: list[dict] = []
    for year in years:
        ranks = rng.permutation(np.arange(1, n_per_year + 1))
        picks = rng.permutation(np.arange(1, n_per_year + 1))
        for i in range(n_per_year):
            pid = f"{year}{i:04d}"
            rank = int(ranks[i])
            position = str(rng.choice(["L", "R", "C", "D", "C", "D"]))
            gp = int(rng.integers(20, 72))
            goals = int(rng.poisson(12 if position != "D" else 5))
            assists = int(rng.poisson(18))
            pm = int(rng.integers(-25, 30))
            po_gp = int(rng.integers(0, 25))
            po_g = int(rng.poisson(po_gp / 8))
            po_a = int(rng.poisson(po_gp / 5))
            points = goals + assists
            if rank < 60:
                eta = 0.2 * (points - 30) + 1.0
            else:
                eta = 0.25 * pm - 0.15 * (points - 30) - 0.5
            played = rng.uniform() < expit(eta)
            games = int(rng.integers(1, 400)) if played else 0
            row = {
                "id": pid,
                "DraftYear": year,
                "DraftAge": round(float(rng.uniform(17.5, 19.5)), 2),
                "Country": str(rng.choice(["CAN", "CAN", "USA"] + list(_EURO))),
                "Position": position,
                "Overall": int(picks[i]),
                "CSS_rank": "" if rank > n_per_year - 8 else rank,
                "Height": round(float(rng.normal(185, 5)), 1),
                "Weight": round(float(rng.normal(88, 7)), 1),
                "rs_GP": gp, "rs_G": goals, "rs_A": assists, "rs_P": points,
                "rs_PIM": int(rng.integers(0, 120)), "rs_PlusMinus": pm,
                "po_GP": po_gp, "po_G": po_g, "po_A": po_a, "po_P": po_g + po_a,
                "po_PIM": int(rng.integers(0, 30)), "po_PlusMinus": int(rng.integers(-6, 8)),
                "sum_7yr_GP": games,
                "sum_7yr_TOI": round(games * float(rng.uniform(8, 20)), 1),
                "GP_greater_than_0": "yes" if played else "no",
            }
            if i % 40 == 5:
                # season split over a league team and a national team
                first = dict(row, rs_GP=gp - 6, rs_G=goals - goals // 3, rs_A=assists - assists // 3,
                             rs_P=points - goals // 3 - assists // 3, rs_PlusMinus=pm + 3)
                second = dict(row, rs_GP=6, rs_G=goals // 3, rs_A=assists // 3,
                              rs_P=goals // 3 + assists // 3, rs_PlusMinus=-3,
                              po_GP=0, po_G=0, po_A=0, po_P=0, po_PIM=0, po_PlusMinus=0,
                              rs_PIM=0)
                first["po_PIM"] = row["po_PIM"]
                out += [first, second]
            else:
                out.append(row)
        for g in range(3):
            out.append({c: "" for c in REQUIRED_COLUMNS} | {
                "id": f"{year}G{g}", "DraftYear": year, "Position": "G", "Overall": n_per_year + g + 1,
                "Country": "CAN",
            })
    return out


def write_draft_fixture(path: str | Path, **kwargs) -> Path:
    rows = draft_fixture(**kwargs)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(REQUIRED_COLUMNS), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
    return path
