import csv
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from draftlmt.analysis import (
    GroupProfile,
    attribute,
    contributions,
    profile_groups,
    proportion_curve,
    scatter_correlation,
    top_players,
    weight_table,
    write_figure_bundle,
)
from draftlmt.dataset import SchemaError, from_arrays
from draftlmt.logistic import LogisticModel
from draftlmt.tree import TreeConfig, grow, train


@pytest.fixture(scope="module")
def draft_tree(draft_data):
    return train(draft_data)


# --------------------------------------------------------------------------- profiles

def test_single_leaf_profile_is_whole_dataset(draft_data):
    tree = grow(draft_data, TreeConfig(max_depth=0))
    (prof,) = profile_groups(tree, draft_data)
    assert prof.n == len(draft_data)
    np.testing.assert_allclose(prof.mean_features, draft_data.X.mean(axis=0))
    assert prof.prop_played == pytest.approx(draft_data.y.mean())
    assert prof.gp_quartiles[0] == draft_data.games.min() and prof.gp_quartiles[4] == draft_data.games.max()
    assert prof.gp_quartiles[2] == np.median(draft_data.games)


def test_profiles_partition_and_average(draft_data, draft_tree):
    profiles = profile_groups(draft_tree, draft_data)
    assert sum(p.n for p in profiles) == len(draft_data)
    weighted = sum(p.n * p.mean_features for p in profiles if p.n) / len(draft_data)
    np.testing.assert_allclose(weighted, draft_data.X.mean(axis=0), rtol=1e-12, atol=1e-9)
    for p in profiles:
        q = p.gp_quartiles
        assert q[0] <= q[1] <= q[2] <= q[3] <= q[4]
        assert sum(p.position_counts.values()) == p.n
        assert len(p.mean_features) == draft_data.schema.width


def test_quartiles_interpolate_linearly():
    games = np.array([0.0, 10.0, 20.0, 100.0])
    data = from_arrays(np.zeros((4, 1)), games > 0, games=games)
    tree = grow(data, TreeConfig(max_depth=0))
    (prof,) = profile_groups(tree, data)
    # positions 0.75, 1.5, 2.25 between order statistics
    assert prof.gp_quartiles == (0.0, 7.5, 15.0, 40.0, 100.0)


def test_empty_group_flagged(draft_data, draft_tree):
    subset = draft_data.subset(np.flatnonzero(draft_tree.assign_groups(draft_data.X) == 1))
    profiles = profile_groups(draft_tree, subset)
    assert profiles[0].n == len(subset)
    if draft_tree.n_leaves > 1:
        assert profiles[1].empty
        assert profiles[1].to_dict(draft_data.schema.names)["mean_features"] is None


def test_profile_schema_mismatch(draft_tree):
    with pytest.raises(SchemaError):
        profile_groups(draft_tree, from_arrays(np.zeros((3, 2)), [0, 1, 0]))


# --------------------------------------------------------------------------- attribution

def test_player_at_group_mean_has_zero_attribution(draft_data, draft_tree):
    prof = profile_groups(draft_tree, draft_data)[0]
    model = draft_tree.leaf(prof.group_id).model
    att = attribute("avg", prof.mean_features, prof, model, draft_data.schema.names)
    assert np.all(att.contributions == 0) and att.total_log_odds_diff == 0


def test_single_weight_is_strongest():
    names = ["a", "b", "c"]
    model = LogisticModel(0.4, np.array([0.0, 2.0, 0.0]), np.zeros(3), np.ones(3))
    prof = GroupProfile(1, 10, np.zeros(3), 0.5, (0, 0, 0, 0, 0))
    att = attribute("p", np.array([5.0, 1.0, -3.0]), prof, model, names, k=1)
    assert att.strongest == [("b", 2.0)]
    assert att.weakest[0][1] == 0.0


def test_strongest_and_weakest_disjoint(draft_data, draft_tree):
    profiles = profile_groups(draft_tree, draft_data)
    groups = draft_tree.assign_groups(draft_data.X)
    for i in range(0, len(draft_data), 37):
        g = groups[i]
        att = attribute(str(i), draft_data.X[i], profiles[g - 1], draft_tree.leaf(g).model,
                        draft_data.schema.names, k=3)
        if np.count_nonzero(att.contributions) >= 6:
            assert not {f for f, _ in att.strongest} & {f for f, _ in att.weakest}
        assert [c for _, c in att.strongest] == sorted((c for _, c in att.strongest), reverse=True)


def test_attribute_rejects_bad_input():
    model = LogisticModel(0.0, np.ones(2), np.zeros(2), np.ones(2))
    prof = GroupProfile(1, 5, np.zeros(2), 0.5, (0, 0, 0, 0, 0))
    with pytest.raises(ValueError):
        attribute("p", np.zeros(2), prof, model, ["a", "b"], k=0)
    with pytest.raises(SchemaError):
        attribute("p", np.zeros(3), prof, model, ["a", "b"])


@given(st.lists(st.floats(-1e3, 1e3), min_size=4, max_size=4),
       st.lists(st.floats(-1e3, 1e3), min_size=4, max_size=4),
       st.lists(st.floats(-5, 5), min_size=4, max_size=4))
@settings(max_examples=200)
def test_decomposition_is_exact(x, ref, w):
    model = LogisticModel(1.3, np.array(w), np.array([1.0, -2.0, 0.0, 5.0]), np.array([0.5, 2.0, 1.0, 10.0]))
    c = contributions(model, np.array(x), np.array(ref))
    diff = model.log_odds(x) - model.log_odds(ref)
    assert np.sum(c) == pytest.approx(diff, abs=1e-10 * max(1.0, np.abs(c).sum()))


def test_group_average_total_is_zero(draft_data, draft_tree):
    profiles = profile_groups(draft_tree, draft_data)
    groups = draft_tree.assign_groups(draft_data.X)
    for prof in profiles:
        m = groups == prof.group_id
        model = draft_tree.leaf(prof.group_id).model
        totals = [contributions(model, x, prof.mean_features).sum() for x in draft_data.X[m]]
        assert abs(np.mean(totals)) < 1e-10


# --------------------------------------------------------------------------- top players

def test_top_players_single_group_is_global_argmax(draft_data):
    tree = grow(draft_data, TreeConfig(max_depth=0))
    rep = top_players(tree, draft_data, per_group=1)
    (grp,) = rep["groups"]
    best = int(np.argmax(tree.predict_proba(draft_data.X)))
    assert grp["players"][0]["id"] == draft_data.ids[best]
    assert len(grp["players"][0]["strongest"]) == 3


def test_top_players_shape_and_order(draft_data, draft_tree):
    rep = top_players(draft_tree, draft_data, per_group=3, k=2)
    assert [g["group"] for g in rep["groups"]] == list(range(1, draft_tree.n_leaves + 1))
    for g in rep["groups"]:
        probs = [p["probability"] for p in g["players"]]
        assert probs == sorted(probs, reverse=True)
        for p in g["players"]:
            assert len(p["strongest"]) == 2
            assert p["total_log_odds_diff"] == pytest.approx(p["log_odds"] - p["group_mean_log_odds"], abs=1e-10)


# --------------------------------------------------------------------------- proportion curves

def test_all_played_gives_unit_proportions():
    x = np.array([[1.0], [1.0], [2.0], [5.0]])
    data = from_arrays(x, [1, 1, 1, 1], games=[3, 9, 1, 40])
    pts = proportion_curve(data, 0)
    assert all(p.proportion == 1.0 for p in pts)


def test_empty_bins_omitted_and_counts_sum():
    x = np.array([[1.0], [1.0], [1.0], [7.0]])
    data = from_arrays(x, [0, 1, 1, 0])
    pts = proportion_curve(data, 0)
    assert [p.center for p in pts] == [1.0, 7.0]
    assert [p.count for p in pts] == [3, 1]
    assert pts[0].proportion == pytest.approx(2 / 3)
    assert not pts[0].low_support and pts[1].low_support


def test_zero_width_rejected():
    data = from_arrays(np.array([[1.0], [2.0]]), [0, 1])
    with pytest.raises(ValueError):
        proportion_curve(data, 0, bin_width=0.0)


def test_one_hot_rejected(draft_data):
    with pytest.raises(ValueError):
        proportion_curve(draft_data, "Country=CAN")


@given(st.lists(st.tuples(st.integers(0, 30), st.booleans()), min_size=1, max_size=60), st.randoms())
@settings(max_examples=100, deadline=None)
def test_curve_invariants(rows, rnd):
    x = np.array([[float(v)] for v, _ in rows])
    played = np.array([int(p) for _, p in rows])
    data = from_arrays(x, played, games=played * 10)
    pts = proportion_curve(data, 0, bin_width=3.0)
    assert sum(p.count for p in pts) == len(rows)
    assert all(0 <= p.proportion <= 1 for p in pts)
    perm = list(range(len(rows)))
    rnd.shuffle(perm)
    assert proportion_curve(data.subset(np.array(perm)), 0, bin_width=3.0) == pts


def test_scatter_correlation_sign():
    x = np.arange(10.0)[:, None]
    games = np.arange(10.0)[::-1]
    data = from_arrays(x, games > 0, games=games)
    assert scatter_correlation(data, "x0") == pytest.approx(-1.0)


# --------------------------------------------------------------------------- bundle

def test_weight_table_shape(draft_tree, draft_data):
    rows = weight_table(draft_tree)
    assert len(rows) == draft_data.schema.width + 1
    assert set(rows[0]) == {"feature"} | {f"group_{i}" for i in range(1, draft_tree.n_leaves + 1)}


def test_figure_bundle_files(tmp_path, draft_tree, draft_data):
    paths = write_figure_bundle(draft_tree, draft_data, tmp_path)
    assert set(paths) == {"boxplot", "group_means", "weights", "proportions", "positions", "top_players"}
    with paths["boxplot"].open() as fh:
        box = list(csv.DictReader(fh))
    assert [int(r["group"]) for r in box] == list(range(1, draft_tree.n_leaves + 1))
    assert sum(int(r["n"]) for r in box) == len(draft_data)
    top = json.loads(paths["top_players"].read_text())
    assert len(top["groups"]) == draft_tree.n_leaves
