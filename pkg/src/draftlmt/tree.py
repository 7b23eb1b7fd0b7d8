"""Logistic model trees: growth, cost-complexity pruning, leaf refits, routing.

A numeric split sends ``x[f] < threshold`` left and ``x[f] >= threshold``
right. Category splits are one-level-vs-rest on a one-hot column and use the
same rule with threshold 0.5, so members of the level go right.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from typing import Union

import numpy as np

from draftlmt import __version__
from draftlmt.dataset import Dataset, FeatureSchema, SchemaError
from draftlmt.logistic import (
    PROB_FLOOR,
    AdditiveStageModel,
    LogisticModel,
    fit_mle,
    logitboost_fit,
    standardize_design,
)

CRITERIA = ("logitboost", "entropy")


@dataclass
class TreeConfig:
    min_leaf: int = 10
    min_split: int = 30
    min_gain: float = 1e-3
    max_depth: int = 6
    boost_stages: int = 20
    prune_folds: int = 5
    ridge: float = 1e-6
    tol: float = 1e-8
    max_iter: int = 100
    criterion: str = "logitboost"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.min_leaf < 1:
            raise ValueError("min_leaf must be >= 1")
        if self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")
        if self.boost_stages < 0:
            raise ValueError("boost_stages must be >= 0")
        if self.prune_folds == 1 or self.prune_folds < 0:
            raise ValueError("prune_folds must be 0 (no pruning) or >= 2")
        if self.ridge < 0:
            raise ValueError("ridge must be non-negative")
        if self.criterion not in CRITERIA:
            raise ValueError(f"criterion must be one of {CRITERIA}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TreeConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in known})


@dataclass(frozen=True)
class Split:
    feature: int
    threshold: float
    kind: str = "numeric"  # "numeric" | "category"
    levels: tuple[str, ...] = ()

    def goes_right(self, X: np.ndarray) -> np.ndarray:
        return X[..., self.feature] >= self.threshold


@dataclass(eq=False)
class Leaf:
    model: LogisticModel
    n: int = 0
    prop_played: float = float("nan")
    group_id: int = 0


@dataclass(eq=False)
class Internal:
    split: Split
    left: "Node"
    right: "Node"
    n: int = 0
    prop_played: float = float("nan")
    boost: AdditiveStageModel | None = None


Node = Union[Leaf, Internal]


def _leaves(node: Node) -> list[Leaf]:
    if isinstance(node, Leaf):
        return [node]
    return _leaves(node.left) + _leaves(node.right)


def _depth(node: Node) -> int:
    if isinstance(node, Leaf):
        return 0
    return 1 + max(_depth(node.left), _depth(node.right))


def _number_leaves(node: Node) -> None:
    for gid, leaf in enumerate(_leaves(node), start=1):
        leaf.group_id = gid


@dataclass(eq=False)
class ModelTree:
    root: Node
    schema: FeatureSchema
    config: TreeConfig = field(default_factory=TreeConfig)
    train_years: list[int] = field(default_factory=list)
    pruning: dict | None = None

    @property
    def leaves(self) -> list[Leaf]:
        return _leaves(self.root)

    @property
    def n_leaves(self) -> int:
        return len(self.leaves)

    @property
    def depth(self) -> int:
        return _depth(self.root)

    def leaf(self, group_id: int) -> Leaf:
        for lf in self.leaves:
            if lf.group_id == group_id:
                return lf
        raise KeyError(f"no group {group_id}")

    def _check(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.schema.width:
            raise SchemaError(f"feature vector length {X.shape[-1]} != schema width {self.schema.width}")
        return X

    def assign_groups(self, X) -> np.ndarray:
        X = np.atleast_2d(self._check(X))
        out = np.zeros(X.shape[0], dtype=int)
        _route(self.root, X, np.arange(X.shape[0]), out)
        return out

    def assign_group(self, x) -> int:
        return int(self.assign_groups(np.asarray(x)[None, :])[0])

    def predict_proba(self, X) -> np.ndarray:
        X = np.atleast_2d(self._check(X))
        groups = self.assign_groups(X)
        p = np.empty(X.shape[0])
        for lf in self.leaves:
            mask = groups == lf.group_id
            if mask.any():
                p[mask] = lf.model.predict_proba(X[mask])
        return p

    def predict(self, x) -> float:
        return float(self.predict_proba(np.asarray(x)[None, :])[0])

    def log_odds(self, X) -> np.ndarray:
        X = np.atleast_2d(self._check(X))
        groups = self.assign_groups(X)
        out = np.empty(X.shape[0])
        for lf in self.leaves:
            mask = groups == lf.group_id
            if mask.any():
                out[mask] = lf.model.log_odds(X[mask])
        return out

    # ---------------------------------------------------------------- JSON

    def to_dict(self) -> dict:
        return {
            "format": "draftlmt.model_tree",
            "library_version": __version__,
            "schema": self.schema.to_dict(),
            "schema_hash": self.schema.hash,
            "config": self.config.to_dict(),
            "train_years": [int(y) for y in self.train_years],
            "n_leaves": self.n_leaves,
            "depth": self.depth,
            "pruning": self.pruning,
            "root": _node_to_dict(self.root, self.schema),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "ModelTree":
        """Load a learned or hand-authored tree.

        Hand-authored files may name split features instead of giving column
        indices, omit standardization, and omit group ids (numbered left to
        right then).
        """
        schema = FeatureSchema.from_dict(d["schema"])
        if "schema_hash" in d and d["schema_hash"] != schema.hash:
            raise SchemaError("schema_hash does not match the embedded schema")
        root = _node_from_dict(d["root"], schema)
        leaves = _leaves(root)
        ids = [lf.group_id for lf in leaves]
        if all(i == 0 for i in ids):
            _number_leaves(root)
        elif ids != list(range(1, len(leaves) + 1)):
            raise ValueError(f"leaf group ids must be 1..{len(leaves)} left to right, got {ids}")
        return cls(root, schema, TreeConfig.from_dict(d.get("config", {})),
                   list(d.get("train_years", [])), d.get("pruning"))

    @classmethod
    def from_json(cls, text: str) -> "ModelTree":
        return cls.from_dict(json.loads(text))


def _node_to_dict(node: Node, schema: FeatureSchema) -> dict:
    if isinstance(node, Leaf):
        return {"group": node.group_id, "n": int(node.n), "prop_played": _num(node.prop_played),
                "model": node.model.to_dict()}
    s = node.split
    return {
        "split": {"feature": s.feature, "name": schema.features[s.feature].name, "kind": s.kind,
                  "threshold": float(s.threshold), "levels": list(s.levels)},
        "n": int(node.n),
        "prop_played": _num(node.prop_played),
        "boost": node.boost.to_dict() if node.boost is not None else None,
        "left": _node_to_dict(node.left, schema),
        "right": _node_to_dict(node.right, schema),
    }


def _num(v: float):
    return None if v != v else float(v)


def _node_from_dict(d: dict, schema: FeatureSchema) -> Node:
    if "split" not in d:
        model = d["model"]
        if "probability" in model:
            lm = LogisticModel.constant(float(model["probability"]), schema.width)
        else:
            lm = LogisticModel.from_dict(model)
        if lm.width != schema.width:
            raise SchemaError(f"leaf model width {lm.width} != schema width {schema.width}")
        prop = d.get("prop_played")
        return Leaf(lm, int(d.get("n", 0)), float("nan") if prop is None else float(prop), int(d.get("group", 0)))
    sd = d["split"]
    feature = sd["feature"] if "feature" in sd else schema.index(sd["name"])
    split = Split(int(feature), float(sd["threshold"]), sd.get("kind", "numeric"), tuple(sd.get("levels", ())))
    boost = d.get("boost")
    prop = d.get("prop_played")
    return Internal(
        split,
        _node_from_dict(d["left"], schema),
        _node_from_dict(d["right"], schema),
        int(d.get("n", 0)),
        float("nan") if prop is None else float(prop),
        AdditiveStageModel.from_dict(boost) if boost else None,
    )


def _route(node: Node, X: np.ndarray, idx: np.ndarray, out: np.ndarray) -> None:
    if isinstance(node, Leaf):
        out[idx] = node.group_id
        return
    right = node.split.goes_right(X[idx])
    _route(node.left, X, idx[~right], out)
    _route(node.right, X, idx[right], out)


# --------------------------------------------------------------------------- split search

@dataclass(frozen=True)
class SplitCandidate:
    split: Split
    gain: float
    relative_gain: float


def _candidate_cuts(xs: np.ndarray, min_leaf: int) -> np.ndarray:
    """Positions i such that sorted rows [0..i] go left and both sides keep min_leaf."""
    n = len(xs)
    lo, hi = min_leaf - 1, n - min_leaf - 1
    if hi < lo:
        return np.empty(0, dtype=int)
    pos = np.arange(lo, hi + 1)
    return pos[xs[pos] < xs[pos + 1]]


def _entropy(p: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -(p * np.log2(p) + (1 - p) * np.log2(1 - p))
    return np.nan_to_num(h)


def _entropy_gains(xs_order: np.ndarray, y: np.ndarray, cuts: np.ndarray):
    n = len(y)
    ys = y[xs_order]
    pos_left = np.cumsum(ys)[cuts]
    nl = cuts + 1.0
    nr = n - nl
    parent = float(_entropy(np.array(y.mean())))
    child = (nl * _entropy(pos_left / nl) + nr * _entropy((ys.sum() - pos_left) / nr)) / n
    gain = parent - child
    return gain, gain / parent if parent > 0 else np.zeros_like(gain)


class _BoostedNodeStats:
    """Sufficient statistics for the one-step Newton split gain at one node.

    The node's LogitBoost fit supplies probabilities p; a child's gain is the
    weighted regression sum of squares of the working response on [1, x],
    i.e. the second-order log-likelihood improvement of letting that child
    refit a full linear correction. Split gain = half of
    (ESS_left + ESS_right - ESS_node).
    """

    def __init__(self, X: np.ndarray, y: np.ndarray, boost: AdditiveStageModel):
        p = boost.predict_proba(X)
        w = np.maximum(p * (1 - p), PROB_FLOOR)
        z = (y - p) / w
        Z, _, _, const = standardize_design(X)
        D = np.column_stack([np.ones(len(y)), Z[:, ~const]])
        self.k = D.shape[1]
        self.outer = w[:, None, None] * D[:, :, None] * D[:, None, :]
        self.score = (w * z)[:, None] * D
        self.outer_total = self.outer.sum(axis=0)
        self.score_total = self.score.sum(axis=0)
        self.penalty = np.eye(self.k)
        self.penalty[0, 0] = 0.0
        self.ess_node = float(self.ess(self.outer_total, self.score_total))
        eta = boost.log_odds(X)
        self.nll = float(np.sum(np.logaddexp(0.0, eta) - y * eta))

    def ess(self, A: np.ndarray, r: np.ndarray) -> np.ndarray:
        lam = 1e-8 * A[..., 0, 0]
        A = A + lam[..., None, None] * self.penalty
        b = np.linalg.solve(A, r[..., None])[..., 0]
        return np.sum(r * b, axis=-1)

    def gains(self, order: np.ndarray, cuts: np.ndarray):
        CA = np.cumsum(self.outer[order], axis=0)[cuts]
        Cr = np.cumsum(self.score[order], axis=0)[cuts]
        left = self.ess(CA, Cr)
        right = self.ess(self.outer_total - CA, self.score_total - Cr)
        gain = 0.5 * (left + right - self.ess_node)
        return gain, gain / max(self.nll, 1e-300)


def _best_split(
    X: np.ndarray,
    y: np.ndarray,
    config: TreeConfig,
    schema: FeatureSchema | None = None,
    boost: AdditiveStageModel | None = None,
) -> SplitCandidate | None:
    n, d = X.shape
    if n < 2 * config.min_leaf or y.min() == y.max():
        return None
    stats = None
    if config.criterion == "logitboost":
        if boost is None:
            boost = logitboost_fit(X, y, config.boost_stages)
        stats = _BoostedNodeStats(X, y, boost)

    best: SplitCandidate | None = None
    for j in range(d):
        order = np.argsort(X[:, j], kind="stable")
        xs = X[order, j]
        cuts = _candidate_cuts(xs, config.min_leaf)
        if len(cuts) == 0:
            continue
        if stats is None:
            gain, rel = _entropy_gains(order, y, cuts)
        else:
            gain, rel = stats.gains(order, cuts)
        top = gain.max()
        # lowest threshold among (numerically) equal gains
        i = int(np.flatnonzero(gain >= top - 1e-12 * max(1.0, abs(top)))[0])
        if best is not None and gain[i] <= best.gain + 1e-12 * max(1.0, abs(best.gain)):
            continue
        c = cuts[i]
        threshold = 0.5 * (xs[c] + xs[c + 1])
        if not xs[c] < threshold <= xs[c + 1]:
            threshold = xs[c + 1]
        kind, levels = "numeric", ()
        if schema is not None and schema.features[j].kind == "onehot":
            kind, levels = "category", (schema.features[j].level,)
        best = SplitCandidate(Split(j, float(threshold), kind, levels), float(gain[i]), float(rel[i]))

    if best is None or best.relative_gain < config.min_gain or best.gain <= 0:
        return None
    return best


def select_split(data: Dataset, config: TreeConfig | None = None) -> Split | None:
    """Best split of ``data`` under ``config.criterion``, or None if no cut qualifies."""
    config = config or TreeConfig()
    cand = _best_split(data.X, data.y.astype(float), config, data.schema)
    return None if cand is None else cand.split


# --------------------------------------------------------------------------- growth

def _leaf_for(X: np.ndarray, y: np.ndarray, config: TreeConfig) -> Leaf:
    model = fit_mle(X, y, ridge=config.ridge, tol=config.tol, max_iter=config.max_iter)
    return Leaf(model, len(y), float(y.mean()) if len(y) else float("nan"))


def _grow_node(X, y, depth: int, config: TreeConfig, schema: FeatureSchema) -> Node:
    n = len(y)
    if depth >= config.max_depth or n < config.min_split or n < 2 * config.min_leaf or y.min() == y.max():
        return _leaf_for(X, y, config)
    boost = logitboost_fit(X, y, config.boost_stages) if config.criterion == "logitboost" else None
    cand = _best_split(X, y, config, schema, boost)
    if cand is None:
        return _leaf_for(X, y, config)
    right = cand.split.goes_right(X)
    return Internal(
        cand.split,
        _grow_node(X[~right], y[~right], depth + 1, config, schema),
        _grow_node(X[right], y[right], depth + 1, config, schema),
        n,
        float(y.mean()),
        boost,
    )


def grow(data: Dataset, config: TreeConfig | None = None) -> ModelTree:
    """Grow an unpruned tree and refit every leaf by maximum likelihood."""
    config = config or TreeConfig()
    if len(data) == 0:
        raise ValueError("cannot grow a tree on an empty dataset")
    y = data.y.astype(float)
    root = _grow_node(data.X, y, 0, config, data.schema)
    _number_leaves(root)
    tree = ModelTree(root, data.schema, config, sorted(set(int(v) for v in data.years)))
    return tree


def refit_leaves(tree: ModelTree, data: Dataset) -> ModelTree:
    """Replace every leaf model by an MLE fit on exactly the rows routed to it."""
    _check_schema(tree, data)
    groups = tree.assign_groups(data.X)
    y = data.y.astype(float)
    cfg = tree.config
    for lf in tree.leaves:
        mask = groups == lf.group_id
        lf.n = int(mask.sum())
        if lf.n == 0:
            lf.prop_played = float("nan")
            continue
        lf.model = fit_mle(data.X[mask], y[mask], ridge=cfg.ridge, tol=cfg.tol, max_iter=cfg.max_iter)
        lf.prop_played = float(y[mask].mean())
    return tree


def _check_schema(tree: ModelTree, data: Dataset) -> None:
    if tree.schema.hash != data.schema.hash:
        raise SchemaError(f"schema hash mismatch: model {tree.schema.hash} vs data {data.schema.hash}")


# --------------------------------------------------------------------------- pruning

class _PruneNode:
    """Flattened view of a tree with node-level MLE costs for one fitting set."""

    def __init__(self, node: Node, X, y, config: TreeConfig):
        self.node = node
        self.n = len(y)
        if isinstance(node, Leaf):
            self.model = node.model
            self.children = ()
        else:
            self.model = fit_mle(X, y, ridge=config.ridge, tol=config.tol, max_iter=config.max_iter) \
                if self.n else None
            right = node.split.goes_right(X)
            self.children = (_PruneNode(node.left, X[~right], y[~right], config),
                             _PruneNode(node.right, X[right], y[right], config))
        if self.n and self.model is not None:
            eta = self.model.log_odds(X)
            self.cost = float(np.sum(np.logaddexp(0.0, eta) - y * eta))
        else:
            self.cost = 0.0

    def internal(self) -> list["_PruneNode"]:
        if not self.children:
            return []
        return [self] + self.children[0].internal() + self.children[1].internal()


def _optimal_collapse(pn: _PruneNode, alpha: float, collapsed: set) -> tuple[float, int]:
    """Cost-complexity optimum below pn; records collapsed node ids. Returns (cost, leaves)."""
    if not pn.children:
        return pn.cost, 1
    cl, nl = _optimal_collapse(pn.children[0], alpha, collapsed)
    cr, nr = _optimal_collapse(pn.children[1], alpha, collapsed)
    if pn.cost + alpha <= cl + cr + alpha * (nl + nr):
        collapsed.add(id(pn))
        return pn.cost, 1
    return cl + cr, nl + nr


def _alpha_sequence(root: _PruneNode) -> list[float]:
    """Breakpoints of weakest-link pruning, starting at 0."""
    alphas = [0.0]
    collapsed: set = set()
    _optimal_collapse(root, 0.0, collapsed)
    while id(root) not in collapsed:
        best = np.inf
        for pn in root.internal():
            if _is_hidden(pn, root, collapsed) or id(pn) in collapsed:
                continue
            sub_cost, sub_leaves = _subtree_cost(pn, collapsed)
            g = (pn.cost - sub_cost) / max(sub_leaves - 1, 1)
            best = min(best, g)
        alpha = max(best, alphas[-1])
        alphas.append(float(alpha))
        collapsed = set()
        _optimal_collapse(root, alpha * (1 + 1e-12) + 1e-300, collapsed)
    return alphas


def _subtree_cost(pn: _PruneNode, collapsed: set) -> tuple[float, int]:
    if not pn.children or id(pn) in collapsed:
        return pn.cost, 1
    cl, nl = _subtree_cost(pn.children[0], collapsed)
    cr, nr = _subtree_cost(pn.children[1], collapsed)
    return cl + cr, nl + nr


def _is_hidden(target: _PruneNode, root: _PruneNode, collapsed: set) -> bool:
    """True if an ancestor of target is collapsed."""
    def walk(pn, hidden):
        if pn is target:
            return hidden
        for ch in pn.children:
            r = walk(ch, hidden or id(pn) in collapsed)
            if r is not None:
                return r
        return None
    return bool(walk(root, False))


def _materialize(pn: _PruneNode, collapsed: set) -> Node:
    if not pn.children:
        return pn.node
    if id(pn) in collapsed:
        return Leaf(pn.model, pn.n, pn.node.prop_played)
    node = pn.node
    return Internal(node.split, _materialize(pn.children[0], collapsed),
                    _materialize(pn.children[1], collapsed), node.n, node.prop_played, node.boost)


def _heldout_losses(pn: _PruneNode, alpha: float, X: np.ndarray, y: np.ndarray) -> np.ndarray:
    collapsed: set = set()
    _optimal_collapse(pn, alpha, collapsed)
    root = _materialize(pn, collapsed)
    _number_leaves(root)
    groups = np.zeros(len(y), dtype=int)
    _route(root, X, np.arange(len(y)), groups)
    eta = np.empty(len(y))
    for lf in _leaves(root):
        m = groups == lf.group_id
        if m.any():
            eta[m] = lf.model.log_odds(X[m])
    return np.logaddexp(0.0, eta) - y * eta


def _stratified_folds(y: np.ndarray, k: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    fold = np.empty(len(y), dtype=int)
    for cls in (0, 1):
        idx = np.flatnonzero(y == cls)
        idx = idx[rng.permutation(len(idx))]
        fold[idx] = (np.arange(len(idx)) + (cls * len(y))) % k
    return fold


def prune(tree: ModelTree, data: Dataset, folds: int | None = None) -> ModelTree:
    """Cost-complexity pruning with the complexity chosen by k-fold CV and the 1-SE rule.

    Cost of a subtree is the training negative log-likelihood of its leaves'
    MLE models; CV loss is mean held-out log-loss per row. The returned tree
    keeps leaf models fitted on ``data`` and renumbers groups left to right.
    """
    cfg = tree.config
    folds = cfg.prune_folds if folds is None else folds
    if folds < 2:
        raise ValueError("pruning needs at least 2 folds")
    _check_schema(tree, data)
    if isinstance(tree.root, Leaf):
        tree.pruning = {"alphas": [0.0], "cv_loss": None, "cv_se": None, "chosen": 0,
                        "leaves": [1], "folds": folds}
        return tree
    X, y = data.X, data.y.astype(float)
    main = _PruneNode(tree.root, X, y, cfg)
    alphas = _alpha_sequence(main)
    # representative alpha inside each interval: geometric mean of neighbours
    betas = [0.0] + [float(np.sqrt(a * b)) if a > 0 else b / 2
                     for a, b in zip(alphas[1:-1], alphas[2:])] + [alphas[-1] * 2 + 1.0]
    betas = betas[: len(alphas)]

    fold = _stratified_folds(y, folds, cfg.seed)
    losses = np.zeros((len(betas), len(y)))
    for k in range(folds):
        tr, te = np.flatnonzero(fold != k), np.flatnonzero(fold == k)
        sub = grow(data.subset(tr), cfg)
        pn = _PruneNode(sub.root, X[tr], y[tr], cfg)
        for m, beta in enumerate(betas):
            losses[m, te] = _heldout_losses(pn, beta, X[te], y[te])

    cv = losses.mean(axis=1)
    se = losses.std(axis=1, ddof=1) / np.sqrt(len(y))
    best = int(np.argmin(cv))
    chosen = max(m for m in range(len(betas)) if cv[m] <= cv[best] + se[best])

    n_leaves = []
    for a in alphas:
        collapsed: set = set()
        n_leaves.append(_optimal_collapse(main, a * (1 + 1e-12), collapsed)[1])
    collapsed = set()
    _optimal_collapse(main, alphas[chosen] * (1 + 1e-12), collapsed)
    root = _materialize(main, collapsed)
    _number_leaves(root)
    report = {
        "folds": folds,
        "alphas": alphas,
        "leaves": n_leaves,
        "cv_loss": [float(v) for v in cv],
        "cv_se": [float(v) for v in se],
        "best": best,
        "chosen": chosen,
    }
    return ModelTree(root, tree.schema, cfg, list(tree.train_years), report)


def train(data: Dataset, config: TreeConfig | None = None) -> ModelTree:
    """Grow, then prune when ``config.prune_folds >= 2``."""
    config = config or TreeConfig()
    tree = grow(data, config)
    if config.prune_folds >= 2 and tree.n_leaves > 1:
        tree = prune(tree, data)
    return tree
