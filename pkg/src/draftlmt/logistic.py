"""Two-class logistic regression: penalized MLE by IRLS, and LogitBoost.

Weights of :class:`LogisticModel` live on the standardized scale of the rows
the model was fitted on; ``mean`` and ``scale`` are stored so raw-scale
log-odds can be recovered exactly.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import expit

_P_LO = np.finfo(float).tiny
_P_HI = 1.0 - 2.0**-53
PROB_FLOOR = 1e-10


def sigmoid(eta):
    """Logistic link, clipped so probabilities stay strictly inside (0, 1)."""
    return np.clip(expit(eta), _P_LO, _P_HI)


def logit(p):
    return np.log(p) - np.log1p(-p)


def _as_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ValueError(f"design matrix must be 2-D, got shape {X.shape}")
    return X


def _as_labels(y, n: int) -> np.ndarray:
    y = np.asarray(y, dtype=float).ravel()
    if y.shape[0] != n:
        raise ValueError(f"{y.shape[0]} labels for {n} rows")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0 or 1")
    return y


def standardize_design(X: np.ndarray):
    """Column means and scales; constant columns get scale 1 and are flagged."""
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    const = std <= 1e-12 * np.maximum(1.0, np.abs(mean))
    scale = np.where(const, 1.0, std)
    Z = (X - mean) / scale
    Z[:, const] = 0.0
    return Z, mean, scale, const


def penalized_objective(params: np.ndarray, Z: np.ndarray, y: np.ndarray, ridge: float):
    """Negative log-likelihood + (ridge/2)|w|^2 and its gradient.

    ``params`` is ``[intercept, w_1..w_d]`` against the columns of ``Z``; the
    intercept is not penalized.
    """
    eta = params[0] + Z @ params[1:]
    value = float(np.sum(np.logaddexp(0.0, eta) - y * eta) + 0.5 * ridge * params[1:] @ params[1:])
    resid = expit(eta) - y
    grad = np.concatenate(([resid.sum()], Z.T @ resid + ridge * params[1:]))
    return value, grad


@dataclass
class FitDiagnostics:
    iterations: int = 0
    grad_norm: float = 0.0
    converged: bool = False
    single_class: bool = False
    # |w| large enough that the ridge term, not the data, is holding it finite
    ridge_binds: bool = False
    separated: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(eq=False)
class LogisticModel:
    intercept: float
    weights: np.ndarray
    mean: np.ndarray
    scale: np.ndarray
    diagnostics: FitDiagnostics = field(default_factory=FitDiagnostics)

    @classmethod
    def constant(cls, prob: float, width: int) -> "LogisticModel":
        """All-zero weights; predicts ``prob`` for every input."""
        return cls(float(logit(prob)), np.zeros(width), np.zeros(width), np.ones(width),
                   FitDiagnostics(converged=True))

    @property
    def width(self) -> int:
        return len(self.weights)

    def standardize(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.width:
            raise ValueError(f"feature vector length {x.shape[-1]} != model width {self.width}")
        return (x - self.mean) / self.scale

    def log_odds(self, x):
        """Intercept + w . standardize(x); accepts one vector or a matrix of rows."""
        out = self.intercept + self.standardize(x) @ self.weights
        return float(out) if np.ndim(out) == 0 else out

    def predict_proba(self, x):
        p = sigmoid(self.log_odds(x))
        return float(p) if np.ndim(p) == 0 else p

    @property
    def raw_weights(self) -> np.ndarray:
        return self.weights / self.scale

    @property
    def raw_intercept(self) -> float:
        return float(self.intercept - self.raw_weights @ self.mean)

    def to_dict(self) -> dict:
        return {
            "intercept": float(self.intercept),
            "weights": [float(v) for v in self.weights],
            "standardization": [[float(m), float(s)] for m, s in zip(self.mean, self.scale)],
            "diagnostics": self.diagnostics.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LogisticModel":
        weights = np.array(d["weights"], dtype=float)
        std = d.get("standardization")
        if std is None:
            mean, scale = np.zeros(len(weights)), np.ones(len(weights))
        else:
            pairs = np.array(std, dtype=float).reshape(len(weights), 2)
            mean, scale = pairs[:, 0], pairs[:, 1]
        diag = FitDiagnostics(**d.get("diagnostics", {"converged": True}))
        return cls(float(d["intercept"]), weights, mean, scale, diag)


def fit_mle(X, y, ridge: float = 1e-6, tol: float = 1e-8, max_iter: int = 100) -> LogisticModel:
    """Penalized maximum-likelihood logistic regression by IRLS with step halving.

    Columns are standardized on ``X`` before fitting. ``converged`` is set iff
    the sup-norm of the penalized score is <= ``tol``; non-convergence (for
    example under complete separation with ``ridge=0``) is reported, not raised.
    """
    X = _as_matrix(X)
    n, d = X.shape
    if n == 0 or d == 0:
        raise ValueError("fit_mle needs at least one row and one feature column")
    if ridge < 0:
        raise ValueError("ridge must be non-negative")
    y = _as_labels(y, n)
    Z, mean, scale, const = standardize_design(X)
    active = np.flatnonzero(~const)
    A = Z[:, active]
    ybar = y.mean()

    if ybar in (0.0, 1.0):
        p = np.clip(ybar, PROB_FLOOR, 1 - PROB_FLOOR)
        params = np.zeros(len(active) + 1)
        params[0] = logit(p)
        _, grad = penalized_objective(params, A, y, ridge)
        gnorm = float(np.max(np.abs(grad)))
        diag = FitDiagnostics(0, gnorm, gnorm <= tol, single_class=True)
        return LogisticModel(float(params[0]), np.zeros(d), mean, scale, diag)

    params = np.zeros(len(active) + 1)
    params[0] = logit(ybar)
    pen = np.full(len(active) + 1, ridge)
    pen[0] = 0.0
    Aones = np.column_stack([np.ones(n), A])

    value, grad = penalized_objective(params, A, y, ridge)
    it = 0
    while it < max_iter:
        gnorm = float(np.max(np.abs(grad)))
        if gnorm <= tol:
            break
        it += 1
        p = expit(Aones @ params)
        H = Aones.T @ (Aones * (p * (1 - p))[:, None]) + np.diag(pen)
        try:
            step = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(H, grad, rcond=None)[0]
        t = 1.0
        while True:
            cand = params - t * step
            cand_value, cand_grad = penalized_objective(cand, A, y, ridge)
            if cand_value <= value or t < 1e-10:
                break
            t *= 0.5
        if cand_value > value:
            break  # no descent along the Newton direction; report as is
        params, value, grad = cand, cand_value, cand_grad

    gnorm = float(np.max(np.abs(grad)))
    weights = np.zeros(d)
    weights[active] = params[1:]
    eta = Aones @ params
    # every row strictly on its own side: no finite unpenalized MLE exists
    separated = bool(np.all((eta > 0) == (y == 1)) and np.all(eta != 0))
    converged = gnorm <= tol and not (ridge == 0 and separated)
    # a log-odds swing of more than 10 per standard deviation is the penalty's doing
    binds = ridge > 0 and bool(np.any(np.abs(params[1:]) > 10.0))
    diag = FitDiagnostics(it, gnorm, converged, False, binds, separated)
    return LogisticModel(float(params[0]), weights, mean, scale, diag)


# --------------------------------------------------------------------------- LogitBoost

@dataclass(frozen=True)
class Stage:
    """One additive term ``offset + slope * x[feature]`` (already halved)."""

    feature: int
    slope: float
    offset: float


@dataclass(eq=False)
class AdditiveStageModel:
    """Friedman-Hastie-Tibshirani form: p = exp(F) / (exp(F) + exp(-F))."""

    base: float
    stages: tuple[Stage, ...] = ()

    @property
    def M(self) -> int:
        return len(self.stages)

    def F(self, X) -> np.ndarray:
        X = _as_matrix(X)
        out = np.full(X.shape[0], self.base)
        for s in self.stages:
            out += s.offset + s.slope * X[:, s.feature]
        return out

    def log_odds(self, X) -> np.ndarray:
        return 2.0 * self.F(X)

    def predict_proba(self, X) -> np.ndarray:
        return sigmoid(self.log_odds(X))

    def to_dict(self) -> dict:
        return {"base": float(self.base),
                "stages": [[s.feature, float(s.slope), float(s.offset)] for s in self.stages]}

    @classmethod
    def from_dict(cls, d: dict) -> "AdditiveStageModel":
        return cls(float(d["base"]), tuple(Stage(int(f), float(a), float(b)) for f, a, b in d["stages"]))


def _nll(eta: np.ndarray, y: np.ndarray) -> float:
    return float(np.sum(np.logaddexp(0.0, eta) - y * eta))


def _simple_regressions(X: np.ndarray, z: np.ndarray, w: np.ndarray):
    """Weighted LS fit of z on each column separately: slopes, intercepts, SSE."""
    sw = w.sum()
    xm = (w @ X) / sw
    zm = (w @ z) / sw
    Xc = X - xm
    zc = z - zm
    sxx = w @ (Xc * Xc)
    sxz = (w * zc) @ Xc
    szz = float(w @ (zc * zc))
    flat = sxx <= 1e-12 * np.maximum(1.0, sw * xm * xm)
    slope = np.where(flat, 0.0, sxz / np.where(flat, 1.0, sxx))
    sse = szz - slope * sxz
    return slope, zm - slope * xm, sse


def logitboost_fit(X, y, M: int = 20, floor: float = PROB_FLOOR) -> AdditiveStageModel:
    """Two-class LogitBoost with single-feature linear base learners.

    Each stage fits the working response ``(y - p) / (p (1 - p))`` with weights
    ``p (1 - p)`` (both floored at ``floor``) by weighted least squares on the
    single best feature, then adds half of that fit to F. A stage whose full
    step would raise the training negative log-likelihood is halved until it
    does not, so the loss is non-increasing in M.
    """
    X = _as_matrix(X)
    n = X.shape[0]
    y = _as_labels(y, n)
    if M < 0:
        raise ValueError("M must be non-negative")
    ybar = y.mean() if n else 0.5
    base = 0.5 * float(logit(np.clip(ybar, floor, 1 - floor)))
    if n < 2 or ybar in (0.0, 1.0):
        return AdditiveStageModel(base)

    F = np.full(n, base)
    loss = _nll(2 * F, y)
    stages = []
    for _ in range(M):
        p = expit(2 * F)
        w = np.maximum(p * (1 - p), floor)
        z = (y - p) / w
        slope, offset, sse = _simple_regressions(X, z, w)
        j = int(np.argmin(sse))  # argmin keeps the lowest index on ties
        f = offset[j] + slope[j] * X[:, j]
        t = 0.5
        for _ in range(40):
            cand = F + t * f
            cand_loss = _nll(2 * cand, y)
            if cand_loss <= loss:
                break
            t *= 0.5
        else:
            break
        F, loss = cand, cand_loss
        stages.append(Stage(j, t * float(slope[j]), t * float(offset[j])))
    return AdditiveStageModel(base, tuple(stages))
