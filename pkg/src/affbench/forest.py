"""Random-forest regression (CART trees on bootstrap samples) and baselines."""

from __future__ import annotations

from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
import json
import math

import numpy as np

from .errors import ConfigError, DataError, ShapeError
from .rng import derive_seed


@dataclass
class ForestConfig:
    n_estimators: int = 500
    max_features: float = 1.0 / 3.0
    min_samples_leaf: int = 1
    bootstrap: bool = True
    rng_seed: int = 0
    max_depth: int | None = None

    def __post_init__(self):
        if self.n_estimators < 1:
            raise ConfigError(f"n_estimators must be >= 1, got {self.n_estimators}")
        if not 0 < self.max_features <= 1:
            raise ConfigError(f"max_features must lie in (0, 1], got {self.max_features}")
        if self.min_samples_leaf < 1:
            raise ConfigError(f"min_samples_leaf must be >= 1, got {self.min_samples_leaf}")

    def features_per_split(self, n_features: int) -> int:
        return max(1, min(n_features, math.ceil(self.max_features * n_features)))


@dataclass
class Tree:
    """Flat node arrays; ``feature == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def predict(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        active = self.feature[node] >= 0
        while active.any():
            r = rows[active]
            n = node[r]
            go_left = X[r, self.feature[n]] <= self.threshold[n]
            node[r] = np.where(go_left, self.left[n], self.right[n])
            active = self.feature[node] >= 0
        return self.value[node]

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": [float(t) for t in self.threshold],
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": [float(v) for v in self.value],
        }

    @classmethod
    def from_dict(cls, d: dict) -> Tree:
        return cls(np.array(d["feature"], dtype=np.int64), np.array(d["threshold"], dtype=np.float64),
                   np.array(d["left"], dtype=np.int64), np.array(d["right"], dtype=np.int64),
                   np.array(d["value"], dtype=np.float64))


def _best_split(X: np.ndarray, y: np.ndarray, feats: np.ndarray, min_leaf: int):
    """Lowest-SSE split over ``feats``; returns (sse, feature, threshold) or None.

    Ties prefer the earlier feature in ``feats`` (callers pass them sorted),
    then the lower threshold.
    """
    n = len(y)
    sub = X[:, feats]
    order = np.argsort(sub, axis=0, kind="stable")
    xs = np.take_along_axis(sub, order, axis=0)
    ys = y[order]
    csum = np.cumsum(ys, axis=0)
    csq = np.cumsum(ys * ys, axis=0)
    total, total_sq = csum[-1], csq[-1]
    k = np.arange(1, n)[:, None].astype(np.float64)  # left sizes 1..n-1
    left_s, left_q = csum[:-1], csq[:-1]
    right_s, right_q = total - left_s, total_sq - left_q
    sse = (left_q - left_s**2 / k) + (right_q - right_s**2 / (n - k))
    valid = xs[1:] > xs[:-1]
    if min_leaf > 1:
        sizes = np.arange(1, n)
        ok = (sizes >= min_leaf) & (n - sizes >= min_leaf)
        valid &= ok[:, None]
    if not valid.any():
        return None
    sse = np.where(valid, sse, np.inf)
    pos = np.argmin(sse, axis=0)  # first minimum = lowest threshold
    best = sse[pos, np.arange(len(feats))]
    col = int(np.argmin(best))  # first minimum = lowest feature
    if not np.isfinite(best[col]):
        return None
    p = pos[col]
    lo, hi = xs[p, col], xs[p + 1, col]
    thr = lo + (hi - lo) / 2.0
    if not lo < thr < hi:
        thr = lo
    return float(best[col]), int(feats[col]), float(thr)


def build_tree(X: np.ndarray, y: np.ndarray, config: ForestConfig, rng: np.random.Generator) -> Tree:
    n_feat = X.shape[1]
    k = config.features_per_split(n_feat)
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node() -> int:
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        return len(feature) - 1

    root = new_node()
    stack = [(root, np.arange(len(y)), 0)]
    while stack:
        node, idx, depth = stack.pop()
        ys = y[idx]
        value[node] = float(math.fsum(ys) / len(ys))
        if len(idx) < 2 * config.min_samples_leaf or np.all(ys == ys[0]):
            continue
        if config.max_depth is not None and depth >= config.max_depth:
            continue
        Xn = X[idx]
        drawn = np.sort(rng.choice(n_feat, size=k, replace=False))
        split = _best_split(Xn, ys, drawn, config.min_samples_leaf)
        if split is None and k < n_feat:
            rest = np.setdiff1d(np.arange(n_feat), drawn)
            split = _best_split(Xn, ys, rest, config.min_samples_leaf)
        if split is None:
            continue
        _, f, thr = split
        mask = Xn[:, f] <= thr
        lnode, rnode = new_node(), new_node()
        feature[node], threshold[node], left[node], right[node] = f, thr, lnode, rnode
        # Right child pushed first so the left subtree gets lower node ids.
        stack.append((rnode, idx[~mask], depth + 1))
        stack.append((lnode, idx[mask], depth + 1))
    return Tree(np.array(feature, dtype=np.int64), np.array(threshold), np.array(left, dtype=np.int64),
                np.array(right, dtype=np.int64), np.array(value))


def _canonical_order(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Row order determined by content alone, so shuffled inputs fit identical trees."""
    return np.lexsort(np.vstack([y[None, :], X.T[::-1]]))


class RandomForest:
    def __init__(self, config: ForestConfig | None = None):
        self.config = config or ForestConfig()
        self.trees: list[Tree] = []
        self.n_features: int | None = None

    def fit(self, X, y, workers: int = 1) -> RandomForest:
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] == 0 or X.shape[1] == 0:
            raise DataError(f"feature matrix must be non-empty 2-D, got shape {X.shape}")
        if len(y) != X.shape[0]:
            raise ShapeError(f"{X.shape[0]} rows but {len(y)} labels")
        if not np.all(np.isfinite(X)) or not np.all(np.isfinite(y)):
            raise DataError("features and labels must be finite")
        order = _canonical_order(X, y)
        X, y = X[order], y[order]
        self.n_features = X.shape[1]
        cfg = self.config

        def grow(t: int) -> Tree:
            rng = np.random.default_rng(derive_seed(cfg.rng_seed, "tree", t))
            if cfg.bootstrap:
                rows = np.sort(rng.integers(0, len(y), size=len(y)))
            else:
                rows = np.arange(len(y))
            return build_tree(X[rows], y[rows], cfg, rng)

        if workers > 1:
            with ThreadPoolExecutor(workers) as pool:
                self.trees = list(pool.map(grow, range(cfg.n_estimators)))
        else:
            self.trees = [grow(t) for t in range(cfg.n_estimators)]
        return self

    def predict(self, X) -> np.ndarray:
        if not self.trees:
            raise DataError("forest has not been fitted")
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ShapeError(f"expected {self.n_features} features, got shape {X.shape}")
        preds = np.stack([t.predict(X) for t in self.trees])
        return preds.mean(axis=0)

    def to_json(self) -> str:
        return json.dumps({"config": asdict(self.config), "n_features": self.n_features,
                           "trees": [t.to_dict() for t in self.trees]}, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> RandomForest:
        d = json.loads(text)
        model = cls(ForestConfig(**d["config"]))
        model.n_features = d["n_features"]
        model.trees = [Tree.from_dict(t) for t in d["trees"]]
        return model


def fit_forest(X, y, config: ForestConfig | None = None, workers: int = 1) -> RandomForest:
    return RandomForest(config).fit(X, y, workers)


def molecular_weight_model(weights: Sequence[float], y, config: ForestConfig | None = None) -> RandomForest:
    """Forest on the single molecular-weight column."""
    return fit_forest(np.asarray(weights, dtype=np.float64).reshape(-1, 1), y, config)


def ligand_bias_model(X_global, y_global, config: ForestConfig | None = None) -> RandomForest:
    """Ligand-only features pooled over every protein in the global train set."""
    return fit_forest(X_global, y_global, config)


def predictions_csv(ids: Sequence[str], y_true, y_pred) -> str:
    lines = ["structure_id,y_true,y_pred"]
    lines += [f"{sid},{float(t)!r},{float(p)!r}" for sid, t, p in zip(ids, y_true, y_pred)]
    return "\n".join(lines) + "\n"
