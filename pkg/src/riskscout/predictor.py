"""Random-forest risk regression on configuration bits.

Trees are CART regressors on binary inputs: every candidate split is a single
bit (0 left, 1 right) scored by the reduction in squared error.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

SPLIT_MODES = ("per_method", "portfolio_random", "portfolio_early", "full")


class InsufficientData(ValueError):
    pass


class ZeroVariance(ValueError):
    pass


@dataclass
class ForestParams:
    n_trees: int = 200
    max_depth: int | None = None
    min_leaf: int = 2
    features_per_split: int | None = None  # default ceil(sqrt(N))
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.min_leaf < 1:
            raise ValueError("min_leaf must be >= 1")


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    provenance: list = field(default_factory=list)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.uint8)
        self.y = np.asarray(self.y, dtype=float)
        if len(self.X) != len(self.y):
            raise ValueError("X and y lengths differ")
        if self.provenance and len(self.provenance) != len(self.y):
            raise ValueError("provenance not aligned with rows")

    def __len__(self):
        return len(self.y)

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=int)
        prov = [self.provenance[i] for i in idx] if self.provenance else []
        return Dataset(self.X[idx], self.y[idx], prov)

    @classmethod
    def concat(cls, parts: Sequence["Dataset"]) -> "Dataset":
        parts = [p for p in parts if len(p)]
        if not parts:
            return cls(np.zeros((0, 0), dtype=np.uint8), np.zeros(0))
        return cls(
            np.vstack([p.X for p in parts]),
            np.concatenate([p.y for p in parts]),
            [x for p in parts for x in p.provenance],
        )


def archive_dataset(archive, start=0, stop=None) -> Dataset:
    recs = archive.records[start:stop]
    return Dataset(
        np.array([r.z for r in recs], dtype=np.uint8),
        np.array([r.risk for r in recs]),
        [(r.solver, r.seed, r.iteration) for r in recs],
    )


@dataclass
class SplitReport:
    mode: str
    train_size: int
    holdout_before_dedup: int
    holdout_dropped: int


def build_training_splits(archives: Mapping[str, object], mode: str, method: str | None = None,
                          train_fraction=0.7, n_train=700, early=(100, 300), seed=0):
    """Train/holdout datasets from one archive per solver.

    Holdout is the last (1 - train_fraction) of every solver's archive, pooled;
    holdout rows whose bitvector appears in the training set are dropped.
    Returns (train, holdout, SplitReport).
    """
    if mode not in SPLIT_MODES:
        raise ValueError(f"unknown split mode {mode!r}")
    if not archives:
        raise InsufficientData("no archives")
    rng = np.random.default_rng(seed)
    cut = {name: int(round(train_fraction * len(a.records))) for name, a in archives.items()}
    holdout = Dataset.concat([archive_dataset(a, cut[n]) for n, a in archives.items()])
    if mode == "per_method":
        if method not in archives:
            raise InsufficientData(f"no archive for method {method!r}")
        train = archive_dataset(archives[method], 0, cut[method])
        if len(train) < n_train:
            raise InsufficientData(f"{method} has only {len(train)} training records")
        train = train.subset(np.arange(n_train))
    elif mode == "portfolio_early":
        pool = Dataset.concat([archive_dataset(a, early[0], early[1]) for a in archives.values()])
        if len(pool) < n_train:
            raise InsufficientData(f"early window holds only {len(pool)} records")
        train = pool.subset(np.sort(rng.choice(len(pool), size=n_train, replace=False)))
    else:
        pool = Dataset.concat([archive_dataset(a, 0, cut[n]) for n, a in archives.items()])
        if mode == "full":
            train = pool
        else:
            if len(pool) < n_train:
                raise InsufficientData(f"only {len(pool)} training records")
            train = pool.subset(np.sort(rng.choice(len(pool), size=n_train, replace=False)))
    seen = {row.tobytes() for row in train.X}
    keep = [i for i, row in enumerate(holdout.X) if row.tobytes() not in seen]
    report = SplitReport(mode, len(train), len(holdout), len(holdout) - len(keep))
    holdout = holdout.subset(keep)
    if len(train) < 2 or len(holdout) < 2:
        raise InsufficientData("split left fewer than two rows on one side")
    return train, holdout, report


# Tree nodes are stored in flat arrays: feature (-1 for leaves), left/right child, value.
@dataclass
class Tree:
    feature: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X)
        node = np.zeros(len(X), dtype=np.int64)
        active = self.feature[node] >= 0
        while active.any():
            idx = np.nonzero(active)[0]
            f = self.feature[node[idx]]
            go_right = X[idx, f] == 1
            node[idx] = np.where(go_right, self.right[node[idx]], self.left[node[idx]])
            active = self.feature[node] >= 0
        return self.value[node]

    @property
    def depth(self) -> int:
        depth = {0: 0}
        for i in range(len(self.feature)):
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return max(depth.values())


def _best_split(Xn, yn, candidates, mtry, min_leaf):
    """Best (feature, gain) scanning shuffled candidates until mtry non-constant ones are seen."""
    n = len(yn)
    total = yn.sum()
    base = total * total / n
    best_f, best_gain = -1, -np.inf
    visited = 0
    ones_all = Xn.sum(axis=0)
    sums_all = yn @ Xn
    for f in candidates:
        n1 = ones_all[f]
        if n1 == 0 or n1 == n:
            continue
        visited += 1
        n0 = n - n1
        if n1 >= min_leaf and n0 >= min_leaf:
            s1 = sums_all[f]
            s0 = total - s1
            gain = s1 * s1 / n1 + s0 * s0 / n0 - base
            if gain > best_gain:
                best_f, best_gain = int(f), gain
        if visited >= mtry:
            break
    return best_f, best_gain


def build_tree(X, y, max_depth, min_leaf, mtry, rng) -> Tree:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=float)
    n_feat = X.shape[1]
    feature, left, right, value = [], [], [], []

    def new_node(v):
        feature.append(-1)
        left.append(-1)
        right.append(-1)
        value.append(v)
        return len(value) - 1

    root = new_node(float(y.mean()))
    stack = [(root, np.arange(len(y)), 0)]
    while stack:
        node, idx, depth = stack.pop()
        yn = y[idx]
        if max_depth is not None and depth >= max_depth:
            continue
        if len(idx) < 2 * min_leaf or np.all(yn == yn[0]):
            continue
        Xn = X[idx]
        f, _ = _best_split(Xn, yn, rng.permutation(n_feat), mtry, min_leaf)
        if f < 0:
            continue
        mask = Xn[:, f] == 1
        li, ri = idx[~mask], idx[mask]
        feature[node] = f
        left[node] = new_node(float(y[li].mean()))
        right[node] = new_node(float(y[ri].mean()))
        stack.append((right[node], ri, depth + 1))
        stack.append((left[node], li, depth + 1))
    return Tree(np.array(feature), np.array(left), np.array(right), np.array(value))


@dataclass
class Forest:
    trees: list
    params: ForestParams

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.uint8)
        return np.mean([t.predict(X) for t in self.trees], axis=0)


def fit_forest(train: Dataset, params: ForestParams | None = None) -> Forest:
    params = params or ForestParams()
    if len(train) < 2:
        raise InsufficientData("need at least two training rows")
    X, y = train.X, train.y
    n, n_feat = X.shape
    mtry = params.features_per_split or math.ceil(math.sqrt(n_feat))
    rng = np.random.default_rng(params.seed)
    trees = []
    for _ in range(params.n_trees):
        idx = rng.integers(0, n, size=n) if params.bootstrap else np.arange(n)
        trees.append(build_tree(X[idx], y[idx], params.max_depth, params.min_leaf, mtry, rng))
    return Forest(trees, params)


def predict(forest: Forest, X) -> np.ndarray:
    return forest.predict(X)


def regression_metrics(y_pred, y_true) -> tuple[float, float, float]:
    """(R^2, MAE, RMSE)."""
    p = np.asarray(y_pred, dtype=float)
    t = np.asarray(y_true, dtype=float)
    if len(p) != len(t) or len(t) < 2:
        raise ValueError("need two or more aligned predictions")
    resid = t - p
    sst = float(((t - t.mean()) ** 2).sum())
    if sst == 0:
        raise ZeroVariance("targets have zero variance")
    sse = float((resid**2).sum())
    return 1.0 - sse / sst, float(np.abs(resid).mean()), float(np.sqrt((resid**2).mean()))


def prediction_report(archives: Mapping[str, object], params: ForestParams | None = None,
                      methods: Sequence[str] | None = None, seed=0, n_train=700) -> list[dict]:
    """Rows mirroring the risk-prediction table: upper bound, portfolios, then each method."""
    params = params or ForestParams(seed=seed)
    plan = [("Upper Bound", "full", None), ("Portfolio", "portfolio_random", None),
            ("Portfolio", "portfolio_early", None)]
    plan += [("Method", "per_method", m) for m in (methods or list(archives))]
    rows = []
    for category, mode, method in plan:
        train, hold, rep = build_training_splits(archives, mode, method=method, n_train=n_train, seed=seed)
        forest = fit_forest(train, params)
        r2, mae, rmse = regression_metrics(forest.predict(hold.X), hold.y)
        rows.append({
            "category": category,
            "method": method if method else mode,
            "train_size": rep.train_size,
            "holdout_size": len(hold),
            "holdout_dropped": rep.holdout_dropped,
            "r2": r2,
            "mae": mae,
            "rmse": rmse,
        })
    return rows
