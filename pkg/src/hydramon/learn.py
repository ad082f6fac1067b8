"""Native classifiers and the k-fold evaluation harness.

Three model kinds over the fixed 36-column feature layout: a Gini decision
tree, a bagged forest of such trees, and a per-feature Gaussian naive
Bayes.  All training is deterministic given (data, params, seed); split
ties break toward the lowest feature index, then the lowest threshold.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    CorruptModel,
    EmptyDataset,
    FeatureOrderMismatch,
    NonFiniteFeature,
    TooFewRows,
    VersionMismatch,
)
from .features import Dataset, FeatureVector, feature_order_hash
from .signal_core import HydrationLevel

MODEL_SCHEMA_VERSION = 1

N_CLASSES = len(HydrationLevel)

VARIANCE_FLOOR = 1e-9


@dataclass(frozen=True)
class TreeParams:
    max_depth: int = 12
    min_leaf: int = 5


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 50
    seed: int = 0
    mtry: int = 6                 # ceil(sqrt(36))
    bootstrap: bool = True
    tree: TreeParams = field(default_factory=TreeParams)


@dataclass(frozen=True)
class HydrationModel:
    kind: str                     # "tree" | "forest" | "nbayes"
    parameters: dict
    feature_order_hash: str
    constant: bool = False        # single-class training data


def _histogram(y: np.ndarray) -> list:
    return np.bincount(y, minlength=N_CLASSES).astype(int).tolist()


def _gini(counts: np.ndarray) -> float:
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts / total
    return float(1.0 - np.sum(p * p))


def _best_split(x: np.ndarray, y: np.ndarray, feature_ids: np.ndarray,
                min_leaf: int):
    """Lowest-impurity (feature, threshold) over candidate features.

    Thresholds are midpoints between consecutive distinct sorted values, so
    they move with any monotone rescaling of a feature while the induced
    partition (and every prediction) stays identical.
    """
    n = len(y)
    total = np.bincount(y, minlength=N_CLASSES).astype(float)
    best = None  # (impurity, feature, threshold)
    for f in feature_ids:
        order = np.argsort(x[:, f], kind="stable")
        xs = x[order, f]
        one_hot = np.zeros((n, N_CLASSES))
        one_hot[np.arange(n), y[order]] = 1.0
        left = np.cumsum(one_hot, axis=0)[:-1]          # counts left of cut i
        right = total - left
        n_left = np.arange(1, n)
        n_right = n - n_left
        valid = (xs[:-1] != xs[1:]) & (n_left >= min_leaf) & (n_right >= min_leaf)
        if not valid.any():
            continue
        gini_left = 1.0 - np.sum((left / n_left[:, None]) ** 2, axis=1)
        gini_right = 1.0 - np.sum((right / n_right[:, None]) ** 2, axis=1)
        impurity = (n_left * gini_left + n_right * gini_right) / n
        impurity[~valid] = np.inf
        i = int(np.argmin(impurity))  # first minimum = lowest threshold
        key = (float(impurity[i]), int(f), float((xs[i] + xs[i + 1]) / 2.0))
        if best is None or key < best:
            best = key
    return best


def _grow_tree(x: np.ndarray, y: np.ndarray, depth: int, params: TreeParams,
               rng: np.random.Generator | None, mtry: int | None) -> dict:
    counts = np.bincount(y, minlength=N_CLASSES)
    if depth >= params.max_depth or _gini(counts.astype(float)) == 0.0 \
            or len(y) < 2 * params.min_leaf:
        return {"counts": counts.astype(int).tolist()}
    n_features = x.shape[1]
    if rng is not None and mtry is not None and mtry < n_features:
        feature_ids = np.sort(rng.choice(n_features, size=mtry, replace=False))
    else:
        feature_ids = np.arange(n_features)
    best = _best_split(x, y, feature_ids, params.min_leaf)
    if best is None:
        return {"counts": counts.astype(int).tolist()}
    parent = _gini(counts.astype(float))
    impurity, f, threshold = best
    if impurity >= parent:
        return {"counts": counts.astype(int).tolist()}
    mask = x[:, int(f)] <= threshold
    return {
        "feature": int(f),
        "threshold": float(threshold),
        "left": _grow_tree(x[mask], y[mask], depth + 1, params, rng, mtry),
        "right": _grow_tree(x[~mask], y[~mask], depth + 1, params, rng, mtry),
    }


def _check_data(data: Dataset):
    if len(data) == 0:
        raise EmptyDataset("no rows to train on")
    if any(row.label is None for row in data.rows):
        raise EmptyDataset("every training row must be labeled")


def train_tree(data: Dataset, params: TreeParams | None = None) -> HydrationModel:
    """Deterministic greedy Gini tree; single-class data gives a flagged
    constant predictor instead of an error."""
    params = params or TreeParams()
    _check_data(data)
    x = data.matrix()
    y = data.labels()
    constant = len(np.unique(y)) == 1
    root = _grow_tree(x, y, 0, params, None, None)
    return HydrationModel(
        kind="tree",
        parameters={"root": root, "max_depth": params.max_depth,
                    "min_leaf": params.min_leaf},
        feature_order_hash=feature_order_hash(data.columns),
        constant=constant,
    )


def train_forest(data: Dataset, params: ForestParams | None = None) -> HydrationModel:
    """Bagged Gini trees with per-split feature subsets, reproducible from
    the master seed (per-tree seeds are spawned deterministically)."""
    params = params or ForestParams()
    _check_data(data)
    x = data.matrix()
    y = data.labels()
    constant = len(np.unique(y)) == 1
    seed_seq = np.random.SeedSequence(params.seed)
    children = seed_seq.spawn(params.n_trees)
    trees = []
    n = len(y)
    for child in children:
        rng = np.random.default_rng(child)
        if params.bootstrap:
            idx = rng.integers(0, n, size=n)
        else:
            idx = np.arange(n)
        mtry = params.mtry if params.mtry < x.shape[1] else None
        trees.append(_grow_tree(x[idx], y[idx], 0, params.tree, rng, mtry))
    return HydrationModel(
        kind="forest",
        parameters={"trees": trees, "n_trees": params.n_trees,
                    "seed": params.seed, "mtry": params.mtry,
                    "bootstrap": params.bootstrap,
                    "max_depth": params.tree.max_depth,
                    "min_leaf": params.tree.min_leaf},
        feature_order_hash=feature_order_hash(data.columns),
        constant=constant,
    )


def train_nbayes(data: Dataset) -> HydrationModel:
    """Per-class per-feature Gaussians (population moments), frequency priors."""
    _check_data(data)
    x = data.matrix()
    y = data.labels()
    constant = len(np.unique(y)) == 1
    classes = {}
    for c in range(N_CLASSES):
        mask = y == c
        if not mask.any():
            continue
        mean = x[mask].mean(axis=0)
        var = np.maximum(x[mask].var(axis=0), VARIANCE_FLOOR)
        classes[str(c)] = {
            "prior": float(mask.sum() / len(y)),
            "mean": mean.tolist(),
            "var": var.tolist(),
        }
    return HydrationModel(
        kind="nbayes",
        parameters={"classes": classes},
        feature_order_hash=feature_order_hash(data.columns),
        constant=constant,
    )


# --- prediction -------------------------------------------------------------

def _tree_counts(node: dict, x: np.ndarray) -> np.ndarray:
    while "feature" in node:
        node = node["left"] if x[node["feature"]] <= node["threshold"] else node["right"]
    return np.asarray(node["counts"], dtype=float)


def predict_proba(model: HydrationModel, x: FeatureVector) -> np.ndarray:
    """Class distribution (sums to 1) for one feature vector."""
    if model.feature_order_hash != feature_order_hash():
        raise FeatureOrderMismatch("model trained on a different feature layout")
    vals = x.values
    if not np.all(np.isfinite(vals)):
        raise NonFiniteFeature("feature vector contains non-finite values")
    if model.kind == "tree":
        counts = _tree_counts(model.parameters["root"], vals)
        return counts / counts.sum()
    if model.kind == "forest":
        dist = np.zeros(N_CLASSES)
        for tree in model.parameters["trees"]:
            counts = _tree_counts(tree, vals)
            dist += counts / counts.sum()
        return dist / len(model.parameters["trees"])
    if model.kind == "nbayes":
        log_post = np.full(N_CLASSES, -np.inf)
        for key, cls in model.parameters["classes"].items():
            mean = np.asarray(cls["mean"])
            var = np.asarray(cls["var"])
            ll = -0.5 * np.sum(np.log(2 * np.pi * var) + (vals - mean) ** 2 / var)
            log_post[int(key)] = np.log(cls["prior"]) + ll
        log_post -= log_post.max()
        post = np.exp(log_post)
        return post / post.sum()
    raise CorruptModel(f"unknown model kind {model.kind!r}")


def predict(model: HydrationModel, x: FeatureVector) -> tuple[HydrationLevel, float]:
    """Argmax of the class distribution; ties go to the lower (better
    hydrated) level."""
    dist = predict_proba(model, x)
    best = int(np.argmax(dist))   # argmax returns the first (lowest) maximum
    return HydrationLevel(best), float(dist[best])


# --- evaluation -------------------------------------------------------------

@dataclass(frozen=True)
class MetricsReport:
    accuracy: tuple                 # (mean, std) over folds
    sensitivity: tuple
    specificity: tuple
    confusion: np.ndarray           # summed over folds, rows = true class
    k: int
    fold_records: tuple = ()        # (true, predicted) pairs per fold

    def to_json(self) -> dict:
        return {
            "v": 1,
            "k": self.k,
            "accuracy": {"mean": self.accuracy[0], "std": self.accuracy[1]},
            "sensitivity": {"mean": self.sensitivity[0], "std": self.sensitivity[1]},
            "specificity": {"mean": self.specificity[0], "std": self.specificity[1]},
            "confusion": self.confusion.astype(int).tolist(),
        }


@dataclass(frozen=True)
class ModelSpec:
    kind: str = "tree"
    tree: TreeParams = field(default_factory=TreeParams)
    forest: ForestParams = field(default_factory=ForestParams)

    def train(self, data: Dataset) -> HydrationModel:
        if self.kind == "tree":
            return train_tree(data, self.tree)
        if self.kind == "forest":
            return train_forest(data, self.forest)
        if self.kind == "nbayes":
            return train_nbayes(data)
        raise ValueError(f"unknown model kind {self.kind!r}")


def stratified_folds(labels: np.ndarray, k: int, seed: int) -> list[np.ndarray]:
    """Round-robin assignment of shuffled per-class indices to k folds."""
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(k)]
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        rng.shuffle(idx)
        for i, j in enumerate(idx):
            folds[i % k].append(int(j))
    return [np.array(sorted(f), dtype=int) for f in folds]


def fold_metrics(true: np.ndarray, pred: np.ndarray) -> tuple[float, float, float]:
    """Accuracy plus macro one-vs-rest sensitivity and specificity."""
    accuracy = float(np.mean(true == pred))
    sens, spec = [], []
    for c in range(N_CLASSES):
        pos = true == c
        if not pos.any():
            continue
        tp = np.sum(pos & (pred == c))
        fn = np.sum(pos & (pred != c))
        tn = np.sum(~pos & (pred != c))
        fp = np.sum(~pos & (pred == c))
        sens.append(tp / (tp + fn))
        spec.append(tn / (tn + fp) if (tn + fp) > 0 else 1.0)
    return accuracy, float(np.mean(sens)), float(np.mean(spec))


def cross_validate(data: Dataset, spec: ModelSpec | None = None,
                   k: int = 10, seed: int = 0) -> MetricsReport:
    """Stratified k-fold evaluation with across-fold mean/std metrics."""
    spec = spec or ModelSpec()
    _check_data(data)
    if len(data) < k:
        raise TooFewRows(f"{len(data)} rows cannot fill {k} folds")
    if k < 2:
        raise ValueError("k must be >= 2")
    labels = data.labels()
    folds = stratified_folds(labels, k, seed)
    accs, senss, specs = [], [], []
    confusion = np.zeros((N_CLASSES, N_CLASSES), dtype=int)
    records = []
    for fold_idx in folds:
        mask = np.ones(len(data), dtype=bool)
        mask[fold_idx] = False
        train_rows = [data.rows[i] for i in np.flatnonzero(mask)]
        model = spec.train(Dataset(rows=tuple(train_rows), columns=data.columns))
        true = labels[fold_idx]
        pred = np.array([int(predict(model, data.rows[i])[0]) for i in fold_idx])
        for t, p in zip(true, pred):
            confusion[t, p] += 1
        a, s, sp = fold_metrics(true, pred)
        accs.append(a)
        senss.append(s)
        specs.append(sp)
        records.append((true.tolist(), pred.tolist()))
    def stat(xs):
        return (float(np.mean(xs)), float(np.std(xs)))
    return MetricsReport(accuracy=stat(accs), sensitivity=stat(senss),
                         specificity=stat(specs), confusion=confusion, k=k,
                         fold_records=tuple(records))


# --- serialization ----------------------------------------------------------

def model_to_json(model: HydrationModel) -> str:
    doc = {
        "v": MODEL_SCHEMA_VERSION,
        "kind": model.kind,
        "feature_order_hash": model.feature_order_hash,
        "constant": model.constant,
        "params": model.parameters,
    }
    return json.dumps(doc) + "\n"


def model_from_json(text: str) -> HydrationModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CorruptModel(f"invalid JSON: {exc}")
    if not isinstance(doc, dict) or "v" not in doc:
        raise CorruptModel("model document is not an object with a version")
    if doc["v"] != MODEL_SCHEMA_VERSION:
        raise VersionMismatch(f"unsupported model version {doc['v']!r}")
    try:
        return HydrationModel(
            kind=doc["kind"],
            parameters=doc["params"],
            feature_order_hash=doc["feature_order_hash"],
            constant=bool(doc.get("constant", False)),
        )
    except KeyError as exc:
        raise CorruptModel(f"missing field {exc}")


def save_model(model: HydrationModel, path) -> None:
    with open(path, "w") as fh:
        fh.write(model_to_json(model))


def load_model(path) -> HydrationModel:
    with open(path) as fh:
        return model_from_json(fh.read())


# --- text report ------------------------------------------------------------

MODEL_DISPLAY_NAMES = {
    "tree": "Decision Tree",
    "forest": "Random Forest",
    "nbayes": "Naive Bayes",
}

METRIC_ROWS = ("Accuracy", "Sensitivity", "Specificity")


def render_report(reports: dict) -> str:
    """Comparison table: one column per classifier, one row per metric,
    cells formatted mean±std in percent."""
    names = [MODEL_DISPLAY_NAMES.get(kind, kind) for kind in reports]
    col_width = max(12, *(len(n) + 2 for n in names))
    label_width = max(len(m) for m in METRIC_ROWS) + 2
    lines = []
    header = " " * label_width + "".join(n.rjust(col_width) for n in names)
    lines.append(header)
    for metric in METRIC_ROWS:
        cells = []
        for report in reports.values():
            mean, std = getattr(report, metric.lower())
            cells.append(f"{100 * mean:.1f}±{100 * std:.1f}".rjust(col_width))
        lines.append(metric.ljust(label_width) + "".join(cells))
    ks = {report.k for report in reports.values()}
    k_text = ", ".join(str(k) for k in sorted(ks))
    lines.append("")
    lines.append(f"Values are percent, mean±std across {k_text}-fold "
                 "cross-validation folds.")
    return "\n".join(lines) + "\n"
