"""Random forest screening classifier with stratified cross-validation.

Each tree trains on a bootstrap resample; splits maximize information gain
(entropy criterion) over a random feature subset using midpoint thresholds
between sorted distinct values.  Prediction is a majority vote with ties
going to the abnormal class, the conservative choice for a screening assay.
The abnormal class (no organ found) is the positive class for sensitivity
and specificity.
"""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, EmptyMatrix, SingleClass, TooFewSamples
from .labels import LABEL_WITH, LABEL_WITHOUT, LABELS  # noqa: F401 - re-exported

MODEL_FORMAT_VERSION = 1


@dataclass
class ForestParams:
    n_estimators: int = 50
    max_depth: int = 30
    min_samples_split: int = 5
    min_samples_leaf: int = 2
    criterion: str = "entropy"
    features_per_split: int = 0  # 0 = ceil(sqrt(n_features))
    seed: int = 0

    def __post_init__(self):
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be >= 1")
        if not self.min_samples_split > self.min_samples_leaf >= 1:
            raise ValueError("need min_samples_split > min_samples_leaf >= 1")
        if self.criterion != "entropy":
            raise ValueError("only the entropy criterion is supported")

    def resolved_features_per_split(self, n_features):
        if self.features_per_split > 0:
            return min(self.features_per_split, n_features)
        return min(math.ceil(math.sqrt(n_features)), n_features)

    def to_dict(self):
        return {
            "n_estimators": self.n_estimators,
            "max_depth": self.max_depth,
            "min_samples_split": self.min_samples_split,
            "min_samples_leaf": self.min_samples_leaf,
            "criterion": self.criterion,
            "features_per_split": self.features_per_split,
            "seed": self.seed,
        }


@dataclass
class Dataset:
    """Feature matrix with integer class labels and per-sample ids."""

    features: np.ndarray  # (n, d) float64
    labels: np.ndarray  # (n,) int64 indices into LABELS
    image_ids: list

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2 or len(self.labels) != len(self.features):
            raise DimensionMismatch("features and labels sizes disagree")

    @classmethod
    def from_rows(cls, rows):
        """Build from (image_id, label string, FeatureVector) triples."""
        ids = [r[0] for r in rows]
        labels = np.array([LABELS.index(r[1]) for r in rows], dtype=np.int64)
        feats = np.stack([r[2].to_array() for r in rows])
        return cls(features=feats, labels=labels, image_ids=ids)

    def class_counts(self):
        return np.bincount(self.labels, minlength=2)


@dataclass
class ConfusionMatrix:
    """Counts with rows = ground truth, columns = prediction.

    tp_sb: truth organ-present, predicted present.
    fn_sb: truth organ-present, predicted absent.
    fp_sb: truth organ-absent, predicted present.
    tn_sb: truth organ-absent, predicted absent.
    """

    tp_sb: int = 0
    fn_sb: int = 0
    fp_sb: int = 0
    tn_sb: int = 0

    @property
    def total(self):
        return self.tp_sb + self.fn_sb + self.fp_sb + self.tn_sb

    def as_table(self):
        return [[self.tp_sb, self.fn_sb], [self.fp_sb, self.tn_sb]]

    def __add__(self, other):
        return ConfusionMatrix(
            tp_sb=self.tp_sb + other.tp_sb,
            fn_sb=self.fn_sb + other.fn_sb,
            fp_sb=self.fp_sb + other.fp_sb,
            tn_sb=self.tn_sb + other.tn_sb,
        )


@dataclass
class CVReport:
    k: int
    fold_matrices: list
    pooled: ConfusionMatrix
    accuracy: float
    sensitivity: float
    specificity: float


def _entropy(counts):
    n = counts.sum()
    if n == 0:
        return 0.0
    p = counts[counts > 0] / n
    return float(-(p * np.log2(p)).sum())


class _TreeBuilder:
    def __init__(self, x, y, params, rng):
        self.x = x
        self.y = y
        self.params = params
        self.rng = rng
        self.k = params.resolved_features_per_split(x.shape[1])
        self.nodes = []

    def build(self, indices, depth):
        counts = np.bincount(self.y[indices], minlength=2)
        node_id = len(self.nodes)
        self.nodes.append(None)
        split = None
        if (
            depth < self.params.max_depth
            and len(indices) >= self.params.min_samples_split
            and counts.min() > 0
        ):
            split = self._best_split(indices)
        if split is None:
            self.nodes[node_id] = {
                "feature_index": None,
                "threshold": None,
                "left": None,
                "right": None,
                "leaf_class": _majority_label(counts),
                "class_counts": [int(counts[0]), int(counts[1])],
            }
            return node_id
        feat, thr = split
        go_left = self.x[indices, feat] <= thr
        left_id = self.build(indices[go_left], depth + 1)
        right_id = self.build(indices[~go_left], depth + 1)
        self.nodes[node_id] = {
            "feature_index": int(feat),
            "threshold": float(thr),
            "left": left_id,
            "right": right_id,
            "leaf_class": None,
            "class_counts": [int(counts[0]), int(counts[1])],
        }
        return node_id

    def _best_split(self, indices):
        y = self.y[indices]
        parent = _entropy(np.bincount(y, minlength=2))
        n = len(indices)
        feats = self.rng.choice(self.x.shape[1], size=self.k, replace=False)
        best_gain = 0.0
        best = None
        for feat in feats:
            values = self.x[indices, feat]
            order = np.argsort(values, kind="stable")
            sv = values[order]
            sy = y[order]
            distinct = np.nonzero(np.diff(sv) > 0)[0]
            if len(distinct) == 0:
                continue
            # cumulative class-1 counts give child entropies at every cut
            ones = np.cumsum(sy)
            for cut in distinct:
                n_left = cut + 1
                n_right = n - n_left
                if n_left < self.params.min_samples_leaf or n_right < self.params.min_samples_leaf:
                    continue
                l1 = int(ones[cut])
                left_counts = np.array([n_left - l1, l1])
                r1 = int(ones[-1]) - l1
                right_counts = np.array([n_right - r1, r1])
                child = (n_left * _entropy(left_counts) + n_right * _entropy(right_counts)) / n
                gain = parent - child
                if gain > best_gain + 1e-12:
                    best_gain = gain
                    best = (int(feat), (sv[cut] + sv[cut + 1]) / 2.0)
        return best


def _majority_label(counts):
    # ties go to the abnormal (positive) class
    return LABELS[1] if counts[1] >= counts[0] else LABELS[0]


@dataclass
class ForestModel:
    params: ForestParams
    trees: list = field(default_factory=list)
    n_features: int = 0

    def predict(self, fv):
        """Majority vote over trees -> (label, winning vote fraction)."""
        x = np.asarray(fv.to_array() if hasattr(fv, "to_array") else fv, dtype=np.float64)
        if x.shape != (self.n_features,):
            raise DimensionMismatch(
                f"feature vector has shape {x.shape}, model expects ({self.n_features},)"
            )
        votes = np.zeros(2, dtype=np.int64)
        for nodes in self.trees:
            node = nodes[0]
            while node["leaf_class"] is None:
                if x[node["feature_index"]] <= node["threshold"]:
                    node = nodes[node["left"]]
                else:
                    node = nodes[node["right"]]
            votes[LABELS.index(node["leaf_class"])] += 1
        label = _majority_label(votes)
        return label, float(votes.max()) / float(votes.sum())

    def predict_index(self, fv):
        return LABELS.index(self.predict(fv)[0])

    def to_json(self):
        payload = {
            "params": self.params.to_dict(),
            "n_features": self.n_features,
            "trees": [{"nodes": nodes} for nodes in self.trees],
            "format_version": MODEL_FORMAT_VERSION,
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        payload = json.loads(text)
        if payload.get("format_version") != MODEL_FORMAT_VERSION:
            raise ValueError(f"unsupported model format {payload.get('format_version')}")
        params = ForestParams(**payload["params"])
        trees = [tree["nodes"] for tree in payload["trees"]]
        return cls(params=params, trees=trees, n_features=int(payload["n_features"]))

    def save(self, path):
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def load(cls, path):
        return cls.from_json(Path(path).read_text())


def train_forest(data: Dataset, params: ForestParams = None):
    """Fit the ensemble; bootstrap size equals the dataset size."""
    if params is None:
        params = ForestParams()
    counts = data.class_counts()
    if counts.min() == 0:
        raise SingleClass("training data holds a single class")
    n = len(data.labels)
    seeds = np.random.SeedSequence(params.seed).spawn(params.n_estimators)
    trees = []
    for ss in seeds:
        rng = np.random.Generator(np.random.PCG64(ss))
        sample = rng.integers(0, n, size=n)
        builder = _TreeBuilder(data.features, data.labels, params, rng)
        builder.build(sample, depth=0)
        trees.append(builder.nodes)
    return ForestModel(params=params, trees=trees, n_features=data.features.shape[1])


def metrics(cm: ConfusionMatrix):
    """(accuracy, sensitivity, specificity) with the organ-absent class positive.

    Sensitivity is the detection rate of abnormal samples; specificity the
    pass rate of normal ones.
    """
    if cm.total == 0:
        raise EmptyMatrix("confusion matrix is empty")
    accuracy = (cm.tp_sb + cm.tn_sb) / cm.total
    pos = cm.fp_sb + cm.tn_sb
    neg = cm.tp_sb + cm.fn_sb
    sensitivity = cm.tn_sb / pos if pos else 0.0
    specificity = cm.tp_sb / neg if neg else 0.0
    return accuracy, sensitivity, specificity


def _stratified_folds(labels, k, seed):
    """Deal each class round-robin after a seeded shuffle; sizes differ <= 1."""
    rng = np.random.Generator(np.random.PCG64(seed))
    folds = [[] for _ in range(k)]
    for cls in range(2):
        idx = np.nonzero(labels == cls)[0]
        if len(idx) < k:
            raise TooFewSamples(
                f"class {LABELS[cls]} has {len(idx)} samples; need >= {k} for {k} folds"
            )
        rng.shuffle(idx)
        for i, j in enumerate(idx):
            folds[i % k].append(int(j))
    return [np.array(sorted(f), dtype=np.int64) for f in folds]


def _confusion(y_true, y_pred):
    cm = ConfusionMatrix()
    for t, p in zip(y_true, y_pred):
        if t == 0 and p == 0:
            cm.tp_sb += 1
        elif t == 0 and p == 1:
            cm.fn_sb += 1
        elif t == 1 and p == 0:
            cm.fp_sb += 1
        else:
            cm.tn_sb += 1
    return cm


def cross_validate(data: Dataset, k=5, params: ForestParams = None, seed=0):
    """Stratified k-fold evaluation; confusions pool across folds."""
    if params is None:
        params = ForestParams()
    folds = _stratified_folds(data.labels, k, seed)
    fold_matrices = []
    pooled = ConfusionMatrix()
    for held_out in folds:
        train_idx = np.setdiff1d(np.arange(len(data.labels)), held_out)
        train_data = Dataset(
            features=data.features[train_idx],
            labels=data.labels[train_idx],
            image_ids=[data.image_ids[i] for i in train_idx],
        )
        model = train_forest(train_data, params)
        preds = [
            model.predict_index(data.features[i]) for i in held_out
        ]
        cm = _confusion(data.labels[held_out], preds)
        fold_matrices.append(cm)
        pooled = pooled + cm
    accuracy, sensitivity, specificity = metrics(pooled)
    return CVReport(
        k=k,
        fold_matrices=fold_matrices,
        pooled=pooled,
        accuracy=accuracy,
        sensitivity=sensitivity,
        specificity=specificity,
    )
