"""Struggle classifiers, evaluation metrics and cross-validated before/after comparisons."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .features import FeatureTable
from .model import FEATURE_NAMES, FeatureGroup
from .modulation import FeatureModulator
from .stats import MinMaxNormalizer, paired_t_one_tailed, select_means_ends_groups

METRIC_NAMES = ("accuracy", "pos_precision", "pos_recall", "neg_precision", "neg_recall")


class TrainingError(ValueError):
    pass


class EncodingError(ValueError):
    pass


class SplitError(ValueError):
    pass


class FMMode(str, Enum):
    OFF = "off"
    FMNS = "fmns"
    FM = "fm"


class TopicEncoder(TransformerMixin, BaseEstimator):
    """One-hot block over the topics seen in ``fit``; unseen or missing topics encode as all zeros."""

    def fit(self, topics, y=None):
        self.categories_ = sorted({t for t in topics if t})
        self._index = {t: i for i, t in enumerate(self.categories_)}
        return self

    def transform(self, topics):
        check_is_fitted(self, "categories_")
        topics = list(topics)
        out = np.zeros((len(topics), len(self.categories_)))
        for r, t in enumerate(topics):
            j = self._index.get(t) if t else None
            if j is not None:
                out[r, j] = 1.0
        return out

    def get_feature_names_out(self, input_features=None):
        return np.asarray([f"topic={t}" for t in self.categories_], dtype=object)


def _check_binary(y) -> np.ndarray:
    y = np.asarray(y)
    if not np.isin(y, (0, 1)).all():
        raise TrainingError("labels must be 0 (non-struggle) or 1 (struggle)")
    return y.astype(int)


class ZeroRuleClassifier(ClassifierMixin, BaseEstimator):
    """Always predicts the majority training label (ties go to non-struggle)."""

    def fit(self, X, y):
        y = _check_binary(y)
        if y.size == 0:
            raise TrainingError("no labels to learn from")
        self.majority_label_ = int(y.sum() * 2 > y.size)
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = np.asarray(X).shape[1] if np.ndim(X) == 2 else 0
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "majority_label_")
        n = len(X)
        p = float(self.majority_label_)
        return np.column_stack([np.full(n, 1.0 - p), np.full(n, p)])

    def predict(self, X):
        check_is_fitted(self, "majority_label_")
        return np.full(len(X), self.majority_label_, dtype=int)


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=float)))


def logistic_loss(theta: np.ndarray, X: np.ndarray, y: np.ndarray, l2: float) -> float:
    """Mean negative log-likelihood plus ``l2/2 * ||w||^2``; ``theta = [w..., b]``."""
    w, b = theta[:-1], theta[-1]
    z = X @ w + b
    return float(np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * (w @ w))


def logistic_grad(theta: np.ndarray, X: np.ndarray, y: np.ndarray, l2: float) -> np.ndarray:
    w, b = theta[:-1], theta[-1]
    r = sigmoid(X @ w + b) - y
    n = X.shape[0]
    return np.concatenate([X.T @ r / n + l2 * w, [r.sum() / n]])


def _mean_loss(z: np.ndarray, y: np.ndarray, n: int) -> float:
    # stable softplus, max(z, 0) + log1p(exp(-|z|)); about twice as fast as np.logaddexp
    return float(np.maximum(z, 0.0).sum() + np.log1p(np.exp(-np.abs(z))).sum() - y @ z) / n


class LogisticClassifier(ClassifierMixin, BaseEstimator):
    """L2-regularized logistic regression fit by full-batch gradient descent."""

    def __init__(self, lr=0.1, epochs=2000, l2=1e-4, seed=0):
        self.lr = lr
        self.epochs = epochs
        self.l2 = l2
        self.seed = seed

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=float)
        y = _check_binary(y)
        if len(np.unique(y)) < 2:
            raise TrainingError("both classes must be present to train a logistic model")
        n, d = X.shape
        rng = np.random.default_rng(self.seed)
        # the bias rides along as a constant last column; it is not regularized
        Xb = np.empty((n, d + 1))
        Xb[:, :d] = X
        Xb[:, d] = 1.0
        theta = np.zeros(d + 1)
        theta[:d] = rng.normal(0.0, 1e-3, size=d)
        decay = np.full(d + 1, 1.0 - self.lr * self.l2)
        decay[d] = 1.0
        yf = y.astype(float)
        step = self.lr / n
        losses = np.empty(self.epochs + 1)
        for epoch in range(self.epochs):
            z = Xb @ theta
            losses[epoch] = _mean_loss(z, yf, n) + 0.5 * self.l2 * (theta[:d] @ theta[:d])
            r = sigmoid(z)
            r -= yf
            theta *= decay
            theta -= step * (r @ Xb)
        z = Xb @ theta
        losses[self.epochs] = _mean_loss(z, yf, n) + 0.5 * self.l2 * (theta[:d] @ theta[:d])
        w, b = theta[:d].copy(), theta[d]
        self.coef_ = w
        self.intercept_ = float(b)
        self.loss_history_ = losses
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = d
        return self

    def decision_function(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.coef_.size:
            raise EncodingError(f"model expects {self.coef_.size} columns, got {X.shape[1]}")
        return X @ self.coef_ + self.intercept_

    def predict_proba(self, X):
        p = sigmoid(self.decision_function(X))
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] > 0.5).astype(int)

    def save(self, path, feature_names: Sequence[str] | None = None) -> None:
        check_is_fitted(self, "coef_")
        names = list(feature_names) if feature_names is not None else [f"x{i}" for i in range(self.coef_.size)]
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"#logistic\tlr={self.lr!r}\tepochs={self.epochs}\tl2={self.l2!r}\tseed={self.seed}\n")
            fh.write(f"__bias__\t{format(self.intercept_, '.17g')}\n")
            for name, v in zip(names, self.coef_):
                fh.write(f"{name}\t{format(float(v), '.17g')}\n")

    @classmethod
    def load(cls, path) -> tuple["LogisticClassifier", list[str]]:
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().rstrip("\n").split("\t")
            if header[0] != "#logistic":
                raise ValueError(f"{path}: not a logistic model file")
            hp = dict(kv.split("=", 1) for kv in header[1:])
            model = cls(lr=float(hp["lr"]), epochs=int(hp["epochs"]), l2=float(hp["l2"]), seed=int(hp["seed"]))
            names, weights, bias = [], [], 0.0
            for line in fh:
                name, val = line.rstrip("\n").split("\t")
                if name == "__bias__":
                    bias = float(val)
                else:
                    names.append(name)
                    weights.append(float(val))
        model.coef_ = np.array(weights)
        model.intercept_ = bias
        model.classes_ = np.array([0, 1])
        model.n_features_in_ = len(weights)
        return model, names


def metrics(preds, labels) -> dict[str, float | None]:
    """Accuracy and per-class precision/recall; a ratio with a zero denominator is None."""
    preds = np.asarray(preds, dtype=int)
    labels = np.asarray(labels, dtype=int)
    if preds.shape != labels.shape or preds.size == 0:
        raise ValueError("predictions and labels must be non-empty and of equal length")
    tp = int(((preds == 1) & (labels == 1)).sum())
    tn = int(((preds == 0) & (labels == 0)).sum())
    fp = int(((preds == 1) & (labels == 0)).sum())
    fn = int(((preds == 0) & (labels == 1)).sum())

    def ratio(a, b):
        return a / b if b else None

    return {
        "accuracy": (tp + tn) / preds.size,
        "pos_precision": ratio(tp, tp + fp),
        "pos_recall": ratio(tp, tp + fn),
        "neg_precision": ratio(tn, tn + fn),
        "neg_recall": ratio(tn, tn + fp),
    }


def stratified_folds(y, k: int, seed: int = 0) -> list[np.ndarray]:
    """Test-index arrays for ``k`` stratified folds, assigned round-robin after a seeded shuffle."""
    y = np.asarray(y, dtype=int)
    if k < 2:
        raise SplitError("k must be at least 2")
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(k)]
    offset = 0
    for cls in (1, 0):
        idx = np.flatnonzero(y == cls)
        rng.shuffle(idx)
        for j, i in enumerate(idx):
            folds[(j + offset) % k].append(int(i))
        offset += len(idx)
    for f, fold in enumerate(folds):
        classes = set(y[fold].tolist())
        if classes != {0, 1}:
            raise SplitError(f"fold {f} is missing a class after stratification")
    return [np.array(sorted(f)) for f in folds]


@dataclass
class EvalReport:
    name: str
    folds: list[dict[str, float | None]]
    mode: FMMode = FMMode.OFF
    selected_groups: list[list[str]] = field(default_factory=list)

    @property
    def k(self) -> int:
        return len(self.folds)

    @property
    def aggregate(self) -> dict[str, float | None]:
        out = {}
        for m in METRIC_NAMES:
            vals = [f[m] for f in self.folds if f[m] is not None]
            out[m] = sum(vals) / len(vals) if vals else None
        return out

    def fold_values(self, metric: str) -> np.ndarray:
        return np.array([np.nan if f[metric] is None else f[metric] for f in self.folds])

    def records(self) -> list[dict]:
        recs = [{"run": self.name, "fold": i, **f} for i, f in enumerate(self.folds)]
        recs.append({"run": self.name, "fold": "mean", **self.aggregate})
        return recs


@dataclass
class PipelineConfig:
    mode: FMMode = FMMode.OFF
    alpha: float = 0.05
    fit_scope: str = "fold"
    classifier: str = "logistic"
    lr: float = 0.1
    epochs: int = 2000
    l2: float = 1e-4
    seed: int = 0


class StrugglePipeline:
    """Normalize -> (select) -> modulate -> encode topic -> classify, fit on one training set."""

    def __init__(self, config: PipelineConfig):
        self.config = config

    def fit_preprocessing(self, table: FeatureTable):
        cfg = self.config
        self.scaler_ = MinMaxNormalizer().fit(table.X)
        Xn = self.scaler_.transform(table.X)
        self.groups_: frozenset[FeatureGroup] = frozenset()
        if cfg.mode is FMMode.FM:
            self.selection_ = select_means_ends_groups(Xn, table.states, cfg.alpha)
            self.groups_ = self.selection_.groups
        elif cfg.mode is FMMode.FMNS:
            self.groups_ = frozenset(FeatureGroup)
        self.modulator_ = None
        if self.groups_:
            self.modulator_ = FeatureModulator(sorted(g.value for g in self.groups_)).fit(Xn, table.states)
        self.topics_ = TopicEncoder().fit(table.topics)
        return self

    def encode(self, table: FeatureTable) -> np.ndarray:
        Xn = self.scaler_.transform(table.X)
        Xm = self.modulator_.transform(Xn, table.states) if self.modulator_ is not None else Xn
        return np.hstack([Xm, self.topics_.transform(table.topics)])

    def feature_names(self) -> list[str]:
        return list(FEATURE_NAMES) + list(self.topics_.get_feature_names_out())

    def fit_classifier(self, table: FeatureTable):
        cfg = self.config
        if cfg.classifier == "zero_rule":
            self.clf_ = ZeroRuleClassifier()
        else:
            self.clf_ = LogisticClassifier(lr=cfg.lr, epochs=cfg.epochs, l2=cfg.l2, seed=cfg.seed)
        self.clf_.fit(self.encode(table), table.y)
        return self

    def fit(self, table: FeatureTable):
        return self.fit_preprocessing(table).fit_classifier(table)

    def predict(self, table: FeatureTable) -> np.ndarray:
        return self.clf_.predict(self.encode(table))


def kfold_eval(table: FeatureTable, k: int = 10, config: PipelineConfig | None = None, name: str | None = None,
               cache: dict | None = None) -> EvalReport:
    """Cross-validated metrics of one pipeline configuration.

    ``cache`` may be shared between calls on the same table, k and seed: a fold whose
    preprocessing ends with the same modulated groups (e.g. FM selecting every group,
    which is exactly FMNS) then reuses the already-fitted result.
    """
    cfg = config or PipelineConfig()
    y = table.y
    folds = stratified_folds(y, k, cfg.seed)
    everything = np.arange(len(table))
    global_pre = None
    if cfg.fit_scope == "global":
        global_pre = StrugglePipeline(cfg).fit_preprocessing(table)
    elif cfg.fit_scope != "fold":
        raise ValueError(f"unknown fit scope {cfg.fit_scope!r}")

    rows, selected = [], []
    for fold, test_idx in enumerate(folds):
        train_idx = np.setdiff1d(everything, test_idx)
        train, test = table.subset(train_idx), table.subset(test_idx)
        if global_pre is not None:
            pipe = global_pre
        else:
            pipe = StrugglePipeline(cfg).fit_preprocessing(train)
        groups = sorted(g.value for g in pipe.groups_)
        key = (fold, cfg.fit_scope, tuple(groups))
        if cache is not None and key in cache:
            row = cache[key]
        else:
            pipe.fit_classifier(train)
            row = metrics(pipe.predict(test), test.y)
            if cache is not None:
                cache[key] = row
        selected.append(groups)
        rows.append(row)
    return EvalReport(name or cfg.mode.value, rows, cfg.mode, selected)


def _fmt(v: float | None) -> str:
    return "--" if v is None else f"{v:.4f}"


@dataclass
class Comparison:
    baseline: EvalReport
    runs: list[EvalReport]
    alpha: float = 0.05

    def improvement(self, run: EvalReport, metric: str) -> float | None:
        base = self.baseline.aggregate[metric]
        val = run.aggregate[metric]
        if base is None or val is None or base == 0:
            return None
        return (val - base) / base

    def significance(self, run: EvalReport, metric: str):
        a = run.fold_values(metric)
        b = self.baseline.fold_values(metric)
        ok = ~(np.isnan(a) | np.isnan(b))
        if ok.sum() < 2:
            return None
        return paired_t_one_tailed(a[ok], b[ok])

    def table(self) -> str:
        head = ["run", "accu.", "impr.", "pos. p", "impr.", "pos. r", "impr.", "neg. p", "impr.", "neg. r", "impr."]
        lines = [" | ".join(head)]
        for run in [self.baseline, *self.runs]:
            cells = [run.name]
            agg = run.aggregate
            for m in METRIC_NAMES:
                cells.append(_fmt(agg[m]))
                if run is self.baseline:
                    cells.append("")
                    continue
                imp = self.improvement(run, m)
                if imp is None:
                    cells.append("--")
                    continue
                arrow = "↑" if imp > 0 else "↓" if imp < 0 else ""
                test = self.significance(run, m)
                dagger = "†" if imp > 0 and test is not None and test.p < self.alpha else ""
                cells.append(f"{abs(imp) * 100:.1f}%{arrow}{dagger}")
            lines.append(" | ".join(cells))
        return "\n".join(lines)

    def records(self) -> list[dict]:
        recs = []
        for run in [self.baseline, *self.runs]:
            recs.extend(run.records())
        for run in self.runs:
            for m in METRIC_NAMES:
                test = self.significance(run, m)
                recs.append(
                    {
                        "run": run.name,
                        "vs": self.baseline.name,
                        "metric": m,
                        "improvement": self.improvement(run, m),
                        "t": None if test is None or math.isinf(test.t) else test.t,
                        "p": None if test is None else test.p,
                    }
                )
        return recs


def compare_fm_runs(table: FeatureTable, k: int = 10, config: PipelineConfig | None = None, label: str = "LM") -> Comparison:
    """Baseline, +FMNS and +FM runs on identical folds."""
    base_cfg = config or PipelineConfig()
    reports, cache = {}, {}
    for mode in FMMode:
        suffix = "" if mode is FMMode.OFF else f"+{mode.value.upper()}"
        reports[mode] = kfold_eval(table, k, replace(base_cfg, mode=mode), name=f"{label}{suffix}", cache=cache)
    return Comparison(reports[FMMode.OFF], [reports[FMMode.FMNS], reports[FMMode.FM]], base_cfg.alpha)
