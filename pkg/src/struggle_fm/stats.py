"""Normalization, group-difference tests and the two state-dimension analyses."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, OneToOneFeatureMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .distributions import f_sf, t_sf
from .model import FEATURE_GROUPS, FEATURE_NAMES, FeatureGroup, FeatureVector, State

EXPLORE_GROUPS = (FeatureGroup.DIVERSIFY, FeatureGroup.RARITY)
RULES_TESTED_GROUPS = tuple(g for g in FeatureGroup if g not in EXPLORE_GROUPS)


class InsufficientDataError(ValueError):
    """Too few sessions (or states) for the requested test."""


class SingularScatterError(np.linalg.LinAlgError):
    pass


def minmax_normalize(columns) -> np.ndarray:
    """Scale each column to [0, 1]; constant columns become 0."""
    return MinMaxNormalizer().fit_transform(columns)


class MinMaxNormalizer(OneToOneFeatureMixin, TransformerMixin, BaseEstimator):
    """Per-column ``(x - min) / (max - min)`` with bounds learned in ``fit``.

    Values outside the fitted range map outside [0, 1]; constant columns map to 0.
    """

    def fit(self, X, y=None):
        X = check_array(X, dtype=float)
        self.n_features_in_ = X.shape[1]
        self.data_min_ = X.min(axis=0)
        self.data_max_ = X.max(axis=0)
        return self

    def transform(self, X):
        check_is_fitted(self, "data_min_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} columns, got {X.shape[1]}")
        span = self.data_max_ - self.data_min_
        out = np.zeros_like(X)
        nz = span > 0
        out[:, nz] = (X[:, nz] - self.data_min_[nz]) / span[nz]
        return out


def _group_columns(group: FeatureGroup) -> list[int]:
    return [i for i, name in enumerate(FEATURE_NAMES) if FEATURE_GROUPS[name] is group]


def group_averages(Xn, groups: Sequence[FeatureGroup] = tuple(FeatureGroup)) -> np.ndarray:
    """Unweighted mean of each group's (normalized) features, one column per group."""
    Xn = np.atleast_2d(np.asarray(Xn, dtype=float))
    return np.column_stack([Xn[:, _group_columns(g)].mean(axis=1) for g in groups])


def explore_score(fv) -> float | np.ndarray:
    """Mean diversify feature plus mean rarity feature, on normalized values.

    Accepts a :class:`FeatureVector`, a single row, or a matrix of rows.
    """
    if isinstance(fv, FeatureVector):
        row = np.asarray(fv.as_list())
        return float(group_averages(row, EXPLORE_GROUPS).sum())
    arr = np.asarray(fv, dtype=float)
    scores = group_averages(arr, EXPLORE_GROUPS).sum(axis=1)
    return float(scores[0]) if arr.ndim == 1 else scores


@dataclass(frozen=True)
class AnovaResult:
    f: float
    df1: int
    df2: int
    p: float

    def __str__(self):
        return f"F({self.df1}, {self.df2})={self.f:.4f}, p={self.p:.4f}"

    def as_record(self) -> dict:
        return {"f": self.f, "df1": self.df1, "df2": self.df2, "p": self.p}


@dataclass(frozen=True)
class ManovaResult(AnovaResult):
    wilks_lambda: float = 1.0

    def as_record(self) -> dict:
        return {**super().as_record(), "wilks_lambda": self.wilks_lambda}


def one_way_anova(a, b) -> AnovaResult:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size < 2 or b.size < 2:
        raise InsufficientDataError("each group needs at least 2 values")
    n = a.size + b.size
    grand = (a.sum() + b.sum()) / n
    ss_between = a.size * (a.mean() - grand) ** 2 + b.size * (b.mean() - grand) ** 2
    ss_within = ((a - a.mean()) ** 2).sum() + ((b - b.mean()) ** 2).sum()
    df2 = n - 2
    if ss_within == 0.0:
        if ss_between == 0.0:
            return AnovaResult(0.0, 1, df2, 1.0)
        return AnovaResult(math.inf, 1, df2, 0.0)
    f = ss_between / (ss_within / df2)
    return AnovaResult(float(f), 1, df2, f_sf(f, 1, df2))


def two_group_manova(A, B) -> ManovaResult:
    """Wilks' lambda test for equal mean vectors, with the exact two-group F transform."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.ndim != 2 or A.shape[1] != B.shape[1]:
        raise ValueError("both groups need the same number of columns")
    n1, p = A.shape
    n2 = B.shape[0]
    n = n1 + n2
    if n <= p + 1:
        raise InsufficientDataError(f"need more than {p + 1} rows in total, got {n}")
    dA = A - A.mean(axis=0)
    dB = B - B.mean(axis=0)
    W = dA.T @ dA + dB.T @ dB
    if np.linalg.matrix_rank(W) < p or np.linalg.cond(W) > 1e12:
        raise SingularScatterError(
            "pooled within-group scatter is singular; drop constant or collinear columns and retry"
        )
    diff = A.mean(axis=0) - B.mean(axis=0)
    # Hotelling T^2; for two groups det(W)/det(W+B) = 1/(1 + T^2)
    t2 = (n1 * n2 / n) * float(diff @ np.linalg.solve(W, diff))
    t2 = max(t2, 0.0)
    wilks = 1.0 / (1.0 + t2)
    df1, df2 = p, n - p - 1
    f = df2 / df1 * t2
    return ManovaResult(f=f, df1=df1, df2=df2, p=f_sf(f, df1, df2), wilks_lambda=wilks)


def tail_size(n: int, fraction: float = 0.15) -> int:
    return max(2, math.floor(fraction * n))


@dataclass
class RulesTestReport:
    manova: ManovaResult | None
    anovas: dict[FeatureGroup, AnovaResult]
    tail_size: int

    def lines(self) -> list[str]:
        out = [f"MANOVA [{self.manova}]" if self.manova else "MANOVA [not estimable, skipped]"]
        out += [f"{g.value} [{r}]" for g, r in self.anovas.items()]
        return out

    def records(self) -> list[dict]:
        recs = []
        if self.manova is not None:
            recs.append({"test": "manova", "groups": [g.value for g in self.anovas], **self.manova.as_record()})
        recs += [{"test": "anova", "group": g.value, **r.as_record()} for g, r in self.anovas.items()]
        return recs


def rules_relevance_test(Xn, session_ids: Sequence[str], fraction: float = 0.15) -> RulesTestReport:
    """Compare the highest- and lowest-ExploreScore sessions on the other five effort groups."""
    Xn = np.atleast_2d(np.asarray(Xn, dtype=float))
    n = Xn.shape[0]
    if n < 14:
        raise InsufficientDataError(f"rules test needs at least 14 sessions, got {n}")
    if len(session_ids) != n:
        raise ValueError("one session id per row is required")
    scores = explore_score(Xn)
    order = sorted(range(n), key=lambda i: (scores[i], session_ids[i]))
    k = tail_size(n, fraction)
    conformist = order[:k]
    negativistic = order[-k:]
    avgs = group_averages(Xn, RULES_TESTED_GROUPS)
    lo, hi = avgs[conformist], avgs[negativistic]
    anovas = {g: one_way_anova(hi[:, j], lo[:, j]) for j, g in enumerate(RULES_TESTED_GROUPS)}
    try:
        manova = two_group_manova(hi, lo)
    except (SingularScatterError, InsufficientDataError):
        # tiny tails or constant group averages: the per-group ANOVAs still stand
        manova = None
    return RulesTestReport(manova=manova, anovas=anovas, tail_size=k)


@dataclass
class MeansEndsSelection:
    groups: frozenset[FeatureGroup]
    anovas: dict[FeatureGroup, AnovaResult]
    manova: ManovaResult | None = None
    alpha: float = 0.05

    def lines(self) -> list[str]:
        out = [f"MANOVA [{self.manova}]" if self.manova else "MANOVA [not estimable, skipped]"]
        for g, r in self.anovas.items():
            mark = " *" if g in self.groups else ""
            out.append(f"{g.value} [{r}]{mark}")
        return out


def select_means_ends_groups(Xn, states: Sequence[State], alpha: float = 0.05) -> MeansEndsSelection:
    """Groups whose average differs between telic and paratelic sessions at level ``alpha``.

    Unassigned sessions are left out of the comparison.
    """
    Xn = np.atleast_2d(np.asarray(Xn, dtype=float))
    states = list(states)
    telic = [i for i, s in enumerate(states) if s is State.TELIC]
    para = [i for i, s in enumerate(states) if s is State.PARATELIC]
    if len(telic) < 2 or len(para) < 2:
        raise InsufficientDataError(
            f"need >= 2 telic and >= 2 paratelic sessions, got {len(telic)} and {len(para)}"
        )
    avgs = group_averages(Xn)
    anovas = {g: one_way_anova(avgs[telic, j], avgs[para, j]) for j, g in enumerate(FeatureGroup)}
    try:
        manova = two_group_manova(avgs[telic], avgs[para])
    except (SingularScatterError, InsufficientDataError):
        manova = None
    selected = frozenset(g for g, r in anovas.items() if r.p < alpha)
    return MeansEndsSelection(selected, anovas, manova, alpha)


@dataclass(frozen=True)
class PairedTResult:
    t: float
    df: int
    p: float
    mean_diff: float = field(default=0.0)

    def __str__(self):
        return f"t({self.df})={self.t:.4f}, p={self.p:.4f}"


def paired_t_one_tailed(a, b) -> PairedTResult:
    """Paired t-test of H1: mean(a - b) > 0."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("paired samples must be 1-D and of equal length")
    n = a.size
    if n < 2:
        raise InsufficientDataError("need at least 2 pairs")
    d = a - b
    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    df = n - 1
    if sd == 0.0:
        if mean == 0.0:
            return PairedTResult(0.0, df, 0.5, mean)
        return PairedTResult(math.copysign(math.inf, mean), df, 0.0 if mean > 0 else 1.0, mean)
    t = mean / (sd / math.sqrt(n))
    return PairedTResult(t, df, t_sf(t, df), mean)

