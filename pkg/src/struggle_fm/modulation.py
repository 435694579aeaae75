"""Shift paratelic feature values onto the telic distribution by moment matching.

For every modulated feature, a paratelic value ``x`` becomes::

    x' = (s_t / s_p) * x + m_t - (s_t / s_p) * m_p

where ``m``/``s`` are the per-state sample mean and standard deviation
(n - 1 denominator). Telic and unassigned sessions are left untouched.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from sklearn.base import BaseEstimator, OneToOneFeatureMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .model import FEATURE_GROUPS, FEATURE_NAMES, FeatureGroup, FeatureVector, State


class ModulationFitError(ValueError):
    pass


@dataclass(frozen=True)
class StateMoments:
    mu_telic: float
    sigma_telic: float
    mu_paratelic: float
    sigma_paratelic: float

    def __post_init__(self):
        if self.sigma_telic < 0 or self.sigma_paratelic < 0:
            raise ValueError("standard deviations must be non-negative")

    def apply(self, x):
        if self.sigma_paratelic == 0.0:
            return x - self.mu_paratelic + self.mu_telic
        ratio = self.sigma_telic / self.sigma_paratelic
        return ratio * x + self.mu_telic - ratio * self.mu_paratelic


@dataclass
class ModulationParams:
    selected_groups: frozenset[FeatureGroup]
    features: dict[str, StateMoments] = field(default_factory=dict)

    def __post_init__(self):
        self.selected_groups = frozenset(self.selected_groups)
        for name in self.features:
            if FEATURE_GROUPS[name] not in self.selected_groups:
                raise ValueError(f"{name} is not in a selected group")

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.dumps())

    def dumps(self) -> str:
        groups = ",".join(sorted(g.value for g in self.selected_groups))
        lines = [f"#groups\t{groups}"]
        for name in FEATURE_NAMES:
            if name in self.features:
                m = self.features[name]
                nums = (m.mu_telic, m.sigma_telic, m.mu_paratelic, m.sigma_paratelic)
                lines.append("\t".join([name, *(format(v, ".17g") for v in nums)]))
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "ModulationParams":
        groups: frozenset[FeatureGroup] | None = None
        feats = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            parts = line.split("\t")
            if parts[0] == "#groups":
                groups = frozenset(FeatureGroup(g) for g in parts[1].split(",") if g) if len(parts) > 1 else frozenset()
                continue
            if len(parts) != 5 or parts[0] not in FEATURE_GROUPS:
                raise ValueError(f"line {lineno}: malformed modulation record")
            feats[parts[0]] = StateMoments(*(float(v) for v in parts[1:]))
        if groups is None:
            raise ValueError("missing #groups header")
        return cls(groups, feats)

    @classmethod
    def load(cls, path) -> "ModulationParams":
        with open(path, encoding="utf-8") as fh:
            return cls.loads(fh.read())


def _as_states(states: Iterable) -> list[State]:
    return [s if isinstance(s, State) else State(s) for s in states]


def _std(values: np.ndarray) -> float:
    # a constant column can round to a std of ~1e-17; it must be exactly 0 to trigger the mean-shift fallback
    return 0.0 if np.ptp(values) == 0 else float(values.std(ddof=1))


def fit_modulation(Xn, states: Sequence[State], selected_groups: Iterable[FeatureGroup]) -> ModulationParams:
    """Per-state sample moments of every feature in ``selected_groups``."""
    Xn = np.atleast_2d(np.asarray(Xn, dtype=float))
    states = _as_states(states)
    groups = frozenset(selected_groups)
    telic = np.array([s is State.TELIC for s in states])
    para = np.array([s is State.PARATELIC for s in states])
    if telic.sum() < 2 or para.sum() < 2:
        raise ModulationFitError(
            f"need >= 2 telic and >= 2 paratelic sessions, got {int(telic.sum())} and {int(para.sum())}"
        )
    feats = {}
    for j, name in enumerate(FEATURE_NAMES):
        if FEATURE_GROUPS[name] not in groups:
            continue
        t, p = Xn[telic, j], Xn[para, j]
        feats[name] = StateMoments(float(t.mean()), _std(t), float(p.mean()), _std(p))
    return ModulationParams(groups, feats)


def apply_modulation(fv, state: State, params: ModulationParams):
    """Modulate one session. Accepts a FeatureVector or a row aligned to FEATURE_NAMES."""
    if isinstance(fv, FeatureVector):
        if state is not State.PARATELIC:
            return fv
        values = dict(fv.values)
        for name, m in params.features.items():
            values[name] = float(m.apply(values[name]))
        return FeatureVector(values, topic=fv.topic)
    row = np.array(fv, dtype=float)
    if state is State.PARATELIC:
        for j, name in enumerate(FEATURE_NAMES):
            if name in params.features:
                row[j] = params.features[name].apply(row[j])
    return row


class FeatureModulator(OneToOneFeatureMixin, TransformerMixin, BaseEstimator):
    """Estimator wrapper: ``fit(X, states)`` learns moments, ``transform(X, states)`` applies them.

    ``groups`` is an iterable of :class:`FeatureGroup` or ``"all"``.
    """

    def __init__(self, groups="all"):
        self.groups = groups

    def _selected(self) -> frozenset[FeatureGroup]:
        if isinstance(self.groups, str):
            if self.groups != "all":
                raise ValueError(f"unknown groups spec {self.groups!r}")
            return frozenset(FeatureGroup)
        return frozenset(FeatureGroup(g) for g in self.groups)

    def fit(self, X, states):
        X = check_array(X, dtype=float)
        if X.shape[1] != len(FEATURE_NAMES):
            raise ValueError(f"expected {len(FEATURE_NAMES)} feature columns, got {X.shape[1]}")
        self.n_features_in_ = X.shape[1]
        self.params_ = fit_modulation(X, states, self._selected())
        self._build_affine()
        return self

    def _build_affine(self):
        scale = np.ones(len(FEATURE_NAMES))
        shift = np.zeros(len(FEATURE_NAMES))
        for j, name in enumerate(FEATURE_NAMES):
            m = self.params_.features.get(name)
            if m is None:
                continue
            if m.sigma_paratelic == 0.0:
                shift[j] = m.mu_telic - m.mu_paratelic
            else:
                scale[j] = m.sigma_telic / m.sigma_paratelic
                shift[j] = m.mu_telic - scale[j] * m.mu_paratelic
        self.scale_, self.shift_ = scale, shift

    @classmethod
    def from_params(cls, params: ModulationParams) -> "FeatureModulator":
        mod = cls(groups=sorted(g.value for g in params.selected_groups))
        mod.n_features_in_ = len(FEATURE_NAMES)
        mod.params_ = params
        mod._build_affine()
        return mod

    def transform(self, X, states):
        check_is_fitted(self, "params_")
        X = check_array(X, dtype=float, copy=True)
        states = _as_states(states)
        if len(states) != X.shape[0]:
            raise ValueError("one state per row is required")
        para = np.array([s is State.PARATELIC for s in states])
        if para.any():
            X[para] = X[para] * self.scale_ + self.shift_
        return X

    def fit_transform(self, X, states):
        return self.fit(X, states).transform(X, states)
