"""Effort-based session features.

Every session is mapped to one value per name in :data:`FEATURE_NAMES`,
grouped into seven effort groups. Counts are raw, ``log_*`` features are
``log(1 + x)``, and averages over an empty denominator are 0.
"""

from __future__ import annotations

import csv
import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from statistics import stdev
from typing import Iterable, Sequence
from urllib.parse import urlsplit

import numpy as np
from rapidfuzz.distance import Levenshtein
from sklearn.base import BaseEstimator, TransformerMixin

from .ingest import tf_cosine, tokenize_query
from .model import (
    FEATURE_NAMES,
    EventKind,
    FeatureVector,
    Label,
    PopularityTable,
    RawEvent,
    ResultKind,
    SCROLL_KINDS,
    Session,
    State,
)
from .taxonomy import Taxonomy, url_labels

FASTBACK_SECONDS = 15.0


@dataclass
class FeatureConfig:
    sat_threshold: float = 30.0
    last_dwell_default: float = 30.0
    fastback_threshold: float = FASTBACK_SECONDS
    taxonomy: Taxonomy | None = None


def normalize_query(text: str) -> str:
    return " ".join(tokenize_query(text))


@lru_cache(maxsize=65536)
def edit_distance(a: str, b: str) -> int:
    """Character-level Levenshtein distance."""
    return Levenshtein.distance(a, b)


@lru_cache(maxsize=65536)
def query_cosine(q1: str, q2: str) -> float:
    return tf_cosine(tokenize_query(q1), tokenize_query(q2))


def _event_index(event: RawEvent, session: Session) -> int:
    for i, ev in enumerate(session.events):
        if ev is event:
            return i
    return session.events.index(event)


def dwell_time(event: RawEvent, session: Session, last_default: float = 30.0) -> float:
    """Seconds from ``event`` to the next event of the session (``last_default`` for the last one)."""
    i = _event_index(event, session)
    if i + 1 >= len(session.events):
        return float(last_default)
    return (session.events[i + 1].timestamp - event.timestamp) / 1000.0


def sat_click(event: RawEvent, session: Session, threshold_s: float = 30.0, last_default: float = 30.0) -> bool:
    return dwell_time(event, session, last_default) >= threshold_s


def entropy(labels: Iterable) -> float:
    """Shannon entropy (nats) of the empirical label distribution."""
    counts = Counter(labels)
    n = sum(counts.values())
    if n <= 1:
        return 0.0
    return max(0.0, -sum((c / n) * math.log(c / n) for c in counts.values()))


def topic_entropy(session: Session, taxonomy: Taxonomy) -> float:
    return entropy(url_labels(session, taxonomy))


@lru_cache(maxsize=65536)
def _domain(url: str) -> str:
    parts = urlsplit(url if "//" in url else "//" + url)
    return (parts.hostname or url).lower()


def _mean(xs: Sequence[float]) -> float:
    return sum(xs) / len(xs) if xs else 0.0


def _ratio(num: float, den: float) -> float:
    return num / den if den else 0.0


def _term_diff(prev: list[str], cur: list[str]) -> tuple[int, int, int]:
    """(added, removed, shared) term counts between adjacent queries, as multisets."""
    p, c = Counter(prev), Counter(cur)
    added = sum((c - p).values())
    removed = sum((p - c).values())
    shared = sum((p & c).values())
    return added, removed, shared


@dataclass
class _Walk:
    """Per-session event bookkeeping shared by the feature groups."""

    queries: list[RawEvent] = field(default_factory=list)
    clicks: list[RawEvent] = field(default_factory=list)
    dwell: list[float] = field(default_factory=list)
    click_query: list[int] = field(default_factory=list)  # index of owning query, -1 if none
    clicks_per_query: list[int] = field(default_factory=list)


def _walk(session: Session, cfg: FeatureConfig) -> _Walk:
    w = _Walk()
    events = session.events
    q_idx = -1
    for i, ev in enumerate(events):
        if ev.kind is EventKind.QUERY:
            w.queries.append(ev)
            w.clicks_per_query.append(0)
            q_idx += 1
        elif ev.is_click:
            w.clicks.append(ev)
            if i + 1 < len(events):
                w.dwell.append((events[i + 1].timestamp - ev.timestamp) / 1000.0)
            else:
                w.dwell.append(float(cfg.last_dwell_default))
            w.click_query.append(q_idx)
            if q_idx >= 0:
                w.clicks_per_query[q_idx] += 1
    return w


def _query_features(w: _Walk) -> dict[str, float]:
    nq = len(w.queries)
    toks = [tokenize_query(q.query_text) for q in w.queries]
    lengths = [len(t) for t in toks]
    longest_pos = 0.0
    if nq:
        longest_pos = (lengths.index(max(lengths)) + 1) / nq
    return {
        "num_queries": float(nq),
        "num_unique_queries": float(len({normalize_query(q.query_text) for q in w.queries})),
        "avg_terms_per_query": _mean(lengths),
        "avg_chars_per_query": _mean([len(q.query_text.strip()) for q in w.queries]),
        "pct_manual_queries": _ratio(sum(q.query_source.value == "manual" for q in w.queries), nq),
        "pct_suggested_queries": _ratio(sum(q.query_source.value == "suggested" for q in w.queries), nq),
        "longest_query_position": longest_pos,
    }


def _click_features(session: Session, w: _Walk, cfg: FeatureConfig) -> dict[str, float]:
    nq = len(w.queries)
    n_clicks = len(w.clicks)
    n_sat = sum(d >= cfg.sat_threshold for d in w.dwell)
    n_img = sum(c.result_kind is ResultKind.IMAGE for c in w.clicks)
    n_ad = sum(c.result_kind is ResultKind.AD for c in w.clicks)
    n_bm = sum(c.kind is EventKind.BOOKMARK_CLICK or c.result_kind is ResultKind.BOOKMARK for c in w.clicks)

    runs, run = [], 0
    for c in w.clicks_per_query:
        if c == 0:
            run += 1
        elif run:
            runs.append(run)
            run = 0
    if run:
        runs.append(run)

    cpq = w.clicks_per_query
    last_qc = next((e for e in reversed(session.events) if e.kind is EventKind.QUERY or e.is_click), None)
    return {
        "total_clicks": float(n_clicks),
        "avg_clicks": _ratio(n_clicks, nq),
        "total_sat_clicks": float(n_sat),
        "avg_sat_clicks": _ratio(n_sat, nq),
        "pct_queries_without_clicks": _ratio(sum(c == 0 for c in cpq), nq),
        "max_adjacent_queries_without_clicks": float(max(runs, default=0)),
        "avg_adjacent_queries_without_clicks": _mean(runs),
        "total_image_clicks": float(n_img),
        "avg_image_clicks": _ratio(n_img, nq),
        "total_ad_clicks": float(n_ad),
        "avg_ad_clicks": _ratio(n_ad, nq),
        "total_bookmark_clicks": float(n_bm),
        "avg_bookmark_clicks": _ratio(n_bm, nq),
        "num_events": float(nq + n_clicks),
        "clicks_queries_1_2": float(sum(cpq[0:2])),
        "clicks_queries_3_4": float(sum(cpq[2:4])),
        "clicks_queries_5_6": float(sum(cpq[4:6])),
        "ends_with_click": 1.0 if last_qc is not None and last_qc.is_click else 0.0,
    }


def _read_features(session: Session, w: _Walk, cfg: FeatureConfig) -> dict[str, float]:
    events = session.events
    start = events[0].timestamp
    end = events[-1].timestamp + (cfg.last_dwell_default * 1000.0 if events[-1].is_click else 0.0)
    nq = len(w.queries)
    last_q = nq - 1

    dwell_excl = [d for d, q in zip(w.dwell, w.click_query) if q < last_q]

    first_sat = next((c.timestamp for c, d in zip(w.clicks, w.dwell) if d >= cfg.sat_threshold), None)
    to_first_sat = ((first_sat if first_sat is not None else end) - start) / 1000.0

    serp_times = []
    for i, q in enumerate(w.queries):
        nxt = w.queries[i + 1].timestamp if i + 1 < nq else end
        serp_times.append((nxt - q.timestamp) / 1000.0)

    return {
        "total_dwell_time": float(sum(w.dwell)),
        "avg_image_impressions_per_serp": _mean([float(q.serp_image_impressions or 0) for q in w.queries]),
        "total_zoom_ins": float(sum(e.kind is EventKind.ZOOM_IN for e in events)),
        "log_avg_dwell_per_click": math.log1p(_mean(w.dwell)),
        "log_avg_dwell_per_click_excl_last_query": math.log1p(_mean(dwell_excl)),
        "log_time_to_first_sat_click": math.log1p(to_first_sat),
        "log_avg_time_per_serp": math.log1p(_mean(serp_times)),
        "log_avg_time_per_serp_excl_last_query": math.log1p(_mean(serp_times[:-1])),
    }


def _scroll_features(session: Session, w: _Walk) -> dict[str, float]:
    screen = next((e.screen_size for e in reversed(session.events) if e.screen_size is not None), None)
    n_scroll = sum(e.kind in SCROLL_KINDS for e in session.events)
    return {
        "screen_size": screen[0] * screen[1] / 1e6 if screen else 0.0,
        "total_scrolls": float(n_scroll),
        "avg_scrolls": _ratio(n_scroll, len(w.queries)),
    }


def _reform_features(w: _Walk) -> dict[str, float]:
    texts = [q.query_text.strip().lower() for q in w.queries]
    toks = [tokenize_query(t) for t in texts]
    lengths = [len(t) for t in toks]
    pairs = list(zip(toks, toks[1:]))
    diffs = [_term_diff(p, c) for p, c in pairs]
    return {
        "avg_cosine_to_first_query": _mean([query_cosine(texts[0], t) for t in texts[1:]]),
        "avg_cosine_all_query_pairs": _mean([query_cosine(a, b) for a, b in combinations(texts, 2)]),
        "avg_edit_distance_adjacent": _mean([float(edit_distance(a, b)) for a, b in zip(texts, texts[1:])]),
        "num_query_generations": float(sum(r > 0 and a == 0 for a, r, _ in diffs)),
        "num_query_specifications": float(sum(a > 0 and r == 0 for a, r, _ in diffs)),
        "first_query_len_minus_avg": lengths[0] - _mean(lengths) if lengths else 0.0,
        "std_query_length": stdev(lengths) if len(lengths) > 1 else 0.0,
        "avg_terms_in_previous_query": _mean([float(s) for _, _, s in diffs]),
        "avg_terms_added": _mean([float(a) for a, _, _ in diffs]),
        "avg_terms_deleted": _mean([float(r) for _, r, _ in diffs]),
        "avg_terms_substituted": _mean([float(min(a, r)) for a, r, _ in diffs]),
    }


def _diversify_features(session: Session, w: _Walk, cfg: FeatureConfig) -> dict[str, float]:
    urls = [c.clicked_url for c in w.clicks]
    n = len(urls)
    labels = url_labels(session, cfg.taxonomy) if cfg.taxonomy is not None else []
    return {
        "pct_unique_urls": _ratio(len(set(urls)), n),
        "pct_unique_domains": _ratio(len({_domain(u) for u in urls}), n),
        "num_unique_clicks": float(len(set(urls))),
        "num_unique_topics": float(len(set(labels))),
        "topic_entropy": entropy(labels),
    }


def _rarity_features(w: _Walk, pop: PopularityTable) -> dict[str, float]:
    stats = [pop.query(normalize_query(q.query_text)) for q in w.queries]
    return {
        "log_avg_query_frequency": math.log1p(_mean([s.frequency for s in stats])),
        "log_avg_query_sat_clicks": math.log1p(_mean([s.avg_sat_clicks for s in stats])),
        "log_avg_query_clicks": math.log1p(_mean([s.avg_clicks for s in stats])),
        "avg_query_click_entropy": _mean([s.click_entropy for s in stats]),
        "log_avg_query_fastback_clicks": math.log1p(_mean([s.fastback_count for s in stats])),
        "log_avg_url_click_frequency": math.log1p(_mean([pop.url_frequency(c.clicked_url) for c in w.clicks])),
    }


def extract(session: Session, pop: PopularityTable | None = None, config: FeatureConfig | None = None) -> FeatureVector:
    cfg = config or FeatureConfig()
    pop = pop if pop is not None else PopularityTable()
    w = _walk(session, cfg)
    values: dict[str, float] = {}
    values.update(_query_features(w))
    values.update(_click_features(session, w, cfg))
    values.update(_read_features(session, w, cfg))
    values.update(_scroll_features(session, w))
    values.update(_reform_features(w))
    values.update(_diversify_features(session, w, cfg))
    values.update(_rarity_features(w, pop))
    return FeatureVector({name: float(values[name]) for name in FEATURE_NAMES}, topic=session.topic)


def _extract_rows(args):
    sessions, pop, cfg = args
    return [extract(s, pop, cfg).as_list() for s in sessions]


class SessionFeatureExtractor(TransformerMixin, BaseEstimator):
    """Turn a list of sessions into an ``(n_sessions, n_features)`` array.

    Stateless; ``fit`` only exists for pipeline compatibility.
    """

    def __init__(self, popularity=None, taxonomy=None, sat_threshold=30.0, last_dwell_default=30.0, n_jobs=1):
        self.popularity = popularity
        self.taxonomy = taxonomy
        self.sat_threshold = sat_threshold
        self.last_dwell_default = last_dwell_default
        self.n_jobs = n_jobs

    def fit(self, sessions, y=None):
        self.feature_names_in_ = None
        self.n_features_out_ = len(FEATURE_NAMES)
        return self

    def get_feature_names_out(self, input_features=None):
        return np.asarray(FEATURE_NAMES, dtype=object)

    def transform(self, sessions):
        sessions = list(sessions)
        cfg = FeatureConfig(self.sat_threshold, self.last_dwell_default, taxonomy=self.taxonomy)
        pop = self.popularity if self.popularity is not None else PopularityTable()
        if self.n_jobs == 1 or len(sessions) < 2:
            rows = _extract_rows((sessions, pop, cfg))
        else:
            n = max(1, self.n_jobs)
            chunks = [sessions[i::n] for i in range(n)]
            with ProcessPoolExecutor(max_workers=n) as ex:
                parts = list(ex.map(_extract_rows, [(c, pop, cfg) for c in chunks]))
            rows = [None] * len(sessions)
            for i, part in enumerate(parts):
                rows[i::n] = part
        return np.asarray(rows, dtype=float).reshape(len(sessions), len(FEATURE_NAMES))


@dataclass
class FeatureTable:
    """Feature matrix plus the per-session columns needed downstream."""

    session_ids: list[str]
    X: np.ndarray
    topics: list[str | None]
    states: list[State]
    labels: list[Label]

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float).reshape(len(self.session_ids), len(FEATURE_NAMES))
        n = len(self.session_ids)
        if not (len(self.topics) == len(self.states) == len(self.labels) == n):
            raise ValueError("feature table columns have different lengths")

    def __len__(self):
        return len(self.session_ids)

    @property
    def y(self) -> np.ndarray:
        return np.array([lab is Label.STRUGGLE for lab in self.labels], dtype=int)

    def subset(self, idx) -> "FeatureTable":
        idx = list(idx)
        return FeatureTable(
            [self.session_ids[i] for i in idx],
            self.X[idx],
            [self.topics[i] for i in idx],
            [self.states[i] for i in idx],
            [self.labels[i] for i in idx],
        )

    @classmethod
    def from_sessions(cls, sessions: Sequence[Session], X: np.ndarray) -> "FeatureTable":
        return cls(
            [s.session_id for s in sessions],
            X,
            [s.topic for s in sessions],
            [s.state for s in sessions],
            [s.label for s in sessions],
        )

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["session_id", *FEATURE_NAMES, "topic", "state", "label"])
            for i, sid in enumerate(self.session_ids):
                wr.writerow(
                    [sid, *(repr(float(v)) for v in self.X[i]), self.topics[i] or "", self.states[i].value, self.labels[i].value]
                )

    @classmethod
    def from_csv(cls, path) -> "FeatureTable":
        with open(path, newline="", encoding="utf-8") as fh:
            rd = csv.reader(fh)
            header = next(rd)
            expected = ["session_id", *FEATURE_NAMES, "topic", "state", "label"]
            if header != expected:
                raise ValueError(f"{path}: unexpected feature CSV header")
            ids, rows, topics, states, labels = [], [], [], [], []
            for rec in rd:
                if not rec:
                    continue
                ids.append(rec[0])
                rows.append([float(v) for v in rec[1 : 1 + len(FEATURE_NAMES)]])
                topics.append(rec[-3] or None)
                states.append(State(rec[-2]))
                labels.append(Label(rec[-1]))
        X = np.asarray(rows, dtype=float).reshape(len(ids), len(FEATURE_NAMES))
        return cls(ids, X, topics, states, labels)
