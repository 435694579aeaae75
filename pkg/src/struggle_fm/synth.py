"""Synthetic labeled search sessions from a two-state (telic/paratelic) arousal model.

Each session draws a motivational state, an effort level from that state's
normal distribution, and a happiness level from the state's inverted-U curve
(a parabola peaking at the state's mean effort). A session struggles when
happiness is low on the high-effort side of its own state's peak, so the same
effort can mean struggle for a telic searcher and comfort for a paratelic one.

Event counts (queries, clicks, scrolls, dwell) grow with effort; query
reformulations grow with unhappiness; result and domain diversity follow an
exploration trait (shifted upward for paratelic sessions) and the share of rare
query terms follows a separate, state-independent trait.
"""

from __future__ import annotations

import json
import math
from collections import Counter, defaultdict
from dataclasses import asdict, dataclass, field
from typing import Iterable

import numpy as np

from .features import FASTBACK_SECONDS, entropy, normalize_query
from .model import (
    EventKind,
    Label,
    Platform,
    PopularityTable,
    QuerySource,
    QueryStats,
    RawEvent,
    ResultKind,
    Session,
    State,
)
from .taxonomy import Taxonomy

_SITE_SUFFIXES = ("hub", "daily", "world", "guide", "zone", "central")
_URL_IDS = 12
_SCREENS = {Platform.MOBILE: [(390, 844), (412, 915), (360, 800)], Platform.PC: [(1920, 1080), (1440, 900), (2560, 1440)]}


class SimConfigError(ValueError):
    pass


@dataclass
class StateProfile:
    effort_mean: float
    effort_std: float
    curvature: float
    noise_std: float


@dataclass
class EmissionGains:
    """How strongly each behavior channel responds to effort (per query unless noted)."""

    queries: float = 0.55  # extra queries per session per unit of effort
    clicks: float = 0.22
    clicks_base: float = 0.8  # effort-independent clicks per query
    dwell: float = 7.0  # extra seconds of mean dwell per unit of effort
    scrolls: float = 0.35
    impressions: float = 0.6
    zoom: float = 0.12
    reform: float = 0.3  # reformulation probability per unit of unhappiness
    reform_base: float = 0.15


@dataclass
class SimConfig:
    # Defaults: both states share emission gains, so the states differ only in
    # where their effort sits. curvature * effort_std**2 is ~1 in both states,
    # so struggle starts ~0.63 standard deviations above each state's own peak.
    n_sessions: int = 2000
    paratelic_prior: float = 0.5
    telic: StateProfile = field(default_factory=lambda: StateProfile(3.0, 1.0, 1.0, 0.3))
    paratelic: StateProfile = field(default_factory=lambda: StateProfile(13.0, 1.2, 0.694, 0.3))
    happiness_low: float = -0.4
    telic_gains: EmissionGains = field(default_factory=EmissionGains)
    paratelic_gains: EmissionGains = field(default_factory=EmissionGains)
    topic_fidelity: float = 0.99
    explore_state_shift: float = 0.2
    telic_topics: tuple[str, ...] = ("Education", "Finance", "Health", "Housing", "Job", "Legal")
    paratelic_topics: tuple[str, ...] = ("Art", "Beauty", "Entertainment", "Games", "Music", "Sports")
    mobile_share: float = 0.5
    n_users: int = 400
    background_issuances: int = 50_000
    zipf_exponent: float = 1.1
    seed: int = 0

    def validate(self) -> None:
        if self.n_sessions < 0:
            raise SimConfigError("n_sessions must be non-negative")
        for name in ("paratelic_prior", "topic_fidelity", "mobile_share"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise SimConfigError(f"{name} must lie in [0, 1]")
        for prof in (self.telic, self.paratelic):
            if prof.effort_std <= 0 or prof.noise_std <= 0:
                raise SimConfigError("standard deviations must be positive")
            if prof.curvature <= 0:
                raise SimConfigError("curvature must be positive")
        if self.telic.effort_mean >= self.paratelic.effort_mean:
            raise SimConfigError("the telic curve must peak at lower effort than the paratelic one")
        if not self.telic_topics or not self.paratelic_topics:
            raise SimConfigError("each state needs at least one topic")
        if self.n_users < 1:
            raise SimConfigError("n_users must be positive")

    def profile(self, state: State) -> StateProfile:
        return self.telic if state is State.TELIC else self.paratelic

    def gains(self, state: State) -> EmissionGains:
        return self.telic_gains if state is State.TELIC else self.paratelic_gains

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def happiness(effort: float, profile: StateProfile, noise: float = 0.0) -> float:
    return -profile.curvature * (effort - profile.effort_mean) ** 2 + noise


def is_struggle(effort: float, happy: float, profile: StateProfile, happiness_low: float) -> bool:
    """Low happiness past the state's peak; the low-effort tail (boredom) is not struggle."""
    return happy < happiness_low and effort > profile.effort_mean


@dataclass
class SessionTruth:
    """Latent variables behind one generated session."""

    state: State
    effort: float
    happiness: float
    explore: float
    rarity: float
    label: Label


class _Vocab:
    def __init__(self, taxonomy: Taxonomy, topics: Iterable[str]):
        self.keywords = {}
        for t in topics:
            cat = taxonomy.categories.get(t)
            if cat is None:
                raise SimConfigError(f"topic {t!r} is not in the taxonomy")
            self.keywords[t] = [k for k in cat.keywords if " " not in k]
        self.topics = sorted(self.keywords)

    def head_queries(self, topic: str) -> list[str]:
        kws = self.keywords[topic][:6]
        return [f"{a} {b}" for a in kws for b in kws if a != b]

    def site_urls(self, topic: str, tokens: list[str]) -> list[str]:
        """Every URL that can serve a query about ``topic`` with ``tokens``."""
        return [self._url(topic, tokens, k, i) for k in range(len(_SITE_SUFFIXES)) for i in range(_URL_IDS)]

    def _url(self, topic: str, tokens: list[str], site: int, url_id: int) -> str:
        kws = [t for t in tokens if t in self.keywords[topic]] or [self.keywords[topic][0]]
        return f"https://www.{topic.lower()}-{_SITE_SUFFIXES[site]}.com/{'-'.join(kws[:2])}-{url_id}"

    def url(self, topic: str, tokens: list[str], rng: np.random.Generator, domain_spread: float) -> str:
        k = int(rng.integers(len(_SITE_SUFFIXES))) if rng.random() < domain_spread else 0
        return self._url(topic, tokens, k, int(rng.integers(_URL_IDS)))


def _session_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, index])


def _draw_truth(cfg: SimConfig, rng: np.random.Generator) -> SessionTruth:
    state = State.PARATELIC if rng.random() < cfg.paratelic_prior else State.TELIC
    prof = cfg.profile(state)
    effort = max(0.0, rng.normal(prof.effort_mean, prof.effort_std))
    happy = happiness(effort, prof, rng.normal(0.0, prof.noise_std))
    label = Label.STRUGGLE if is_struggle(effort, happy, prof, cfg.happiness_low) else Label.NON_STRUGGLE
    rarity = float(rng.beta(2.0, 2.0))
    explore = float(rng.beta(2.0, 2.0))
    if state is State.PARATELIC:
        explore = min(1.0, explore + cfg.explore_state_shift)
    return SessionTruth(state, effort, happy, explore, rarity, label)


def _reformulate(prev: list[str], topic_kws: list[str], rng: np.random.Generator) -> list[str]:
    op = rng.integers(3)
    fresh = [k for k in topic_kws if k not in prev] or topic_kws
    new_term = fresh[int(rng.integers(len(fresh)))]
    if op == 0 or len(prev) < 2:
        return prev + [new_term]
    if op == 1:
        drop = int(rng.integers(len(prev)))
        return prev[:drop] + prev[drop + 1 :]
    swap = int(rng.integers(len(prev)))
    return prev[:swap] + [new_term] + prev[swap + 1 :]


def _emit(cfg: SimConfig, truth: SessionTruth, topic: str, vocab: _Vocab, rng: np.random.Generator,
          user: str, sid: str, t0: int) -> list[RawEvent]:
    g = cfg.gains(truth.state)
    effort = truth.effort
    unhappy = max(0.0, -truth.happiness)
    platform = Platform.MOBILE if rng.random() < cfg.mobile_share else Platform.PC
    screens = _SCREENS[platform]
    screen = screens[int(rng.integers(len(screens)))]
    kws = vocab.keywords[topic]
    all_topics = vocab.topics

    query_drive = g.queries * effort
    n_queries = 1 + int(rng.poisson(query_drive))
    p_reform = min(0.95, g.reform_base + g.reform * unhappy)
    p_suggested = min(0.6, max(0.05, 0.45 - 0.09 * query_drive))
    p_rare = 0.7 * truth.rarity
    p_offtopic = 0.25 * truth.explore
    p_revisit = 0.35 * (1.0 - truth.explore)

    events: list[RawEvent] = []
    t = t0
    tokens: list[str] = []
    clicked: list[str] = []

    def add(kind, **kw):
        events.append(RawEvent(user_id=user, timestamp=t, kind=kind, session_id=sid, platform=platform, **kw))

    for qi in range(n_queries):
        u = rng.random()
        if qi > 0 and u < p_reform:
            tokens = _reformulate(tokens, kws, rng)
        elif qi == 0 or u < p_reform + 0.5 * (1.0 - p_reform):
            a, b = rng.choice(min(6, len(kws)), size=2, replace=False)
            tokens = [kws[a], kws[b]]
            if rng.random() < p_rare:
                tokens.append(f"x{int(rng.integers(10_000))}")
        # otherwise the previous query is repeated verbatim
        source = QuerySource.SUGGESTED if rng.random() < p_suggested else QuerySource.MANUAL
        t += int(1000 * (2.0 + rng.exponential(4.0)))
        add(
            EventKind.QUERY,
            query_text=" ".join(tokens),
            query_source=source,
            serp_image_impressions=int(rng.poisson(1.0 + g.impressions * effort)),
            screen_size=screen if qi == 0 else None,
        )
        for _ in range(int(rng.poisson(g.zoom * effort))):
            t += int(1000 * (1.0 + rng.exponential(2.0)))
            add(EventKind.ZOOM_IN)
        for _ in range(int(rng.poisson(g.scrolls * effort))):
            t += int(1000 * (1.0 + rng.exponential(3.0)))
            add(EventKind.PAGINATION if rng.random() < 0.2 else EventKind.SCROLL_DOWN)
        for _ in range(int(rng.poisson(g.clicks_base + g.clicks * effort))):
            t += int(1000 * (1.0 + rng.exponential(3.0)))
            if clicked and rng.random() < p_revisit:
                url = clicked[int(rng.integers(len(clicked)))]
            else:
                click_topic = topic
                if rng.random() < p_offtopic:
                    click_topic = all_topics[int(rng.integers(len(all_topics)))]
                url_tokens = tokens if click_topic == topic else vocab.keywords[click_topic][:2]
                url = vocab.url(click_topic, url_tokens, rng, truth.explore)
            clicked.append(url)
            u = rng.random()
            if u < 0.04:
                add(EventKind.BOOKMARK_CLICK, clicked_url=url, result_kind=ResultKind.BOOKMARK)
            else:
                rkind = ResultKind.IMAGE if u < 0.2 else ResultKind.AD if u < 0.26 else ResultKind.WEB
                add(EventKind.CLICK, clicked_url=url, result_kind=rkind)
            t += int(1000 * rng.exponential(8.0 + g.dwell * effort))
    return events


def draw_truths(cfg: SimConfig) -> list[SessionTruth]:
    """The latent state, effort, happiness and label of every session ``generate_sessions`` would emit."""
    cfg.validate()
    return [_draw_truth(cfg, _session_rng(cfg.seed, i)) for i in range(cfg.n_sessions)]


def generate_sessions(cfg: SimConfig, taxonomy: Taxonomy | None = None) -> list[Session]:
    """Labeled sessions carrying their ground-truth state and drawn topic."""
    cfg.validate()
    taxonomy = taxonomy or Taxonomy.default()
    vocab = _Vocab(taxonomy, (*cfg.telic_topics, *cfg.paratelic_topics))
    user_clock: dict[str, int] = defaultdict(lambda: 1_600_000_000_000)
    sessions = []
    for i in range(cfg.n_sessions):
        rng = _session_rng(cfg.seed, i)
        truth = _draw_truth(cfg, rng)
        own, other = (
            (cfg.telic_topics, cfg.paratelic_topics)
            if truth.state is State.TELIC
            else (cfg.paratelic_topics, cfg.telic_topics)
        )
        pool = own if rng.random() < cfg.topic_fidelity else other
        topic = pool[int(rng.integers(len(pool)))]
        user = f"u{i % cfg.n_users:04d}"
        sid = f"s{cfg.seed}-{i:06d}"
        t0 = user_clock[user]
        events = _emit(cfg, truth, topic, vocab, rng, user, sid, t0)
        # next session of this user starts well after any inactivity gap
        user_clock[user] = events[-1].timestamp + 3 * 3_600_000
        sessions.append(
            Session(sid, user, tuple(events), events[0].platform, truth.label, topic, truth.state)
        )
    return sessions


class _PopularityCounter:
    def __init__(self, sat_threshold: float, last_dwell_default: float):
        self.sat = sat_threshold
        self.last_dwell = last_dwell_default
        self.issued = Counter()
        self.clicks = Counter()
        self.sat_clicks = Counter()
        self.fastbacks = Counter()
        self.query_urls: dict[str, Counter] = defaultdict(Counter)
        self.url_clicks = Counter()

    def add(self, query: str, clicks: Iterable[tuple[str, float]]) -> None:
        q = normalize_query(query)
        self.issued[q] += 1
        for url, dwell in clicks:
            self.clicks[q] += 1
            self.sat_clicks[q] += dwell >= self.sat
            self.fastbacks[q] += dwell < FASTBACK_SECONDS
            self.query_urls[q][url] += 1
            self.url_clicks[url] += 1

    def add_counts(self, query: str, issued: int, url_clicks: dict[str, int], sat: int, fastback: int) -> None:
        q = normalize_query(query)
        self.issued[q] += issued
        total = sum(url_clicks.values())
        self.clicks[q] += total
        self.sat_clicks[q] += sat
        self.fastbacks[q] += fastback
        self.query_urls[q].update(url_clicks)
        self.url_clicks.update(url_clicks)

    def add_session(self, session: Session) -> None:
        events = session.events
        current, clicks = None, []
        for i, ev in enumerate(events):
            if ev.kind is EventKind.QUERY:
                if current is not None:
                    self.add(current, clicks)
                current, clicks = ev.query_text, []
            elif ev.is_click and current is not None:
                nxt = events[i + 1].timestamp if i + 1 < len(events) else None
                dwell = (nxt - ev.timestamp) / 1000.0 if nxt is not None else self.last_dwell
                clicks.append((ev.clicked_url, dwell))
        if current is not None:
            self.add(current, clicks)

    def table(self) -> PopularityTable:
        queries = {}
        for q, n in self.issued.items():
            queries[q] = QueryStats(
                frequency=float(n),
                avg_sat_clicks=self.sat_clicks[q] / n,
                avg_clicks=self.clicks[q] / n,
                click_entropy=entropy(self.query_urls[q].elements()),
                fastback_count=self.fastbacks[q] / n,
            )
        return PopularityTable(queries, {u: float(c) for u, c in self.url_clicks.items()})


def popularity_from_sessions(sessions: Iterable[Session], sat_threshold: float = 30.0,
                             last_dwell_default: float = 30.0) -> PopularityTable:
    counter = _PopularityCounter(sat_threshold, last_dwell_default)
    for s in sessions:
        counter.add_session(s)
    return counter.table()


def generate_popularity(cfg: SimConfig, sessions: Iterable[Session], taxonomy: Taxonomy | None = None,
                        sat_threshold: float = 30.0) -> PopularityTable:
    """Population statistics from a Zipf-ranked background of head queries plus ``sessions``."""
    taxonomy = taxonomy or Taxonomy.default()
    vocab = _Vocab(taxonomy, (*cfg.telic_topics, *cfg.paratelic_topics))
    counter = _PopularityCounter(sat_threshold, 30.0)
    rng = np.random.default_rng([cfg.seed, 2**31 - 1])

    head = [(topic, q) for topic in vocab.topics for q in vocab.head_queries(topic)]
    order = rng.permutation(len(head))
    ranked = [head[i] for i in order]
    weights = np.array([1.0 / (r + 1) ** cfg.zipf_exponent for r in range(len(ranked))])
    counts = rng.multinomial(cfg.background_issuances, weights / weights.sum()) if ranked else []
    # background searchers click once per query on average, dwell ~ Exp(35 s),
    # and spread their clicks uniformly over the sites serving the query
    p_fast = 1.0 - math.exp(-FASTBACK_SECONDS / 35.0)
    p_sat = math.exp(-max(sat_threshold, FASTBACK_SECONDS) / 35.0)
    for (topic, query), n in zip(ranked, counts):
        if n == 0:
            continue
        n_clicks = int(rng.poisson(n))
        fast, _, sat = rng.multinomial(n_clicks, [p_fast, 1.0 - p_fast - p_sat, p_sat])
        pool = vocab.site_urls(topic, query.split())
        split = rng.multinomial(n_clicks, np.full(len(pool), 1.0 / len(pool)))
        counter.add_counts(query, int(n), {u: int(c) for u, c in zip(pool, split) if c}, int(sat), int(fast))
    for s in sessions:
        counter.add_session(s)
    return counter.table()


def write_truth(sessions: Iterable[Session], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in sessions:
            fh.write(f"{s.session_id}\t{s.state.value}\t{s.label.value}\n")


def read_truth(path) -> dict[str, tuple[State, Label]]:
    truth = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            sid, state, label = line.rstrip("\n").split("\t")
            truth[sid] = (State(state), Label(label))
    return truth
