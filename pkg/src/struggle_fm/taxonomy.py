"""Topic taxonomy: URL-to-category scoring and telic/paratelic state assignment.

Taxonomy files hold one category per line::

    state<TAB>category<TAB>keyword,keyword,...

where ``state`` is ``telic`` or ``paratelic``. Blank lines and ``#`` comments
are ignored.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass
from importlib import resources
from typing import Iterable

from .model import Session, State

_TOKEN_RE = re.compile(r"[^0-9a-z]+")


class TaxonomyError(ValueError):
    pass


def tokenize_url(text: str) -> list[str]:
    """Lowercase and split on non-alphanumerics."""
    return [t for t in _TOKEN_RE.split(text.lower()) if t]


@dataclass(frozen=True)
class TaxonomyCategory:
    name: str
    keywords: tuple[str, ...]
    state: State

    def __post_init__(self):
        if not self.keywords:
            raise TaxonomyError(f"category {self.name!r} has no keywords")
        if self.state not in (State.TELIC, State.PARATELIC):
            raise TaxonomyError(f"category {self.name!r} must be telic or paratelic")
        object.__setattr__(self, "keywords", tuple(self.keywords))

    def tokens(self) -> list[str]:
        toks = tokenize_url(self.name)
        for kw in self.keywords:
            toks.extend(tokenize_url(kw))
        return toks


class Taxonomy:
    """A set of categories with a tf-idf index over their name+keyword documents."""

    def __init__(self, categories: Iterable[TaxonomyCategory]):
        self.categories: dict[str, TaxonomyCategory] = {}
        for cat in categories:
            if cat.name in self.categories:
                raise TaxonomyError(f"duplicate category {cat.name!r}")
            self.categories[cat.name] = cat
        if not self.categories:
            raise TaxonomyError("taxonomy is empty")

        docs = {name: Counter(cat.tokens()) for name, cat in self.categories.items()}
        df = Counter()
        for tf in docs.values():
            df.update(tf.keys())
        n_docs = len(docs)
        self._n_docs = n_docs
        self._df = df
        self._vectors = {name: self._weigh(tf) for name, tf in docs.items()}
        self._norms = {name: _norm(v) for name, v in self._vectors.items()}
        self._postings: dict[str, set[str]] = {}
        for name, tf in docs.items():
            for t in tf:
                self._postings.setdefault(t, set()).add(name)
        self._label_cache: dict[str, str | None] = {}

    def idf(self, term: str) -> float:
        # smoothed so unseen terms still get finite weight
        return math.log((1 + self._n_docs) / (1 + self._df.get(term, 0))) + 1.0

    def _weigh(self, tf: Counter) -> dict[str, float]:
        return {t: c * self.idf(t) for t, c in tf.items()}

    @property
    def names(self) -> list[str]:
        return sorted(self.categories)

    def score(self, url_text: str, name: str) -> float:
        return self.score_tokens(tokenize_url(url_text), name)

    def score_tokens(self, tokens: list[str], name: str) -> float:
        if not tokens:
            return 0.0
        vec = self._weigh(Counter(tokens))
        return self._cosine(vec, _norm(vec), name)

    def _cosine(self, vec: dict[str, float], norm: float, name: str) -> float:
        cat_vec = self._vectors[name]
        dot = sum(w * cat_vec.get(t, 0.0) for t, w in vec.items())
        if dot == 0.0:
            return 0.0
        return min(1.0, dot / (norm * self._norms[name]))

    def label_url(self, url_text: str) -> str | None:
        """Best-scoring category for a URL; ties go to the smallest name, all-zero gives None."""
        if url_text in self._label_cache:
            return self._label_cache[url_text]
        tokens = tokenize_url(url_text)
        best, best_score = None, 0.0
        if tokens:
            vec = self._weigh(Counter(tokens))
            norm = _norm(vec)
            candidates = set().union(*(self._postings.get(t, ()) for t in vec))
            for name in sorted(candidates):
                s = self._cosine(vec, norm, name)
                if s > best_score:
                    best, best_score = name, s
        self._label_cache[url_text] = best
        return best

    def state_of(self, topic: str | None) -> State:
        cat = self.categories.get(topic) if topic is not None else None
        return cat.state if cat is not None else State.UNASSIGNED

    @classmethod
    def from_lines(cls, lines: Iterable[str]) -> "Taxonomy":
        cats = []
        for lineno, line in enumerate(lines, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise TaxonomyError(f"line {lineno}: expected state<TAB>category<TAB>keywords")
            state_txt, name, kws = parts
            try:
                state = State(state_txt.strip().lower())
            except ValueError:
                raise TaxonomyError(f"line {lineno}: unknown state {state_txt!r}") from None
            keywords = tuple(k.strip() for k in kws.split(",") if k.strip())
            cats.append(TaxonomyCategory(name.strip(), keywords, state))
        return cls(cats)

    @classmethod
    def load(cls, path) -> "Taxonomy":
        with open(path, encoding="utf-8") as fh:
            return cls.from_lines(fh)

    @classmethod
    def default(cls) -> "Taxonomy":
        text = resources.files("struggle_fm").joinpath("data/default_taxonomy.tsv").read_text("utf-8")
        return cls.from_lines(text.splitlines())


def _norm(vec: dict[str, float]) -> float:
    return math.sqrt(sum(w * w for w in vec.values()))


def score_url(url_text: str, category: TaxonomyCategory, taxonomy: Taxonomy) -> float:
    """tf-idf cosine between a URL's tokens and ``category`` (idf over ``taxonomy``)."""
    return taxonomy.score(url_text, category.name)


def url_labels(session: Session, taxonomy: Taxonomy) -> list[str]:
    """Category label of every clicked URL that scores above zero, in click order."""
    labels = []
    for ev in session.clicks:
        label = taxonomy.label_url(ev.clicked_url)
        if label is not None:
            labels.append(label)
    return labels


def assign_topic(session: Session, taxonomy: Taxonomy) -> str | None:
    if taxonomy is None or not taxonomy.categories:
        raise TaxonomyError("taxonomy is empty")
    counts = Counter(url_labels(session, taxonomy))
    if not counts:
        return None
    return min(counts, key=lambda name: (-counts[name], name))


def assign_state(topic: str | None, taxonomy: Taxonomy) -> State:
    return taxonomy.state_of(topic)


def annotate(sessions: Iterable[Session], taxonomy: Taxonomy) -> list[Session]:
    """Return copies of ``sessions`` with topic and state filled in."""
    out = []
    for s in sessions:
        topic = assign_topic(s, taxonomy)
        out.append(s.replace(topic=topic, state=assign_state(topic, taxonomy)))
    return out
