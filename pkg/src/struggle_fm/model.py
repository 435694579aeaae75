"""Shared domain types: log events, sessions, feature vectors, popularity data."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping


class EventKind(str, Enum):
    QUERY = "query"
    CLICK = "click"
    SCROLL_DOWN = "scroll"
    RESIZE = "resize"
    ZOOM_IN = "zoom"
    BOOKMARK_CLICK = "bookmark"
    PAGINATION = "page"


class QuerySource(str, Enum):
    MANUAL = "manual"
    SUGGESTED = "suggested"


class ResultKind(str, Enum):
    WEB = "web"
    IMAGE = "image"
    AD = "ad"
    BOOKMARK = "bookmark"


class Platform(str, Enum):
    MOBILE = "mobile"
    PC = "pc"


class Label(str, Enum):
    STRUGGLE = "struggle"
    NON_STRUGGLE = "nonstruggle"
    UNLABELED = "unlabeled"


class State(str, Enum):
    TELIC = "telic"
    PARATELIC = "paratelic"
    UNASSIGNED = "unassigned"


CLICK_KINDS = frozenset({EventKind.CLICK, EventKind.BOOKMARK_CLICK})
SCROLL_KINDS = frozenset({EventKind.SCROLL_DOWN, EventKind.RESIZE, EventKind.PAGINATION})


@dataclass(frozen=True)
class RawEvent:
    """One parsed log record."""

    user_id: str
    timestamp: int
    kind: EventKind
    query_text: str | None = None
    query_source: QuerySource | None = None
    clicked_url: str | None = None
    result_kind: ResultKind | None = None
    serp_image_impressions: int | None = None
    screen_size: tuple[int, int] | None = None
    session_id: str | None = None
    platform: Platform | None = None

    def __post_init__(self):
        if self.timestamp < 0:
            raise ValueError(f"negative timestamp {self.timestamp}")
        if self.kind is EventKind.QUERY:
            if self.query_text is None or self.query_source is None:
                raise ValueError("query events need query_text and query_source")
        elif self.kind in CLICK_KINDS:
            if self.clicked_url is None or self.result_kind is None:
                raise ValueError("click events need clicked_url and result_kind")
        if self.serp_image_impressions is not None and self.serp_image_impressions < 0:
            raise ValueError("serp_image_impressions must be non-negative")

    @property
    def is_click(self) -> bool:
        return self.kind in CLICK_KINDS

    def to_record(self) -> dict:
        """Serialize to the line-delimited log schema."""
        rec: dict = {"user": self.user_id, "ts": self.timestamp, "kind": self.kind.value}
        if self.query_text is not None:
            rec["q"] = self.query_text
        if self.query_source is not None:
            rec["src"] = self.query_source.value
        if self.clicked_url is not None:
            rec["url"] = self.clicked_url
        if self.result_kind is not None:
            rec["rkind"] = self.result_kind.value
        if self.serp_image_impressions is not None:
            rec["imgs"] = self.serp_image_impressions
        if self.screen_size is not None:
            rec["w"], rec["h"] = self.screen_size
        if self.session_id is not None:
            rec["sid"] = self.session_id
        if self.platform is not None:
            rec["plat"] = self.platform.value
        return rec

    @classmethod
    def from_record(cls, rec: Mapping) -> "RawEvent":
        """Inverse of :meth:`to_record`. Raises KeyError/ValueError/TypeError on bad input."""
        ts = rec["ts"]
        if not isinstance(ts, int) or isinstance(ts, bool):
            raise TypeError(f"ts must be an integer, got {ts!r}")
        screen = None
        if "w" in rec or "h" in rec:
            screen = (int(rec["w"]), int(rec["h"]))
        imgs = rec.get("imgs")
        return cls(
            user_id=str(rec["user"]),
            timestamp=ts,
            kind=EventKind(rec["kind"]),
            query_text=rec.get("q"),
            query_source=QuerySource(rec["src"]) if "src" in rec else None,
            clicked_url=rec.get("url"),
            result_kind=ResultKind(rec["rkind"]) if "rkind" in rec else None,
            serp_image_impressions=int(imgs) if imgs is not None else None,
            screen_size=screen,
            session_id=str(rec["sid"]) if "sid" in rec else None,
            platform=Platform(rec["plat"]) if "plat" in rec else None,
        )


@dataclass(frozen=True)
class Session:
    session_id: str
    user_id: str
    events: tuple[RawEvent, ...]
    platform: Platform = Platform.PC
    label: Label = Label.UNLABELED
    topic: str | None = None
    state: State = State.UNASSIGNED

    def __post_init__(self):
        if not self.events:
            raise ValueError(f"session {self.session_id} has no events")
        object.__setattr__(self, "events", tuple(self.events))
        prev = -1
        for ev in self.events:
            if ev.timestamp < prev:
                raise ValueError(f"session {self.session_id} events are not time-sorted")
            if ev.user_id != self.user_id:
                raise ValueError(f"session {self.session_id} mixes users")
            prev = ev.timestamp

    @property
    def queries(self) -> list[RawEvent]:
        return [e for e in self.events if e.kind is EventKind.QUERY]

    @property
    def clicks(self) -> list[RawEvent]:
        return [e for e in self.events if e.is_click]

    def replace(self, **changes) -> "Session":
        kw = {f: getattr(self, f) for f in self.__dataclass_fields__}
        kw.update(changes)
        return Session(**kw)

    def to_json(self) -> str:
        return json.dumps(
            {
                "sid": self.session_id,
                "user": self.user_id,
                "platform": self.platform.value,
                "label": self.label.value,
                "topic": self.topic,
                "state": self.state.value,
                "events": [e.to_record() for e in self.events],
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "Session":
        d = json.loads(text)
        return cls(
            session_id=d["sid"],
            user_id=d["user"],
            events=tuple(RawEvent.from_record(r) for r in d["events"]),
            platform=Platform(d["platform"]),
            label=Label(d["label"]),
            topic=d["topic"],
            state=State(d["state"]),
        )


class FeatureGroup(str, Enum):
    QUERY = "QueryEffort"
    CLICK = "ClickEffort"
    READ = "ReadEffort"
    SCROLL = "ScrollEffort"
    REFORM = "ReformEffort"
    DIVERSIFY = "DiversifyEffort"
    RARITY = "RarityEffort"


_G = FeatureGroup

# Ordered feature dictionary; the order is the column order everywhere.
FEATURE_GROUPS: dict[str, FeatureGroup] = {
    # queries
    "num_queries": _G.QUERY,
    "num_unique_queries": _G.QUERY,
    "avg_terms_per_query": _G.QUERY,
    "avg_chars_per_query": _G.QUERY,
    "pct_manual_queries": _G.QUERY,
    "pct_suggested_queries": _G.QUERY,
    "longest_query_position": _G.QUERY,
    # clicks
    "total_clicks": _G.CLICK,
    "avg_clicks": _G.CLICK,
    "total_sat_clicks": _G.CLICK,
    "avg_sat_clicks": _G.CLICK,
    "pct_queries_without_clicks": _G.CLICK,
    "max_adjacent_queries_without_clicks": _G.CLICK,
    "avg_adjacent_queries_without_clicks": _G.CLICK,
    "total_image_clicks": _G.CLICK,
    "avg_image_clicks": _G.CLICK,
    "total_ad_clicks": _G.CLICK,
    "avg_ad_clicks": _G.CLICK,
    "total_bookmark_clicks": _G.CLICK,
    "avg_bookmark_clicks": _G.CLICK,
    "num_events": _G.CLICK,
    "clicks_queries_1_2": _G.CLICK,
    "clicks_queries_3_4": _G.CLICK,
    "clicks_queries_5_6": _G.CLICK,
    "ends_with_click": _G.CLICK,
    # reading
    "total_dwell_time": _G.READ,
    "avg_image_impressions_per_serp": _G.READ,
    "total_zoom_ins": _G.READ,
    "log_avg_dwell_per_click": _G.READ,
    "log_avg_dwell_per_click_excl_last_query": _G.READ,
    "log_time_to_first_sat_click": _G.READ,
    "log_avg_time_per_serp": _G.READ,
    "log_avg_time_per_serp_excl_last_query": _G.READ,
    # scrolling
    "screen_size": _G.SCROLL,
    "total_scrolls": _G.SCROLL,
    "avg_scrolls": _G.SCROLL,
    # reformulation
    "avg_cosine_to_first_query": _G.REFORM,
    "avg_cosine_all_query_pairs": _G.REFORM,
    "avg_edit_distance_adjacent": _G.REFORM,
    "num_query_generations": _G.REFORM,
    "num_query_specifications": _G.REFORM,
    "first_query_len_minus_avg": _G.REFORM,
    "std_query_length": _G.REFORM,
    "avg_terms_in_previous_query": _G.REFORM,
    "avg_terms_added": _G.REFORM,
    "avg_terms_deleted": _G.REFORM,
    "avg_terms_substituted": _G.REFORM,
    # diversification
    "pct_unique_urls": _G.DIVERSIFY,
    "pct_unique_domains": _G.DIVERSIFY,
    "num_unique_clicks": _G.DIVERSIFY,
    "num_unique_topics": _G.DIVERSIFY,
    "topic_entropy": _G.DIVERSIFY,
    # rarity
    "log_avg_query_frequency": _G.RARITY,
    "log_avg_query_sat_clicks": _G.RARITY,
    "log_avg_query_clicks": _G.RARITY,
    "avg_query_click_entropy": _G.RARITY,
    "log_avg_query_fastback_clicks": _G.RARITY,
    "log_avg_url_click_frequency": _G.RARITY,
}

FEATURE_NAMES: tuple[str, ...] = tuple(FEATURE_GROUPS)


def features_in(group: FeatureGroup) -> list[str]:
    return [name for name, g in FEATURE_GROUPS.items() if g is group]


@dataclass(frozen=True)
class FeatureVector:
    values: Mapping[str, float]
    topic: str | None = None

    def __post_init__(self):
        if set(self.values) != set(FEATURE_NAMES):
            missing = set(FEATURE_NAMES) - set(self.values)
            extra = set(self.values) - set(FEATURE_NAMES)
            raise ValueError(f"feature names mismatch: missing={sorted(missing)} extra={sorted(extra)}")
        for name, v in self.values.items():
            if not math.isfinite(v):
                raise ValueError(f"feature {name} is not finite: {v}")

    @property
    def group_of(self) -> dict[str, FeatureGroup]:
        return FEATURE_GROUPS

    def __getitem__(self, name: str) -> float:
        return self.values[name]

    def as_list(self) -> list[float]:
        return [self.values[n] for n in FEATURE_NAMES]


@dataclass(frozen=True)
class QueryStats:
    frequency: float = 0.0
    avg_sat_clicks: float = 0.0
    avg_clicks: float = 0.0
    click_entropy: float = 0.0
    fastback_count: float = 0.0

    def __post_init__(self):
        for f in self.__dataclass_fields__:
            if getattr(self, f) < 0:
                raise ValueError(f"{f} must be non-negative")


@dataclass
class PopularityTable:
    queries: dict[str, QueryStats] = field(default_factory=dict)
    urls: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        for url, freq in self.urls.items():
            if freq < 0:
                raise ValueError(f"negative click frequency for {url}")

    def query(self, text: str) -> QueryStats:
        return self.queries.get(text, _UNSEEN)

    def url_frequency(self, url: str) -> float:
        return self.urls.get(url, 0.0)

    def save(self, path) -> None:
        """Write the table as TSV: ``query`` and ``url`` record lines."""
        with open(path, "w", encoding="utf-8") as fh:
            for q in sorted(self.queries):
                s = self.queries[q]
                fh.write(
                    "\t".join(
                        ["query", q]
                        + [repr(float(x)) for x in (s.frequency, s.avg_sat_clicks, s.avg_clicks, s.click_entropy, s.fastback_count)]
                    )
                    + "\n"
                )
            for u in sorted(self.urls):
                fh.write(f"url\t{u}\t{float(self.urls[u])!r}\n")

    @classmethod
    def load(cls, path) -> "PopularityTable":
        table = cls()
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.rstrip("\n")
                if not line or line.startswith("#"):
                    continue
                parts = line.split("\t")
                if parts[0] == "query" and len(parts) == 7:
                    table.queries[parts[1]] = QueryStats(*map(float, parts[2:]))
                elif parts[0] == "url" and len(parts) == 3:
                    table.urls[parts[1]] = float(parts[2])
                else:
                    raise ValueError(f"{path}:{lineno}: malformed popularity record")
        return table


_UNSEEN = QueryStats()
