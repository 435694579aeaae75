"""Parse line-delimited JSON event logs and segment them into sessions.

Log schema, one JSON object per line:

========  ==========================================================
key       meaning
========  ==========================================================
user      user id (string)
ts        integer milliseconds since epoch
kind      query | click | scroll | resize | zoom | bookmark | page
q         query text (query events)
src       manual | suggested (query events)
url       clicked URL (click / bookmark events)
rkind     web | image | ad | bookmark (click / bookmark events)
imgs      image impressions on the SERP (query events, optional)
w, h      screen size in logical pixels (optional)
sid       pre-assigned session id (optional; bypasses segmentation)
plat      mobile | pc (optional)
========  ==========================================================
"""

from __future__ import annotations

import io
import json
import logging
import math
from collections import Counter, defaultdict
from typing import IO, Iterable

from .model import EventKind, Platform, RawEvent, Session

logger = logging.getLogger(__name__)


class LogFormatError(ValueError):
    """Raised when most lines of a log fail to parse."""


class ParsedLog(list):
    """List of events that also remembers how many lines were skipped."""

    skipped: int = 0


def parse_log(stream: IO[bytes] | IO[str] | Iterable) -> ParsedLog:
    events = ParsedLog()
    n_lines = 0
    for lineno, raw in enumerate(stream, 1):
        line = raw.decode("utf-8", errors="replace") if isinstance(raw, bytes) else raw
        line = line.strip()
        if not line:
            continue
        n_lines += 1
        try:
            rec = json.loads(line)
            if not isinstance(rec, dict):
                raise TypeError("record is not an object")
            events.append(RawEvent.from_record(rec))
        except (ValueError, KeyError, TypeError) as exc:
            events.skipped += 1
            logger.debug("skipping line %d: %s", lineno, exc)
    if n_lines and events.skipped * 2 > n_lines:
        raise LogFormatError(f"{events.skipped} of {n_lines} lines are malformed; is this an event log?")
    if events.skipped:
        logger.warning("skipped %d malformed lines", events.skipped)
    return events


def read_log(path) -> ParsedLog:
    with open(path, "rb") as fh:
        return parse_log(fh)


def write_log(events: Iterable[RawEvent], fh: IO[str]) -> None:
    for ev in events:
        fh.write(json.dumps(ev.to_record(), sort_keys=True) + "\n")


def tokenize_query(text: str) -> list[str]:
    return text.lower().split()


def tf_cosine(a: list[str], b: list[str]) -> float:
    """Cosine similarity of two token lists' term-frequency vectors (0 if either is empty)."""
    if not a or not b:
        return 0.0
    ca, cb = Counter(a), Counter(b)
    dot = sum(v * cb[t] for t, v in ca.items())
    na = math.sqrt(sum(v * v for v in ca.values()))
    nb = math.sqrt(sum(v * v for v in cb.values()))
    return dot / (na * nb)


def _make_session(sid: str, evs: list[RawEvent]) -> Session:
    platform = next((e.platform for e in evs if e.platform is not None), Platform.PC)
    return Session(session_id=sid, user_id=evs[0].user_id, events=tuple(evs), platform=platform)


def segment_sessions(
    events: Iterable[RawEvent],
    gap_minutes: float = 30.0,
    sim_threshold: float = 0.5,
) -> list[Session]:
    """Group events into sessions.

    A query opens a new session when the inactivity gap since the user's previous
    event exceeds ``gap_minutes`` and its token-tf cosine to the session's latest
    query is below ``sim_threshold``. Non-query events always join the current
    session. Events carrying a ``sid`` are grouped by it instead.
    """
    if gap_minutes <= 0:
        raise ValueError("gap_minutes must be positive")
    if not 0.0 <= sim_threshold <= 1.0:
        raise ValueError("sim_threshold must lie in [0, 1]")
    gap_ms = gap_minutes * 60_000

    by_user: dict[str, list[tuple[int, RawEvent]]] = defaultdict(list)
    for order, ev in enumerate(events):
        by_user[ev.user_id].append((order, ev))

    sessions: list[Session] = []
    for user in sorted(by_user):
        seq = [ev for _, ev in sorted(by_user[user], key=lambda p: (p[1].timestamp, p[0]))]

        presegmented: dict[str, list[RawEvent]] = {}
        rest: list[RawEvent] = []
        for ev in seq:
            if ev.session_id is not None:
                presegmented.setdefault(ev.session_id, []).append(ev)
            else:
                rest.append(ev)
        for sid, evs in presegmented.items():
            sessions.append(_make_session(sid, evs))

        current: list[RawEvent] = []
        last_query: list[str] | None = None
        for ev in rest:
            if current and ev.kind is EventKind.QUERY:
                gap = ev.timestamp - current[-1].timestamp
                tokens = tokenize_query(ev.query_text)
                similar = last_query is not None and tf_cosine(tokens, last_query) >= sim_threshold
                if gap > gap_ms and not similar:
                    sessions.append(_make_session(f"{user}-{current[0].timestamp}", current))
                    current = []
                    last_query = None
            current.append(ev)
            if ev.kind is EventKind.QUERY:
                last_query = tokenize_query(ev.query_text)
        if current:
            sessions.append(_make_session(f"{user}-{current[0].timestamp}", current))

    sessions.sort(key=lambda s: (s.user_id, s.events[0].timestamp, s.session_id))
    return sessions


def read_sessions(path) -> list[Session]:
    with open(path, encoding="utf-8") as fh:
        return [Session.from_json(line) for line in fh if line.strip()]


def write_sessions(sessions: Iterable[Session], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in sessions:
            fh.write(s.to_json() + "\n")


def parse_text(text: str) -> ParsedLog:
    return parse_log(io.StringIO(text))
