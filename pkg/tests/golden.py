"""Hand-built sessions with every feature value worked out by hand.

Times are in seconds. Each expectation starts from all-zero and overrides the
features that are non-zero for that session; the arithmetic is written out so
it can be checked against the event list above it. The taxonomy and popularity
table are the fixtures in ``builders``.
"""

from __future__ import annotations

from math import log, log1p, sqrt

from builders import c, ev, q, session
from struggle_fm.model import FEATURE_NAMES, EventKind

INTEGER_FEATURES = frozenset(
    {
        "num_queries",
        "num_unique_queries",
        "total_clicks",
        "total_sat_clicks",
        "max_adjacent_queries_without_clicks",
        "total_image_clicks",
        "total_ad_clicks",
        "total_bookmark_clicks",
        "num_events",
        "clicks_queries_1_2",
        "clicks_queries_3_4",
        "clicks_queries_5_6",
        "ends_with_click",
        "total_zoom_ins",
        "total_scrolls",
        "num_query_generations",
        "num_query_specifications",
        "num_unique_clicks",
        "num_unique_topics",
    }
)


def expect(**values) -> dict[str, float]:
    unknown = set(values) - set(FEATURE_NAMES)
    assert not unknown, unknown
    out = dict.fromkeys(FEATURE_NAMES, 0.0)
    out.update(values)
    return out


GOLDEN = []

# 1. A single manual query and nothing else.
GOLDEN.append((
    "lone-query",
    session([q(0, "weather")]),
    expect(
        num_queries=1, num_unique_queries=1, avg_terms_per_query=1, avg_chars_per_query=7,
        pct_manual_queries=1, longest_query_position=1,
        pct_queries_without_clicks=1, max_adjacent_queries_without_clicks=1,
        avg_adjacent_queries_without_clicks=1, num_events=1,
    ),
))

# 2. "a b c" -> "a b c d", one click each; second click is an image, dwell 15 s.
GOLDEN.append((
    "specification",
    session([
        q(0, "a b c", imgs=4),
        c(10, "http://bank.com/loan"),             # dwell 70 - 10 = 60 (SAT)
        q(70, "a b c d", src="suggested", imgs=2),
        c(80, "http://cine.com/movie", "image"),   # dwell 95 - 80 = 15
        ev(95, EventKind.SCROLL_DOWN),
    ]),
    expect(
        num_queries=2, num_unique_queries=2, avg_terms_per_query=3.5, avg_chars_per_query=(5 + 7) / 2,
        pct_manual_queries=0.5, pct_suggested_queries=0.5, longest_query_position=2 / 2,
        total_clicks=2, avg_clicks=1, total_sat_clicks=1, avg_sat_clicks=0.5,
        total_image_clicks=1, avg_image_clicks=0.5, num_events=4, clicks_queries_1_2=2, ends_with_click=1,
        total_dwell_time=75, avg_image_impressions_per_serp=3,
        log_avg_dwell_per_click=log1p(37.5), log_avg_dwell_per_click_excl_last_query=log1p(60),
        log_time_to_first_sat_click=log1p(10),
        log_avg_time_per_serp=log1p((70 + 25) / 2), log_avg_time_per_serp_excl_last_query=log1p(70),
        total_scrolls=1, avg_scrolls=0.5,
        avg_cosine_to_first_query=3 / (sqrt(3) * 2), avg_cosine_all_query_pairs=3 / (sqrt(3) * 2),
        avg_edit_distance_adjacent=2, num_query_specifications=1, first_query_len_minus_avg=-0.5,
        std_query_length=sqrt(0.5), avg_terms_in_previous_query=3, avg_terms_added=1,
        pct_unique_urls=1, pct_unique_domains=1, num_unique_clicks=2, num_unique_topics=2, topic_entropy=log(2),
        log_avg_query_frequency=log1p(9 / 2), log_avg_query_sat_clicks=log1p(0.5 / 2),
        log_avg_query_clicks=log1p(1.5 / 2), avg_query_click_entropy=0.4 / 2,
        log_avg_query_fastback_clicks=log1p(2 / 2), log_avg_url_click_frequency=log1p((7 + 0) / 2),
    ),
))

# 3. A click with no preceding query; it is the last event, so dwell defaults to 30 s.
GOLDEN.append((
    "click-only",
    session([c(0, "http://bank.com/tax", "ad")]),
    expect(
        total_clicks=1, total_sat_clicks=1, total_ad_clicks=1, num_events=1, ends_with_click=1,
        total_dwell_time=30, log_avg_dwell_per_click=log1p(30),
        pct_unique_urls=1, pct_unique_domains=1, num_unique_clicks=1, num_unique_topics=1,
    ),
))

# 4. Bookmark click, zoom, resize, pagination; the repeated query differs only in case.
GOLDEN.append((
    "bookmark-zoom-resize",
    session([
        q(0, "Best Horror Movies", imgs=6, screen=(1920, 1080)),
        ev(5, EventKind.ZOOM_IN),
        c(20, "bookmark://movies/list", "bookmark", kind=EventKind.BOOKMARK_CLICK),  # dwell 5
        ev(25, EventKind.RESIZE, screen=(1440, 900)),
        c(40, "https://cine.com/movie/1"),           # dwell 60 (SAT)
        q(100, "best horror movies", imgs=0),
        ev(130, EventKind.PAGINATION),
        ev(140, EventKind.SCROLL_DOWN),
    ]),
    expect(
        num_queries=2, num_unique_queries=1, avg_terms_per_query=3, avg_chars_per_query=18,
        pct_manual_queries=1, longest_query_position=1 / 2,
        total_clicks=2, avg_clicks=1, total_sat_clicks=1, avg_sat_clicks=0.5, pct_queries_without_clicks=0.5,
        max_adjacent_queries_without_clicks=1, avg_adjacent_queries_without_clicks=1,
        total_bookmark_clicks=1, avg_bookmark_clicks=0.5, num_events=4, clicks_queries_1_2=2,
        total_dwell_time=65, avg_image_impressions_per_serp=3, total_zoom_ins=1,
        log_avg_dwell_per_click=log1p(32.5), log_avg_dwell_per_click_excl_last_query=log1p(32.5),
        log_time_to_first_sat_click=log1p(40),
        log_avg_time_per_serp=log1p((100 + 40) / 2), log_avg_time_per_serp_excl_last_query=log1p(100),
        screen_size=1440 * 900 / 1e6, total_scrolls=3, avg_scrolls=1.5,
        avg_cosine_to_first_query=1, avg_cosine_all_query_pairs=1, avg_terms_in_previous_query=3,
        pct_unique_urls=1, pct_unique_domains=1, num_unique_clicks=2, num_unique_topics=1,
        log_avg_query_frequency=log1p(100), log_avg_query_sat_clicks=log1p(0.8), log_avg_query_clicks=log1p(1.2),
        avg_query_click_entropy=1.0, log_avg_query_fastback_clicks=log1p(0.1),
        log_avg_url_click_frequency=log1p((0 + 3) / 2),
    ),
))

# 5. Seven queries, runs of click-less queries, generations/specifications/substitution.
#    Token sets: A={x,y} B={x,y,z} C={y,z} D={w,z} E={w} F={z,w,x} G={z}.
_pairs5 = 9 / sqrt(6) + 2 * (1 / 2) + 2 / 3 + 3 / sqrt(3) + 3 / sqrt(2)
GOLDEN.append((
    "seven-queries",
    session([
        q(0, "x y"),
        q(10, "x y z"),
        c(15, "http://air.com/a"),   # dwell 5
        q(20, "y z"),
        q(30, "w z"),
        q(40, "w"),
        c(45, "http://air.com/b"),   # dwell 2
        c(47, "http://inn.com/c"),   # dwell 3
        q(50, "z w x", src="suggested"),
        q(60, "z"),
    ]),
    expect(
        num_queries=7, num_unique_queries=7, avg_terms_per_query=14 / 7, avg_chars_per_query=21 / 7,
        pct_manual_queries=6 / 7, pct_suggested_queries=1 / 7, longest_query_position=2 / 7,
        total_clicks=3, avg_clicks=3 / 7, pct_queries_without_clicks=5 / 7,
        max_adjacent_queries_without_clicks=2, avg_adjacent_queries_without_clicks=(1 + 2 + 2) / 3,
        num_events=10, clicks_queries_1_2=1, clicks_queries_3_4=0, clicks_queries_5_6=2,
        total_dwell_time=10, log_avg_dwell_per_click=log1p(10 / 3),
        log_avg_dwell_per_click_excl_last_query=log1p(10 / 3), log_time_to_first_sat_click=log1p(60),
        log_avg_time_per_serp=log1p(60 / 7), log_avg_time_per_serp_excl_last_query=log1p(10),
        avg_cosine_to_first_query=(2 / sqrt(6) + 1 / 2 + 1 / sqrt(6)) / 6,
        avg_cosine_all_query_pairs=_pairs5 / 21,
        avg_edit_distance_adjacent=(2 + 2 + 1 + 2 + 4 + 4) / 6,
        num_query_generations=3, num_query_specifications=2, first_query_len_minus_avg=0,
        std_query_length=sqrt(4 / 6), avg_terms_in_previous_query=8 / 6, avg_terms_added=4 / 6,
        avg_terms_deleted=5 / 6, avg_terms_substituted=1 / 6,
        pct_unique_urls=1, pct_unique_domains=2 / 3, num_unique_clicks=3,
    ),
))

# 6. One query, eight clicks over four topics (two each); one repeated URL.
GOLDEN.append((
    "four-topics",
    session([
        q(0, "things", imgs=10),
        c(10, "http://a.com/loan"),
        c(20, "http://b.com/tax"),
        c(30, "http://a.com/doctor"),
        c(40, "http://a.com/doctor"),
        c(50, "http://c.org/movie"),
        c(60, "http://c.org/film"),
        c(70, "http://d.net/painting"),   # dwell 30 (SAT, inclusive)
        c(100, "http://d.net/museum"),    # last event: dwell 30 (SAT)
    ]),
    expect(
        num_queries=1, num_unique_queries=1, avg_terms_per_query=1, avg_chars_per_query=6,
        pct_manual_queries=1, longest_query_position=1,
        total_clicks=8, avg_clicks=8, total_sat_clicks=2, avg_sat_clicks=2, num_events=9,
        clicks_queries_1_2=8, ends_with_click=1,
        total_dwell_time=6 * 10 + 30 + 30, avg_image_impressions_per_serp=10,
        log_avg_dwell_per_click=log1p(120 / 8), log_time_to_first_sat_click=log1p(70),
        log_avg_time_per_serp=log1p(130),
        pct_unique_urls=7 / 8, pct_unique_domains=4 / 8, num_unique_clicks=7, num_unique_topics=4,
        topic_entropy=log(4),
        log_avg_url_click_frequency=log1p((4 + 4) / 8),
    ),
))

# 7. Fast-back click (12 s), a click at exactly the SAT threshold, ad and image results.
GOLDEN.append((
    "sat-boundary",
    session([
        q(0, "tax loan", src="suggested", screen=(390, 844)),
        c(2, "http://bank.com/loan", "ad"),      # dwell 12
        ev(14, EventKind.SCROLL_DOWN),
        c(20, "http://bank.com/loan"),           # dwell 30
        q(50, "tax loan rates"),
        c(60, "http://bank.com/rates", "image"),  # dwell 45
        ev(105, EventKind.ZOOM_IN),
    ]),
    expect(
        num_queries=2, num_unique_queries=2, avg_terms_per_query=2.5, avg_chars_per_query=(8 + 14) / 2,
        pct_manual_queries=0.5, pct_suggested_queries=0.5, longest_query_position=1,
        total_clicks=3, avg_clicks=1.5, total_sat_clicks=2, avg_sat_clicks=1,
        total_image_clicks=1, avg_image_clicks=0.5, total_ad_clicks=1, avg_ad_clicks=0.5,
        num_events=5, clicks_queries_1_2=3, ends_with_click=1,
        total_dwell_time=12 + 30 + 45, total_zoom_ins=1,
        log_avg_dwell_per_click=log1p(87 / 3), log_avg_dwell_per_click_excl_last_query=log1p(21),
        log_time_to_first_sat_click=log1p(20),
        log_avg_time_per_serp=log1p((50 + 55) / 2), log_avg_time_per_serp_excl_last_query=log1p(50),
        screen_size=390 * 844 / 1e6, total_scrolls=1, avg_scrolls=0.5,
        avg_cosine_to_first_query=2 / sqrt(6), avg_cosine_all_query_pairs=2 / sqrt(6),
        avg_edit_distance_adjacent=6, num_query_specifications=1, first_query_len_minus_avg=-0.5,
        std_query_length=sqrt(0.5), avg_terms_in_previous_query=2, avg_terms_added=1,
        pct_unique_urls=2 / 3, pct_unique_domains=1 / 3, num_unique_clicks=2, num_unique_topics=1,
        log_avg_query_frequency=log1p(3 / 2), log_avg_query_sat_clicks=log1p(1 / 2),
        log_avg_query_clicks=log1p(2 / 2), avg_query_click_entropy=0.5 / 2,
        log_avg_query_fastback_clicks=log1p(0.5 / 2), log_avg_url_click_frequency=log1p(14 / 3),
    ),
))

# 8. Padded, mixed-case query with a repeated term, then a shorter generalisation.
GOLDEN.append((
    "repeated-terms",
    session([
        q(0, "  New  York New "),
        q(5, "new york", src="suggested"),
        c(8, "https://www.nyc.gov/visit"),   # last event: dwell 30
    ]),
    expect(
        num_queries=2, num_unique_queries=2, avg_terms_per_query=2.5, avg_chars_per_query=(13 + 8) / 2,
        pct_manual_queries=0.5, pct_suggested_queries=0.5, longest_query_position=1 / 2,
        total_clicks=1, avg_clicks=0.5, total_sat_clicks=1, avg_sat_clicks=0.5, pct_queries_without_clicks=0.5,
        max_adjacent_queries_without_clicks=1, avg_adjacent_queries_without_clicks=1,
        num_events=3, clicks_queries_1_2=1, ends_with_click=1,
        total_dwell_time=30, log_avg_dwell_per_click=log1p(30), log_time_to_first_sat_click=log1p(8),
        log_avg_time_per_serp=log1p((5 + 33) / 2), log_avg_time_per_serp_excl_last_query=log1p(5),
        avg_cosine_to_first_query=3 / sqrt(10), avg_cosine_all_query_pairs=3 / sqrt(10),
        avg_edit_distance_adjacent=5, num_query_generations=1, first_query_len_minus_avg=0.5,
        std_query_length=sqrt(0.5), avg_terms_in_previous_query=2, avg_terms_deleted=1,
        pct_unique_urls=1, pct_unique_domains=1, num_unique_clicks=1,
        log_avg_query_frequency=log1p(1000 / 2), log_avg_query_sat_clicks=log1p(0.3 / 2),
        log_avg_query_clicks=log1p(0.9 / 2), avg_query_click_entropy=2.0 / 2,
        log_avg_query_fastback_clicks=log1p(0.4 / 2),
    ),
))

# 9. A web click whose result kind is a bookmark; a run of two click-less queries;
#    the session ends on a scroll after its last click.
_pairs9 = 1 / sqrt(3) + 2 / sqrt(2) + 4 / sqrt(6) + 1
GOLDEN.append((
    "bookmark-result-and-run",
    session([
        q(0, "jobs", imgs=1),
        c(3, "http://jobs.com/job", "bookmark"),   # dwell 1
        q(4, "jobs near me", imgs=3),
        q(9, "jobs near", imgs=2),
        q(20, "jobs near", imgs=0),
        c(25, "http://work.io/resume"),            # dwell 60
        ev(85, EventKind.SCROLL_DOWN),
    ]),
    expect(
        num_queries=4, num_unique_queries=3, avg_terms_per_query=2, avg_chars_per_query=(4 + 12 + 9 + 9) / 4,
        pct_manual_queries=1, longest_query_position=2 / 4,
        total_clicks=2, avg_clicks=0.5, total_sat_clicks=1, avg_sat_clicks=0.25, pct_queries_without_clicks=0.5,
        max_adjacent_queries_without_clicks=2, avg_adjacent_queries_without_clicks=2,
        total_bookmark_clicks=1, avg_bookmark_clicks=0.25, num_events=6,
        clicks_queries_1_2=1, clicks_queries_3_4=1, ends_with_click=1,
        total_dwell_time=61, avg_image_impressions_per_serp=6 / 4,
        log_avg_dwell_per_click=log1p(30.5), log_avg_dwell_per_click_excl_last_query=log1p(1),
        log_time_to_first_sat_click=log1p(25),
        log_avg_time_per_serp=log1p((4 + 5 + 11 + 65) / 4), log_avg_time_per_serp_excl_last_query=log1p(20 / 3),
        total_scrolls=1, avg_scrolls=0.25,
        avg_cosine_to_first_query=(1 / sqrt(3) + 2 / sqrt(2)) / 3, avg_cosine_all_query_pairs=_pairs9 / 6,
        avg_edit_distance_adjacent=(8 + 3 + 0) / 3, num_query_generations=1, num_query_specifications=1,
        first_query_len_minus_avg=-1, std_query_length=sqrt(2 / 3), avg_terms_in_previous_query=5 / 3,
        avg_terms_added=2 / 3, avg_terms_deleted=1 / 3,
        pct_unique_urls=1, pct_unique_domains=1, num_unique_clicks=2,
        log_avg_query_frequency=log1p(50 / 4), log_avg_query_sat_clicks=log1p(0.6 / 4),
        log_avg_query_clicks=log1p(1.1 / 4), avg_query_click_entropy=1.5 / 4,
        log_avg_query_fastback_clicks=log1p(0.3 / 4), log_avg_url_click_frequency=log1p(9 / 2),
    ),
))

# 10. A click at the same instant as the next query (dwell 0); image results.
GOLDEN.append((
    "zero-dwell",
    session([
        q(0, "art museum"),
        c(10, "http://gallery.org/painting", "image"),  # dwell 0
        q(10, "art museum paris", src="suggested", imgs=5),
        c(12, "http://gallery.org/museum", "image"),    # last event: dwell 30
    ]),
    expect(
        num_queries=2, num_unique_queries=2, avg_terms_per_query=2.5, avg_chars_per_query=(10 + 16) / 2,
        pct_manual_queries=0.5, pct_suggested_queries=0.5, longest_query_position=1,
        total_clicks=2, avg_clicks=1, total_sat_clicks=1, avg_sat_clicks=0.5,
        total_image_clicks=2, avg_image_clicks=1, num_events=4, clicks_queries_1_2=2, ends_with_click=1,
        total_dwell_time=30, avg_image_impressions_per_serp=2.5,
        log_avg_dwell_per_click=log1p(15), log_avg_dwell_per_click_excl_last_query=log1p(0),
        log_time_to_first_sat_click=log1p(12),
        log_avg_time_per_serp=log1p((10 + 32) / 2), log_avg_time_per_serp_excl_last_query=log1p(10),
        avg_cosine_to_first_query=2 / sqrt(6), avg_cosine_all_query_pairs=2 / sqrt(6),
        avg_edit_distance_adjacent=6, num_query_specifications=1, first_query_len_minus_avg=-0.5,
        std_query_length=sqrt(0.5), avg_terms_in_previous_query=2, avg_terms_added=1,
        pct_unique_urls=1, pct_unique_domains=1 / 2, num_unique_clicks=2, num_unique_topics=1,
    ),
))

# 11. Multiset substitution: "a a b" -> "a c c" adds two and removes two terms.
GOLDEN.append((
    "multiset-substitution",
    session([q(0, "a a b"), q(1, "a c c")]),
    expect(
        num_queries=2, num_unique_queries=2, avg_terms_per_query=3, avg_chars_per_query=5,
        pct_manual_queries=1, longest_query_position=1 / 2,
        pct_queries_without_clicks=1, max_adjacent_queries_without_clicks=2,
        avg_adjacent_queries_without_clicks=2, num_events=2,
        log_time_to_first_sat_click=log1p(1),
        log_avg_time_per_serp=log1p(0.5), log_avg_time_per_serp_excl_last_query=log1p(1),
        avg_cosine_to_first_query=2 / 5, avg_cosine_all_query_pairs=2 / 5, avg_edit_distance_adjacent=2,
        avg_terms_in_previous_query=1, avg_terms_added=2, avg_terms_deleted=2, avg_terms_substituted=2,
    ),
))


def mismatches(values, expected) -> list[str]:
    """Human-readable list of features whose computed value misses the hand value."""
    bad = []
    for name in FEATURE_NAMES:
        got, want = values[name], expected[name]
        if name in INTEGER_FEATURES:
            ok = got == want and float(got).is_integer()
        else:
            ok = abs(got - want) <= 1e-9
        if not ok:
            bad.append(f"{name}: got {got!r}, expected {want!r}")
    return bad
