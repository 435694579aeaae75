"""``struggle-fm``: command-line entry point wiring the pipeline stages together.

Every option can also come from a ``key=value`` file given with ``--config``;
flags on the command line override values from the file. Exit status is 0 on
success, 1 on a usage error and 2 on a data error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .features import FeatureTable, SessionFeatureExtractor
from .ingest import read_log, read_sessions, segment_sessions, write_log, write_sessions
from .learn import Comparison, FMMode, PipelineConfig, StrugglePipeline, compare_fm_runs, kfold_eval
from .model import FeatureGroup, PopularityTable, State
from .modulation import FeatureModulator, ModulationParams
from .stats import MinMaxNormalizer, group_averages, rules_relevance_test, select_means_ends_groups
from .synth import SimConfig, generate_popularity, generate_sessions, read_truth, write_truth
from .taxonomy import Taxonomy, annotate

EVENTS_FILE = "events.jsonl"
TRUTH_FILE = "truth.tsv"
POPULARITY_FILE = "popularity.tsv"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """Argument parser whose usage errors exit with status 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


# name -> (argparse kwargs, default); defaults live here so a config file can sit between them and the flags
_OPTIONS: dict[str, tuple[dict, object]] = {
    "in": ({"metavar": "PATH", "help": "input file or directory"}, None),
    "out": ({"metavar": "PATH", "help": "output file or directory"}, None),
    "seed": ({"type": int, "help": "random seed (default 0)"}, 0),
    "n": ({"type": int, "help": "number of sessions to simulate (default 2000)"}, 2000),
    "paratelic_prior": ({"type": float, "help": "share of paratelic sessions (default 0.5)"}, 0.5),
    "k": ({"type": int, "help": "cross-validation folds (default 10)"}, 10),
    "alpha": ({"type": float, "help": "significance level (default 0.05)"}, 0.05),
    "gap_minutes": ({"type": float, "help": "inactivity gap that can end a session (default 30)"}, 30.0),
    "sat_threshold": ({"type": float, "help": "dwell seconds for a satisfied click (default 30)"}, 30.0),
    "taxonomy": ({"metavar": "PATH", "help": "taxonomy TSV (default: bundled taxonomy)"}, None),
    "popularity": ({"metavar": "PATH", "help": "popularity table TSV"}, None),
    "truth": ({"metavar": "PATH", "help": "truth TSV with session labels"}, None),
    "params": ({"metavar": "PATH", "help": "where to write modulation parameters"}, None),
    "fm": ({"choices": [m.value for m in FMMode], "help": "feature modulation mode"}, None),
    "fit_scope": ({"choices": ["fold", "global"], "help": "fit preprocessing per fold or once (default fold)"}, "fold"),
    "bins": ({"type": int, "help": "histogram bins (default 20)"}, 20),
    "jobs": ({"type": int, "help": "worker processes for per-session stages (default 1)"}, 1),
}

_COMMANDS: dict[str, tuple[str, list[str], list[str]]] = {
    # name: (help, required options, optional options)
    "simulate": ("generate labeled synthetic logs", ["out"], ["seed", "n", "paratelic_prior", "sat_threshold", "taxonomy"]),
    "ingest": ("parse a log and segment it into sessions", ["in", "out"], ["gap_minutes", "truth"]),
    "extract": ("annotate sessions and compute effort features", ["in", "out"],
                ["popularity", "taxonomy", "sat_threshold", "jobs"]),
    "rules-test": ("test whether the rules dimension matters", ["in"], ["out"]),
    "select": ("select means-ends feature groups", ["in"], ["out", "alpha"]),
    "modulate": ("modulate paratelic features onto the telic distribution", ["in", "out"], ["fm", "alpha", "params"]),
    "train": ("train a classifier on a feature table", ["in", "out"], ["fm", "alpha", "seed"]),
    "eval": ("cross-validated baseline / +FMNS / +FM comparison", ["in"],
             ["out", "k", "seed", "alpha", "fm", "fit_scope", "gap_minutes", "sat_threshold", "taxonomy", "jobs"]),
    "report": ("binned histograms of group averages before and after modulation", ["in", "out"], ["fm", "alpha", "bins"]),
}


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="struggle-fm", description="Struggle detection with motivational-state feature modulation.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    for name, (help_text, required, optional) in _COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", metavar="PATH", default=argparse.SUPPRESS, help="key=value option file")
        for opt in (*required, *optional):
            kwargs, _ = _OPTIONS[opt]
            p.add_argument(_flag(opt), dest=opt, default=argparse.SUPPRESS, **kwargs)
    return parser


def read_config(path) -> dict[str, str]:
    """``key=value`` lines; blank lines and ``#`` comments are ignored, dashes equal underscores."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            key, value = (part.strip() for part in line.split("=", 1))
            values[key.replace("-", "_")] = value
    return values


def resolve_options(command: str, parsed: dict) -> dict:
    """Merge defaults, the optional config file and explicit flags, in increasing priority."""
    _, required, optional = _COMMANDS[command]
    allowed = (*required, *optional)
    opts = {name: _OPTIONS[name][1] for name in allowed}
    if "config" in parsed:
        for key, raw in read_config(parsed["config"]).items():
            if key not in allowed:
                raise UsageError(f"option {key!r} is not valid for {command}")
            kwargs = _OPTIONS[key][0]
            try:
                value = kwargs.get("type", str)(raw)
            except ValueError:
                raise UsageError(f"bad value for {key}: {raw!r}") from None
            if "choices" in kwargs and value not in kwargs["choices"]:
                raise UsageError(f"{key} must be one of {', '.join(kwargs['choices'])}")
            opts[key] = value
    opts.update({k: v for k, v in parsed.items() if k in allowed})
    missing = [_flag(r) for r in required if opts.get(r) is None]
    if missing:
        raise UsageError(f"missing required option(s): {', '.join(missing)}")
    return opts


# ---------------------------------------------------------------------------
# helpers


def _write_records(records, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def _emit_lines(lines: Sequence[str], out=None) -> None:
    print("\n".join(lines), file=out or sys.stdout)


def _taxonomy(opts) -> Taxonomy:
    return Taxonomy.load(opts["taxonomy"]) if opts.get("taxonomy") else Taxonomy.default()


def _mode(opts, default: FMMode) -> FMMode:
    return FMMode(opts["fm"]) if opts.get("fm") else default


def _label_sessions(sessions, truth_path):
    truth = read_truth(truth_path)
    missing = [s.session_id for s in sessions if s.session_id not in truth]
    if missing:
        raise ValueError(f"{len(missing)} session(s) have no truth label, e.g. {missing[0]!r}")
    return [s.replace(label=truth[s.session_id][1]) for s in sessions]


def _extract_table(sessions, pop, taxonomy, sat_threshold, jobs) -> FeatureTable:
    annotated = annotate(sessions, taxonomy)
    extractor = SessionFeatureExtractor(pop, taxonomy, sat_threshold=sat_threshold, n_jobs=jobs)
    return FeatureTable.from_sessions(annotated, extractor.transform(annotated))


def _fit_modulator(table: FeatureTable, mode: FMMode, alpha: float):
    """Normalizer plus (possibly empty) modulator fitted on the whole table."""
    scaler = MinMaxNormalizer().fit(table.X)
    Xn = scaler.transform(table.X)
    if mode is FMMode.FM:
        groups = select_means_ends_groups(Xn, table.states, alpha).groups
    elif mode is FMMode.FMNS:
        groups = frozenset(FeatureGroup)
    else:
        groups = frozenset()
    modulator = FeatureModulator(sorted(g.value for g in groups)).fit(Xn, table.states) if groups else None
    return scaler, Xn, modulator


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(opts) -> int:
    out = Path(opts["out"])
    out.mkdir(parents=True, exist_ok=True)
    cfg = SimConfig(n_sessions=opts["n"], seed=opts["seed"], paratelic_prior=opts["paratelic_prior"])
    taxonomy = _taxonomy(opts)
    sessions = generate_sessions(cfg, taxonomy)
    with open(out / EVENTS_FILE, "w", encoding="utf-8") as fh:
        write_log((ev for s in sessions for ev in s.events), fh)
    write_truth(sessions, out / TRUTH_FILE)
    generate_popularity(cfg, sessions, taxonomy, opts["sat_threshold"]).save(out / POPULARITY_FILE)
    print(f"wrote {len(sessions)} sessions to {out}")
    return 0


def cmd_ingest(opts) -> int:
    log = read_log(opts["in"])
    sessions = segment_sessions(log, gap_minutes=opts["gap_minutes"])
    if opts.get("truth"):
        sessions = _label_sessions(sessions, opts["truth"])
    write_sessions(sessions, opts["out"])
    print(f"{len(log)} events ({log.skipped} malformed lines skipped) -> {len(sessions)} sessions")
    return 0


def cmd_extract(opts) -> int:
    sessions = read_sessions(opts["in"])
    pop = PopularityTable.load(opts["popularity"]) if opts.get("popularity") else None
    table = _extract_table(sessions, pop, _taxonomy(opts), opts["sat_threshold"], opts["jobs"])
    table.to_csv(opts["out"])
    print(f"wrote features for {len(table)} sessions to {opts['out']}")
    return 0


def cmd_rules_test(opts) -> int:
    table = FeatureTable.from_csv(opts["in"])
    report = rules_relevance_test(MinMaxNormalizer().fit_transform(table.X), table.session_ids)
    _emit_lines(report.lines())
    if opts.get("out"):
        _write_records(report.records(), opts["out"])
    return 0


def cmd_select(opts) -> int:
    table = FeatureTable.from_csv(opts["in"])
    sel = select_means_ends_groups(MinMaxNormalizer().fit_transform(table.X), table.states, opts["alpha"])
    _emit_lines(sel.lines())
    if opts.get("out"):
        recs = []
        if sel.manova is not None:
            recs.append({"test": "manova", **sel.manova.as_record()})
        recs += [
            {"test": "anova", "group": g.value, "selected": g in sel.groups, **r.as_record()}
            for g, r in sel.anovas.items()
        ]
        _write_records(recs, opts["out"])
    return 0


def cmd_modulate(opts) -> int:
    table = FeatureTable.from_csv(opts["in"])
    mode = _mode(opts, FMMode.FM)
    scaler, Xn, modulator = _fit_modulator(table, mode, opts["alpha"])
    Xm = modulator.transform(Xn, table.states) if modulator is not None else Xn
    FeatureTable(table.session_ids, Xm, table.topics, table.states, table.labels).to_csv(opts["out"])
    groups = sorted(modulator.params_.selected_groups) if modulator is not None else []
    if opts.get("params"):
        (modulator.params_ if modulator is not None else ModulationParams(frozenset())).save(opts["params"])
    print(f"modulated groups: {', '.join(g.value for g in groups) or 'none'}")
    return 0


def cmd_train(opts) -> int:
    table = FeatureTable.from_csv(opts["in"])
    cfg = PipelineConfig(mode=_mode(opts, FMMode.FM), alpha=opts["alpha"], seed=opts["seed"])
    pipe = StrugglePipeline(cfg).fit(table)
    pipe.clf_.save(opts["out"], pipe.feature_names())
    if pipe.modulator_ is not None:
        pipe.modulator_.params_.save(f"{opts['out']}.modulation")
    acc = float(np.mean(pipe.predict(table) == table.y))
    print(f"trained on {len(table)} sessions; training accuracy {acc:.4f}")
    return 0


def _load_eval_table(opts) -> FeatureTable:
    src = Path(opts["in"])
    if src.is_dir():
        log = read_log(src / EVENTS_FILE)
        sessions = _label_sessions(segment_sessions(log, gap_minutes=opts["gap_minutes"]), src / TRUTH_FILE)
        pop_path = src / POPULARITY_FILE
        pop = PopularityTable.load(pop_path) if pop_path.exists() else None
        return _extract_table(sessions, pop, _taxonomy(opts), opts["sat_threshold"], opts["jobs"])
    return FeatureTable.from_csv(src)


def cmd_eval(opts) -> int:
    table = _load_eval_table(opts)
    cfg = PipelineConfig(alpha=opts["alpha"], fit_scope=opts["fit_scope"], seed=opts["seed"])
    if opts.get("fm"):
        # a single run against the baseline
        mode = FMMode(opts["fm"])
        cache: dict = {}
        base = kfold_eval(table, opts["k"], cfg, name="LM", cache=cache)
        runs = [] if mode is FMMode.OFF else [
            kfold_eval(table, opts["k"], replace(cfg, mode=mode), name=f"LM+{mode.value.upper()}", cache=cache)
        ]
        comparison = Comparison(base, runs, cfg.alpha)
    else:
        comparison = compare_fm_runs(table, opts["k"], cfg)
    text = comparison.table()
    print(text)
    if opts.get("out"):
        out = Path(opts["out"])
        out.mkdir(parents=True, exist_ok=True)
        (out / "eval.txt").write_text(text + "\n", encoding="utf-8")
        _write_records(comparison.records(), out / "eval.jsonl")
    return 0


def histogram_records(table: FeatureTable, modulator, bins: int) -> list[dict]:
    """Per group, state and stage (before/after modulation), counts of group averages in equal-width bins."""
    Xn = MinMaxNormalizer().fit_transform(table.X)
    Xm = modulator.transform(Xn, table.states) if modulator is not None else Xn
    before, after = group_averages(Xn), group_averages(Xm)
    recs = []
    for j, group in enumerate(FeatureGroup):
        lo = float(min(before[:, j].min(), after[:, j].min()))
        hi = float(max(before[:, j].max(), after[:, j].max()))
        if hi == lo:
            hi = lo + 1.0
        edges = np.linspace(lo, hi, bins + 1)
        for stage, vals in (("before", before[:, j]), ("after", after[:, j])):
            for state in State:
                mask = np.array([s is state for s in table.states])
                counts, _ = np.histogram(vals[mask], bins=edges)
                for b in range(bins):
                    recs.append({
                        "group": group.value, "stage": stage, "state": state.value,
                        "bin_lo": float(edges[b]), "bin_hi": float(edges[b + 1]), "count": int(counts[b]),
                    })
    return recs


def cmd_report(opts) -> int:
    if opts["bins"] < 1:
        raise UsageError("--bins must be positive")
    table = FeatureTable.from_csv(opts["in"])
    _, _, modulator = _fit_modulator(table, _mode(opts, FMMode.FM), opts["alpha"])
    recs = histogram_records(table, modulator, opts["bins"])
    out = Path(opts["out"])
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "histograms.tsv", "w", encoding="utf-8") as fh:
        fh.write("group\tstage\tstate\tbin_lo\tbin_hi\tcount\n")
        for r in recs:
            fh.write(f"{r['group']}\t{r['stage']}\t{r['state']}\t{r['bin_lo']!r}\t{r['bin_hi']!r}\t{r['count']}\n")
    groups = sorted(modulator.params_.selected_groups) if modulator is not None else []
    print(f"wrote {len(recs)} histogram bins to {out / 'histograms.tsv'}; modulated: "
          f"{', '.join(g.value for g in groups) or 'none'}")
    return 0


_HANDLERS = {
    "simulate": cmd_simulate,
    "ingest": cmd_ingest,
    "extract": cmd_extract,
    "rules-test": cmd_rules_test,
    "select": cmd_select,
    "modulate": cmd_modulate,
    "train": cmd_train,
    "eval": cmd_eval,
    "report": cmd_report,
}


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = list(sys.argv[1:] if argv is None else argv)
    if not args:
        parser.print_usage(sys.stderr)
        return 1
    try:
        parsed = vars(parser.parse_args(args))
    except SystemExit as exc:  # --help / --version exit 0, usage errors exit 1
        return int(exc.code or 0)
    command = parsed.pop("command")
    if command is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        opts = resolve_options(command, parsed)
        return _HANDLERS[command](opts)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"struggle-fm {command}: error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"struggle-fm {command}: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
