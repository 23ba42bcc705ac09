"""Command-line entry point: ingest corpora, manage trend tables, run suites,
export figure tables.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.
The suite configuration file is JSON; see the README for the schema.
"""

from __future__ import annotations

import argparse
import itertools
import json
import os
import sys
from pathlib import Path

import numpy as np

from .attack import AttackConfig
from .corpus import ingest_corpus, load_corpus_cache, load_word_list, save_corpus_cache
from .harness import (
    ExperimentConfig,
    SyntheticCorpusSpec,
    read_results,
    run_suite,
    summarize,
)
from .leakage import DefenseConfig
from .trends import TrendTable, synth_trend_table

RESULTS_DIR_ENV = "SSELAB_RESULTS_DIR"


class CliError(Exception):
    """Error with a CLI exit code attached."""

    def __init__(self, code: int, message: str) -> None:
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # exit 1 on usage errors, not argparse's 2
        raise CliError(1, f"{self.prog}: error: {message}")


# --------------------------------------------------------------------------
# config file handling

_SCHEMA: dict[str, set[str]] = {
    "corpus": {"kind", "path", "n_docs", "vocab_size", "zipf_exponent"},
    "trends": {"kind", "path", "concentration"},
    "universe": {"pool_size", "n"},
    "queries": {"eta_avg", "n_intervals", "offset"},
    "defense": {"kind", "tpr", "fpr", "epsilon", "oram_exponent", "pad_base"},
    "attack": {"kind", "alpha", "defense_aware", "p_min", "v_clamp"},
}
_TOP_LEVEL = set(_SCHEMA) | {"repetitions", "base_seed", "results", "jobs"}

# (section, key) pairs whose values may be lists, expanded into a run grid.
_SWEEPABLE = {
    ("universe", "n"),
    ("queries", "eta_avg"),
    ("queries", "offset"),
    ("defense", "fpr"),
    ("defense", "epsilon"),
    ("defense", "oram_exponent"),
    ("defense", "pad_base"),
    ("attack", "kind"),
    ("attack", "alpha"),
    ("attack", "defense_aware"),
}


def _validate_config_keys(raw: dict) -> None:
    for key in raw:
        if key not in _TOP_LEVEL:
            raise CliError(1, f"unknown config key {key!r}")
    for section, allowed in _SCHEMA.items():
        block = raw.get(section)
        if block is None:
            continue
        if not isinstance(block, dict):
            raise CliError(1, f"config section {section!r} must be an object")
        for key in block:
            if key not in allowed:
                raise CliError(1, f"unknown config key '{section}.{key}'")


def _sweep_axes(raw: dict) -> list[tuple[str, str, list]]:
    axes = []
    for section, key in sorted(_SWEEPABLE):
        value = raw.get(section, {}).get(key)
        if isinstance(value, list):
            if not value:
                raise CliError(1, f"config key {section}.{key} sweeps over an empty list")
            axes.append((section, key, value))
    # any other list-valued key is an error
    for section in _SCHEMA:
        for key, value in raw.get(section, {}).items():
            if isinstance(value, list) and (section, key) not in _SWEEPABLE:
                raise CliError(1, f"config key {section}.{key} cannot be a list")
    return axes


def _build_config(raw: dict) -> ExperimentConfig:
    corpus = raw.get("corpus", {})
    kind = corpus.get("kind")
    corpus_cache = None
    synth_spec = None
    if kind == "cache":
        if "path" not in corpus:
            raise CliError(1, "corpus.kind=cache requires corpus.path")
        corpus_cache = str(corpus["path"])
    elif kind == "synthetic":
        try:
            synth_spec = SyntheticCorpusSpec(
                n_docs=int(corpus["n_docs"]),
                vocab_size=int(corpus["vocab_size"]),
                zipf_exponent=float(corpus.get("zipf_exponent", 1.0)),
            )
        except KeyError as exc:
            raise CliError(1, f"corpus.kind=synthetic requires corpus.{exc.args[0]}") from exc
    else:
        raise CliError(1, "corpus.kind must be 'cache' or 'synthetic'")

    trends = raw.get("trends", {})
    tkind = trends.get("kind")
    trends_table = None
    concentration = None
    if tkind == "table":
        if "path" not in trends:
            raise CliError(1, "trends.kind=table requires trends.path")
        trends_table = str(trends["path"])
    elif tkind == "synthetic":
        concentration = float(trends.get("concentration", 1.0))
    else:
        raise CliError(1, "trends.kind must be 'table' or 'synthetic'")

    universe = raw.get("universe", {})
    queries = raw.get("queries", {})
    defense_block = dict(raw.get("defense", {"kind": "none"}))
    dkind = defense_block.pop("kind", "none")
    try:
        defense = DefenseConfig(kind=dkind, **defense_block)
    except (TypeError, ValueError) as exc:
        raise CliError(1, f"bad defense config: {exc}") from exc

    attack_block = dict(raw.get("attack", {}))
    attack_kind = attack_block.pop("kind", "sap")
    try:
        attack = AttackConfig(**attack_block)
    except (TypeError, ValueError) as exc:
        raise CliError(1, f"bad attack config: {exc}") from exc

    try:
        return ExperimentConfig(
            n=int(universe.get("n", 100)),
            eta_avg=float(queries.get("eta_avg", 5.0)),
            corpus_cache=corpus_cache,
            synth_corpus=synth_spec,
            trends_table=trends_table,
            trends_concentration=concentration,
            pool_size=int(universe.get("pool_size", 3000)),
            n_intervals=int(queries.get("n_intervals", 50)),
            tau=int(queries.get("offset", 5)),
            defense=defense,
            attack=attack,
            attack_kind=str(attack_kind),
            repetitions=int(raw.get("repetitions", 30)),
            base_seed=int(raw.get("base_seed", 0)),
        )
    except ValueError as exc:
        raise CliError(1, f"bad config: {exc}") from exc


def read_config(path: str | Path) -> dict:
    """Load and key-validate a suite config file."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise CliError(1, f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise CliError(1, f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise CliError(1, "config root must be a JSON object")
    _validate_config_keys(raw)
    return raw


def expand_config_grid(raw: dict, base_seed_override: int | None = None) -> list[ExperimentConfig]:
    """Expand swept axes of a validated config into the run grid."""
    raw = json.loads(json.dumps(raw))  # deep copy
    if base_seed_override is not None:
        raw["base_seed"] = base_seed_override
    axes = _sweep_axes(raw)
    configs = []
    for combo in itertools.product(*(values for _, _, values in axes)):
        variant = json.loads(json.dumps(raw))
        for (section, key, _), value in zip(axes, combo):
            variant[section][key] = value
        configs.append(_build_config(variant))
    return configs


def load_config_grid(path: str | Path, base_seed_override: int | None = None) -> list[ExperimentConfig]:
    """Parse a suite config file and expand swept axes into the run grid."""
    return expand_config_grid(read_config(path), base_seed_override)


# --------------------------------------------------------------------------
# subcommands

def _cmd_ingest(args: argparse.Namespace) -> int:
    try:
        dictionary = load_word_list(args.dictionary)
        stopwords = load_word_list(args.stopwords)
    except OSError as exc:
        raise CliError(1, f"cannot read word list: {exc}") from exc
    try:
        corpus = ingest_corpus(args.input, dictionary, stopwords)
    except ValueError as exc:
        raise CliError(1, str(exc)) from exc
    save_corpus_cache(corpus, args.output)
    print(f"documents: {corpus.n_docs}")
    print(f"vocabulary: {len(corpus.vocabulary)}")
    return 0


def _cmd_trends(args: argparse.Namespace) -> int:
    if (args.output is None) == (args.check is None):
        raise CliError(1, "trends: use exactly one of --output (generate) or --check")
    if args.check is not None:
        try:
            table = TrendTable.read_csv(args.check)
        except (OSError, ValueError) as exc:
            raise CliError(1, f"bad trend table: {exc}") from exc
        zero_rows = int((table.values.sum(axis=1) == 0).sum())
        print(f"keywords: {len(table.keywords)}")
        print(f"weeks: {table.n_weeks}")
        print(f"all-zero rows: {zero_rows}")
        return 0
    if args.from_corpus is None:
        raise CliError(1, "trends --output requires --from-corpus CACHE")
    try:
        corpus = load_corpus_cache(args.from_corpus)
    except (OSError, ValueError) as exc:
        raise CliError(1, f"cannot read corpus cache: {exc}") from exc
    rng = np.random.default_rng(args.seed)
    table = synth_trend_table(corpus.vocabulary, args.weeks, args.concentration, rng)
    table.write_csv(args.output)
    print(f"keywords: {len(table.keywords)}")
    print(f"weeks: {table.n_weeks}")
    return 0


def _default_results_path() -> Path:
    return Path(os.environ.get(RESULTS_DIR_ENV, ".")) / "results.jsonl"


def _cmd_run(args: argparse.Namespace) -> int:
    raw = read_config(args.config)
    configs = expand_config_grid(raw, args.seed)
    # flags override their config-file equivalents
    if args.results:
        results = Path(args.results)
    elif "results" in raw:
        results = Path(str(raw["results"]))
    else:
        results = _default_results_path()
    jobs = args.jobs if args.jobs is not None else int(raw.get("jobs", 1))
    total = sum(c.repetitions for c in configs)
    print(f"grid: {len(configs)} configs, {total} records -> {results}")
    outcome = run_suite(configs, results, jobs=jobs)
    print(f"written: {outcome.written}  skipped: {outcome.skipped}  failed: {len(outcome.failures)}")
    for config_hash, seed, error in outcome.failures:
        print(f"  FAILED {config_hash} seed={seed}: {error}", file=sys.stderr)
    return 0 if outcome.ok else 2


_FIGURES: dict[str, dict] = {
    "attcomp": {"filter": {"defense": "none"}, "group": ("n", "attack", "eta_avg")},
    "alpha": {"filter": {"defense": "none", "attack": "sap"}, "group": ("n", "alpha")},
    "offset": {"filter": {"defense": "none", "attack": "sap"}, "group": ("n", "eta_avg", "tau")},
    "clrz": {"filter": {"defense": "clrz"}, "group": ("n", "fpr", "defense_aware")},
    "ppyy": {"filter": {"defense": "ppyy"}, "group": ("n", "epsilon", "defense_aware")},
    "seal": {"filter": {"defense": "seal"}, "group": ("n", "pad_base", "defense_aware")},
}

_REPORT_METRICS = (
    ("weighted_accuracy", True),
    ("unweighted_accuracy", False),
    ("overhead_percent", False),
    ("attack_runtime_seconds", False),
)


def _cmd_report(args: argparse.Namespace) -> int:
    spec = _FIGURES[args.figure]
    try:
        records = read_results(args.results)
    except (OSError, ValueError) as exc:
        raise CliError(1, f"cannot read results: {exc}") from exc
    if not records:
        raise CliError(1, f"results file {args.results} is empty")

    selected = [
        r
        for r in records
        if all(r["params"].get(k) == v for k, v in spec["filter"].items())
        and all(key in r["params"] for key in spec["group"])
    ]
    if not selected:
        raise CliError(1, f"no records in {args.results} match figure {args.figure!r}")

    groups: dict[tuple, list[dict]] = {}
    for record in selected:
        key = tuple(record["params"][k] for k in spec["group"])
        groups.setdefault(key, []).append(record)

    header = list(spec["group"]) + ["runs"]
    for metric, with_ci in _REPORT_METRICS:
        header.append(f"{metric}_mean")
        if with_ci:
            header += [f"{metric}_ci_low", f"{metric}_ci_high"]
    lines = [",".join(header)]
    for key in sorted(groups):
        rows = groups[key]
        cells = [json.dumps(k) if isinstance(k, bool) else str(k) for k in key]
        cells.append(str(len(rows)))
        for metric, with_ci in _REPORT_METRICS:
            summary = summarize([r[metric] for r in rows])
            cells.append(format(summary.mean, ".6g"))
            if with_ci:
                cells.append(format(summary.ci_low, ".6g"))
                cells.append(format(summary.ci_high, ".6g"))
        lines.append(",".join(cells))
    Path(args.output).write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {len(groups)} rows to {args.output}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sselab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="preprocess a raw corpus into a keyword cache")
    p.add_argument("--input", required=True, help="directory of .txt files or JSONL records")
    p.add_argument("--dictionary", required=True, help="dictionary word list, one per line")
    p.add_argument("--stopwords", required=True, help="stopword list, one per line")
    p.add_argument("--output", required=True, help="corpus cache path (JSONL)")
    p.set_defaults(handler=_cmd_ingest)

    p = sub.add_parser("trends", help="generate or validate a trend table")
    p.add_argument("--check", help="validate an existing trend table CSV")
    p.add_argument("--output", help="write a synthetic trend table CSV here")
    p.add_argument("--from-corpus", help="corpus cache supplying the keyword rows")
    p.add_argument("--weeks", type=int, default=260)
    p.add_argument("--concentration", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(handler=_cmd_trends)

    p = sub.add_parser("run", help="execute a suite config")
    p.add_argument("--config", required=True, help="suite config JSON file")
    p.add_argument("--seed", type=int, default=None, help="override base_seed")
    p.add_argument("--jobs", type=int, default=None, help="parallel run width (default 1)")
    p.add_argument("--results", default=None, help="results JSONL path")
    p.set_defaults(handler=_cmd_run)

    p = sub.add_parser("report", help="aggregate results into a per-figure CSV table")
    p.add_argument("--results", required=True)
    p.add_argument("--figure", required=True, choices=sorted(_FIGURES))
    p.add_argument("--output", required=True)
    p.set_defaults(handler=_cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.handler(args)
    except CliError as exc:
        print(str(exc), file=sys.stderr)
        return exc.code
    except Exception as exc:  # noqa: BLE001 - runtime failures exit 2
        print(f"sselab: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
