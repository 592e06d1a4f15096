"""Command-line entry point.

Subcommands mirror the pipeline stages: ``extract`` proof scripts into a
trace file, ``infer`` a model from traces, ``search`` a model for one lemma's
proof, ``eval`` a corpus with k-folds cross-validation, ``baseline`` the
prover's built-in automation, and ``export-dot`` a model for Graphviz.

Exit codes: 0 success (search: proof found), 1 usage or input error,
2 backend error, 3 search completed without finding a proof.
"""
from __future__ import annotations

import argparse
import dataclasses
import os
import sys
import time

from .efsm import load_model, save_model, to_dot
from .evaluation import (
    TooFewLemmas,
    iterate_adaptive,
    render_report,
    run_baseline,
    run_cross_validation,
    write_per_lemma_jsonl,
)
from .inference import InferenceConfig, infer
from .prover import BackendError, TacticTimeout, UnknownLemma, load_backend
from .search import SearchConfig, bfs_search, render_result_block
from .traces import Corpus, ParseError, SchemaError, load_corpus, write_traces

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_BACKEND = 2
EXIT_NOT_FOUND = 3

BACKEND_CONFIG_ENV = "SEPIA_BACKEND_CONFIG"


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; the contract here is 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _resolve_backend(args):
    spec = getattr(args, "backend", None) or os.environ.get(BACKEND_CONFIG_ENV)
    if not spec:
        raise ValueError(
            f"no backend given: pass --backend mock:fixture.json|subprocess:config.json "
            f"or set {BACKEND_CONFIG_ENV}"
        )
    return load_backend(spec)


def _inference_config(args) -> InferenceConfig:
    return InferenceConfig(
        strategy=args.strategy.replace("-", "_"),
        k=args.merge_k,
        max_states_hint=args.max_states_hint,
        guard_open_threshold=args.guard_open_threshold,
    )


def _search_config(args) -> SearchConfig:
    return SearchConfig(
        tactic_budget=args.budget,
        timeout_seconds=args.timeout,
        max_depth=args.max_depth,
    )


def _add_inference_flags(parser, k_flag="--k"):
    parser.add_argument(
        "--strategy",
        choices=["redblue", "ktails-exhaustive"],
        default="redblue",
        help="state-merging strategy (default: redblue)",
    )
    parser.add_argument(
        k_flag,
        dest="merge_k",
        type=int,
        default=1,
        help="minimum merge score (default: 1)",
    )
    parser.add_argument(
        "--guard-open-threshold",
        type=int,
        default=8,
        help="open a merged guard once it exceeds this many distinct params (default: 8)",
    )
    parser.add_argument(
        "--max-states-hint",
        type=int,
        default=None,
        help="safety cap on merge-loop rounds; aborts merging early when exceeded",
    )


def _add_search_flags(parser):
    parser.add_argument(
        "--budget", type=int, default=10000,
        help="tactic applications allowed before giving up (default: 10000)",
    )
    parser.add_argument(
        "--timeout", type=float, default=None, help="overall search timeout in seconds"
    )
    parser.add_argument(
        "--max-depth", type=int, default=None, help="maximum trace elements per proof"
    )
    parser.add_argument(
        "--backend",
        default=None,
        help=f"mock:fixture.json or subprocess:config.json (default: ${BACKEND_CONFIG_ENV})",
    )


def _cmd_extract(args) -> int:
    corpus = load_corpus(args.files)
    write_traces(corpus, args.output)
    print(f"wrote {len(corpus)} traces to {args.output}")
    return EXIT_OK


def _cmd_infer(args) -> int:
    corpus = load_corpus([args.traces])
    machine = infer(corpus, _inference_config(args))
    if args.output:
        save_model(machine, args.output)
        print(
            f"inferred model with {machine.num_states} states, "
            f"{len(machine.transitions)} transitions -> {args.output}"
        )
    else:
        from .efsm import machine_to_json

        sys.stdout.write(machine_to_json(machine))
    return EXIT_OK


def _cmd_search(args) -> int:
    started = time.monotonic()
    machine = load_model(args.model)
    backend = _resolve_backend(args)
    training = original = None
    if args.traces:
        training = load_corpus([args.traces])
        try:
            original = training.trace_for(args.lemma)
        except KeyError:
            original = None
    result = bfs_search(
        machine,
        backend,
        args.lemma,
        args.statement,
        _search_config(args),
        training=training,
        original=original,
    )
    print(render_result_block(result, time.monotonic() - started))
    if result.found and training is not None:
        flags = []
        if result.is_new:
            flags.append("new")
        if result.is_shorter:
            flags.append("shorter")
        if flags:
            print("Proof is " + " and ".join(flags) + ".")
    return EXIT_OK if result.found else EXIT_NOT_FOUND


def _theory_groups(corpus: Corpus) -> list[Corpus]:
    order: list[str] = []
    buckets: dict[str, list] = {}
    for trace in corpus.traces:
        if trace.source_theory not in buckets:
            order.append(trace.source_theory)
            buckets[trace.source_theory] = []
        buckets[trace.source_theory].append(trace)
    return [Corpus(tuple(buckets[name]), corpus.provenance) for name in order]


def _cmd_eval(args) -> int:
    corpus = load_corpus([args.traces])
    backend = _resolve_backend(args)
    inference_cfg = _inference_config(args)
    search_cfg = _search_config(args)
    groups = [corpus] if args.pooled else _theory_groups(corpus)
    reports = []
    for group in groups:
        if args.rounds > 1:
            _, group_reports = iterate_adaptive(
                group, args.rounds, args.k, args.seed,
                inference_cfg, search_cfg, backend, jobs=args.jobs,
            )
            group_reports = [
                dataclasses.replace(report, theory=f"{report.theory}@r{i}")
                for i, report in enumerate(group_reports, start=1)
            ]
        else:
            group_reports = [
                run_cross_validation(
                    group, args.k, args.seed,
                    inference_cfg, search_cfg, backend, jobs=args.jobs,
                )
            ]
        if args.with_baseline:
            baseline = run_baseline(group, backend)
            group_reports = [
                dataclasses.replace(report, baseline_proved=baseline)
                for report in group_reports
            ]
        reports.extend(group_reports)
    sys.stdout.write(render_report(reports, args.format))
    if args.per_lemma_out:
        write_per_lemma_jsonl(reports, args.per_lemma_out)
    return EXIT_OK


def _cmd_baseline(args) -> int:
    corpus = load_corpus([args.traces])
    backend = _resolve_backend(args)
    total = 0
    print("Theory\tProved\tSize")
    for group in _theory_groups(corpus):
        proved = run_baseline(group, backend)
        total += proved
        theory = group.traces[0].source_theory or "<none>"
        print(f"{theory}\t{proved}\t{len(group)}")
    print(f"total\t{total}\t{len(corpus)}")
    return EXIT_OK


def _cmd_export_dot(args) -> int:
    machine = load_model(args.model)
    dot = to_dot(machine)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(dot)
        print(f"wrote {args.output}")
    else:
        sys.stdout.write(dot)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="tacinfer",
        description="Learn tactic-trace models and search them for proofs.",
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("extract", help="parse proof scripts into a trace file")
    p.add_argument("files", nargs="+", help="proof scripts and/or trace files")
    p.add_argument("-o", "--output", required=True, help="output trace file (JSON lines)")
    p.set_defaults(func=_cmd_extract)

    p = sub.add_parser("infer", help="infer a model from a trace file")
    p.add_argument("traces", help="input trace file")
    _add_inference_flags(p)
    p.add_argument("-o", "--output", default=None, help="model JSON output (default: stdout)")
    p.set_defaults(func=_cmd_infer)

    p = sub.add_parser("search", help="search a model for one lemma's proof")
    p.add_argument("model", help="model JSON file")
    p.add_argument("--lemma", required=True, help="lemma name to prove")
    p.add_argument("--statement", default="", help="lemma statement text (subprocess backends)")
    _add_search_flags(p)
    p.add_argument(
        "--traces", default=None,
        help="training trace file, enables new/shorter classification",
    )
    p.set_defaults(func=_cmd_search)

    p = sub.add_parser("eval", help="k-folds cross-validation over a corpus")
    p.add_argument("traces", help="input trace file")
    p.add_argument("--k", type=int, default=10, help="number of folds (default: 10)")
    p.add_argument("--seed", type=int, required=True, help="partition shuffle seed")
    _add_search_flags(p)
    _add_inference_flags(p, k_flag="--merge-k")
    p.add_argument("--format", choices=["tsv", "markdown"], default="tsv")
    p.add_argument("--per-lemma-out", default=None, help="write per-lemma rows as JSON lines")
    p.add_argument("--pooled", action="store_true", help="pool theories instead of per-theory runs")
    p.add_argument("--rounds", type=int, default=1, help="adaptive re-inference rounds (default: 1)")
    p.add_argument("--with-baseline", action="store_true", help="also run the built-in baseline")
    p.add_argument("--jobs", type=int, default=1, help="parallel folds (default: 1)")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("baseline", help="count lemmas proved by built-in automation")
    p.add_argument("traces", help="input trace file")
    p.add_argument("--backend", default=None)
    p.set_defaults(func=_cmd_baseline)

    p = sub.add_parser("export-dot", help="export a model as Graphviz DOT")
    p.add_argument("model", help="model JSON file")
    p.add_argument("-o", "--output", default=None, help="output path (default: stdout)")
    p.set_defaults(func=_cmd_export_dot)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (BackendError, TacticTimeout, UnknownLemma) as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except (ParseError, SchemaError, TooFewLemmas, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
