"""k-folds cross-validation harness and adaptive re-inference loop.

Lemmas are shuffled with a seeded generator and dealt round-robin into k
disjoint folds. For each fold a model is inferred from the other k-1 folds
and every held-out lemma is searched against it, which measures how well
existing proofs generalise to properties they were not written for. Found
proofs can be fed back into the corpus between rounds so later models are
inferred from a richer corpus.
"""
from __future__ import annotations

import json
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

from .inference import InferenceConfig, infer
from .prover import BackendError, NothingToUndo, TacticTimeout, UnknownLemma
from .search import SearchConfig, bfs_search, sentences_to_elements
from .traces import Corpus, Trace


class TooFewLemmas(ValueError):
    """Corpus has fewer lemmas than requested folds."""


@dataclass(frozen=True)
class FoldPlan:
    """k pairwise-disjoint lemma-name sets covering the corpus exactly,
    sizes differing by at most one."""

    k: int
    seed: int
    folds: tuple[frozenset[str], ...]


@dataclass(frozen=True)
class LemmaResult:
    lemma: str
    found: bool
    is_new: bool
    is_shorter: bool
    tactics_evaluated: int
    elapsed_seconds: float
    sentences: tuple[str, ...] = ()
    note: str = ""


@dataclass(frozen=True)
class EvalReport:
    """Per-theory result totals plus the per-lemma detail rows."""

    theory: str
    size: int
    total_proved: int
    new_count: int
    shorter_count: int
    baseline_proved: int | None
    per_lemma: tuple[LemmaResult, ...]
    library: str = ""

    def __post_init__(self):
        if not (self.total_proved <= self.size):
            raise ValueError("total_proved exceeds size")
        if self.new_count > self.total_proved or self.shorter_count > self.total_proved:
            raise ValueError("new/shorter counts exceed total_proved")


def partition_kfolds(corpus: Corpus, k: int, seed: int) -> FoldPlan:
    """Randomly partition lemma names into k folds, deterministically in the
    seed: shuffle then deal round-robin."""
    if k < 2:
        raise ValueError("k must be >= 2")
    names = corpus.lemma_names()
    if len(names) < k:
        raise TooFewLemmas(f"{len(names)} lemmas cannot fill {k} folds")
    shuffled = list(names)
    random.Random(seed).shuffle(shuffled)
    folds = tuple(frozenset(shuffled[i::k]) for i in range(k))
    return FoldPlan(k, seed, folds)


def _theory_name(corpus: Corpus) -> str:
    theories = {t.source_theory for t in corpus.traces}
    if len(theories) == 1:
        return next(iter(theories))
    return "combined"


def _run_fold(
    corpus: Corpus,
    fold: frozenset[str],
    inference_cfg: InferenceConfig,
    search_cfg: SearchConfig,
    backend,
) -> list[LemmaResult]:
    training = Corpus(
        tuple(t for t in corpus.traces if t.lemma_name not in fold), corpus.provenance
    )
    model = infer(training, inference_cfg)
    rows: list[LemmaResult] = []
    for trace in corpus.traces:
        if trace.lemma_name not in fold:
            continue
        try:
            found = bfs_search(
                model,
                backend,
                trace.lemma_name,
                "",
                search_cfg,
                training=training,
                original=trace,
            )
        except (BackendError, UnknownLemma, TacticTimeout, NothingToUndo) as exc:
            rows.append(
                LemmaResult(
                    trace.lemma_name, False, False, False, 0, 0.0,
                    note=f"{type(exc).__name__}: {exc}",
                )
            )
            continue
        rows.append(
            LemmaResult(
                trace.lemma_name,
                found.found,
                found.is_new,
                found.is_shorter,
                found.tactics_evaluated,
                found.elapsed_seconds,
                found.sentences,
            )
        )
    return rows


def run_cross_validation(
    corpus: Corpus,
    k: int,
    seed: int,
    inference_cfg: InferenceConfig | None = None,
    search_cfg: SearchConfig | None = None,
    backend=None,
    *,
    jobs: int = 1,
) -> EvalReport:
    """Infer a model per fold from the other folds' traces and try to prove
    each held-out lemma; every lemma is evaluated exactly once.

    Backend errors mark the lemma as not proved (with a note) and never abort
    the run. With jobs > 1 folds run in parallel; rows are still aggregated
    in fold order so reports stay deterministic apart from timing fields.
    """
    inference_cfg = inference_cfg or InferenceConfig()
    search_cfg = search_cfg or SearchConfig()
    plan = partition_kfolds(corpus, k, seed)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            fold_rows = list(
                pool.map(
                    lambda fold: _run_fold(corpus, fold, inference_cfg, search_cfg, backend),
                    plan.folds,
                )
            )
    else:
        fold_rows = [
            _run_fold(corpus, fold, inference_cfg, search_cfg, backend)
            for fold in plan.folds
        ]
    rows = tuple(row for rows in fold_rows for row in rows)
    return EvalReport(
        theory=_theory_name(corpus),
        size=len(corpus.traces),
        total_proved=sum(1 for r in rows if r.found),
        new_count=sum(1 for r in rows if r.found and r.is_new),
        shorter_count=sum(1 for r in rows if r.found and r.is_shorter),
        baseline_proved=None,
        per_lemma=rows,
    )


def run_baseline(corpus: Corpus, backend) -> int:
    """Count lemmas proved by the prover's combined built-in command."""
    proved = 0
    for trace in corpus.traces:
        try:
            if backend.run_builtin_baseline(trace.lemma_name, ""):
                proved += 1
        except (BackendError, UnknownLemma, TacticTimeout):
            continue
    return proved


def iterate_adaptive(
    corpus: Corpus,
    rounds: int,
    k: int,
    seed: int,
    inference_cfg: InferenceConfig | None = None,
    search_cfg: SearchConfig | None = None,
    backend=None,
    *,
    jobs: int = 1,
) -> tuple[Corpus, list[EvalReport]]:
    """Cross-validate repeatedly, feeding every found proof back into the
    corpus (as a new trace named "<lemma>#r<round>") before the next round."""
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    reports: list[EvalReport] = []
    current = corpus
    for rnd in range(1, rounds + 1):
        report = run_cross_validation(
            current, k, seed, inference_cfg, search_cfg, backend, jobs=jobs
        )
        reports.append(report)
        new_traces: list[Trace] = []
        for row in report.per_lemma:
            if not row.found:
                continue
            theory = current.trace_for(row.lemma).source_theory
            new_traces.append(
                Trace(f"{row.lemma}#r{rnd}", sentences_to_elements(row.sentences), theory)
            )
        if new_traces:
            current = Corpus(current.traces + tuple(new_traces), current.provenance)
    return current, reports


def _percent_cell(count: int, size: int) -> str:
    pct = (count * 100) // size if size else 0
    return f"{count} ({pct}%)"


REPORT_COLUMNS = ("Library", "Theory", "Size", "Total", "New", "Shorter", "Baseline")


def _report_row(report: EvalReport) -> tuple[str, ...]:
    baseline = (
        "-"
        if report.baseline_proved is None
        else _percent_cell(report.baseline_proved, report.size)
    )
    return (
        report.library,
        report.theory,
        str(report.size),
        _percent_cell(report.total_proved, report.size),
        str(report.new_count),
        str(report.shorter_count),
        baseline,
    )


def render_report(reports: list[EvalReport], format: str = "tsv") -> str:
    """Render result-summary rows; Total and Baseline carry a floor-rounded
    percentage of Size, e.g. "135 (39%)"."""
    rows = [_report_row(r) for r in reports]
    if format == "tsv":
        lines = ["\t".join(REPORT_COLUMNS)]
        lines.extend("\t".join(row) for row in rows)
        return "\n".join(lines) + "\n"
    if format == "markdown":
        lines = [
            "| " + " | ".join(REPORT_COLUMNS) + " |",
            "|" + "|".join(" --- " for _ in REPORT_COLUMNS) + "|",
        ]
        lines.extend("| " + " | ".join(row) + " |" for row in rows)
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown report format {format!r}")


def write_per_lemma_jsonl(reports: list[EvalReport], path) -> None:
    """Per-lemma detail rows as JSON lines for downstream analysis."""
    with open(path, "w", encoding="utf-8") as fh:
        for report in reports:
            for row in report.per_lemma:
                obj = asdict(row)
                obj["theory"] = report.theory
                obj["sentences"] = list(row.sentences)
                fh.write(json.dumps(obj, ensure_ascii=False))
                fh.write("\n")
