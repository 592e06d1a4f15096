"""Breadth-first proof search over an inferred machine.

The search walks model paths in nondecreasing element count, recomposing
";"-chained elements into full tactic sentences and applying each finished
sentence through a prover session. The prover, not the model's final states,
decides completion: the first Complete outcome wins, which makes the returned
proof shortest in trace elements. One prover session is reused across the
whole search; moving between nodes undoes to the longest common sentence
prefix and replays the rest. Replays are bookkeeping - only first-time
evaluations of a (node, sentence) edge consume tactic budget.
"""
from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass
from typing import Sequence

from .efsm import Efsm
from .prover import start_session
from .traces import Corpus, Trace, TraceElement, split_tactic_sentence

DEFAULT_TACTIC_BUDGET = 10000


class DanglingComposition(ValueError):
    """Element sequence ends with a ';'-composed element (no sentence end)."""


@dataclass(frozen=True)
class SearchConfig:
    tactic_budget: int = DEFAULT_TACTIC_BUDGET
    timeout_seconds: float | None = None
    max_depth: int | None = None

    def __post_init__(self):
        if self.tactic_budget < 1:
            raise ValueError("tactic_budget must be >= 1")
        if self.timeout_seconds is not None and self.timeout_seconds <= 0:
            raise ValueError("timeout_seconds must be positive")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")


@dataclass(frozen=True)
class SearchNode:
    """A partially explored model path.

    ``sentence_path`` holds the completed (prover-applied) sentences;
    ``pending_fragment`` accumulates ';'-composed elements still waiting for
    a sentence terminator. ``element_count`` counts all consumed trace
    elements, pending ones included.
    """

    state: int
    sentence_path: tuple[str, ...] = ()
    element_count: int = 0
    pending_fragment: str | None = None
    pending_elements: int = 0


@dataclass(frozen=True)
class ProofResult:
    found: bool
    sentences: tuple[str, ...] = ()
    tactics_evaluated: int = 0
    elapsed_seconds: float = 0.0
    is_new: bool = False
    is_shorter: bool = False


def compose_sentences(elements: Sequence[TraceElement]) -> list[str]:
    """Join ';'-composed elements into complete "."-terminated sentences."""
    sentences: list[str] = []
    fragment = ""
    for el in elements:
        piece = el.label if not el.params else f"{el.label} {el.params}"
        fragment = f"{fragment} {piece}" if fragment else piece
        if not el.composed:
            sentences.append(fragment + ".")
            fragment = ""
    if fragment:
        raise DanglingComposition(f"element sequence ends mid-composition: {fragment!r}")
    return sentences


def sentences_to_elements(sentences: Sequence[str]) -> tuple[TraceElement, ...]:
    """Decompose found sentences back into trace elements (inverse of
    :func:`compose_sentences`)."""
    elements: list[TraceElement] = []
    for sentence in sentences:
        body = sentence.strip()
        if body.endswith("."):
            body = body[:-1]
        elements.extend(split_tactic_sentence(body))
    return tuple(elements)


def classify_proof(
    found: Sequence[str], training: Corpus, original: Trace | None = None
) -> tuple[bool, bool]:
    """Classify a found proof as (is_new, is_shorter).

    New means its element sequence equals no whole training trace; shorter
    means it has fewer trace elements than the original hand-written proof.
    """
    elements = sentences_to_elements(found)
    is_new = all(t.elements != elements for t in training.traces)
    is_shorter = original is not None and len(elements) < len(original.elements)
    return is_new, is_shorter


def bfs_search(
    machine: Efsm,
    backend,
    lemma_name: str,
    lemma_statement: str = "",
    config: SearchConfig | None = None,
    *,
    training: Corpus | None = None,
    original: Trace | None = None,
) -> ProofResult:
    """Search the machine breadth-first for a proof the backend accepts.

    Paths are explored in nondecreasing element count (FIFO frontier, edges
    in canonical order, params lexicographic; open guards enumerate observed
    params only). A Failure prunes the branch; the first Complete returns
    immediately with the sentence path. Returns found=False when the frontier
    is exhausted, the tactic budget is consumed, or the timeout elapses.
    """
    config = config or SearchConfig()
    started = time.monotonic()
    deadline = started + config.timeout_seconds if config.timeout_seconds else None
    # A cycle of ';'-composed edges could otherwise grow fragments forever
    # without ever consulting the prover (or the budget).
    max_pending = max(16, 2 * machine.num_states)

    session = start_session(backend, lemma_name, lemma_statement)
    evaluated = 0

    def result(found_path: tuple[str, ...] | None) -> ProofResult:
        elapsed = time.monotonic() - started
        if found_path is None:
            return ProofResult(False, (), evaluated, elapsed)
        is_new = is_shorter = False
        if training is not None:
            is_new, is_shorter = classify_proof(found_path, training, original)
        return ProofResult(True, found_path, evaluated, elapsed, is_new, is_shorter)

    root = SearchNode(machine.initial)
    frontier: deque[SearchNode] = deque([root])
    seen = {(root.state, root.sentence_path, root.pending_fragment)}
    try:
        while frontier:
            if deadline is not None and time.monotonic() >= deadline:
                return result(None)
            node = frontier.popleft()
            if config.max_depth is not None and node.element_count >= config.max_depth:
                continue
            restored = False
            for t in machine.outgoing[node.state]:
                for param in sorted(t.guard.allowed_params):
                    piece = t.label if not param else f"{t.label} {param}"
                    joined = (
                        f"{node.pending_fragment} {piece}"
                        if node.pending_fragment
                        else piece
                    )
                    if param.endswith(";"):
                        if node.pending_elements + 1 > max_pending:
                            continue
                        child = SearchNode(
                            t.dst,
                            node.sentence_path,
                            node.element_count + 1,
                            joined,
                            node.pending_elements + 1,
                        )
                        key = (child.state, child.sentence_path, child.pending_fragment)
                        if key not in seen:
                            seen.add(key)
                            frontier.append(child)
                        continue
                    sentence = joined + "."
                    child_path = node.sentence_path + (sentence,)
                    key = (t.dst, child_path, None)
                    if key in seen:
                        continue
                    if deadline is not None and time.monotonic() >= deadline:
                        return result(None)
                    if evaluated >= config.tactic_budget:
                        return result(None)
                    if not restored:
                        session.restore(node.sentence_path)
                        restored = True
                    outcome = session.apply_tactic(sentence)
                    evaluated += 1
                    if outcome.is_complete:
                        return result(child_path)
                    if outcome.is_failure:
                        continue
                    seen.add(key)
                    frontier.append(
                        SearchNode(t.dst, child_path, node.element_count + 1, None, 0)
                    )
                    session.undo()
        return result(None)
    finally:
        session.close()


def render_result_block(result: ProofResult, total_seconds: float | None = None) -> str:
    """Three-line result block: the proof, the evaluation count, the time."""
    total = result.elapsed_seconds if total_seconds is None else total_seconds
    minutes = int(total // 60)
    seconds = int(total % 60)
    first = "Proof was: " + " ".join(result.sentences) if result.found else "No proof found."
    return (
        f"{first}\n"
        f"{result.tactics_evaluated} tactics evaluated.\n"
        f"Inference and search took {minutes} min, {seconds} sec"
    )
