"""Model inference by red-blue state merging over the prefix tree.

Starting from the prefix tree, consolidated "red" states are compared against
frontier "blue" states using a k-tails score: the number of distinct nonempty
outgoing label sequences of length at most k the two states share. A blue
state merges into the best-scoring compatible red state; merging folds the
machine back to label-determinism by recursively merging the targets of
same-source same-label edges and unioning their guards. A merge is only
committed if the folded machine still accepts every training trace; otherwise
the blue state is promoted to red. The result accepts a superset of the
training corpus, usually with loops the tree did not have.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .efsm import (
    Efsm,
    Guard,
    Transition,
    accepts_all,
    build_prefix_tree,
    canonicalize,
    corpus_checker,
)
from .traces import Corpus

DEFAULT_GUARD_OPEN_THRESHOLD = 8

STRATEGIES = ("redblue", "ktails_exhaustive")


@dataclass(frozen=True)
class InferenceConfig:
    """Inference parameters. Defaults are the tuned settings: the redblue
    merging strategy with minimum merge score k=1."""

    strategy: str = "redblue"
    k: int = 1
    max_states_hint: int | None = None
    guard_open_threshold: int = DEFAULT_GUARD_OPEN_THRESHOLD

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.k < 0:
            raise ValueError("k must be >= 0")


@dataclass(frozen=True)
class MergeCandidate:
    red: int
    blue: int
    score: int

    def __post_init__(self):
        if self.red == self.blue:
            raise ValueError("cannot merge a state with itself")
        if self.score < 0:
            raise ValueError("score must be >= 0")


def _label_tails(machine: Efsm, state: int, k: int) -> frozenset[tuple[str, ...]]:
    """All distinct label sequences of length 1..k leaving ``state``."""
    if k <= 0:
        return frozenset()
    tails: set[tuple[str, ...]] = set()
    frontier: set[tuple[tuple[str, ...], int]] = {((), state)}
    for _ in range(k):
        nxt: set[tuple[tuple[str, ...], int]] = set()
        for seq, s in frontier:
            for t in machine.outgoing[s]:
                extended = seq + (t.label,)
                tails.add(extended)
                nxt.add((extended, t.dst))
        frontier = nxt
        if not frontier:
            break
    return frozenset(tails)


def score_pair(machine: Efsm, a: int, b: int, k: int) -> int | None:
    """k-tails overlap score of two states, or None when they are incompatible.

    Incompatible means conflicting terminal behaviour: exactly one of the two
    is final while the other is a non-final state with no outgoing
    transitions. The score compares labels only; params are reconciled later
    by guard union during merging.
    """
    a_final = a in machine.finals
    b_final = b in machine.finals
    if a_final != b_final:
        non_final = b if a_final else a
        if not machine.outgoing[non_final]:
            return None
    return len(_label_tails(machine, a, k) & _label_tails(machine, b, k))


def _merge_fold(
    machine: Efsm, a: int, b: int, open_threshold: int
) -> tuple[Efsm, dict[int, int]]:
    """Merge b into a, then fold until label-deterministic.

    Folding repeatedly merges the target states of any two same-source
    same-label transitions, unioning their guards (params union; open when
    either side is open or the union exceeds ``open_threshold`` values).
    Returns the canonicalized machine and the old-id -> new-id mapping.
    """
    parent = list(range(machine.num_states))

    def find(s: int) -> int:
        while parent[s] != s:
            parent[s] = parent[parent[s]]
            s = parent[s]
        return s

    # out[state][label] = [params set, open flag, representative target]
    out: list[dict[str, list]] = [dict() for _ in range(machine.num_states)]
    finals = set(machine.finals)
    pending: deque[tuple[int, int]] = deque()
    pending.append((a, b))

    def add_edge(src: int, label: str, params: set, is_open: bool, dst: int) -> None:
        edge = out[src].get(label)
        if edge is None:
            out[src][label] = [params, is_open, dst]
            return
        edge[0] |= params
        edge[1] = edge[1] or is_open or len(edge[0]) > open_threshold
        if find(edge[2]) != find(dst):
            pending.append((edge[2], dst))

    for t in machine.transitions:
        add_edge(t.src, t.label, set(t.guard.allowed_params), t.guard.open, t.dst)

    while pending:
        x, y = pending.popleft()
        rx, ry = find(x), find(y)
        if rx == ry:
            continue
        rep, other = min(rx, ry), max(rx, ry)
        parent[other] = rep
        if other in finals:
            finals.discard(other)
            finals.add(rep)
        for label, (params, is_open, dst) in out[other].items():
            add_edge(rep, label, params, is_open, dst)
        out[other] = {}

    reps = [s for s in range(machine.num_states) if find(s) == s]
    transitions = []
    for src in reps:
        for label, (params, is_open, dst) in out[src].items():
            is_open = is_open or len(params) > open_threshold
            guard = Guard(label, frozenset(params), is_open)
            transitions.append(Transition(src, label, guard, find(dst)))
    live_finals = {find(f) for f in finals}
    folded, renumber = canonicalize(
        reps, find(machine.initial), live_finals, transitions
    )
    mapping = {s: renumber[find(s)] for s in range(machine.num_states)}
    return folded, mapping


def merge_states(
    machine: Efsm,
    a: int,
    b: int,
    training: Corpus | None = None,
    open_threshold: int = DEFAULT_GUARD_OPEN_THRESHOLD,
) -> Efsm | None:
    """Merge two states and fold; returns the new machine, or None when the
    folded machine no longer accepts some trace of ``training`` (a guard
    conflict, meaning the merge must be discarded).
    """
    if a == b:
        raise ValueError("cannot merge a state with itself")
    merged, _ = _merge_fold(machine, a, b, open_threshold)
    if training is not None and not accepts_all(merged, training):
        return None
    return merged


def _blue_states(machine: Efsm, red: set[int]) -> list[int]:
    blue = {t.dst for r in red for t in machine.outgoing[r]} - red
    return sorted(blue)


def _infer_redblue(machine: Efsm, corpus: Corpus, config: InferenceConfig) -> Efsm:
    contains_corpus = corpus_checker(corpus)
    red = {machine.initial}
    rounds = 0
    while True:
        # max_states_hint is a safety cap on loop rounds (one blue state is
        # decided per round); when exceeded, merging aborts early and the
        # current machine is returned as-is.
        if config.max_states_hint is not None and rounds >= config.max_states_hint:
            return machine
        rounds += 1
        blue = _blue_states(machine, red)
        if not blue:
            return machine
        b = blue[0]
        candidates = []
        for r in sorted(red):
            score = score_pair(machine, r, b, config.k)
            if score is not None and score >= config.k:
                candidates.append((-score, r))
        candidates.sort()
        merged = None
        for _, r in candidates:
            attempt = _merge_fold(machine, r, b, config.guard_open_threshold)
            if contains_corpus(attempt[0]):
                merged = attempt
                break
        if merged is None:
            red.add(b)
        else:
            machine, mapping = merged
            red = {mapping[r] for r in red}


def _infer_ktails_exhaustive(machine: Efsm, corpus: Corpus, config: InferenceConfig) -> Efsm:
    """Oracle strategy: merge any pair scoring >= k, highest score first,
    until no pair qualifies."""
    contains_corpus = corpus_checker(corpus)
    rounds = 0
    while True:
        if config.max_states_hint is not None and rounds >= config.max_states_hint:
            return machine
        rounds += 1
        candidates = []
        for a in range(machine.num_states):
            for b in range(a + 1, machine.num_states):
                score = score_pair(machine, a, b, config.k)
                if score is not None and score >= config.k:
                    candidates.append((-score, a, b))
        candidates.sort()
        merged = None
        for _, a, b in candidates:
            attempt = _merge_fold(machine, a, b, config.guard_open_threshold)
            if contains_corpus(attempt[0]):
                merged = attempt[0]
                break
        if merged is None:
            return machine
        machine = merged


def infer(corpus: Corpus, config: InferenceConfig | None = None) -> Efsm:
    """Infer a generalized machine from a corpus of traces.

    The result always accepts every training trace and never has more states
    than the prefix tree. With the default redblue strategy the loop is:
    score the lowest-numbered blue state against all red states, apply the
    highest-scoring consistent merge (ties to the lowest red id), or promote
    the blue state to red when no merge qualifies.
    """
    config = config or InferenceConfig()
    tree = build_prefix_tree(corpus)
    if not corpus.traces:
        return tree
    if config.strategy == "ktails_exhaustive":
        return _infer_ktails_exhaustive(tree, corpus, config)
    return _infer_redblue(tree, corpus, config)


def language_is_superset(machine: Efsm, corpus: Corpus) -> bool:
    """True iff the machine accepts every training trace of the corpus."""
    return accepts_all(machine, corpus)
