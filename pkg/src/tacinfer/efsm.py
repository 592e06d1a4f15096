"""Extended finite state machine representation and prefix-tree construction.

A machine is a set of dense integer states with guarded, labeled transitions.
A guard records the parameter strings observed on an edge during training;
an "open" guard additionally admits unseen parameters (used by inference when
merged edges carry many heterogeneous values).

Machines are immutable after construction and canonically numbered
(breadth-first from the initial state with lexicographic edge order), so
structurally equal machines compare and serialise identically.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property

from . import _kernel
from .traces import Corpus, Trace


@dataclass(frozen=True)
class Guard:
    """Parameter predicate for one transition: membership in the observed set,
    or anything at all when ``open`` is set."""

    label: str
    allowed_params: frozenset[str]
    open: bool = False

    def __post_init__(self):
        object.__setattr__(self, "allowed_params", frozenset(self.allowed_params))
        if not self.open and not self.allowed_params:
            raise ValueError(f"closed guard on {self.label!r} with no allowed params")

    def allows(self, params: str) -> bool:
        return self.open or params in self.allowed_params


def guard_allows(guard: Guard, params: str) -> bool:
    """True iff the guard admits the parameter string."""
    return guard.allows(params)


@dataclass(frozen=True)
class Transition:
    src: int
    label: str
    guard: Guard
    dst: int

    def __post_init__(self):
        if self.guard.label != self.label:
            raise ValueError(
                f"guard label {self.guard.label!r} != transition label {self.label!r}"
            )

    def sort_key(self) -> tuple:
        return (self.src, self.label, sorted(self.guard.allowed_params), self.dst)


@dataclass(frozen=True)
class Efsm:
    """A canonical machine: states are 0..num_states-1, transitions are kept
    sorted by (src, label, params, dst)."""

    num_states: int
    initial: int
    finals: frozenset[int]
    transitions: tuple[Transition, ...]

    def __post_init__(self):
        object.__setattr__(self, "finals", frozenset(self.finals))
        object.__setattr__(
            self, "transitions", tuple(sorted(self.transitions, key=Transition.sort_key))
        )
        if not (0 <= self.initial < self.num_states):
            raise ValueError("initial state out of range")
        for s in self.finals:
            if not (0 <= s < self.num_states):
                raise ValueError(f"final state {s} out of range")
        for t in self.transitions:
            if not (0 <= t.src < self.num_states and 0 <= t.dst < self.num_states):
                raise ValueError(f"transition endpoint out of range: {t}")

    @property
    def states(self) -> range:
        return range(self.num_states)

    @property
    def labels(self) -> frozenset[str]:
        return frozenset(t.label for t in self.transitions)

    @cached_property
    def _compiled(self) -> _kernel.CompiledMachine:
        return _kernel.compile_machine(
            self.num_states,
            self.initial,
            self.finals,
            [
                (t.src, t.label, tuple(t.guard.allowed_params), t.guard.open, t.dst)
                for t in self.transitions
            ],
        )

    @cached_property
    def outgoing(self) -> tuple[tuple[Transition, ...], ...]:
        """Transitions grouped by source state, in canonical order."""
        buckets: list[list[Transition]] = [[] for _ in range(self.num_states)]
        for t in self.transitions:
            buckets[t.src].append(t)
        return tuple(tuple(b) for b in buckets)


def accepts(machine: Efsm, trace: Trace) -> bool:
    """True iff some path from the initial state consumes every element of the
    trace (label equal, guard admitting the params) and ends in a final state.

    Exploration is exhaustive over nondeterministic choices.
    """
    return _kernel.accepts(machine._compiled, trace.label_params_pairs())


def accepts_all(machine: Efsm, corpus: Corpus) -> bool:
    """True iff every trace of the corpus is accepted (early exit on failure)."""
    return _kernel.accepts_all(
        machine._compiled, [t.label_params_pairs() for t in corpus.traces]
    )


def corpus_checker(corpus: Corpus):
    """Containment check factory for one corpus against many machines.

    The corpus is interned and flat-encoded once; each call compiles the
    candidate machine against the shared tables and runs the batched kernel.
    This is the fast path for the inference loop, which re-checks the whole
    corpus after every tentative merge.
    """
    pairs_list = [t.label_params_pairs() for t in corpus.traces]
    label_ids, param_ids = _kernel.intern_corpus(pairs_list)
    encoded = _kernel.encode_corpus(label_ids, param_ids, pairs_list)

    def check(machine: Efsm) -> bool:
        cm = _kernel.compile_machine(
            machine.num_states,
            machine.initial,
            machine.finals,
            [
                (t.src, t.label, tuple(t.guard.allowed_params), t.guard.open, t.dst)
                for t in machine.transitions
            ],
            label_ids,
            param_ids,
        )
        return _kernel.accepts_all_encoded(cm, *encoded)

    return check


def build_prefix_tree(corpus: Corpus) -> Efsm:
    """Arrange the corpus into a prefix-tree machine that accepts exactly the
    training traces.

    Two traces share states along their longest common prefix of
    (label, params) pairs; every edge guard is the singleton set of the one
    params value seen on it.
    """
    children: list[dict[tuple[str, str], int]] = [{}]
    finals: set[int] = set()
    for trace in corpus.traces:
        node = 0
        for el in trace.elements:
            key = (el.label, el.params)
            nxt = children[node].get(key)
            if nxt is None:
                nxt = len(children)
                children.append({})
                children[node][key] = nxt
            node = nxt
        finals.add(node)
    transitions = []
    for src, kids in enumerate(children):
        for (label, params), dst in kids.items():
            transitions.append(
                Transition(src, label, Guard(label, frozenset([params])), dst)
            )
    machine, _ = canonicalize(range(len(children)), 0, finals, transitions)
    return machine


def canonicalize(
    states,
    initial: int,
    finals: set[int] | frozenset[int],
    transitions: list[Transition],
) -> tuple[Efsm, dict[int, int]]:
    """Renumber the given states breadth-first from the initial state,
    visiting edges in lexicographic (label, params) order. Returns the
    machine and the old-id -> new-id mapping.
    """
    out: dict[int, list[Transition]] = {}
    for t in transitions:
        out.setdefault(t.src, []).append(t)
    for edges in out.values():
        edges.sort(key=lambda t: (t.label, sorted(t.guard.allowed_params), t.dst))
    mapping: dict[int, int] = {initial: 0}
    order = [initial]
    i = 0
    while i < len(order):
        for t in out.get(order[i], ()):
            if t.dst not in mapping:
                mapping[t.dst] = len(order)
                order.append(t.dst)
        i += 1
    # States unreachable from the initial state keep old-id order at the end.
    for s in sorted(states):
        if s not in mapping:
            mapping[s] = len(mapping)
    machine = Efsm(
        num_states=len(mapping),
        initial=0,
        finals=frozenset(mapping[f] for f in finals),
        transitions=tuple(
            Transition(mapping[t.src], t.label, t.guard, mapping[t.dst])
            for t in transitions
        ),
    )
    return machine, mapping


def _dot_quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _edge_label(t: Transition, sample: int = 3) -> str:
    params = sorted(t.guard.allowed_params)
    shown = ", ".join(params[:sample])
    extra = len(params) - sample
    text = f"{t.label} / {{{shown}}}"
    if extra > 0:
        text += f" +{extra} more"
    if t.guard.open:
        text += " (open)"
    return text


def to_dot(machine: Efsm) -> str:
    """Render the machine as a Graphviz digraph.

    Finals are double circles; edge labels show up to three sample params plus
    a "+n more" suffix. Output is byte-stable for equal machines.
    """
    lines = ["digraph efsm {", "  rankdir=LR;", '  __start [shape=point, label=""];']
    for s in machine.states:
        shape = "doublecircle" if s in machine.finals else "circle"
        lines.append(f"  {s} [shape={shape}];")
    lines.append(f"  __start -> {machine.initial};")
    for t in machine.transitions:
        lines.append(f"  {t.src} -> {t.dst} [label={_dot_quote(_edge_label(t))}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def machine_to_json(machine: Efsm) -> str:
    """Serialise to the model-file JSON schema."""
    obj = {
        "states": machine.num_states,
        "initial": machine.initial,
        "finals": sorted(machine.finals),
        "transitions": [
            {
                "from": t.src,
                "label": t.label,
                "params": sorted(t.guard.allowed_params),
                "open": t.guard.open,
                "to": t.dst,
            }
            for t in machine.transitions
        ],
    }
    return json.dumps(obj, indent=2, ensure_ascii=False) + "\n"


def machine_from_json(text: str) -> Efsm:
    """Parse a model file produced by :func:`machine_to_json`."""
    obj = json.loads(text)
    if not isinstance(obj, dict):
        raise ValueError("model file must contain a JSON object")
    unknown = set(obj) - {"states", "initial", "finals", "transitions"}
    if unknown:
        raise ValueError(f"model file has unknown fields {sorted(unknown)}")
    transitions = []
    for i, t in enumerate(obj.get("transitions", [])):
        unknown = set(t) - {"from", "label", "params", "open", "to"}
        if unknown:
            raise ValueError(f"transition {i} has unknown fields {sorted(unknown)}")
        guard = Guard(t["label"], frozenset(t.get("params", [])), bool(t.get("open", False)))
        transitions.append(Transition(t["from"], t["label"], guard, t["to"]))
    return Efsm(
        num_states=int(obj["states"]),
        initial=int(obj.get("initial", 0)),
        finals=frozenset(obj.get("finals", [])),
        transitions=tuple(transitions),
    )


def save_model(machine: Efsm, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(machine_to_json(machine))


def load_model(path) -> Efsm:
    with open(path, "r", encoding="utf-8") as fh:
        return machine_from_json(fh.read())
