import random

import pytest

from tacinfer import _kernel
from tacinfer.traces import Corpus, Trace, TraceElement

# Golden worked example: one lemma, four sentences, eight events.
EXAMPLE_SCRIPT = """\
Lemma le_antisym : forall n m, n <= m -> m <= n -> n = m.
Proof.
intros n m H;
destruct H as [|m' H];
auto with arith.
intros H1.
absurd (S m' <= m');
auto with arith.
apply le_trans with n;
auto with arith.
Qed.
"""

EXAMPLE_EVENTS = [
    ("intros", "n m H;"),
    ("destruct", "H as [|m' H];"),
    ("auto", "with arith"),
    ("intros", "H1"),
    ("absurd", "(S m' <= m');"),
    ("auto", "with arith"),
    ("apply", "le_trans with n;"),
    ("auto", "with arith"),
]


@pytest.fixture
def example_script() -> str:
    return EXAMPLE_SCRIPT


@pytest.fixture
def example_events() -> list:
    return list(EXAMPLE_EVENTS)


def label_trace(name: str, labels: str, params: str = "", theory: str = "t") -> Trace:
    """Trace with one element per character of ``labels``."""
    return Trace(name, tuple(TraceElement(l, params) for l in labels), theory)


def pair_trace(name: str, pairs, theory: str = "t") -> Trace:
    return Trace(name, tuple(TraceElement(l, p) for l, p in pairs), theory)


def random_corpus(
    rng: random.Random,
    max_traces: int = 20,
    max_elements: int = 8,
    alphabet: int = 5,
    params_pool: tuple = ("", "x", "with arith"),
) -> Corpus:
    """Random corpus within the desk-scale bounds used by the acceptance
    criteria: <= 20 traces of <= 8 elements over <= 5 labels."""
    labels = [f"t{i}" for i in range(rng.randint(1, alphabet))]
    n_traces = rng.randint(1, max_traces)
    traces = []
    for i in range(n_traces):
        length = rng.randint(0, max_elements)
        elements = tuple(
            TraceElement(rng.choice(labels), rng.choice(params_pool))
            for _ in range(length)
        )
        traces.append(Trace(f"lemma{i}", elements, "rand"))
    return Corpus(tuple(traces))


# ---------------------------------------------------------------------------
# Search-oracle helpers: exhaustive path enumeration plus a planted mock,
# independent of the search implementation.


def enumerate_model_paths(machine, max_elements: int):
    """Every (label, param) path from the initial state up to max_elements."""
    paths = []

    def walk(state, path):
        if path:
            paths.append(tuple(path))
        if len(path) >= max_elements:
            return
        for t in machine.transitions:
            if t.src != state:
                continue
            for p in sorted(t.guard.allowed_params):
                walk(t.dst, path + [(t.label, p)])

    walk(machine.initial, [])
    return paths


def compose_path(path) -> list | None:
    """Sentence list for an element path, or None when it dangles mid-';'."""
    sentences, frag = [], ""
    for label, param in path:
        piece = f"{label} {param}" if param else label
        frag = f"{frag} {piece}" if frag else piece
        if not param.endswith(";"):
            sentences.append(frag + ".")
            frag = ""
    if frag:
        return None
    return sentences


def oracle_min_proof_elements(machine, world, lemma: str, max_elements: int):
    """Minimum element count over model paths whose sentences drive the mock
    from the lemma's initial goal to completion exactly at the path's end."""
    best = None
    start = world.initial[lemma]
    for path in enumerate_model_paths(machine, max_elements):
        sentences = compose_path(path)
        if not sentences:
            continue
        goal = start
        ok = True
        for sentence in sentences:
            goal = world.transitions.get((goal, sentence))
            if goal is None:
                ok = False
                break
        if ok and goal == world.complete_goal:
            best = len(path) if best is None else min(best, len(path))
    return best


def plant_mock(sentence_seqs, lemma: str = "goal", complete: int = 999983):
    """Deterministic trie over sentence sequences; maximal sequences whose
    trie node has no children are wired to the complete goal."""
    from tacinfer.prover import MockWorld

    nodes = {(): 0}
    transitions = {}
    seqs = [tuple(s) for s in sentence_seqs if s]
    for seq in seqs:
        cur = ()
        for sentence in seq:
            nxt = cur + (sentence,)
            if nxt not in nodes:
                nodes[nxt] = len(nodes)
            transitions[(nodes[cur], sentence)] = nodes[nxt]
            cur = nxt
    for seq in seqs:
        node = nodes[seq]
        if any(src == node for (src, _s) in transitions):
            continue  # another planted sequence extends this one
        transitions[(nodes[seq[:-1]], seq[-1])] = complete
    return MockWorld(initial={lemma: 0}, transitions=transitions, complete_goal=complete)


@pytest.fixture(params=["python", "cython"])
def kernel_impl(request):
    """Run a test under both kernel implementations."""
    name = request.param
    if name == "cython" and not _kernel.have_compiled_kernel():
        pytest.skip("compiled kernel not built")
    previous = _kernel.active_kernel()
    _kernel.set_kernel(name)
    yield name
    _kernel.set_kernel(previous)
