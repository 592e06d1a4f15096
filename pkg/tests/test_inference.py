import random

import pytest

from conftest import label_trace, pair_trace, random_corpus
from tacinfer.efsm import accepts, build_prefix_tree
from tacinfer.inference import (
    InferenceConfig,
    MergeCandidate,
    infer,
    language_is_superset,
    merge_states,
    score_pair,
)
from tacinfer.traces import Corpus
from test_efsm import oracle_accepts


def oracle_tails(machine, state, k):
    """Independent tail enumeration by plain recursion over transitions."""
    if k == 0:
        return set()
    seqs = set()
    for t in machine.transitions:
        if t.src != state:
            continue
        seqs.add((t.label,))
        for rest in oracle_tails(machine, t.dst, k - 1):
            seqs.add((t.label,) + rest)
    return seqs


def is_label_deterministic(machine) -> bool:
    seen = set()
    for t in machine.transitions:
        if (t.src, t.label) in seen:
            return False
        seen.add((t.src, t.label))
    return True


def has_cycle(machine) -> bool:
    out = {}
    for t in machine.transitions:
        out.setdefault(t.src, []).append(t.dst)
    WHITE, GREY, BLACK = 0, 1, 2
    color = [WHITE] * machine.num_states
    def visit(s):
        color[s] = GREY
        for d in out.get(s, ()):
            if color[d] == GREY or (color[d] == WHITE and visit(d)):
                return True
        color[s] = BLACK
        return False
    return any(color[s] == WHITE and visit(s) for s in range(machine.num_states))


class TestScorePair:
    def test_shared_single_tail(self):
        m = build_prefix_tree(Corpus((label_trace("l1", "xa"), label_trace("l2", "ya"))))
        # states 1 and 2 (after x / after y) each have a single outgoing "a"
        mid = sorted({t.src for t in m.transitions if t.label == "a"})
        assert len(mid) == 2
        assert score_pair(m, mid[0], mid[1], 1) == 1

    def test_partial_overlap_counts_shared_sequences(self):
        corpus = Corpus(
            (
                label_trace("l1", "pi"), label_trace("l2", "pa"),
                label_trace("l3", "qa"), label_trace("l4", "qr"),
            )
        )
        m = build_prefix_tree(corpus)
        a = next(t.dst for t in m.transitions if t.src == 0 and t.label == "p")
        b = next(t.dst for t in m.transitions if t.src == 0 and t.label == "q")
        expected = len(oracle_tails(m, a, 1) & oracle_tails(m, b, 1))
        assert expected == 1  # {i,a} & {a,r} = {a}
        assert score_pair(m, a, b, 1) == expected

    def test_terminal_conflict_is_incompatible(self):
        # 2 is the final leaf of "ab"; build a machine with a non-final leaf
        # by merging... simpler: hand state: final leaf vs non-final leaf.
        from tacinfer.efsm import Efsm, Guard, Transition

        g = Guard("a", frozenset([""]))
        m = Efsm(3, 0, frozenset([1]), (Transition(0, "a", g, 1), Transition(0, "b", Guard("b", frozenset([""])), 2)))
        assert score_pair(m, 1, 2, 1) is None
        assert score_pair(m, 2, 1, 1) is None

    def test_final_vs_nonfinal_with_outgoing_is_scored(self):
        m = build_prefix_tree(Corpus((label_trace("l1", "ab"), label_trace("l2", "a"))))
        # state 1 is final (end of "a") and has outgoing "b"; state 0 non-final
        assert 1 in m.finals
        assert score_pair(m, 0, 1, 1) is not None

    def test_matches_oracle_on_random_machines(self):
        rng = random.Random(31)
        for _ in range(40):
            corpus = random_corpus(rng, max_traces=8, max_elements=6)
            m = build_prefix_tree(corpus)
            for _ in range(10):
                a = rng.randrange(m.num_states)
                b = rng.randrange(m.num_states)
                if a == b:
                    continue
                for k in (0, 1, 2):
                    got = score_pair(m, a, b, k)
                    if got is None:
                        continue
                    assert got == len(oracle_tails(m, a, k) & oracle_tails(m, b, k))

    def test_k_zero_score_is_zero(self):
        m = build_prefix_tree(Corpus((label_trace("l1", "ab"),)))
        assert score_pair(m, 0, 1, 0) == 0

    def test_merge_candidate_invariants(self):
        with pytest.raises(ValueError):
            MergeCandidate(red=1, blue=1, score=0)
        with pytest.raises(ValueError):
            MergeCandidate(red=0, blue=1, score=-1)


class TestMergeStates:
    def test_chain_with_identical_labels_folds_to_self_loop(self):
        # hand simulation: 0-x->1-x->2(final); merge(0,1) redirects to give
        # 0-x->0 and 0-x->2, fold merges 0 and 2, leaving one looping state.
        chain = build_prefix_tree(Corpus((label_trace("l", "xx"),)))
        merged = merge_states(chain, 0, 1)
        assert merged is not None
        assert merged.num_states <= 2
        assert merged.num_states == 1
        assert accepts(merged, label_trace("p", "xx"))
        assert accepts(merged, label_trace("p2", "xxxxx"))

    def test_leaf_merge_preserves_training(self):
        corpus = Corpus((label_trace("l1", "ab"), label_trace("l2", "cb")))
        m = build_prefix_tree(corpus)
        leaves = sorted(m.finals)
        merged = merge_states(m, leaves[0], leaves[1], training=corpus)
        assert merged is not None
        for t in corpus.traces:
            assert accepts(merged, t)
            assert oracle_accepts(merged, t)

    def test_disjoint_labels_merge_is_simple_union(self):
        corpus = Corpus((label_trace("l1", "ab"), label_trace("l2", "cd")))
        m = build_prefix_tree(corpus)
        a = next(t.dst for t in m.transitions if t.src == 0 and t.label == "a")
        c = next(t.dst for t in m.transitions if t.src == 0 and t.label == "c")
        merged = merge_states(m, a, c, training=corpus)
        assert merged is not None
        assert merged.num_states == m.num_states - 1
        assert language_is_superset(merged, corpus)

    def test_merge_with_self_rejected(self):
        m = build_prefix_tree(Corpus((label_trace("l", "a"),)))
        with pytest.raises(ValueError):
            merge_states(m, 0, 0)

    def test_guard_conflict_signalled_for_foreign_corpus(self):
        m = build_prefix_tree(Corpus((label_trace("l1", "ab"),)))
        foreign = Corpus((label_trace("other", "zz"),))
        assert merge_states(m, 1, 2, training=foreign) is None

    def test_guards_union_on_fold(self):
        corpus = Corpus(
            (
                pair_trace("l1", [("a", "x"), ("b", "")]),
                pair_trace("l2", [("a", "y"), ("b", "")]),
            )
        )
        m = build_prefix_tree(corpus)
        targets = sorted(t.dst for t in m.transitions if t.src == 0)
        merged = merge_states(m, targets[0], targets[1], training=corpus)
        assert merged is not None
        edge = next(t for t in merged.transitions if t.src == 0 and t.label == "a")
        assert edge.guard.allowed_params == frozenset(["x", "y"])
        assert not edge.guard.open

    def test_open_threshold_trips(self):
        # four same-label sibling edges; the first merge folds the machine
        # label-deterministic, unioning all four params past the threshold
        traces = tuple(
            pair_trace(f"l{i}", [("a", f"p{i}"), ("b", "")]) for i in range(4)
        )
        corpus = Corpus(traces)
        m = build_prefix_tree(corpus)
        targets = sorted(t.dst for t in m.transitions if t.src == 0)
        merged = merge_states(m, targets[0], targets[1], open_threshold=3)
        assert merged is not None
        edges = [t for t in merged.transitions if t.src == 0 and t.label == "a"]
        assert len(edges) == 1
        assert edges[0].guard.allowed_params == frozenset(["p0", "p1", "p2", "p3"])
        assert edges[0].guard.open

    def test_open_threshold_not_tripped_at_boundary(self):
        traces = tuple(
            pair_trace(f"l{i}", [("a", f"p{i}"), ("b", "")]) for i in range(4)
        )
        corpus = Corpus(traces)
        m = build_prefix_tree(corpus)
        targets = sorted(t.dst for t in m.transitions if t.src == 0)
        merged = merge_states(m, targets[0], targets[1], open_threshold=4)
        edge = next(t for t in merged.transitions if t.src == 0 and t.label == "a")
        assert not edge.guard.open  # union size 4 does not exceed 4


class TestInfer:
    def test_single_trace_containment(self):
        corpus = Corpus((pair_trace("l", [("intros", ""), ("auto", "with arith")]),))
        m = infer(corpus, InferenceConfig(k=1))
        assert accepts(m, corpus.traces[0])

    def test_ab_ac_promotes_to_prefix_tree(self):
        corpus = Corpus((label_trace("l1", "ab"), label_trace("l2", "ac")))
        assert infer(corpus, InferenceConfig(k=1)) == build_prefix_tree(corpus)

    def test_generalization_witness(self):
        corpus = Corpus((label_trace("l1", "ab"), label_trace("l2", "abab")))
        m = infer(corpus, InferenceConfig(k=1))
        assert accepts(m, label_trace("w", "ababab"))
        assert label_trace("w", "ababab").label_params_pairs() not in {
            t.label_params_pairs() for t in corpus.traces
        }

    def test_repeated_structure_creates_cycle(self):
        corpus = Corpus((label_trace("l1", "ab"), label_trace("l2", "abab")))
        m = infer(corpus, InferenceConfig(k=1))
        assert has_cycle(m)
        assert not has_cycle(build_prefix_tree(corpus))

    def test_empty_corpus_returns_trivial_tree(self):
        m = infer(Corpus(()), InferenceConfig())
        assert m.num_states == 1
        assert not m.transitions

    def test_witness_machine_exact_structure(self):
        # hand-traced: promote 1; merge 2 into 0 (shared 'a' tail) folds the
        # whole chain into a two-state loop with the initial state final
        corpus = Corpus((label_trace("l1", "ab"), label_trace("l2", "abab")))
        m = infer(corpus, InferenceConfig(k=1))
        assert m.num_states == 2
        assert m.initial == 0
        assert m.finals == frozenset([0])
        assert [(t.src, t.label, set(t.guard.allowed_params), t.dst) for t in m.transitions] == [
            (0, "a", {""}, 1),
            (1, "b", {""}, 0),
        ]

    def test_eight_event_chain_exact_structure(self, example_events):
        # Full hand simulation of the red-blue loop on the worked example's
        # single trace (k=1): states 1 and 2 promote; state 3 merges into 0
        # (shared intros tail), unioning the intros guards; the two remaining
        # auto-tail merges collapse every auto edge onto one looping state.
        # Canonical renumbering leaves: 0 final/initial with apply+intros
        # edges, 1 the auto-loop state, 2 the absurd/destruct branch state.
        corpus = Corpus((pair_trace("le_antisym", example_events, "Le"),))
        m = infer(corpus, InferenceConfig(k=1))
        assert m.num_states == 3
        assert m.initial == 0
        assert m.finals == frozenset([0])
        got = [
            (t.src, t.label, frozenset(t.guard.allowed_params), t.guard.open, t.dst)
            for t in m.transitions
        ]
        assert got == [
            (0, "apply", frozenset(["le_trans with n;"]), False, 1),
            (0, "intros", frozenset(["H1", "n m H;"]), False, 2),
            (1, "auto", frozenset(["with arith"]), False, 0),
            (2, "absurd", frozenset(["(S m' <= m');"]), False, 1),
            (2, "destruct", frozenset(["H as [|m' H];"]), False, 1),
        ]
        assert accepts(m, corpus.traces[0])

    def test_containment_and_compression_random(self):
        rng = random.Random(37)
        for _ in range(30):
            corpus = random_corpus(rng, max_traces=10, max_elements=6)
            tree = build_prefix_tree(corpus)
            for k in (0, 1, 2):
                m = infer(corpus, InferenceConfig(k=k))
                assert language_is_superset(m, corpus)
                assert m.num_states <= tree.num_states
                if m.num_states < tree.num_states:
                    assert is_label_deterministic(m)

    def test_deterministic(self):
        rng1, rng2 = random.Random(41), random.Random(41)
        c1 = random_corpus(rng1)
        c2 = random_corpus(rng2)
        assert infer(c1, InferenceConfig(k=1)) == infer(c2, InferenceConfig(k=1))

    def test_ktails_exhaustive_strategy(self):
        rng = random.Random(43)
        for _ in range(10):
            corpus = random_corpus(rng, max_traces=6, max_elements=5)
            cfg = InferenceConfig(strategy="ktails_exhaustive", k=1)
            m = infer(corpus, cfg)
            assert language_is_superset(m, corpus)
            assert m.num_states <= build_prefix_tree(corpus).num_states

    def test_redblue_never_bigger_than_exhaustive_tree(self):
        corpus = Corpus((label_trace("l1", "ab"), label_trace("l2", "abab")))
        rb = infer(corpus, InferenceConfig(strategy="redblue", k=1))
        ex = infer(corpus, InferenceConfig(strategy="ktails_exhaustive", k=1))
        for m in (rb, ex):
            assert language_is_superset(m, corpus)

    def test_max_states_hint_zero_disables_merging(self):
        corpus = Corpus((label_trace("l1", "ab"), label_trace("l2", "abab")))
        m = infer(corpus, InferenceConfig(k=1, max_states_hint=0))
        assert m == build_prefix_tree(corpus)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            InferenceConfig(strategy="greedy")
        with pytest.raises(ValueError):
            InferenceConfig(k=-1)


def reference_merge_fold(machine, a, b, open_threshold=8):
    """Independent merge oracle: the quotient of the machine by the smallest
    partition that contains {a, b} in one class and makes same-label edges
    from one class lead to one class. Computed by fixpoint iteration over
    explicit partition sets rather than union-find."""
    parts = [{s} for s in range(machine.num_states)]

    def class_of(parts, s):
        return next(i for i, c in enumerate(parts) if s in c)

    def union(parts, i, j):
        if i == j:
            return parts
        keep, drop = min(i, j), max(i, j)
        merged = [set(c) for c in parts]
        merged[keep] |= merged[drop]
        del merged[drop]
        return merged

    parts = union(parts, class_of(parts, a), class_of(parts, b))
    changed = True
    while changed:
        changed = False
        for ci in range(len(parts)):
            targets = {}
            for s in parts[ci]:
                for t in machine.transitions:
                    if t.src == s:
                        targets.setdefault(t.label, set()).add(class_of(parts, t.dst))
            for label, classes in targets.items():
                if len(classes) > 1:
                    classes = sorted(classes)
                    parts = union(parts, classes[0], classes[1])
                    changed = True
                    break
            if changed:
                break

    # quotient machine over the stable partition
    from tacinfer.efsm import Guard, Transition, canonicalize

    index = {s: i for i, c in enumerate(parts) for s in c}
    edges = {}
    for t in machine.transitions:
        key = (index[t.src], t.label)
        params, was_open, _ = edges.get(key, (set(), False, None))
        params |= t.guard.allowed_params
        was_open = was_open or t.guard.open
        edges[key] = (params, was_open, index[t.dst])
    transitions = [
        Transition(src, label, Guard(label, frozenset(params), o or len(params) > open_threshold), dst)
        for (src, label), (params, o, dst) in edges.items()
    ]
    finals = {index[f] for f in machine.finals}
    quotient, _ = canonicalize(
        range(len(parts)), index[machine.initial], finals, transitions
    )
    return quotient


class TestMergeFoldAgainstQuotientOracle:
    def test_random_prefix_trees(self):
        rng = random.Random(61)
        checked = 0
        for _ in range(60):
            corpus = random_corpus(rng, max_traces=6, max_elements=5)
            m = build_prefix_tree(corpus)
            if m.num_states < 2:
                continue
            a, b = rng.sample(range(m.num_states), 2)
            got = merge_states(m, a, b)
            expected = reference_merge_fold(m, a, b)
            assert got == expected
            checked += 1
        assert checked >= 40

    def test_random_general_machines(self):
        from test_kernel import random_machine

        rng = random.Random(67)
        for _ in range(60):
            m = random_machine(rng)
            if m.num_states < 2:
                continue
            a, b = rng.sample(range(m.num_states), 2)
            for threshold in (2, 8):
                got = merge_states(m, a, b, open_threshold=threshold)
                expected = reference_merge_fold(m, a, b, open_threshold=threshold)
                assert got == expected

    def test_worked_chain_quotient(self):
        chain = build_prefix_tree(Corpus((label_trace("l", "xx"),)))
        assert merge_states(chain, 0, 1) == reference_merge_fold(chain, 0, 1)


class TestLanguageIsSuperset:
    def test_prefix_tree_contains_its_corpus(self):
        corpus = Corpus((label_trace("l1", "ab"), label_trace("l2", "ac")))
        assert language_is_superset(build_prefix_tree(corpus), corpus)

    def test_detects_missing_edge(self):
        corpus = Corpus((label_trace("l1", "ab"), label_trace("l2", "ac")))
        m = build_prefix_tree(corpus)
        from tacinfer.efsm import Efsm

        cut = Efsm(m.num_states, m.initial, m.finals, m.transitions[:-1])
        assert not language_is_superset(cut, corpus)

    def test_holds_after_inference_many_random_corpora(self):
        rng = random.Random(47)
        for _ in range(50):
            corpus = random_corpus(rng, max_traces=8, max_elements=6)
            assert language_is_superset(infer(corpus, InferenceConfig(k=1)), corpus)
