import json
import sys
from pathlib import Path

import pytest

from tacinfer.prover import (
    BUILTIN_BASELINE_SENTENCE,
    BackendUnavailable,
    FixtureError,
    MockBackend,
    MockWorld,
    NothingToUndo,
    OutcomeKind,
    SessionDead,
    SubprocessBackend,
    SubprocessConfig,
    TacticTimeout,
    UnknownLemma,
    load_backend,
    run_builtin_baseline,
    start_session,
)

FAKE_PROVER = Path(__file__).parent / "fake_prover.py"


@pytest.fixture
def world() -> MockWorld:
    return MockWorld(
        initial={"l1": 0, "l2": 5},
        transitions={(0, "auto."): 9, (0, "intros."): 1, (1, "auto."): 9, (5, "trivial."): 9},
        complete_goal=9,
        baseline_provable=frozenset(["l1"]),
    )


@pytest.fixture
def backend(world) -> MockBackend:
    return MockBackend(world)


def fake_config(**overrides) -> SubprocessConfig:
    base = dict(
        command=(sys.executable, str(FAKE_PROVER)),
        prompt_pattern=r"^fp < $",
        tactic_timeout=5.0,
        quit_command="Quit.",
    )
    base.update(overrides)
    return SubprocessConfig.from_dict(base)


class TestMockBackend:
    def test_start_at_initial_goal(self, backend):
        session = start_session(backend, "l1", "Lemma l1 : True.")
        assert session.status.value == "open"
        assert session.applied == []
        assert session._bs.current_goal == 0

    def test_unknown_lemma(self, backend):
        with pytest.raises(UnknownLemma):
            start_session(backend, "zz")

    def test_complete_outcome(self, backend):
        session = start_session(backend, "l1")
        outcome = session.apply_tactic("auto.")
        assert outcome.kind is OutcomeKind.COMPLETE
        assert session.status.value == "complete"
        assert session.applied == ["auto."]

    def test_failure_rolls_back(self, backend):
        session = start_session(backend, "l1")
        outcome = session.apply_tactic("foo.")
        assert outcome.kind is OutcomeKind.FAILURE
        assert session._bs.current_goal == 0
        assert session.applied == []
        # probe: the same tactic sequence still works after the failure
        assert session.apply_tactic("intros.").kind is OutcomeKind.PROGRESS
        assert session.apply_tactic("auto.").kind is OutcomeKind.COMPLETE

    def test_apply_after_complete_rejected(self, backend):
        session = start_session(backend, "l1")
        session.apply_tactic("auto.")
        with pytest.raises(SessionDead):
            session.apply_tactic("auto.")

    def test_undo_after_apply_is_identity(self, backend):
        session = start_session(backend, "l1")
        session.apply_tactic("intros.")
        session.undo()
        assert session.applied == []
        assert session._bs.current_goal == 0

    def test_two_applies_one_undo(self, backend):
        session = start_session(backend, "l1")
        session.apply_tactic("intros.")
        assert session.apply_tactic("auto.").is_complete
        # complete sessions refuse undo; use a fresh one for the count check
        session = start_session(backend, "l1")
        session.apply_tactic("intros.")
        session.undo()
        session.apply_tactic("intros.")
        assert session.applied == ["intros."]

    def test_undo_on_fresh_session(self, backend):
        session = start_session(backend, "l1")
        with pytest.raises(NothingToUndo):
            session.undo()

    def test_restore_moves_between_paths(self, backend):
        session = start_session(backend, "l1")
        session.apply_tactic("intros.")
        session.restore([])
        assert session._bs.current_goal == 0
        session.restore(["intros."])
        assert session._bs.current_goal == 1
        assert session.applied == ["intros."]

    def test_determinism(self, world):
        outcomes = []
        for _ in range(2):
            session = start_session(MockBackend(world), "l1")
            outcomes.append(
                (session.apply_tactic("foo.").kind, session.apply_tactic("auto.").kind)
            )
        assert outcomes[0] == outcomes[1]

    def test_baseline_configured_answers(self, backend):
        assert run_builtin_baseline(backend, "l1") is True
        assert run_builtin_baseline(backend, "l2") is False


class TestMockFixture:
    def test_complete_goal_must_be_terminal(self):
        with pytest.raises(FixtureError):
            MockWorld(initial={"l": 0}, transitions={(9, "auto."): 0}, complete_goal=9)

    def test_from_dict_round_trip(self, tmp_path, world):
        fixture = {
            "initial": {"l1": 0, "l2": 5},
            "transitions": [[0, "auto.", 9], [0, "intros.", 1], [1, "auto.", 9], [5, "trivial.", 9]],
            "complete": 9,
            "baseline_provable": ["l1"],
        }
        path = tmp_path / "fix.json"
        path.write_text(json.dumps(fixture))
        loaded = MockBackend.from_file(path)
        assert loaded.world == world

    def test_unknown_fields_rejected(self):
        with pytest.raises(FixtureError):
            MockWorld.from_dict({"initial": {}, "transitions": [], "complete": 0, "x": 1})

    def test_nondeterministic_rows_rejected(self):
        with pytest.raises(FixtureError):
            MockWorld.from_dict(
                {
                    "initial": {"l": 0},
                    "transitions": [[0, "auto.", 1], [0, "auto.", 2]],
                    "complete": 9,
                }
            )

    def test_load_backend_spec(self, tmp_path):
        path = tmp_path / "fix.json"
        path.write_text(json.dumps({"initial": {"l": 0}, "transitions": [], "complete": 9}))
        assert isinstance(load_backend(f"mock:{path}"), MockBackend)
        with pytest.raises(ValueError):
            load_backend("nonsense")
        with pytest.raises(ValueError):
            load_backend(f"weird:{path}")


class TestSubprocessBackend:
    def test_statement_required(self):
        backend = SubprocessBackend(fake_config())
        with pytest.raises(BackendUnavailable):
            backend.start("l1", "")

    def test_handshake_and_progress(self):
        backend = SubprocessBackend(fake_config())
        session = start_session(backend, "l1", "Lemma l1 : True.")
        try:
            outcome = session.apply_tactic("push.")
            assert outcome.kind is OutcomeKind.PROGRESS
            assert "depth 1" in outcome.message
        finally:
            session.close()

    def test_complete_classification(self):
        backend = SubprocessBackend(fake_config())
        session = start_session(backend, "l1", "Lemma l1 : True.")
        try:
            assert session.apply_tactic("finish.").kind is OutcomeKind.COMPLETE
        finally:
            session.close()

    def test_failure_classification(self):
        backend = SubprocessBackend(fake_config())
        session = start_session(backend, "l1", "Lemma l1 : True.")
        try:
            outcome = session.apply_tactic("boom.")
            assert outcome.kind is OutcomeKind.FAILURE
            assert "boom" in outcome.message
        finally:
            session.close()

    def test_undo_round_trip(self):
        backend = SubprocessBackend(fake_config())
        session = start_session(backend, "l1", "Lemma l1 : True.")
        try:
            session.apply_tactic("push.")
            session.apply_tactic("push.")
            session.undo()
            outcome = session.apply_tactic("peek.")
            assert "depth 1" in outcome.message
        finally:
            session.close()

    def test_tactic_timeout_kills_session(self):
        backend = SubprocessBackend(fake_config(tactic_timeout=0.4))
        session = start_session(backend, "l1", "Lemma l1 : True.")
        with pytest.raises(TacticTimeout):
            session.apply_tactic("slow.")
        assert session.status.value == "dead"
        with pytest.raises(SessionDead):
            session.apply_tactic("peek.")

    def test_bad_statement_rejected(self):
        backend = SubprocessBackend(fake_config())
        with pytest.raises(BackendUnavailable):
            backend.start("l1", "gibberish statement")

    def test_missing_binary(self):
        backend = SubprocessBackend(fake_config(command=("/nonexistent/prover",)))
        with pytest.raises(BackendUnavailable):
            backend.start("l1", "Lemma l1 : True.")

    def test_prover_exiting_immediately(self):
        backend = SubprocessBackend(fake_config(command=("true",)))
        with pytest.raises(BackendUnavailable):
            backend.start("l1", "Lemma l1 : True.")

    def test_prover_that_never_prompts(self):
        cfg = fake_config(command=("sleep", "30"), start_timeout=0.3)
        backend = SubprocessBackend(cfg)
        with pytest.raises(BackendUnavailable):
            backend.start("l1", "Lemma l1 : True.")

    def test_baseline_loses_by_default(self):
        backend = SubprocessBackend(fake_config())
        assert run_builtin_baseline(backend, "l1", "Lemma l1 : True.") is False

    def test_baseline_wins_when_prover_cooperates(self):
        cfg = fake_config(command=(sys.executable, str(FAKE_PROVER), "--baseline-wins"))
        backend = SubprocessBackend(cfg)
        assert run_builtin_baseline(backend, "l1", "Lemma l1 : True.") is True

    def test_builtin_baseline_sentence_text(self):
        assert BUILTIN_BASELINE_SENTENCE == (
            "auto with * || eauto with * || tauto || firstorder || trivial."
        )

    def test_config_unknown_fields(self):
        with pytest.raises(ValueError):
            SubprocessConfig.from_dict({"command": ["x"], "prompt_pattern": "p", "zzz": 1})
