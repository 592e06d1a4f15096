"""Pluggable prover backends and session management.

Two backends speak the same small interface:

* :class:`MockBackend` - a deterministic goal-id transition table loaded from
  a JSON fixture. It stands in for the prover in tests and lets planted-proof
  pipelines run end to end with no prover installed.
* :class:`SubprocessBackend` - a line-protocol adapter for a prompt-driven
  interactive prover. The engine writes one tactic sentence (terminated by
  ".") per line, reads until the prover's ready prompt, and classifies the
  output: a line matching an error pattern means Failure, output matching a
  completion pattern means Complete, anything else Progress. Prompt,
  error/completion patterns, and the backtrack command are all configurable,
  so any prompt-driven prover can be adapted.

A failing tactic never changes session state (the prover rolls back), and a
session supports ``undo`` so a breadth-first search can share prefixes
without restarting the prover per node.
"""
from __future__ import annotations

import json
import queue
import re
import subprocess
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Protocol, Sequence

BUILTIN_BASELINE_SENTENCE = (
    "auto with * || eauto with * || tauto || firstorder || trivial."
)


class BackendError(RuntimeError):
    """Prover backend misbehaved or broke protocol."""


class BackendUnavailable(BackendError):
    """Backend could not be started or lost its process."""


class UnknownLemma(KeyError):
    """Mock backend has no initial goal for the requested lemma."""


class SessionDead(RuntimeError):
    """Operation on a session that is no longer open."""


class NothingToUndo(RuntimeError):
    """Undo on a session with no applied tactics."""


class TacticTimeout(TimeoutError):
    """Per-tactic wall-clock limit exceeded; the session is dead."""


class FixtureError(ValueError):
    """Mock fixture file does not match the expected schema."""


class OutcomeKind(Enum):
    PROGRESS = "progress"
    COMPLETE = "complete"
    FAILURE = "failure"


@dataclass(frozen=True)
class TacticOutcome:
    kind: OutcomeKind
    message: str = ""

    @property
    def is_complete(self) -> bool:
        return self.kind is OutcomeKind.COMPLETE

    @property
    def is_failure(self) -> bool:
        return self.kind is OutcomeKind.FAILURE


class BackendSession(Protocol):
    """Per-session handle owned by a ProverSession."""

    def apply(self, sentence: str) -> TacticOutcome: ...

    def undo_last(self) -> None: ...

    def close(self) -> None: ...


class SessionStatus(Enum):
    OPEN = "open"
    COMPLETE = "complete"
    DEAD = "dead"


class ProverSession:
    """One lemma being proved interactively.

    ``applied`` grows only through :meth:`apply_tactic` outcomes that move
    the proof forward; a Failure outcome leaves the session exactly as it
    was. :meth:`restore` is bookkeeping for prefix-sharing search - it
    replays known-good sentences after undos and is not an evaluation.
    """

    def __init__(self, backend_session, lemma_name: str, lemma_statement: str = ""):
        self._bs = backend_session
        self.lemma_name = lemma_name
        self.lemma_statement = lemma_statement
        self.applied: list[str] = []
        self.status = SessionStatus.OPEN

    def _require_open(self):
        if self.status is not SessionStatus.OPEN:
            raise SessionDead(f"session for {self.lemma_name!r} is {self.status.value}")

    def apply_tactic(self, sentence: str) -> TacticOutcome:
        """Apply one complete tactic sentence; one budget unit per call."""
        self._require_open()
        try:
            outcome = self._bs.apply(sentence)
        except TacticTimeout:
            self.status = SessionStatus.DEAD
            raise
        if outcome.kind is OutcomeKind.COMPLETE:
            self.applied.append(sentence)
            self.status = SessionStatus.COMPLETE
        elif outcome.kind is OutcomeKind.PROGRESS:
            self.applied.append(sentence)
        return outcome

    def undo(self) -> None:
        """Remove the last applied sentence, restoring the prior prover state."""
        self._require_open()
        if not self.applied:
            raise NothingToUndo(self.lemma_name)
        self._bs.undo_last()
        self.applied.pop()

    def restore(self, target: Sequence[str]) -> None:
        """Undo/replay until ``applied`` equals ``target``.

        Every replayed sentence must come back as Progress (they did before);
        anything else means the backend is not deterministic and the search
        bookkeeping would be unsound.
        """
        self._require_open()
        common = 0
        for mine, wanted in zip(self.applied, target):
            if mine != wanted:
                break
            common += 1
        while len(self.applied) > common:
            self.undo()
        for sentence in list(target[common:]):
            outcome = self._bs.apply(sentence)
            if outcome.kind is not OutcomeKind.PROGRESS:
                raise BackendError(
                    f"replay of {sentence!r} diverged: {outcome.kind.value}"
                )
            self.applied.append(sentence)

    def close(self) -> None:
        self._bs.close()
        if self.status is SessionStatus.OPEN:
            self.status = SessionStatus.DEAD


def start_session(backend, lemma_name: str, lemma_statement: str = "") -> ProverSession:
    """State a lemma on the backend and return the open session."""
    return ProverSession(backend.start(lemma_name, lemma_statement), lemma_name, lemma_statement)


def run_builtin_baseline(backend, lemma_name: str, lemma_statement: str = "") -> bool:
    """True iff the single combined built-in command proves the lemma."""
    return backend.run_builtin_baseline(lemma_name, lemma_statement)


# ---------------------------------------------------------------------------
# Mock backend


@dataclass(frozen=True)
class MockWorld:
    """Deterministic goal-id transition table standing in for a prover.

    Fixture schema: ``{"initial": {lemma: goal}, "transitions":
    [[goal, tactic, goal'], ...], "complete": goal, "baseline_provable":
    [lemma, ...]}``. The complete goal has no outgoing transitions.
    """

    initial: dict
    transitions: dict
    complete_goal: int
    baseline_provable: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self):
        for (goal, _), _dst in self.transitions.items():
            if goal == self.complete_goal:
                raise FixtureError("complete goal must have no outgoing transitions")

    @classmethod
    def from_dict(cls, obj: dict) -> "MockWorld":
        if not isinstance(obj, dict):
            raise FixtureError("fixture must be a JSON object")
        unknown = set(obj) - {"initial", "transitions", "complete", "baseline_provable"}
        if unknown:
            raise FixtureError(f"fixture has unknown fields {sorted(unknown)}")
        try:
            initial = {str(k): int(v) for k, v in obj["initial"].items()}
            complete = int(obj["complete"])
        except (KeyError, TypeError, ValueError) as exc:
            raise FixtureError(f"bad fixture: {exc}") from None
        transitions = {}
        for row in obj.get("transitions", []):
            if not (isinstance(row, (list, tuple)) and len(row) == 3):
                raise FixtureError(f"bad transition row {row!r}")
            goal, tactic, dst = int(row[0]), str(row[1]), int(row[2])
            if (goal, tactic) in transitions and transitions[(goal, tactic)] != dst:
                raise FixtureError(f"nondeterministic transition on {(goal, tactic)!r}")
            transitions[(goal, tactic)] = dst
        baseline = frozenset(str(x) for x in obj.get("baseline_provable", []))
        return cls(initial, transitions, complete, baseline)

    @classmethod
    def from_file(cls, path) -> "MockWorld":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


class _MockSession:
    def __init__(self, world: MockWorld, goal: int):
        self.world = world
        self.goals = [goal]

    @property
    def current_goal(self) -> int:
        return self.goals[-1]

    def apply(self, sentence: str) -> TacticOutcome:
        dst = self.world.transitions.get((self.current_goal, sentence))
        if dst is None:
            return TacticOutcome(OutcomeKind.FAILURE, f"no step for {sentence!r}")
        self.goals.append(dst)
        if dst == self.world.complete_goal:
            return TacticOutcome(OutcomeKind.COMPLETE, "No more subgoals.")
        return TacticOutcome(OutcomeKind.PROGRESS, f"goal {dst}")

    def undo_last(self) -> None:
        self.goals.pop()

    def close(self) -> None:
        pass


class MockBackend:
    """In-process deterministic backend driven by a :class:`MockWorld`."""

    def __init__(self, world: MockWorld):
        self.world = world

    @classmethod
    def from_file(cls, path) -> "MockBackend":
        return cls(MockWorld.from_file(path))

    def start(self, lemma_name: str, lemma_statement: str = "") -> _MockSession:
        if lemma_name not in self.world.initial:
            raise UnknownLemma(lemma_name)
        return _MockSession(self.world, self.world.initial[lemma_name])

    def run_builtin_baseline(self, lemma_name: str, lemma_statement: str = "") -> bool:
        return lemma_name in self.world.baseline_provable


# ---------------------------------------------------------------------------
# Subprocess backend


@dataclass(frozen=True)
class SubprocessConfig:
    """Wire-protocol settings for a prompt-driven interactive prover."""

    command: tuple[str, ...]
    prompt_pattern: str
    error_patterns: tuple[str, ...] = ("^Error",)
    complete_patterns: tuple[str, ...] = ("No more subgoals", "Proof completed")
    undo_command: str = "Undo 1."
    quit_command: str | None = None
    prelude: tuple[str, ...] = ()
    tactic_timeout: float = 5.0
    start_timeout: float = 10.0

    @classmethod
    def from_dict(cls, obj: dict) -> "SubprocessConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(obj) - known
        if unknown:
            raise ValueError(f"backend config has unknown fields {sorted(unknown)}")
        if "command" not in obj or "prompt_pattern" not in obj:
            raise ValueError("backend config requires 'command' and 'prompt_pattern'")
        kwargs = dict(obj)
        kwargs["command"] = tuple(obj["command"])
        for key in ("error_patterns", "complete_patterns", "prelude"):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path) -> "SubprocessConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


class _SubprocessSession:
    """One prover process; reads are pumped by a thread so timeouts work."""

    def __init__(self, config: SubprocessConfig):
        self.config = config
        self.prompt = re.compile(config.prompt_pattern, re.MULTILINE)
        try:
            self.proc = subprocess.Popen(
                list(config.command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.STDOUT,
            )
        except OSError as exc:
            raise BackendUnavailable(f"cannot start {config.command[0]!r}: {exc}") from None
        self._chunks: queue.Queue = queue.Queue()
        self._buffer = ""
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()
        try:
            self._read_until_prompt(config.start_timeout)
        except TacticTimeout as exc:
            raise BackendUnavailable(f"no ready prompt from prover: {exc}") from None

    def _pump(self):
        while True:
            data = self.proc.stdout.read1(4096)
            if not data:
                self._chunks.put(b"")
                return
            self._chunks.put(data)

    def _read_until_prompt(self, timeout: float) -> str:
        deadline = time.monotonic() + timeout
        while True:
            m = self.prompt.search(self._buffer)
            if m:
                output = self._buffer[: m.start()]
                self._buffer = self._buffer[m.end():]
                return output
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                self._kill()
                raise TacticTimeout(f"no prompt within {timeout:.1f}s")
            try:
                data = self._chunks.get(timeout=remaining)
            except queue.Empty:
                self._kill()
                raise TacticTimeout(f"no prompt within {timeout:.1f}s") from None
            if data == b"":
                raise BackendUnavailable("prover process closed its output")
            self._buffer += data.decode("utf-8", errors="replace")

    def _send(self, line: str) -> None:
        if self.proc.poll() is not None:
            raise BackendUnavailable("prover process has exited")
        self.proc.stdin.write((line + "\n").encode("utf-8"))
        self.proc.stdin.flush()

    def _classify(self, output: str) -> TacticOutcome:
        for line in output.splitlines():
            for pattern in self.config.error_patterns:
                if re.search(pattern, line):
                    return TacticOutcome(OutcomeKind.FAILURE, line.strip())
        for pattern in self.config.complete_patterns:
            if re.search(pattern, output):
                return TacticOutcome(OutcomeKind.COMPLETE, output.strip())
        return TacticOutcome(OutcomeKind.PROGRESS, output.strip())

    def command(self, line: str, timeout: float | None = None) -> TacticOutcome:
        self._send(line)
        output = self._read_until_prompt(timeout or self.config.tactic_timeout)
        return self._classify(output)

    def apply(self, sentence: str) -> TacticOutcome:
        return self.command(sentence)

    def undo_last(self) -> None:
        outcome = self.command(self.config.undo_command)
        if outcome.is_failure:
            raise BackendError(f"backtrack command failed: {outcome.message}")

    def _kill(self):
        try:
            self.proc.kill()
        except OSError:
            pass

    def close(self) -> None:
        if self.proc.poll() is None:
            if self.config.quit_command:
                try:
                    self._send(self.config.quit_command)
                    self.proc.wait(timeout=2)
                except (BackendUnavailable, subprocess.TimeoutExpired):
                    pass
        self._kill()


class SubprocessBackend:
    """Spawns one prover process per session."""

    def __init__(self, config: SubprocessConfig):
        self.config = config

    @classmethod
    def from_file(cls, path) -> "SubprocessBackend":
        return cls(SubprocessConfig.from_file(path))

    def start(self, lemma_name: str, lemma_statement: str = "") -> _SubprocessSession:
        if not lemma_statement.strip():
            raise BackendUnavailable("subprocess backend needs the lemma statement text")
        session = _SubprocessSession(self.config)
        statement = lemma_statement.strip()
        if not statement.endswith("."):
            statement += "."
        try:
            for line in self.config.prelude:
                outcome = session.command(line, self.config.start_timeout)
                if outcome.is_failure:
                    raise BackendUnavailable(f"prelude command failed: {outcome.message}")
            outcome = session.command(statement, self.config.start_timeout)
        except TacticTimeout as exc:
            raise BackendUnavailable(f"prover did not acknowledge the statement: {exc}") from None
        if outcome.is_failure:
            session.close()
            raise BackendUnavailable(f"could not state lemma: {outcome.message}")
        return session

    def run_builtin_baseline(self, lemma_name: str, lemma_statement: str = "") -> bool:
        session = self.start(lemma_name, lemma_statement)
        try:
            outcome = session.apply(BUILTIN_BASELINE_SENTENCE)
            return outcome.is_complete
        finally:
            session.close()


def load_backend(spec: str):
    """Build a backend from a "mock:fixture.json" / "subprocess:config.json" spec."""
    kind, sep, path = spec.partition(":")
    if not sep or not path:
        raise ValueError(f"backend spec {spec!r} must look like 'mock:fixture.json'")
    path = str(Path(path))
    if kind == "mock":
        return MockBackend.from_file(path)
    if kind == "subprocess":
        return SubprocessBackend.from_file(path)
    raise ValueError(f"unknown backend kind {kind!r} (expected 'mock' or 'subprocess')")
