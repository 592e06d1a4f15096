"""Proof-script and trace-file ingestion.

A proof is represented as a sequence of (label, params) events, one per
tactic invocation. Semicolon composition is preserved verbatim: an event whose
params ends with ";" was chained to its successor in the original script, so
the information survives into model inference and proof search.

The script lexer deliberately covers a small, well-defined subset: sentence
terminator ".", semicolon composition at bracket depth 0, nested ``(* ... *)``
comments, string literals with doubled-quote escapes, and bracketed intro
patterns. Bullets (-, +, *) and focus braces at sentence starts are dropped;
they carry no tactic content.
"""
from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

log = logging.getLogger(__name__)

THEOREM_KEYWORDS = frozenset(
    {"Lemma", "Theorem", "Fact", "Corollary", "Remark", "Proposition"}
)
_END_KEYWORDS = frozenset({"Qed", "Defined"})
_ABANDON_KEYWORDS = frozenset({"Admitted", "Abort"})
_MODIFIERS = frozenset({"Local", "Global"})

_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_']*")
_LABEL_RE = re.compile(r"[A-Za-z0-9_']+(?:\.[A-Za-z0-9_']+)*")

_OPENERS = "([{"
_CLOSERS = ")]}"


class ParseError(ValueError):
    """Malformed proof script or trace file."""

    def __init__(self, message: str, source: str = "", line: int = 0):
        self.source = source
        self.line = line
        where = f"{source or '<input>'}:{line}: " if line else (f"{source}: " if source else "")
        super().__init__(where + message)


class UnterminatedProof(ParseError):
    """A proof block was opened but never closed by Qed/Defined/Admitted."""


class EmptySentence(ParseError):
    """A tactic sentence (or one of its ';'-fragments) contains no tokens."""


class SchemaError(ValueError):
    """Trace file line does not match the expected JSON schema."""


@dataclass(frozen=True)
class TraceElement:
    """One tactic event: leading token plus remaining argument text.

    ``params`` keeps a trailing ";" exactly when the tactic was
    semicolon-composed with its successor in the source script.
    """

    label: str
    params: str = ""

    def __post_init__(self):
        if not self.label or any(c.isspace() for c in self.label):
            raise ValueError(f"invalid label {self.label!r}")
        if self.params and self.params[0].isspace():
            raise ValueError(f"params not left-trimmed: {self.params!r}")

    @property
    def composed(self) -> bool:
        """True when this element was ';'-chained to the next one."""
        return self.params.endswith(";")


@dataclass(frozen=True)
class Trace:
    """The proof of one lemma as an ordered event sequence."""

    lemma_name: str
    elements: tuple[TraceElement, ...]
    source_theory: str = ""

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))
        if self.elements and self.elements[-1].composed:
            raise ValueError(
                f"trace {self.lemma_name!r} ends mid-composition (trailing ';')"
            )

    def __len__(self) -> int:
        return len(self.elements)

    def label_params_pairs(self) -> tuple[tuple[str, str], ...]:
        return tuple((e.label, e.params) for e in self.elements)


@dataclass(frozen=True)
class Corpus:
    """An ordered collection of traces with unique lemma names.

    ``provenance`` records where the traces came from; it is IO metadata and
    excluded from equality so that serialisation round-trips compare equal.
    """

    traces: tuple[Trace, ...]
    provenance: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "traces", tuple(self.traces))
        object.__setattr__(self, "provenance", tuple(self.provenance))
        seen = set()
        for t in self.traces:
            if t.lemma_name in seen:
                raise ValueError(f"duplicate lemma name {t.lemma_name!r} in corpus")
            seen.add(t.lemma_name)

    def __len__(self) -> int:
        return len(self.traces)

    def lemma_names(self) -> list[str]:
        return [t.lemma_name for t in self.traces]

    def trace_for(self, lemma_name: str) -> Trace:
        for t in self.traces:
            if t.lemma_name == lemma_name:
                return t
        raise KeyError(lemma_name)


def _iter_sentences(text: str, source: str = "") -> Iterator[tuple[str, int]]:
    """Yield (sentence, line) pairs with comments removed.

    A sentence ends at a "." that sits outside comments and string literals
    and is followed by whitespace or end of input (so qualified names like
    ``Nat.add`` do not terminate). Focus braces and bullet characters at the
    start of a sentence are stripped.
    """
    buf: list[str] = []
    line = 1
    start_line = 1
    comment_depth = 0
    in_string = False
    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            line += 1
        if comment_depth:
            if text.startswith("(*", i):
                comment_depth += 1
                i += 2
                continue
            if text.startswith("*)", i):
                comment_depth -= 1
                i += 2
                continue
            i += 1
            continue
        if in_string:
            buf.append(c)
            if c == '"':
                if i + 1 < n and text[i + 1] == '"':
                    buf.append('"')
                    i += 2
                    continue
                in_string = False
            i += 1
            continue
        if text.startswith("(*", i):
            comment_depth += 1
            i += 2
            continue
        if c == '"':
            in_string = True
            buf.append(c)
            i += 1
            continue
        if c == "." and (i + 1 >= n or text[i + 1].isspace()):
            sentence = _strip_bullets("".join(buf))
            if sentence:
                yield sentence, start_line
            buf = []
            start_line = line
            i += 1
            continue
        if not buf and c.isspace():
            start_line = line
            i += 1
            continue
        buf.append(c)
        i += 1
    if "".join(buf).strip(" \t\r\n{}+-*"):
        raise ParseError("input ends inside an unterminated sentence", source, line)


def _strip_bullets(sentence: str) -> str:
    return sentence.strip().lstrip("{}+-* \t\r\n")


def _normalize_ws(fragment: str) -> str:
    """Collapse whitespace runs to single spaces, except inside string literals."""
    out: list[str] = []
    in_string = False
    pending_space = False
    for c in fragment:
        if in_string:
            out.append(c)
            if c == '"':
                in_string = False
            continue
        if c.isspace():
            pending_space = True
            continue
        if pending_space and out:
            out.append(" ")
        pending_space = False
        if c == '"':
            in_string = True
        out.append(c)
    return "".join(out)


def _split_top_level(sentence: str) -> list[str]:
    """Split on ";" at bracket depth 0 and outside string literals."""
    fragments: list[str] = []
    depth = 0
    in_string = False
    current: list[str] = []
    i = 0
    n = len(sentence)
    while i < n:
        c = sentence[i]
        if in_string:
            current.append(c)
            if c == '"':
                if i + 1 < n and sentence[i + 1] == '"':
                    current.append('"')
                    i += 2
                    continue
                in_string = False
            i += 1
            continue
        if c == '"':
            in_string = True
            current.append(c)
        elif c in _OPENERS:
            depth += 1
            current.append(c)
        elif c in _CLOSERS:
            depth -= 1
            current.append(c)
        elif c == ";" and depth == 0:
            fragments.append("".join(current))
            current = []
        else:
            current.append(c)
        i += 1
    fragments.append("".join(current))
    return fragments


def split_tactic_sentence(sentence: str) -> list[TraceElement]:
    """Split one "."-less tactic sentence into its composed trace elements.

    Semicolons at bracket depth 0 (and outside string literals) separate
    elements; every non-final element keeps a ";" at the end of its params.
    The label is the fragment's leading (possibly dotted) identifier, so
    bracket-protected ";" never leaks into a label even in spaceless calls
    like ``apply(H)``.
    """
    fragments = _split_top_level(sentence)
    elements: list[TraceElement] = []
    last = len(fragments) - 1
    for idx, raw in enumerate(fragments):
        frag = _normalize_ws(raw.strip())
        match = _LABEL_RE.match(frag)
        if match is None:
            raise EmptySentence(
                f"fragment {frag!r} does not start with a tactic name "
                f"(in sentence {sentence!r})"
            )
        params = frag[match.end():].lstrip()
        if idx < last:
            params += ";"
        elements.append(TraceElement(match.group(0), params))
    return elements


def _statement_header(sentence: str) -> tuple[str, str] | None:
    """Return (keyword, lemma_name) when the sentence opens a proof block."""
    tokens = sentence.split(None, 2)
    if tokens and tokens[0] in _MODIFIERS:
        tokens = tokens[1:]
    if not tokens or tokens[0] not in THEOREM_KEYWORDS:
        return None
    if len(tokens) < 2:
        return tokens[0], ""
    m = _NAME_RE.match(tokens[1])
    return tokens[0], (m.group(0) if m else "")


def parse_proof_script(source_text: str, source_name: str = "") -> list[Trace]:
    """Extract one trace per proved lemma from a proof-script file.

    Only Lemma/Theorem/Fact/Corollary/Remark/Proposition blocks closed by
    Qed or Defined yield traces. Admitted and Abort blocks are skipped with
    a warning; everything outside proof blocks is ignored.
    """
    traces: list[Trace] = []
    current_name: str | None = None
    current_line = 0
    elements: list[TraceElement] = []
    for sentence, line in _iter_sentences(source_text, source_name):
        first = sentence.split(None, 1)[0]
        if current_name is None:
            header = _statement_header(sentence)
            if header is not None:
                keyword, name = header
                if not name:
                    raise ParseError(f"{keyword} without a name", source_name, line)
                current_name = name
                current_line = line
                elements = []
            continue
        if first in _END_KEYWORDS:
            traces.append(Trace(current_name, tuple(elements), source_name))
            current_name = None
        elif first in _ABANDON_KEYWORDS:
            log.warning(
                "%s: skipping %s proof of %s", source_name or "<input>", first, current_name
            )
            current_name = None
        elif first == "Proof":
            continue
        elif _statement_header(sentence) is not None:
            raise UnterminatedProof(
                f"proof of {current_name!r} still open when a new statement begins",
                source_name,
                line,
            )
        else:
            try:
                elements.extend(split_tactic_sentence(sentence))
            except EmptySentence as exc:
                raise EmptySentence(str(exc), source_name, line) from None
    if current_name is not None:
        raise UnterminatedProof(
            f"proof of {current_name!r} not closed before end of file",
            source_name,
            current_line,
        )
    return traces


def rejoin_trace(trace: Trace) -> str:
    """Reassemble the tactic text of a trace (inverse of parsing, up to whitespace)."""
    parts: list[str] = []
    for el in trace.elements:
        parts.append(el.label if not el.params else f"{el.label} {el.params}")
        if not el.composed:
            parts.append(".")
    return " ".join(parts).replace(" .", ".")


def _unique_name(name: str, taken: set[str]) -> str:
    if name not in taken:
        return name
    n = 2
    while f"{name}#{n}" in taken:
        n += 1
    return f"{name}#{n}"


def _looks_like_trace_file(text: str) -> bool:
    for raw in text.splitlines():
        stripped = raw.strip()
        if not stripped:
            continue
        if not stripped.startswith("{"):
            return False
        try:
            obj = json.loads(stripped)
        except json.JSONDecodeError:
            return False
        return isinstance(obj, dict) and "lemma" in obj
    return False


def load_corpus(paths: Sequence[str | Path]) -> Corpus:
    """Load proof scripts and/or trace files into one corpus.

    Traces keep path order then in-file order. Duplicate lemma names get a
    deterministic "#n" suffix so inference stays reproducible.
    """
    collected: list[Trace] = []
    provenance: list[str] = []
    taken: set[str] = set()
    for p in paths:
        path = Path(p)
        text = path.read_text(encoding="utf-8")
        provenance.append(str(path))
        if _looks_like_trace_file(text):
            file_traces = _parse_trace_lines(text, str(path))
        else:
            file_traces = parse_proof_script(text, path.stem)
        for t in file_traces:
            name = _unique_name(t.lemma_name, taken)
            taken.add(name)
            if name != t.lemma_name:
                t = Trace(name, t.elements, t.source_theory)
            collected.append(t)
    return Corpus(tuple(collected), tuple(provenance))


def _element_to_json(el: TraceElement) -> dict:
    return {"l": el.label, "v": el.params}


def _trace_to_json(trace: Trace) -> dict:
    return {
        "lemma": trace.lemma_name,
        "theory": trace.source_theory,
        "events": [_element_to_json(e) for e in trace.elements],
    }


def _trace_from_json(obj: dict, where: str) -> Trace:
    if not isinstance(obj, dict):
        raise SchemaError(f"{where}: expected a JSON object, got {type(obj).__name__}")
    unknown = set(obj) - {"lemma", "theory", "events"}
    if unknown:
        raise SchemaError(f"{where}: unknown fields {sorted(unknown)}")
    if "lemma" not in obj or not isinstance(obj["lemma"], str):
        raise SchemaError(f"{where}: missing or non-string 'lemma'")
    events = obj.get("events", [])
    if not isinstance(events, list):
        raise SchemaError(f"{where}: 'events' must be a list")
    elements = []
    for i, ev in enumerate(events):
        if not isinstance(ev, dict):
            raise SchemaError(f"{where}: event {i} is not an object")
        unknown = set(ev) - {"l", "v"}
        if unknown:
            raise SchemaError(f"{where}: event {i} has unknown fields {sorted(unknown)}")
        if "l" not in ev or not isinstance(ev["l"], str):
            raise SchemaError(f"{where}: event {i} is missing label 'l'")
        v = ev.get("v", "")
        if not isinstance(v, str):
            raise SchemaError(f"{where}: event {i} has non-string 'v'")
        elements.append(TraceElement(ev["l"], v))
    theory = obj.get("theory", "")
    if not isinstance(theory, str):
        raise SchemaError(f"{where}: 'theory' must be a string")
    return Trace(obj["lemma"], tuple(elements), theory)


def _parse_trace_lines(text: str, source: str) -> list[Trace]:
    traces = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped:
            continue
        try:
            obj = json.loads(stripped)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{source}:{lineno}: invalid JSON ({exc})") from None
        traces.append(_trace_from_json(obj, f"{source}:{lineno}"))
    return traces


def write_traces(corpus: Corpus, path: str | Path) -> None:
    """Write a corpus as JSON lines (one trace per line), UTF-8."""
    with open(path, "w", encoding="utf-8") as fh:
        for trace in corpus.traces:
            fh.write(json.dumps(_trace_to_json(trace), ensure_ascii=False))
            fh.write("\n")


def read_traces(path: str | Path) -> Corpus:
    """Read a JSON-lines trace file back into a corpus."""
    text = Path(path).read_text(encoding="utf-8")
    return Corpus(tuple(_parse_trace_lines(text, str(path))), (str(path),))


def corpus_from_traces(traces: Iterable[Trace], provenance: Iterable[str] = ()) -> Corpus:
    return Corpus(tuple(traces), tuple(provenance))
