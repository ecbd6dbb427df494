"""Canonical data model: examples, corpora, tokenization, and symbol extraction.

All downstream statistics are defined over the token sequences cached here, so
the tokenizer is deliberately simple and frozen: lowercase, split at
whitespace/punctuation boundaries, punctuation kept as separate tokens.
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .util import stable_digest

# Single token inserted between dialogue turns. Contains uppercase letters,
# which tokenize() can never emit, so it cannot collide with trigger tokens.
SEPARATOR_TOKEN = "[SEP]"

_TOKEN_RE = re.compile(r"\w+|[^\w\s]")
_NUMBER_RE = re.compile(r"^[+-]?\d+(\.\d+)?$")


class CorpusError(ValueError):
    """Raised for malformed corpus files; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class LispParseError(ValueError):
    """Raised for malformed program expressions; carries the char position."""

    def __init__(self, message: str, position: int):
        self.position = position
        super().__init__(f"{message} (at position {position})")


class TaskKind(str, enum.Enum):
    SINGLE_LABEL = "single-label"
    SYMBOL_SET = "symbol-set"


@dataclass(frozen=True)
class SingleLabel:
    """Gold output of an intent-style example: one label."""

    label: str

    def symbols(self) -> frozenset[str]:
        return frozenset((self.label,))

    def contains(self, symbol: str) -> bool:
        return self.label == symbol


@dataclass(frozen=True)
class SymbolSet:
    """Gold output of a program-style example: the set of symbols it uses."""

    members: frozenset[str]

    def symbols(self) -> frozenset[str]:
        return self.members

    def contains(self, symbol: str) -> bool:
        return symbol in self.members


Output = SingleLabel | SymbolSet


@dataclass(frozen=True)
class ContextTurn:
    speaker: str  # "user" | "agent"
    text: str


@dataclass(frozen=True)
class Example:
    """One labeled unit: dialogue context + utterance + gold output.

    `tokens` caches the tokenized full model input (context turns joined with
    SEPARATOR_TOKEN, then the utterance); `token_set` is the same as a set for
    O(1) trigger membership tests. `program` keeps the raw program text of
    symbol-set examples so serialization is lossless.
    """

    id: str
    context: tuple[ContextTurn, ...]
    utterance: str
    output: Output
    tokens: tuple[str, ...]
    token_set: frozenset[str] = field(repr=False)
    program: str | None = None

    def contains_any(self, tokens: Iterable[str]) -> bool:
        return any(t in self.token_set for t in tokens)


def tokenize(text: str) -> list[str]:
    """Lowercase tokens split at whitespace/punctuation; punctuation kept.

    >>> tokenize("Who is my manager?")
    ['who', 'is', 'my', 'manager', '?']
    """
    return _TOKEN_RE.findall(text.lower())


def join_turns(turn_texts: Sequence[str], current: str) -> list[str]:
    """Token sequence for a full model input: prior turns, then `current`.

    Turns are joined with SEPARATOR_TOKEN; empty or missing turns contribute
    nothing (no dangling separators).
    """
    if not current:
        raise ValueError("current utterance must be nonempty")
    parts = [tokenize(t) for t in turn_texts if t] + [tokenize(current)]
    parts = [p for p in parts if p]
    tokens: list[str] = []
    for i, part in enumerate(parts):
        if i > 0:
            tokens.append(SEPARATOR_TOKEN)
        tokens.extend(part)
    return tokens


def build_context_input(prev_user: str | None, agent: str | None, current: str) -> list[str]:
    """Two-turn dialogue context concatenation (previous user turn + agent reply)."""
    return join_turns([prev_user or "", agent or ""], current)


def _lisp_atoms(text: str) -> list[str]:
    """Atoms of a balanced s-expression, with string literals kept quoted."""
    atoms: list[str] = []
    depth = 0
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "(":
            depth += 1
            i += 1
        elif ch == ")":
            depth -= 1
            if depth < 0:
                raise LispParseError("unbalanced ')'", i)
            i += 1
        elif ch == '"':
            j = text.find('"', i + 1)
            if j < 0:
                raise LispParseError("unterminated string literal", i)
            atoms.append(text[i : j + 1])
            i = j + 1
        elif ch.isspace():
            i += 1
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in '()"':
                j += 1
            atoms.append(text[i:j])
            i = j
    if depth != 0:
        raise LispParseError("unbalanced '('", n)
    return atoms


def extract_symbols(lisp_text: str) -> frozenset[str]:
    """All function/argument identifiers in a program expression.

    String literals, numbers, and :keyword argument markers are excluded;
    identifier case is preserved.
    """
    symbols = set()
    for atom in _lisp_atoms(lisp_text):
        if atom.startswith('"') or atom.startswith(":") or _NUMBER_RE.match(atom):
            continue
        symbols.add(atom)
    return frozenset(symbols)


def make_example(
    id: str,
    context: Sequence[ContextTurn],
    utterance: str,
    output: Output,
    program: str | None = None,
) -> Example:
    tokens = tuple(join_turns([t.text for t in context], utterance))
    return Example(
        id=id,
        context=tuple(context),
        utterance=utterance,
        output=output,
        tokens=tokens,
        token_set=frozenset(tokens),
        program=program,
    )


@dataclass
class Corpus:
    """Immutable-after-load collection of examples with a symbol inventory."""

    examples: list[Example]
    task_kind: TaskKind
    symbol_inventory: dict[str, int]
    _by_id: dict[str, Example] = field(repr=False, default_factory=dict)
    _digest: str | None = field(repr=False, default=None)

    def __post_init__(self) -> None:
        if not self._by_id:
            self._by_id = {ex.id: ex for ex in self.examples}

    def __len__(self) -> int:
        return len(self.examples)

    def by_id(self, example_id: str) -> Example:
        return self._by_id[example_id]

    def resolve(self, ids: Sequence[str]) -> list[Example]:
        """Examples for an id multiset, with multiplicity preserved."""
        return [self._by_id[i] for i in ids]

    @property
    def digest(self) -> str:
        if self._digest is None:
            self._digest = stable_digest(self.to_jsonl())
        return self._digest

    def to_jsonl(self) -> str:
        """Canonical serialization: fixed key order, UTF-8, LF line endings."""
        lines = [_record_json(ex, self.task_kind) for ex in self.examples]
        return "".join(line + "\n" for line in lines)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_jsonl(), encoding="utf-8", newline="\n")


def build_corpus(examples: Sequence[Example], task_kind: TaskKind) -> Corpus:
    inventory: dict[str, int] = {}
    for ex in examples:
        for sym in ex.output.symbols():
            inventory[sym] = inventory.get(sym, 0) + 1
    return Corpus(examples=list(examples), task_kind=task_kind, symbol_inventory=inventory)


def _record_json(ex: Example, task_kind: TaskKind) -> str:
    if task_kind is TaskKind.SINGLE_LABEL:
        assert isinstance(ex.output, SingleLabel)
        output = {"kind": "intent", "label": ex.output.label}
    else:
        assert isinstance(ex.output, SymbolSet)
        # Fall back to a minimal flat program when the raw text is unknown;
        # reload extracts the identical symbol set either way.
        lisp = ex.program or "(" + " ".join(sorted(ex.output.members)) + ")"
        output = {"kind": "program", "lisp": lisp}
    record = {
        "id": ex.id,
        "context": [{"speaker": t.speaker, "text": t.text} for t in ex.context],
        "utterance": ex.utterance,
        "output": output,
    }
    return json.dumps(record, ensure_ascii=False, separators=(",", ":"))


def _parse_record(obj: dict, task_kind: TaskKind, line: int) -> Example:
    if not isinstance(obj, dict):
        raise CorpusError("record is not a JSON object", line)
    ex_id = obj.get("id")
    if not isinstance(ex_id, str) or not ex_id:
        raise CorpusError("missing or empty 'id'", line)
    raw_context = obj.get("context", [])
    if not isinstance(raw_context, list):
        raise CorpusError("'context' must be a list", line)
    context = []
    for turn in raw_context:
        if not isinstance(turn, dict) or turn.get("speaker") not in ("user", "agent"):
            raise CorpusError("context turn needs speaker user|agent", line)
        if not isinstance(turn.get("text"), str):
            raise CorpusError("context turn needs string text", line)
        context.append(ContextTurn(speaker=turn["speaker"], text=turn["text"]))
    utterance = obj.get("utterance")
    if not isinstance(utterance, str) or not utterance.strip():
        raise CorpusError("missing or empty 'utterance'", line)
    raw_output = obj.get("output")
    if not isinstance(raw_output, dict):
        raise CorpusError("missing 'output' object", line)
    kind = raw_output.get("kind")
    if task_kind is TaskKind.SINGLE_LABEL:
        if kind != "intent":
            raise CorpusError(f"expected output kind 'intent', got {kind!r}", line)
        label = raw_output.get("label")
        if not isinstance(label, str) or not label:
            raise CorpusError("intent output needs nonempty 'label'", line)
        output: Output = SingleLabel(label)
    else:
        if kind != "program":
            raise CorpusError(f"expected output kind 'program', got {kind!r}", line)
        lisp = raw_output.get("lisp")
        if not isinstance(lisp, str):
            raise CorpusError("program output needs 'lisp' text", line)
        try:
            members = extract_symbols(lisp)
        except LispParseError as err:
            raise CorpusError(f"bad program text: {err}", line) from err
        if not members:
            raise CorpusError("program output has no symbols", line)
        output = SymbolSet(members)
    program = raw_output.get("lisp") if task_kind is TaskKind.SYMBOL_SET else None
    example = make_example(ex_id, context, utterance, output, program=program)
    if not example.tokens:
        raise CorpusError("example tokenizes to nothing", line)
    return example


def load_corpus(path: str | Path, task_kind: TaskKind | str) -> Corpus:
    """Read a JSONL corpus file.

    Errors carry the 1-based line number; duplicate ids fail at their second
    occurrence; an empty file is an error.
    """
    task_kind = TaskKind(task_kind)
    text = Path(path).read_text(encoding="utf-8")
    examples: list[Example] = []
    seen: set[str] = set()
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as err:
            raise CorpusError(f"invalid JSON: {err.msg}", line_no) from err
        example = _parse_record(obj, task_kind, line_no)
        if example.id in seen:
            raise CorpusError(f"duplicate id {example.id!r}", line_no)
        seen.add(example.id)
        examples.append(example)
    if not examples:
        raise CorpusError(f"no records in {path}")
    return build_corpus(examples, task_kind)
