"""Violation-pattern generation, validation, storage and human review.

Patterns are (EntityA, Action, EntityB) templates with positive
(``lookFor``) and negative (``ignore``) example sentences. They are drafted
by a chat model, validated structurally, reviewed by a person through a
plain-text decision file, and only then promoted to ontology classes.
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from rdflib import Graph, Literal, URIRef
from rdflib.namespace import RDF, RDFS, XSD

from . import rdfio
from .errors import GenerationError, IntegrityError, ParseError, StateError
from .gateway import ChatRequest, Gateway, ModelSpec
from .ontology import (
    PATTERNS_PER_PRINCIPLE,
    PRINCIPLE_COUNT,
    Principle,
    ViolationClassDef,
    promote_pattern,
)
from .structured import DEFAULT_RETRIES, ask_structured
from .vocab import ESG, SCHEMA, pattern_instance_iri, pattern_set_iri, principle_iri

DEFAULT_COMMENT_MAX_CHARS = 600


class ReviewState(str, enum.Enum):
    DRAFT = "Draft"
    APPROVED = "Approved"
    REJECTED = "Rejected"
    EDITED = "Edited"

    @property
    def promotable(self) -> bool:
        return self in (ReviewState.APPROVED, ReviewState.EDITED)


@dataclass(frozen=True)
class ViolationPattern:
    principle_id: int
    index: int
    entity_a: str
    action: str
    entity_b: str
    look_for: tuple[str, ...]
    ignore: tuple[str, ...]
    review_state: ReviewState = ReviewState.DRAFT

    @property
    def pattern_id(self) -> str:
        return f"p{self.principle_id}.{self.index}"

    @property
    def key(self) -> tuple[int, int]:
        return (self.principle_id, self.index)

    def to_draft(self) -> dict:
        return {
            "principleId": self.principle_id,
            "index": self.index,
            "entityA": self.entity_a,
            "action": self.action,
            "entityB": self.entity_b,
            "lookFor": list(self.look_for),
            "ignore": list(self.ignore),
            "reviewState": self.review_state.value,
        }


def _normalize_sentence(text: str) -> str:
    return " ".join(text.split()).casefold()


def _text_list(value: Any, name: str, violations: list[str]) -> tuple[str, ...]:
    if value is None:
        value = []
    if isinstance(value, str):
        value = [value]
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        violations.append(f"{name} must be a list of sentences")
        return ()
    out: list[str] = []
    seen: set[str] = set()
    for v in value:
        v = " ".join(v.split())
        if v and _normalize_sentence(v) not in seen:
            seen.add(_normalize_sentence(v))
            out.append(v)
    if not out:
        violations.append(f"{name} requires ≥1 example")
    # sorted: stored as unordered RDF values, so this is the canonical order
    return tuple(sorted(out))


def validate_pattern(
    draft: Mapping[str, Any],
    principle_id: int | None = None,
    index: int | None = None,
) -> tuple[ViolationPattern | None, list[str]]:
    """Check a raw draft and build a pattern from it.

    Returns the pattern and an empty list, or ``None`` and every violated
    constraint. Never raises on bad input.
    """
    violations: list[str] = []
    if not isinstance(draft, Mapping):
        return None, ["pattern must be an object"]
    pid = draft.get("principleId", principle_id) if principle_id is None else principle_id
    idx = draft.get("index", index) if index is None else index
    if not isinstance(pid, int) or isinstance(pid, bool) or not 1 <= pid <= PRINCIPLE_COUNT:
        violations.append(f"principleId must be an integer 1..{PRINCIPLE_COUNT}")
    if not isinstance(idx, int) or isinstance(idx, bool) or not 1 <= idx <= PATTERNS_PER_PRINCIPLE:
        violations.append(f"index must be an integer 1..{PATTERNS_PER_PRINCIPLE}")

    triple = {}
    for name in ("entityA", "action", "entityB"):
        value = draft.get(name)
        if not isinstance(value, str) or not value.strip():
            violations.append(f"{name} must be non-empty")
            value = ""
        triple[name] = " ".join(value.split())

    look_for = _text_list(draft.get("lookFor"), "lookFor", violations)
    ignore = _text_list(draft.get("ignore"), "ignore", violations)
    overlap = sorted({_normalize_sentence(s) for s in look_for} & {_normalize_sentence(s) for s in ignore})
    for sentence in overlap:
        violations.append(f"lookFor and ignore must be disjoint; both contain {sentence!r}")

    try:
        state = ReviewState(draft.get("reviewState", ReviewState.DRAFT.value))
    except ValueError:
        violations.append(f"unknown reviewState {draft.get('reviewState')!r}")
        state = ReviewState.DRAFT

    if violations:
        return None, violations
    return ViolationPattern(pid, idx, triple["entityA"], triple["action"], triple["entityB"],
                            look_for, ignore, state), []


# --- generation -------------------------------------------------------------

COMMENT_SYSTEM_PROMPT = (
    "You write definitions for an ESG compliance ontology. Given the official text of a "
    "UN Global Compact principle, write a concise rdfs:comment: one plain paragraph of at "
    "most three sentences stating what the principle requires of companies and what kind "
    "of corporate conduct would breach it. No headings, no lists, no quotation marks."
)

PATTERN_SYSTEM_PROMPT = (
    "You design violation patterns for detecting corporate breaches of UN Global Compact "
    "principles in news articles. A violation pattern is a relational triple "
    "(entityA, action, entityB) where entityA is the kind of actor (usually \"Company\"), "
    "action is a verb phrase, and entityB is the affected party, right or resource. "
    "Cover both direct violations and indirect ones such as complicity, supplier conduct "
    "or failures of due diligence. For every pattern give 2-3 lookFor sentences (news-style "
    "sentences that DO report this violation) and 2-3 ignore sentences (similar-sounding "
    "sentences that do NOT report a violation, e.g. pledges, denials of wrongdoing, or "
    "unrelated uses of the same words). lookFor and ignore must not share any sentence."
)


def _principle_block(principle: Principle) -> str:
    lines = [
        f"Principle {principle.id} ({principle.short_name})",
        f"Official text: {principle.official_text}",
    ]
    if principle.comment:
        lines.append(f"Summary: {principle.comment}")
    return "\n".join(lines)


def comment_prompt(principle: Principle) -> str:
    return f"{_principle_block(principle)}\n\nWrite the rdfs:comment for this principle."


def patterns_prompt(principle: Principle) -> str:
    return (
        f"{_principle_block(principle)}\n\n"
        f"Produce exactly {PATTERNS_PER_PRINCIPLE} violation patterns for this principle. "
        "Return them in a ```json fenced block shaped as\n"
        '{"patterns": [{"entityA": "...", "action": "...", "entityB": "...", '
        '"lookFor": ["..."], "ignore": ["..."]}]}'
    )


def generate_comment(
    principle: Principle,
    gateway: Gateway,
    model: ModelSpec,
    max_chars: int = DEFAULT_COMMENT_MAX_CHARS,
) -> str:
    if not principle.official_text.strip():
        raise StateError(f"principle {principle.id} has no official text")
    raw = gateway.complete(ChatRequest(COMMENT_SYSTEM_PROMPT, comment_prompt(principle), model,
                                       task="comment", item=str(principle.id)))
    comment = " ".join(raw.split())
    if not comment:
        raise GenerationError(f"empty comment for principle {principle.id}", raw=raw)
    if len(comment) > max_chars:
        raise GenerationError(
            f"comment for principle {principle.id} is {len(comment)} chars (limit {max_chars})", raw=raw
        )
    return comment


def annotate_principles(
    principles: Sequence[Principle], gateway: Gateway, model: ModelSpec, max_chars: int = DEFAULT_COMMENT_MAX_CHARS
) -> list[Principle]:
    comments = gateway.map(lambda p: generate_comment(p, gateway, model, max_chars), principles)
    return [p.with_comment(c) for p, c in zip(principles, comments)]


def _patterns_converter(principle_id: int):
    def convert(data: Any) -> tuple[list[ViolationPattern] | None, list[str]]:
        items = data.get("patterns") if isinstance(data, dict) else data
        if not isinstance(items, list):
            return None, ['expected an object with a "patterns" list']
        if len(items) != PATTERNS_PER_PRINCIPLE:
            return None, [f"expected exactly {PATTERNS_PER_PRINCIPLE} patterns, got {len(items)}"]
        out: list[ViolationPattern] = []
        violations: list[str] = []
        for i, item in enumerate(items, start=1):
            if isinstance(item, dict):
                item = {k: v for k, v in item.items() if k not in ("principleId", "index", "reviewState")}
            pattern, problems = validate_pattern(item, principle_id, i)
            violations.extend(f"pattern {i}: {p}" for p in problems)
            if pattern is not None:
                out.append(pattern)
        return (out, []) if not violations else (None, violations)

    return convert


def generate_patterns(
    principle: Principle,
    gateway: Gateway,
    model: ModelSpec,
    retries: int = DEFAULT_RETRIES,
) -> list[ViolationPattern]:
    """Ask the model for three draft patterns for one principle."""
    if not principle.official_text.strip():
        raise StateError(f"principle {principle.id} has no official text")
    if not principle.comment:
        raise StateError(f"principle {principle.id} has no comment; generate comments first")
    return ask_structured(
        gateway, model, PATTERN_SYSTEM_PROMPT, patterns_prompt(principle),
        _patterns_converter(principle.id),
        task="patterns", item=str(principle.id), retries=retries,
    )


def merge_drafts(existing: Iterable[ViolationPattern], drafts: Iterable[ViolationPattern]) -> list[ViolationPattern]:
    """Add new drafts without overwriting patterns a reviewer already accepted."""
    merged = {p.key: p for p in existing}
    for d in drafts:
        current = merged.get(d.key)
        if current is None or not current.review_state.promotable:
            merged[d.key] = d
    return sorted(merged.values(), key=lambda p: p.key)


# --- JSON-LD pattern store ----------------------------------------------------

def pattern_graph(patterns: Iterable[ViolationPattern]) -> Graph:
    g = Graph()
    for p in patterns:
        inst = pattern_instance_iri(p.principle_id, p.index)
        pset = pattern_set_iri(p.principle_id)
        g.add((pset, RDF.type, ESG.ESGViolationActionPatternSet))
        g.add((pset, ESG.patternSetFor, principle_iri(p.principle_id)))
        g.add((pset, ESG.hasPattern, inst))
        g.add((inst, RDF.type, ESG.ESGViolationActionPattern))
        g.add((inst, RDFS.label, Literal(p.pattern_id)))
        g.add((inst, SCHEMA.position, Literal(p.index, datatype=XSD.integer)))
        g.add((inst, ESG.violatesPrinciple, principle_iri(p.principle_id)))
        g.add((inst, ESG.entityA, Literal(p.entity_a)))
        g.add((inst, ESG.action, Literal(p.action)))
        g.add((inst, ESG.entityB, Literal(p.entity_b)))
        g.add((inst, ESG.reviewState, Literal(p.review_state.value)))
        for s in p.look_for:
            g.add((inst, ESG.lookFor, Literal(s)))
        for s in p.ignore:
            g.add((inst, ESG.ignore, Literal(s)))
    return g


def encode_patterns(patterns: Iterable[ViolationPattern]) -> str:
    return rdfio.to_jsonld(pattern_graph(patterns))


_PRINCIPLE_IRI = re.compile(r"/ungc/p(\d+)$")


def patterns_from_graph(g: Graph, source: str = "<graph>") -> list[ViolationPattern]:
    out = []
    for inst in sorted(set(g.subjects(RDF.type, ESG.ESGViolationActionPattern)), key=str):
        def one(pred):
            value = g.value(inst, pred)
            if value is None:
                raise ParseError(f"pattern {inst} lacks {pred}", source=source)
            return value

        match = _PRINCIPLE_IRI.search(str(one(ESG.violatesPrinciple)))
        if match is None:
            raise ParseError(f"pattern {inst} has an unrecognised principle IRI", source=source)
        draft = {
            "principleId": int(match.group(1)),
            "index": int(one(SCHEMA.position)),
            "entityA": str(one(ESG.entityA)),
            "action": str(one(ESG.action)),
            "entityB": str(one(ESG.entityB)),
            "lookFor": sorted(str(o) for o in g.objects(inst, ESG.lookFor)),
            "ignore": sorted(str(o) for o in g.objects(inst, ESG.ignore)),
            "reviewState": str(one(ESG.reviewState)),
        }
        pattern, violations = validate_pattern(draft)
        if pattern is None:
            raise ParseError(f"invalid stored pattern {inst}: {'; '.join(violations)}", source=source)
        out.append(pattern)
    return sorted(out, key=lambda p: p.key)


def decode_patterns(text: str, source: str = "<jsonld>") -> list[ViolationPattern]:
    try:
        g = rdfio.parse(text, "jsonld")
    except Exception as exc:  # rdflib raises assorted parser errors
        raise ParseError(f"cannot parse pattern document: {exc}", source=source) from None
    return patterns_from_graph(g, source)


def store_filename(principle_id: int) -> str:
    return f"p{principle_id:02d}.jsonld"


def render_store(patterns: Iterable[ViolationPattern]) -> dict[str, str]:
    """One JSON-LD document per principle, keyed by file name."""
    by_principle: dict[int, list[ViolationPattern]] = {}
    for p in patterns:
        by_principle.setdefault(p.principle_id, []).append(p)
    return {store_filename(pid): encode_patterns(ps) for pid, ps in sorted(by_principle.items())}


def write_store(directory: str | Path, patterns: Iterable[ViolationPattern]) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for name, text in render_store(patterns).items():
        path = directory / name
        path.write_text(text, encoding="utf-8")
        written.append(path)
    return written


def read_store(directory: str | Path) -> list[ViolationPattern]:
    directory = Path(directory)
    if not directory.is_dir():
        raise IntegrityError(f"pattern store not found: {directory}")
    patterns: list[ViolationPattern] = []
    for path in sorted(directory.glob("p*.jsonld")):
        patterns.extend(decode_patterns(path.read_text(encoding="utf-8"), source=path.name))
    keys = [p.key for p in patterns]
    if len(keys) != len(set(keys)):
        raise IntegrityError("pattern store contains duplicate (principle, index) pairs")
    return sorted(patterns, key=lambda p: p.key)


# --- review -----------------------------------------------------------------

_DECISION = re.compile(r"^(?P<target>p(?P<pid>\d+)\.(?P<idx>\d+)|\*)\s+(?P<action>approve|reject|edit)\s*(?P<rest>.*)$")
_FIELD_NAMES = {"entityA", "action", "entityB", "lookFor", "ignore"}


@dataclass(frozen=True)
class ReviewDecision:
    target: tuple[int, int] | None  # None means every pattern
    action: str
    fields: dict = field(default_factory=dict, hash=False)
    line: int = 0


def parse_review(text: str, source: str = "<review>") -> list[ReviewDecision]:
    """Parse ``p<id>.<index> approve|reject|edit {json}`` lines; ``#`` starts a comment."""
    decisions = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        m = _DECISION.match(line)
        if m is None:
            raise ParseError(f"unrecognised review line: {line!r}", source=source, position=line_no)
        action = m["action"]
        target = None if m["target"] == "*" else (int(m["pid"]), int(m["idx"]))
        fields: dict = {}
        rest = m["rest"].strip()
        if action == "edit":
            if target is None:
                raise ParseError("edit decisions must name a single pattern", source=source, position=line_no)
            try:
                fields = json.loads(rest)
            except json.JSONDecodeError:
                raise ParseError("edit needs a JSON object of field replacements", source=source,
                                 position=line_no) from None
            if not isinstance(fields, dict) or not fields:
                raise ParseError("edit needs a non-empty JSON object", source=source, position=line_no)
            unknown = set(fields) - _FIELD_NAMES
            if unknown:
                raise ParseError(f"edit names unknown fields: {', '.join(sorted(unknown))}", source=source,
                                 position=line_no)
        elif rest and not rest.startswith("#"):
            raise ParseError(f"unexpected text after {action}: {rest!r}", source=source, position=line_no)
        decisions.append(ReviewDecision(target, action, fields, line_no))
    return decisions


@dataclass
class ReviewOutcome:
    patterns: list[ViolationPattern]
    violations: dict[str, list[str]]

    @property
    def ok(self) -> bool:
        return not self.violations


def apply_review(patterns: Sequence[ViolationPattern], decisions: Sequence[ReviewDecision]) -> ReviewOutcome:
    """Apply review decisions in file order.

    Failed edits leave the pattern untouched and are reported in
    ``violations`` keyed by pattern id.
    """
    current = {p.key: p for p in patterns}
    violations: dict[str, list[str]] = {}
    for d in decisions:
        if d.target is not None and d.target not in current:
            raise IntegrityError(f"review line {d.line}: unknown pattern p{d.target[0]}.{d.target[1]}")
        targets = sorted(current) if d.target is None else [d.target]
        for key in targets:
            p = current[key]
            if d.action == "approve":
                current[key] = replace(p, review_state=ReviewState.APPROVED)
            elif d.action == "reject":
                current[key] = replace(p, review_state=ReviewState.REJECTED)
            else:
                draft = p.to_draft()
                draft.update(d.fields)
                draft["reviewState"] = ReviewState.EDITED.value
                edited, problems = validate_pattern(draft)
                if edited is None:
                    violations.setdefault(p.pattern_id, []).extend(problems)
                else:
                    current[key] = edited
    return ReviewOutcome(sorted(current.values(), key=lambda p: p.key), violations)


def check_promotable(patterns: Iterable[ViolationPattern]) -> list[ViolationPattern]:
    """Return the promotable patterns, or raise naming every principle short of three."""
    ready = sorted((p for p in patterns if p.review_state.promotable), key=lambda p: p.key)
    by_principle: dict[int, list[int]] = {pid: [] for pid in range(1, PRINCIPLE_COUNT + 1)}
    for p in ready:
        by_principle[p.principle_id].append(p.index)
    gaps = []
    for pid, indices in by_principle.items():
        missing = [i for i in range(1, PATTERNS_PER_PRINCIPLE + 1) if i not in indices]
        if missing:
            gaps.append(f"principle {pid} missing approved " + ", ".join(f"p{pid}.{i}" for i in missing))
    if gaps:
        raise IntegrityError("cannot promote: " + "; ".join(gaps))
    return ready


def promote_all(patterns: Iterable[ViolationPattern]) -> list[ViolationClassDef]:
    registry: dict[URIRef, ViolationClassDef] = {}
    return [promote_pattern(p, registry) for p in check_promotable(patterns)]
