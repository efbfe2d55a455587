"""Entity extraction, pattern matching and grounded triple extraction.

Every accepted event is checked mechanically against its article: the
subject must be one of the article's extracted Organization entities and
the evidence must occur verbatim in the body. Anything else becomes a
typed rejection rather than an event.
"""

from __future__ import annotations

import enum
import json
import logging
import re
from dataclasses import dataclass, field
from datetime import date
from typing import Any, Iterable, Mapping, Sequence

from .errors import ExtractionError, GenerationError, IntegrityError, StateError
from .gateway import Gateway, ModelSpec
from .ingest import NewsArticle, article_prompt_block
from .ontology import PRINCIPLE_COUNT, Principle
from .patterns import ViolationPattern
from .structured import DEFAULT_RETRIES, ask_structured
from .vocab import parse_pattern_class_iri, pattern_class_iri

log = logging.getLogger(__name__)

MAX_EVIDENCE_SENTENCES = 3
CORPORATE_SUFFIXES = frozenset({"inc", "corp", "ltd", "plc", "gmbh", "co"})
_TRAILING_PUNCT = ".,;:!?'\"”’)] \t"


class EntityKind(str, enum.Enum):
    ORGANIZATION = "Organization"
    PERSON = "Person"
    LOCATION = "Location"


_KIND_ALIASES = {
    "organization": EntityKind.ORGANIZATION,
    "organisation": EntityKind.ORGANIZATION,
    "org": EntityKind.ORGANIZATION,
    "company": EntityKind.ORGANIZATION,
    "person": EntityKind.PERSON,
    "per": EntityKind.PERSON,
    "location": EntityKind.LOCATION,
    "loc": EntityKind.LOCATION,
    "gpe": EntityKind.LOCATION,
    "place": EntityKind.LOCATION,
}


def normalize_entity(surface: str) -> str:
    """Case-fold, collapse whitespace, strip trailing punctuation and corporate suffixes.

    >>> normalize_entity("Acme Corp.")
    'acme'
    >>> normalize_entity("  ACME   corp ")
    'acme'
    """
    text = " ".join(surface.casefold().split()).rstrip(_TRAILING_PUNCT)
    while True:
        tokens = text.split()
        if len(tokens) > 1 and tokens[-1].rstrip(".") in CORPORATE_SUFFIXES:
            text = " ".join(tokens[:-1]).rstrip(_TRAILING_PUNCT)
            continue
        return text


@dataclass(frozen=True)
class NamedEntity:
    surface: str
    normalized: str
    kind: EntityKind
    article_id: str

    @classmethod
    def make(cls, surface: str, kind: EntityKind, article_id: str) -> "NamedEntity":
        return cls(surface, normalize_entity(surface), kind, article_id)

    def to_record(self) -> dict:
        return {"surface": self.surface, "normalized": self.normalized, "kind": self.kind.value,
                "articleId": self.article_id}

    @classmethod
    def from_record(cls, record: Mapping[str, Any]) -> "NamedEntity":
        return cls(record["surface"], record["normalized"], EntityKind(record["kind"]), record["articleId"])


@dataclass(frozen=True)
class ViolationEvent:
    article_id: str
    pattern_iri: str
    principle_id: int
    subject: NamedEntity
    action: str
    object: str
    evidence: str
    model_id: str
    extracted_at: str
    event_date: date
    object_entity: NamedEntity | None = None

    def to_record(self) -> dict:
        return {
            "articleId": self.article_id,
            "patternIri": self.pattern_iri,
            "principleId": self.principle_id,
            "subject": self.subject.to_record(),
            "action": self.action,
            "object": self.object,
            "objectEntity": self.object_entity.to_record() if self.object_entity else None,
            "evidence": self.evidence,
            "modelId": self.model_id,
            "extractedAt": self.extracted_at,
            "eventDate": self.event_date.isoformat(),
        }

    @classmethod
    def from_record(cls, record: Mapping[str, Any]) -> "ViolationEvent":
        obj = record.get("objectEntity")
        return cls(
            article_id=record["articleId"],
            pattern_iri=record["patternIri"],
            principle_id=int(record["principleId"]),
            subject=NamedEntity.from_record(record["subject"]),
            action=record["action"],
            object=record["object"],
            evidence=record["evidence"],
            model_id=record["modelId"],
            extracted_at=record["extractedAt"],
            event_date=date.fromisoformat(record["eventDate"]),
            object_entity=NamedEntity.from_record(obj) if obj else None,
        )


class RejectionKind(str, enum.Enum):
    UNGROUNDED = "Ungrounded"
    NO_EVIDENCE = "NoEvidence"
    MALFORMED = "Malformed"


@dataclass(frozen=True)
class Rejection:
    article_id: str
    pattern_id: str
    kind: RejectionKind
    detail: str
    raw: str = ""

    def to_record(self) -> dict:
        return {"articleId": self.article_id, "patternId": self.pattern_id, "kind": self.kind.value,
                "detail": self.detail, "raw": self.raw}


def _require_body(article: NewsArticle) -> None:
    if not article.body.strip():
        raise StateError(f"article {article.article_id} has an empty body")


# --- entities -----------------------------------------------------------------

ENTITY_SYSTEM_PROMPT = (
    "You extract named entities from news articles. List every organization, person and "
    "location mentioned in the article's title or body, copying each name exactly as it is "
    "written in the text. Skip author bylines, photo credits, newsletter or subscription "
    "boilerplate, and the publishing outlet itself. Answer with a ```json fenced block "
    '{"entities": [{"text": "<exact name>", "type": "Organization|Person|Location"}]}.'
)


def _entities_convert(data: Any):
    items = data.get("entities") if isinstance(data, dict) else data
    if not isinstance(items, list):
        return None, ['expected {"entities": [...]}']
    out: list[tuple[str, EntityKind]] = []
    violations = []
    for i, item in enumerate(items):
        if not isinstance(item, dict) or not isinstance(item.get("text"), str) or not item["text"].strip():
            violations.append(f"entity {i} needs a non-empty text")
            continue
        kind = _KIND_ALIASES.get(str(item.get("type", "")).strip().lower())
        if kind is None:
            violations.append(f"entity {i} has unknown type {item.get('type')!r}")
            continue
        out.append((item["text"].strip(), kind))
    return (out, []) if not violations else (None, violations)


def extract_entities(
    article: NewsArticle,
    gateway: Gateway,
    model: ModelSpec,
    retries: int = DEFAULT_RETRIES,
) -> list[NamedEntity]:
    """Model-prompted NER; entities that do not occur in the text are dropped."""
    _require_body(article)
    try:
        proposed = ask_structured(
            gateway, model, ENTITY_SYSTEM_PROMPT, article_prompt_block(article), _entities_convert,
            task="entities", item=article.article_id, retries=retries, error=ExtractionError,
        )
    except GenerationError as exc:
        raise ExtractionError(f"entity extraction failed for {article.article_id}: {exc}", raw=exc.raw) from None
    haystack = f"{article.title}\n{article.body}"
    seen: set[tuple[str, EntityKind]] = set()
    entities = []
    for surface, kind in proposed:
        if surface not in haystack:
            log.warning("dropping entity %r not found in article %s", surface, article.article_id)
            continue
        if (surface, kind) in seen:
            continue
        seen.add((surface, kind))
        entities.append(NamedEntity.make(surface, kind, article.article_id))
    return sorted(entities, key=lambda e: (e.kind.value, e.normalized, e.surface))


# --- pattern matching ---------------------------------------------------------

MATCH_SYSTEM_PROMPT = (
    "You check news articles against a catalogue of ESG violation patterns. Each pattern is "
    "a (EntityA, Action, EntityB) triple with example sentences that DO match (lookFor) and "
    "similar sentences that must NOT be counted (ignore). Report a pattern only if the article "
    "states, not merely speculates, that a named company engaged in the described conduct. "
    "Answer with a ```json fenced block {\"matches\": [\"p<principle>.<index>\", ...]}; use an "
    "empty list when nothing matches."
)


def _pattern_block(p: ViolationPattern) -> str:
    look = " | ".join(p.look_for)
    ignore = " | ".join(p.ignore)
    return (f"{p.pattern_id}: ({p.entity_a}, {p.action}, {p.entity_b})\n"
            f"  lookFor: {look}\n  ignore: {ignore}")


def match_prompt(article: NewsArticle, patterns: Sequence[ViolationPattern], entities: Sequence[NamedEntity]) -> str:
    catalogue = "\n".join(_pattern_block(p) for p in sorted(patterns, key=lambda p: p.key))
    names = ", ".join(f"{e.surface} ({e.kind.value})" for e in entities) or "(none)"
    return f"Patterns:\n{catalogue}\n\nEntities in the article: {names}\n\n{article_prompt_block(article)}"


def match_patterns(
    article: NewsArticle,
    patterns: Sequence[ViolationPattern],
    entities: Sequence[NamedEntity],
    gateway: Gateway,
    model: ModelSpec,
    retries: int = DEFAULT_RETRIES,
) -> list[str]:
    """Ids of the patterns the article matches, sorted by (principle, index)."""
    _require_body(article)
    by_id = {p.pattern_id: p for p in patterns}

    def convert(data: Any):
        items = data.get("matches") if isinstance(data, dict) else data
        if not isinstance(items, list) or not all(isinstance(i, str) for i in items):
            return None, ['expected {"matches": ["p<principle>.<index>", ...]}']
        unknown = sorted({i.strip() for i in items} - set(by_id))
        if unknown:
            return None, [f"unknown pattern ids: {', '.join(unknown)}"]
        return sorted({i.strip() for i in items}, key=lambda i: by_id[i].key), []

    try:
        return ask_structured(
            gateway, model, MATCH_SYSTEM_PROMPT, match_prompt(article, patterns, entities), convert,
            task="match", item=article.article_id, retries=retries, error=ExtractionError,
        )
    except GenerationError as exc:
        raise ExtractionError(f"pattern matching failed for {article.article_id}: {exc}", raw=exc.raw) from None


# --- triples ------------------------------------------------------------------

TRIPLE_SYSTEM_PROMPT = (
    "You extract one grounded violation triple from a news article for a given violation "
    "pattern. The subject must be the organization responsible, written exactly as one of "
    "the listed organization names. The action is a short verb phrase; the object is the "
    "affected party, right or resource. The evidence must be copied verbatim from the "
    "article body: one to three consecutive sentences, unchanged. Answer with a ```json "
    'fenced block {"subject": "...", "action": "...", "object": "...", "evidence": "..."}.'
)

_SENTENCE_BREAK = re.compile(r"(?<=[.!?])[\"'”’)]*\s+(?=[\"'“‘(]?[A-Z0-9])")


def count_sentences(text: str) -> int:
    text = text.strip()
    if not text:
        return 0
    return len(_SENTENCE_BREAK.split(text))


def triple_prompt(article: NewsArticle, pattern: ViolationPattern, entities: Sequence[NamedEntity]) -> str:
    orgs = ", ".join(e.surface for e in entities if e.kind is EntityKind.ORGANIZATION) or "(none)"
    return (
        f"Pattern:\n{_pattern_block(pattern)}\n\n"
        f"Organizations named in the article: {orgs}\n\n"
        f"{article_prompt_block(article)}"
    )


def _triple_convert(data: Any):
    if not isinstance(data, dict):
        return None, ["expected an object with subject, action, object, evidence"]
    missing = [k for k in ("subject", "action", "object", "evidence") if not isinstance(data.get(k), str)]
    if missing:
        return None, [f"missing string field(s): {', '.join(missing)}"]
    return {k: data[k].strip() for k in ("subject", "action", "object", "evidence")}, []


def ground_triple(
    article: NewsArticle,
    pattern: ViolationPattern,
    entities: Sequence[NamedEntity],
    triple: Mapping[str, str],
    *,
    model_id: str,
    extracted_at: str,
    raw: str = "",
) -> ViolationEvent | Rejection:
    """Turn a proposed triple into an event, or the first grounding failure.

    Checks run in the fixed order Ungrounded, NoEvidence, Malformed.
    """
    pid = pattern.pattern_id
    subject_norm = normalize_entity(triple["subject"])
    orgs = [e for e in entities if e.kind is EntityKind.ORGANIZATION and e.normalized == subject_norm]
    if not subject_norm or not orgs:
        if any(e.normalized == subject_norm for e in entities if e.kind is EntityKind.PERSON):
            detail = f"subject {triple['subject']!r} is a person, not an organization"
        else:
            detail = f"subject {triple['subject']!r} is not among the article's organizations"
        return Rejection(article.article_id, pid, RejectionKind.UNGROUNDED, detail, raw)
    evidence = triple["evidence"]
    if not evidence or evidence not in article.body:
        return Rejection(article.article_id, pid, RejectionKind.NO_EVIDENCE,
                         "evidence is not a verbatim passage of the article body", raw)
    if not triple["action"] or not triple["object"]:
        return Rejection(article.article_id, pid, RejectionKind.MALFORMED, "empty action or object", raw)
    n = count_sentences(evidence)
    if n > MAX_EVIDENCE_SENTENCES:
        return Rejection(article.article_id, pid, RejectionKind.MALFORMED,
                         f"evidence spans {n} sentences (limit {MAX_EVIDENCE_SENTENCES})", raw)
    object_norm = normalize_entity(triple["object"])
    object_entity = next((e for e in entities if e.normalized == object_norm), None)
    return ViolationEvent(
        article_id=article.article_id,
        pattern_iri=str(pattern_class_iri(pattern.principle_id, pattern.index)),
        principle_id=pattern.principle_id,
        subject=orgs[0],
        action=triple["action"],
        object=triple["object"],
        evidence=evidence,
        model_id=model_id,
        extracted_at=extracted_at,
        event_date=article.published_date,
        object_entity=object_entity,
    )


def extract_triple(
    article: NewsArticle,
    pattern: ViolationPattern,
    entities: Sequence[NamedEntity],
    gateway: Gateway,
    model: ModelSpec,
    *,
    extracted_at: str,
    retries: int = DEFAULT_RETRIES,
) -> ViolationEvent | Rejection:
    _require_body(article)
    captured: dict[str, str] = {}

    def convert(data: Any):
        value, problems = _triple_convert(data)
        captured["raw"] = json.dumps(data, ensure_ascii=False, sort_keys=True)
        return value, problems

    try:
        triple = ask_structured(
            gateway, model, TRIPLE_SYSTEM_PROMPT, triple_prompt(article, pattern, entities), convert,
            task="triple", item=f"{article.article_id}:{pattern.pattern_id}", retries=retries,
        )
    except GenerationError as exc:
        return Rejection(article.article_id, pattern.pattern_id, RejectionKind.MALFORMED,
                         "model output could not be parsed as a triple", exc.raw or "")
    return ground_triple(article, pattern, entities, triple, model_id=model.model_id,
                         extracted_at=extracted_at, raw=captured.get("raw", ""))


def verify_event(event: ViolationEvent, article: NewsArticle, entities: Iterable[NamedEntity]) -> list[str]:
    """Re-check an accepted event's grounding invariants; returns the failures."""
    problems = []
    if event.evidence not in article.body:
        problems.append("evidence is not a substring of the body")
    orgs = {e.normalized for e in entities if e.kind is EntityKind.ORGANIZATION}
    if event.subject.kind is not EntityKind.ORGANIZATION or event.subject.normalized not in orgs:
        problems.append("subject is not an extracted organization")
    parsed = parse_pattern_class_iri(event.pattern_iri)
    if parsed is None or parsed[0] != event.principle_id:
        problems.append("pattern IRI does not belong to the event's principle")
    return problems


# --- one-shot baseline ----------------------------------------------------------

ONE_SHOT_SYSTEM_PROMPT = (
    "You classify news articles against the ten UN Global Compact principles. Given the "
    "principle descriptions and an article, list every principle the article reports a "
    "company violating. Answer with a ```json fenced block {\"principles\": [<ids>]}."
)


def one_shot_prompt(article: NewsArticle, principles: Sequence[Principle]) -> str:
    lines = [f"{p.id}. {p.short_name}: {p.comment}" for p in sorted(principles, key=lambda p: p.id)]
    return "Principles:\n" + "\n".join(lines) + f"\n\n{article_prompt_block(article)}"


def _one_shot_convert(data: Any):
    items = data.get("principles") if isinstance(data, dict) else data
    if not isinstance(items, list):
        return None, ['expected {"principles": [...]}']
    ids = set()
    for i in items:
        try:
            value = int(i)
        except (TypeError, ValueError):
            return None, [f"principle id {i!r} is not an integer"]
        if not 1 <= value <= PRINCIPLE_COUNT:
            return None, [f"principle id {value} out of range 1..{PRINCIPLE_COUNT}"]
        ids.add(value)
    return frozenset(ids), []


def one_shot_classify(
    article: NewsArticle,
    principles: Sequence[Principle],
    gateway: Gateway,
    model: ModelSpec,
    retries: int = DEFAULT_RETRIES,
) -> frozenset[int]:
    """Direct article-to-principle assignment with no patterns and no grounding."""
    _require_body(article)
    missing = [p.id for p in principles if not p.comment]
    if missing:
        raise StateError(f"principles without comments: {missing}")
    try:
        return ask_structured(
            gateway, model, ONE_SHOT_SYSTEM_PROMPT, one_shot_prompt(article, principles), _one_shot_convert,
            task="oneshot", item=article.article_id, retries=retries, error=ExtractionError,
        )
    except GenerationError as exc:
        raise ExtractionError(f"one-shot classification failed for {article.article_id}: {exc}",
                              raw=exc.raw) from None


# --- per-corpus driver ----------------------------------------------------------

@dataclass
class ExtractionRun:
    entities: dict[str, list[NamedEntity]] = field(default_factory=dict)
    matches: dict[str, list[str]] = field(default_factory=dict)
    events: list[ViolationEvent] = field(default_factory=list)
    rejections: list[Rejection] = field(default_factory=list)
    errors: dict[str, str] = field(default_factory=dict)

    def all_entities(self) -> list[NamedEntity]:
        return [e for aid in sorted(self.entities) for e in self.entities[aid]]


def run_extraction(
    articles: Sequence[NewsArticle],
    patterns: Sequence[ViolationPattern],
    gateway: Gateway,
    model: ModelSpec,
    *,
    extracted_at: str,
    retries: int = DEFAULT_RETRIES,
) -> ExtractionRun:
    """Entities, then matching, then one triple per matched pattern, for each article.

    A failure on one article is recorded in ``errors`` and does not stop the
    others. At most one event is kept per (article, pattern) pair.
    """
    by_id = {p.pattern_id: p for p in patterns}

    def one(article: NewsArticle):
        try:
            entities = extract_entities(article, gateway, model, retries)
            matched = match_patterns(article, patterns, entities, gateway, model, retries)
            outcomes = [
                extract_triple(article, by_id[pid], entities, gateway, model,
                               extracted_at=extracted_at, retries=retries)
                for pid in matched
            ]
        except IntegrityError as exc:
            log.warning("extraction failed for %s: %s", article.article_id, exc)
            return article.article_id, None, None, [], str(exc)
        return article.article_id, entities, matched, outcomes, None

    run = ExtractionRun()
    for aid, entities, matched, outcomes, error in gateway.map(one, articles):
        if error is not None:
            run.errors[aid] = error
            continue
        run.entities[aid] = entities
        run.matches[aid] = matched
        for outcome in outcomes:
            if isinstance(outcome, ViolationEvent):
                run.events.append(outcome)
            else:
                run.rejections.append(outcome)
    return run


def run_baseline(
    articles: Sequence[NewsArticle],
    principles: Sequence[Principle],
    gateway: Gateway,
    model: ModelSpec,
    retries: int = DEFAULT_RETRIES,
) -> dict[str, frozenset[int]]:
    results = gateway.map(lambda a: one_shot_classify(a, principles, gateway, model, retries), articles)
    return {a.article_id: r for a, r in zip(articles, results)}


def dump_jsonl(records: Iterable[Mapping[str, Any]]) -> str:
    return "".join(json.dumps(r, ensure_ascii=False, sort_keys=True) + "\n" for r in records)


def dump_events(events: Iterable[ViolationEvent]) -> str:
    ordered = sorted(events, key=lambda e: (e.event_date, e.article_id, e.pattern_iri))
    return dump_jsonl(e.to_record() for e in ordered)


def load_events(text: str) -> list[ViolationEvent]:
    return [ViolationEvent.from_record(json.loads(line)) for line in text.splitlines() if line.strip()]


def dump_baseline(predictions: Mapping[str, frozenset[int]], model_id: str) -> str:
    return dump_jsonl(
        {"articleId": aid, "principleIds": sorted(predictions[aid]), "modelId": model_id}
        for aid in sorted(predictions)
    )
