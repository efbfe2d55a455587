"""Meta-ontology linking ESG news, regulations, UNGC principles and violation patterns.

The ontology is built as an rdflib graph from plain dataclasses and
serialized through the canonical writers in :mod:`esgkg.rdfio`.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Sequence

from rdflib import Graph, Literal, URIRef
from rdflib.namespace import RDF, RDFS, XSD

from . import rdfio
from .errors import IntegrityError, ParseError, StateError
from .vocab import (
    ESG,
    HNA,
    SCHEMA,
    pattern_class_iri,
    principle_iri,
    regulation_iri,
)

if TYPE_CHECKING:
    from .patterns import ViolationPattern

PRINCIPLE_COUNT = 10
PATTERNS_PER_PRINCIPLE = 3


class Pillar(str, enum.Enum):
    HUMAN_RIGHTS = "HumanRights"
    LABOUR = "Labour"
    ENVIRONMENT = "Environment"
    ANTI_CORRUPTION = "AntiCorruption"


def pillar_for(principle_id: int) -> Pillar:
    if 1 <= principle_id <= 2:
        return Pillar.HUMAN_RIGHTS
    if 3 <= principle_id <= 6:
        return Pillar.LABOUR
    if 7 <= principle_id <= 9:
        return Pillar.ENVIRONMENT
    if principle_id == 10:
        return Pillar.ANTI_CORRUPTION
    raise ValueError(f"principle id out of range: {principle_id}")


@dataclass(frozen=True)
class Principle:
    id: int
    pillar: Pillar
    short_name: str
    official_text: str
    comment: str | None = None

    @property
    def iri(self) -> URIRef:
        return principle_iri(self.id)

    def with_comment(self, comment: str) -> "Principle":
        return replace(self, comment=comment)

    def to_record(self) -> dict:
        record = {
            "id": self.id,
            "pillar": self.pillar.value,
            "shortName": self.short_name,
            "officialText": self.official_text,
        }
        if self.comment is not None:
            record["comment"] = self.comment
        return record


@dataclass(frozen=True)
class ViolationClassDef:
    iri: URIRef
    label: str
    parent: URIRef
    source_pattern: str
    principle: int
    comment: str


@dataclass(frozen=True)
class ClassDef:
    iri: URIRef
    label: str
    comment: str
    parent: URIRef


@dataclass(frozen=True)
class PropertyDef:
    iri: URIRef
    label: str
    domain: URIRef
    range: URIRef


@dataclass(frozen=True)
class MetaOntology:
    classes: tuple[ClassDef, ...]
    properties: tuple[PropertyDef, ...]
    namespaces: dict[str, str]


META_CLASSES = (
    ClassDef(ESG.ESGNewsArticle, "ESG news article",
             "A news article reporting on ESG-relevant corporate conduct.", SCHEMA.NewsArticle),
    ClassDef(ESG.ESGRegulation, "ESG regulation",
             "A regulatory or normative framework that defines ESG principles.", SCHEMA.Legislation),
    ClassDef(ESG.ESGViolationActionPattern, "ESG violation action pattern",
             "A relational (EntityA, Action, EntityB) pattern describing conduct that breaches an ESG principle.",
             HNA.ActionPattern),
    ClassDef(ESG.ESGPrincipleTypeEnumeration, "ESG principle type enumeration",
             "Enumeration of the principles defined by an ESG framework.", SCHEMA.Enumeration),
    ClassDef(ESG.UNGCPrincipleTypeEnumeration, "UNGC principle type enumeration",
             "The ten principles of the United Nations Global Compact.", ESG.ESGPrincipleTypeEnumeration),
    ClassDef(ESG.ESGViolationActionPatternSet, "ESG violation action pattern set",
             "The set of violation patterns associated with one principle.", SCHEMA.ItemList),
    ClassDef(ESG.ViolationEvent, "violation event",
             "A grounded violation extracted from a news article and typed by a violation pattern class.",
             SCHEMA.Event),
)

_STR = XSD.string
META_PROPERTIES = (
    PropertyDef(ESG.definesPrinciple, "defines principle", ESG.ESGRegulation, ESG.ESGPrincipleTypeEnumeration),
    PropertyDef(ESG.principleNumber, "principle number", ESG.ESGPrincipleTypeEnumeration, XSD.integer),
    PropertyDef(ESG.pillar, "pillar", ESG.ESGPrincipleTypeEnumeration, _STR),
    PropertyDef(ESG.officialText, "official text", ESG.ESGPrincipleTypeEnumeration, _STR),
    PropertyDef(ESG.violatesPrinciple, "violates principle", ESG.ESGViolationActionPattern,
                ESG.ESGPrincipleTypeEnumeration),
    PropertyDef(ESG.entityA, "entity A", ESG.ESGViolationActionPattern, _STR),
    PropertyDef(ESG.action, "action", ESG.ESGViolationActionPattern, _STR),
    PropertyDef(ESG.entityB, "entity B", ESG.ESGViolationActionPattern, _STR),
    PropertyDef(ESG.lookFor, "look for", ESG.ESGViolationActionPattern, _STR),
    PropertyDef(ESG.ignore, "ignore", ESG.ESGViolationActionPattern, _STR),
    PropertyDef(ESG.reviewState, "review state", ESG.ESGViolationActionPattern, _STR),
    PropertyDef(ESG.patternId, "pattern id", RDFS.Class, _STR),
    PropertyDef(ESG.alignedPrinciple, "aligned principle", RDFS.Class, ESG.ESGPrincipleTypeEnumeration),
    PropertyDef(ESG.hasPattern, "has pattern", ESG.ESGViolationActionPatternSet, ESG.ESGViolationActionPattern),
    PropertyDef(ESG.patternSetFor, "pattern set for", ESG.ESGViolationActionPatternSet,
                ESG.ESGPrincipleTypeEnumeration),
    PropertyDef(ESG.articleId, "article id", ESG.ESGNewsArticle, _STR),
    PropertyDef(ESG.reportedIn, "reported in", ESG.ViolationEvent, ESG.ESGNewsArticle),
    PropertyDef(ESG.matchesPattern, "matches pattern", ESG.ViolationEvent, RDFS.Class),
    PropertyDef(ESG.concernsPrinciple, "concerns principle", ESG.ViolationEvent, ESG.ESGPrincipleTypeEnumeration),
    PropertyDef(ESG.subjectEntity, "subject entity", ESG.ViolationEvent, SCHEMA.Organization),
    PropertyDef(ESG.objectEntity, "object entity", ESG.ViolationEvent, SCHEMA.Thing),
    PropertyDef(ESG.actionText, "action text", ESG.ViolationEvent, _STR),
    PropertyDef(ESG.objectText, "object text", ESG.ViolationEvent, _STR),
    PropertyDef(ESG.evidence, "evidence", ESG.ViolationEvent, _STR),
    PropertyDef(ESG.extractedBy, "extracted by", ESG.ViolationEvent, _STR),
    PropertyDef(ESG.extractedAt, "extracted at", ESG.ViolationEvent, XSD.dateTime),
    PropertyDef(ESG.eventDate, "event date", ESG.ViolationEvent, XSD.date),
    PropertyDef(ESG.normalizedName, "normalized name", SCHEMA.Thing, _STR),
    PropertyDef(ESG.surfaceForm, "surface form", SCHEMA.Thing, _STR),
)

META = MetaOntology(META_CLASSES, META_PROPERTIES, dict(rdfio.jsonld_context()))


# --- principles -------------------------------------------------------------

def bundled_principles_path() -> Path:
    return Path(str(resources.files("esgkg") / "data" / "principles.jsonl"))


def _principle_from_record(record: dict, source: str, line: int) -> Principle:
    if not isinstance(record, dict):
        raise ParseError("record is not an object", source=source, position=line)
    try:
        pid = record["id"]
        pillar = Pillar(record["pillar"])
        short_name = record["shortName"]
        text = record["officialText"]
    except KeyError as exc:
        raise ParseError(f"missing field {exc.args[0]!r}", source=source, position=line) from None
    except ValueError:
        raise ParseError(f"unknown pillar {record.get('pillar')!r}", source=source, position=line) from None
    if not isinstance(pid, int) or isinstance(pid, bool) or not 1 <= pid <= PRINCIPLE_COUNT:
        raise ParseError(f"principle id must be an integer 1..10, got {pid!r}", source=source, position=line)
    if not isinstance(text, str) or not text.strip():
        raise ParseError(f"principle {pid} has empty officialText", source=source, position=line)
    if not isinstance(short_name, str) or not short_name.strip():
        raise ParseError(f"principle {pid} has empty shortName", source=source, position=line)
    if pillar is not pillar_for(pid):
        raise IntegrityError(f"principle {pid} belongs to pillar {pillar_for(pid).value}, not {pillar.value}")
    comment = record.get("comment")
    return Principle(pid, pillar, short_name.strip(), text.strip(), comment or None)


def load_principles(path: str | Path | None = None) -> list[Principle]:
    """Load the ten principles from a line-delimited JSON file."""
    path = bundled_principles_path() if path is None else Path(path)
    source = str(path)
    principles: list[Principle] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", source=source, position=line_no) from None
            principles.append(_principle_from_record(record, source, line_no))
    return check_principles(principles)


def check_principles(principles: Sequence[Principle]) -> list[Principle]:
    seen: set[int] = set()
    for p in principles:
        if p.id in seen:
            raise IntegrityError(f"duplicate principle id {p.id}")
        seen.add(p.id)
    missing = sorted(set(range(1, PRINCIPLE_COUNT + 1)) - seen)
    if missing:
        raise IntegrityError(f"missing principle ids: {', '.join(map(str, missing))}")
    return sorted(principles, key=lambda p: p.id)


def dump_principles(principles: Iterable[Principle]) -> str:
    return "".join(
        json.dumps(p.to_record(), ensure_ascii=False, sort_keys=True) + "\n"
        for p in sorted(principles, key=lambda p: p.id)
    )


# --- promotion --------------------------------------------------------------

PROMOTABLE_STATES = frozenset({"Approved", "Edited"})


def promote_pattern(
    pattern: "ViolationPattern",
    registry: dict[URIRef, ViolationClassDef] | None = None,
) -> ViolationClassDef:
    """Promote a reviewed pattern instance to a subclass of ESGViolationActionPattern.

    The class IRI depends only on (principle id, pattern index), so promoting
    the same pattern twice yields an identical definition. When ``registry``
    is given, the new definition is recorded there and a clash with a
    different pattern already bound to the IRI raises IntegrityError.
    """
    state = getattr(pattern.review_state, "value", pattern.review_state)
    if state not in PROMOTABLE_STATES:
        raise StateError(f"review required: pattern {pattern.pattern_id} is {state}")
    iri = pattern_class_iri(pattern.principle_id, pattern.index)
    label = f"{pattern.entity_a} {pattern.action} {pattern.entity_b}"
    classdef = ViolationClassDef(
        iri=iri,
        label=label,
        parent=URIRef(ESG.ESGViolationActionPattern),
        source_pattern=pattern.pattern_id,
        principle=pattern.principle_id,
        comment=(
            f"Violation of UNGC Principle {pattern.principle_id}: "
            f"({pattern.entity_a}, {pattern.action}, {pattern.entity_b})."
        ),
    )
    if registry is not None:
        bound = registry.get(iri)
        if bound is not None and bound != classdef:
            raise IntegrityError(f"class IRI {iri} is already bound to a different pattern ({bound.label!r})")
        registry[iri] = classdef
    return classdef


# --- graph construction -----------------------------------------------------

@dataclass(frozen=True)
class OntologyModel:
    principles: tuple[Principle, ...]
    classes: tuple[ViolationClassDef, ...] = ()

    def class_by_iri(self) -> dict[str, ViolationClassDef]:
        return {str(c.iri): c for c in self.classes}

    def graph(self) -> Graph:
        return build_meta_graph(self.principles, self.classes)


def _check_class_iris(principles: Sequence[Principle], classes: Sequence[ViolationClassDef]) -> None:
    reserved = {str(c.iri) for c in META_CLASSES} | {str(p.iri) for p in META_PROPERTIES}
    reserved |= {str(p.iri) for p in principles} | {str(regulation_iri())}
    bound: dict[str, ViolationClassDef] = {}
    for c in classes:
        key = str(c.iri)
        if key in reserved:
            raise IntegrityError(f"class IRI {key} collides with a meta-ontology term")
        if key in bound and bound[key] != c:
            raise IntegrityError(f"IRI collision between generated classes at {key}")
        bound[key] = c
        if c.parent != ESG.ESGViolationActionPattern:
            raise IntegrityError(f"class {key} must specialise ESGViolationActionPattern")


def build_meta_graph(
    principles: Sequence[Principle], classes: Sequence[ViolationClassDef] = ()
) -> Graph:
    _check_class_iris(principles, classes)
    g = Graph()
    for c in META_CLASSES:
        g.add((c.iri, RDF.type, RDFS.Class))
        g.add((c.iri, RDFS.label, Literal(c.label, lang="en")))
        g.add((c.iri, RDFS.comment, Literal(c.comment, lang="en")))
        g.add((c.iri, RDFS.subClassOf, c.parent))
    for p in META_PROPERTIES:
        g.add((p.iri, RDF.type, RDF.Property))
        g.add((p.iri, RDFS.label, Literal(p.label, lang="en")))
        g.add((p.iri, RDFS.domain, p.domain))
        g.add((p.iri, RDFS.range, p.range))

    reg = regulation_iri()
    g.add((reg, RDF.type, ESG.ESGRegulation))
    g.add((reg, SCHEMA.name, Literal("United Nations Global Compact", lang="en")))
    for pr in principles:
        g.add((reg, ESG.definesPrinciple, pr.iri))
        g.add((pr.iri, RDF.type, ESG.UNGCPrincipleTypeEnumeration))
        g.add((pr.iri, RDFS.label, Literal(pr.short_name, lang="en")))
        g.add((pr.iri, ESG.principleNumber, Literal(pr.id, datatype=XSD.integer)))
        g.add((pr.iri, ESG.pillar, Literal(pr.pillar.value)))
        g.add((pr.iri, ESG.officialText, Literal(pr.official_text, lang="en")))
        if pr.comment:
            g.add((pr.iri, RDFS.comment, Literal(pr.comment, lang="en")))

    for c in classes:
        g.add((c.iri, RDF.type, RDFS.Class))
        g.add((c.iri, RDFS.subClassOf, c.parent))
        g.add((c.iri, RDFS.label, Literal(c.label, lang="en")))
        g.add((c.iri, RDFS.comment, Literal(c.comment, lang="en")))
        g.add((c.iri, ESG.patternId, Literal(c.source_pattern)))
        g.add((c.iri, ESG.alignedPrinciple, principle_iri(c.principle)))
    return g


def emit_meta_ontology(
    principles: Sequence[Principle],
    classes: Sequence[ViolationClassDef] = (),
    fmt: str = "turtle",
) -> str:
    fmt = rdfio.normalize_format(fmt)
    return rdfio.serialize(build_meta_graph(principles, classes), fmt)


def context_document() -> str:
    """The JSON-LD context shipped alongside every emitted document."""
    return json.dumps({"@context": rdfio.jsonld_context()}, indent=2, sort_keys=True) + "\n"
