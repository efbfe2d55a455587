"""Knowledge-graph assembly from extracted violation events."""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date
from typing import Iterable

from rdflib import Graph, Literal, URIRef
from rdflib.namespace import RDF, RDFS, XSD

from . import rdfio
from .errors import IntegrityError
from .extraction import EntityKind, NamedEntity, ViolationEvent, normalize_entity
from .ingest import NewsArticle
from .ontology import OntologyModel
from .vocab import (
    BASE,
    ESG,
    SCHEMA,
    article_iri,
    entity_iri,
    event_iri,
    parse_pattern_class_iri,
    principle_iri,
)

_ENTITY_TYPES = {
    EntityKind.ORGANIZATION: SCHEMA.Organization,
    EntityKind.PERSON: SCHEMA.Person,
    EntityKind.LOCATION: SCHEMA.Place,
}


@dataclass(frozen=True)
class Provenance:
    article_id: str
    model_id: str
    evidence: str


@dataclass
class KnowledgeGraph:
    graph: Graph
    events: tuple[ViolationEvent, ...]
    ontology: OntologyModel
    articles: dict[str, NewsArticle] = field(default_factory=dict)
    entity_nodes: dict[tuple[str, EntityKind], URIRef] = field(default_factory=dict)
    provenance: dict[URIRef, Provenance] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.graph)


def _dedupe_events(events: Iterable[ViolationEvent]) -> list[ViolationEvent]:
    by_key: dict[tuple[str, str], ViolationEvent] = {}
    for e in events:
        key = (e.article_id, e.pattern_iri)
        prior = by_key.get(key)
        if prior is not None and prior != e:
            raise IntegrityError(f"conflicting events for article {e.article_id} and pattern {e.pattern_iri}")
        by_key[key] = e
    return sorted(by_key.values(), key=lambda e: (e.event_date, e.article_id, e.pattern_iri))


def assemble(
    events: Iterable[ViolationEvent],
    ontology: OntologyModel,
    entities: Iterable[NamedEntity] = (),
    articles: Iterable[NewsArticle] = (),
) -> KnowledgeGraph:
    """Merge events, entities, articles and the ontology into one graph.

    Entities are merged on (normalized form, kind). Articles referenced by an
    event but not supplied get a minimal node built from the event itself.
    """
    classes = ontology.class_by_iri()
    events = _dedupe_events(events)
    for e in events:
        cls = classes.get(e.pattern_iri)
        if cls is None:
            raise IntegrityError(f"event for article {e.article_id} references unknown pattern class {e.pattern_iri}")
        if cls.principle != e.principle_id:
            raise IntegrityError(
                f"event for article {e.article_id}: pattern {cls.source_pattern} belongs to principle "
                f"{cls.principle}, event says {e.principle_id}"
            )
        if e.subject.kind is not EntityKind.ORGANIZATION:
            raise IntegrityError(f"event for article {e.article_id} has a non-organization subject")

    g = ontology.graph()
    article_map = {a.article_id: a for a in articles}

    for a in sorted(article_map.values(), key=lambda a: a.article_id):
        node = article_iri(a.article_id)
        g.add((node, RDF.type, ESG.ESGNewsArticle))
        g.add((node, ESG.articleId, Literal(a.article_id)))
        g.add((node, SCHEMA.datePublished, Literal(a.published_date.isoformat(), datatype=XSD.date)))
        if a.title:
            g.add((node, SCHEMA.headline, Literal(a.title)))
        if a.url:
            g.add((node, SCHEMA.url, Literal(a.url, datatype=XSD.anyURI)))
        if a.source_name:
            g.add((node, SCHEMA.publisher, Literal(a.source_name)))
        if a.language:
            g.add((node, SCHEMA.inLanguage, Literal(a.language)))
    for e in events:
        if e.article_id not in article_map:
            node = article_iri(e.article_id)
            g.add((node, RDF.type, ESG.ESGNewsArticle))
            g.add((node, ESG.articleId, Literal(e.article_id)))
            g.add((node, SCHEMA.datePublished, Literal(e.event_date.isoformat(), datatype=XSD.date)))

    entity_nodes: dict[tuple[str, EntityKind], URIRef] = {}
    all_entities = list(entities)
    for e in events:
        all_entities.append(e.subject)
        if e.object_entity is not None:
            all_entities.append(e.object_entity)
    for ent in all_entities:
        key = (ent.normalized, ent.kind)
        node = entity_nodes.setdefault(key, entity_iri(ent.kind.value, ent.normalized))
        g.add((node, RDF.type, _ENTITY_TYPES[ent.kind]))
        g.add((node, ESG.normalizedName, Literal(ent.normalized)))
        g.add((node, ESG.surfaceForm, Literal(ent.surface)))
        if ent.article_id in article_map:
            g.add((node, SCHEMA.subjectOf, article_iri(ent.article_id)))

    provenance: dict[URIRef, Provenance] = {}
    for e in events:
        node = event_iri(e.article_id, e.pattern_iri)
        pattern = URIRef(e.pattern_iri)
        g.add((node, RDF.type, ESG.ViolationEvent))
        g.add((node, RDF.type, pattern))
        g.add((node, ESG.reportedIn, article_iri(e.article_id)))
        g.add((node, ESG.matchesPattern, pattern))
        g.add((node, ESG.concernsPrinciple, principle_iri(e.principle_id)))
        g.add((node, ESG.subjectEntity, entity_nodes[(e.subject.normalized, e.subject.kind)]))
        if e.object_entity is not None:
            g.add((node, ESG.objectEntity, entity_nodes[(e.object_entity.normalized, e.object_entity.kind)]))
        g.add((node, ESG.actionText, Literal(e.action)))
        g.add((node, ESG.objectText, Literal(e.object)))
        g.add((node, ESG.evidence, Literal(e.evidence)))
        g.add((node, ESG.extractedBy, Literal(e.model_id)))
        g.add((node, ESG.extractedAt, Literal(e.extracted_at, datatype=XSD.dateTime)))
        g.add((node, ESG.eventDate, Literal(e.event_date.isoformat(), datatype=XSD.date)))
        g.add((node, RDFS.label, Literal(f"{e.subject.surface} {e.action} {e.object}")))
        provenance[node] = Provenance(e.article_id, e.model_id, e.evidence)

    kg = KnowledgeGraph(g, tuple(events), ontology, article_map, entity_nodes, provenance)
    check_integrity(kg)
    return kg


def dangling_references(graph: Graph) -> list[tuple]:
    """Edges pointing at project resources that have no description of their own."""
    subjects = set(graph.subjects())
    out = []
    for s, p, o in graph:
        if isinstance(o, URIRef) and str(o).startswith(BASE) and p != RDF.type and o not in subjects:
            out.append((s, p, o))
    return sorted(out)


def check_integrity(kg: KnowledgeGraph) -> None:
    dangling = dangling_references(kg.graph)
    if dangling:
        s, p, o = dangling[0]
        raise IntegrityError(f"{len(dangling)} dangling reference(s), e.g. {s} {p} {o}")
    g = kg.graph
    for node in g.subjects(RDF.type, ESG.ViolationEvent):
        for pred in (ESG.reportedIn, ESG.matchesPattern, ESG.concernsPrinciple, ESG.subjectEntity):
            n = len(list(g.objects(node, pred)))
            if n != 1:
                raise IntegrityError(f"event {node} has {n} values for {pred}, expected exactly 1")
    for e in kg.events:
        parsed = parse_pattern_class_iri(e.pattern_iri)
        if parsed is not None and parsed[0] != e.principle_id:
            raise IntegrityError(f"event {e.article_id} pattern/principle mismatch")


def serialize(kg: KnowledgeGraph, fmt: str) -> str:
    return rdfio.serialize(kg.graph, fmt)


def query_events(
    kg: KnowledgeGraph,
    *,
    entity: str | None = None,
    principle_id: int | None = None,
    date_range: tuple[date | None, date | None] | None = None,
) -> list[ViolationEvent]:
    """Events matching every given filter, ordered by (date, article, pattern)."""
    wanted = normalize_entity(entity) if entity is not None else None
    start, end = date_range if date_range is not None else (None, None)
    out = []
    for e in kg.events:
        if wanted is not None and e.subject.normalized != wanted:
            continue
        if principle_id is not None and e.principle_id != principle_id:
            continue
        if start is not None and e.event_date < start:
            continue
        if end is not None and e.event_date > end:
            continue
        out.append(e)
    return sorted(out, key=lambda e: (e.event_date, e.article_id, e.pattern_iri))


def entity_surface_forms(kg: KnowledgeGraph, normalized: str, kind: EntityKind = EntityKind.ORGANIZATION) -> list[str]:
    node = kg.entity_nodes.get((normalized, kind))
    if node is None:
        return []
    return sorted(str(o) for o in kg.graph.objects(node, ESG.surfaceForm))

