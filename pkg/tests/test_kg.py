from __future__ import annotations

from dataclasses import replace
from datetime import date

import pytest
from rdflib import RDF, RDFS, Literal, URIRef
from rdflib.compare import isomorphic

from esgkg import kg, ontology, patterns, rdfio
from esgkg.errors import IntegrityError
from esgkg.extraction import EntityKind, NamedEntity
from esgkg.vocab import ESG, SCHEMA, article_iri, event_iri, pattern_class_iri

from conftest import all_patterns, make_article, make_event


@pytest.fixture(scope="module")
def model(principles):
    return ontology.OntologyModel(tuple(principles), tuple(patterns.promote_all(all_patterns())))


def test_surface_forms_merge_into_one_node(model):
    events = [make_event("a1", "Acme Corp.", date(2024, 1, 1), 7),
              make_event("a2", "ACME Inc", date(2024, 2, 1), 8)]
    graph = kg.assemble(events, model)
    assert len(graph.entity_nodes) == 1
    assert kg.entity_surface_forms(graph, "acme") == ["ACME Inc", "Acme Corp."]
    subjects = {graph.graph.value(event_iri(e.article_id, e.pattern_iri), ESG.subjectEntity) for e in events}
    assert len(subjects) == 1


def test_event_node_shape(model):
    e = make_event("a1", "Acme", date(2024, 1, 3), 7, 2)
    g = kg.assemble([e], model, articles=[make_article("a1", when=date(2024, 1, 3))]).graph
    node = event_iri("a1", e.pattern_iri)
    assert (node, RDF.type, pattern_class_iri(7, 2)) in g
    assert (node, RDF.type, ESG.ViolationEvent) in g
    assert g.value(node, ESG.reportedIn) == article_iri("a1")
    assert str(g.value(node, ESG.evidence)) == e.evidence
    assert str(g.value(node, RDFS.label)) == "Acme did something"
    assert str(g.value(article_iri("a1"), SCHEMA.headline)) == "Acme dumps waste"


def test_missing_article_gets_minimal_node(model):
    g = kg.assemble([make_event("zz", "Acme", date(2024, 5, 5), 1)], model).graph
    assert g.value(article_iri("zz"), SCHEMA.datePublished) == Literal("2024-05-05", datatype=URIRef(
        "http://www.w3.org/2001/XMLSchema#date"))
    assert kg.dangling_references(g) == []


def test_unknown_pattern_class(model, principles):
    e = replace(make_event("a1", "Acme", date(2024, 1, 1), 7), pattern_iri="https://example.org/nope")
    with pytest.raises(IntegrityError, match="unknown pattern class"):
        kg.assemble([e], model)


def test_principle_mismatch(model):
    e = replace(make_event("a1", "Acme", date(2024, 1, 1), 7), principle_id=3)
    with pytest.raises(IntegrityError, match="belongs to principle 7"):
        kg.assemble([e], model)


def test_person_subject_rejected(model):
    e = make_event("a1", "Jane Roe", date(2024, 1, 1), 7)
    e = replace(e, subject=NamedEntity.make("Jane Roe", EntityKind.PERSON, "a1"))
    with pytest.raises(IntegrityError, match="non-organization"):
        kg.assemble([e], model)


def test_conflicting_duplicates(model):
    e = make_event("a1", "Acme", date(2024, 1, 1), 7)
    assert len(kg.assemble([e, e], model).events) == 1
    with pytest.raises(IntegrityError, match="conflicting"):
        kg.assemble([e, replace(e, action="other")], model)


def test_dangling_reference_detected(model):
    graph = kg.assemble([make_event("a1", "Acme", date(2024, 1, 1), 7)], model)
    g = graph.graph
    g.remove((article_iri("a1"), None, None))
    assert kg.dangling_references(g)
    with pytest.raises(IntegrityError, match="dangling"):
        kg.check_integrity(graph)


def test_query_events(model):
    events = [make_event("c", "Acme", date(2024, 3, 1), 7), make_event("a", "Acme", date(2024, 1, 1), 8),
              make_event("b", "Globex", date(2024, 2, 1), 7), make_event("d", "Acme", date(2024, 4, 1), 7, 2)]
    graph = kg.assemble(events, model)
    assert [e.article_id for e in kg.query_events(graph)] == ["a", "b", "c", "d"]
    assert [e.article_id for e in kg.query_events(graph, entity="ACME Corp")] == ["a", "c", "d"]
    assert [e.article_id for e in kg.query_events(graph, principle_id=7)] == ["b", "c", "d"]
    window = (date(2024, 2, 1), date(2024, 3, 1))
    assert [e.article_id for e in kg.query_events(graph, date_range=window)] == ["b", "c"]
    assert [e.article_id for e in kg.query_events(graph, entity="acme", date_range=(None, date(2024, 3, 31)))] == ["a", "c"]


@pytest.mark.parametrize("fmt", ["turtle", "jsonld"])
def test_serialize_round_trip(model, fmt):
    events = [make_event("a1", "Acme", date(2024, 1, 1), 7), make_event("a2", "Société Générale", date(2024, 1, 2), 10, 3)]
    entities = [NamedEntity.make("Blue River", EntityKind.LOCATION, "a1")]
    graph = kg.assemble(events, model, entities, [make_article("a1")])
    text = kg.serialize(graph, fmt)
    assert isomorphic(rdfio.parse(text, fmt), graph.graph)
    assert kg.serialize(kg.assemble(events, model, entities, [make_article("a1")]), fmt) == text
