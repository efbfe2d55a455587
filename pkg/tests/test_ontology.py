from __future__ import annotations

import json
from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from rdflib import URIRef
from rdflib.compare import isomorphic
from rdflib.namespace import RDF, RDFS

from esgkg import ontology, rdfio
from esgkg.errors import IntegrityError, ParseError, StateError
from esgkg.patterns import ReviewState
from esgkg.vocab import ESG, HNA, SCHEMA, parse_pattern_class_iri, pattern_class_iri

from conftest import all_patterns, make_pattern


def test_bundled_principles(principles):
    assert [p.id for p in principles] == list(range(1, 11))
    assert {p.pillar for p in principles} == set(ontology.Pillar)
    assert principles[9].pillar is ontology.Pillar.ANTI_CORRUPTION
    assert all(p.official_text and p.comment is None for p in principles)


@pytest.mark.parametrize("pid,pillar", [(1, "HumanRights"), (2, "HumanRights"), (3, "Labour"), (6, "Labour"),
                                        (7, "Environment"), (9, "Environment"), (10, "AntiCorruption")])
def test_pillar_mapping(pid, pillar):
    assert ontology.pillar_for(pid).value == pillar


def test_principles_round_trip(tmp_path, commented):
    path = tmp_path / "p.jsonl"
    path.write_text(ontology.dump_principles(commented))
    assert ontology.load_principles(path) == commented


def test_duplicate_principle_rejected(tmp_path, principles):
    lines = ontology.dump_principles(principles).splitlines()
    path = tmp_path / "p.jsonl"
    path.write_text("\n".join(lines + [lines[0]]) + "\n")
    with pytest.raises(IntegrityError, match="duplicate principle id 1"):
        ontology.load_principles(path)


def test_missing_principle_rejected(tmp_path, principles):
    path = tmp_path / "p.jsonl"
    path.write_text(ontology.dump_principles(principles[:9]))
    with pytest.raises(IntegrityError, match="missing principle ids: 10"):
        ontology.load_principles(path)


def test_empty_official_text_reports_line(tmp_path, principles):
    records = [p.to_record() for p in principles]
    records[3]["officialText"] = " "
    path = tmp_path / "p.jsonl"
    path.write_text("".join(json.dumps(r) + "\n" for r in records))
    with pytest.raises(ParseError) as info:
        ontology.load_principles(path)
    assert info.value.position == 4


def test_wrong_pillar_rejected(tmp_path, principles):
    records = [p.to_record() for p in principles]
    records[0]["pillar"] = "Labour"
    path = tmp_path / "p.jsonl"
    path.write_text("".join(json.dumps(r) + "\n" for r in records))
    with pytest.raises(IntegrityError):
        ontology.load_principles(path)


def test_meta_classes_extend_schema_and_hna(principles):
    g = ontology.build_meta_graph(principles)
    parents = {s: o for s, o in g.subject_objects(RDFS.subClassOf)}
    assert parents[ESG.ESGNewsArticle] == SCHEMA.NewsArticle
    assert parents[ESG.ESGViolationActionPattern] == HNA.ActionPattern
    assert parents[ESG.UNGCPrincipleTypeEnumeration] == ESG.ESGPrincipleTypeEnumeration
    for prop in ontology.META_PROPERTIES:
        assert (prop.iri, RDFS.domain, prop.domain) in g
        assert (prop.iri, RDFS.range, prop.range) in g


def test_principles_are_enumeration_members(commented):
    g = ontology.build_meta_graph(commented)
    members = set(g.subjects(RDF.type, ESG.UNGCPrincipleTypeEnumeration))
    assert members == {p.iri for p in commented}
    assert all((p.iri, RDFS.comment, None) in g for p in commented)


def test_promotion_requires_review():
    for state in (ReviewState.DRAFT, ReviewState.REJECTED):
        with pytest.raises(StateError, match="review required"):
            ontology.promote_pattern(make_pattern(1, 1, state))


def test_promotion_is_deterministic():
    p = make_pattern(4, 2, ReviewState.EDITED)
    a, b = ontology.promote_pattern(p), ontology.promote_pattern(p)
    assert a == b
    assert a.iri == pattern_class_iri(4, 2)
    assert a.label == "Company action 4.2 object 4.2"
    assert parse_pattern_class_iri(str(a.iri)) == (4, 2)


def test_registry_detects_rebinding():
    registry: dict = {}
    ontology.promote_pattern(make_pattern(1, 1), registry)
    ontology.promote_pattern(make_pattern(1, 1), registry)
    with pytest.raises(IntegrityError, match="already bound"):
        ontology.promote_pattern(make_pattern(1, 1, action="different"), registry)


def test_meta_term_collision_rejected(principles):
    bad = replace(ontology.promote_pattern(make_pattern(1, 1)), iri=URIRef(ESG.ViolationEvent))
    with pytest.raises(IntegrityError, match="collides"):
        ontology.build_meta_graph(principles, [bad])


def test_thirty_classes(commented):
    from esgkg.patterns import promote_all

    classes = promote_all(all_patterns())
    g = ontology.build_meta_graph(commented, classes)
    promoted = {s for s in g.subjects(RDFS.subClassOf, ESG.ESGViolationActionPattern)}
    assert len(classes) == len(promoted) == 30


@settings(max_examples=25, deadline=None)
@given(st.sets(st.tuples(st.integers(1, 10), st.integers(1, 3)), max_size=30))
def test_random_class_subsets_round_trip(keys):
    principles = [p.with_comment(f"c{p.id}") for p in ontology.load_principles()]
    classes = [ontology.promote_pattern(make_pattern(pid, idx)) for pid, idx in sorted(keys)]
    g = ontology.build_meta_graph(principles, classes)
    for fmt in ("turtle", "jsonld"):
        text = ontology.emit_meta_ontology(principles, classes, fmt)
        assert isomorphic(g, rdfio.parse(text, fmt))


def test_context_document_lists_prefixes():
    doc = json.loads(ontology.context_document())
    assert doc["@context"]["schema"] == "https://schema.org/"
    assert "esg" in doc["@context"] and "hna" in doc["@context"]
