"""Namespace constants and IRI minting.

The ``hna:`` namespace is a placeholder: the action-pattern vocabulary this
ontology extends is published without a dereferenceable IRI, so a stable
stand-in under example.org is used. It is not authoritative and can be
swapped here without touching any other module.
"""

from __future__ import annotations

import hashlib
import re

from rdflib import Namespace, URIRef
from rdflib.namespace import OWL, RDF, RDFS, XSD

BASE = "https://example.org/esgkg"

ESG = Namespace(f"{BASE}/ontology#")
HNA = Namespace("https://example.org/hna/ontology#")
SCHEMA = Namespace("https://schema.org/")

PREFIXES: dict[str, str] = {
    "esg": str(ESG),
    "hna": str(HNA),
    "owl": str(OWL),
    "rdf": str(RDF),
    "rdfs": str(RDFS),
    "schema": str(SCHEMA),
    "xsd": str(XSD),
}

_SLUG = re.compile(r"^[A-Za-z0-9._-]+$")


def principle_iri(principle_id: int) -> URIRef:
    return URIRef(f"{BASE}/ungc/p{principle_id}")


def pattern_class_iri(principle_id: int, index: int) -> URIRef:
    return URIRef(f"{BASE}/ungc/p{principle_id}/pattern{index}")


_PATTERN_CLASS = re.compile(re.escape(BASE) + r"/ungc/p(\d+)/pattern(\d+)$")


def parse_pattern_class_iri(iri: str) -> tuple[int, int] | None:
    """(principle id, pattern index) for a minted pattern-class IRI, else None."""
    m = _PATTERN_CLASS.match(str(iri))
    return (int(m.group(1)), int(m.group(2))) if m else None


def pattern_instance_iri(principle_id: int, index: int) -> URIRef:
    return URIRef(f"{BASE}/ungc/p{principle_id}/instance/pattern{index}")


def pattern_set_iri(principle_id: int) -> URIRef:
    return URIRef(f"{BASE}/ungc/p{principle_id}/patternset")


def regulation_iri() -> URIRef:
    return URIRef(f"{BASE}/regulation/ungc")


def _digest(text: str, n: int = 16) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:n]


def article_iri(article_id: str) -> URIRef:
    local = article_id if _SLUG.match(article_id) else _digest(article_id)
    return URIRef(f"{BASE}/article/{local}")


def entity_iri(kind: str, normalized: str) -> URIRef:
    return URIRef(f"{BASE}/entity/{kind.lower()}/{_digest(normalized)}")


def event_iri(article_id: str, pattern_iri: str) -> URIRef:
    return URIRef(f"{BASE}/event/{_digest(article_id + '|' + pattern_iri)}")
