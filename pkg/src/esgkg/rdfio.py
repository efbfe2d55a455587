"""Canonical Turtle and JSON-LD writers.

Both writers order subjects, then predicates, then objects by their full
lexical form, so the same graph always produces the same bytes. Blank
nodes are rejected: every resource this package mints has an IRI.
Parsing goes through rdflib so round-trips are checked by an independent
reader.
"""

from __future__ import annotations

import json
import re
from collections import defaultdict
from typing import Iterable

from rdflib import BNode, Graph, Literal, URIRef
from rdflib.compare import isomorphic
from rdflib.namespace import RDF, XSD

from .errors import UsageError
from .vocab import PREFIXES

FORMATS = ("jsonld", "turtle")
_FORMAT_ALIASES = {
    "jsonld": "jsonld",
    "json-ld": "jsonld",
    "turtle": "turtle",
    "ttl": "turtle",
}
_PN_LOCAL = re.compile(r"^[A-Za-z_][A-Za-z0-9_-]*$")


def normalize_format(fmt: str) -> str:
    try:
        return _FORMAT_ALIASES[fmt.strip().lower()]
    except KeyError:
        raise UsageError(f"unknown RDF format {fmt!r}; expected one of {', '.join(FORMATS)}") from None


def _split(iri: str, prefixes: dict[str, str]) -> tuple[str, str] | None:
    best = None
    for prefix, ns in prefixes.items():
        if iri.startswith(ns) and (best is None or len(ns) > len(prefixes[best])):
            best = prefix
    if best is None:
        return None
    return best, iri[len(prefixes[best]):]


def _object_key(term) -> tuple:
    if isinstance(term, URIRef):
        return (0, str(term), "", "")
    return (1, str(term), str(term.datatype or ""), term.language or "")


def _check_no_bnodes(graph: Graph) -> None:
    for triple in graph:
        if any(isinstance(t, BNode) for t in triple):
            raise ValueError("blank nodes are not supported by the canonical writers")


def _grouped(graph: Graph) -> list[tuple[URIRef, list[tuple[URIRef, list]]]]:
    _check_no_bnodes(graph)
    by_subject: dict = defaultdict(lambda: defaultdict(list))
    for s, p, o in graph:
        by_subject[s][p].append(o)
    out = []
    for s in sorted(by_subject, key=str):
        preds = by_subject[s]
        ordered = sorted(preds, key=lambda p: (p != RDF.type, str(p)))
        out.append((s, [(p, sorted(preds[p], key=_object_key)) for p in ordered]))
    return out


# --- Turtle -----------------------------------------------------------------

def _escape(value: str) -> str:
    return (
        value.replace("\\", "\\\\")
        .replace('"', '\\"')
        .replace("\n", "\\n")
        .replace("\r", "\\r")
        .replace("\t", "\\t")
    )


def _ttl_iri(iri: str, prefixes: dict[str, str]) -> str:
    split = _split(iri, prefixes)
    if split and _PN_LOCAL.match(split[1]):
        return f"{split[0]}:{split[1]}"
    return f"<{iri}>"


def _ttl_term(term, prefixes: dict[str, str]) -> str:
    if isinstance(term, URIRef):
        return _ttl_iri(str(term), prefixes)
    text = f'"{_escape(str(term))}"'
    if term.language:
        return f"{text}@{term.language}"
    if term.datatype is not None and term.datatype != XSD.string:
        return f"{text}^^{_ttl_iri(str(term.datatype), prefixes)}"
    return text


def to_turtle(graph: Graph, prefixes: dict[str, str] | None = None) -> str:
    prefixes = dict(PREFIXES if prefixes is None else prefixes)
    lines = [f"@prefix {p}: <{ns}> ." for p, ns in sorted(prefixes.items())]
    lines.append("")
    for s, preds in _grouped(graph):
        lines.append(_ttl_term(s, prefixes))
        for i, (p, objs) in enumerate(preds):
            pred = "a" if p == RDF.type else _ttl_term(p, prefixes)
            objects = ", ".join(_ttl_term(o, prefixes) for o in objs)
            end = " ." if i == len(preds) - 1 else " ;"
            lines.append(f"    {pred} {objects}{end}")
        lines.append("")
    return "\n".join(lines)


# --- JSON-LD ----------------------------------------------------------------

def jsonld_context(prefixes: dict[str, str] | None = None) -> dict:
    prefixes = PREFIXES if prefixes is None else prefixes
    return {p: ns for p, ns in sorted(prefixes.items())}


def _compact(iri: str, prefixes: dict[str, str]) -> str:
    split = _split(iri, prefixes)
    if split and split[1] and not split[1].startswith("//"):
        return f"{split[0]}:{split[1]}"
    return iri


def _jsonld_value(term, prefixes: dict[str, str]) -> dict:
    if isinstance(term, URIRef):
        return {"@id": _compact(str(term), prefixes)}
    value: dict = {"@value": str(term)}
    if term.language:
        value["@language"] = term.language
    elif term.datatype is not None and term.datatype != XSD.string:
        value["@type"] = _compact(str(term.datatype), prefixes)
    return value


def to_jsonld_document(graph: Graph, prefixes: dict[str, str] | None = None) -> dict:
    prefixes = dict(PREFIXES if prefixes is None else prefixes)
    nodes = []
    for s, preds in _grouped(graph):
        node: dict = {"@id": _compact(str(s), prefixes)}
        for p, objs in preds:
            if p == RDF.type and all(isinstance(o, URIRef) for o in objs):
                node["@type"] = [_compact(str(o), prefixes) for o in objs]
            else:
                node[_compact(str(p), prefixes)] = [_jsonld_value(o, prefixes) for o in objs]
        nodes.append(node)
    return {"@context": jsonld_context(prefixes), "@graph": nodes}


def to_jsonld(graph: Graph, prefixes: dict[str, str] | None = None) -> str:
    doc = to_jsonld_document(graph, prefixes)
    return json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


# --- dispatch ---------------------------------------------------------------

def serialize(graph: Graph, fmt: str, prefixes: dict[str, str] | None = None) -> str:
    fmt = normalize_format(fmt)
    if fmt == "turtle":
        return to_turtle(graph, prefixes)
    return to_jsonld(graph, prefixes)


def parse(text: str, fmt: str) -> Graph:
    fmt = normalize_format(fmt)
    graph = Graph()
    graph.parse(data=text, format="json-ld" if fmt == "jsonld" else "turtle")
    return graph


def roundtrip_isomorphic(graph: Graph, formats: Iterable[str] = FORMATS) -> bool:
    """Serialize, re-parse, and compare against ``graph`` for every format."""
    return all(isomorphic(graph, parse(serialize(graph, fmt), fmt)) for fmt in formats)


def literal_list(values: Iterable[str]) -> list[Literal]:
    return [Literal(v) for v in values]
