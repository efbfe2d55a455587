from __future__ import annotations

import shutil
from datetime import date
from pathlib import Path

import pytest

from esgkg import ontology, patterns
from esgkg.config import demo_config_path, demo_dir, load_config
from esgkg.extraction import EntityKind, NamedEntity, ViolationEvent
from esgkg.gateway import Gateway, ModelSpec, ScriptedProvider, register_fixtures
from esgkg.ingest import NewsArticle, Sentiment
from esgkg.pipeline import run_pipeline
from esgkg.vocab import pattern_class_iri

SCRIPTED = ModelSpec("scripted", "test-script")


@pytest.fixture(scope="session")
def demo_run(tmp_path_factory) -> Path:
    """One offline demo run shared by read-only tests."""
    out = tmp_path_factory.mktemp("demo-run")
    run_pipeline(load_config(demo_config_path(), out_dir=out))
    return out


@pytest.fixture
def demo_copy(tmp_path) -> Path:
    """A writable copy of the bundled demo inputs and fixtures."""
    dest = tmp_path / "demo"
    shutil.copytree(demo_dir(), dest, ignore=shutil.ignore_patterns("out", "__pycache__"))
    return dest


@pytest.fixture(scope="session")
def demo_gateway() -> Gateway:
    return Gateway(fixtures=[register_fixtures(demo_dir() / "fixtures")], offline=True, parallelism=1)


@pytest.fixture(scope="session")
def principles() -> list[ontology.Principle]:
    return ontology.load_principles()


@pytest.fixture(scope="session")
def commented(principles) -> list[ontology.Principle]:
    return [p.with_comment(f"Comment for principle {p.id}.") for p in principles]


def scripted_gateway(answers: dict, *, parallelism: int = 1) -> Gateway:
    return Gateway(providers={"scripted": ScriptedProvider(answers)}, offline=False, parallelism=parallelism)


def make_pattern(pid: int, idx: int, state=patterns.ReviewState.APPROVED, **kw) -> patterns.ViolationPattern:
    return patterns.ViolationPattern(
        pid, idx,
        kw.get("entity_a", "Company"),
        kw.get("action", f"action {pid}.{idx}"),
        kw.get("entity_b", f"object {pid}.{idx}"),
        tuple(kw.get("look_for", (f"The company did bad thing {pid}.{idx}.",))),
        tuple(kw.get("ignore", (f"The company did good thing {pid}.{idx}.",))),
        state,
    )


def all_patterns(state=patterns.ReviewState.APPROVED) -> list[patterns.ViolationPattern]:
    return [make_pattern(pid, idx, state) for pid in range(1, 11) for idx in range(1, 4)]


def make_article(aid: str = "x1", body: str = "Acme Corp dumped waste into the river. Locals protested.",
                 when: date = date(2024, 1, 1), **kw) -> NewsArticle:
    return NewsArticle(
        article_id=aid,
        url=kw.get("url", f"https://example.org/{aid}"),
        title=kw.get("title", "Acme dumps waste"),
        body=body,
        language=kw.get("language", "en"),
        published_date=when,
        source_name=kw.get("source_name", "Test Wire"),
        sentiment_hint=kw.get("sentiment_hint", Sentiment.NEGATIVE),
    )


def make_event(aid: str, entity: str, when: date, pid: int, idx: int = 1) -> ViolationEvent:
    subject = NamedEntity.make(entity, EntityKind.ORGANIZATION, aid)
    return ViolationEvent(
        article_id=aid,
        pattern_iri=str(pattern_class_iri(pid, idx)),
        principle_id=pid,
        subject=subject,
        action="did",
        object="something",
        evidence=f"{entity} did something.",
        model_id="test",
        extracted_at="2024-06-01T00:00:00Z",
        event_date=when,
    )


# --- acceptance reporting ------------------------------------------------------------

_CRITERIA: dict[int, tuple[str, list[str]]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")


def pytest_runtest_logreport(report):
    marker = getattr(report, "criterion", None)
    if marker is None:
        return
    number, title = marker
    outcomes = _CRITERIA.setdefault(number, (title, []))[1]
    if report.when == "call" or report.failed or report.skipped:
        outcomes.append(report.outcome)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        outcome.get_result().criterion = tuple(marker.args)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, outcomes = _CRITERIA[number]
        verdict = "PASS" if outcomes and all(o == "passed" for o in outcomes) else "FAIL"
        terminalreporter.write_line(f"criterion {number} {verdict}: {title} [{len(outcomes)} test(s)]")
