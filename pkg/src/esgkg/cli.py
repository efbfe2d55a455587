"""Command-line entry point.

Every subcommand reads the same YAML config (``--config``, the bundled demo
by default). Granular subcommands read and write inside a run directory,
the config's ``paths.out`` unless ``--run-dir`` is given, so they compose
into the same layout that ``run`` produces.
"""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click

from . import evaluation, extraction, ingest, kg, ontology, patterns, pipeline
from .config import PipelineConfig, build_gateway, load_config
from .errors import EsgKgError, IntegrityError, UsageError
from .gateway import ModelSpec
from .pipeline import atomic_write

log = logging.getLogger("esgkg")


class Context:
    def __init__(self, config_path: Path | None, run_dir: Path | None, offline: bool | None):
        self.config_path = config_path
        self.run_dir_override = run_dir
        self.offline = offline
        self._cfg: PipelineConfig | None = None

    def config(self, **overrides) -> PipelineConfig:
        if self._cfg is None or overrides:
            cfg = load_config(self.config_path, offline=self.offline, out_dir=self.run_dir_override, **overrides)
            if overrides:
                return cfg
            self._cfg = cfg
        return self._cfg

    @property
    def run_dir(self) -> Path:
        return self.config().out_dir


def parse_model(value: str | None, fallback: ModelSpec) -> ModelSpec:
    """``provider:model`` or a bare model id that keeps the configured provider."""
    if not value:
        return fallback
    provider, sep, model_id = value.partition(":")
    if not sep:
        provider, model_id = fallback.provider_id, value
    return ModelSpec(provider, model_id, fallback.temperature, fallback.max_output_tokens)


def parse_formats(value: str) -> list[str]:
    from .rdfio import normalize_format

    formats = [normalize_format(f.strip()) for f in value.split(",") if f.strip()]
    if not formats:
        raise UsageError("--format needs at least one of jsonld, turtle")
    return formats


def write_artifacts(base: Path, artifacts: dict[str, str]) -> None:
    for rel in sorted(artifacts):
        atomic_write(base / rel, artifacts[rel])
        click.echo(f"wrote {base / rel}")


def principles_for(run_dir: Path) -> list[ontology.Principle]:
    """Annotated principles from the run directory, else the bundled texts."""
    path = run_dir / pipeline.PRINCIPLES_FILE
    return ontology.load_principles(path if path.exists() else None)


@click.group()
@click.option("--config", "config_path", type=click.Path(path_type=Path, dir_okay=False),
              help="Pipeline YAML config (defaults to the bundled demo).")
@click.option("--run-dir", type=click.Path(path_type=Path, file_okay=False),
              help="Working directory for artifacts (defaults to paths.out).")
@click.option("--offline/--live", default=None, help="Override run.offline from the config.")
@click.option("-v", "--verbose", count=True)
@click.pass_context
def cli(ctx: click.Context, config_path, run_dir, offline, verbose) -> None:
    """ESG violation knowledge-graph pipeline."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    ctx.obj = Context(config_path, run_dir, offline)


# --- ontology -----------------------------------------------------------------------

@cli.group("ontology")
def ontology_group() -> None:
    """Principle enumeration and meta-ontology."""


@ontology_group.command("emit")
@click.option("--format", "formats", default="turtle,jsonld", show_default=True)
@click.option("--patterns", "pattern_dir", type=click.Path(path_type=Path, file_okay=False),
              help="Reviewed pattern store whose classes are included.")
@click.pass_obj
def ontology_emit(obj: Context, formats, pattern_dir) -> None:
    """Annotate principles with comments and write the meta-ontology."""
    cfg = obj.config()
    gateway = build_gateway(cfg)
    principles = patterns.annotate_principles(
        ontology.load_principles(cfg.principles), gateway, cfg.model("generate"), cfg.comment_max_chars
    )
    artifacts = {
        pipeline.PRINCIPLES_FILE: ontology.dump_principles(principles),
        pipeline.CONTEXT_FILE: ontology.context_document(),
    }
    classes = []
    pattern_dir = pattern_dir or cfg.out_dir / pipeline.REVIEWED_DIR
    if pattern_dir.is_dir():
        classes = patterns.promote_all(patterns.read_store(pattern_dir))
    for fmt in parse_formats(formats):
        name = pipeline.ONTOLOGY_TTL if fmt == "turtle" else pipeline.ONTOLOGY_JSONLD
        artifacts[name] = ontology.emit_meta_ontology(principles, classes, fmt)
    write_artifacts(cfg.out_dir, artifacts)


# --- patterns -----------------------------------------------------------------------

@cli.group("patterns")
def patterns_group() -> None:
    """Violation pattern generation, review and promotion."""


@patterns_group.command("generate")
@click.option("--model", help="provider:model or model id (defaults to models.generate).")
@click.pass_obj
def patterns_generate(obj: Context, model) -> None:
    """Draft three patterns per principle into patterns/drafts (append-only)."""
    cfg = obj.config()
    gateway = build_gateway(cfg)
    spec = parse_model(model, cfg.model("generate"))
    principles = principles_for(cfg.out_dir)
    drafts_dir = cfg.out_dir / pipeline.DRAFTS_DIR
    existing = patterns.read_store(drafts_dir) if drafts_dir.is_dir() else []
    fresh = pipeline.generate_drafts(principles, gateway, spec, cfg.retries)
    merged = patterns.merge_drafts(existing, fresh)
    write_artifacts(drafts_dir, patterns.render_store(merged))
    click.echo(f"{len(merged)} patterns in store ({len(merged) - len(existing)} new)")


@patterns_group.command("review")
@click.option("--apply", "review_file", required=True, type=click.Path(path_type=Path, exists=True, dir_okay=False))
@click.pass_obj
def patterns_review(obj: Context, review_file: Path) -> None:
    """Apply a review decision file to the drafts, writing patterns/reviewed."""
    run_dir = obj.run_dir
    drafts = patterns.read_store(run_dir / pipeline.DRAFTS_DIR)
    decisions = patterns.parse_review(review_file.read_text(encoding="utf-8"), review_file.name)
    outcome = patterns.apply_review(drafts, decisions)
    write_artifacts(run_dir / pipeline.REVIEWED_DIR, patterns.render_store(outcome.patterns))
    counts: dict[str, int] = {}
    for p in outcome.patterns:
        counts[p.review_state.value] = counts.get(p.review_state.value, 0) + 1
    click.echo(", ".join(f"{k}: {v}" for k, v in sorted(counts.items())))
    if not outcome.ok:
        for pid, violations in sorted(outcome.violations.items()):
            click.echo(f"{pid}: edit rejected: {'; '.join(violations)}", err=True)
        raise IntegrityError(f"{len(outcome.violations)} edit(s) failed validation")


@patterns_group.command("promote")
@click.option("--format", "formats", default="turtle,jsonld", show_default=True)
@click.pass_obj
def patterns_promote(obj: Context, formats) -> None:
    """Promote reviewed patterns to ontology classes."""
    run_dir = obj.run_dir
    classes = patterns.promote_all(patterns.read_store(run_dir / pipeline.REVIEWED_DIR))
    principles = principles_for(run_dir)
    artifacts = {}
    for fmt in parse_formats(formats):
        name = pipeline.ONTOLOGY_TTL if fmt == "turtle" else pipeline.ONTOLOGY_JSONLD
        artifacts[name] = ontology.emit_meta_ontology(principles, classes, fmt)
    write_artifacts(run_dir, artifacts)
    click.echo(f"promoted {len(classes)} violation classes")


# --- ingest -------------------------------------------------------------------------

@cli.group("ingest")
def ingest_group() -> None:
    """Corpus loading and relevance filtering."""


@ingest_group.command("filter")
@click.option("--corpus", type=click.Path(path_type=Path, exists=True, dir_okay=False))
@click.option("--model", help="provider:model or model id (defaults to models.filter).")
@click.option("--stage", type=click.Choice(["all", "1", "2"]), default="all", show_default=True)
@click.pass_obj
def ingest_filter(obj: Context, corpus, model, stage) -> None:
    """Filter a corpus down to company-level negative ESG articles."""
    cfg = obj.config()
    corpus = corpus or cfg.corpus
    if corpus is None:
        raise UsageError("--corpus is required when paths.corpus is unset")
    gateway = build_gateway(cfg)
    spec = parse_model(model, cfg.model("filter"))
    loaded = ingest.load_corpus(corpus)
    articles, verdicts = loaded.articles, []
    if stage in ("all", "1"):
        articles, v = ingest.stage1_filter(articles, gateway, spec, require_negative=cfg.require_negative,
                                           retries=cfg.retries)
        verdicts.extend(v)
    if stage in ("all", "2"):
        articles, v = ingest.stage2_filter(articles, gateway, spec, retries=cfg.retries)
        verdicts.extend(v)
    rejects = "".join(
        json.dumps({"line": r.line, "reason": r.reason, "articleId": r.article_id}, sort_keys=True) + "\n"
        for r in loaded.rejects
    )
    write_artifacts(cfg.out_dir, {
        pipeline.KEPT_FILE: ingest.dump_articles(articles),
        pipeline.VERDICTS_FILE: ingest.dump_verdicts(verdicts),
        pipeline.REJECTS_FILE: rejects,
    })
    click.echo(f"kept {len(articles)} of {len(loaded.articles)} articles ({len(loaded.rejects)} malformed)")


# --- extract ------------------------------------------------------------------------

@cli.group("extract")
def extract_group() -> None:
    """Entity, pattern and triple extraction."""


@extract_group.command("run")
@click.option("--articles", type=click.Path(path_type=Path, exists=True, dir_okay=False))
@click.option("--patterns", "pattern_dir", type=click.Path(path_type=Path, exists=True, file_okay=False))
@click.option("--model", help="provider:model or model id (defaults to models.extract).")
@click.pass_obj
def extract_run(obj: Context, articles, pattern_dir, model) -> None:
    """Extract grounded violation events into extract/events.jsonl."""
    cfg = obj.config()
    run_dir = cfg.out_dir
    gateway = build_gateway(cfg)
    spec = parse_model(model, cfg.model("extract"))
    docs = ingest.read_articles(articles or run_dir / pipeline.KEPT_FILE)
    reviewed = patterns.check_promotable(patterns.read_store(pattern_dir or run_dir / pipeline.REVIEWED_DIR))
    run = extraction.run_extraction(docs, reviewed, gateway, spec, extracted_at=pipeline.run_timestamp(cfg),
                                    retries=cfg.retries)
    write_artifacts(run_dir, {
        pipeline.ENTITIES_FILE: extraction.dump_jsonl(e.to_record() for e in run.all_entities()),
        pipeline.EVENTS_FILE: extraction.dump_events(run.events),
        pipeline.REJECTIONS_FILE: extraction.dump_jsonl(
            r.to_record() for r in sorted(run.rejections, key=lambda r: (r.article_id, r.pattern_id))
        ),
        pipeline.ERRORS_FILE: extraction.dump_jsonl(
            {"articleId": aid, "error": msg} for aid, msg in sorted(run.errors.items())
        ),
    })
    click.echo(f"{len(run.events)} events, {len(run.rejections)} rejections, {len(run.errors)} failed articles")


@extract_group.command("baseline")
@click.option("--one-shot", is_flag=True, required=True, help="Direct article-to-principle classification.")
@click.option("--articles", type=click.Path(path_type=Path, exists=True, dir_okay=False))
@click.option("--model", help="provider:model or model id (defaults to models.baseline).")
@click.pass_obj
def extract_baseline(obj: Context, one_shot, articles, model) -> None:
    """Run the one-shot principle classifier into extract/baseline.jsonl."""
    if not one_shot:
        raise UsageError("only the --one-shot baseline is available")
    cfg = obj.config()
    run_dir = cfg.out_dir
    gateway = build_gateway(cfg)
    spec = parse_model(model, cfg.model("baseline"))
    docs = ingest.read_articles(articles or run_dir / pipeline.KEPT_FILE)
    predictions = extraction.run_baseline(docs, principles_for(run_dir), gateway, spec, cfg.retries)
    write_artifacts(run_dir, {pipeline.BASELINE_FILE: extraction.dump_baseline(predictions, spec.model_id)})


# --- kg -----------------------------------------------------------------------------

@cli.group("kg")
def kg_group() -> None:
    """Knowledge-graph assembly."""


@kg_group.command("build")
@click.option("--events", type=click.Path(path_type=Path, exists=True, dir_okay=False))
@click.option("--out", "out_dir", type=click.Path(path_type=Path, file_okay=False))
@click.option("--format", "formats", default="jsonld,turtle", show_default=True)
@click.option("--patterns", "pattern_dir", type=click.Path(path_type=Path, exists=True, file_okay=False))
@click.option("--entities", type=click.Path(path_type=Path, exists=True, dir_okay=False))
@click.option("--articles", type=click.Path(path_type=Path, exists=True, dir_okay=False))
@click.pass_obj
def kg_build(obj: Context, events, out_dir, formats, pattern_dir, entities, articles) -> None:
    """Assemble events, entities and the ontology into graph files."""
    run_dir = obj.run_dir
    events = events or run_dir / pipeline.EVENTS_FILE
    entities = entities or run_dir / pipeline.ENTITIES_FILE
    articles = articles or run_dir / pipeline.KEPT_FILE
    out_dir = out_dir or run_dir / "kg"
    model = ontology.OntologyModel(
        tuple(principles_for(run_dir)),
        tuple(patterns.promote_all(patterns.read_store(pattern_dir or run_dir / pipeline.REVIEWED_DIR))),
    )
    graph = kg.assemble(
        extraction.load_events(events.read_text(encoding="utf-8")),
        model,
        [extraction.NamedEntity.from_record(r) for r in pipeline.read_jsonl(entities)] if entities.exists() else [],
        ingest.read_articles(articles) if articles.exists() else [],
    )
    artifacts = {}
    for fmt in parse_formats(formats):
        artifacts["graph.ttl" if fmt == "turtle" else "graph.jsonld"] = kg.serialize(graph, fmt)
    write_artifacts(out_dir, artifacts)
    click.echo(f"{len(graph.events)} events, {len(graph)} triples")


# --- eval ---------------------------------------------------------------------------

@cli.group("eval")
def eval_group() -> None:
    """Scoring, model comparison and transition analysis."""


def _labels(obj: Context, labels: Path | None) -> dict:
    if labels is None:
        labels = obj.config().labels
        if labels is None:
            raise UsageError("--labels is required when paths.labels is unset")
    return evaluation.load_labels(labels)


def _events(path: Path) -> list[extraction.ViolationEvent]:
    return extraction.load_events(path.read_text(encoding="utf-8"))


@eval_group.command("score")
@click.option("--labels", type=click.Path(path_type=Path, exists=True, dir_okay=False))
@click.option("--events", type=click.Path(path_type=Path, exists=True, dir_okay=False))
@click.pass_obj
def eval_score(obj: Context, labels, events) -> None:
    """Per-principle confusion counts and metrics for an event log."""
    gold = _labels(obj, labels)
    events = _events(events or obj.run_dir / pipeline.EVENTS_FILE)
    report = evaluation.score(evaluation.build_samples(gold, evaluation.predictions_from_events(events)))
    names = {p.id: p.short_name for p in ontology.load_principles()}
    click.echo(evaluation.render_principle_table(report, names), nl=False)


def predictions_from_file(path: Path) -> dict[str, set[int]] | None:
    """Predictions from an event log or a one-shot baseline log; None for other files."""
    records = pipeline.read_jsonl(path)
    if not records:
        return None
    if all("principleIds" in r for r in records):
        return pipeline.baseline_predictions(records)
    if all("patternIri" in r for r in records):
        return evaluation.predictions_from_events(extraction.ViolationEvent.from_record(r) for r in records)
    return None


@eval_group.command("compare")
@click.option("--runs", "runs_dir", required=True, type=click.Path(path_type=Path, exists=True, file_okay=False))
@click.option("--labels", type=click.Path(path_type=Path, exists=True, dir_okay=False))
@click.pass_obj
def eval_compare(obj: Context, runs_dir: Path, labels) -> None:
    """Aggregate comparison of every prediction log in a directory.

    Each ``*.jsonl`` holding event records or one-shot records becomes one
    row named after the file. A pipeline run directory works too: its
    ``extract`` folder is searched.
    """
    gold = _labels(obj, labels)
    search = runs_dir / "extract" if (runs_dir / "extract").is_dir() else runs_dir
    runs = {}
    for path in sorted(search.glob("*.jsonl")):
        preds = predictions_from_file(path)
        if preds is not None:
            runs[path.stem] = evaluation.build_samples(gold, preds)
    if not runs:
        raise UsageError(f"no event or baseline logs found in {search}")
    click.echo(evaluation.render_comparison(evaluation.compare_models(runs)), nl=False)


@eval_group.command("transitions")
@click.option("--events", type=click.Path(path_type=Path, exists=True, dir_okay=False))
@click.option("--heatmap", type=click.Path(path_type=Path, dir_okay=False),
              help="Write an SVG heatmap here and the text grid next to it (.txt).")
@click.option("--pairing", type=click.Choice(["adjacent", "all"]))
@click.pass_obj
def eval_transitions(obj: Context, events, heatmap, pairing) -> None:
    """Principle-to-principle transition matrix over dated events."""
    events = _events(events or obj.run_dir / pipeline.EVENTS_FILE)
    result = evaluation.transition_matrix(events, pairing or obj.config().pairing)
    text = evaluation.render_heatmap_text(result)
    click.echo(text, nl=False)
    if heatmap is not None:
        svg = heatmap if heatmap.suffix == ".svg" else heatmap.with_suffix(".svg")
        atomic_write(svg, evaluation.render_heatmap_svg(result))
        atomic_write(svg.with_suffix(".txt"), text)
        click.echo(f"wrote {svg} and {svg.with_suffix('.txt')}")


# --- full pipeline ------------------------------------------------------------------

@cli.command("run")
@click.option("--demo", is_flag=True, help="Use the bundled demo config regardless of --config.")
@click.option("--out", "out_dir", type=click.Path(path_type=Path, file_okay=False))
@click.option("--record", is_flag=True, help="Call live providers and persist every exchange as a fixture.")
@click.option("--offline", "force_offline", is_flag=True, help="Forbid live calls (the default for the demo).")
@click.option("--force", is_flag=True, help="Rerun every stage even when up to date.")
@click.option("--stage", "stages", multiple=True, type=click.Choice(pipeline.STAGES))
@click.pass_obj
def run(obj: Context, demo, out_dir, record, force_offline, force, stages) -> None:
    """Run every stage in order, skipping stages whose inputs are unchanged."""
    if record and force_offline:
        raise UsageError("--record and --offline are mutually exclusive")
    overrides = {"out_dir": out_dir or obj.run_dir_override}
    if record:
        overrides["record"] = True
    if force_offline:
        overrides["offline"] = True
    elif obj.offline is not None:
        overrides["offline"] = obj.offline
    cfg = load_config(None if demo else obj.config_path, **overrides)
    result = pipeline.run_pipeline(cfg, tuple(stages) or pipeline.STAGES, force=force)
    for stage in pipeline.STAGES:
        if stage in result.ran:
            click.echo(f"{stage}: ran")
        elif stage in result.skipped:
            click.echo(f"{stage}: up to date")
    click.echo(f"manifest: {cfg.out_dir / pipeline.MANIFEST}")


def main(argv: list[str] | None = None) -> int:
    try:
        cli.main(args=argv, prog_name="esgkg", standalone_mode=False)
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except pipeline.StageFailed as exc:
        click.echo(f"error: {exc}", err=True)
        return exc.exit_code
    except EsgKgError as exc:
        click.echo(f"error: {exc}", err=True)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
