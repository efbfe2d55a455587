"""Stage orchestration: ontology, patterns, ingest, extract, kg, eval.

Each stage is a pure function from its inputs to a mapping of relative
artifact path to text. The runner hashes a stage's inputs, skips the stage
when the previous manifest shows the same input digest and intact
artifacts, and otherwise writes every artifact atomically after the stage
has fully succeeded.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Mapping

from . import evaluation, extraction, ingest, kg, ontology, patterns
from .config import PipelineConfig, build_gateway
from .errors import EsgKgError, IntegrityError
from .gateway import Gateway

log = logging.getLogger(__name__)

STAGES = ("ontology", "patterns", "ingest", "extract", "kg", "eval")
MANIFEST = "manifest.json"

PRINCIPLES_FILE = "ontology/principles.jsonl"
CONTEXT_FILE = "ontology/context.jsonld"
ONTOLOGY_TTL = "ontology/esg-ontology.ttl"
ONTOLOGY_JSONLD = "ontology/esg-ontology.jsonld"
DRAFTS_DIR = "patterns/drafts"
REVIEWED_DIR = "patterns/reviewed"
KEPT_FILE = "ingest/kept.jsonl"
VERDICTS_FILE = "ingest/verdicts.jsonl"
REJECTS_FILE = "ingest/rejects.jsonl"
ENTITIES_FILE = "extract/entities.jsonl"
EVENTS_FILE = "extract/events.jsonl"
REJECTIONS_FILE = "extract/rejections.jsonl"
ERRORS_FILE = "extract/errors.jsonl"
BASELINE_FILE = "extract/baseline.jsonl"
GRAPH_TTL = "kg/graph.ttl"
GRAPH_JSONLD = "kg/graph.jsonld"
REPORT_FILE = "eval/report.md"
TRANSITIONS_TXT = "eval/transitions.txt"
TRANSITIONS_SVG = "eval/transitions.svg"


class StageFailed(EsgKgError):
    def __init__(self, stage: str, cause: EsgKgError):
        self.stage = stage
        self.cause = cause
        self.exit_code = cause.exit_code
        super().__init__(f"stage {stage} failed: {cause}")


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# --- stage bodies -----------------------------------------------------------------

def stage_ontology(cfg: PipelineConfig, gateway: Gateway, out: Path) -> dict[str, str]:
    annotated = patterns.annotate_principles(
        ontology.load_principles(cfg.principles), gateway, cfg.model("generate"), cfg.comment_max_chars
    )
    return {
        PRINCIPLES_FILE: ontology.dump_principles(annotated),
        CONTEXT_FILE: ontology.context_document(),
    }


def read_principles(out: Path) -> list[ontology.Principle]:
    return ontology.load_principles(out / PRINCIPLES_FILE)


def generate_drafts(principles, gateway: Gateway, model, retries: int) -> list[patterns.ViolationPattern]:
    batches = gateway.map(lambda p: patterns.generate_patterns(p, gateway, model, retries), principles)
    return [p for batch in batches for p in batch]


def review_and_promote(drafts, review_text: str | None, review_source: str = "<review>"):
    decisions = patterns.parse_review(review_text, review_source) if review_text else []
    outcome = patterns.apply_review(drafts, decisions)
    if not outcome.ok:
        details = "; ".join(f"{pid}: {', '.join(v)}" for pid, v in sorted(outcome.violations.items()))
        raise IntegrityError(f"review edits failed validation: {details}")
    classes = patterns.promote_all(outcome.patterns)
    return outcome.patterns, classes


def stage_patterns(cfg: PipelineConfig, gateway: Gateway, out: Path) -> dict[str, str]:
    principles = read_principles(out)
    drafts = generate_drafts(principles, gateway, cfg.model("generate"), cfg.retries)
    review_text = cfg.review.read_text(encoding="utf-8") if cfg.review else None
    reviewed, classes = review_and_promote(drafts, review_text, str(cfg.review.name) if cfg.review else "<review>")
    artifacts = {f"{DRAFTS_DIR}/{name}": text for name, text in patterns.render_store(drafts).items()}
    artifacts.update({f"{REVIEWED_DIR}/{name}": text for name, text in patterns.render_store(reviewed).items()})
    artifacts[ONTOLOGY_TTL] = ontology.emit_meta_ontology(principles, classes, "turtle")
    artifacts[ONTOLOGY_JSONLD] = ontology.emit_meta_ontology(principles, classes, "jsonld")
    return artifacts


def stage_ingest(cfg: PipelineConfig, gateway: Gateway, out: Path) -> dict[str, str]:
    if cfg.corpus is None:
        raise IntegrityError("paths.corpus is not configured")
    loaded = ingest.load_corpus(cfg.corpus)
    model = cfg.model("filter")
    kept1, verdicts1 = ingest.stage1_filter(loaded.articles, gateway, model,
                                            require_negative=cfg.require_negative, retries=cfg.retries)
    kept2, verdicts2 = ingest.stage2_filter(kept1, gateway, model, retries=cfg.retries)
    rejects = "".join(
        json.dumps({"line": r.line, "reason": r.reason, "articleId": r.article_id}, sort_keys=True) + "\n"
        for r in loaded.rejects
    )
    return {
        KEPT_FILE: ingest.dump_articles(kept2),
        VERDICTS_FILE: ingest.dump_verdicts([*verdicts1, *verdicts2]),
        REJECTS_FILE: rejects,
    }


def read_reviewed(out: Path) -> list[patterns.ViolationPattern]:
    return patterns.check_promotable(patterns.read_store(out / REVIEWED_DIR))


def run_timestamp(cfg: PipelineConfig) -> str:
    if cfg.timestamp:
        return str(cfg.timestamp)
    return datetime.now(timezone.utc).replace(microsecond=0).isoformat().replace("+00:00", "Z")


def stage_extract(cfg: PipelineConfig, gateway: Gateway, out: Path) -> dict[str, str]:
    articles = ingest.read_articles(out / KEPT_FILE)
    reviewed = read_reviewed(out)
    principles = read_principles(out)
    run = extraction.run_extraction(articles, reviewed, gateway, cfg.model("extract"),
                                    extracted_at=run_timestamp(cfg), retries=cfg.retries)
    baseline_model = cfg.model("baseline")
    baseline = extraction.run_baseline(articles, principles, gateway, baseline_model, cfg.retries)
    return {
        ENTITIES_FILE: extraction.dump_jsonl(e.to_record() for e in run.all_entities()),
        EVENTS_FILE: extraction.dump_events(run.events),
        REJECTIONS_FILE: extraction.dump_jsonl(
            r.to_record() for r in sorted(run.rejections, key=lambda r: (r.article_id, r.pattern_id))
        ),
        ERRORS_FILE: extraction.dump_jsonl(
            {"articleId": aid, "error": msg} for aid, msg in sorted(run.errors.items())
        ),
        BASELINE_FILE: extraction.dump_baseline(baseline, baseline_model.model_id),
    }


def read_jsonl(path: Path) -> list[dict]:
    return [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]


def ontology_model(out: Path) -> ontology.OntologyModel:
    principles = read_principles(out)
    return ontology.OntologyModel(tuple(principles), tuple(patterns.promote_all(read_reviewed(out))))


def build_graph(out: Path) -> kg.KnowledgeGraph:
    events = extraction.load_events((out / EVENTS_FILE).read_text(encoding="utf-8"))
    entities = [extraction.NamedEntity.from_record(r) for r in read_jsonl(out / ENTITIES_FILE)]
    articles = ingest.read_articles(out / KEPT_FILE)
    return kg.assemble(events, ontology_model(out), entities, articles)


def stage_kg(cfg: PipelineConfig, gateway: Gateway, out: Path) -> dict[str, str]:
    graph = build_graph(out)
    return {GRAPH_TTL: kg.serialize(graph, "turtle"), GRAPH_JSONLD: kg.serialize(graph, "jsonld")}


def baseline_predictions(records: list[dict]) -> dict[str, set[int]]:
    return {r["articleId"]: set(r["principleIds"]) for r in records}


def evaluation_report(
    labels: Mapping[tuple[str, int], bool],
    events,
    baseline: Mapping[str, set[int]] | None,
    principles,
    pipeline_name: str,
    baseline_name: str | None,
) -> str:
    names = {p.id: p.short_name for p in principles}
    runs = {pipeline_name: evaluation.build_samples(labels, evaluation.predictions_from_events(events))}
    if baseline is not None and baseline_name:
        runs[baseline_name] = evaluation.build_samples(labels, baseline)
    pipeline_report = evaluation.score(runs[pipeline_name])
    rows = evaluation.compare_models(runs)
    return (
        f"# Evaluation\n\nLabelled articles: {pipeline_report.n_articles}\n\n"
        f"## Model comparison\n\n"
        f"{evaluation.render_comparison(rows, rule_before=1 if len(rows) > 1 else None)}\n"
        f"## Per-principle results ({pipeline_name})\n\n"
        f"{evaluation.render_principle_table(pipeline_report, names)}"
    )


def stage_eval(cfg: PipelineConfig, gateway: Gateway, out: Path) -> dict[str, str]:
    events = extraction.load_events((out / EVENTS_FILE).read_text(encoding="utf-8"))
    result = evaluation.transition_matrix(events, cfg.pairing)
    artifacts = {
        TRANSITIONS_TXT: evaluation.render_heatmap_text(result),
        TRANSITIONS_SVG: evaluation.render_heatmap_svg(result),
    }
    if cfg.labels is not None:
        labels = evaluation.load_labels(cfg.labels)
        baseline = baseline_predictions(read_jsonl(out / BASELINE_FILE))
        artifacts[REPORT_FILE] = evaluation_report(
            labels, events, baseline, read_principles(out),
            pipeline_name=f"pipeline ({cfg.model('extract').model_id})",
            baseline_name=f"one-shot ({cfg.model('baseline').model_id})",
        )
    return artifacts


StageFn = Callable[[PipelineConfig, Gateway, Path], Mapping[str, str]]

STAGE_FUNCS: dict[str, StageFn] = {
    "ontology": stage_ontology,
    "patterns": stage_patterns,
    "ingest": stage_ingest,
    "extract": stage_extract,
    "kg": stage_kg,
    "eval": stage_eval,
}

# upstream artifact prefixes and external inputs feeding each stage
STAGE_INPUTS: dict[str, tuple[tuple[str, ...], tuple[str, ...], tuple[str, ...]]] = {
    # (upstream stages, config path attributes, model stages)
    "ontology": ((), ("principles",), ("generate",)),
    "patterns": (("ontology",), ("review",), ("generate",)),
    "ingest": ((), ("corpus",), ("filter",)),
    "extract": (("ontology", "patterns", "ingest"), (), ("extract", "baseline")),
    "kg": (("ontology", "patterns", "ingest", "extract"), (), ()),
    "eval": (("ontology", "extract"), ("labels",), ()),
}


@dataclass
class RunResult:
    manifest: dict
    ran: list[str] = field(default_factory=list)
    skipped: list[str] = field(default_factory=list)
    out_dir: Path | None = None


_STAGE_SETTINGS = {
    "ontology": ("retries", "comment_max_chars"),
    "patterns": ("retries",),
    "ingest": ("retries", "require_negative"),
    "extract": ("retries", "timestamp"),
    "kg": (),
    "eval": ("pairing",),
}


def _settings(cfg: PipelineConfig) -> dict:
    return {"retries": cfg.retries, "comment_max_chars": cfg.comment_max_chars,
            "require_negative": cfg.require_negative, "pairing": cfg.pairing, "timestamp": cfg.timestamp}


def _input_digest(cfg: PipelineConfig, stage: str, manifest: dict, fixture_digest: str) -> str:
    upstream, path_attrs, model_stages = STAGE_INPUTS[stage]
    h = hashlib.sha256()
    payload = {
        "stage": stage,
        "upstream": {s: manifest["stages"][s]["artifacts"] for s in upstream},
        "inputs": {},
        "models": {m: cfg.model(m).__dict__ for m in model_stages},
        "settings": {k: v for k, v in _settings(cfg).items() if k in _STAGE_SETTINGS[stage]},
        "fixtures": fixture_digest if model_stages else "",
    }
    for attr in path_attrs:
        path = getattr(cfg, attr)
        if attr == "principles" and path is None:
            path = ontology.bundled_principles_path()
        payload["inputs"][attr] = sha256_file(path) if path is not None and path.exists() else None
    h.update(json.dumps(payload, sort_keys=True, default=str).encode())
    return h.hexdigest()


def load_manifest(out: Path) -> dict | None:
    path = out / MANIFEST
    if not path.exists():
        return None
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError:
        return None


def _up_to_date(out: Path, previous: dict | None, stage: str, digest: str) -> bool:
    if previous is None:
        return False
    entry = previous.get("stages", {}).get(stage)
    if not entry or entry.get("inputDigest") != digest:
        return False
    for rel, expected in entry.get("artifacts", {}).items():
        path = out / rel
        if not path.exists() or sha256_file(path) != expected:
            return False
    return True


def run_pipeline(
    cfg: PipelineConfig,
    stages: tuple[str, ...] = STAGES,
    *,
    force: bool = False,
    gateway: Gateway | None = None,
) -> RunResult:
    """Run the requested stages in order and write ``manifest.json``."""
    out = cfg.out_dir
    gateway = gateway or build_gateway(cfg)
    previous = load_manifest(out)
    fixture_digest = cfg.fixture_digest()
    manifest = {
        "configHash": cfg.config_hash,
        "fixtureDigest": fixture_digest,
        "stages": {},
    }
    result = RunResult(manifest, out_dir=out)
    for stage in STAGES:
        if stage not in stages:
            if previous and stage in previous.get("stages", {}):
                manifest["stages"][stage] = previous["stages"][stage]
            continue
        missing = [s for s in STAGE_INPUTS[stage][0] if s not in manifest["stages"]]
        if missing:
            raise StageFailed(stage, IntegrityError(f"requires outputs of stage(s) {', '.join(missing)}"))
        digest = _input_digest(cfg, stage, manifest, fixture_digest)
        if not force and _up_to_date(out, previous, stage, digest):
            manifest["stages"][stage] = previous["stages"][stage]
            result.skipped.append(stage)
            log.info("stage %s is up to date", stage)
            continue
        log.info("running stage %s", stage)
        try:
            artifacts = STAGE_FUNCS[stage](cfg, gateway, out)
        except EsgKgError as exc:
            raise StageFailed(stage, exc) from exc
        for rel in sorted(artifacts):
            atomic_write(out / rel, artifacts[rel])
        manifest["stages"][stage] = {
            "inputDigest": digest,
            "artifacts": {rel: sha256_text(artifacts[rel]) for rel in sorted(artifacts)},
        }
        result.ran.append(stage)
    all_artifacts = {
        rel: d for entry in manifest["stages"].values() for rel, d in entry["artifacts"].items()
    }
    manifest["artifactsDigest"] = sha256_text(json.dumps(all_artifacts, sort_keys=True))
    atomic_write(out / MANIFEST, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return result
