"""Pipeline configuration: one YAML file, paths resolved relative to it."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

import yaml

from .errors import ConfigError
from .gateway import (
    ExchangeStore,
    Gateway,
    ModelSpec,
    ScriptedProvider,
    live_providers,
    register_fixtures,
)

STAGE_MODELS = ("generate", "filter", "extract", "baseline")


def demo_dir() -> Path:
    return Path(str(resources.files("esgkg") / "demo"))


def demo_config_path() -> Path:
    return demo_dir() / "config.yaml"


@dataclass
class PipelineConfig:
    base_dir: Path
    models: dict[str, ModelSpec]
    out_dir: Path
    corpus: Path | None = None
    principles: Path | None = None
    review: Path | None = None
    labels: Path | None = None
    fixture_dir: Path | None = None
    cache_dir: Path | None = None
    scripted_answers: Path | None = None
    offline: bool = True
    record: bool = False
    parallelism: int = 4
    retries: int = 2
    comment_max_chars: int = 600
    require_negative: bool = True
    pairing: str = "adjacent"
    timestamp: str | None = None
    raw: dict = field(default_factory=dict)

    @property
    def config_hash(self) -> str:
        hashed = json.loads(json.dumps(self.raw))
        hashed.get("paths", {}).pop("out", None)
        hashed.get("run", {}).pop("offline", None)
        hashed.get("run", {}).pop("record", None)
        blob = json.dumps(hashed, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def model(self, stage: str) -> ModelSpec:
        try:
            return self.models[stage]
        except KeyError:
            raise ConfigError(f"no model configured for stage {stage!r}") from None

    def fixture_digest(self) -> str:
        if self.fixture_dir is None:
            return ""
        return ExchangeStore(self.fixture_dir).digest()


def _model(section: Any, stage: str) -> ModelSpec:
    if not isinstance(section, Mapping):
        raise ConfigError(f"models.{stage} must be a mapping with provider and model")
    try:
        return ModelSpec(
            provider_id=str(section["provider"]),
            model_id=str(section["model"]),
            temperature=float(section.get("temperature", 0.0)),
            max_output_tokens=int(section.get("max_output_tokens", 1024)),
        )
    except KeyError as exc:
        raise ConfigError(f"models.{stage} lacks {exc.args[0]!r}") from None


def load_config(path: str | Path | None = None, **overrides: Any) -> PipelineConfig:
    """Load a YAML config; keyword overrides replace top-level settings (e.g. ``out_dir``)."""
    path = demo_config_path() if path is None else Path(path)
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    base = path.resolve().parent

    def resolve(value: Any) -> Path | None:
        if value in (None, ""):
            return None
        p = Path(str(value))
        return p if p.is_absolute() else base / p

    run = raw.get("run", {}) or {}
    gw = raw.get("gateway", {}) or {}
    paths = raw.get("paths", {}) or {}
    models_raw = raw.get("models", {}) or {}
    default_model = models_raw.get("default")
    models = {}
    for stage in STAGE_MODELS:
        section = models_raw.get(stage, default_model)
        if section is None:
            raise ConfigError(f"no model configured for stage {stage!r}")
        models[stage] = _model(section, stage)

    cfg = PipelineConfig(
        base_dir=base,
        models=models,
        out_dir=resolve(paths.get("out")) or Path.cwd() / "esgkg-out",
        corpus=resolve(paths.get("corpus")),
        principles=resolve(paths.get("principles")),
        review=resolve(paths.get("review")),
        labels=resolve(paths.get("labels")),
        fixture_dir=resolve(gw.get("fixture_dir")),
        cache_dir=resolve(gw.get("cache_dir")),
        scripted_answers=resolve(gw.get("scripted_answers")),
        offline=bool(run.get("offline", True)),
        record=bool(run.get("record", False)),
        parallelism=int(run.get("parallelism", 4)),
        retries=int(run.get("retries", 2)),
        comment_max_chars=int(run.get("comment_max_chars", 600)),
        require_negative=bool(run.get("require_negative", True)),
        pairing=str(run.get("pairing", "adjacent")),
        timestamp=run.get("timestamp"),
        raw=raw,
    )
    for key, value in overrides.items():
        if value is None:
            continue
        if not hasattr(cfg, key):
            raise ConfigError(f"unknown config override {key!r}")
        setattr(cfg, key, value)
    if cfg.record:
        cfg.offline = False
    validate_config(cfg)
    return cfg


def validate_config(cfg: PipelineConfig) -> None:
    if cfg.parallelism < 1:
        raise ConfigError("run.parallelism must be >= 1")
    if cfg.pairing not in ("adjacent", "all"):
        raise ConfigError("run.pairing must be 'adjacent' or 'all'")
    if cfg.offline:
        has_fixtures = cfg.fixture_dir is not None and any(cfg.fixture_dir.glob("*.json"))
        has_cache = cfg.cache_dir is not None and any(cfg.cache_dir.glob("*.json"))
        if not (has_fixtures or has_cache):
            raise ConfigError("offline mode needs a non-empty fixture or cache directory")
    if cfg.record and cfg.fixture_dir is None:
        raise ConfigError("record mode needs gateway.fixture_dir to write into")
    scripted = [s for s, m in cfg.models.items() if m.provider_id == "scripted"]
    if scripted and not cfg.offline and cfg.scripted_answers is None:
        raise ConfigError(f"stages {scripted} use the scripted provider but gateway.scripted_answers is unset")


def build_gateway(cfg: PipelineConfig) -> Gateway:
    providers: dict = {} if cfg.offline else dict(live_providers())
    if not cfg.offline and cfg.scripted_answers is not None:
        answers = yaml.safe_load(cfg.scripted_answers.read_text(encoding="utf-8")) or {}
        providers["scripted"] = ScriptedProvider(answers)
    if cfg.record:
        store = ExchangeStore(cfg.fixture_dir)
        fixtures = []
    else:
        store = ExchangeStore(cfg.cache_dir) if cfg.cache_dir is not None else None
        fixtures = [register_fixtures(cfg.fixture_dir)] if cfg.fixture_dir is not None and cfg.fixture_dir.is_dir() else []
    return Gateway(providers=providers, store=store, fixtures=fixtures, offline=cfg.offline,
                   parallelism=cfg.parallelism)
