"""Build an ESG violation knowledge graph from news articles.

Principles are annotated and turned into violation patterns, reviewed,
promoted to ontology classes, and used to extract grounded
(company, action, object) events that are assembled into an RDF graph.
"""

from .config import PipelineConfig, load_config
from .errors import ConfigError, EsgKgError, IntegrityError, TransportError, UsageError
from .gateway import Gateway, ModelSpec
from .pipeline import run_pipeline

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "EsgKgError",
    "Gateway",
    "IntegrityError",
    "ModelSpec",
    "PipelineConfig",
    "TransportError",
    "UsageError",
    "load_config",
    "run_pipeline",
]
