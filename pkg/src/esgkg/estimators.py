"""scikit-learn style wrappers for the predict-shaped parts of the pipeline.

``X`` is a sequence of NewsArticle. ``predict`` returns an (n, 10) 0/1
matrix whose column ``j`` is principle ``j + 1``, so the output plugs into
``sklearn.metrics`` multilabel scorers. Nothing is learned: ``fit`` only
checks its inputs, because every decision comes from a prompted model.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .evaluation import PRINCIPLES, transition_matrix
from .extraction import DEFAULT_RETRIES, one_shot_classify, run_extraction
from .gateway import Gateway, ModelSpec
from .ingest import NewsArticle
from .ontology import Principle
from .patterns import ViolationPattern


def indicator_matrix(article_ids: Sequence[str], predicted: dict[str, set[int]]) -> np.ndarray:
    out = np.zeros((len(article_ids), len(PRINCIPLES)), dtype=np.int64)
    for row, aid in enumerate(article_ids):
        for pid in predicted.get(aid, ()):
            out[row, pid - 1] = 1
    return out


class _PromptedClassifier(ClassifierMixin, BaseEstimator):
    def fit(self, X: Sequence[NewsArticle], y=None):
        if len(X) == 0:
            raise ValueError("fit needs at least one article")
        self.classes_ = np.array(PRINCIPLES)
        self.n_outputs_ = len(PRINCIPLES)
        return self

    def score(self, X, y, sample_weight=None) -> float:
        """Cell-level accuracy over the article x principle grid."""
        pred = self.predict(X)
        return float((pred == np.asarray(y)).mean())


class OneShotClassifier(_PromptedClassifier):
    """Direct article-to-principle classification from principle comments."""

    def __init__(self, gateway: Gateway | None = None, model: ModelSpec | None = None,
                 principles: Sequence[Principle] = (), retries: int = DEFAULT_RETRIES):
        self.gateway = gateway
        self.model = model
        self.principles = principles
        self.retries = retries

    def predict(self, X: Sequence[NewsArticle]) -> np.ndarray:
        results = self.gateway.map(
            lambda a: one_shot_classify(a, self.principles, self.gateway, self.model, self.retries), X
        )
        return indicator_matrix([a.article_id for a in X], {a.article_id: set(r) for a, r in zip(X, results)})


class PatternViolationClassifier(_PromptedClassifier):
    """Pattern matching plus grounded triple extraction, collapsed to principles."""

    def __init__(self, gateway: Gateway | None = None, model: ModelSpec | None = None,
                 patterns: Sequence[ViolationPattern] = (), extracted_at: str = "1970-01-01T00:00:00Z",
                 retries: int = DEFAULT_RETRIES):
        self.gateway = gateway
        self.model = model
        self.patterns = patterns
        self.extracted_at = extracted_at
        self.retries = retries

    def predict(self, X: Sequence[NewsArticle]) -> np.ndarray:
        run = run_extraction(X, self.patterns, self.gateway, self.model,
                             extracted_at=self.extracted_at, retries=self.retries)
        self.events_ = run.events
        predicted: dict[str, set[int]] = {}
        for e in run.events:
            predicted.setdefault(e.article_id, set()).add(e.principle_id)
        return indicator_matrix([a.article_id for a in X], predicted)


class TransitionMatrixEstimator(BaseEstimator):
    """Row-normalised principle transition percentages estimated from dated events."""

    def __init__(self, pairing: str = "adjacent"):
        self.pairing = pairing

    def fit(self, X, y=None):
        result = transition_matrix(X, self.pairing)
        self.counts_ = result.counts
        self.transition_matrix_ = result.percent
        self.pair_count_ = result.pair_count
        return self
