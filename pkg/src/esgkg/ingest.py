"""News corpus loading and the two-stage relevance filter."""

from __future__ import annotations

import enum
import json
import logging
import re
import threading
from dataclasses import dataclass
from datetime import date, datetime
from pathlib import Path
from typing import Any, Iterable, Sequence

from .errors import IntegrityError
from .gateway import Gateway, ModelSpec
from .structured import DEFAULT_RETRIES, ask_structured

log = logging.getLogger(__name__)

DEFAULT_MAX_REJECT_FRACTION = 0.5
MAX_PROMPT_BODY_CHARS = 8000


class Sentiment(str, enum.Enum):
    NEGATIVE = "Negative"
    NEUTRAL = "Neutral"
    POSITIVE = "Positive"


@dataclass(frozen=True)
class NewsArticle:
    article_id: str
    url: str
    title: str
    body: str
    language: str
    published_date: date
    source_name: str
    sentiment_hint: Sentiment | None = None

    def to_record(self) -> dict:
        record = {
            "articleId": self.article_id,
            "url": self.url,
            "title": self.title,
            "body": self.body,
            "language": self.language,
            "publishedDate": self.published_date.isoformat(),
            "sourceName": self.source_name,
        }
        if self.sentiment_hint is not None:
            record["sentimentHint"] = self.sentiment_hint.value
        return record


@dataclass(frozen=True)
class Reject:
    line: int
    reason: str
    article_id: str | None = None


@dataclass
class CorpusLoad:
    articles: list[NewsArticle]
    rejects: list[Reject]

    def __iter__(self):
        return iter(self.articles)

    def __len__(self) -> int:
        return len(self.articles)


def _parse_date(value: Any) -> date:
    if not isinstance(value, str) or not value.strip():
        raise ValueError("missing publishedDate")
    text = value.strip()
    if len(text) == 10:
        return date.fromisoformat(text)
    return datetime.fromisoformat(text.replace("Z", "+00:00")).date()


def article_from_record(record: Any) -> NewsArticle:
    """Build an article or raise ValueError with a short reason."""
    if not isinstance(record, dict):
        raise ValueError("record is not an object")
    article_id = record.get("articleId")
    if not isinstance(article_id, str) or not article_id.strip():
        raise ValueError("missing articleId")
    body = record.get("body")
    if not isinstance(body, str) or not body.strip():
        raise ValueError("empty body")
    try:
        published = _parse_date(record.get("publishedDate"))
    except ValueError as exc:
        raise ValueError(f"unparseable publishedDate: {exc}") from None
    hint = record.get("sentimentHint")
    try:
        sentiment = Sentiment(hint) if hint else None
    except ValueError:
        raise ValueError(f"unknown sentimentHint {hint!r}") from None
    return NewsArticle(
        article_id=article_id.strip(),
        url=str(record.get("url") or ""),
        title=str(record.get("title") or ""),
        body=body,
        language=str(record.get("language") or ""),
        published_date=published,
        source_name=str(record.get("sourceName") or ""),
        sentiment_hint=sentiment,
    )


def load_corpus(path: str | Path, max_reject_fraction: float = DEFAULT_MAX_REJECT_FRACTION) -> CorpusLoad:
    """Load a line-delimited JSON corpus.

    Malformed records go to ``rejects`` with a reason instead of being dropped
    silently. If more than ``max_reject_fraction`` of the records are
    malformed, the file is probably not in the corpus format at all and an
    IntegrityError is raised.
    """
    articles: list[NewsArticle] = []
    rejects: list[Reject] = []
    seen: set[str] = set()
    total = 0
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            total += 1
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                rejects.append(Reject(line_no, f"invalid JSON: {exc.msg}"))
                continue
            try:
                article = article_from_record(record)
            except ValueError as exc:
                aid = record.get("articleId") if isinstance(record, dict) else None
                rejects.append(Reject(line_no, str(exc), aid if isinstance(aid, str) else None))
                continue
            if article.article_id in seen:
                raise IntegrityError(f"duplicate articleId {article.article_id!r} at line {line_no}")
            seen.add(article.article_id)
            articles.append(article)
    if total and len(rejects) / total > max_reject_fraction:
        raise IntegrityError(
            f"{len(rejects)} of {total} records in {path} are malformed; is this a corpus file?"
        )
    return CorpusLoad(articles, rejects)


def dump_articles(articles: Iterable[NewsArticle]) -> str:
    return "".join(json.dumps(a.to_record(), ensure_ascii=False, sort_keys=True) + "\n" for a in articles)


def read_articles(path: str | Path) -> list[NewsArticle]:
    loaded = load_corpus(path, max_reject_fraction=0.0)
    return loaded.articles


# --- language -----------------------------------------------------------------

_STOPWORDS = {
    "en": {"the", "and", "of", "to", "in", "is", "that", "for", "was", "with", "on", "as", "by", "it",
           "its", "has", "have", "from", "at", "said", "were", "are", "which", "be", "this", "an"},
    "de": {"der", "die", "das", "und", "ist", "nicht", "mit", "den", "von", "zu", "ein", "eine", "auf",
           "sich", "dem", "des", "wurde", "hat", "für", "im", "bei", "auch"},
    "fr": {"le", "la", "les", "et", "est", "des", "du", "une", "un", "dans", "pour", "que", "qui", "sur",
           "pas", "au", "avec", "par", "ont", "été"},
    "es": {"el", "la", "los", "las", "y", "es", "del", "que", "en", "una", "por", "con", "para", "se",
           "su", "fue", "al", "lo", "como", "ha"},
}
_WORD = re.compile(r"[^\W\d_]+", re.UNICODE)


def guess_language(text: str) -> str:
    """Word-frequency guess among a few languages; ``und`` when unsure."""
    words = [w.lower() for w in _WORD.findall(text)]
    if len(words) < 5:
        return "und"
    scores = {lang: sum(w in stop for w in words) for lang, stop in _STOPWORDS.items()}
    lang, hits = max(sorted(scores.items()), key=lambda kv: kv[1])
    return lang if hits / len(words) >= 0.1 else "und"


def article_language(article: NewsArticle) -> str:
    tag = article.language.strip()
    if tag:
        return tag.split("-")[0].lower()
    return guess_language(f"{article.title}\n{article.body}")


# --- filtering ----------------------------------------------------------------

class Stage(str, enum.Enum):
    STAGE1 = "Stage1"
    STAGE2 = "Stage2"


@dataclass(frozen=True)
class FilterVerdict:
    article_id: str
    stage: Stage
    kept: bool
    reason: str
    model_id: str | None = None
    company: str | None = None

    def to_record(self) -> dict:
        return {
            "articleId": self.article_id,
            "stage": self.stage.value,
            "kept": self.kept,
            "reason": self.reason,
            "modelId": self.model_id,
            "company": self.company,
        }


def article_prompt_block(article: NewsArticle) -> str:
    body = article.body
    if len(body) > MAX_PROMPT_BODY_CHARS:
        body = body[:MAX_PROMPT_BODY_CHARS]
    return (
        f"Article ID: {article.article_id}\n"
        f"Source: {article.source_name}\n"
        f"Published: {article.published_date.isoformat()}\n"
        f"Title: {article.title}\n\n"
        f"{body}"
    )


STAGE1_SYSTEM_PROMPT = (
    "You screen news articles for an ESG controversy monitor. Decide whether the article "
    "is about companies, business conduct or environmental, social or governance topics. "
    "Drop articles about sports results, entertainment, celebrity news, weather, or "
    "politics with no corporate angle. Answer with a ```json fenced block "
    '{"keep": true|false, "reason": "<one sentence>"}.'
)

STAGE2_SYSTEM_PROMPT = (
    "You select news articles that report possible corporate ESG misconduct. Keep an article "
    "only if BOTH hold: (a) it names at least one specific company, and (b) it describes a "
    "negative event plausibly relevant to human rights, labour, the environment or "
    "corruption involving that company. General policy pieces with no named company must be "
    "dropped. Answer with a ```json fenced block "
    '{"keep": true|false, "company": "<company name or null>", "reason": "<one sentence>"}.'
)


def _stage1_convert(data: Any):
    if not isinstance(data, dict) or not isinstance(data.get("keep"), bool):
        return None, ['expected {"keep": bool, "reason": str}']
    return (data["keep"], str(data.get("reason") or "")), []


def _stage2_convert(data: Any):
    if not isinstance(data, dict) or not isinstance(data.get("keep"), bool):
        return None, ['expected {"keep": bool, "company": str|null, "reason": str}']
    company = data.get("company")
    company = company.strip() if isinstance(company, str) and company.strip() else None
    if data["keep"] and company is None:
        return None, ["keep=true requires the name of the company the article is about"]
    return (data["keep"], company, str(data.get("reason") or "")), []


def is_english(article: NewsArticle) -> bool:
    return article_language(article) == "en"


def stage1_filter(
    articles: Sequence[NewsArticle],
    gateway: Gateway,
    model: ModelSpec,
    *,
    require_negative: bool = True,
    retries: int = DEFAULT_RETRIES,
) -> tuple[list[NewsArticle], list[FilterVerdict]]:
    """Language and topical screen. One verdict per input article, in input order."""

    def judge(article: NewsArticle) -> FilterVerdict:
        if not is_english(article):
            return FilterVerdict(article.article_id, Stage.STAGE1, False, "non-English")
        if require_negative and article.sentiment_hint not in (None, Sentiment.NEGATIVE):
            return FilterVerdict(article.article_id, Stage.STAGE1, False, "not negatively framed")
        try:
            keep, reason = ask_structured(
                gateway, model, STAGE1_SYSTEM_PROMPT, article_prompt_block(article), _stage1_convert,
                task="stage1", item=article.article_id, retries=retries,
            )
        except IntegrityError as exc:
            log.warning("stage1 undecided for %s: %s", article.article_id, exc)
            return FilterVerdict(article.article_id, Stage.STAGE1, False, f"undecided: {exc}", model.model_id)
        return FilterVerdict(article.article_id, Stage.STAGE1, keep, reason, model.model_id)

    verdicts = gateway.map(judge, articles)
    kept = [a for a, v in zip(articles, verdicts) if v.kept]
    return kept, verdicts


def stage2_filter(
    articles: Sequence[NewsArticle],
    gateway: Gateway,
    model: ModelSpec,
    *,
    retries: int = DEFAULT_RETRIES,
) -> tuple[list[NewsArticle], list[FilterVerdict]]:
    """Keep articles naming a company and describing a plausible negative ESG event."""

    def judge(article: NewsArticle) -> FilterVerdict:
        try:
            keep, company, reason = ask_structured(
                gateway, model, STAGE2_SYSTEM_PROMPT, article_prompt_block(article), _stage2_convert,
                task="stage2", item=article.article_id, retries=retries,
            )
        except IntegrityError as exc:
            log.warning("stage2 undecided for %s: %s", article.article_id, exc)
            return FilterVerdict(article.article_id, Stage.STAGE2, False, f"undecided: {exc}", model.model_id)
        return FilterVerdict(article.article_id, Stage.STAGE2, keep, reason, model.model_id, company)

    verdicts = gateway.map(judge, articles)
    kept = [a for a, v in zip(articles, verdicts) if v.kept]
    return kept, verdicts


def dump_verdicts(verdicts: Iterable[FilterVerdict]) -> str:
    return "".join(json.dumps(v.to_record(), ensure_ascii=False, sort_keys=True) + "\n" for v in verdicts)


class VerdictLog:
    """Append-only verdict log; writes from worker threads are serialized."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()

    def append(self, verdicts: Iterable[FilterVerdict]) -> None:
        text = dump_verdicts(verdicts)
        with self._lock:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(text)
