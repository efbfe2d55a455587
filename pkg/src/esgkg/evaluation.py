"""Confusion counts, metrics, model comparison and principle transition analysis.

Metrics are computed as exact fractions. Rounding to two decimals happens
only when rendering, using round-half-to-even on the exact value, which is
the rule under which the published tables reproduce (e.g. 177/200 = 0.885
prints as 0.88 while 183/200 = 0.915 prints as 0.92).
"""

from __future__ import annotations

import csv
import io
import math
from collections import defaultdict
from dataclasses import dataclass
from datetime import date
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import IntegrityError, ParseError, UsageError
from .ontology import PRINCIPLE_COUNT

PRINCIPLES = tuple(range(1, PRINCIPLE_COUNT + 1))


@dataclass(frozen=True)
class LabeledSample:
    article_id: str
    principle_id: int
    gold: bool
    predicted: bool


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fn: int = 0
    fp: int = 0
    tn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fn, self.fp, self.tn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fn + self.fp + self.tn

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.tp + other.tp, self.fn + other.fn, self.fp + other.fp, self.tn + other.tn)

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.tp, self.fn, self.fp, self.tn)


@dataclass(frozen=True)
class Metrics:
    accuracy: Fraction
    precision: Fraction
    recall: Fraction

    def rounded(self) -> tuple[str, str, str]:
        return (format_metric(self.accuracy), format_metric(self.precision), format_metric(self.recall))


def _ratio(num: int, den: int) -> Fraction:
    return Fraction(num, den) if den else Fraction(0)


def metrics(counts: ConfusionCounts) -> Metrics:
    """Accuracy, precision and recall; 0/0 is taken as 0 for precision and recall."""
    if counts.total == 0:
        raise UsageError("cannot compute metrics over zero samples")
    return Metrics(
        accuracy=Fraction(counts.tp + counts.tn, counts.total),
        precision=_ratio(counts.tp, counts.tp + counts.fp),
        recall=_ratio(counts.tp, counts.tp + counts.fn),
    )


def round_half_even(value: Fraction, places: int = 2) -> Fraction:
    scaled = Fraction(value) * 10**places
    floor = math.floor(scaled)
    rest = scaled - floor
    if rest > Fraction(1, 2) or (rest == Fraction(1, 2) and floor % 2 == 1):
        floor += 1
    return Fraction(floor, 10**places)


def format_metric(value: Fraction, places: int = 2) -> str:
    """Two-decimal rendering; an exact zero prints as ``0`` like the published tables."""
    if value == 0:
        return "0"
    r = round_half_even(value, places)
    whole, frac = divmod(r.numerator * 10**places // r.denominator, 10**places)
    return f"{whole}.{frac:0{places}d}"


# --- samples and labels -------------------------------------------------------

def check_completeness(cells: Iterable[tuple[str, int]]) -> list[str]:
    """Require exactly one cell per (article, principle); return the article ids."""
    seen: dict[str, set[int]] = defaultdict(set)
    for aid, pid in cells:
        if pid not in PRINCIPLES:
            raise IntegrityError(f"principle id {pid} out of range for article {aid}")
        if pid in seen[aid]:
            raise IntegrityError(f"duplicate cell (article {aid}, principle {pid})")
        seen[aid].add(pid)
    for aid in sorted(seen):
        missing = sorted(set(PRINCIPLES) - seen[aid])
        if missing:
            raise IntegrityError(f"missing cell (article {aid}, principle {missing[0]})"
                                 + (f" and {len(missing) - 1} more" if len(missing) > 1 else ""))
    return sorted(seen)


@dataclass
class ScoreReport:
    per_principle: dict[int, ConfusionCounts]
    aggregate: ConfusionCounts
    n_articles: int


def score(samples: Sequence[LabeledSample]) -> ScoreReport:
    articles = check_completeness((s.article_id, s.principle_id) for s in samples)
    per: dict[int, list[int]] = {pid: [0, 0, 0, 0] for pid in PRINCIPLES}
    for s in samples:
        cell = per[s.principle_id]
        if s.gold and s.predicted:
            cell[0] += 1
        elif s.gold:
            cell[1] += 1
        elif s.predicted:
            cell[2] += 1
        else:
            cell[3] += 1
    counts = {pid: ConfusionCounts(*c) for pid, c in per.items()}
    aggregate = ConfusionCounts()
    for c in counts.values():
        aggregate = aggregate + c
    return ScoreReport(counts, aggregate, len(articles))


def load_labels(path: str | Path) -> dict[tuple[str, int], bool]:
    """Read a tab-separated ``articleId, principleId, gold`` table with a header row."""
    text = Path(path).read_text(encoding="utf-8")
    return parse_labels(text, source=str(path))


def parse_labels(text: str, source: str = "<labels>") -> dict[tuple[str, int], bool]:
    reader = csv.reader(io.StringIO(text), delimiter="\t")
    labels: dict[tuple[str, int], bool] = {}
    cells: list[tuple[str, int]] = []
    header_seen = False
    for line_no, row in enumerate(reader, start=1):
        if not row or not "".join(row).strip() or row[0].startswith("#"):
            continue
        if not header_seen:
            header_seen = True
            if [c.strip() for c in row[:3]] == ["articleId", "principleId", "gold"]:
                continue
        if len(row) < 3:
            raise ParseError("expected articleId, principleId, gold", source=source, position=line_no)
        aid, pid_text, gold_text = (c.strip() for c in row[:3])
        try:
            pid = int(pid_text)
        except ValueError:
            raise ParseError(f"principleId {pid_text!r} is not an integer", source=source, position=line_no) from None
        gold_norm = gold_text.lower()
        if gold_norm in ("1", "true", "yes"):
            gold = True
        elif gold_norm in ("0", "false", "no"):
            gold = False
        else:
            raise ParseError(f"gold must be 0/1, got {gold_text!r}", source=source, position=line_no)
        cells.append((aid, pid))
        labels[(aid, pid)] = gold
    check_completeness(cells)
    return labels


def dump_labels(labels: Mapping[tuple[str, int], bool]) -> str:
    lines = ["articleId\tprincipleId\tgold"]
    for (aid, pid) in sorted(labels):
        lines.append(f"{aid}\t{pid}\t{int(labels[(aid, pid)])}")
    return "\n".join(lines) + "\n"


def predictions_from_events(events: Iterable) -> dict[str, set[int]]:
    """Collapse events to principle level: an article predicts a principle if any event names it."""
    out: dict[str, set[int]] = defaultdict(set)
    for e in events:
        out[e.article_id].add(e.principle_id)
    return dict(out)


def build_samples(
    labels: Mapping[tuple[str, int], bool],
    predictions: Mapping[str, Iterable[int]],
) -> list[LabeledSample]:
    predicted = {aid: set(pids) for aid, pids in predictions.items()}
    return [
        LabeledSample(aid, pid, gold, pid in predicted.get(aid, ()))
        for (aid, pid), gold in sorted(labels.items())
    ]


# --- comparison ----------------------------------------------------------------

@dataclass(frozen=True)
class ComparisonRow:
    name: str
    counts: ConfusionCounts

    @property
    def metrics(self) -> Metrics:
        return metrics(self.counts)


def compare_models(runs: Mapping[str, Sequence[LabeledSample]]) -> list[ComparisonRow]:
    """One aggregate row per run; every run must cover the same labelled cells."""
    reference: set[tuple[str, int, bool]] | None = None
    rows = []
    for name, samples in runs.items():
        cells = {(s.article_id, s.principle_id, s.gold) for s in samples}
        if reference is None:
            reference = cells
        elif cells != reference:
            raise IntegrityError(f"run {name!r} was scored over a different article set")
        rows.append(ComparisonRow(name, score(samples).aggregate))
    return rows


_HEADER = ("TP", "FN", "FP", "TN", "Accuracy", "Precision", "Recall")


def _table(first: str, rows: Sequence[tuple[str, ConfusionCounts]], rule_before: int | None = None) -> str:
    body = []
    for label, counts in rows:
        acc, prec, rec = metrics(counts).rounded()
        body.append((label, *map(str, counts.as_tuple()), acc, prec, rec))
    header = (first, *_HEADER)
    widths = [max(len(r[i]) for r in [header, *body]) for i in range(len(header))]

    def fmt(row):
        cells = [row[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(row[1:], widths[1:])]
        return "| " + " | ".join(cells) + " |"

    sep = "|" + "|".join("-" * (w + 2) for w in widths) + "|"
    lines = [fmt(header), sep]
    for i, row in enumerate(body):
        if rule_before is not None and i == rule_before:
            lines.append(sep)
        lines.append(fmt(row))
    return "\n".join(lines) + "\n"


def render_comparison(rows: Sequence[ComparisonRow], rule_before: int | None = None) -> str:
    return _table("Model", [(r.name, r.counts) for r in rows], rule_before)


def render_principle_table(report: ScoreReport, names: Mapping[int, str] | None = None) -> str:
    names = names or {}
    rows = [(f"{pid} ({names[pid]})" if pid in names else str(pid), report.per_principle[pid]) for pid in PRINCIPLES]
    rows.append(("All", report.aggregate))
    return _table("UNGC Principle", rows, rule_before=len(rows) - 1)


# --- transitions -----------------------------------------------------------------

@dataclass(frozen=True)
class TransitionResult:
    counts: np.ndarray
    percent: np.ndarray
    pair_count: int


def _records(events: Iterable) -> list[tuple[str, date, int]]:
    out = []
    for e in events:
        if isinstance(e, tuple):
            entity, when, pid = e
        else:
            entity, when, pid = e.subject.normalized, getattr(e, "event_date", None), e.principle_id
        if when is None:
            raise IntegrityError(f"violation record for {entity!r} has no date")
        if pid not in PRINCIPLES:
            raise IntegrityError(f"principle id {pid} out of range")
        out.append((entity, when, pid))
    return out


def transition_pairs(events: Iterable, pairing: str = "adjacent") -> list[tuple[str, date, int, date, int]]:
    """Contributed (entity, earlier date, principle, later date, principle) pairs.

    ``adjacent`` pairs each violation date with the entity's next distinct
    violation date; ``all`` pairs every earlier date with every later one.
    Within a date, principles are taken as a set.
    """
    if pairing not in ("adjacent", "all"):
        raise UsageError(f"unknown pairing rule {pairing!r}")
    by_entity: dict[str, dict[date, set[int]]] = defaultdict(lambda: defaultdict(set))
    for entity, when, pid in _records(events):
        by_entity[entity][when].add(pid)
    pairs = []
    for entity in sorted(by_entity):
        days = sorted(by_entity[entity])
        for i, d1 in enumerate(days):
            later = days[i + 1:i + 2] if pairing == "adjacent" else days[i + 1:]
            for d2 in later:
                for p1 in sorted(by_entity[entity][d1]):
                    for p2 in sorted(by_entity[entity][d2]):
                        pairs.append((entity, d1, p1, d2, p2))
    return pairs


def transition_matrix(events: Iterable, pairing: str = "adjacent") -> TransitionResult:
    counts = np.zeros((PRINCIPLE_COUNT, PRINCIPLE_COUNT), dtype=np.int64)
    pairs = transition_pairs(events, pairing)
    for _, _, p1, _, p2 in pairs:
        counts[p1 - 1, p2 - 1] += 1
    row_sums = counts.sum(axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        percent = np.where(row_sums > 0, counts / np.where(row_sums == 0, 1, row_sums) * 100.0, 0.0)
    return TransitionResult(counts, percent, len(pairs))


def render_heatmap_text(result: TransitionResult) -> str:
    header = "from\\to " + " ".join(f"{j:>6d}" for j in PRINCIPLES)
    lines = [f"Transition percentages (pairs: {result.pair_count})", header]
    for i in PRINCIPLES:
        cells = " ".join(f"{result.percent[i - 1, j - 1]:6.1f}" for j in PRINCIPLES)
        lines.append(f"{i:>7d} {cells}")
    return "\n".join(lines) + "\n"


def render_heatmap_svg(result: TransitionResult, cell: int = 44) -> str:
    """Standalone SVG heatmap; white at 0%, dark blue at 100%."""
    margin = 60
    size = margin + cell * PRINCIPLE_COUNT + 20
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size + 30}" '
        f'viewBox="0 0 {size} {size + 30}" font-family="sans-serif" font-size="11">',
        f'<text x="{margin}" y="20" font-size="13">Principle transitions, % of row '
        f'(pairs: {result.pair_count})</text>',
    ]
    for k in PRINCIPLES:
        pos = margin + (k - 1) * cell + cell // 2
        parts.append(f'<text x="{pos}" y="{margin - 8}" text-anchor="middle">{k}</text>')
        parts.append(f'<text x="{margin - 8}" y="{pos + 4}" text-anchor="end">{k}</text>')
    for i in PRINCIPLES:
        for j in PRINCIPLES:
            value = float(result.percent[i - 1, j - 1])
            shade = int(round(255 - value / 100.0 * 200))
            x = margin + (j - 1) * cell
            y = margin + (i - 1) * cell
            text_color = "#ffffff" if value > 55 else "#000000"
            parts.append(
                f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" '
                f'fill="rgb({shade},{shade},255)" stroke="#999999" stroke-width="0.5"/>'
            )
            if value > 0:
                parts.append(
                    f'<text x="{x + cell // 2}" y="{y + cell // 2 + 4}" text-anchor="middle" '
                    f'fill="{text_color}">{value:.0f}</text>'
                )
    parts.append(f'<text x="{margin}" y="{size + 20}">rows: earlier violation, columns: next violation</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
