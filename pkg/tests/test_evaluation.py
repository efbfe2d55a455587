from __future__ import annotations

import itertools
import random
from datetime import date, timedelta
from decimal import ROUND_HALF_EVEN, Decimal, localcontext
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from esgkg import evaluation as ev
from esgkg.errors import IntegrityError, ParseError, UsageError

from conftest import make_event
from reference_counts import (
    ALL_ROW,
    MODEL_ROWS,
    PRINCIPLE_ROWS,
    predictions_with_totals,
    principle_labels,
    principle_predictions,
)


def decimal_oracle(num: int, den: int) -> str:
    """Independent rounding route through the decimal module."""
    if num == 0 or den == 0:
        return "0"
    with localcontext() as ctx:
        ctx.prec = 50
        return str((Decimal(num) / Decimal(den)).quantize(Decimal("0.01"), rounding=ROUND_HALF_EVEN))


# --- metrics ---------------------------------------------------------------------

def test_hand_counted_confusion():
    # gold/pred pairs enumerated by hand: TP, TP, FN, FP, TN, TN, TN
    pairs = [(1, 1), (1, 1), (1, 0), (0, 1), (0, 0), (0, 0), (0, 0)]
    samples = [ev.LabeledSample(f"a{i}", 1, bool(g), bool(p)) for i, (g, p) in enumerate(pairs)]
    tp = sum(s.gold and s.predicted for s in samples)
    assert tp == 2
    m = ev.metrics(ev.ConfusionCounts(2, 1, 1, 3))
    assert m.accuracy == Fraction(5, 7)
    assert m.precision == Fraction(2, 3)
    assert m.recall == Fraction(2, 3)


def test_zero_over_zero_is_zero():
    m = ev.metrics(ev.ConfusionCounts(0, 0, 0, 5))
    assert m.precision == 0 and m.recall == 0
    assert m.rounded() == ("1.00", "0", "0")


def test_empty_counts_rejected():
    with pytest.raises(UsageError):
        ev.metrics(ev.ConfusionCounts())


def test_negative_counts_rejected():
    with pytest.raises(ValueError):
        ev.ConfusionCounts(-1, 0, 0, 0)


@pytest.mark.parametrize(
    "num,den,expected",
    [(177, 200, "0.88"), (183, 200, "0.92"), (179, 200, "0.90"), (1, 8, "0.12"), (3, 8, "0.38"), (1, 3, "0.33")],
)
def test_half_even_ties(num, den, expected):
    assert ev.format_metric(Fraction(num, den)) == expected


@given(st.integers(0, 5000), st.integers(1, 5000))
def test_format_matches_decimal_oracle(num, den):
    assert ev.format_metric(Fraction(num, den)) == decimal_oracle(num, den)


@pytest.mark.parametrize("row", MODEL_ROWS + [ALL_ROW], ids=lambda r: r[0])
def test_model_rows_reproduce(row):
    _, tp, fn, fp, tn, acc, prec, rec = row
    assert ev.metrics(ev.ConfusionCounts(tp, fn, fp, tn)).rounded() == (acc, prec, rec)


@pytest.mark.parametrize("row", PRINCIPLE_ROWS, ids=lambda r: f"p{r[0]}")
def test_principle_rows_reproduce(row):
    _, tp, fn, fp, tn, acc, prec, rec = row
    assert ev.metrics(ev.ConfusionCounts(tp, fn, fp, tn)).rounded() == (acc, prec, rec)


def test_principle_rows_sum_to_aggregate():
    total = ev.ConfusionCounts()
    for _, tp, fn, fp, tn, *_ in PRINCIPLE_ROWS:
        assert tp + fn + fp + tn == 200
        total = total + ev.ConfusionCounts(tp, fn, fp, tn)
    assert total.as_tuple() == ALL_ROW[1:5]
    assert total.total == 2000


def test_score_over_synthesized_grid():
    samples = ev.build_samples(principle_labels(), principle_predictions())
    report = ev.score(samples)
    assert report.n_articles == 200
    for pid, tp, fn, fp, tn, *_ in PRINCIPLE_ROWS:
        assert report.per_principle[pid].as_tuple() == (tp, fn, fp, tn)
    assert report.aggregate.as_tuple() == ALL_ROW[1:5]


# --- labels ------------------------------------------------------------------------

def test_labels_round_trip():
    labels = principle_labels()
    assert ev.parse_labels(ev.dump_labels(labels)) == labels


def test_missing_cell_is_named():
    labels = principle_labels()
    del labels[("art007", 4)]
    with pytest.raises(IntegrityError, match=r"art007, principle 4"):
        ev.parse_labels(ev.dump_labels(labels))


def test_duplicate_cell_rejected():
    text = "articleId\tprincipleId\tgold\n" + "".join(f"a\t{p}\t0\n" for p in range(1, 11)) + "a\t3\t1\n"
    with pytest.raises(IntegrityError, match="duplicate"):
        ev.parse_labels(text)


def test_bad_gold_value_reports_line():
    text = "articleId\tprincipleId\tgold\na\t1\tmaybe\n"
    with pytest.raises(ParseError) as info:
        ev.parse_labels(text, source="labels.tsv")
    assert info.value.position == 2


def test_out_of_range_principle():
    text = "".join(f"a\t{p}\t0\n" for p in range(1, 12))
    with pytest.raises(IntegrityError, match="out of range"):
        ev.parse_labels(text)


# --- comparison --------------------------------------------------------------------

def test_compare_models_reproduces_rows():
    labels = principle_labels()
    runs = {name: ev.build_samples(labels, predictions_with_totals(labels, tp, fp))
            for name, tp, fn, fp, tn, *_ in MODEL_ROWS}
    rows = ev.compare_models(runs)
    for row, ref in zip(rows, MODEL_ROWS):
        assert row.name == ref[0]
        assert row.counts.as_tuple() == ref[1:5]
        assert row.metrics.rounded() == ref[5:]
    table = ev.render_comparison(rows, rule_before=3)
    assert "| GPT-4o mini ('one-shot') | 166 |" in table
    assert sum(line.startswith("|---") for line in table.splitlines()) == 2


def test_compare_models_requires_same_cells():
    labels = principle_labels()
    short = {k: v for k, v in labels.items() if k[0] != "art000"}
    runs = {"a": ev.build_samples(labels, {}), "b": ev.build_samples(short, {})}
    with pytest.raises(IntegrityError):
        ev.compare_models(runs)


def test_principle_table_layout():
    report = ev.score(ev.build_samples(principle_labels(), principle_predictions()))
    table = ev.render_principle_table(report, {9: "Environment - Eco innovation"})
    lines = table.splitlines()
    assert lines[0].startswith("| UNGC Principle")
    assert len(lines) == 2 + 10 + 1 + 1
    row9 = next(line for line in lines if line.startswith("| 9 (Environment - Eco innovation)"))
    assert [c.strip() for c in row9.split("|")[-4:-1]] == ["0.99", "0", "0"]
    assert lines[-1].startswith("| All")


# --- transitions -------------------------------------------------------------------

def brute_force_adjacent(records):
    """Count (p_i, p_j) over pairs where the second date is the entity's next violation date."""
    cells = set()
    for (e1, d1, p1), (e2, d2, p2) in itertools.product(records, repeat=2):
        if e1 != e2 or d2 <= d1:
            continue
        later = [d for e, d, _ in records if e == e1 and d > d1]
        if d2 == min(later):
            cells.add((e1, d1, p1, d2, p2))
    counts = np.zeros((10, 10), dtype=int)
    for _, _, p1, _, p2 in cells:
        counts[p1 - 1, p2 - 1] += 1
    return counts, len(cells)


def brute_force_all(records):
    cells = {(e1, d1, p1, d2, p2)
             for (e1, d1, p1), (e2, d2, p2) in itertools.product(records, repeat=2)
             if e1 == e2 and d2 > d1}
    counts = np.zeros((10, 10), dtype=int)
    for _, _, p1, _, p2 in cells:
        counts[p1 - 1, p2 - 1] += 1
    return counts, len(cells)


def synthetic_log(seed: int, n_entities: int = 5, n_events: int = 30):
    rng = random.Random(seed)
    start = date(2024, 1, 1)
    return [(f"org{rng.randrange(n_entities)}", start + timedelta(days=rng.randrange(12)), rng.randint(1, 10))
            for _ in range(n_events)]


@pytest.mark.parametrize("seed", range(8))
def test_transition_matrix_matches_brute_force(seed):
    records = synthetic_log(seed)
    result = ev.transition_matrix(records)
    counts, n = brute_force_adjacent(records)
    assert np.array_equal(result.counts, counts)
    assert result.pair_count == n


@pytest.mark.parametrize("seed", range(4))
def test_all_pairs_rule_matches_brute_force(seed):
    records = synthetic_log(seed)
    counts, n = brute_force_all(records)
    result = ev.transition_matrix(records, "all")
    assert np.array_equal(result.counts, counts)
    assert result.pair_count == n


def test_rows_sum_to_hundred():
    result = ev.transition_matrix(synthetic_log(3))
    for i in range(10):
        row = result.percent[i]
        if result.counts[i].sum():
            assert abs(row.sum() - 100.0) <= 0.01
        else:
            assert row.sum() == 0


def test_single_pair_is_one_full_cell():
    records = [("acme", date(2024, 1, 1), 7), ("acme", date(2024, 1, 5), 3)]
    result = ev.transition_matrix(records)
    assert result.pair_count == 1
    assert result.percent[6, 2] == 100.0
    assert np.count_nonzero(result.percent) == 1


def test_same_day_is_not_a_transition():
    records = [("acme", date(2024, 1, 1), 7), ("acme", date(2024, 1, 1), 8)]
    assert ev.transition_matrix(records).pair_count == 0


def test_multi_principle_days_pair_as_sets():
    d1, d2 = date(2024, 1, 1), date(2024, 1, 2)
    records = [("a", d1, 1), ("a", d1, 2), ("a", d1, 2), ("a", d2, 3), ("a", d2, 4)]
    result = ev.transition_matrix(records)
    assert result.pair_count == 4
    assert result.counts[0, 2] == result.counts[0, 3] == result.counts[1, 2] == result.counts[1, 3] == 1


def test_events_and_tuples_agree():
    events = [make_event("n1", "Acme Corp", date(2024, 1, 1), 7),
              make_event("n2", "ACME corp.", date(2024, 2, 1), 3)]
    result = ev.transition_matrix(events)
    assert result.pair_count == 1 and result.counts[6, 2] == 1


def test_unknown_pairing_rule():
    with pytest.raises(UsageError):
        ev.transition_matrix([], "nearest")


@settings(max_examples=60)
@given(st.lists(st.tuples(st.sampled_from(["a", "b", "c", "d"]), st.integers(0, 6), st.integers(1, 10)),
                min_size=0, max_size=25),
       st.randoms())
def test_transition_matrix_permutation_invariant(raw, rnd):
    records = [(e, date(2024, 1, 1) + timedelta(days=d), p) for e, d, p in raw]
    shuffled = records[:]
    rnd.shuffle(shuffled)
    a, b = ev.transition_matrix(records), ev.transition_matrix(shuffled)
    assert np.array_equal(a.counts, b.counts)
    assert np.array_equal(brute_force_adjacent(records)[0], a.counts)


def test_heatmap_renderings_are_deterministic():
    result = ev.transition_matrix(synthetic_log(1))
    assert ev.render_heatmap_svg(result) == ev.render_heatmap_svg(result)
    svg = ev.render_heatmap_svg(result)
    assert svg.startswith("<svg") or svg.startswith("<?xml")
    text = ev.render_heatmap_text(result)
    assert f"pairs: {result.pair_count}" in text
    assert len(text.splitlines()) == 12
