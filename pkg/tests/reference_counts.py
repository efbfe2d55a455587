"""Reference confusion counts with their expected rounded metrics.

Rows are (label, TP, FN, FP, TN, accuracy, precision, recall); metrics are
two-decimal strings with a bare "0" for an exact zero.
"""

MODEL_ROWS = [
    ("GPT-4o mini", 80, 116, 62, 1742, "0.91", "0.56", "0.41"),
    ("GPT-4.1", 31, 165, 24, 1780, "0.91", "0.56", "0.16"),
    ("Claude 3.7 Sonnet", 27, 169, 62, 1742, "0.88", "0.30", "0.14"),
    ("GPT-4o mini ('one-shot')", 166, 30, 411, 1393, "0.78", "0.29", "0.85"),
]

PRINCIPLE_ROWS = [
    (1, 25, 41, 4, 130, "0.78", "0.86", "0.38"),
    (2, 16, 10, 13, 161, "0.88", "0.55", "0.62"),
    (3, 8, 10, 12, 170, "0.89", "0.40", "0.44"),
    (4, 4, 10, 3, 183, "0.94", "0.57", "0.29"),
    (5, 4, 3, 2, 191, "0.98", "0.67", "0.57"),
    (6, 3, 6, 10, 181, "0.92", "0.23", "0.33"),
    (7, 12, 9, 8, 171, "0.92", "0.60", "0.57"),
    (8, 5, 13, 1, 181, "0.93", "0.83", "0.28"),
    (9, 0, 1, 1, 198, "0.99", "0", "0"),
    (10, 3, 13, 8, 176, "0.90", "0.27", "0.19"),
]

ALL_ROW = ("All", 80, 116, 62, 1742, "0.91", "0.56", "0.41")

N_ARTICLES = 200


def principle_labels() -> dict[tuple[str, int], bool]:
    """A complete 200 x 10 gold grid whose per-principle positives match PRINCIPLE_ROWS."""
    labels = {}
    for pid, tp, fn, fp, tn, *_ in PRINCIPLE_ROWS:
        for n in range(N_ARTICLES):
            labels[(f"art{n:03d}", pid)] = n < tp + fn
    return labels


def principle_predictions() -> dict[str, set[int]]:
    """Predictions that reproduce every PRINCIPLE_ROWS cell against principle_labels()."""
    preds: dict[str, set[int]] = {}
    for pid, tp, fn, fp, tn, *_ in PRINCIPLE_ROWS:
        hits = list(range(tp)) + list(range(tp + fn, tp + fn + fp))
        for n in hits:
            preds.setdefault(f"art{n:03d}", set()).add(pid)
    return preds


def predictions_with_totals(labels: dict[tuple[str, int], bool], tp: int, fp: int) -> dict[str, set[int]]:
    """Predict the first ``tp`` gold-positive and first ``fp`` gold-negative cells."""
    positives = [cell for cell in sorted(labels) if labels[cell]]
    negatives = [cell for cell in sorted(labels) if not labels[cell]]
    preds: dict[str, set[int]] = {}
    for aid, pid in positives[:tp] + negatives[:fp]:
        preds.setdefault(aid, set()).add(pid)
    return preds
