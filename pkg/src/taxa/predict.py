"""Label prediction for uncoded images and the evaluation harness.

Two predictors: similarity matching copies the label set of the most
cosine-similar labeled image; zero-shot thresholding keeps the most probable
leaf plus every leaf at or above the threshold, then closes the set under
ancestors.  Evaluation reports the exact-match ratio and the mean per-image
Jaccard, optionally after truncating both sides to a fixed depth.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

from .assist import EmbeddingTable, nearest_labeled
from .compare import (
    Labeling,
    MetricsReport,
    exact_match_ratio,
    jaccard,
    truncate_labels,
)
from .errors import (
    EmptyLabeledSet,
    EmptyProbabilityRow,
    ImageSetMismatch,
    NotEnoughData,
)
from .model import TaxonPath


@dataclass
class ProbabilityRow:
    """Externally computed per-leaf probabilities for one image."""

    uuid: str
    probs: dict[TaxonPath, float]


def ancestor_closure(paths: set[TaxonPath]) -> set[TaxonPath]:
    """Add every non-root proper prefix of every path."""
    closed: set[TaxonPath] = set()
    for path in paths:
        for i in range(1, len(path) + 1):
            closed.add(path[:i])
    return closed


def similarity_predict(
    labeled: Labeling,
    emb: EmbeddingTable,
    targets: Sequence[str],
) -> dict[str, set[TaxonPath]]:
    """Copy each target the label set of its most similar labeled image."""
    if not labeled:
        raise EmptyLabeledSet("similarity matching needs labeled images")
    candidates = list(labeled)
    out: dict[str, set[TaxonPath]] = {}
    for target in targets:
        match = nearest_labeled(target, candidates, emb)
        out[target] = set(labeled[match])
    return out


def zero_shot_predict(
    rows: Sequence[ProbabilityRow], threshold: float = 0.3
) -> dict[str, set[TaxonPath]]:
    """Argmax leaf plus all leaves with probability >= threshold, closed
    under ancestors."""
    out: dict[str, set[TaxonPath]] = {}
    for row in rows:
        if not row.probs:
            raise EmptyProbabilityRow(f"no probabilities for {row.uuid!r}")
        best = min(
            row.probs, key=lambda p: (-row.probs[p], p)
        )  # argmax, ties to the lexicographically smallest path
        selected = {p for p, v in row.probs.items() if v >= threshold}
        selected.add(best)
        out[row.uuid] = ancestor_closure(selected)
    return out


def evaluate(
    pred: Labeling, gold: Labeling, depth: int | None = None
) -> MetricsReport:
    """Exact match and mean per-image Jaccard of predictions vs gold."""
    if set(pred) != set(gold):
        raise ImageSetMismatch("prediction and gold cover different images")
    a: Mapping[str, set[TaxonPath]] = {u: set(p) for u, p in pred.items()}
    b: Mapping[str, set[TaxonPath]] = {u: set(p) for u, p in gold.items()}
    if depth is not None:
        a = truncate_labels(a, depth)
        b = truncate_labels(b, depth)
    n = len(a)
    mean_jaccard = (
        sum((jaccard(a[u], b[u]) for u in a), Fraction(0)) / n
        if n
        else Fraction(1)
    )
    return MetricsReport(
        exact_match=exact_match_ratio([a, b]),
        jaccard=mean_jaccard,
        depth=depth,
        n_images=n,
    )


def loo_evaluate(
    labeled: Labeling, emb: EmbeddingTable, depth: int | None = None
) -> MetricsReport:
    """Leave-one-out evaluation of similarity matching over labeled images."""
    if len(labeled) < 2:
        raise NotEnoughData("leave-one-out needs at least two labeled images")
    predictions: dict[str, set[TaxonPath]] = {}
    for uuid in labeled:
        rest = {u: paths for u, paths in labeled.items() if u != uuid}
        predictions.update(similarity_predict(rest, emb, [uuid]))
    return evaluate(predictions, labeled, depth)
