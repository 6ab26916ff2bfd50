"""Evaluation statistics: Pearson correlation, Matthews correlation
coefficient, and macro F1."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Hashable, Mapping, Sequence

from .errors import (
    ConstantInputError,
    EmptyInputError,
    LengthMismatchError,
    MissingClassInGoldError,
)


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class ClassScores:
    precision: float
    recall: float
    f1: float


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Sample Pearson correlation, two-pass mean-centered with compensated
    summation. Constant input is an error rather than NaN."""
    if len(x) != len(y):
        raise LengthMismatchError(len(x), len(y))
    n = len(x)
    if n < 2:
        raise ConstantInputError("need at least 2 points for correlation")
    mx = math.fsum(x) / n
    my = math.fsum(y) / n
    sxy = math.fsum((xi - mx) * (yi - my) for xi, yi in zip(x, y))
    sxx = math.fsum((xi - mx) ** 2 for xi in x)
    syy = math.fsum((yi - my) ** 2 for yi in y)
    if sxx == 0.0 or syy == 0.0:
        raise ConstantInputError("correlation undefined for constant input")
    return sxy / math.sqrt(sxx * syy)


def confusion(
    pred: Sequence[Hashable], gold: Sequence[Hashable], positive: Hashable
) -> ConfusionMatrix:
    if len(pred) != len(gold):
        raise LengthMismatchError(len(pred), len(gold))
    tp = fp = fn = tn = 0
    for p, g in zip(pred, gold):
        if p == positive:
            if g == positive:
                tp += 1
            else:
                fp += 1
        else:
            if g == positive:
                fn += 1
            else:
                tn += 1
    return ConfusionMatrix(tp=tp, fp=fp, fn=fn, tn=tn)


def mcc_from_confusion(cm: ConfusionMatrix) -> float:
    """MCC from counts. A zero factor in the denominator yields 0.0, the
    convention used by WMT QE scoring."""
    denom = (
        (cm.tp + cm.fp) * (cm.tp + cm.fn) * (cm.tn + cm.fp) * (cm.tn + cm.fn)
    )
    if denom == 0:
        return 0.0
    return (cm.tp * cm.tn - cm.fp * cm.fn) / math.sqrt(denom)


def mcc(
    pred: Sequence[Hashable], gold: Sequence[Hashable], positive: Hashable = "BAD"
) -> float:
    """Matthews correlation of binary tag sequences. Any label other than
    ``positive`` counts as the negative class; the value does not depend on
    which class is called positive."""
    if len(pred) != len(gold):
        raise LengthMismatchError(len(pred), len(gold))
    if not pred:
        raise EmptyInputError("cannot compute MCC of empty sequences")
    return mcc_from_confusion(confusion(pred, gold, positive))


def per_class_scores(
    pred: Sequence[Hashable],
    gold: Sequence[Hashable],
    classes: Sequence[Hashable],
) -> Mapping[Hashable, ClassScores]:
    """Precision/recall/F1 per class. Predictions outside ``classes`` (e.g.
    abstentions) are never true positives and never count as predictions of
    any class, so they hurt recall but not precision."""
    scores = {}
    for c in classes:
        tp = sum(1 for p, g in zip(pred, gold) if p == c and g == c)
        n_pred = sum(1 for p in pred if p == c)
        n_gold = sum(1 for g in gold if g == c)
        precision = tp / n_pred if n_pred else 0.0
        recall = tp / n_gold if n_gold else 0.0
        f1 = (
            2 * precision * recall / (precision + recall)
            if precision + recall > 0
            else 0.0
        )
        scores[c] = ClassScores(precision=precision, recall=recall, f1=f1)
    return scores


def macro_f1(
    pred: Sequence[Hashable],
    gold: Sequence[Hashable],
    classes: Sequence[Hashable] | None = None,
) -> float:
    """Unweighted mean of per-class F1 scores.

    Classes default to the distinct gold labels (sorted by string form for
    determinism); every declared class must occur in gold at least once.
    """
    if len(pred) != len(gold):
        raise LengthMismatchError(len(pred), len(gold))
    if not gold:
        raise EmptyInputError("cannot compute macro F1 of empty sequences")
    if classes is None:
        classes = sorted(set(gold), key=str)
    gold_set = set(gold)
    for c in classes:
        if c not in gold_set:
            raise MissingClassInGoldError(c)
    scores = per_class_scores(pred, gold, classes)
    return math.fsum(s.f1 for s in scores.values()) / len(classes)
