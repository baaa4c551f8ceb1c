"""Confusion-matrix metrics, pixel Dice, tercile grouping, and subgroup
sensitivity analyses."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from cccdetect.data.types import CccAnnotation

DECISION_THRESHOLD = 0.5

GROUPING_RENTROP = "rentrop"
GROUPING_FLOW = "flow_grade"
GROUPING_SIZE = "size_tercile"
GROUPINGS = (GROUPING_RENTROP, GROUPING_FLOW, GROUPING_SIZE)


class MetricError(ValueError):
    """Empty input or an undefined (zero-denominator) metric."""


@dataclass
class ConfusionMatrix:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass
class MetricsReport:
    accuracy: float
    sensitivity: float
    specificity: float
    counts: ConfusionMatrix

    def as_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "sensitivity": self.sensitivity,
            "specificity": self.specificity,
            "tp": self.counts.tp,
            "fp": self.counts.fp,
            "tn": self.counts.tn,
            "fn": self.counts.fn,
        }


def confusion(preds, threshold: float = DECISION_THRESHOLD) -> ConfusionMatrix:
    """Tally (probability, label) pairs; positive prediction iff p > threshold.

    A probability exactly at the threshold counts negative (strict
    inequality).  Labels must be 0 or 1.
    """
    preds = list(preds)
    if not preds:
        raise MetricError("confusion requires at least one prediction")
    cm = ConfusionMatrix()
    for prob, label in preds:
        if label not in (0, 1):
            raise MetricError(f"labels must be 0 or 1, got {label!r}")
        positive = prob > threshold
        if label == 1:
            cm.tp += positive
            cm.fn += not positive
        else:
            cm.fp += positive
            cm.tn += not positive
    cm.tp, cm.fp, cm.tn, cm.fn = int(cm.tp), int(cm.fp), int(cm.tn), int(cm.fn)
    return cm


def metrics(cm: ConfusionMatrix) -> MetricsReport:
    """accuracy, sensitivity, specificity from the four counts."""
    if cm.total < 1:
        raise MetricError("metrics require at least one counted sample")
    pos = cm.tp + cm.fn
    neg = cm.tn + cm.fp
    if pos == 0:
        raise MetricError("sensitivity undefined: no positive-labeled samples")
    if neg == 0:
        raise MetricError("specificity undefined: no negative-labeled samples")
    return MetricsReport(
        accuracy=(cm.tp + cm.tn) / cm.total,
        sensitivity=cm.tp / pos,
        specificity=cm.tn / neg,
        counts=cm,
    )


@dataclass
class DicePixelMetrics:
    dice: float
    sensitivity: float | None
    specificity: float | None
    gt_empty: bool = False


def dice_pixel_metrics(pred, gt, threshold: float = 0.5) -> DicePixelMetrics:
    """Binarize both maps at the threshold (value >= threshold is vessel)
    and report dice = 2TP/(2TP+FP+FN) with pixel sensitivity/specificity.

    An empty ground truth yields dice 1.0 when the prediction is empty
    too, else 0.0, flagged either way.
    """
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise MetricError(f"dice shape mismatch: pred {pred.shape} vs gt {gt.shape}")
    p = pred >= threshold
    g = gt >= threshold
    tp = int(np.sum(p & g))
    fp = int(np.sum(p & ~g))
    fn = int(np.sum(~p & g))
    tn = int(np.sum(~p & ~g))
    if not g.any():
        return DicePixelMetrics(
            dice=1.0 if not p.any() else 0.0,
            sensitivity=None,
            specificity=tn / (tn + fp) if (tn + fp) else None,
            gt_empty=True,
        )
    dice = 2 * tp / (2 * tp + fp + fn)
    sens = tp / (tp + fn)
    spec = tn / (tn + fp) if (tn + fp) else None
    return DicePixelMetrics(dice=dice, sensitivity=sens, specificity=spec)


def tercile_split(sizes):
    """Three nearly equal groups of the sorted values.

    Group sizes are ceil(n/3), ceil(rest/2), rest (differ by at most 1);
    ties keep their original input order.  Returns (cut1, cut2,
    assignments) where cuts are the largest values of groups 1 and 2 and
    assignments[i] is the group (0, 1, 2) of input sizes[i].
    """
    values = [float(s) for s in sizes]
    n = len(values)
    if n < 3:
        raise MetricError(f"tercile split needs at least 3 values, got {n}")
    if any(v <= 0 for v in values):
        raise MetricError("sizes must be positive")
    order = sorted(range(n), key=lambda i: (values[i], i))  # stable on ties
    g1 = -(-n // 3)              # ceil(n/3)
    g2 = -(-(n - g1) // 2)       # ceil of the remainder's half
    assignments = [0] * n
    for rank, idx in enumerate(order):
        if rank < g1:
            assignments[idx] = 0
        elif rank < g1 + g2:
            assignments[idx] = 1
        else:
            assignments[idx] = 2
    cut1 = values[order[g1 - 1]]
    cut2 = values[order[g1 + g2 - 1]]
    return cut1, cut2, assignments


@dataclass
class SubgroupReport:
    grouping: str
    groups: list = field(default_factory=list)      # (label, n_samples, sensitivity)
    exclusions: list = field(default_factory=list)  # (ica_id, reason)

    def as_dict(self) -> dict:
        return {
            "grouping": self.grouping,
            "groups": [{"group": g, "n_samples": n, "sensitivity": s} for g, n, s in self.groups],
            "exclusions": [{"ica_id": i, "reason": r} for i, r in self.exclusions],
        }


def subgroup_sensitivity(positive_preds, grouping: str,
                         threshold: float = DECISION_THRESHOLD) -> SubgroupReport:
    """Per-group sensitivity over positive-labeled ICAs.

    ``positive_preds`` is a list of (ica_id, probability, CccAnnotation or
    None).  Only TPs and FNs exist among positives, so sensitivity is the
    reported statistic.  ICAs without the grouping attribute land in the
    exclusions list rather than being silently dropped.
    """
    if grouping not in GROUPINGS:
        raise MetricError(f"grouping must be one of {GROUPINGS}, got {grouping!r}")
    report = SubgroupReport(grouping=grouping)
    usable = []
    for ica_id, prob, ann in positive_preds:
        if ann is None:
            report.exclusions.append((ica_id, "no annotation"))
            continue
        if grouping == GROUPING_RENTROP and ann.rentrop_grade not in (1, 2, 3):
            report.exclusions.append((ica_id, f"rentrop_grade {ann.rentrop_grade} outside analysis groups 1..3"))
            continue
        usable.append((ica_id, prob, ann))

    def group_rows(keyed):
        rows = []
        for key in sorted(keyed):
            hits = keyed[key]
            tp = sum(1 for p in hits if p > threshold)
            rows.append((key, len(hits), tp / len(hits)))
        return rows

    if grouping == GROUPING_RENTROP:
        keyed = {}
        for _, prob, ann in usable:
            keyed.setdefault(str(ann.rentrop_grade), []).append(prob)
        report.groups = group_rows(keyed)
    elif grouping == GROUPING_FLOW:
        keyed = {}
        for _, prob, ann in usable:
            keyed.setdefault(str(ann.flow_grade), []).append(prob)
        report.groups = group_rows(keyed)
    else:
        if len(usable) < 3:
            raise MetricError("size tercile analysis needs at least 3 annotated positives")
        sizes = [ann.collateral_size_px for _, _, ann in usable]
        cut1, cut2, assign = tercile_split(sizes)
        labels = (f"<= {cut1:g} px", f"({cut1:g}, {cut2:g}] px", f"> {cut2:g} px")
        keyed = {label: [] for label in labels}
        for (ica_id, prob, ann), grp in zip(usable, assign):
            keyed[labels[grp]].append(prob)
        report.groups = [(label, len(keyed[label]),
                          (sum(1 for p in keyed[label] if p > threshold) / len(keyed[label]))
                          if keyed[label] else 0.0)
                         for label in labels]
    return report
