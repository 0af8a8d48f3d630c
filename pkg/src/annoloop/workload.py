"""Human-workload accounting for annotation campaigns.

The correction model prices the work a human annotator performs on a proposal
batch from the match statistics against ground truth:

    additions = (# true objects) x (1 - recall)            = false negatives
    removals  = (# detections)   x (1 - precision)         = false positives
    corrections = additions + removals (+ single-edit relabels, if enabled)

Since the rates come from the same counts, additions and removals are exact
integers, never rounded estimates.  The campaign-level reduction metric is
``100 * (1 - total corrections / total ground truth)`` over proposal batches
only; the fully manual seed batch is excluded from both sums.  A second,
whole-campaign variant that charges the seed batch as manual work is reported
alongside it.  Reductions may legitimately go negative when a detector floods
a batch with false positives; they are reported as-is.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from . import matching
from .matching import MatchResult


class EmptyCampaign(ValueError):
    """No proposal batches exist, so the reduction metric has no basis."""


class UndefinedReduction(ZeroDivisionError):
    """The proposal batches contain no ground-truth boxes."""


@dataclass(frozen=True)
class BatchWorkload:
    batch_index: int
    num_gt: int
    num_detections: int
    precision: float
    recall: float
    additions: int
    removals: int
    corrections: int
    manually_drawn: int = 0
    relabels: int = 0

    def __post_init__(self):
        if self.corrections != self.additions + self.removals + self.relabels:
            raise ValueError("corrections must equal additions + removals + relabels")
        if self.additions > self.num_gt:
            raise ValueError("additions cannot exceed the ground-truth count")
        if self.removals > self.num_detections:
            raise ValueError("removals cannot exceed the detection count")
        if self.manually_drawn > 0 and (self.batch_index != 0 or self.corrections != 0):
            raise ValueError("manual drawing happens only in batch 0, without corrections")


def batch_workload(result: MatchResult, batch_index: int) -> BatchWorkload:
    """Price the corrections for one proposal batch from its match result."""
    return BatchWorkload(
        batch_index=batch_index,
        num_gt=result.num_ground_truth,
        num_detections=result.num_detections,
        precision=matching.precision(result),
        recall=matching.recall(result),
        additions=result.false_negatives,
        removals=result.false_positives,
        corrections=result.false_negatives + result.false_positives + result.relabels,
        relabels=result.relabels,
    )


def manual_batch_workload(num_gt: int) -> BatchWorkload:
    """The seed batch: every box is drawn by hand, nothing is corrected."""
    return BatchWorkload(
        batch_index=0,
        num_gt=num_gt,
        num_detections=0,
        precision=1.0,
        recall=1.0,
        additions=0,
        removals=0,
        corrections=0,
        manually_drawn=num_gt,
    )


def workload_reduction(batches: Sequence[BatchWorkload]) -> float:
    """Percent of manual work saved over the proposal batches (index >= 1).

    100 means the detector proposed everything perfectly; 0 means correcting
    cost as much as annotating from scratch; negative values mean it cost more.
    """
    proposal = [b for b in batches if b.batch_index >= 1]
    if not proposal:
        raise EmptyCampaign("campaign has no proposal batches")
    total_gt = sum(b.num_gt for b in proposal)
    if total_gt == 0:
        raise UndefinedReduction("proposal batches contain no ground-truth boxes")
    total_corrections = sum(b.corrections for b in proposal)
    return 100.0 * (1.0 - total_corrections / total_gt)


def whole_campaign_reduction(batches: Sequence[BatchWorkload]) -> float:
    """Reduction with the seed batch charged as manual work in both sums."""
    if not batches:
        raise EmptyCampaign("campaign has no batches")
    total_gt = sum(b.num_gt for b in batches)
    if total_gt == 0:
        raise UndefinedReduction("campaign contains no ground-truth boxes")
    work = sum(b.manually_drawn + b.corrections for b in batches)
    return 100.0 * (1.0 - work / total_gt)


@dataclass(frozen=True)
class ImageCount:
    """Per-image accounting in annotation order, the raw material for curves."""

    image_id: str
    num_gt: int
    num_predictions: int
    corrections: int


@dataclass(frozen=True)
class CurvePoint:
    images_processed: int
    cumulative_gt: int
    cumulative_predictions: int
    cumulative_corrections: int


def cumulative_curves(counts: Sequence[ImageCount]) -> tuple[CurvePoint, ...]:
    """Prefix sums of ground truth, predictions and corrections per image."""
    points = []
    gt = predictions = corrections = 0
    for index, count in enumerate(counts, start=1):
        gt += count.num_gt
        predictions += count.num_predictions
        corrections += count.corrections
        points.append(CurvePoint(index, gt, predictions, corrections))
    return tuple(points)
