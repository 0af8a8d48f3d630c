"""Greedy matching of detector proposals against ground truth.

The assignment rule is the de-facto VOC/COCO evaluation convention: walk the
detections in descending confidence (ties keep input order) and let each one
claim the not-yet-claimed ground-truth box with the highest IoU at or above
the threshold (IoU ties go to the lowest ground-truth index).  With
class-aware matching a detection may only claim boxes of its own class, so a
well-placed box with the wrong label costs one removal plus one addition.

The optional single-edit relabel mode (``relabel_cost="one"``) runs a second
greedy pass that pairs leftover detections with leftover ground truth across
classes at the same IoU threshold; each such pair is charged as one relabel
edit instead of a removal plus an addition.  In the default two-edit mode
``relabels`` is always zero and ``TP + FP`` / ``TP + FN`` recover the
detection and ground-truth counts exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from .dataset_io import GroundTruthObject
from .geometry import BoundingBox, iou

RELABEL_COSTS = ("one", "two")


class UnknownImage(KeyError):
    """A detection references an image outside the batch."""


@dataclass(frozen=True)
class Detection:
    image_id: str
    class_label: str
    box: BoundingBox
    confidence: float

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence must be in [0, 1], got {self.confidence}")


@dataclass(frozen=True)
class MatchPair:
    detection_index: int
    ground_truth_index: int
    iou: float
    image_id: str | None = None


@dataclass(frozen=True)
class MatchResult:
    true_positives: int
    false_positives: int
    false_negatives: int
    pairs: tuple[MatchPair, ...] = ()
    relabels: int = 0
    relabel_pairs: tuple[MatchPair, ...] = ()

    @property
    def num_ground_truth(self) -> int:
        return self.true_positives + self.false_negatives + self.relabels

    @property
    def num_detections(self) -> int:
        return self.true_positives + self.false_positives + self.relabels


def apply_confidence_threshold(
    detections: Sequence[Detection], threshold: float
) -> list[Detection]:
    """Keep detections whose confidence is at or above ``threshold``."""
    return [d for d in detections if d.confidence >= threshold]


def match_image(
    gt: Sequence[GroundTruthObject],
    detections: Sequence[Detection],
    iou_threshold: float,
    class_aware: bool = True,
    relabel_cost: str = "two",
) -> MatchResult:
    if not 0.0 < iou_threshold < 1.0:
        raise ValueError(f"iou_threshold must be in (0, 1), got {iou_threshold}")
    if relabel_cost not in RELABEL_COSTS:
        raise ValueError(f"relabel_cost must be one of {RELABEL_COSTS}")

    order = sorted(range(len(detections)), key=lambda i: -detections[i].confidence)
    gt_taken = [False] * len(gt)
    det_taken = [False] * len(detections)

    def claim(det_index: int, same_class_only: bool) -> MatchPair | None:
        det = detections[det_index]
        best_index = -1
        best_iou = 0.0
        for gt_index, truth in enumerate(gt):
            if gt_taken[gt_index]:
                continue
            if same_class_only and truth.class_label != det.class_label:
                continue
            overlap = iou(det.box, truth.box)
            if overlap >= iou_threshold and overlap > best_iou:
                best_iou = overlap
                best_index = gt_index
        if best_index < 0:
            return None
        gt_taken[best_index] = True
        det_taken[det_index] = True
        return MatchPair(det_index, best_index, best_iou)

    pairs = []
    for det_index in order:
        pair = claim(det_index, same_class_only=class_aware)
        if pair is not None:
            pairs.append(pair)

    relabel_pairs = []
    if class_aware and relabel_cost == "one":
        for det_index in order:
            if det_taken[det_index]:
                continue
            pair = claim(det_index, same_class_only=False)
            if pair is not None:
                relabel_pairs.append(pair)

    tp = len(pairs)
    relabels = len(relabel_pairs)
    return MatchResult(
        true_positives=tp,
        false_positives=len(detections) - tp - relabels,
        false_negatives=len(gt) - tp - relabels,
        pairs=tuple(pairs),
        relabels=relabels,
        relabel_pairs=tuple(relabel_pairs),
    )


def match_batch(
    batch_gt: Mapping[str, Sequence[GroundTruthObject]],
    batch_det: Mapping[str, Sequence[Detection]],
    iou_threshold: float,
    class_aware: bool = True,
    relabel_cost: str = "two",
) -> MatchResult:
    """Sum per-image results over a batch; pairs carry their image_id."""
    for image_id in batch_det:
        if image_id not in batch_gt:
            raise UnknownImage(image_id)

    tp = fp = fn = relabels = 0
    pairs: list[MatchPair] = []
    relabel_pairs: list[MatchPair] = []
    for image_id in sorted(batch_gt):
        result = match_image(
            batch_gt[image_id],
            batch_det.get(image_id, ()),
            iou_threshold,
            class_aware=class_aware,
            relabel_cost=relabel_cost,
        )
        tp += result.true_positives
        fp += result.false_positives
        fn += result.false_negatives
        relabels += result.relabels
        pairs.extend(
            MatchPair(p.detection_index, p.ground_truth_index, p.iou, image_id)
            for p in result.pairs
        )
        relabel_pairs.extend(
            MatchPair(p.detection_index, p.ground_truth_index, p.iou, image_id)
            for p in result.relabel_pairs
        )
    return MatchResult(tp, fp, fn, tuple(pairs), relabels, tuple(relabel_pairs))


def precision(result: MatchResult) -> float:
    """TP / (TP + FP); 1.0 by convention when there are no detections."""
    denominator = result.true_positives + result.false_positives
    if denominator == 0:
        return 1.0
    return result.true_positives / denominator


def recall(result: MatchResult) -> float:
    """TP / (TP + FN); 1.0 by convention when there is no ground truth."""
    denominator = result.true_positives + result.false_negatives
    if denominator == 0:
        return 1.0
    return result.true_positives / denominator
