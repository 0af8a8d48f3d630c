"""The iterative train-propose-correct loop over a dataset and a detector.

The seed batch is annotated "by hand" (its ground truth is charged as manual
work), the detector trains on it, and every later batch is first predicted,
then scored against ground truth to count the corrections a human would have
made, then used for training.  The simulated annotator is perfect: whatever
the detector proposed, the annotations fed back for training are exactly the
dataset's ground truth, so the detector's input never depends on its own past
mistakes.

Training regimes: ``iterative`` fine-tunes on the most recently corrected
batch only; ``cumulative`` resets the session and retrains on every batch
corrected so far (the unambiguous semantics for external detectors --
adapters may implement warm-starting internally); ``two_stage`` trains once
on a manually annotated first fold and predicts the entire remainder in one
pass.  Whether a two-stage adapter shares hyper-state with batch training is
the adapter's own business.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

from .dataset_io import Dataset, ImageRecord
from .detectors import DetectorSession
from .matching import MatchResult, RELABEL_COSTS, apply_confidence_threshold, match_image
from .scheduling import OrderingStrategy, UnknownClass, class_scope, make_batches, order_images
from .workload import (
    BatchWorkload,
    CurvePoint,
    EmptyCampaign,
    ImageCount,
    UndefinedReduction,
    batch_workload,
    cumulative_curves,
    manual_batch_workload,
    whole_campaign_reduction,
    workload_reduction,
)

REGIMES = ("iterative", "cumulative", "two_stage")


@dataclass(frozen=True)
class CampaignConfig:
    ordering: OrderingStrategy
    batch_size: int = 50
    iou_threshold: float = 0.5
    confidence_threshold: float = 0.5
    regime: str = "iterative"
    first_fold_fraction: float | None = None
    class_scope: str | None = None
    class_aware_matching: bool = True
    relabel_cost: str = "two"
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0.0 < self.iou_threshold < 1.0:
            raise ValueError("iou_threshold must be in (0, 1)")
        if not 0.0 <= self.confidence_threshold <= 1.0:
            raise ValueError("confidence_threshold must be in [0, 1]")
        if self.regime not in REGIMES:
            raise ValueError(f"unknown regime {self.regime!r}")
        if self.regime == "two_stage":
            if self.first_fold_fraction is None or not 0.0 < self.first_fold_fraction < 1.0:
                raise ValueError("two_stage needs first_fold_fraction in (0, 1)")
        if self.relabel_cost not in RELABEL_COSTS:
            raise ValueError(f"relabel_cost must be one of {RELABEL_COSTS}")


@dataclass
class PhaseTimings:
    train_seconds: float = 0.0
    predict_seconds: float = 0.0
    score_seconds: float = 0.0
    total_seconds: float = 0.0


@dataclass(frozen=True)
class CampaignReport:
    config: CampaignConfig
    batches: tuple[BatchWorkload, ...]
    curve: tuple[CurvePoint, ...]
    total_gt: int
    total_corrections: int
    manual_boxes: int
    reduction_excluding_b0: float | None
    reduction_whole_campaign: float | None
    detector: str
    timings: PhaseTimings = field(compare=False, default_factory=PhaseTimings)


def run_campaign(
    dataset: Dataset, config: CampaignConfig, session: DetectorSession
) -> CampaignReport:
    """Execute a full campaign and account the simulated annotator's work."""
    started = time.perf_counter()
    dataset = _scoped(dataset, config)
    if config.regime == "two_stage":
        return _finish(_run_two_stage(dataset, config, session), started)

    order = order_images(dataset, config.ordering)
    batches = make_batches(order, config.batch_size)
    by_id = {img.image_id: img for img in dataset.images}
    timings = PhaseTimings()

    seed_images = [by_id[i] for i in batches[0].image_ids]
    workloads = [manual_batch_workload(sum(len(img.objects) for img in seed_images))]
    counts = [ImageCount(img.image_id, len(img.objects), 0, 0) for img in seed_images]
    _train(session, seed_images, 0, timings)

    for batch in batches[1:]:
        images = [by_id[i] for i in batch.image_ids]
        workload, batch_counts = _propose_and_score(
            session, images, batch.index, config, timings
        )
        workloads.append(workload)
        counts.extend(batch_counts)
        if config.regime == "iterative":
            _train(session, images, batch.index, timings)
        else:
            session.reset()
            for trained in batches[: batch.index + 1]:
                _train(session, [by_id[i] for i in trained.image_ids], trained.index, timings)

    return _finish(
        _build_report(dataset, config, session, workloads, counts, timings), started
    )


def run_two_stage(
    dataset: Dataset, config: CampaignConfig, session: DetectorSession
) -> CampaignReport:
    """First fold manual, one training pass, one prediction pass over the rest."""
    started = time.perf_counter()
    if config.regime != "two_stage":
        raise ValueError("run_two_stage needs a two_stage config")
    return _finish(_run_two_stage(_scoped(dataset, config), config, session), started)


@dataclass(frozen=True)
class PerClassResult:
    reports: dict[str, CampaignReport]
    average_reduction: float | None


def run_per_class(
    dataset: Dataset,
    classes: Sequence[str],
    config: CampaignConfig,
    detector_factory: Callable[[str], DetectorSession],
) -> PerClassResult:
    """One independent campaign per class on the class-scoped dataset.

    The averaged reduction is the unweighted mean over classes, undefined as
    soon as any per-class reduction is undefined.
    """
    for label in classes:
        if label not in dataset.classes:
            raise UnknownClass(label)
    reports = {}
    for label in classes:
        scoped = class_scope(dataset, label)
        session = detector_factory(label)
        reports[label] = run_campaign(scoped, replace(config, class_scope=None), session)
    reductions = [r.reduction_excluding_b0 for r in reports.values()]
    average = (
        sum(reductions) / len(reductions)
        if reductions and all(r is not None for r in reductions)
        else None
    )
    return PerClassResult(reports, average)


# -- internals -------------------------------------------------------------


def _scoped(dataset: Dataset, config: CampaignConfig) -> Dataset:
    if config.class_scope is not None:
        dataset = class_scope(dataset, config.class_scope)
    if not dataset.images:
        raise ValueError("campaign dataset has no images")
    return dataset


def _train(
    session: DetectorSession,
    images: Sequence[ImageRecord],
    batch_index: int,
    timings: PhaseTimings,
) -> None:
    begin = time.perf_counter()
    session.train(images, batch_index=batch_index)
    timings.train_seconds += time.perf_counter() - begin


def _propose_and_score(
    session: DetectorSession,
    images: Sequence[ImageRecord],
    batch_index: int,
    config: CampaignConfig,
    timings: PhaseTimings,
) -> tuple[BatchWorkload, list[ImageCount]]:
    begin = time.perf_counter()
    proposed = session.predict(images, batch_index=batch_index)
    timings.predict_seconds += time.perf_counter() - begin

    begin = time.perf_counter()
    tp = fp = fn = relabels = 0
    counts = []
    for img in images:
        detections = apply_confidence_threshold(
            proposed.get(img.image_id, ()), config.confidence_threshold
        )
        result = match_image(
            img.objects,
            detections,
            config.iou_threshold,
            class_aware=config.class_aware_matching,
            relabel_cost=config.relabel_cost,
        )
        tp += result.true_positives
        fp += result.false_positives
        fn += result.false_negatives
        relabels += result.relabels
        counts.append(
            ImageCount(
                img.image_id,
                len(img.objects),
                len(detections),
                result.false_negatives + result.false_positives + result.relabels,
            )
        )
    summed = MatchResult(tp, fp, fn, (), relabels, ())
    workload = batch_workload(summed, batch_index)
    timings.score_seconds += time.perf_counter() - begin
    return workload, counts


def _run_two_stage(
    dataset: Dataset, config: CampaignConfig, session: DetectorSession
) -> CampaignReport:
    order = order_images(dataset, config.ordering)
    by_id = {img.image_id: img for img in dataset.images}
    fold_size = math.ceil(config.first_fold_fraction * len(order))
    timings = PhaseTimings()

    fold = [by_id[i] for i in order[:fold_size]]
    rest = [by_id[i] for i in order[fold_size:]]
    workloads = [manual_batch_workload(sum(len(img.objects) for img in fold))]
    counts = [ImageCount(img.image_id, len(img.objects), 0, 0) for img in fold]
    _train(session, fold, 0, timings)
    if rest:
        workload, rest_counts = _propose_and_score(session, rest, 1, config, timings)
        workloads.append(workload)
        counts.extend(rest_counts)
    return _build_report(dataset, config, session, workloads, counts, timings)


def _build_report(
    dataset: Dataset,
    config: CampaignConfig,
    session: DetectorSession,
    workloads: list[BatchWorkload],
    counts: list[ImageCount],
    timings: PhaseTimings,
) -> CampaignReport:
    try:
        reduction = workload_reduction(workloads)
    except (EmptyCampaign, UndefinedReduction):
        reduction = None
    try:
        whole = whole_campaign_reduction(workloads)
    except (EmptyCampaign, UndefinedReduction):
        whole = None
    return CampaignReport(
        config=config,
        batches=tuple(workloads),
        curve=cumulative_curves(counts),
        total_gt=dataset.total_objects,
        total_corrections=sum(b.corrections for b in workloads if b.batch_index >= 1),
        manual_boxes=workloads[0].manually_drawn,
        reduction_excluding_b0=reduction,
        reduction_whole_campaign=whole,
        detector=session.descriptor,
        timings=timings,
    )


def _finish(report: CampaignReport, started: float) -> CampaignReport:
    report.timings.total_seconds = time.perf_counter() - started
    return report
