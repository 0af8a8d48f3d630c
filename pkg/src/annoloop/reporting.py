"""Report serialization and comparison tables.

``report.json`` carries everything needed to reconstruct a
:class:`~annoloop.campaign.CampaignReport` except wall-clock timings, which
are written to a separate ``timings.json``: the report must be byte-identical
across reruns of the same campaign and timings never are.  The CSV files are
RFC 4180 (CRLF line endings, header row first):

* ``batches.csv``  -- index, num_gt, num_detections, precision, recall,
  additions, removals, corrections (one row per batch).
* ``curves.csv``   -- image_count, cum_gt, cum_pred, cum_corrections
  (one row per image in annotation order; the series behind the
  cumulative-workload plots).

Undefined reductions (a campaign with no proposal batches, or one whose
proposal batches hold no boxes) serialize as JSON ``null`` and empty CSV
cells rather than fake zeros.
"""

from __future__ import annotations

import csv
import io
import json
import statistics
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

from .campaign import CampaignConfig, CampaignReport, PhaseTimings
from .scheduling import OrderingStrategy
from .workload import BatchWorkload, CurvePoint

BATCHES_COLUMNS = (
    "index", "num_gt", "num_detections", "precision", "recall",
    "additions", "removals", "corrections",
)
CURVES_COLUMNS = ("image_count", "cum_gt", "cum_pred", "cum_corrections")


def config_to_dict(config: CampaignConfig) -> dict:
    return {
        "ordering": {"kind": config.ordering.kind, "seed": config.ordering.seed},
        "batch_size": config.batch_size,
        "iou_threshold": config.iou_threshold,
        "confidence_threshold": config.confidence_threshold,
        "regime": config.regime,
        "first_fold_fraction": config.first_fold_fraction,
        "class_scope": config.class_scope,
        "class_aware_matching": config.class_aware_matching,
        "relabel_cost": config.relabel_cost,
        "seed": config.seed,
    }


def config_from_dict(record: Mapping) -> CampaignConfig:
    return CampaignConfig(
        ordering=OrderingStrategy(record["ordering"]["kind"], record["ordering"]["seed"]),
        batch_size=record["batch_size"],
        iou_threshold=record["iou_threshold"],
        confidence_threshold=record["confidence_threshold"],
        regime=record["regime"],
        first_fold_fraction=record["first_fold_fraction"],
        class_scope=record["class_scope"],
        class_aware_matching=record["class_aware_matching"],
        relabel_cost=record["relabel_cost"],
        seed=record["seed"],
    )


def report_to_dict(report: CampaignReport) -> dict:
    return {
        "config": config_to_dict(report.config),
        "detector": report.detector,
        "batches": [
            {
                "batch_index": b.batch_index,
                "num_gt": b.num_gt,
                "num_detections": b.num_detections,
                "precision": b.precision,
                "recall": b.recall,
                "additions": b.additions,
                "removals": b.removals,
                "corrections": b.corrections,
                "manually_drawn": b.manually_drawn,
                "relabels": b.relabels,
            }
            for b in report.batches
        ],
        # columns: image_count, cum_gt, cum_pred, cum_corrections
        "curve": [
            [
                p.images_processed,
                p.cumulative_gt,
                p.cumulative_predictions,
                p.cumulative_corrections,
            ]
            for p in report.curve
        ],
        "total_gt": report.total_gt,
        "total_corrections": report.total_corrections,
        "manual_boxes": report.manual_boxes,
        "reduction_excluding_b0": report.reduction_excluding_b0,
        "reduction_whole_campaign": report.reduction_whole_campaign,
    }


def report_from_dict(record: Mapping) -> CampaignReport:
    return CampaignReport(
        config=config_from_dict(record["config"]),
        batches=tuple(
            BatchWorkload(
                batch_index=b["batch_index"],
                num_gt=b["num_gt"],
                num_detections=b["num_detections"],
                precision=b["precision"],
                recall=b["recall"],
                additions=b["additions"],
                removals=b["removals"],
                corrections=b["corrections"],
                manually_drawn=b["manually_drawn"],
                relabels=b["relabels"],
            )
            for b in record["batches"]
        ),
        curve=tuple(CurvePoint(*point) for point in record["curve"]),
        total_gt=record["total_gt"],
        total_corrections=record["total_corrections"],
        manual_boxes=record["manual_boxes"],
        reduction_excluding_b0=record["reduction_excluding_b0"],
        reduction_whole_campaign=record["reduction_whole_campaign"],
        detector=record["detector"],
    )


def report_to_json(report: CampaignReport) -> str:
    return json.dumps(report_to_dict(report), indent=2, sort_keys=True) + "\n"


def report_from_json(text: str) -> CampaignReport:
    return report_from_dict(json.loads(text))


def timings_to_json(timings: PhaseTimings) -> str:
    record = {
        "train_seconds": timings.train_seconds,
        "predict_seconds": timings.predict_seconds,
        "score_seconds": timings.score_seconds,
        "total_seconds": timings.total_seconds,
    }
    return json.dumps(record, indent=2, sort_keys=True) + "\n"


def batches_csv(report: CampaignReport) -> str:
    out = io.StringIO()
    writer = csv.writer(out)
    writer.writerow(BATCHES_COLUMNS)
    for b in report.batches:
        writer.writerow(
            [
                b.batch_index, b.num_gt, b.num_detections,
                repr(b.precision), repr(b.recall),
                b.additions, b.removals, b.corrections,
            ]
        )
    return out.getvalue()


def curves_csv(report: CampaignReport) -> str:
    out = io.StringIO()
    writer = csv.writer(out)
    writer.writerow(CURVES_COLUMNS)
    for p in report.curve:
        writer.writerow(
            [
                p.images_processed, p.cumulative_gt,
                p.cumulative_predictions, p.cumulative_corrections,
            ]
        )
    return out.getvalue()


def summary_text(report: CampaignReport) -> str:
    reduction = _percent(report.reduction_excluding_b0)
    whole = _percent(report.reduction_whole_campaign)
    return (
        f"detector={report.detector} batches={len(report.batches)} "
        f"gt={report.total_gt} manual_b0={report.manual_boxes} "
        f"corrections={report.total_corrections} "
        f"reduction_excluding_b0={reduction} reduction_whole_campaign={whole}"
    )


def _percent(value: float | None) -> str:
    return "undefined" if value is None else f"{value:.2f}%"


# -- strategy/regime comparison --------------------------------------------


@dataclass(frozen=True)
class ComparisonRow:
    detector: str
    strategy: str
    regime: str
    repeats: int
    reduction_mean: float | None
    reduction_std: float | None
    whole_mean: float | None
    whole_std: float | None
    corrections_mean: float
    gt_mean: float
    wall_time_mean: float
    best: bool = False


def build_comparison(
    cells: Mapping[tuple[str, str, str], Sequence[CampaignReport]],
) -> tuple[ComparisonRow, ...]:
    """Aggregate repeated campaigns into one row per (detector, strategy, regime).

    Every cell must be complete (no partial repeat lists); the row with the
    highest mean reduction over proposal batches is flagged as best.
    """
    rows = []
    for key in sorted(cells):
        reports = cells[key]
        if not reports:
            raise ValueError(f"comparison cell {key} has no completed campaigns")
        reductions = [r.reduction_excluding_b0 for r in reports]
        wholes = [r.reduction_whole_campaign for r in reports]
        defined = all(v is not None for v in reductions)
        wholes_defined = all(v is not None for v in wholes)
        rows.append(
            ComparisonRow(
                detector=key[0],
                strategy=key[1],
                regime=key[2],
                repeats=len(reports),
                reduction_mean=statistics.fmean(reductions) if defined else None,
                reduction_std=statistics.pstdev(reductions) if defined else None,
                whole_mean=statistics.fmean(wholes) if wholes_defined else None,
                whole_std=statistics.pstdev(wholes) if wholes_defined else None,
                corrections_mean=statistics.fmean(r.total_corrections for r in reports),
                gt_mean=statistics.fmean(r.total_gt for r in reports),
                wall_time_mean=statistics.fmean(r.timings.total_seconds for r in reports),
                best=False,
            )
        )
    scored = [r for r in rows if r.reduction_mean is not None]
    if scored:
        top = max(scored, key=lambda r: r.reduction_mean)
        rows = [replace(r, best=r is top) for r in rows]
    return tuple(rows)


COMPARISON_COLUMNS = (
    "detector", "strategy", "regime", "repeats",
    "reduction_excluding_b0_mean", "reduction_excluding_b0_std",
    "reduction_whole_campaign_mean", "reduction_whole_campaign_std",
    "corrections_mean", "total_gt_mean", "wall_time_mean_seconds", "best",
)


def comparison_csv(rows: Sequence[ComparisonRow]) -> str:
    out = io.StringIO()
    writer = csv.writer(out)
    writer.writerow(COMPARISON_COLUMNS)
    for r in rows:
        writer.writerow(
            [
                r.detector, r.strategy, r.regime, r.repeats,
                _cell(r.reduction_mean), _cell(r.reduction_std),
                _cell(r.whole_mean), _cell(r.whole_std),
                f"{r.corrections_mean:.2f}", f"{r.gt_mean:.2f}",
                f"{r.wall_time_mean:.3f}", int(r.best),
            ]
        )
    return out.getvalue()


def comparison_text(rows: Sequence[ComparisonRow]) -> str:
    header = [
        "detector", "strategy", "regime", "reduction%", "std",
        "whole%", "corrections", "gt", "best",
    ]
    table = [header]
    for r in rows:
        table.append(
            [
                r.detector, r.strategy, r.regime,
                _cell(r.reduction_mean), _cell(r.reduction_std),
                _cell(r.whole_mean),
                f"{r.corrections_mean:.1f}", f"{r.gt_mean:.0f}",
                "*" if r.best else "",
            ]
        )
    widths = [max(len(row[i]) for row in table) for i in range(len(header))]
    lines = [
        "  ".join(cell.ljust(width) for cell, width in zip(row, widths)).rstrip()
        for row in table
    ]
    return "\n".join(lines)


def _cell(value: float | None) -> str:
    return "" if value is None else f"{value:.2f}"
