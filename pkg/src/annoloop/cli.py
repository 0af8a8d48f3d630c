"""Command-line entry point: ``annoloop convert|simulate|compare``.

Exit codes: 0 success, 2 parse errors in input data, 3 detector or bridge
failure, 4 invalid configuration (including bad flags).  The ``ANNOLOOP_LOG``
environment variable sets the log level.  Every random choice derives from
the single ``--seed`` flag: the shuffle seed is ``seed XOR fnv1a64("order")``,
the detector seed ``seed XOR fnv1a64("detector")`` (per-class campaigns use
``"detector:<class>"``), and ``compare`` repeats run with master seeds
``seed .. seed+repeats-1``.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import re
import shlex
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import reporting
from .bridge import BridgeError, BridgeSession, LaunchSpec
from .campaign import CampaignConfig, CampaignReport, run_campaign, run_per_class
from .dataset_io import (
    Dataset,
    ParseError,
    filter_objects,
    iter_voc_directory,
    load_canonical,
    parse_coco,
    parse_openimages,
    parse_voc,
    read_image_dimensions,
    save_canonical,
)
from .detectors import (
    DetectorSession,
    NullDetector,
    PerfectDetector,
    SyntheticDetector,
    SyntheticDetectorConfig,
)
from .rng import derive_seed
from .scheduling import OrderingStrategy, UnknownClass

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_DETECTOR = 3
EXIT_CONFIG = 4

ORDER_NAMES = ("shuffled", "sorted", "original")
REGIME_NAMES = ("iterative", "cumulative", "two-stage")
DETECTOR_NAMES = ("synthetic", "bridge", "perfect", "null")

log = logging.getLogger("annoloop")


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # bad flags are configuration errors (exit 4)
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="annoloop", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    convert = sub.add_parser("convert", help="convert a dataset to the canonical format")
    convert.add_argument("--from", dest="source_format", required=True,
                         choices=("voc", "coco", "openimages"))
    convert.add_argument("--in", dest="input_path", required=True,
                         help="VOC annotation dir, COCO json, or OpenImages boxes csv")
    convert.add_argument("--dims", help="image-dimensions csv (openimages only)")
    convert.add_argument("--drop", default="",
                         help="comma-separated flags to drop (occluded,truncated,group,difficult)")
    convert.add_argument("--out", required=True, help="canonical .jsonl output path")

    simulate = sub.add_parser("simulate", help="run one annotation campaign")
    _campaign_flags(simulate)
    simulate.add_argument("--per-class", action="store_true",
                          help="run one campaign per class and average the reductions")

    compare = sub.add_parser("compare", help="compare strategies and regimes")
    _campaign_flags(compare)
    compare.add_argument("--repeats", type=int, default=1)
    compare.add_argument("--jobs", type=int, default=1)
    return parser


def _campaign_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--dataset", required=True, help="canonical .jsonl dataset")
    parser.add_argument("--order", default="shuffled",
                        help=f"one of {ORDER_NAMES} (comma list for compare)")
    parser.add_argument("--batch-size", type=int, default=50)
    parser.add_argument("--iou", type=float, default=0.5)
    parser.add_argument("--conf", type=float, default=0.5)
    parser.add_argument("--regime", default="iterative",
                        help=f"one of {REGIME_NAMES} (comma list for compare)")
    parser.add_argument("--split", type=float,
                        help="first-fold fraction, two-stage regime only")
    parser.add_argument("--class", dest="class_label",
                        help="restrict the campaign to one class")
    parser.add_argument("--detector", default="synthetic", choices=DETECTOR_NAMES)
    parser.add_argument("--cmd", help="adapter command line (bridge detector)")
    parser.add_argument("--tcp", help="adapter address host:port (bridge detector)")
    parser.add_argument("--images", help="image directory passed to the adapter")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--relabel-cost", choices=("one", "two"), default="two")
    parser.add_argument("--out", default=".", help="output directory")


def main(argv: list[str] | None = None) -> int:
    level = os.environ.get("ANNOLOOP_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "convert":
            return _cmd_convert(args)
        if args.command == "simulate":
            return _cmd_simulate(args)
        return _cmd_compare(args)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except BridgeError as exc:
        print(f"detector failure: {exc}", file=sys.stderr)
        return EXIT_DETECTOR
    except (UnknownClass, ValueError) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG


# -- convert ----------------------------------------------------------------


def _cmd_convert(args) -> int:
    if args.source_format == "voc":
        result = parse_voc(iter_voc_directory(args.input_path))
    elif args.source_format == "coco":
        with open(args.input_path, encoding="utf-8") as fp:
            result = parse_coco(json.load(fp))
    else:
        if not args.dims:
            raise ValueError("--from openimages needs --dims <image-dimensions csv>")
        with open(args.dims, encoding="utf-8", newline="") as fp:
            meta = read_image_dimensions(fp)
        with open(args.input_path, encoding="utf-8", newline="") as fp:
            result = parse_openimages(csv.DictReader(fp), meta)

    dataset = result.dataset
    drop = [flag for flag in args.drop.split(",") if flag]
    if drop:
        dataset = filter_objects(dataset, drop)
    save_canonical(dataset, args.out)
    print(
        f"wrote {args.out}: {len(dataset.images)} images, "
        f"{dataset.total_objects} objects, {len(dataset.classes)} classes"
    )
    if result.errors:
        for error in result.errors:
            print(f"parse error: {error}", file=sys.stderr)
        return EXIT_PARSE
    return EXIT_OK


# -- simulate ----------------------------------------------------------------


def _cmd_simulate(args) -> int:
    dataset = load_canonical(args.dataset)
    config = _make_config(args, args.seed, args.order, args.regime)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    if args.per_class:
        return _simulate_per_class(args, dataset, config, out)

    classes = _scoped_classes(dataset, config)
    session = _make_session(args, args.seed, "detector", classes)
    try:
        report = run_campaign(dataset, config, session)
    finally:
        _close(session)
    _write_report_files(report, out)
    print(reporting.summary_text(report))
    return EXIT_OK


def _simulate_per_class(args, dataset: Dataset, config: CampaignConfig, out: Path) -> int:
    labels = [config.class_scope] if config.class_scope else list(dataset.classes)
    sessions: list[DetectorSession] = []

    def factory(label: str) -> DetectorSession:
        session = _make_session(args, args.seed, f"detector:{label}", (label,))
        sessions.append(session)
        return session

    try:
        result = run_per_class(dataset, labels, config, factory)
    finally:
        for session in sessions:
            _close(session)

    rows = [["class", "reduction_excluding_b0", "reduction_whole_campaign",
             "corrections", "total_gt"]]
    for label, report in result.reports.items():
        directory = out / f"class={_safe_name(label)}"
        directory.mkdir(parents=True, exist_ok=True)
        _write_report_files(report, directory)
        print(f"[{label}] {reporting.summary_text(report)}")
        rows.append([
            label,
            _csv_cell(report.reduction_excluding_b0),
            _csv_cell(report.reduction_whole_campaign),
            str(report.total_corrections),
            str(report.total_gt),
        ])
    average = result.average_reduction
    rows.append(["average", _csv_cell(average), "", "", ""])
    with open(out / "per_class.csv", "w", encoding="utf-8", newline="") as fp:
        csv.writer(fp).writerows(rows)
    print(f"average reduction over {len(result.reports)} classes: "
          + ("undefined" if average is None else f"{average:.2f}%"))
    return EXIT_OK


def _write_report_files(report: CampaignReport, directory: Path) -> None:
    (directory / "report.json").write_text(reporting.report_to_json(report), encoding="utf-8")
    (directory / "batches.csv").write_text(reporting.batches_csv(report),
                                           encoding="utf-8", newline="")
    (directory / "curves.csv").write_text(reporting.curves_csv(report),
                                          encoding="utf-8", newline="")
    (directory / "timings.json").write_text(reporting.timings_to_json(report.timings),
                                            encoding="utf-8")


# -- compare -----------------------------------------------------------------


def _cmd_compare(args) -> int:
    if args.repeats < 1:
        raise ValueError("--repeats must be >= 1")
    if args.jobs < 1:
        raise ValueError("--jobs must be >= 1")
    strategies = [s for s in args.order.split(",") if s]
    regimes = [r for r in args.regime.split(",") if r]
    jobs = []
    for strategy in strategies:
        for regime in regimes:
            for repeat in range(args.repeats):
                jobs.append((strategy, regime, args.seed + repeat))
    # validate every cell's configuration up front so failures are cheap
    for strategy, regime, master in jobs:
        _make_config(args, master, strategy, regime)

    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            reports = list(pool.map(_compare_cell, [(args, *job) for job in jobs]))
    else:
        reports = [_compare_cell((args, *job)) for job in jobs]

    cells: dict[tuple[str, str, str], list[CampaignReport]] = {}
    for (strategy, regime, _), report in zip(jobs, reports):
        cells.setdefault((report.detector, strategy, regime), []).append(report)
    rows = reporting.build_comparison(cells)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "comparison.csv").write_text(reporting.comparison_csv(rows),
                                        encoding="utf-8", newline="")
    print(reporting.comparison_text(rows))
    return EXIT_OK


def _compare_cell(params) -> CampaignReport:
    args, strategy, regime, master_seed = params
    dataset = load_canonical(args.dataset)
    config = _make_config(args, master_seed, strategy, regime)
    session = _make_session(args, master_seed, "detector", _scoped_classes(dataset, config))
    try:
        return run_campaign(dataset, config, session)
    finally:
        _close(session)


# -- shared helpers -----------------------------------------------------------


def _make_config(args, master_seed: int, order_name: str, regime_name: str) -> CampaignConfig:
    if order_name == "shuffled":
        ordering = OrderingStrategy.shuffled(derive_seed(master_seed, "order"))
    elif order_name == "sorted":
        ordering = OrderingStrategy.sorted_by_object_count()
    elif order_name == "original":
        ordering = OrderingStrategy.original()
    else:
        raise ValueError(f"--order must be one of {ORDER_NAMES}, got {order_name!r}")
    if regime_name not in REGIME_NAMES:
        raise ValueError(f"--regime must be one of {REGIME_NAMES}, got {regime_name!r}")
    return CampaignConfig(
        ordering=ordering,
        batch_size=args.batch_size,
        iou_threshold=args.iou,
        confidence_threshold=args.conf,
        regime=regime_name.replace("-", "_"),
        first_fold_fraction=args.split,
        class_scope=args.class_label,
        relabel_cost=args.relabel_cost,
        seed=master_seed,
    )


def _scoped_classes(dataset: Dataset, config: CampaignConfig) -> tuple[str, ...]:
    if config.class_scope is not None:
        if config.class_scope not in dataset.classes:
            raise UnknownClass(config.class_scope)
        return (config.class_scope,)
    return dataset.classes


def _make_session(args, master_seed: int, role: str, classes) -> DetectorSession:
    if args.detector == "synthetic":
        detector_config = SyntheticDetectorConfig(
            seed=derive_seed(master_seed, role),
            confidence_threshold=args.conf,
        )
        return SyntheticDetector(detector_config, classes)
    if args.detector == "perfect":
        return PerfectDetector()
    if args.detector == "null":
        return NullDetector()
    if args.cmd:
        spec = LaunchSpec(command=tuple(shlex.split(args.cmd)), images_dir=args.images)
    elif args.tcp:
        spec = LaunchSpec(address=args.tcp, images_dir=args.images)
    else:
        raise ValueError("--detector bridge needs --cmd or --tcp")
    return BridgeSession(spec, classes)


def _close(session: DetectorSession) -> None:
    if isinstance(session, BridgeSession):
        session.close()


def _safe_name(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", label)


def _csv_cell(value: float | None) -> str:
    return "" if value is None else f"{value:.4f}"


if __name__ == "__main__":
    sys.exit(main())
