"""Seeded random matching instances shared by the matching and acceptance tests."""

from __future__ import annotations

from annoloop.dataset_io import GroundTruthObject
from annoloop.geometry import BoundingBox, clamp_to_image
from annoloop.matching import Detection
from annoloop.rng import SplitMix64

WIDTH = 100.0
HEIGHT = 100.0


def random_box(rng: SplitMix64) -> BoundingBox:
    cx = rng.uniform(5.0, WIDTH - 5.0)
    cy = rng.uniform(5.0, HEIGHT - 5.0)
    bw = rng.uniform(4.0, 40.0)
    bh = rng.uniform(4.0, 40.0)
    return clamp_to_image(
        BoundingBox(cx - bw / 2, cy - bh / 2, cx + bw / 2, cy + bh / 2), WIDTH, HEIGHT
    )


def perturbed(rng: SplitMix64, box: BoundingBox, magnitude: float) -> BoundingBox:
    jitter = lambda side: rng.uniform(-magnitude, magnitude) * side
    candidate = BoundingBox(
        box.xmin + jitter(box.width),
        box.ymin + jitter(box.height),
        box.xmax + jitter(box.width),
        box.ymax + jitter(box.height),
    )
    return clamp_to_image(candidate, WIDTH, HEIGHT)


def random_instance(
    rng: SplitMix64,
    max_gt: int = 10,
    max_det: int = 10,
    classes: tuple[str, ...] = ("a", "b", "c"),
    image_id: str = "img",
) -> tuple[list[GroundTruthObject], list[Detection]]:
    """Ground truth plus a mix of perturbed-copy and spurious detections."""
    gt = [
        GroundTruthObject(classes[rng.below(len(classes))], random_box(rng))
        for _ in range(rng.below(max_gt + 1))
    ]
    detections = []
    for truth in gt:
        roll = rng.random()
        if roll < 0.55:  # roughly reproduce the box, sometimes with the wrong label
            label = truth.class_label if rng.random() < 0.8 else classes[rng.below(len(classes))]
            detections.append(
                Detection(image_id, label, perturbed(rng, truth.box, rng.uniform(0.0, 0.35)),
                          rng.random())
            )
    while len(detections) < rng.below(max_det + 1):
        detections.append(
            Detection(image_id, classes[rng.below(len(classes))], random_box(rng), rng.random())
        )
    return gt, detections[:max_det]
