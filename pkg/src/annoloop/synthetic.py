"""Seeded synthetic datasets for experiments and tests.

Generated images carry a sequence index (so the "original" ordering is
meaningful, as for video-derived sets) and a Poisson-distributed number of
uniformly placed boxes; a few images therefore come out empty, which is
intentional -- pure negatives still cost review time in a campaign.
"""

from __future__ import annotations

from typing import Sequence

from .dataset_io import Dataset, GroundTruthObject, ImageRecord
from .geometry import BoundingBox, clamp_to_image
from .rng import SplitMix64

DEFAULT_CLASSES = ("box", "cone", "crate")


def make_synthetic_dataset(
    num_images: int,
    seed: int,
    classes: Sequence[str] = DEFAULT_CLASSES,
    mean_objects: float = 2.25,
    width: int = 640,
    height: int = 480,
) -> Dataset:
    if num_images < 1:
        raise ValueError("num_images must be >= 1")
    if not classes:
        raise ValueError("need at least one class")
    rng = SplitMix64(seed)
    vocabulary = tuple(sorted(classes))
    images = []
    for index in range(num_images):
        objects = []
        for _ in range(rng.poisson(mean_objects)):
            cx = rng.uniform(0.0, width)
            cy = rng.uniform(0.0, height)
            bw = rng.uniform(0.06, 0.35) * width
            bh = rng.uniform(0.06, 0.35) * height
            box = clamp_to_image(
                BoundingBox(cx - bw / 2, cy - bh / 2, cx + bw / 2, cy + bh / 2),
                width,
                height,
            )
            label = vocabulary[rng.below(len(vocabulary))]
            objects.append(GroundTruthObject(label, box))
        images.append(
            ImageRecord(
                image_id=f"synth-{index:06d}",
                source_name=f"synth-{index:06d}.jpg",
                width=width,
                height=height,
                objects=tuple(objects),
                sequence_index=index,
            )
        )
    return Dataset(tuple(images), vocabulary, "synthetic")
