"""Image ordering strategies, batching, and per-class scoping.

Three orderings are supported: a seeded shuffle (Fisher-Yates under the
portable generator in :mod:`annoloop.rng`, so the permutation replays
identically everywhere), descending per-image object count with image_id as
the tie-break, and the dataset's own order -- the temporal sequence index when
every image carries one (video-derived sets), otherwise the source filename.
For sets whose "original" order really reflects upstream shard order rather
than filenames, lexicographic filenames are an assumption, not a guarantee.
"""

from __future__ import annotations

from dataclasses import dataclass

from .dataset_io import Dataset, ImageRecord
from .rng import SplitMix64

SHUFFLED = "shuffled"
SORTED_BY_OBJECT_COUNT = "sorted_by_object_count"
ORIGINAL = "original"
STRATEGY_KINDS = (SHUFFLED, SORTED_BY_OBJECT_COUNT, ORIGINAL)


class UnknownClass(KeyError):
    """The requested class label is not in the dataset vocabulary."""


@dataclass(frozen=True)
class OrderingStrategy:
    kind: str
    seed: int | None = None

    def __post_init__(self):
        if self.kind not in STRATEGY_KINDS:
            raise ValueError(f"unknown ordering strategy {self.kind!r}")
        if self.kind == SHUFFLED and self.seed is None:
            raise ValueError("shuffled ordering requires an explicit seed")

    @classmethod
    def shuffled(cls, seed: int) -> "OrderingStrategy":
        return cls(SHUFFLED, seed)

    @classmethod
    def sorted_by_object_count(cls) -> "OrderingStrategy":
        return cls(SORTED_BY_OBJECT_COUNT)

    @classmethod
    def original(cls) -> "OrderingStrategy":
        return cls(ORIGINAL)


@dataclass(frozen=True)
class Batch:
    index: int
    image_ids: tuple[str, ...]

    def __post_init__(self):
        if not self.image_ids:
            raise ValueError("a batch cannot be empty")


def order_images(dataset: Dataset, strategy: OrderingStrategy) -> list[str]:
    """Permute the dataset's image ids according to the strategy."""
    if not dataset.images:
        raise ValueError("cannot order an empty dataset")
    if strategy.kind == SHUFFLED:
        ids = [img.image_id for img in dataset.images]
        SplitMix64(strategy.seed).shuffle(ids)
        return ids
    if strategy.kind == SORTED_BY_OBJECT_COUNT:
        ranked = sorted(dataset.images, key=lambda img: (-len(img.objects), img.image_id))
        return [img.image_id for img in ranked]
    if all(img.sequence_index is not None for img in dataset.images):
        ranked = sorted(dataset.images, key=lambda img: img.sequence_index)
    else:
        ranked = sorted(dataset.images, key=lambda img: (img.source_name, img.image_id))
    return [img.image_id for img in ranked]


def make_batches(order: list[str], batch_size: int) -> list[Batch]:
    """Chunk an ordered id list into consecutive batches of ``batch_size``."""
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    return [
        Batch(index, tuple(order[start : start + batch_size]))
        for index, start in enumerate(range(0, len(order), batch_size))
    ]


def class_scope(
    dataset: Dataset, class_label: str, drop_other_objects: bool = True
) -> Dataset:
    """Restrict a dataset to the images containing at least one ``class_label`` box.

    By default other-class boxes inside the retained images are removed and
    the vocabulary shrinks to the single class, matching per-class campaign
    accounting; pass ``drop_other_objects=False`` to keep them as distractors.
    """
    if class_label not in dataset.classes:
        raise UnknownClass(class_label)
    images = []
    for img in dataset.images:
        kept = tuple(
            obj
            for obj in img.objects
            if not drop_other_objects or obj.class_label == class_label
        )
        if any(obj.class_label == class_label for obj in img.objects):
            images.append(
                ImageRecord(
                    img.image_id, img.source_name, img.width, img.height,
                    kept, img.sequence_index,
                )
            )
    classes = (class_label,) if drop_other_objects else dataset.classes
    return Dataset(tuple(images), classes, dataset.provenance)
