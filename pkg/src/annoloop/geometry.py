"""Axis-aligned box arithmetic and intersection-over-union.

Boxes use the corner convention ``[xmin, ymin, xmax, ymax]`` in continuous,
0-based pixel coordinates.  Sources that use width/height boxes or 1-based
pixel indices (PASCAL VOC) are converted once at ingestion so that all
geometry downstream shares a single convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


class DegenerateBox(ValueError):
    """A box collapsed to zero area (for example after clipping)."""


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned rectangle; strictly positive area is enforced."""

    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def __post_init__(self):
        # normalize to float so equal boxes always serialize identically
        for name in ("xmin", "ymin", "xmax", "ymax"):
            object.__setattr__(self, name, float(getattr(self, name)))
        for value in (self.xmin, self.ymin, self.xmax, self.ymax):
            if not math.isfinite(value):
                raise ValueError(f"box coordinates must be finite, got {value!r}")
        if not (self.xmin < self.xmax and self.ymin < self.ymax):
            raise DegenerateBox(
                f"box must have positive width and height, got "
                f"({self.xmin}, {self.ymin}, {self.xmax}, {self.ymax})"
            )

    @property
    def width(self) -> float:
        return self.xmax - self.xmin

    @property
    def height(self) -> float:
        return self.ymax - self.ymin


def area(box: BoundingBox) -> float:
    return box.width * box.height


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection area over union area; 0.0 for disjoint boxes."""
    ix = min(a.xmax, b.xmax) - max(a.xmin, b.xmin)
    if ix <= 0.0:
        return 0.0
    iy = min(a.ymax, b.ymax) - max(a.ymin, b.ymin)
    if iy <= 0.0:
        return 0.0
    intersection = ix * iy
    union = area(a) + area(b) - intersection
    return intersection / union


def clamp_to_image(box: BoundingBox, width: float, height: float) -> BoundingBox:
    """Clip a box into ``[0, width] x [0, height]``.

    Raises :class:`DegenerateBox` when nothing of the box remains inside the
    image; callers treat that as an unusable detection and drop it.
    """
    if width <= 0 or height <= 0:
        raise ValueError("image dimensions must be positive")
    xmin = min(max(box.xmin, 0.0), float(width))
    ymin = min(max(box.ymin, 0.0), float(height))
    xmax = min(max(box.xmax, 0.0), float(width))
    ymax = min(max(box.ymax, 0.0), float(height))
    if xmin >= xmax or ymin >= ymax:
        raise DegenerateBox(f"box {box} lies outside a {width}x{height} image")
    return BoundingBox(xmin, ymin, xmax, ymax)
