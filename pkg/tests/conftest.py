from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # for oracles / instances helpers

from annoloop.dataset_io import Dataset, GroundTruthObject, ImageRecord
from annoloop.geometry import BoundingBox


DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture
def tiny_dataset() -> Dataset:
    """Three small images over two classes, one flagged object."""
    box = BoundingBox
    images = (
        ImageRecord(
            "img-a", "img-a.jpg", 100, 100,
            (
                GroundTruthObject("car", box(10, 10, 40, 40)),
                GroundTruthObject("person", box(50, 50, 80, 90), frozenset({"occluded"})),
            ),
        ),
        ImageRecord(
            "img-b", "img-b.jpg", 200, 150,
            (GroundTruthObject("car", box(20, 30, 120, 100)),),
        ),
        ImageRecord("img-c", "img-c.jpg", 64, 64, ()),
    )
    return Dataset(images, ("car", "person"), "canonical")


@pytest.fixture
def data_dir() -> Path:
    return DATA_DIR
