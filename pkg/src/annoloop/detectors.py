"""Detector sessions: the trainable proposal source behind the campaign loop.

The synthetic detector is a desk-scale stand-in for fine-tuning a real model.
It never sees pixels; instead it corrupts the hidden ground truth of the
images it is asked to predict, with a quality ("skill") that saturates as the
session is exposed to more training boxes:

    skill(exposure, tau) = 1 - exp(-exposure / tau)

Per true box the detector fires with probability
``detect_floor + (detect_ceiling - detect_floor) * skill(class)``, jittering
the corners by centered uniform noise of magnitude
``jitter_scale * (1 - skill(class)) * side-length`` and reporting confidence
``clamp(skill(class) + noise, 0, 1)``.  Each image additionally receives
``Poisson(fp_rate_initial * (1 - overall skill))`` false positives placed
uniformly, with confidence drawn above the configured confidence threshold so
they survive filtering and genuinely cost a removal.

All randomness comes from one seeded :class:`~annoloop.rng.SplitMix64` stream
consumed in a fixed order -- images in input order; per image the true boxes
in stored order (one detect draw, then, when fired, four corner draws and one
confidence draw), then the false-positive count followed by six draws per
false positive (cx, cy, width, height, confidence, class index).  Identical
config and call sequence therefore reproduce identical detection streams.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Mapping, Sequence

from .dataset_io import ImageRecord
from .geometry import BoundingBox, DegenerateBox, clamp_to_image
from .matching import Detection
from .rng import SplitMix64


class DetectorSession(ABC):
    """Trainable proposal source; see the campaign loop for the call pattern."""

    @property
    @abstractmethod
    def descriptor(self) -> str: ...

    @abstractmethod
    def train(self, images: Sequence[ImageRecord], batch_index: int = 0) -> None:
        """Fine-tune on a batch of annotated images."""

    @abstractmethod
    def predict(
        self, images: Sequence[ImageRecord], batch_index: int = 0
    ) -> dict[str, list[Detection]]:
        """Propose detections for each image, keyed by image_id."""

    @abstractmethod
    def reset(self) -> None:
        """Return to the state of a fresh session with the same configuration."""


def skill(exposure: float, tau: float) -> float:
    """Saturating learning curve: 0 when untrained, approaching 1 with exposure."""
    if exposure < 0:
        raise ValueError("exposure must be >= 0")
    if tau <= 0:
        raise ValueError("tau must be > 0")
    return 1.0 - math.exp(-exposure / tau)


@dataclass(frozen=True)
class SyntheticDetectorConfig:
    """Knobs of the synthetic detector; none of the defaults claims any
    provenance beyond producing a plausibly improving detector."""

    seed: int = 0
    tau: float = 500.0
    detect_floor: float = 0.2
    detect_ceiling: float = 0.95
    jitter_scale: float = 0.3
    fp_rate_initial: float = 1.0
    confidence_noise: float = 0.1
    confidence_threshold: float = 0.5
    forgetting: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.detect_floor <= self.detect_ceiling <= 1.0:
            raise ValueError("need 0 <= detect_floor <= detect_ceiling <= 1")
        if self.tau <= 0:
            raise ValueError("tau must be > 0")
        if self.jitter_scale < 0 or self.fp_rate_initial < 0 or self.confidence_noise < 0:
            raise ValueError("noise scales must be >= 0")
        if not 0.0 < self.forgetting <= 1.0:
            raise ValueError("forgetting must be in (0, 1]")


class SyntheticDetector(DetectorSession):
    def __init__(self, config: SyntheticDetectorConfig, classes: Sequence[str]):
        if not classes:
            raise ValueError("the synthetic detector needs a class vocabulary")
        self.config = config
        self._classes = tuple(classes)
        self._exposure: dict[str, float] = {}
        self._rng = SplitMix64(config.seed)

    @property
    def descriptor(self) -> str:
        return "synthetic/1"

    @property
    def total_exposure(self) -> float:
        return sum(self._exposure.values())

    def class_skill(self, class_label: str) -> float:
        return skill(self._exposure.get(class_label, 0.0), self.config.tau)

    def train(self, images: Sequence[ImageRecord], batch_index: int = 0) -> None:
        counts: dict[str, int] = {}
        for img in images:
            for obj in img.objects:
                counts[obj.class_label] = counts.get(obj.class_label, 0) + 1
        if self.config.forgetting < 1.0:
            for label in self._exposure:
                if label not in counts:
                    self._exposure[label] *= self.config.forgetting
        for label, count in counts.items():
            self._exposure[label] = self._exposure.get(label, 0.0) + count

    def predict(
        self, images: Sequence[ImageRecord], batch_index: int = 0
    ) -> dict[str, list[Detection]]:
        cfg = self.config
        rng = self._rng
        overall = skill(self.total_exposure, cfg.tau)
        fp_rate = cfg.fp_rate_initial * (1.0 - overall)
        out: dict[str, list[Detection]] = {}
        for img in images:
            detections: list[Detection] = []
            for obj in img.objects:
                s = self.class_skill(obj.class_label)
                fired = rng.random() < cfg.detect_floor + (cfg.detect_ceiling - cfg.detect_floor) * s
                if not fired:
                    continue
                magnitude = cfg.jitter_scale * (1.0 - s)
                dx0 = rng.uniform(-1.0, 1.0) * magnitude * obj.box.width
                dy0 = rng.uniform(-1.0, 1.0) * magnitude * obj.box.height
                dx1 = rng.uniform(-1.0, 1.0) * magnitude * obj.box.width
                dy1 = rng.uniform(-1.0, 1.0) * magnitude * obj.box.height
                confidence = _clamp01(s + rng.uniform(-1.0, 1.0) * cfg.confidence_noise)
                try:
                    box = clamp_to_image(
                        BoundingBox(
                            obj.box.xmin + dx0,
                            obj.box.ymin + dy0,
                            obj.box.xmax + dx1,
                            obj.box.ymax + dy1,
                        ),
                        img.width,
                        img.height,
                    )
                except DegenerateBox:
                    continue
                detections.append(Detection(img.image_id, obj.class_label, box, confidence))
            for _ in range(rng.poisson(fp_rate)):
                cx = rng.uniform(0.0, img.width)
                cy = rng.uniform(0.0, img.height)
                bw = rng.uniform(0.05, 0.3) * img.width
                bh = rng.uniform(0.05, 0.3) * img.height
                confidence = rng.uniform(cfg.confidence_threshold, 1.0)
                label = self._classes[rng.below(len(self._classes))]
                box = clamp_to_image(
                    BoundingBox(cx - bw / 2, cy - bh / 2, cx + bw / 2, cy + bh / 2),
                    img.width,
                    img.height,
                )
                detections.append(Detection(img.image_id, label, box, confidence))
            out[img.image_id] = detections
        return out

    def reset(self) -> None:
        self._exposure = {}
        self._rng = SplitMix64(self.config.seed)

    def checkpoint(self) -> dict:
        return {"exposure": dict(self._exposure), "rng_state": self._rng.getstate()}

    def restore(self, state: Mapping) -> None:
        self._exposure = dict(state["exposure"])
        self._rng.setstate(state["rng_state"])


class PerfectDetector(DetectorSession):
    """Echoes the hidden ground truth at full confidence; the zero-correction limit."""

    @property
    def descriptor(self) -> str:
        return "perfect/1"

    def train(self, images: Sequence[ImageRecord], batch_index: int = 0) -> None:
        pass

    def predict(
        self, images: Sequence[ImageRecord], batch_index: int = 0
    ) -> dict[str, list[Detection]]:
        return {
            img.image_id: [
                Detection(img.image_id, obj.class_label, obj.box, 1.0)
                for obj in img.objects
            ]
            for img in images
        }

    def reset(self) -> None:
        pass


class NullDetector(DetectorSession):
    """Never proposes anything; every ground-truth box becomes an addition."""

    @property
    def descriptor(self) -> str:
        return "null/1"

    def train(self, images: Sequence[ImageRecord], batch_index: int = 0) -> None:
        pass

    def predict(
        self, images: Sequence[ImageRecord], batch_index: int = 0
    ) -> dict[str, list[Detection]]:
        return {img.image_id: [] for img in images}

    def reset(self) -> None:
        pass


class ScriptedDetector(DetectorSession):
    """Replays a fixed image_id -> detections table; training is ignored."""

    def __init__(self, predictions: Mapping[str, Sequence[Detection]], descriptor: str = "scripted/1"):
        self._predictions = {k: tuple(v) for k, v in predictions.items()}
        self._descriptor = descriptor

    @property
    def descriptor(self) -> str:
        return self._descriptor

    def train(self, images: Sequence[ImageRecord], batch_index: int = 0) -> None:
        pass

    def predict(
        self, images: Sequence[ImageRecord], batch_index: int = 0
    ) -> dict[str, list[Detection]]:
        return {img.image_id: list(self._predictions.get(img.image_id, ())) for img in images}

    def reset(self) -> None:
        pass


def _clamp01(value: float) -> float:
    return min(max(value, 0.0), 1.0)


DETECTION_FIXTURE_FORMAT = "annoloop-detections"
DETECTION_FIXTURE_VERSION = 1


def save_detection_fixture(path, predictions: Mapping[str, Sequence[Detection]]) -> None:
    """Write an image_id -> detections table as JSONL (the adapter fixture format)."""
    import json

    lines = [
        json.dumps(
            {"format": DETECTION_FIXTURE_FORMAT, "version": DETECTION_FIXTURE_VERSION},
            sort_keys=True,
            separators=(",", ":"),
        )
    ]
    for image_id in sorted(predictions):
        lines.append(
            json.dumps(
                {
                    "image_id": image_id,
                    "detections": [
                        {
                            "class_label": det.class_label,
                            "box": [det.box.xmin, det.box.ymin, det.box.xmax, det.box.ymax],
                            "confidence": det.confidence,
                        }
                        for det in predictions[image_id]
                    ],
                },
                sort_keys=True,
                separators=(",", ":"),
            )
        )
    with open(path, "w", encoding="utf-8", newline="\n") as fp:
        fp.write("\n".join(lines) + "\n")


def load_detection_fixture(path) -> dict[str, list[Detection]]:
    import json

    with open(path, encoding="utf-8") as fp:
        header = json.loads(fp.readline())
        if header.get("format") != DETECTION_FIXTURE_FORMAT:
            raise ValueError(f"{path}: not a detection fixture")
        if header.get("version") != DETECTION_FIXTURE_VERSION:
            raise ValueError(f"{path}: unsupported fixture version")
        table: dict[str, list[Detection]] = {}
        for line in fp:
            if not line.strip():
                continue
            record = json.loads(line)
            image_id = record["image_id"]
            table[image_id] = [
                Detection(
                    image_id,
                    entry["class_label"],
                    BoundingBox(*entry["box"]),
                    entry["confidence"],
                )
                for entry in record["detections"]
            ]
    return table
