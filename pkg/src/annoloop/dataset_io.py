"""Dataset ingestion: PASCAL VOC XML, COCO JSON and OpenImages CSV readers,
plus a canonical line-delimited format that round-trips losslessly.

All readers normalize to one representation: continuous 0-based corner boxes,
a lexicographically sorted class vocabulary, and images sorted by ``image_id``.
VOC's 1-based integer pixel indices are shifted at ingestion (``xmin - 1``,
``ymin - 1``; the max corners already denote the right/bottom pixel edge).
Per-record problems are collected into :class:`ParseResult.errors` rather than
aborting the parse; callers decide whether collected errors are fatal.

Images that end up with zero ground-truth objects are kept: they still cost
review time in a campaign and can produce false positives.  When a source
marks a group box ("multiple objects inside a single bounding box") only the
flagged box is dropped by :func:`filter_objects`, never the whole image.
"""

from __future__ import annotations

import json
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Iterator, Mapping

from .geometry import BoundingBox, DegenerateBox, clamp_to_image

FLAG_OCCLUDED = "occluded"
FLAG_TRUNCATED = "truncated"
FLAG_GROUP = "group"
FLAG_DIFFICULT = "difficult"
VALID_FLAGS = frozenset({FLAG_OCCLUDED, FLAG_TRUNCATED, FLAG_GROUP, FLAG_DIFFICULT})

PROVENANCES = frozenset({"voc", "coco", "openimages", "canonical", "synthetic"})

CANONICAL_FORMAT = "annoloop-dataset"
CANONICAL_VERSION = 1


class ParseError(Exception):
    """A record that could not be ingested, with its origin and the reason."""

    def __init__(self, document: str, reason: str):
        super().__init__(f"{document}: {reason}")
        self.document = document
        self.reason = reason


class UnsupportedVersion(ParseError):
    """Canonical stream written by an unknown format version."""


@dataclass(frozen=True)
class GroundTruthObject:
    class_label: str
    box: BoundingBox
    flags: frozenset = frozenset()

    def __post_init__(self):
        if not self.class_label:
            raise ValueError("class_label must be nonempty")
        unknown = set(self.flags) - VALID_FLAGS
        if unknown:
            raise ValueError(f"unknown flags: {sorted(unknown)}")


@dataclass(frozen=True)
class ImageRecord:
    image_id: str
    source_name: str
    width: int
    height: int
    objects: tuple[GroundTruthObject, ...] = ()
    sequence_index: int | None = None

    def __post_init__(self):
        if not isinstance(self.width, int) or not isinstance(self.height, int):
            raise ValueError(f"{self.image_id}: image dimensions must be integers")
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"{self.image_id}: image dimensions must be positive")
        if self.sequence_index is not None and self.sequence_index < 0:
            raise ValueError(f"{self.image_id}: sequence_index must be >= 0")
        for obj in self.objects:
            b = obj.box
            if b.xmin < 0 or b.ymin < 0 or b.xmax > self.width or b.ymax > self.height:
                raise ValueError(
                    f"{self.image_id}: object box {b} exceeds image bounds "
                    f"{self.width}x{self.height}"
                )


@dataclass(frozen=True)
class Dataset:
    images: tuple[ImageRecord, ...]
    classes: tuple[str, ...]
    provenance: str

    def __post_init__(self):
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        ids = [img.image_id for img in self.images]
        if len(set(ids)) != len(ids):
            raise ValueError("image_id values must be unique across the dataset")
        seq = [img.sequence_index for img in self.images if img.sequence_index is not None]
        if len(set(seq)) != len(seq):
            raise ValueError("sequence_index values must be unique across the dataset")
        vocabulary = set(self.classes)
        for img in self.images:
            for obj in img.objects:
                if obj.class_label not in vocabulary:
                    raise ValueError(
                        f"{img.image_id}: class {obj.class_label!r} not in vocabulary"
                    )

    @property
    def total_objects(self) -> int:
        return sum(len(img.objects) for img in self.images)


@dataclass
class ParseResult:
    """A parsed dataset plus every record-level problem encountered."""

    dataset: Dataset
    errors: list[ParseError] = field(default_factory=list)

    @property
    def missing_dimensions(self) -> list[str]:
        """Image ids referenced by rows that had no dimension metadata."""
        ids = {e.document for e in self.errors if e.reason.startswith("no image dimensions")}
        return sorted(ids)


def _sorted_images(images: Iterable[ImageRecord]) -> tuple[ImageRecord, ...]:
    return tuple(sorted(images, key=lambda img: img.image_id))


# --- PASCAL VOC ---------------------------------------------------------

def parse_voc(documents: Iterable[tuple[str, str]]) -> ParseResult:
    """Parse VOC-style annotation XML documents given as (name, text) pairs."""
    images: list[ImageRecord] = []
    errors: list[ParseError] = []
    seen_ids: set[str] = set()
    labels: set[str] = set()

    for doc_id, text in documents:
        try:
            root = ET.fromstring(text)
        except ET.ParseError as exc:
            errors.append(ParseError(doc_id, f"malformed XML: {exc}"))
            continue
        filename = root.findtext("filename")
        if not filename:
            errors.append(ParseError(doc_id, "missing <filename>"))
            continue
        size = root.find("size")
        width = _int_or_none(size.findtext("width")) if size is not None else None
        height = _int_or_none(size.findtext("height")) if size is not None else None
        if not width or not height:
            errors.append(ParseError(doc_id, "missing or invalid <size>"))
            continue
        image_id = Path(filename).stem
        if image_id in seen_ids:
            errors.append(ParseError(doc_id, f"duplicate image_id {image_id!r}"))
            continue

        objects: list[GroundTruthObject] = []
        for index, node in enumerate(root.iter("object")):
            name = node.findtext("name")
            bnd = node.find("bndbox")
            if not name or bnd is None:
                errors.append(ParseError(doc_id, f"object {index}: missing name or bndbox"))
                continue
            try:
                corners = [float(bnd.findtext(tag)) for tag in ("xmin", "ymin", "xmax", "ymax")]
            except (TypeError, ValueError):
                errors.append(ParseError(doc_id, f"object {index}: incomplete bndbox"))
                continue
            flags = set()
            for tag, flag in (
                ("difficult", FLAG_DIFFICULT),
                ("truncated", FLAG_TRUNCATED),
                ("occluded", FLAG_OCCLUDED),
            ):
                if node.findtext(tag, default="0").strip() == "1":
                    flags.add(flag)
            try:
                # VOC corners are 1-based pixel indices: pixel k spans [k-1, k]
                # in continuous coordinates, so only the min corners shift.
                box = clamp_to_image(
                    BoundingBox(corners[0] - 1, corners[1] - 1, corners[2], corners[3]),
                    width,
                    height,
                )
            except (DegenerateBox, ValueError) as exc:
                errors.append(ParseError(doc_id, f"object {index}: {exc}"))
                continue
            objects.append(GroundTruthObject(name, box, frozenset(flags)))
            labels.add(name)
        seen_ids.add(image_id)
        images.append(ImageRecord(image_id, filename, width, height, tuple(objects)))

    dataset = Dataset(_sorted_images(images), tuple(sorted(labels)), "voc")
    return ParseResult(dataset, errors)


def iter_voc_directory(path: str | Path) -> Iterator[tuple[str, str]]:
    """Yield (filename, xml text) for every ``.xml`` file under ``path``, sorted."""
    for xml_path in sorted(Path(path).glob("*.xml")):
        yield xml_path.name, xml_path.read_text(encoding="utf-8")


def _int_or_none(text: str | None) -> int | None:
    try:
        return int(text)  # type: ignore[arg-type]
    except (TypeError, ValueError):
        return None


# --- COCO ----------------------------------------------------------------

def parse_coco(document: Mapping) -> ParseResult:
    """Parse a loaded COCO instances JSON object.

    Raises :class:`ParseError` when the top-level layout is not COCO-shaped;
    per-annotation problems (dangling image or category references, degenerate
    boxes) are collected instead.
    """
    for key in ("images", "annotations", "categories"):
        if key not in document:
            raise ParseError("coco", f"missing top-level {key!r} array")

    errors: list[ParseError] = []
    categories = {}
    for cat in document["categories"]:
        categories[cat["id"]] = cat["name"]

    meta: dict[str, tuple[str, int, int]] = {}
    for img in document["images"]:
        image_id = str(img["id"])
        meta[image_id] = (img.get("file_name", image_id), int(img["width"]), int(img["height"]))

    objects_by_image: dict[str, list[GroundTruthObject]] = {k: [] for k in meta}
    for index, ann in enumerate(document["annotations"]):
        where = f"annotation {ann.get('id', index)}"
        image_id = str(ann.get("image_id"))
        if image_id not in meta:
            errors.append(ParseError(where, f"unknown image_id {image_id!r}"))
            continue
        category_id = ann.get("category_id")
        if category_id not in categories:
            errors.append(ParseError(where, f"unknown category_id {category_id!r}"))
            continue
        try:
            x, y, w, h = (float(v) for v in ann["bbox"])
            _, img_w, img_h = meta[image_id]
            box = clamp_to_image(BoundingBox(x, y, x + w, y + h), img_w, img_h)
        except (KeyError, TypeError, ValueError, DegenerateBox) as exc:
            errors.append(ParseError(where, f"bad bbox: {exc}"))
            continue
        flags = frozenset({FLAG_GROUP}) if ann.get("iscrowd") else frozenset()
        objects_by_image[image_id].append(
            GroundTruthObject(categories[category_id], box, flags)
        )

    images = [
        ImageRecord(image_id, source, width, height, tuple(objects_by_image[image_id]))
        for image_id, (source, width, height) in meta.items()
    ]
    classes = tuple(sorted(set(categories.values())))
    return ParseResult(Dataset(_sorted_images(images), classes, "coco"), errors)


# --- OpenImages ----------------------------------------------------------

def parse_openimages(
    box_rows: Iterable[Mapping[str, str]],
    image_meta: Mapping[str, tuple[int, int]],
) -> ParseResult:
    """Parse OpenImages box CSV rows against an image-dimension table.

    ``box_rows`` should look like ``csv.DictReader`` output over the standard
    boxes CSV (normalized XMin/XMax/YMin/YMax in [0, 1] plus the IsOccluded /
    IsTruncated / IsGroupOf flag columns).  ``IsDepiction`` is tolerated but
    maps to no flag.  Every image in ``image_meta`` yields a record, so images
    without any box survive as pure negatives.
    """
    errors: list[ParseError] = []
    objects_by_image: dict[str, list[GroundTruthObject]] = {k: [] for k in image_meta}
    labels: set[str] = set()

    for index, row in enumerate(box_rows):
        image_id = row.get("ImageID", "")
        where = image_id or f"row {index}"
        if image_id not in image_meta:
            errors.append(ParseError(where, "no image dimensions for this id"))
            continue
        label = row.get("LabelName", "")
        if not label:
            errors.append(ParseError(where, f"row {index}: missing LabelName"))
            continue
        width, height = image_meta[image_id]
        try:
            box = clamp_to_image(
                BoundingBox(
                    float(row["XMin"]) * width,
                    float(row["YMin"]) * height,
                    float(row["XMax"]) * width,
                    float(row["YMax"]) * height,
                ),
                width,
                height,
            )
        except (KeyError, ValueError, DegenerateBox) as exc:
            errors.append(ParseError(where, f"row {index}: bad box: {exc}"))
            continue
        flags = set()
        if row.get("IsOccluded", "0").strip() == "1":
            flags.add(FLAG_OCCLUDED)
        if row.get("IsTruncated", "0").strip() == "1":
            flags.add(FLAG_TRUNCATED)
        if row.get("IsGroupOf", "0").strip() == "1":
            flags.add(FLAG_GROUP)
        objects_by_image[image_id].append(GroundTruthObject(label, box, frozenset(flags)))
        labels.add(label)

    images = [
        ImageRecord(image_id, image_id, width, height, tuple(objects_by_image[image_id]))
        for image_id, (width, height) in image_meta.items()
    ]
    dataset = Dataset(_sorted_images(images), tuple(sorted(labels)), "openimages")
    return ParseResult(dataset, errors)


def read_image_dimensions(lines: Iterable[str]) -> dict[str, tuple[int, int]]:
    """Read an ``ImageID,Width,Height`` CSV (header required) into a mapping."""
    import csv

    meta: dict[str, tuple[int, int]] = {}
    for row in csv.DictReader(lines):
        meta[row["ImageID"]] = (int(row["Width"]), int(row["Height"]))
    return meta


# --- Filtering -----------------------------------------------------------

def filter_objects(dataset: Dataset, drop_flags: Iterable[str]) -> Dataset:
    """Drop every object carrying any of ``drop_flags``; images and classes stay."""
    drop = frozenset(drop_flags)
    unknown = drop - VALID_FLAGS
    if unknown:
        raise ValueError(f"unknown flags: {sorted(unknown)}")
    images = tuple(
        ImageRecord(
            img.image_id,
            img.source_name,
            img.width,
            img.height,
            tuple(obj for obj in img.objects if not (obj.flags & drop)),
            img.sequence_index,
        )
        for img in dataset.images
    )
    return Dataset(images, dataset.classes, dataset.provenance)


# --- Canonical format ----------------------------------------------------

def _dump(record: dict) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"))


def write_canonical(dataset: Dataset, sink: IO[str]) -> None:
    """Write the canonical line-delimited form; equal datasets yield equal bytes."""
    sink.write(dumps_canonical(dataset))


def dumps_canonical(dataset: Dataset) -> str:
    lines = [
        _dump(
            {
                "format": CANONICAL_FORMAT,
                "version": CANONICAL_VERSION,
                "classes": list(dataset.classes),
                "provenance": dataset.provenance,
            }
        )
    ]
    for img in dataset.images:
        record = {
            "image_id": img.image_id,
            "source_name": img.source_name,
            "width": img.width,
            "height": img.height,
            "objects": [
                {
                    "class_label": obj.class_label,
                    "box": [obj.box.xmin, obj.box.ymin, obj.box.xmax, obj.box.ymax],
                    "flags": sorted(obj.flags),
                }
                for obj in img.objects
            ],
        }
        if img.sequence_index is not None:
            record["sequence_index"] = img.sequence_index
        lines.append(_dump(record))
    return "\n".join(lines) + "\n"


def read_canonical(source: IO[str] | Iterable[str]) -> Dataset:
    """Inverse of :func:`write_canonical`; raises :class:`ParseError` with line numbers."""
    lines = iter(source)
    try:
        header_line = next(lines)
    except StopIteration:
        raise ParseError("line 1", "empty canonical stream") from None
    header = _load_json("line 1", header_line)
    if header.get("format") != CANONICAL_FORMAT:
        raise ParseError("line 1", f"not an {CANONICAL_FORMAT} stream")
    if header.get("version") != CANONICAL_VERSION:
        raise UnsupportedVersion("line 1", f"unsupported version {header.get('version')!r}")

    images = []
    for number, line in enumerate(lines, start=2):
        if not line.strip():
            continue
        where = f"line {number}"
        record = _load_json(where, line)
        try:
            objects = tuple(
                GroundTruthObject(
                    entry["class_label"],
                    BoundingBox(*entry["box"]),
                    frozenset(entry["flags"]),
                )
                for entry in record["objects"]
            )
            images.append(
                ImageRecord(
                    record["image_id"],
                    record["source_name"],
                    record["width"],
                    record["height"],
                    objects,
                    record.get("sequence_index"),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(where, f"bad image record: {exc}") from exc
    try:
        return Dataset(tuple(images), tuple(header["classes"]), header["provenance"])
    except (KeyError, ValueError) as exc:
        raise ParseError("line 1", f"bad dataset: {exc}") from exc


def load_canonical(path: str | Path) -> Dataset:
    with open(path, encoding="utf-8") as fp:
        return read_canonical(fp)


def save_canonical(dataset: Dataset, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fp:
        write_canonical(dataset, fp)


def _load_json(where: str, line: str) -> dict:
    try:
        record = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(where, f"malformed JSON: {exc}") from exc
    if not isinstance(record, dict):
        raise ParseError(where, "expected a JSON object")
    return record
