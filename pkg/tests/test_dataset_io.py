import csv
import io
import json

import pytest
from hypothesis import given

from annoloop.dataset_io import (
    Dataset,
    GroundTruthObject,
    ImageRecord,
    ParseError,
    UnsupportedVersion,
    dumps_canonical,
    filter_objects,
    parse_coco,
    parse_openimages,
    parse_voc,
    read_canonical,
    read_image_dimensions,
)
from annoloop.geometry import BoundingBox

from dataset_strategies import datasets


VOC_TEMPLATE = """
<annotation>
  <filename>{name}.jpg</filename>
  <size><width>{width}</width><height>{height}</height><depth>3</depth></size>
  {objects}
</annotation>
"""

VOC_OBJECT = """
  <object>
    <name>{name}</name>
    {extra}
    <bndbox><xmin>{xmin}</xmin><ymin>{ymin}</ymin><xmax>{xmax}</xmax><ymax>{ymax}</ymax></bndbox>
  </object>
"""


def voc_doc(name, width=500, height=375, objects=""):
    return VOC_TEMPLATE.format(name=name, width=width, height=height, objects=objects)


class TestParseVoc:
    def test_one_based_corners_become_zero_based(self):
        doc = voc_doc("000001", objects=VOC_OBJECT.format(
            name="person", extra="", xmin=10, ymin=20, xmax=110, ymax=220))
        result = parse_voc([("000001.xml", doc)])
        assert not result.errors
        (img,) = result.dataset.images
        assert img.image_id == "000001"
        assert img.source_name == "000001.jpg"
        (obj,) = img.objects
        assert obj.class_label == "person"
        assert obj.box == BoundingBox(9, 19, 110, 220)

    def test_document_with_zero_objects(self):
        result = parse_voc([("e.xml", voc_doc("empty"))])
        (img,) = result.dataset.images
        assert img.objects == ()

    def test_classes_sorted_lexicographically(self):
        docs = [
            ("1.xml", voc_doc("im1", objects=VOC_OBJECT.format(
                name="person", extra="", xmin=1, ymin=1, xmax=50, ymax=50))),
            ("2.xml", voc_doc("im2", objects=VOC_OBJECT.format(
                name="car", extra="", xmin=1, ymin=1, xmax=50, ymax=50))),
            ("3.xml", voc_doc("im3", objects=VOC_OBJECT.format(
                name="car", extra="", xmin=2, ymin=2, xmax=60, ymax=60))),
        ]
        result = parse_voc(docs)
        assert result.dataset.classes == ("car", "person")
        assert result.dataset.provenance == "voc"

    def test_difficult_and_truncated_flags(self):
        doc = voc_doc("f", objects=VOC_OBJECT.format(
            name="dog", extra="<difficult>1</difficult><truncated>1</truncated>",
            xmin=5, ymin=5, xmax=30, ymax=30))
        result = parse_voc([("f.xml", doc)])
        (obj,) = result.dataset.images[0].objects
        assert obj.flags == frozenset({"difficult", "truncated"})

    def test_malformed_xml_collected_not_raised(self):
        result = parse_voc([("bad.xml", "<annotation><oops"), ("ok.xml", voc_doc("ok"))])
        assert len(result.errors) == 1
        assert result.errors[0].document == "bad.xml"
        assert [img.image_id for img in result.dataset.images] == ["ok"]

    def test_missing_size_is_an_error(self):
        result = parse_voc([("n.xml", "<annotation><filename>x.jpg</filename></annotation>")])
        assert result.errors and not result.dataset.images


def coco_fixture():
    return {
        "images": [
            {"id": 1, "file_name": "a.jpg", "width": 640, "height": 480},
            {"id": 2, "file_name": "b.jpg", "width": 320, "height": 240},
        ],
        "annotations": [
            {"id": 10, "image_id": 1, "category_id": 7, "bbox": [10, 20, 100, 200]},
            {"id": 11, "image_id": 1, "category_id": 8, "bbox": [0, 0, 50, 50], "iscrowd": 1},
            {"id": 12, "image_id": 2, "category_id": 7, "bbox": [5, 5, 30, 40]},
        ],
        "categories": [{"id": 7, "name": "person"}, {"id": 8, "name": "car"}],
    }


class TestParseCoco:
    def test_fixture_counts_and_box_conversion(self):
        result = parse_coco(coco_fixture())
        assert not result.errors
        dataset = result.dataset
        assert len(dataset.images) == 2
        assert dataset.total_objects == 3
        assert dataset.classes == ("car", "person")
        img1 = next(img for img in dataset.images if img.image_id == "1")
        assert img1.objects[0].box == BoundingBox(10, 20, 110, 220)

    def test_iscrowd_maps_to_group_flag(self):
        result = parse_coco(coco_fixture())
        img1 = next(img for img in result.dataset.images if img.image_id == "1")
        assert img1.objects[1].flags == frozenset({"group"})
        assert img1.objects[0].flags == frozenset()

    def test_dangling_references_collected(self):
        doc = coco_fixture()
        doc["annotations"].append({"id": 13, "image_id": 99, "category_id": 7, "bbox": [1, 1, 2, 2]})
        doc["annotations"].append({"id": 14, "image_id": 1, "category_id": 99, "bbox": [1, 1, 2, 2]})
        result = parse_coco(doc)
        assert len(result.errors) == 2
        assert result.dataset.total_objects == 3

    def test_not_coco_shaped_raises(self):
        with pytest.raises(ParseError):
            parse_coco({"images": []})


OPENIMAGES_HEADER = (
    "ImageID,Source,LabelName,Confidence,XMin,XMax,YMin,YMax,"
    "IsOccluded,IsTruncated,IsGroupOf,IsDepiction,IsInside"
)


def openimages_rows(text):
    return csv.DictReader(io.StringIO(OPENIMAGES_HEADER + "\n" + text.strip()))


class TestParseOpenImages:
    META = {"imA": (1000, 500), "imB": (200, 200)}

    def test_normalized_coordinates_scaled(self):
        rows = openimages_rows("imA,xclick,person,1,0.1,0.5,0.2,0.8,0,0,0,0,0")
        result = parse_openimages(rows, self.META)
        img = next(i for i in result.dataset.images if i.image_id == "imA")
        assert img.objects[0].box == BoundingBox(100, 100, 500, 400)

    def test_flag_columns(self):
        rows = openimages_rows(
            "imA,x,person,1,0.1,0.5,0.2,0.8,1,0,0,0,0\n"
            "imA,x,person,1,0.1,0.5,0.2,0.8,0,1,1,1,0"
        )
        result = parse_openimages(rows, self.META)
        img = next(i for i in result.dataset.images if i.image_id == "imA")
        assert img.objects[0].flags == frozenset({"occluded"})
        # IsDepiction maps to no flag
        assert img.objects[1].flags == frozenset({"truncated", "group"})

    def test_unknown_image_id_reported_as_missing_dimensions(self):
        rows = openimages_rows(
            "imA,x,person,1,0.1,0.5,0.2,0.8,0,0,0,0,0\n"
            "imA,x,person,1,0.2,0.6,0.2,0.8,0,0,0,0,0\n"
            "imB,x,cat,1,0.0,1.0,0.0,1.0,0,0,0,0,0\n"
            "imB,x,cat,1,0.5,0.9,0.1,0.2,0,0,0,0,0\n"
            "ghost,x,cat,1,0.1,0.2,0.1,0.2,0,0,0,0,0"
        )
        result = parse_openimages(rows, self.META)
        assert result.dataset.total_objects == 4
        assert result.missing_dimensions == ["ghost"]
        assert len(result.errors) == 1

    def test_meta_only_images_survive_as_pure_negatives(self):
        result = parse_openimages(openimages_rows(""), self.META)
        assert {img.image_id for img in result.dataset.images} == {"imA", "imB"}
        assert result.dataset.total_objects == 0


def test_read_image_dimensions():
    meta = read_image_dimensions(io.StringIO("ImageID,Width,Height\nx,10,20\ny,30,40\n"))
    assert meta == {"x": (10, 20), "y": (30, 40)}


class TestFilterObjects:
    def test_empty_drop_set_is_identity(self, tiny_dataset):
        assert filter_objects(tiny_dataset, set()) == tiny_dataset

    def test_drops_exactly_flagged_objects(self, tiny_dataset):
        filtered = filter_objects(tiny_dataset, {"occluded"})
        assert filtered.total_objects == tiny_dataset.total_objects - 1
        assert len(filtered.images) == len(tiny_dataset.images)
        assert filtered.classes == tiny_dataset.classes

    def test_unknown_flag_rejected(self, tiny_dataset):
        with pytest.raises(ValueError):
            filter_objects(tiny_dataset, {"blurry"})


class TestCanonicalFormat:
    def test_round_trip_fixture_datasets(self, tiny_dataset):
        assert read_canonical(io.StringIO(dumps_canonical(tiny_dataset))) == tiny_dataset

    def test_round_trip_parsed_coco(self):
        dataset = parse_coco(coco_fixture()).dataset
        assert read_canonical(io.StringIO(dumps_canonical(dataset))) == dataset

    def test_empty_objects_image_survives(self):
        dataset = Dataset(
            (ImageRecord("only", "only.png", 10, 10, ()),), ("car",), "canonical"
        )
        assert read_canonical(io.StringIO(dumps_canonical(dataset))) == dataset

    def test_serialization_deterministic(self, tiny_dataset):
        assert dumps_canonical(tiny_dataset) == dumps_canonical(tiny_dataset)

    def test_golden_bytes_frozen(self, tiny_dataset, data_dir):
        golden = (data_dir / "tiny_dataset.jsonl").read_bytes()
        assert dumps_canonical(tiny_dataset).encode("utf-8") == golden

    def test_version_mismatch(self):
        header = json.dumps({"format": "annoloop-dataset", "version": 99, "classes": [],
                             "provenance": "canonical"})
        with pytest.raises(UnsupportedVersion):
            read_canonical(io.StringIO(header + "\n"))

    def test_wrong_format_and_bad_line_numbers(self):
        with pytest.raises(ParseError):
            read_canonical(io.StringIO('{"format":"something-else","version":1}\n'))
        good = dumps_canonical(
            Dataset((ImageRecord("a", "a.jpg", 5, 5, ()),), (), "canonical")
        )
        with pytest.raises(ParseError, match="line 2"):
            read_canonical(io.StringIO(good.splitlines()[0] + "\n{broken\n"))

    @given(datasets())
    def test_round_trip_random_datasets(self, dataset):
        assert read_canonical(io.StringIO(dumps_canonical(dataset))) == dataset

    @given(datasets())
    def test_parser_style_invariants(self, dataset):
        filtered = filter_objects(dataset, {"occluded", "truncated", "group"})
        assert len(filtered.images) == len(dataset.images)
        assert filtered.total_objects <= dataset.total_objects
        for img in filtered.images:
            for obj in img.objects:
                assert not (obj.flags & {"occluded", "truncated", "group"})
