import pytest
from hypothesis import given, settings, strategies as st

from annoloop.dataset_io import GroundTruthObject
from annoloop.geometry import BoundingBox
from annoloop.matching import (
    Detection,
    MatchResult,
    UnknownImage,
    apply_confidence_threshold,
    match_batch,
    match_image,
    precision,
    recall,
)
from annoloop.rng import SplitMix64

from instances import random_instance
from oracles import greedy_counts, maximum_matching_tp


def gt(label, x0, y0, x1, y1):
    return GroundTruthObject(label, BoundingBox(x0, y0, x1, y1))


def det(label, x0, y0, x1, y1, conf=0.9, image="img"):
    return Detection(image, label, BoundingBox(x0, y0, x1, y1), conf)


class TestMatchImage:
    def test_identical_box_is_tp(self):
        result = match_image([gt("a", 0, 0, 10, 10)], [det("a", 0, 0, 10, 10)], 0.5)
        assert (result.true_positives, result.false_positives, result.false_negatives) == (1, 0, 0)
        assert result.pairs[0].iou == 1.0

    def test_partial_overlap_below_threshold_costs_removal_and_addition(self):
        # IoU 1/7 < 0.5: the box is deleted and the true one drawn anew
        result = match_image([gt("a", 0, 0, 2, 2)], [det("a", 1, 1, 3, 3)], 0.5)
        assert (result.true_positives, result.false_positives, result.false_negatives) == (0, 1, 1)

    def test_detection_overlapping_two_gts_claims_higher_iou(self):
        # two overlapping ground-truth boxes, one detection covering both
        truth = [gt("a", 0, 0, 10, 10), gt("a", 0, 0, 12, 10)]
        proposal = [det("a", 0, 0, 11, 10)]
        result = match_image(truth, proposal, 0.5)
        assert (result.true_positives, result.false_negatives, result.false_positives) == (1, 1, 0)
        # oracle: enumerate both assignments, the higher-IoU one is gt index 1
        assert result.pairs[0].ground_truth_index == 1

    def test_confidence_order_decides_contested_claim(self):
        truth = [gt("a", 0, 0, 10, 10)]
        contenders = [
            det("a", 0, 0, 10, 9, conf=0.3),
            det("a", 0, 0, 10, 10, conf=0.8),
        ]
        result = match_image(truth, contenders, 0.5)
        assert result.pairs[0].detection_index == 1

    def test_equal_confidence_ties_break_by_input_order(self):
        truth = [gt("a", 0, 0, 10, 10)]
        contenders = [det("a", 0, 0, 10, 9, conf=0.5), det("a", 0, 0, 10, 10, conf=0.5)]
        result = match_image(truth, contenders, 0.5)
        assert result.pairs[0].detection_index == 0

    def test_wrong_label_over_correct_box_is_fp_plus_fn(self):
        result = match_image([gt("a", 0, 0, 10, 10)], [det("b", 0, 0, 10, 10)], 0.5)
        assert (result.true_positives, result.false_positives, result.false_negatives) == (0, 1, 1)
        assert result.relabels == 0

    def test_class_agnostic_matching_ignores_labels(self):
        result = match_image(
            [gt("a", 0, 0, 10, 10)], [det("b", 0, 0, 10, 10)], 0.5, class_aware=False
        )
        assert result.true_positives == 1

    def test_single_edit_relabel_mode(self):
        result = match_image(
            [gt("a", 0, 0, 10, 10)], [det("b", 0, 0, 10, 10)], 0.5, relabel_cost="one"
        )
        assert result.relabels == 1
        assert (result.true_positives, result.false_positives, result.false_negatives) == (0, 0, 0)
        assert result.relabel_pairs[0].ground_truth_index == 0
        assert result.num_ground_truth == 1
        assert result.num_detections == 1

    def test_relabel_mode_never_consumes_threshold_failures(self):
        result = match_image(
            [gt("a", 0, 0, 2, 2)], [det("b", 1, 1, 3, 3)], 0.5, relabel_cost="one"
        )
        assert result.relabels == 0
        assert result.false_positives == 1 and result.false_negatives == 1

    def test_iou_exactly_at_threshold_matches(self):
        # IoU is exactly 0.5: boxes (0,0,2,1) and (0,0,1,1) -> 1/2
        result = match_image([gt("a", 0, 0, 2, 1)], [det("a", 0, 0, 1, 1)], 0.5)
        assert result.true_positives == 1


class TestMatchBatch:
    def test_additivity_over_images(self):
        batch_gt = {"x": [gt("a", 0, 0, 10, 10)], "y": [gt("a", 5, 5, 20, 20)]}
        batch_det = {
            "x": [det("a", 0, 0, 10, 10, image="x")],
            "y": [det("a", 5, 5, 20, 20, image="y")],
        }
        result = match_batch(batch_gt, batch_det, 0.5)
        assert result.true_positives == 2
        assert {p.image_id for p in result.pairs} == {"x", "y"}

    def test_null_detector(self):
        batch_gt = {"x": [gt("a", 0, 0, 10, 10)], "y": [gt("a", 5, 5, 20, 20)]}
        result = match_batch(batch_gt, {}, 0.5)
        assert (result.true_positives, result.false_positives, result.false_negatives) == (0, 0, 2)

    def test_unknown_image_rejected(self):
        with pytest.raises(UnknownImage):
            match_batch({"x": []}, {"ghost": [det("a", 0, 0, 1, 1, image="ghost")]}, 0.5)

    def test_batch_equals_sum_of_per_image_results(self):
        rng = SplitMix64(314)
        for _ in range(25):
            batch_gt, batch_det = {}, {}
            for i in range(5):
                g, d = random_instance(rng, image_id=f"im{i}")
                batch_gt[f"im{i}"] = g
                batch_det[f"im{i}"] = d
            combined = match_batch(batch_gt, batch_det, 0.5)
            per_image = [match_image(batch_gt[k], batch_det[k], 0.5) for k in batch_gt]
            assert combined.true_positives == sum(r.true_positives for r in per_image)
            assert combined.false_positives == sum(r.false_positives for r in per_image)
            assert combined.false_negatives == sum(r.false_negatives for r in per_image)


class TestPrecisionRecall:
    def test_plain_ratios(self):
        m = MatchResult(8, 2, 2)
        assert precision(m) == pytest.approx(0.8)
        assert recall(m) == pytest.approx(0.8)

    def test_vacuous_cases_are_one(self):
        m = MatchResult(0, 0, 0)
        assert precision(m) == 1.0
        assert recall(m) == 1.0

    def test_all_wrong(self):
        m = MatchResult(0, 3, 5)
        assert precision(m) == 0.0
        assert recall(m) == 0.0


class TestAgainstOracles:
    def test_counts_match_straight_line_greedy(self):
        rng = SplitMix64(2718)
        for _ in range(300):
            truth, proposals = random_instance(rng)
            for threshold in (0.3, 0.5, 0.8):
                result = match_image(truth, proposals, threshold)
                assert (
                    result.true_positives,
                    result.false_positives,
                    result.false_negatives,
                ) == greedy_counts(truth, proposals, threshold, class_aware=True)

    def test_greedy_tp_within_one_of_maximum_matching(self):
        rng = SplitMix64(1618)
        for _ in range(500):
            truth, proposals = random_instance(rng, max_gt=6, max_det=6)
            result = match_image(truth, proposals, 0.5)
            optimum = maximum_matching_tp(truth, proposals, 0.5, class_aware=True)
            assert optimum - 1 <= result.true_positives <= optimum

    def test_mutual_exclusion_and_threshold(self):
        rng = SplitMix64(99)
        for _ in range(200):
            truth, proposals = random_instance(rng)
            result = match_image(truth, proposals, 0.5)
            det_indices = [p.detection_index for p in result.pairs]
            gt_indices = [p.ground_truth_index for p in result.pairs]
            assert len(set(det_indices)) == len(det_indices)
            assert len(set(gt_indices)) == len(gt_indices)
            assert all(p.iou >= 0.5 for p in result.pairs)
            assert result.true_positives == len(result.pairs)
            assert result.false_positives == len(proposals) - result.true_positives
            assert result.false_negatives == len(truth) - result.true_positives

    def test_raising_threshold_never_increases_tp(self):
        rng = SplitMix64(424242)
        thresholds = (0.2, 0.35, 0.5, 0.65, 0.8, 0.95)
        for _ in range(300):
            truth, proposals = random_instance(rng)
            tps = [match_image(truth, proposals, t).true_positives for t in thresholds]
            assert all(a >= b for a, b in zip(tps, tps[1:]))


def test_apply_confidence_threshold():
    proposals = [det("a", 0, 0, 1, 1, conf=c) for c in (0.2, 0.5, 0.9)]
    kept = apply_confidence_threshold(proposals, 0.5)
    assert [d.confidence for d in kept] == [0.5, 0.9]


@given(st.integers(0, 2**32))
@settings(max_examples=40, deadline=None)
def test_properties_on_arbitrary_seeds(seed):
    rng = SplitMix64(seed)
    truth, proposals = random_instance(rng)
    result = match_image(truth, proposals, 0.5)
    assert result.true_positives <= min(len(truth), len(proposals))
    assert 0.0 <= precision(result) <= 1.0
    assert 0.0 <= recall(result) <= 1.0
