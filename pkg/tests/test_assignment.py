import math

import numpy as np
import pytest

from polarview.assignment import (
    Assignment,
    CircularRange,
    RectangularRange,
    box_cost,
    brute_force_assign,
    build_cost_matrix,
    class_cost,
    filter_perception_range,
    hungarian,
    range_ambiguity_fixture,
    scaling_ambiguity_fixture,
)
from polarview.geometry import CartesianBox, PolarBox


def polar(r, azimuth):
    return PolarBox(
        r=r, sin_a=math.sin(azimuth), cos_a=math.cos(azimuth),
        z=0.0, l=4.0, w=2.0, h=1.5, sin_t=0.0, cos_t=1.0,
    )


class TestBoxCost:
    def test_identical_boxes_cost_zero(self):
        b = polar(10.0, 0.3)
        assert box_cost(b, b, 20.0) == 0.0

    def test_hand_evaluation(self):
        # pred r=10 at azimuth 0; gt r=12 with sin=0.1 (cos = sqrt(0.99))
        pred = polar(10.0, 0.0)
        gt = PolarBox(
            r=12.0, sin_a=0.1, cos_a=math.sqrt(0.99),
            z=0.0, l=4.0, w=2.0, h=1.5, sin_t=0.0, cos_t=1.0,
        )
        expected = 2.0 + 20.0 * (0.1 + (1.0 - math.sqrt(0.99)))
        assert box_cost(pred, gt, 20.0) == pytest.approx(expected, abs=1e-12)
        assert box_cost(pred, gt, 20.0) == pytest.approx(4.100, abs=1e-3)

    def test_linear_in_k_scaling(self):
        pred = polar(10.0, 0.0)
        gt = polar(12.0, 0.2)
        azimuth_l1 = abs(pred.sin_a - gt.sin_a) + abs(pred.cos_a - gt.cos_a)
        c1 = box_cost(pred, gt, 1.0)
        c20 = box_cost(pred, gt, 20.0)
        assert c20 - c1 == pytest.approx(19.0 * azimuth_l1, abs=1e-12)
        assert c1 - azimuth_l1 == pytest.approx(2.0)  # radial term unchanged

    def test_pseudometric_properties(self):
        rng = np.random.default_rng(31)
        boxes = [polar(rng.uniform(1, 49), rng.uniform(-math.pi, math.pi)) for _ in range(20)]
        for a in boxes:
            assert box_cost(a, a, 20.0) == 0.0
        for a in boxes[:8]:
            for b in boxes[8:16]:
                assert box_cost(a, b, 20.0) == pytest.approx(box_cost(b, a, 20.0))
                for c in boxes[16:]:
                    assert (
                        box_cost(a, c, 20.0)
                        <= box_cost(a, b, 20.0) + box_cost(b, c, 20.0) + 1e-12
                    )


class TestClassCost:
    def test_perfect_confidence(self):
        assert class_cost(np.array([1.0, 0.0]), 0) == -1.0

    def test_zero_confidence(self):
        assert class_cost(np.array([0.0, 1.0]), 0) == 0.0

    def test_uniform_ten_classes(self):
        assert class_cost(np.full(10, 0.1), 3) == pytest.approx(-0.1)

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            class_cost(np.array([1.5, 0.0]), 0)

    def test_focal_form_prefers_confident_correct(self):
        confident = class_cost(np.array([0.9, 0.1]), 0, form="focal")
        unsure = class_cost(np.array([0.2, 0.8]), 0, form="focal")
        assert confident < unsure


class TestPerceptionRange:
    def test_corner_case_circular_drops_rectangular_keeps(self):
        box = CartesianBox(40.0, 40.0, 0.0, 1, 1, 1, 0.0)
        kept_c, dropped_c = filter_perception_range([box], CircularRange(50.0))
        kept_r, dropped_r = filter_perception_range([box], RectangularRange(50.0, 50.0))
        assert dropped_c == [box]  # r ~ 56.6 > 50
        assert kept_r == [box]

    def test_origin_kept_by_both(self):
        box = CartesianBox(0.0, 0.0, 0.0, 1, 1, 1, 0.0)
        assert filter_perception_range([box], CircularRange(50.0))[0] == [box]
        assert filter_perception_range([box], RectangularRange(50.0, 50.0))[0] == [box]

    def test_circular_boundary_inclusive_rectangular_strict(self):
        on_circle = CartesianBox(50.0, 0.0, 0.0, 1, 1, 1, 0.0)
        assert filter_perception_range([on_circle], CircularRange(50.0))[0] == [on_circle]
        on_edge = CartesianBox(50.0, 0.0, 0.0, 1, 1, 1, 0.0)
        assert filter_perception_range([on_edge], RectangularRange(50.0, 50.0))[1] == [on_edge]

    def test_equal_radius_ambiguity_fixture(self):
        objects, circular, rectangular = range_ambiguity_fixture()
        radii = [math.hypot(b.x, b.y) for b in objects]
        assert radii[0] == pytest.approx(radii[1], abs=1e-9)  # equal radial distance
        kept_c, dropped_c = filter_perception_range(objects, circular)
        kept_r, dropped_r = filter_perception_range(objects, rectangular)
        assert len(kept_c) == 2 and not dropped_c  # circular keeps both
        assert len(kept_r) == 1 and len(dropped_r) == 1  # rectangle splits the pair
        assert dropped_r[0] is objects[0]  # the axial object falls outside |x| < 35


class TestCostMatrix:
    def test_single_perfect_pair(self):
        box = polar(10.0, 0.2)
        costs = build_cost_matrix([(box, np.array([1.0]))], [(box, 0)], 20.0)
        assert costs.shape == (1, 1)
        assert costs[0, 0] == -1.0

    def test_empty_gts_give_empty_matrix(self):
        box = polar(10.0, 0.2)
        costs = build_cost_matrix([(box, np.array([1.0]))], [], 20.0)
        assert costs.shape == (0, 1)
        assert len(hungarian(costs)) == 0

    def test_entries_match_independent_recomputation(self):
        rng = np.random.default_rng(33)
        preds = []
        gts = []
        for _ in range(3):
            probs = rng.dirichlet(np.ones(4))
            preds.append((polar(rng.uniform(1, 49), rng.uniform(-math.pi, math.pi)), probs))
            gts.append((polar(rng.uniform(1, 49), rng.uniform(-math.pi, math.pi)), int(rng.integers(0, 4))))
        costs = build_cost_matrix(preds, gts, 20.0)
        for j, (gt_box, gt_label) in enumerate(gts):
            for i, (pred_box, probs) in enumerate(preds):
                expected = -probs[gt_label] + box_cost(pred_box, gt_box, 20.0)
                assert costs[j, i] == pytest.approx(expected, rel=1e-14)


class TestHungarian:
    def test_two_by_two(self):
        costs = np.array([[1.0, 2.0], [3.0, 1.0]])
        result = hungarian(costs)
        assert set(result.pairs) == {(0, 0), (1, 1)}
        assert result.total_cost(costs) == 2.0

    def test_diagonal_dominant_prefers_identity(self):
        costs = np.full((4, 4), 10.0) - 9.0 * np.eye(4)
        assert set(hungarian(costs).pairs) == {(i, i) for i in range(4)}

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            hungarian(np.array([[1.0, math.inf], [0.0, 1.0]]))

    def test_matches_brute_force_on_random_matrices(self):
        rng = np.random.default_rng(35)
        for _ in range(500):
            m, n = rng.integers(1, 6, size=2)
            costs = rng.uniform(-5, 5, size=(m, n))
            h = hungarian(costs)
            b = brute_force_assign(costs)
            assert len(h) == min(m, n)
            assert h.total_cost(costs) == b.total_cost(costs)

    def test_rectangular_sizes(self):
        rng = np.random.default_rng(36)
        for m, n in [(2, 7), (7, 2), (1, 9), (5, 3)]:
            costs = rng.uniform(0, 10, size=(m, n))
            h = hungarian(costs)
            assert len(h) == min(m, n)
            assert h.total_cost(costs) == brute_force_assign(costs).total_cost(costs)

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(37)
        costs = rng.uniform(0, 1, size=(4, 4))
        perm = rng.permutation(4)
        base = hungarian(costs)
        permuted = hungarian(costs[:, perm])
        mapped = {(j, int(perm[i])) for j, i in permuted.pairs}
        assert base.total_cost(costs) == pytest.approx(
            sum(costs[j, i] for j, i in mapped), abs=1e-12
        )


class TestBruteForce:
    def test_one_by_one(self):
        assert brute_force_assign(np.array([[3.0]])).pairs == ((0, 0),)

    def test_two_by_two_enumeration(self):
        result = brute_force_assign(np.array([[1.0, 2.0], [3.0, 1.0]]))
        assert result.total_cost(np.array([[1.0, 2.0], [3.0, 1.0]])) == 2.0

    def test_six_by_six_agrees_with_hungarian(self):
        rng = np.random.default_rng(38)
        costs = rng.uniform(0, 1, size=(6, 6))
        assert brute_force_assign(costs).total_cost(costs) == hungarian(costs).total_cost(costs)

    def test_oracle_size_limit(self):
        with pytest.raises(ValueError):
            brute_force_assign(np.zeros((9, 9)))


class TestScalingFixture:
    def test_flip_verified_by_brute_force(self):
        gts, preds = scaling_ambiguity_fixture()
        azimuth_near = {(0, 0), (1, 1)}  # prediction i sits at gt i's azimuth

        low = build_cost_matrix(preds, gts, 1.0)
        low_best = brute_force_assign(low)
        assert set(low_best.pairs) != azimuth_near  # radial term wins, tangentially wrong
        assert set(hungarian(low).pairs) == set(low_best.pairs)

        high = build_cost_matrix(preds, gts, 20.0)
        high_best = brute_force_assign(high)
        assert set(high_best.pairs) == azimuth_near
        assert set(hungarian(high).pairs) == azimuth_near

    def test_fixture_geometry(self):
        gts, preds = scaling_ambiguity_fixture()
        # each prediction is 1 m off its azimuth-near gt radially
        assert abs(preds[0][0].r - gts[0][0].r) == 1.0
        assert abs(preds[1][0].r - gts[1][0].r) == 1.0
        # 10 degrees apart in azimuth
        da = math.degrees(gts[1][0].azimuth() - gts[0][0].azimuth())
        assert da == pytest.approx(10.0)


class TestAssignmentType:
    def test_rejects_repeated_indices(self):
        with pytest.raises(ValueError):
            Assignment(((0, 0), (0, 1)))
        with pytest.raises(ValueError):
            Assignment(((0, 1), (1, 1)))

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            Assignment(((-1, 0),))
