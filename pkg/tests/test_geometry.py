import math

import numpy as np
import pytest

from safeweave.geometry import OrientedBox, Pose2, obb_signed_distance, rotate, wrap_angle

from oracles import box_distance_oracle, boxes_overlap_oracle


def random_box(rng, span=4.0):
    return OrientedBox(
        cx=rng.uniform(-span, span),
        cy=rng.uniform(-span, span),
        heading=rng.uniform(-math.pi, math.pi),
        length=rng.uniform(0.5, 5.0),
        width=rng.uniform(0.3, 2.5),
    )


class TestWrapAngle:
    def test_half_open_interval(self):
        assert wrap_angle(math.pi) == pytest.approx(math.pi)
        assert wrap_angle(-math.pi) == pytest.approx(math.pi)
        assert wrap_angle(0.0) == 0.0
        assert wrap_angle(3 * math.pi / 2) == pytest.approx(-math.pi / 2)

    def test_idempotent(self):
        rng = np.random.default_rng(0)
        for theta in rng.uniform(-20, 20, size=200):
            w = wrap_angle(theta)
            assert -math.pi < w <= math.pi
            assert wrap_angle(w) == pytest.approx(w, abs=1e-15)
            # same angle modulo 2*pi
            assert math.isclose(math.cos(w), math.cos(theta), abs_tol=1e-12)
            assert math.isclose(math.sin(w), math.sin(theta), abs_tol=1e-12)


class TestRotate:
    def test_identity(self):
        assert np.allclose(rotate(0.0, (3.0, -2.0)), (3.0, -2.0))

    def test_quarter_turn(self):
        assert np.allclose(rotate(math.pi / 2, (1.0, 0.0)), (0.0, 1.0), atol=1e-15)

    def test_matches_matrix_product(self):
        theta, v = 0.7, np.array([1.3, -0.4])
        c, s = math.cos(theta), math.sin(theta)
        expected = np.array([[c, -s], [s, c]]) @ v
        assert np.allclose(rotate(theta, v), expected, atol=1e-15)

    def test_norm_preserving(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            theta = rng.uniform(-10, 10)
            v = rng.normal(size=2)
            assert np.linalg.norm(rotate(theta, v)) == pytest.approx(np.linalg.norm(v))


class TestPose2:
    def test_normalizes_heading(self):
        p = Pose2(1.0, 2.0, 3 * math.pi)
        assert p.psi == pytest.approx(math.pi)


class TestSignedDistance:
    def test_axis_aligned_gap(self):
        a = OrientedBox(0, 0, 0, 1, 1)
        b = OrientedBox(3, 0, 0, 1, 1)
        assert obb_signed_distance(a, b) == pytest.approx(2.0)

    def test_coincident_boxes(self):
        a = OrientedBox(0, 0, 0, 4.8, 1.8)
        assert obb_signed_distance(a, a) == pytest.approx(-1.8)

    def test_rotated_pair_matches_sampling_oracle(self):
        a = OrientedBox(0, 0, 0, 4.8, 1.8)
        b = OrientedBox(3.0, 1.0, 0.3, 4.8, 1.8)
        expected = box_distance_oracle(a, b)
        assert obb_signed_distance(a, b) == pytest.approx(expected, abs=1.5e-3)

    def test_disjoint_rotated_pair_matches_sampling_oracle(self):
        a = OrientedBox(0, 0, 0.2, 4.8, 1.8)
        b = OrientedBox(6.0, 2.0, -0.9, 4.8, 1.8)
        expected = box_distance_oracle(a, b)
        assert obb_signed_distance(a, b) == pytest.approx(expected, abs=1.5e-3)

    def test_symmetry(self):
        rng = np.random.default_rng(2)
        for _ in range(300):
            a, b = random_box(rng), random_box(rng)
            assert obb_signed_distance(a, b) == pytest.approx(
                obb_signed_distance(b, a), abs=1e-12
            )

    def test_rigid_motion_invariance(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            a, b = random_box(rng), random_box(rng)
            d0 = obb_signed_distance(a, b)
            theta = rng.uniform(-math.pi, math.pi)
            tx, ty = rng.uniform(-10, 10, size=2)
            c, s = math.cos(theta), math.sin(theta)

            def moved(box):
                x = c * box.cx - s * box.cy + tx
                y = s * box.cx + c * box.cy + ty
                return OrientedBox(x, y, box.heading + theta, box.length, box.width)

            assert obb_signed_distance(moved(a), moved(b)) == pytest.approx(d0, abs=1e-9)

    def test_sign_agrees_with_overlap_oracle(self):
        rng = np.random.default_rng(4)
        for _ in range(1000):
            a, b = random_box(rng), random_box(rng)
            d = obb_signed_distance(a, b)
            if abs(d) < 1e-9:
                continue  # grazing contact: sign is ill-conditioned
            assert (d < 0) == boxes_overlap_oracle(a, b)

    def test_lipschitz_in_center_coordinates(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            a, b = random_box(rng), random_box(rng)
            d0 = obb_signed_distance(a, b)
            for axis in (0, 1):
                step = rng.uniform(-0.5, 0.5)
                if axis == 0:
                    b2 = OrientedBox(b.cx + step, b.cy, b.heading, b.length, b.width)
                else:
                    b2 = OrientedBox(b.cx, b.cy + step, b.heading, b.length, b.width)
                assert abs(obb_signed_distance(a, b2) - d0) <= abs(step) + 1e-9

    def test_continuity_across_contact(self):
        a = OrientedBox(0, 0, 0, 2, 1)
        offsets = np.linspace(1.4, 1.6, 41)  # crosses contact at 1.5
        vals = [obb_signed_distance(a, OrientedBox(x, 0.2, 0.1, 1, 1)) for x in offsets]
        diffs = np.abs(np.diff(vals))
        assert diffs.max() < 2.5 * (offsets[1] - offsets[0])

    def test_rejects_bad_dimensions(self):
        with pytest.raises(ValueError):
            OrientedBox(0, 0, 0, -1.0, 1.0)
