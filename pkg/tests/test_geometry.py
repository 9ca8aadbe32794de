import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from filaments.errors import InvalidInputError, OutOfRangeError
from filaments.geometry import (NormalSpace, PolylineCurve, distance_to_set, distances_to_curves,
                                distances_to_set, frenet_frame, hausdorff, normal_intersection, order_curve,
                                vertex_chains)
import filaments.geometry as geometry
from filaments.ridge import estimate_ridge
from filaments.rng import stream
from filaments.theory import axis_gaussian


def unit_circle(step_deg=0.5):
    th = np.deg2rad(np.arange(0, 360, step_deg))
    return PolylineCurve(np.column_stack([np.cos(th), np.sin(th)]), closed=True), th


class TestDistances:
    def test_member(self):
        A = np.array([[1.0, 2.0], [3.0, 4.0]])
        assert distance_to_set([3.0, 4.0], A) == 0.0

    def test_345(self):
        assert distance_to_set([0.0, 0.0], [[3.0, 4.0]]) == 5.0

    def test_brute_force(self, rng):
        A = rng.normal(size=(200, 2))
        for x in rng.normal(size=(5, 2)):
            assert distance_to_set(x, A) == pytest.approx(min(np.hypot(*(a - x)) for a in A), rel=1e-12)

    def test_tree_path_matches_brute_force(self, rng, monkeypatch):
        X = rng.normal(size=(300, 2))
        A = rng.normal(size=(400, 2))
        brute = distances_to_set(X, A)
        monkeypatch.setattr(geometry, "BRUTE_FORCE_PAIRS", 10)
        assert np.allclose(distances_to_set(X, A), brute, rtol=1e-12, atol=1e-15)

    def test_empty(self):
        with pytest.raises(InvalidInputError):
            distance_to_set([0.0, 0.0], np.empty((0, 2)))
        with pytest.raises(InvalidInputError):
            hausdorff(np.empty((0, 2)), [[0.0, 0.0]])

    def test_hausdorff_examples(self):
        A = np.array([[0.0, 0.0]])
        assert hausdorff(A, A) == 0.0
        assert hausdorff(A, [[0.0, 0.0], [0.0, 3.0]]) == 3.0

    def test_curves(self):
        c = PolylineCurve(np.array([[0.0, 0.0], [2.0, 0.0]]))
        assert np.allclose(distances_to_curves([[1.0, 1.0], [3.0, 0.0], [-1.0, 0.0]], [c]), [1, 1, 1])


pts = arrays(float, st.tuples(st.integers(1, 12), st.just(2)), elements=st.floats(-10, 10))


@settings(max_examples=60, deadline=None)
@given(pts, pts, pts)
def test_hausdorff_metric(A, B, C):
    assert hausdorff(A, A) == 0
    assert hausdorff(A, B) == hausdorff(B, A)
    assert hausdorff(A, C) <= hausdorff(A, B) + hausdorff(B, C) + 1e-12


@settings(max_examples=60, deadline=None)
@given(pts, arrays(float, (2,), elements=st.floats(-10, 10)), arrays(float, (2,), elements=st.floats(-10, 10)))
def test_distance_lipschitz(A, x, y):
    assert distance_to_set(x, np.vstack([A, x])) == 0
    assert abs(distance_to_set(x, A) - distance_to_set(y, A)) <= np.linalg.norm(x - y) + 1e-12


class TestPolyline:
    def test_closed_length(self):
        c = PolylineCurve(np.array([[0.0, 0], [1, 0], [1, 1], [0, 1]]), closed=True)
        assert c.length == 4.0
        assert c.segments.shape == (4, 2, 2)
        assert np.allclose(c.point_at(4.5), [0.5, 0])

    def test_open_out_of_range(self):
        c = PolylineCurve(np.array([[0.0, 0], [1, 0]]))
        with pytest.raises(OutOfRangeError):
            c.point_at(1.5)

    def test_repeated_vertex(self):
        with pytest.raises(InvalidInputError):
            PolylineCurve(np.array([[0.0, 0], [0, 0], [1, 0]]))


class TestOrderCurve:
    def test_circle_single_closed(self):
        th = np.deg2rad(np.arange(0, 360, 1.0))
        P = np.column_stack([np.cos(th), np.sin(th)])
        perm = np.random.default_rng(0).permutation(len(P))
        curves = order_curve(P[perm], h=0.02)
        assert len(curves) == 1 and curves[0].closed
        assert curves[0].vertices.shape[0] == 360

    def test_two_segments(self):
        t = np.linspace(0, 1, 40)
        P = np.vstack([np.column_stack([t, 0 * t]), np.column_stack([t, 0 * t + 5])])
        curves = order_curve(P, h=0.05)
        assert len(curves) == 2 and not any(c.closed for c in curves)
        assert np.array_equal(np.sort(vertex_chains(P, 0.05)), np.repeat([0, 1], 40))

    def test_vertices_are_input(self, circle_data):
        R = estimate_ridge(circle_data)
        curves = order_curve(R.points, R.h)
        V = np.vstack([c.vertices for c in curves])
        assert np.all(distances_to_set(V, R.points) == 0)

    def test_too_few(self, caplog):
        assert order_curve(np.zeros((1, 2)), 0.1) == []


class TestFrenet:
    def test_circle_frame(self):
        c, th = unit_circle()
        for s in np.linspace(0, 2 * np.pi, 13)[:-1] + 0.1:
            f = frenet_frame(c, s)
            e1, e2 = f.vectors
            assert not f.degenerate
            assert np.allclose(e1, [-np.sin(s), np.cos(s)], atol=1e-3)
            assert np.allclose(e2, [-np.cos(s), -np.sin(s)], atol=1e-3)
            assert abs(e1 @ e2) < 1e-9
            assert abs(np.linalg.norm(e1) - 1) < 1e-9 and abs(np.linalg.norm(e2) - 1) < 1e-9

    def test_segment_degenerate(self):
        t = np.linspace(0, 1, 21)
        c = PolylineCurve(np.column_stack([t, 2 * t]))
        f = frenet_frame(c, 0.5)
        assert f.degenerate and f.degenerate_from == 1
        assert np.allclose(f.vectors @ f.vectors.T, np.eye(2), atol=1e-9)

    def test_space_curve_orthonormal(self):
        t = np.linspace(0, 4, 200)
        c = PolylineCurve(np.column_stack([np.cos(t), np.sin(t), 0.3 * t]))
        f = frenet_frame(c, 2.0, k=3)
        assert np.allclose(f.vectors @ f.vectors.T, np.eye(3), atol=1e-9)


class TestNormalIntersection:
    line = PolylineCurve(np.array([[-5.0, 0.1], [5.0, 0.1]]))

    def test_axis_aligned(self):
        sp = NormalSpace(np.array([0.7, 0.0]), np.array([[0.0], [1.0]]), r_clip=1.0)
        hit = normal_intersection(sp, self.line)
        assert np.allclose(hit, [0.7, 0.1])
        assert np.linalg.norm(hit - sp.anchor) == pytest.approx(0.1)

    def test_self(self):
        c, _ = unit_circle()
        f = frenet_frame(c, 1.0)
        anchor = c.point_at(1.0)
        sp = NormalSpace.from_frame(anchor, f, 0.5)
        assert np.allclose(normal_intersection(sp, c), anchor, atol=1e-12)

    def test_short_target_misses(self):
        short = PolylineCurve(np.array([[-1.0, 0.1], [1.0, 0.1]]))
        sp = NormalSpace(np.array([1.9, 0.0]), np.array([[0.0], [1.0]]), r_clip=1.0)
        assert normal_intersection(sp, short) is None

    def test_clip(self):
        sp = NormalSpace(np.array([0.0, 0.0]), np.array([[0.0], [1.0]]), r_clip=0.05)
        assert normal_intersection(sp, self.line) is None

    def test_point_set(self):
        P = np.array([[0.0, 0.3], [0.01, 0.1], [2.0, 0.0]])
        sp = NormalSpace(np.array([0.0, 0.0]), np.array([[0.0], [1.0]]), r_clip=1.0)
        assert np.allclose(normal_intersection(sp, P, tol_band=0.02), [0.01, 0.1])

    def test_basis_validation(self):
        with pytest.raises(InvalidInputError):
            NormalSpace(np.zeros(2), np.array([[1.0], [1.0]]), 1.0)


def test_normal_hit_tracks_set_distance():
    # distance to the estimated ridge should match the normal-space offset at interior anchors
    truth = axis_gaussian()
    X = truth.sample(4000, stream(1, "test"))
    R = estimate_ridge(X)
    curves = order_curve(R.points, R.h)
    ratios = []
    for x in np.linspace(-1.5, 1.5, 31):
        sp = NormalSpace(np.array([x, 0.0]), np.array([[0.0], [1.0]]), 5 * R.h)
        hit = normal_intersection(sp, curves)
        if hit is None:
            continue
        off = np.linalg.norm(hit - sp.anchor)
        dist = distances_to_curves(sp.anchor[None], curves)[0]
        ratios.append(abs(dist - off) / off if off > 0 else 0.0)
    assert len(ratios) >= 25
    assert np.mean(np.array(ratios) < 0.2) >= 0.9
