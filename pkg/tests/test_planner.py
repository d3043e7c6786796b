import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import ndimage

from batterbot.fixtures import FIXTURES, annulus_mask, disk_mask, smiley_mask
from batterbot.planner import (
    BinaryMask,
    PGMParseError,
    PlanningError,
    ShapeMode,
    Stroke,
    Trajectory,
    build_graph,
    classify_shape,
    concentric_loops,
    douglas_peucker,
    erode,
    is_thin,
    load_pgm,
    mst_refine,
    plan_trajectory,
    read_pgm,
    save_pgm,
    skeletonize,
    to_world,
    tree_to_strokes,
)
from batterbot.planner.graph import SkeletonGraph

EIGHT = np.ones((3, 3), bool)


def n_components(px):
    return ndimage.label(px, structure=EIGHT)[1]


def random_blobs(seed, shape=(40, 48)):
    rng = np.random.default_rng(seed)
    seeds = rng.random(shape) < 0.02
    return ndimage.binary_dilation(seeds, iterations=int(rng.integers(1, 5)))


class TestPGM:
    def test_ascii_checkerboard(self):
        vals, maxval = read_pgm(b"P2 2 2 255\n0 255\n255 0\n")
        assert maxval == 255
        assert (vals >= 128).tolist() == [[False, True], [True, False]]

    def test_load_binarises(self, tmp_path):
        (tmp_path / "c.pgm").write_bytes(b"P2\n# comment\n2 2\n255\n0 255\n127 128\n")
        m = load_pgm(tmp_path / "c.pgm")
        assert m.pixels.tolist() == [[False, True], [False, True]]

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_round_trip(self, seed, tmp_path_factory):
        px = np.random.default_rng(seed).random((7, 11)) < 0.5
        path = tmp_path_factory.mktemp("pgm") / "m.pgm"
        save_pgm(BinaryMask(px), path)
        assert load_pgm(path) == BinaryMask(px)

    def test_bad_magic(self):
        with pytest.raises(PGMParseError) as exc:
            read_pgm(b"P6 2 2 255\n")
        assert exc.value.offset == 0

    def test_truncated_raster(self):
        with pytest.raises(PGMParseError, match="byte offset"):
            read_pgm(b"P5 4 4 255\n\x00\x00")


class TestClassify:
    def test_disk_is_enclosed(self):
        assert classify_shape(disk_mask(), 10) is ShapeMode.ENCLOSED

    def test_thin_curve_is_open(self):
        px = np.zeros((60, 60), bool)
        yy, xx = np.mgrid[:60, :60]
        px[np.abs(np.hypot(yy - 30, xx - 30) - 20) <= 1.5] = True
        assert classify_shape(px, 10) is ShapeMode.OPEN_LINES

    def test_single_pixel(self):
        px = np.zeros((5, 5), bool)
        px[2, 2] = True
        assert classify_shape(px, 10) is ShapeMode.OPEN_LINES

    def test_empty(self):
        with pytest.raises(PlanningError):
            classify_shape(np.zeros((5, 5), bool), 3)


class TestErode:
    def test_disk_shrinks_by_radius(self):
        out = erode(disk_mask(40), 10)
        r = np.hypot(*(np.argwhere(out.pixels) - 49.5).T)
        assert 29 <= r.max() <= 31

    def test_vanishes(self):
        assert not erode(disk_mask(40), 41).pixels.any()

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 5000), a=st.integers(1, 4), b=st.integers(1, 4))
    def test_semigroup_within_one_px(self, seed, a, b):
        m = random_blobs(seed)
        twice = erode(erode(m, a), b)
        once = erode(m, a + b)
        # erode(a + b) <= erode(erode(a), b) <= erode(a + b - 1)
        assert np.all(once <= twice)
        assert np.all(twice <= erode(m, a + b - 1))

    def test_subset(self):
        m = random_blobs(3)
        assert np.all(erode(m, 2) <= m)

    def test_radius_below_one(self):
        with pytest.raises(PlanningError):
            erode(disk_mask(), 0.5)


def point_in_polygon(pt, poly):
    x, y = pt
    inside = False
    for (x0, y0), (x1, y1) in zip(poly, np.roll(poly, -1, axis=0)):
        if (y0 > y) != (y1 > y) and x < x0 + (y - y0) * (x1 - x0) / (y1 - y0):
            inside = not inside
    return inside


class TestLoops:
    def test_disk_four_loops(self):
        loops = concentric_loops(disk_mask(40), 10)
        assert [lp.level for lp in loops] == [0, 1, 2, 3]
        radii = [np.hypot(*(lp.points - 49.5).T).mean() for lp in loops]
        np.testing.assert_allclose(radii, [35, 25, 15, 5], atol=1.0)

    def test_nested(self):
        loops = concentric_loops(disk_mask(40), 10)
        for outer, inner in zip(loops, loops[1:]):
            assert all(point_in_polygon(p, outer.points) for p in inner.points)

    def test_annulus_both_boundaries(self):
        level0 = [lp for lp in concentric_loops(annulus_mask(), 10) if lp.level == 0]
        assert sorted(lp.is_hole for lp in level0) == [False, True]

    def test_one_stroke_shape_single_loop(self):
        loops = concentric_loops(disk_mask(11, size=30), 10)
        assert len(loops) == 1

    def test_open_shape_rejected(self):
        with pytest.raises(PlanningError):
            concentric_loops(smiley_mask(), 10)

    def test_loops_inside_inset(self):
        m = disk_mask(40)
        for lp in concentric_loops(m, 10):
            r = np.hypot(*(lp.points - 49.5).T)
            assert r.max() <= 40 - 5 + 0.5


class TestSkeleton:
    def test_bar_to_line(self):
        px = np.zeros((15, 40), bool)
        px[5:10, 5:35] = True
        sk = skeletonize(px)
        rows = np.unique(np.nonzero(sk)[0])
        assert len(rows) == 1
        assert sk.sum() >= 20

    def test_thin_line_fixed_point(self):
        px = np.zeros((20, 20), bool)
        px[10, 2:18] = True
        px[3:10, 17] = True
        assert np.array_equal(skeletonize(px), px)

    def test_three_components(self):
        px = np.zeros((40, 60), bool)
        px[2:10, 2:20] = True
        px[15:35, 5:12] = True
        yy, xx = np.mgrid[:40, :60]
        px |= np.hypot(yy - 20, xx - 42) <= 9
        assert n_components(px) == 3
        assert n_components(skeletonize(px)) == 3

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_properties(self, seed):
        m = random_blobs(seed)
        sk = skeletonize(m)
        assert np.all(sk <= m)
        assert is_thin(sk)
        assert n_components(sk) == n_components(m)
        assert np.array_equal(skeletonize(sk), sk)


def ring_skeleton(radius=15):
    yy, xx = np.mgrid[:41, :41]
    return skeletonize(np.abs(np.hypot(yy - 20, xx - 20) - radius) < 0.5)


def y_skeleton():
    px = np.zeros((30, 30), bool)
    px[15, 2:16] = True
    for k in range(12):
        px[15 - k, 15 + k] = True
        px[15 + k, 15 + k] = True
    return px


class TestGraph:
    def test_ring_loses_one_edge(self):
        g = build_graph(ring_skeleton())
        assert not g.is_forest()
        t = mst_refine(g)
        assert len(t.edges) == len(t.nodes) - 1
        assert t.is_forest()

    def test_tree_unchanged(self):
        g = build_graph(y_skeleton())
        assert g.is_forest()
        assert mst_refine(g).edges == g.edges

    def test_weight_bound(self):
        g = build_graph(ring_skeleton())
        assert mst_refine(g).total_weight < g.total_weight
        tree = build_graph(y_skeleton())
        assert mst_refine(tree).total_weight == tree.total_weight

    def test_no_self_loops_or_duplicates(self):
        g = build_graph(random_blobs(5))
        pairs = [(i, j) for i, j, _ in g.edges]
        assert all(i < j for i, j in pairs)
        assert len(set(pairs)) == len(pairs)
        assert {w for _, _, w in g.edges} <= {1.0, math.sqrt(2)}

    def test_empty(self):
        with pytest.raises(PlanningError):
            mst_refine(build_graph(np.zeros((4, 4), bool)))

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_spanning_forest(self, seed):
        g = build_graph(skeletonize(random_blobs(seed)))
        if not g.nodes:
            return
        t = mst_refine(g)
        assert t.is_forest()
        assert len(t.edges) == len(t.nodes) - len(g.components())
        assert mst_refine(g) == t


def edge_multiset(strokes, tree):
    index = {tuple(rc): k for k, rc in enumerate(tree.nodes)}
    out = []
    for s in strokes:
        ids = [index[(int(y), int(x))] for x, y in s]
        out += [tuple(sorted(p)) for p in zip(ids, ids[1:])]
    return sorted(out)


class TestStrokes:
    def test_path_single_stroke(self):
        px = np.zeros((5, 12), bool)
        px[2, 1:11] = True
        strokes = tree_to_strokes(mst_refine(build_graph(px)))
        assert len(strokes) == 1
        assert len(strokes[0]) == 10

    def test_y_two_strokes(self):
        tree = mst_refine(build_graph(y_skeleton()))
        strokes = tree_to_strokes(tree)
        assert len(strokes) == 2
        # the longest pair of limbs: both diagonals, 2 * 11 * sqrt(2) ~ 31.1
        first = strokes[0]
        assert np.hypot(*np.diff(first, axis=0).T).sum() == pytest.approx(22 * math.sqrt(2))

    def test_every_edge_once(self):
        tree = mst_refine(build_graph(skeletonize(smiley_mask().pixels)))
        strokes = tree_to_strokes(tree)
        assert edge_multiset(strokes, tree) == sorted((i, j) for i, j, _ in tree.edges)

    def test_isolated_pixels_kept(self):
        px = np.zeros((9, 9), bool)
        px[2, 2] = px[6, 1:8] = True
        strokes = tree_to_strokes(mst_refine(build_graph(px)))
        assert len(strokes) == 2
        assert np.array_equal(strokes[1], [[2.0, 2.0]])

    def test_every_component_planned(self):
        mask = smiley_mask()
        traj = plan_trajectory(mask, 0.01, mode="open")
        assert len(traj) == 4

    def test_cycle_rejected(self):
        with pytest.raises(PlanningError):
            tree_to_strokes(build_graph(ring_skeleton()))


class TestWorld:
    def test_affine(self):
        traj = to_world([(np.array([[10.0, 20.0], [11.0, 20.0]]), False)], 0.001)
        assert np.allclose(traj.strokes[0].points[0], (0.010, 0.020))

    def test_collinear_collapses(self):
        pts = np.column_stack([np.arange(10.0), 2 * np.arange(10.0)])
        assert len(douglas_peucker(pts, 0.5)) == 2

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_hausdorff_bound(self, seed):
        rng = np.random.default_rng(seed)
        pts = np.cumsum(rng.integers(-1, 2, size=(40, 2)), axis=0).astype(float)
        simp = douglas_peucker(pts, 0.5)

        def seg_dist(p, a, b):
            d = b - a
            t = 0.0 if not d.any() else np.clip((p - a) @ d / (d @ d), 0, 1)
            return np.hypot(*(p - a - t * d))

        worst = max(min(seg_dist(p, a, b) for a, b in zip(simp, simp[1:])) for p in pts)
        assert worst <= 0.5 + 1e-12

    def test_stroke_invariants(self):
        with pytest.raises(PlanningError):
            Stroke([[0, 0]])
        with pytest.raises(PlanningError):
            Stroke([[0, 0], [0, 0], [1, 1]])

    def test_json_round_trip(self, tmp_path):
        traj = plan_trajectory(disk_mask(), 0.01)
        traj.save(tmp_path / "t.json")
        back = Trajectory.load(tmp_path / "t.json")
        assert len(back) == len(traj)
        for a, b in zip(traj.strokes, back.strokes):
            assert a.closed == b.closed
            assert np.array_equal(a.points, b.points)
        assert traj.to_svg().startswith("<svg")

    @pytest.mark.parametrize("name", sorted(FIXTURES))
    def test_strokes_within_dilated_mask(self, name):
        m = FIXTURES[name]()
        traj = plan_trajectory(m, 0.01)
        dist = ndimage.distance_transform_edt(~m.pixels)
        for s in traj.strokes:
            assert len(s.points) >= 2
            for a, b in zip(s.path()[:-1], s.path()[1:]):
                for t in np.linspace(0, 1, 9):
                    x, y = (a + t * (b - a)) / m.scale
                    r, c = int(round(y)), int(round(x))
                    assert dist[r, c] <= 5 + 1.5

    def test_deterministic(self):
        a = plan_trajectory(smiley_mask(), 0.01).to_json()
        b = plan_trajectory(smiley_mask(), 0.01).to_json()
        assert a == b
