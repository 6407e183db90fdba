from fractions import Fraction

import pytest

from fbcwalls.cutting import (
    CuttingConfig,
    CuttingError,
    LevelTrace,
    crossing_parity,
    cut_check,
    deviation_classify,
    dual_cube_complex,
    lifted_augmentation,
    path_from_vertices,
    path_vertices,
    push_crop,
    seed_across_wall,
    side_assignment,
)
from fbcwalls.strata import analyze_strata, compute_maximal_filtration, edge_weights
from fbcwalls.torus import build_ball

from conftest import rose_map

F = Fraction


@pytest.fixture(scope="module")
def golden():
    return rose_map({"a": "b", "b": "ab"}, {"a": "bA", "b": "a"})


@pytest.fixture(scope="module")
def ball6(golden):
    filt = compute_maximal_filtration(golden)
    weights = edge_weights(analyze_strata(golden, filt))
    return build_ball(golden, weights, 6.0)


class PredicateTrace:
    """A synthetic wall given as the coboundary of a vertex predicate; crossing
    parities are consistent by construction."""

    def __init__(self, ball, predicate, offset=F(1, 3)):
        self.crossings_v = {}
        self.crossings_h = {}
        for vid, cell in ball.vertical.items():
            if predicate(cell.src) != predicate(cell.dst):
                self.crossings_v[vid] = [(offset, 0)]
        for hid, cell in ball.horizontal.items():
            if predicate(cell.lower) != predicate(cell.upper):
                self.crossings_h[hid] = [(offset, 0)]


class TestCrossingParity:
    def test_disjoint(self, ball6):
        trace = LevelTrace(ball6, 0)
        path = (ball6.base_label, (("v", ("@0", "a"), +1),))
        assert crossing_parity(ball6, trace, path) == (0, 0)

    def test_single_horizontal_crossing(self, ball6):
        trace = LevelTrace(ball6, 0)
        path = path_from_vertices(ball6, ["@0", "@1"])
        assert crossing_parity(ball6, trace, path) == (1, 1)

    def test_single_vertical_record_is_odd(self, ball6):
        class OneRecord:
            crossings_v = {("@0", "a"): [(F(1, 2), 0)]}
            crossings_h = {}

        path = (ball6.base_label, (("v", ("@0", "a"), +1),))
        assert crossing_parity(ball6, OneRecord(), path) == (1, 1)

    def test_round_trip_even(self, ball6):
        trace = LevelTrace(ball6, 0)
        path = path_from_vertices(ball6, ["@0", "@1", "@0"])
        assert crossing_parity(ball6, trace, path) == (2, 0)


class TestSideAssignment:
    def test_level_trace_two_classes_seeded(self, ball6):
        trace = LevelTrace(ball6, 0)
        sides = side_assignment(ball6, trace, seeds=("@0", "@1"), core_radius=5.0)
        assert sides.ok and sides.classes == 2
        assert sides.side["@0"] != sides.side["@1"]
        assert sides.side["@-1"] == sides.side["@0"]

    def test_global_mode_reports_rim_classes(self, ball6):
        # vertices at the metric rim reachable only across the wall stay
        # marooned, so the global count exceeds two and is reported as such
        trace = LevelTrace(ball6, 0)
        sides = side_assignment(ball6, trace)
        assert sides.classes >= 2
        assert sides.consistent

    def test_seed_helper_finds_odd_cell(self, ball6):
        trace = LevelTrace(ball6, 0)
        x, y = seed_across_wall(ball6, trace)
        assert {ball6.vertices[x].height, ball6.vertices[y].height} == {0, 1}

    def test_canonical_left_label(self, ball6):
        trace = LevelTrace(ball6, 0)
        sides = side_assignment(ball6, trace, seeds=("@1", "@0"), core_radius=5.0)
        least = min(sides.side, key=lambda l: (ball6.vertices[l].height, l))
        assert sides.side[least] == 0

    def test_parity_matches_side_flip(self, ball6, golden):
        from fbcwalls.torus import geodesic_in_ball
        import random

        trace = LevelTrace(ball6, 0)
        sides = side_assignment(ball6, trace, seeds=("@0", "@1"), core_radius=5.0)
        rng = random.Random(3)
        labels = [
            l
            for l in ball6.ordered_labels()
            if ball6.vertices[l].dist <= 2.0 and l in sides.side
        ]
        for _ in range(40):
            x, y = rng.sample(labels, 2)
            vpath, _ = geodesic_in_ball(ball6, x, y)
            _, parity = crossing_parity(ball6, trace, path_from_vertices(ball6, vpath))
            assert (parity == 1) == (sides.side[x] != sides.side[y])

    def test_sphere_trace_two_classes(self, ball6):
        trace = PredicateTrace(ball6, lambda l: ball6.vertices[l].dist <= 2.0)
        sides = side_assignment(
            ball6, trace, seeds=seed_across_wall(ball6, trace), core_radius=5.0
        )
        assert sides.ok and sides.classes == 2


class TestCutCheck:
    def test_same_point_not_cut(self, ball6):
        trace = LevelTrace(ball6, 0)
        sides = side_assignment(ball6, trace, seeds=("@0", "@1"), core_radius=5.0)
        assert cut_check(ball6, trace, "@0", "@0", sides) is False

    def test_across_level(self, ball6):
        trace = LevelTrace(ball6, 0)
        sides = side_assignment(ball6, trace, seeds=("@0", "@1"), core_radius=5.0)
        assert cut_check(ball6, trace, "@0", "@2", sides) is True
        assert cut_check(ball6, trace, "@1", "@2", sides) is False

    def test_requires_two_classes(self, ball6):
        class NoWall:
            crossings_v = {}
            crossings_h = {}

        with pytest.raises(CuttingError, match="does not separate"):
            cut_check(ball6, NoWall(), "@0", "@1")


class TestPushCrop:
    def test_depth_zero_identity(self, ball6):
        path = path_from_vertices(ball6, ["@0", "a@0", "ab@0"])
        assert push_crop(ball6, path, 0) == path

    def test_forward_path_translates(self, ball6):
        path = path_from_vertices(ball6, ["@0", "@1", "@2"])
        out = push_crop(ball6, path, 2)
        assert path_vertices(ball6, out) == ["@2", "@3", "@4"]

    def test_backtrack_removed(self):
        poly = rose_map({"a": "a", "b": "ba"}, {"a": "a", "b": "bA"})
        filt = compute_maximal_filtration(poly)
        weights = edge_weights(analyze_strata(poly, filt))
        ball = build_ball(poly, weights, 6.0)
        # the image of b.A develops a backtrack: ba then back along a
        path = path_from_vertices(ball, ["@0", "b@0", "bA@0"])
        out = push_crop(ball, path, 1)
        verts = path_vertices(ball, out)
        assert verts == ["@1", "b@1"]
        assert len(set(verts)) == len(verts)

    def test_monotone_heights_preserved(self, ball6):
        path = path_from_vertices(ball6, ["@0", "a@0", "b@1"])
        out = push_crop(ball6, path, 1)
        hs = [ball6.vertices[l].height for l in path_vertices(ball6, out)]
        assert hs == sorted(hs)


class TestDeviation:
    def test_forward_path_is_leaflike(self, ball6):
        cfg = CuttingConfig(delta=0.0, deviation_threshold=3)
        path = path_from_vertices(ball6, ["@0", "@1", "@2", "@3", "@4"])
        verdict = deviation_classify(ball6, path, cfg)
        assert verdict.verdict == "leaflike"
        assert verdict.max_fellow_travel >= 3

    def test_vertical_path_deviates(self, ball6):
        cfg = CuttingConfig(delta=0.0, deviation_threshold=1)
        path = path_from_vertices(ball6, ["@0", "a@0", "ab@0", "aba@0"])
        verdict = deviation_classify(ball6, path, cfg)
        assert verdict.verdict == "deviating"
        assert verdict.max_fellow_travel == 0

    def test_infinite_threshold_sentinel(self, ball6):
        cfg = CuttingConfig(deviation_threshold=None)
        path = path_from_vertices(ball6, ["@0", "@1", "@2", "@3"])
        assert deviation_classify(ball6, path, cfg).verdict == "deviating"


class TestLiftedAugmentation:
    def test_floor_path_plain(self, ball6):
        path = path_from_vertices(ball6, ["@0", "a@0", "ab@0"])
        lifted = lifted_augmentation(ball6, path, 3)
        assert lifted.backtracks == []

    def test_forward_path_plain(self, ball6):
        path = path_from_vertices(ball6, ["@0", "@1", "@2", "@3", "@4"])
        lifted = lifted_augmentation(ball6, path, 2)
        assert lifted.backtracks == []

    def test_carrier_chain_inside_one_long_cell(self, ball6):
        # a then b at height 1 stays inside the long cell over the base b-cell
        path = path_from_vertices(ball6, ["@1", "a@1", "ab@1"])
        lifted = lifted_augmentation(ball6, path, 2)
        assert lifted.backtracks == []

    def test_single_disagreement_single_backtrack(self, ball6):
        # continuing with a third letter leaves the carrier: one backtrack
        path = path_from_vertices(ball6, ["@1", "a@1", "ab@1", "aba@1"])
        lifted = lifted_augmentation(ball6, path, 2)
        assert len(lifted.backtracks) == 1
        here, apex = lifted.backtracks[0]
        assert here == "ab@1"
        assert ball6.vertices[apex].height == 2

    def test_backtrack_heights_bounded(self, ball6):
        path = path_from_vertices(ball6, ["@1", "a@1", "ab@1", "aba@1"])
        lifted = lifted_augmentation(ball6, path, 2)
        assert all(0 < h <= 2 for h in lifted.backtrack_heights)

    def test_projection_is_original_plus_backtracks(self, ball6):
        path = path_from_vertices(ball6, ["@1", "a@1", "ab@1", "aba@1"])
        lifted = lifted_augmentation(ball6, path, 2)
        cells = [m for kind, m in lifted.moves if kind == "cell"]
        assert tuple(cells) == path[1]

    def test_vertical_to_horizontal_junction(self, ball6):
        # a vertical cell at height 1 ends at an interior column point, so a
        # following upward move must interpolate a backtrack
        path = path_from_vertices(ball6, ["@1", "a@1", "b@2"])
        lifted = lifted_augmentation(ball6, path, 2)
        assert len(lifted.backtracks) == 1


class TestDualCubeComplex:
    def test_two_crossing_walls(self, ball6):
        height = LevelTrace(ball6, 0)
        sphere = PredicateTrace(ball6, lambda l: ball6.vertices[l].dist <= 2.0)
        dual = dual_cube_complex(ball6, [height, sphere], core_radius=5.0)
        assert dual.counts() == (4, 4, 1)

    def test_three_nested_walls(self, ball6):
        walls = [LevelTrace(ball6, m) for m in (-2, 0, 2)]
        dual = dual_cube_complex(ball6, walls, core_radius=5.0)
        assert dual.counts() == (4, 3, 0)

    def test_three_pairwise_crossing_walls(self, ball6):
        height = LevelTrace(ball6, 0)
        sphere = PredicateTrace(ball6, lambda l: ball6.vertices[l].dist <= 2.0)
        sphere2 = PredicateTrace(
            ball6, lambda l: ball6.distances_from(["a@0"]).get(l, 99) <= 2.0, offset=F(1, 4)
        )
        dual = dual_cube_complex(ball6, [height, sphere, sphere2], core_radius=5.0)
        # all eight octants realized: one 3-cube
        assert dual.cubes_by_dim.get(3, 0) == 1

    def test_single_wall_single_edge(self, ball6):
        dual = dual_cube_complex(ball6, [LevelTrace(ball6, 0)], core_radius=5.0)
        assert dual.counts() == (2, 1, 0)

    def test_non_separating_trace_rejected(self, ball6):
        class NoWall:
            crossings_v = {}
            crossings_h = {}

        with pytest.raises(CuttingError):
            dual_cube_complex(ball6, [NoWall()])

    def test_overlapping_walls_rejected(self, ball6):
        t = LevelTrace(ball6, 0)
        with pytest.raises(CuttingError, match="overlap"):
            dual_cube_complex(ball6, [t, LevelTrace(ball6, 0)])
