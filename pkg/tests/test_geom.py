import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hullgain.geom import (
    EPS_GEOM,
    ConcaveHull,
    GeometryError,
    Label,
    LabeledNode,
    Point2,
    concave_hull,
    cross,
    delaunay,
    filter_hull,
    merge_nodes,
    passable_runs,
    point_in_polygon,
    points_in_polygon,
    polygon_is_simple,
    rasterize_polygon,
    segments_intersect,
    signed_area,
)

import oracles as O

S, OC, UN, BW = Label.SUCCESSFUL, Label.OCCUPIED, Label.UNKNOWN, Label.BEYOND_WINDOW


def nodes_of(points, label=S):
    return [LabeledNode(Point2(float(x), float(y)), label) for x, y in points]


def boundary_points(h: ConcaveHull):
    return [tuple(n.position) for n in h.boundary]


def canonical_cycle(pts):
    k = min(range(len(pts)), key=lambda i: pts[i])
    return pts[k:] + pts[:k]


# -- cross ------------------------------------------------------------------------


@pytest.mark.parametrize(
    "o,a,b,expected",
    [((0, 0), (1, 0), (0, 1), 1.0), ((0, 0), (1, 1), (2, 2), 0.0), ((0, 0), (0, 1), (1, 0), -1.0)],
)
def test_cross_examples(o, a, b, expected):
    assert cross(o, a, b) == expected


# -- segments ---------------------------------------------------------------------


def test_segments_cross_at_center():
    assert segments_intersect((0, 0), (2, 2), (0, 2), (2, 0))


def test_collinear_disjoint_segments():
    assert not segments_intersect((0, 0), (1, 1), (2, 2), (3, 3))


def test_touching_counts_unless_strict():
    assert segments_intersect((0, 0), (1, 0), (1, 0), (1, 1))
    assert not segments_intersect((0, 0), (1, 0), (1, 0), (1, 1), strict=True)


def test_zero_length_segment_rejected():
    with pytest.raises(GeometryError):
        segments_intersect((0, 0), (0, 0), (1, 1), (2, 2))


def test_segments_agree_with_orientation_oracle_on_lattice():
    # coarse lattice points make collinear and touching cases common
    rng = np.random.default_rng(11)
    for _ in range(3000):
        a, b, c, d = (tuple(map(float, rng.integers(0, 4, 2))) for _ in range(4))
        if a == b or c == d:
            continue
        assert segments_intersect(a, b, c, d) == O.segments_intersect(a, b, c, d), (a, b, c, d)


coord = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
pt = st.tuples(coord, coord)


@given(pt, pt, pt, pt)
@settings(max_examples=300, deadline=None)
def test_segments_intersect_eight_way_symmetry(a, b, c, d):
    if a == b or c == d:
        return
    ref = segments_intersect(a, b, c, d)
    for args in [(b, a, c, d), (a, b, d, c), (b, a, d, c), (c, d, a, b), (d, c, a, b), (c, d, b, a), (d, c, b, a)]:
        assert segments_intersect(*args) == ref


# -- point in polygon -------------------------------------------------------------

SQUARE = [(0, 0), (1, 0), (1, 1), (0, 1)]


def test_point_in_unit_square():
    assert point_in_polygon((0.5, 0.5), SQUARE)
    assert not point_in_polygon((1.5, 0.5), SQUARE)


def test_boundary_points_count_as_inside():
    assert point_in_polygon((1.0, 0.5), SQUARE)
    assert point_in_polygon((0.0, 0.0), SQUARE)


def test_pip_matches_winding_number():
    rng = np.random.default_rng(5)
    for _ in range(200):
        poly = O.star_polygon(rng, int(rng.integers(3, 20)))
        for q in rng.uniform(-1.1, 1.1, (50, 2)):
            q = tuple(q)
            if min(O.dist_point_segment(q, poly[i], poly[(i + 1) % len(poly)]) for i in range(len(poly))) <= 1e-6:
                continue
            assert point_in_polygon(q, poly) == (O.winding_number(q, poly) != 0)


def test_vectorised_pip_matches_scalar():
    rng = np.random.default_rng(8)
    poly = O.star_polygon(rng, 12)
    q = rng.uniform(-1.2, 1.2, (500, 2))
    got = points_in_polygon(q, poly)
    assert got.tolist() == [point_in_polygon(p, poly) for p in q]


@given(st.integers(0, 10_000), st.integers(0, 30))
@settings(max_examples=60, deadline=None)
def test_pip_invariant_under_start_rotation(seed, shift):
    rng = np.random.default_rng(seed)
    poly = O.star_polygon(rng, 9)
    k = shift % len(poly)
    rot = poly[k:] + poly[:k]
    for q in rng.uniform(-1.1, 1.1, (20, 2)):
        assert point_in_polygon(q, poly) == point_in_polygon(q, rot)


def test_rasterize_matches_cell_centre_pip():
    rng = np.random.default_rng(2)
    poly = [(x * 2 + 3, y * 2 + 3) for x, y in O.star_polygon(rng, 10)]
    res = 0.2
    mask = rasterize_polygon(np.array(poly), 0.0, 0.0, 30, 30, res)
    for iy in range(30):
        for ix in range(30):
            c = ((ix + 0.5) * res, (iy + 0.5) * res)
            assert mask[iy, ix] == point_in_polygon(c, poly), (ix, iy)


# -- delaunay ---------------------------------------------------------------------


def test_three_points_one_triangle():
    t = delaunay([(0, 0), (1, 0), (0, 1)])
    assert len(t.triangles) == 1
    assert len(t.exterior_edges) == 3


def test_unit_square_two_triangles():
    t = delaunay([(0, 0), (1, 0), (1, 1), (0, 1)])
    assert len(t.triangles) == 2
    assert len(t.exterior_edges) == 4
    shared = set(map(frozenset, _edges(t.triangles[0]))) & set(map(frozenset, _edges(t.triangles[1])))
    assert len(shared) == 1


def _edges(tri):
    a, b, c = tri
    return [(a, b), (b, c), (c, a)]


def test_two_hundred_points_empty_circumcircles():
    rng = np.random.default_rng(0)
    pts = rng.random((200, 2))
    t = delaunay(pts)
    assert O.empty_circle_violations([tuple(p) for p in t.vertices], t.triangles) == 0


def test_exterior_edges_are_single_triangle_edges():
    rng = np.random.default_rng(3)
    t = delaunay(rng.random((60, 2)))
    count = {}
    for tri in t.triangles:
        for e in _edges(tri):
            count[frozenset(e)] = count.get(frozenset(e), 0) + 1
    single = {e for e, c in count.items() if c == 1}
    assert single == {frozenset(e) for e in t.exterior_edges}


def test_triangles_counter_clockwise():
    rng = np.random.default_rng(4)
    t = delaunay(rng.random((40, 2)))
    for a, b, c in t.triangles:
        assert cross(t.vertices[a], t.vertices[b], t.vertices[c]) > 0


def test_delaunay_matches_brute_force_small_sets():
    rng = np.random.default_rng(9)
    for _ in range(100):
        pts = rng.random((int(rng.integers(3, 11)), 2))
        got = sorted(tuple(sorted(x)) for x in delaunay(pts).triangles)
        assert got == sorted(tuple(sorted(x)) for x in O.brute_delaunay(pts))


def test_delaunay_rejects_degenerate_input():
    with pytest.raises(GeometryError):
        delaunay([(0, 0), (1, 1), (2, 2)])
    with pytest.raises(GeometryError):
        delaunay([(0, 0), (0, 0), (1, 1)])
    with pytest.raises(GeometryError):
        delaunay([(0, 0), (1, math.nan), (1, 1)])


def test_duplicates_are_merged():
    t = delaunay([(0, 0), (1, 0), (0, 1), (0, 0)])
    assert len(t.vertices) == 3
    assert t.source_index.tolist() == [0, 1, 2, 0]


# -- concave hull -----------------------------------------------------------------


def test_equilateral_triangle_is_its_own_hull():
    tri = [(0, 0), (1, 0), (0.5, math.sqrt(3) / 2)]
    h = concave_hull(nodes_of(tri), 2.0)
    assert sorted(boundary_points(h)) == sorted(tri)


def test_square_with_center_carves_a_single_notch():
    # The first removal is legal: the centre is not yet on the boundary. Once it
    # is, the remaining three long edges are blocked.
    pts = [(0, 0), (1, 0), (1, 1), (0, 1), (0.5, 0.5)]
    h = concave_hull(nodes_of(pts), 0.9)
    assert len(h) == 5
    assert h.blocked_edges == 3
    assert (0.5, 0.5) in boundary_points(h)
    assert polygon_is_simple(h.vertices)
    assert signed_area(h.vertices) == pytest.approx(0.75)


def u_lattice():
    pts = []
    for i in range(20):
        for j in range(20):
            if 7 <= i < 13 and j >= 6:  # 6 x 14 notch open at the top
                continue
            pts.append((i * 0.5, j * 0.5))
    return pts


def test_u_shaped_lattice_follows_notch():
    pts = u_lattice()
    h = concave_hull(nodes_of(pts), 1.0)
    v = h.vertices
    assert polygon_is_simple(v)
    assert (h.edge_lengths() <= 1.0 + 1e-12).all()
    assert all(point_in_polygon(p, h) for p in pts)
    # the notch interior is outside the hull
    assert not point_in_polygon((4.75, 8.0), h)
    assert signed_area(v) < 9.5 * 9.5 - 2.5 * 6.5


def test_hull_agrees_with_reference_removal_loop():
    rng = np.random.default_rng(21)
    for _ in range(150):
        pts = rng.random((int(rng.integers(3, 13)), 2))
        R = float(rng.uniform(0.15, 0.8))
        h = concave_hull(nodes_of(pts), R)
        ref = O.reference_carve(pts, O.brute_delaunay(pts), R)
        assert canonical_cycle(boundary_points(h)) == canonical_cycle([tuple(pts[i]) for i in ref])


def test_infinite_R_gives_convex_hull():
    rng = np.random.default_rng(1)
    for _ in range(100):
        pts = rng.random((int(rng.integers(3, 60)), 2))
        h = concave_hull(nodes_of(pts), math.inf)
        got = set(boundary_points(h))
        want = set(O.convex_hull([tuple(p) for p in pts]))
        # delaunay keeps collinear hull points; the oracle drops them
        assert want <= got
        assert all(O.dist_point_segment(p, *_nearest_edge(p, want)) < 1e-12 for p in got - want)


def _nearest_edge(p, hull_pts):
    hp = O.convex_hull(list(hull_pts))
    edges = [(hp[i], hp[(i + 1) % len(hp)]) for i in range(len(hp))]
    return min(edges, key=lambda e: O.dist_point_segment(p, *e))


def test_labels_survive_and_duplicates_keep_strongest():
    pts = nodes_of([(0, 0), (1, 0), (0, 1)]) + [LabeledNode(Point2(0.0, 0.0), OC)]
    h = concave_hull(pts, 5.0)
    assert dict((tuple(n.position), n.label) for n in h.boundary)[(0.0, 0.0)] == OC


def test_merge_nodes_label_priority():
    m = merge_nodes([LabeledNode(Point2(0, 0), BW), LabeledNode(Point2(0, 0), UN), LabeledNode(Point2(0, 0), S)])
    assert [n.label for n in m] == [S]


def test_concave_hull_rejects_bad_input():
    with pytest.raises(GeometryError):
        concave_hull(nodes_of([(0, 0), (1, 1), (0, 1)]), 0.0)
    with pytest.raises(GeometryError):
        concave_hull(nodes_of([(0, 0), (1, 1)]), 1.0)


@given(st.integers(0, 100_000), st.floats(0.1, 1.0))
@settings(max_examples=80, deadline=None)
def test_concave_hull_properties(seed, R):
    rng = np.random.default_rng(seed)
    pts = rng.random((int(rng.integers(3, 40)), 2))
    h = concave_hull(nodes_of(pts), R)
    assert polygon_is_simple(h.vertices)
    assert signed_area(h.vertices) > 0
    long_edges = int((h.edge_lengths() > R).sum())
    assert long_edges <= h.blocked_edges
    assert all(point_in_polygon(p, h) for p in pts)


@given(st.permutations(list(range(40))))
@settings(max_examples=25, deadline=None)
def test_tie_order_does_not_change_hull_properties(perm):
    # a lattice has many equal-length edges, so input order changes tie-breaking
    base = [(0.5 * (k % 8), 0.5 * (k // 8)) for k in range(40)]
    pts = [base[k] for k in perm]
    h = concave_hull(nodes_of(pts), 0.6)
    assert polygon_is_simple(h.vertices)
    assert int((h.edge_lengths() > 0.6).sum()) <= h.blocked_edges
    assert all(point_in_polygon(p, h) for p in pts)


# -- filtering --------------------------------------------------------------------


def labelled_ring(labels, radius=1.0):
    n = len(labels)
    return ConcaveHull(
        [LabeledNode(Point2(radius * math.cos(2 * math.pi * k / n), radius * math.sin(2 * math.pi * k / n)), lab)
         for k, lab in enumerate(labels)]
    )


def test_all_occupied_hull_unchanged():
    h = labelled_ring([OC] * 6)
    assert filter_hull(h, 0.5) is h
    assert passable_runs(h) == []


def test_lone_narrow_successful_node_removed():
    h = ConcaveHull(
        [LabeledNode(Point2(0, 0), OC), LabeledNode(Point2(0.2, 0), S), LabeledNode(Point2(0.4, 0), OC),
         LabeledNode(Point2(0.4, 1), OC), LabeledNode(Point2(0, 1), OC)]
    )
    f = filter_hull(h, 0.5)
    assert [tuple(n.position) for n in f.boundary] == [(0, 0), (0.4, 0), (0.4, 1), (0, 1)]
    assert not any(f.edge_passable)


def test_wide_run_is_kept():
    h = labelled_ring([OC, S, S, S, OC, OC, OC, OC], radius=2.0)
    assert filter_hull(h, 0.5) is h


def test_all_passable_ring_is_one_run():
    h = labelled_ring([S] * 5)
    runs = passable_runs(h)
    assert len(runs) == 1
    assert runs[0][1] == pytest.approx(float(h.edge_lengths().sum()))


def test_filter_keeps_hull_when_too_few_vertices_remain():
    h = labelled_ring([S, S, OC, OC], radius=0.1)
    f = filter_hull(h, 0.5)
    assert f.filter_warning
    assert len(f) == 4


def test_edge_rule_any_versus_both():
    h = labelled_ring([S, OC, OC, OC])
    assert h.edge_passable == [False, False, False, False]
    assert h.with_rule("any").edge_passable == [True, False, False, True]
    with pytest.raises(ValueError):
        h.with_rule("some")


label_st = st.sampled_from([S, OC, UN, BW])


@given(st.lists(label_st, min_size=4, max_size=30), st.floats(0.5, 4.0), st.floats(0.05, 1.0))
@settings(max_examples=200, deadline=None)
def test_filter_leaves_only_wide_runs_and_is_idempotent(labels, radius, robot):
    h = labelled_ring(labels, radius)
    f = filter_hull(h, robot)
    if not f.filter_warning:
        assert all(length >= 2 * robot for _, length in passable_runs(f))
    assert boundary_points(filter_hull(f, robot)) == boundary_points(f)


def test_eps_constant():
    assert EPS_GEOM == 1e-9
