import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hullgain.grid import (
    Cell,
    OccupancyGrid,
    OutOfBounds,
    disc_cells,
    first_blocker,
    integrate_scan,
    is_line_free,
    lines_all_free,
    lines_free,
    raycast,
    traverse_batch,
    unknown_gain,
)
from hullgain.sim import World, empty_room, sense

import oracles as O


def grid_of(w, h, res=1.0, fill=Cell.UNKNOWN):
    g = OccupancyGrid(res, w, h)
    g.cells[:] = fill
    return g


# -- raycast ---------------------------------------------------------------------


def test_zero_length_ray_is_single_cell():
    assert raycast(grid_of(3, 3), (0.5, 0.5), (0.5, 0.5)) == [(0, 0)]


def test_axis_aligned_ray_five_cells():
    assert raycast(grid_of(6, 2), (0.5, 0.5), (4.5, 0.5)) == [(0, 0), (1, 0), (2, 0), (3, 0), (4, 0)]


def test_ray_leaving_grid_raises():
    with pytest.raises(OutOfBounds):
        raycast(grid_of(3, 3), (0.5, 0.5), (3.5, 0.5))


def test_raycast_cells_touch_segment_and_cover_it():
    rng = np.random.default_rng(4)
    g = grid_of(20, 20, res=0.5)
    for _ in range(2000):
        a, b = rng.uniform(0, 10, 2), rng.uniform(0, 10, 2)
        cells = raycast(g, a, b)
        for ix, iy in cells:
            assert O.segment_hits_box(a, b, ix * 0.5, iy * 0.5, (ix + 1) * 0.5, (iy + 1) * 0.5)
        # consecutive cells are 4-neighbours
        for (x0, y0), (x1, y1) in zip(cells, cells[1:]):
            assert abs(x0 - x1) + abs(y0 - y1) == 1
        assert O.cells_on_segment_supersampled(a, b, 0.5, 400) <= set(cells)


def test_batch_traversal_matches_scalar():
    rng = np.random.default_rng(6)
    g = grid_of(15, 15, res=0.4)
    a = (3.1, 2.7)
    ends = rng.uniform(0, 6, (300, 2))
    IX, IY, _, valid = traverse_batch(g, a, ends)
    for m, b in enumerate(ends):
        got = [(int(x), int(y)) for x, y, v in zip(IX[m], IY[m], valid[m]) if v]
        assert got == raycast(g, a, b)


@given(st.floats(0.01, 9.99), st.floats(0.01, 9.99), st.floats(0.01, 9.99), st.floats(0.01, 9.99))
@settings(max_examples=300, deadline=None)
def test_reverse_ray_covers_same_cells_up_to_corner_ties(x0, y0, x1, y1):
    g = grid_of(10, 10)
    fwd, back = raycast(g, (x0, y0), (x1, y1)), raycast(g, (x1, y1), (x0, y0))
    assert fwd[0] == back[-1] and fwd[-1] == back[0]
    assert len(fwd) == len(back)
    diff = set(fwd) ^ set(back)
    # cells can only differ where the segment passes exactly through a corner
    for ix, iy in diff:
        assert O.segment_hits_box((x0, y0), (x1, y1), ix, iy, ix + 1, iy + 1)


# -- line of sight ---------------------------------------------------------------


def test_all_free_grid_has_line_of_sight():
    g = grid_of(8, 8, fill=Cell.FREE)
    assert is_line_free(g, (0.5, 0.5), (7.5, 6.2))


def test_occupied_midpoint_blocks():
    g = grid_of(8, 8, fill=Cell.FREE)
    g.cells[4, 4] = Cell.OCCUPIED
    assert not is_line_free(g, (0.5, 0.5), (7.5, 7.5))


def test_line_free_matches_raycast_plus_lookup():
    rng = np.random.default_rng(12)
    for _ in range(40):
        g = OccupancyGrid(0.5, 12, 12, cells=rng.choice(np.array([0, 1, 2], np.uint8), (12, 12), p=[0.2, 0.65, 0.15]))
        a = rng.uniform(0, 6, 2)
        ends = rng.uniform(0, 6, (50, 2))
        vec = lines_free(g, a, ends)
        allf = lines_all_free(g, a, ends)
        for b, v, af in zip(ends, vec, allf):
            statuses = [g.cells[iy, ix] for ix, iy in raycast(g, a, b)]
            assert is_line_free(g, a, b) == v == all(s != Cell.OCCUPIED for s in statuses)
            assert af == all(s == Cell.FREE for s in statuses)
            first = next((s for s in statuses if s != Cell.FREE), Cell.FREE)
            assert first_blocker(g, a, b) == first


# -- scans -----------------------------------------------------------------------


def test_empty_room_scan_frees_interior():
    w = empty_room()
    g = w.empty_grid()
    integrate_scan(g, w.spawn, sense(w, w.spawn, 360, 20.0))
    inner = g.cells[1:-1, 1:-1]
    assert (inner == Cell.FREE).all()
    assert (g.cells[0, 1:-1] == Cell.OCCUPIED).all()


def test_single_wall_cell_on_beam():
    cells = np.zeros((11, 11), np.uint8)
    cells[0, :] = cells[-1, :] = cells[:, 0] = cells[:, -1] = 1
    cells[5, 8] = 1  # wall 3 cells east of the robot
    w = World(1.0, cells, (5.5, 5.5))
    g = w.empty_grid()
    integrate_scan(g, w.spawn, sense(w, w.spawn, 4, 10.0))
    assert g.cells[5, 8] == Cell.OCCUPIED
    assert (g.cells[5, 5:8] == Cell.FREE).all()
    assert g.cells[5, 9] == Cell.UNKNOWN


def test_penetrable_railing_reveals_cells_behind():
    cells = np.zeros((11, 11), np.uint8)
    cells[0, :] = cells[-1, :] = cells[:, 0] = cells[:, -1] = 1
    cells[5, 8] = 2
    w = World(1.0, cells, (5.5, 5.5))
    g = w.empty_grid()
    integrate_scan(g, w.spawn, sense(w, w.spawn, 4, 10.0))
    assert g.cells[5, 8] == Cell.OCCUPIED
    assert g.cells[5, 9] == Cell.FREE
    assert g.cells[5, 10] == Cell.OCCUPIED


def test_free_never_overwrites_occupied():
    g = grid_of(3, 1)
    g.mark_occupied(np.array([1]), np.array([0]))
    g.mark_free(np.array([0, 1, 2]), np.array([0, 0, 0]))
    assert g.cells[0].tolist() == [Cell.FREE, Cell.OCCUPIED, Cell.FREE]


@given(st.lists(st.tuples(st.floats(0.3, 9.7), st.floats(0.3, 9.7)), min_size=1, max_size=6))
@settings(max_examples=30, deadline=None)
def test_unknown_count_never_increases(poses):
    cells = np.zeros((50, 50), np.uint8)
    cells[0, :] = cells[-1, :] = cells[:, 0] = cells[:, -1] = 1
    cells[20:30, 24:26] = 1
    cells[10, 5:40] = 2
    w = World(0.2, cells, (1.1, 1.1))
    g = w.empty_grid()
    before = g.count(Cell.UNKNOWN)
    for p in poses:
        if w.terrain_at(p) != 0:
            continue
        integrate_scan(g, p, sense(w, p, 90, 4.0))
        now = g.count(Cell.UNKNOWN)
        assert now <= before
        before = now
        # sensing never marks ground-truth obstacles Free
        assert not ((g.cells == Cell.FREE) & (w.cells != 0)).any()


# -- unknown gain ----------------------------------------------------------------


def test_unknown_gain_zero_on_free_grid():
    assert unknown_gain(grid_of(10, 10, fill=Cell.FREE), (5, 5), 3.0) == 0


def test_unknown_gain_counts_disc_on_unknown_grid():
    g = grid_of(21, 21)
    ix, _ = disc_cells(g, (10.5, 10.5), 4.0)
    assert unknown_gain(g, (10.5, 10.5), 4.0) == len(ix)
    assert len(ix) == sum(1 for x in range(21) for y in range(21) if math.dist((x + 0.5, y + 0.5), (10.5, 10.5)) <= 4.0)


def test_unknown_gain_matches_brute_force():
    rng = np.random.default_rng(31)
    for _ in range(25):
        cells = rng.choice(np.array([0, 1, 2], np.uint8), (20, 20), p=[0.4, 0.5, 0.1])
        g = OccupancyGrid(0.5, 20, 20, cells=cells)
        node = tuple(rng.uniform(0.1, 9.9, 2))
        r = float(rng.uniform(0.5, 6.0))
        want = O.brute_unknown_gain(cells.tolist(), 0.5, node, r, lambda a, b: is_line_free(g, a, b))
        assert unknown_gain(g, node, r) == want


@given(st.floats(0.2, 9.8), st.floats(0.2, 9.8), st.floats(0.1, 8.0))
@settings(max_examples=80, deadline=None)
def test_unknown_gain_bounded_by_disc(x, y, r):
    g = grid_of(20, 20, res=0.5)
    g.cells[::3, ::2] = Cell.OCCUPIED
    assert unknown_gain(g, (x, y), r) <= len(disc_cells(g, (x, y), r)[0])


def test_gain_radius_must_be_positive():
    with pytest.raises(ValueError):
        unknown_gain(grid_of(3, 3), (1, 1), 0.0)


def test_ascii_round_trip():
    g = grid_of(4, 3)
    g.cells[0, 1] = Cell.FREE
    g.cells[2, 3] = Cell.OCCUPIED
    back = OccupancyGrid.from_ascii(g.to_ascii(), 1.0)
    assert (back.cells == g.cells).all()
