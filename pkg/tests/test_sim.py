import math

import numpy as np
import pytest

from hullgain.sim import (
    CellSensor,
    Terrain,
    World,
    WorldError,
    builtin_worlds,
    corridors,
    empty_room,
    get_world,
    load_world,
    narrow_gap,
    parse_world,
    railing_pocket,
    sense,
)

import oracles as O

TINY = """resolution=1
#######
#..=..#
#.S.#.#
#######
"""


def walled(h, w):
    c = np.zeros((h, w), np.uint8)
    c[0, :] = c[-1, :] = c[:, 0] = c[:, -1] = Terrain.SOLID
    return c


def test_parse_world_layout():
    w = parse_world(TINY)
    assert (w.width, w.height) == (7, 4)
    assert tuple(w.spawn) == (2.5, 1.5)
    assert w.terrain_at((3.5, 2.5)) == Terrain.PENETRABLE  # top row is the file's first body line
    assert w.terrain_at((4.5, 1.5)) == Terrain.SOLID
    assert w.terrain_at((-1, 0)) == Terrain.SOLID


def test_ascii_round_trip():
    w = parse_world(TINY)
    back = parse_world(w.to_ascii())
    assert (back.cells == w.cells).all() and back.spawn == w.spawn


@pytest.mark.parametrize(
    "text",
    [
        "#S#\n",
        "resolution=-1\n###\n#S#\n###\n",
        "resolution=1\n###\n#..#\n###\n",
        "resolution=1\n###\n#.#\n###\n",
        "resolution=1\n####\n#SS#\n####\n",
        "resolution=1\n###\n#x#\n###\n",
        "resolution=1\n#.#\n#S#\n###\n",
    ],
)
def test_malformed_worlds_rejected(text):
    with pytest.raises(WorldError):
        parse_world(text)


def test_load_world_uses_file_stem(tmp_path):
    p = tmp_path / "tiny.txt"
    p.write_text(TINY)
    assert load_world(p).name == "tiny"
    assert get_world(str(p)).name == "tiny"


def test_spawn_must_be_free():
    c = walled(5, 5)
    with pytest.raises(WorldError):
        World(1.0, c, (0.5, 0.5))


def test_world_is_immutable():
    w = empty_room()
    with pytest.raises(ValueError):
        w.cells[1, 1] = 1


# -- sensor -------------------------------------------------------------------


def test_beam_hits_wall_at_expected_range():
    c = walled(11, 11)
    w = World(1.0, c, (5.5, 5.5))
    s = sense(w, w.spawn, 4, 10.0)
    # beam 0 points east; it enters the border column x=10 after 4.5 m
    assert s.hits[0][0].cell == (10, 5)
    assert s.hits[0][0].range == pytest.approx(4.5)
    assert s.hits[0][0].terrain == Terrain.SOLID


def test_short_range_beam_hits_nothing():
    w = World(1.0, walled(11, 11), (5.5, 5.5))
    s = sense(w, w.spawn, 8, 2.0)
    assert all(not h for h in s.hits)
    assert len(s.passed) > 0


def test_penetrable_then_solid_on_one_beam():
    c = walled(11, 11)
    c[5, 7] = Terrain.PENETRABLE
    w = World(1.0, c, (5.5, 5.5))
    hits = sense(w, w.spawn, 4, 10.0).hits[0]
    assert [h.terrain for h in hits] == [Terrain.PENETRABLE, Terrain.SOLID]
    assert hits[0].range < hits[1].range


def test_hit_ranges_within_max_range():
    w = railing_pocket()
    rng = np.random.default_rng(0)
    free = np.argwhere(w.reachable_mask())
    for iy, ix in free[rng.choice(len(free), 30, replace=False)]:
        pose = ((ix + 0.5) * w.resolution, (iy + 0.5) * w.resolution)
        s = sense(w, pose, 90, 5.0)
        for beam in s.hits:
            assert all(0 <= h.range <= 5.0 + 1e-9 for h in beam)
            assert [h.range for h in beam] == sorted(h.range for h in beam)
            # a beam never records anything past the first solid cell
            solid = [k for k, h in enumerate(beam) if h.terrain == Terrain.SOLID]
            assert not solid or solid[0] == len(beam) - 1
        passed = s.passed
        assert (w.cells[passed[:, 1], passed[:, 0]] == Terrain.FREE).all()


def test_sense_rejects_bad_arguments():
    w = empty_room()
    with pytest.raises(WorldError):
        sense(w, (0.05, 0.05), 4, 1.0)
    with pytest.raises(ValueError):
        sense(w, w.spawn, 0, 1.0)


def test_cell_sensor_memoises():
    w = empty_room()
    cs = CellSensor(w, 90, 3.0)
    a = cs.observe((20, 20))
    assert cs.observe((20, 20)) is a


# -- built-in worlds ------------------------------------------------------------


def test_builtin_worlds_valid_and_named():
    for name, w in builtin_worlds().items():
        assert w.name == name
        assert w.reachable_mask()[w.cell_of(w.spawn)[1], w.cell_of(w.spawn)[0]]


def test_reachable_mask_matches_flood_fill():
    for w in (railing_pocket(), corridors(), narrow_gap()):
        want = O.flood_fill(w.cells == Terrain.FREE, w.cell_of(w.spawn))
        got = {(int(x), int(y)) for y, x in np.argwhere(w.reachable_mask())}
        assert got == want


def test_railing_pocket_reachable_only_by_detour():
    w = railing_pocket()
    reach = w.reachable_mask()
    room = w.regions["hidden_room"]
    cx, cy = w.cell_of(((room.x0 + room.x1) / 2, (room.y0 + room.y1) / 2))
    assert reach[cy, cx]
    # the railing spans every column west of the door
    rail_row = w.cell_of((0, 2.7))[1]
    door_x = w.cell_of((22.0, 0))[0]
    assert (w.cells[rail_row, 1:door_x] == Terrain.PENETRABLE).all()
    # the hidden room is out of sensor range from the whole corridor
    corridor = [(x + 0.1, 1.5) for x in np.arange(1.0, 21.0, 1.0)]
    room_cells = set()
    for p in corridor:
        s = sense(w, p, 360, 5.0)
        room_cells |= {tuple(c) for c in s.passed if room.contains(((c[0] + 0.5) * 0.2, (c[1] + 0.5) * 0.2))}
    assert not room_cells


def test_railing_pre_pose_is_free():
    w = railing_pocket()
    assert w.terrain_at(w.poses["pre_railing"]) == Terrain.FREE


def test_narrow_gap_is_narrower_than_two_robot_sizes():
    w = narrow_gap()
    g = w.regions["gap"]
    assert g.y1 - g.y0 < 2 * 0.6
    east = w.cell_of((12.0, 4.1))
    assert w.reachable_mask()[east[1], east[0]]


def test_corridors_connected_and_large():
    w = corridors()
    reach = w.reachable_mask()
    assert (reach == (w.cells == Terrain.FREE)).all()
    assert w.width * w.resolution == pytest.approx(60.0, abs=0.3)
    assert math.isclose(w.height * w.resolution, 40.0, abs_tol=0.3)
