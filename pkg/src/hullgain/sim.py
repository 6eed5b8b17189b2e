"""Ground-truth worlds and a 2D lidar with penetrable obstacles.

World files are ASCII: a header line ``resolution=<m>`` followed by one row
per line (top row first) with ``.`` free, ``#`` solid, ``=`` penetrable and
``S`` the spawn cell (free).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path

import numpy as np
from scipy import ndimage

from .geom import Point2
from .grid import OccupancyGrid, traverse_batch


class Terrain(IntEnum):
    FREE = 0
    SOLID = 1
    PENETRABLE = 2


_CHARS = {".": Terrain.FREE, "#": Terrain.SOLID, "=": Terrain.PENETRABLE, "S": Terrain.FREE}


class WorldError(ValueError):
    pass


@dataclass(frozen=True)
class Rect:
    x0: float
    y0: float
    x1: float
    y1: float

    def contains(self, p) -> bool:
        return self.x0 <= p[0] <= self.x1 and self.y0 <= p[1] <= self.y1


@dataclass
class World:
    resolution: float
    cells: np.ndarray  # (height, width) of Terrain, indexed [iy, ix]
    spawn: Point2
    name: str = "world"
    regions: dict[str, Rect] = field(default_factory=dict)
    poses: dict[str, Point2] = field(default_factory=dict)

    def __post_init__(self):
        self.cells = np.asarray(self.cells, dtype=np.uint8)
        self.cells.setflags(write=False)
        self.validate()

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    def cell_of(self, p) -> tuple[int, int]:
        return math.floor(p[0] / self.resolution), math.floor(p[1] / self.resolution)

    def terrain_at(self, p) -> Terrain:
        ix, iy = self.cell_of(p)
        if not (0 <= ix < self.width and 0 <= iy < self.height):
            return Terrain.SOLID
        return Terrain(self.cells[iy, ix])

    def validate(self) -> None:
        c = self.cells
        if c.ndim != 2 or min(c.shape) < 3:
            raise WorldError("world must be at least 3x3 cells")
        border = np.concatenate([c[0], c[-1], c[:, 0], c[:, -1]])
        if (border != Terrain.SOLID).any():
            raise WorldError("boundary cells must be solid")
        if self.terrain_at(self.spawn) != Terrain.FREE:
            raise WorldError(f"spawn {tuple(self.spawn)} is not on a free cell")

    def empty_grid(self) -> OccupancyGrid:
        return OccupancyGrid(self.resolution, self.width, self.height)

    def reachable_mask(self, start=None) -> np.ndarray:
        """4-connected free cells reachable from ``start`` (default: spawn)."""
        start = self.spawn if start is None else start
        lab, _ = ndimage.label(self.cells == Terrain.FREE)
        ix, iy = self.cell_of(start)
        return lab == lab[iy, ix]

    def to_ascii(self) -> str:
        lut = np.array([".", "#", "="])
        rows = lut[self.cells].copy()
        sx, sy = self.cell_of(self.spawn)
        rows[sy, sx] = "S"
        body = "\n".join("".join(r) for r in rows[::-1])
        return f"resolution={self.resolution:g}\n{body}\n"


def parse_world(text: str, name: str = "world") -> World:
    lines = [ln.rstrip("\n") for ln in text.splitlines()]
    lines = [ln for ln in lines if ln.strip()]
    if not lines or not lines[0].startswith("resolution="):
        raise WorldError("missing 'resolution=<meters>' header")
    try:
        res = float(lines[0].split("=", 1)[1])
    except ValueError as exc:
        raise WorldError(f"bad resolution header: {lines[0]!r}") from exc
    if not res > 0:
        raise WorldError("resolution must be positive")
    rows = lines[1:]
    if not rows:
        raise WorldError("empty world")
    w = len(rows[0])
    if any(len(r) != w for r in rows):
        raise WorldError("ragged world rows")
    h = len(rows)
    cells = np.empty((h, w), dtype=np.uint8)
    spawn = None
    for r, row in enumerate(rows):
        iy = h - 1 - r
        for ix, ch in enumerate(row):
            if ch not in _CHARS:
                raise WorldError(f"unknown world character {ch!r}")
            cells[iy, ix] = _CHARS[ch]
            if ch == "S":
                if spawn is not None:
                    raise WorldError("more than one spawn cell")
                spawn = Point2((ix + 0.5) * res, (iy + 0.5) * res)
    if spawn is None:
        raise WorldError("no spawn cell 'S'")
    return World(res, cells, spawn, name)


def load_world(path) -> World:
    path = Path(path)
    return parse_world(path.read_text(), name=path.stem)


# ---------------------------------------------------------------------------
# sensor
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Hit:
    range: float
    cell: tuple[int, int]
    terrain: Terrain


@dataclass
class SensorScan:
    max_range: float
    angles: np.ndarray
    hits: list[list[Hit]]
    passed: np.ndarray  # (K, 2) cells crossed by some beam without a hit

    def hit_cells(self) -> np.ndarray:
        cells = [h.cell for beam in self.hits for h in beam]
        return np.array(cells, dtype=int).reshape(-1, 2)


def sense(world: World, pose, n_beams: int, max_range: float) -> SensorScan:
    """Cast ``n_beams`` evenly spaced beams from ``pose``.

    Solid cells stop a beam; penetrable cells are recorded and the beam goes
    on. Ranges are the distance at which the beam enters the hit cell.
    """
    if world.terrain_at(pose) != Terrain.FREE:
        raise WorldError(f"pose {tuple(pose)} is not on a free cell")
    if n_beams < 1 or not max_range > 0:
        raise ValueError("need n_beams >= 1 and max_range > 0")
    angles = 2.0 * math.pi * np.arange(n_beams) / n_beams
    ends = np.column_stack(
        [pose[0] + max_range * np.cos(angles), pose[1] + max_range * np.sin(angles)]
    )
    grid = _TerrainGeometry(world)
    IX, IY, T, valid = traverse_batch(grid, pose, ends)
    oob = (IX < 0) | (IX >= world.width) | (IY < 0) | (IY >= world.height)
    ter = world.cells[np.clip(IY, 0, world.height - 1), np.clip(IX, 0, world.width - 1)]
    ter = np.where(oob, Terrain.SOLID, ter)
    solid = (ter == Terrain.SOLID) & valid
    has_solid = solid.any(axis=1)
    stop = np.where(has_solid, solid.argmax(axis=1), valid.sum(axis=1) - 1)
    upto = np.arange(IX.shape[1])[None, :] <= stop[:, None]
    live = valid & upto
    pen = live & (ter == Terrain.PENETRABLE)
    free = live & (ter == Terrain.FREE)

    flat = np.unique(IY[free] * world.width + IX[free])
    passed = np.column_stack([flat % world.width, flat // world.width])
    hits: list[list[Hit]] = [[] for _ in range(n_beams)]
    rr, ss = np.nonzero(pen | (solid & upto))
    for r, s in zip(rr.tolist(), ss.tolist()):
        hits[r].append(
            Hit(float(T[r, s] * max_range), (int(IX[r, s]), int(IY[r, s])), Terrain(int(ter[r, s])))
        )
    return SensorScan(max_range, angles, hits, passed)


class CellSensor:
    """Scans taken from cell centres, memoised per cell.

    A scan depends only on the world and the sensor origin, so pinning the
    origin to the centre of the robot's cell lets repeated visits reuse it.
    """

    def __init__(self, world: World, n_beams: int, max_range: float):
        self.world = world
        self.n_beams = n_beams
        self.max_range = max_range
        self._cache: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] = {}

    def observe(self, cell: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
        """(free cells passed, hit cells), each an (K, 2) array of (ix, iy)."""
        got = self._cache.get(cell)
        if got is None:
            res = self.world.resolution
            pose = ((cell[0] + 0.5) * res, (cell[1] + 0.5) * res)
            scan = sense(self.world, pose, self.n_beams, self.max_range)
            hits = scan.hit_cells()
            flat = np.unique(hits[:, 1] * self.world.width + hits[:, 0])
            got = (scan.passed, np.column_stack([flat % self.world.width, flat // self.world.width]))
            self._cache[cell] = got
        return got


class _TerrainGeometry:
    # just enough of OccupancyGrid for traverse_batch
    def __init__(self, world: World):
        self.resolution = world.resolution
        self.origin = (0.0, 0.0)


# ---------------------------------------------------------------------------
# built-in worlds
# ---------------------------------------------------------------------------


class _Canvas:
    def __init__(self, width_m: float, height_m: float, res: float):
        self.res = res
        self.w = int(round(width_m / res))
        self.h = int(round(height_m / res))
        self.cells = np.zeros((self.h, self.w), dtype=np.uint8)
        self.border()

    def _idx(self, v: float) -> int:
        return int(round(v / self.res))

    def fill(self, x0, y0, x1, y1, terrain: Terrain) -> None:
        self.cells[self._idx(y0) : self._idx(y1), self._idx(x0) : self._idx(x1)] = terrain

    def border(self) -> None:
        self.cells[0, :] = self.cells[-1, :] = Terrain.SOLID
        self.cells[:, 0] = self.cells[:, -1] = Terrain.SOLID


def empty_room(res: float = 0.2) -> World:
    c = _Canvas(10.0, 10.0, res)
    return World(res, c.cells, Point2(5.1, 5.1), "empty_room")


def narrow_gap(res: float = 0.2, robot_size: float = 0.6) -> World:
    """Two rooms joined by a gap narrower than two robot sizes."""
    c = _Canvas(16.0, 8.0, res)
    c.fill(7.8, 0.0, 8.2, 8.0, Terrain.SOLID)
    gap = 2.0 * robot_size - 2 * res  # 1.0 m for the default robot
    c.fill(7.8, 4.0 - gap / 2, 8.2, 4.0 + gap / 2, Terrain.FREE)
    w = World(res, c.cells, Point2(3.1, 4.1), "narrow_gap")
    w.regions["gap"] = Rect(7.8, 4.0 - gap / 2, 8.2, 4.0 + gap / 2)
    return w


def railing_pocket(
    res: float = 0.2, length: float = 24.0, passage_x: float = 8.0, strip: float = 2.6
) -> World:
    """Long corridor beside a railing, with a pocket behind it.

    The lidar maps the strip behind the railing from the corridor, but the
    only way in is a door at the far (east) end. A passage off the strip
    leads to a room that cannot be seen from the corridor.
    """
    wall = 2.8 + strip
    c = _Canvas(length + 0.2, wall + 7.0, res)
    S, F, P = Terrain.SOLID, Terrain.FREE, Terrain.PENETRABLE
    c.fill(0.0, wall, length + 0.2, wall + 7.0, S)
    c.fill(0.0, 2.6, length - 2.0, 2.8, P)  # railing; 2 m door at the east end
    c.fill(passage_x, wall, passage_x + 1.4, wall + 3.0, F)  # passage
    c.fill(0.2, wall + 3.0, 14.0, wall + 6.8, F)  # hidden room
    c.border()
    w = World(res, c.cells, Point2(2.1, 1.5), "railing_pocket")
    w.regions["pocket"] = Rect(0.2, 2.8, length, wall + 6.8)
    w.regions["hidden_room"] = Rect(0.2, wall + 3.0, 14.0, wall + 6.8)
    w.poses["pre_railing"] = Point2(10.1, 1.5)
    return w


def corridors(res: float = 0.2) -> World:
    """Desk-scale corridor maze, about 60 x 40 m, loops and side rooms."""
    c = _Canvas(60.0, 40.0, res)
    S = Terrain.SOLID
    F = Terrain.FREE
    # fill everything solid, then carve corridors and rooms
    c.cells[:] = S
    # horizontal corridors (2.4 m wide)
    for y in (4.0, 19.0, 34.0):
        c.fill(2.0, y, 58.0, y + 2.4, F)
    # vertical corridors
    for x in (4.0, 30.0, 54.0):
        c.fill(x, 4.0, x + 2.4, 36.4, F)
    c.fill(17.0, 4.0, 19.4, 21.4, F)
    c.fill(42.0, 19.0, 44.4, 36.4, F)
    # rooms hanging off corridors, each with a doorway
    rooms = [
        (8.0, 9.0, 15.0, 16.0, (10.5, 6.4, 12.0, 9.0)),
        (21.0, 9.0, 28.0, 16.0, (23.5, 6.4, 25.0, 9.0)),
        (34.0, 9.0, 51.0, 16.0, (40.0, 6.4, 41.5, 9.0)),
        (8.0, 24.0, 15.0, 31.0, (10.5, 21.4, 12.0, 24.0)),
        (21.0, 24.0, 28.0, 31.0, (26.0, 31.0, 27.5, 34.0)),
        (46.0, 24.0, 52.0, 31.0, (48.5, 21.4, 50.0, 24.0)),
    ]
    for x0, y0, x1, y1, (dx0, dy0, dx1, dy1) in rooms:
        c.fill(x0, y0, x1, y1, F)
        c.fill(dx0, dy0, dx1, dy1, F)
    c.border()
    return World(res, c.cells, Point2(5.1, 5.1), "corridors")


BUILTIN_WORLDS = {
    "empty_room": empty_room,
    "corridors": corridors,
    "railing_pocket": railing_pocket,
    "narrow_gap": narrow_gap,
}


def builtin_worlds() -> dict[str, World]:
    return {name: make() for name, make in BUILTIN_WORLDS.items()}


def get_world(name_or_path: str) -> World:
    if name_or_path in BUILTIN_WORLDS:
        return BUILTIN_WORLDS[name_or_path]()
    return load_world(name_or_path)
