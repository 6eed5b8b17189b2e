"""2D occupancy grid with exact cell traversal.

Cells are addressed as ``(ix, iy)``; the backing array is ``cells[iy, ix]``.
The scalar :func:`raycast` and the batched :func:`traverse_batch` run the same
float arithmetic, so vectorised line-of-sight queries agree bit for bit with
the scalar ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .geom import Point2


class Cell(IntEnum):
    UNKNOWN = 0
    FREE = 1
    OCCUPIED = 2


ASCII_CHARS = {Cell.UNKNOWN: "?", Cell.FREE: ".", Cell.OCCUPIED: "#"}


class OutOfBounds(ValueError):
    pass


@dataclass
class OccupancyGrid:
    resolution: float
    width: int
    height: int
    origin: Point2 = Point2(0.0, 0.0)
    cells: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")
        if self.cells is None:
            self.cells = np.full((self.height, self.width), Cell.UNKNOWN, dtype=np.uint8)
        elif self.cells.shape != (self.height, self.width):
            raise ValueError("cells shape does not match width/height")

    # -- coordinates -------------------------------------------------------

    @property
    def extent(self) -> tuple[float, float, float, float]:
        ox, oy = self.origin
        return ox, oy, ox + self.width * self.resolution, oy + self.height * self.resolution

    def in_bounds(self, p) -> bool:
        gx = (p[0] - self.origin[0]) / self.resolution
        gy = (p[1] - self.origin[1]) / self.resolution
        return 0.0 <= gx < self.width and 0.0 <= gy < self.height

    def cell_of(self, p) -> tuple[int, int]:
        if not self.in_bounds(p):
            raise OutOfBounds(f"point {tuple(p)} outside grid")
        return (
            math.floor((p[0] - self.origin[0]) / self.resolution),
            math.floor((p[1] - self.origin[1]) / self.resolution),
        )

    def cell_center(self, ix: int, iy: int) -> Point2:
        return Point2(
            self.origin[0] + (ix + 0.5) * self.resolution,
            self.origin[1] + (iy + 0.5) * self.resolution,
        )

    def status(self, ix: int, iy: int) -> Cell:
        return Cell(self.cells[iy, ix])

    def status_at(self, p) -> Cell:
        ix, iy = self.cell_of(p)
        return Cell(self.cells[iy, ix])

    def count(self, state: Cell) -> int:
        return int(np.count_nonzero(self.cells == state))

    def copy(self) -> "OccupancyGrid":
        return OccupancyGrid(self.resolution, self.width, self.height, self.origin, self.cells.copy())

    # -- updates (knowledge is monotone) -----------------------------------

    def mark_free(self, ix, iy) -> None:
        ix = np.asarray(ix, dtype=int)
        iy = np.asarray(iy, dtype=int)
        sel = self.cells[iy, ix] == Cell.UNKNOWN
        self.cells[iy[sel], ix[sel]] = Cell.FREE

    def mark_occupied(self, ix, iy) -> None:
        self.cells[np.asarray(iy, dtype=int), np.asarray(ix, dtype=int)] = Cell.OCCUPIED

    # -- ascii dump --------------------------------------------------------

    def to_ascii(self) -> str:
        """One line per row, top row first."""
        lut = np.array(["?", ".", "#"])
        rows = lut[self.cells[::-1]]
        return "\n".join("".join(r) for r in rows) + "\n"

    @classmethod
    def from_ascii(cls, text: str, resolution: float, origin=(0.0, 0.0)) -> "OccupancyGrid":
        lines = [ln for ln in text.splitlines() if ln]
        h, w = len(lines), len(lines[0])
        inv = {"?": Cell.UNKNOWN, ".": Cell.FREE, "#": Cell.OCCUPIED}
        cells = np.empty((h, w), dtype=np.uint8)
        for r, ln in enumerate(lines):
            if len(ln) != w:
                raise ValueError("ragged grid dump")
            cells[h - 1 - r] = [inv[ch] for ch in ln]
        return cls(resolution, w, h, Point2(*origin), cells)


# ---------------------------------------------------------------------------
# traversal
# ---------------------------------------------------------------------------


def _setup(grid: OccupancyGrid, a, b):
    res = grid.resolution
    ox, oy = grid.origin
    gx0 = (a[0] - ox) / res
    gy0 = (a[1] - oy) / res
    gx1 = (b[0] - ox) / res
    gy1 = (b[1] - oy) / res
    return gx0, gy0, gx1, gy1


def raycast(grid: OccupancyGrid, a, b, with_t: bool = False):
    """Cells crossed by segment ab, in order, both end cells included.

    Amanatides-Woo traversal. Exactly ``|dix| + |diy|`` steps are taken, so
    the walk always ends in b's cell. When the segment passes exactly through
    a cell corner the y step is taken first.

    With ``with_t`` each entry is ``((ix, iy), t)`` where ``t`` in [0, 1] is
    where the segment enters the cell.
    """
    if not grid.in_bounds(a) or not grid.in_bounds(b):
        raise OutOfBounds(f"segment {tuple(a)}-{tuple(b)} leaves the grid")
    gx0, gy0, gx1, gy1 = _setup(grid, a, b)
    ix, iy = math.floor(gx0), math.floor(gy0)
    ix1, iy1 = math.floor(gx1), math.floor(gy1)
    dx, dy = gx1 - gx0, gy1 - gy0
    sx = 1 if dx > 0 else -1
    sy = 1 if dy > 0 else -1
    tdx = 1.0 / abs(dx) if dx != 0 else math.inf
    tdy = 1.0 / abs(dy) if dy != 0 else math.inf
    if dx > 0:
        tmx = ((ix + 1) - gx0) / dx
    elif dx < 0:
        tmx = (gx0 - ix) / -dx
    else:
        tmx = math.inf
    if dy > 0:
        tmy = ((iy + 1) - gy0) / dy
    elif dy < 0:
        tmy = (gy0 - iy) / -dy
    else:
        tmy = math.inf

    out = [((ix, iy), 0.0)] if with_t else [(ix, iy)]
    for _ in range(abs(ix1 - ix) + abs(iy1 - iy)):
        if ix != ix1 and (iy == iy1 or tmx < tmy):
            t = tmx
            ix += sx
            tmx += tdx
        else:
            t = tmy
            iy += sy
            tmy += tdy
        out.append(((ix, iy), t) if with_t else (ix, iy))
    return out


def traverse_batch(grid: OccupancyGrid, a, b):
    """Vectorised :func:`raycast` from one or many starts to many ends.

    Returns ``(ix, iy, t, valid)``, each shaped (M, S): row ``m`` lists the
    cells of segment ``m`` in order, padded past its end (``valid`` False).
    No bounds checking; callers keep segments inside the grid.
    """
    b = np.asarray(b, dtype=float).reshape(-1, 2)
    a = np.broadcast_to(np.asarray(a, dtype=float).reshape(-1, 2), b.shape)
    res = grid.resolution
    ox, oy = grid.origin
    gx0 = (a[:, 0] - ox) / res
    gy0 = (a[:, 1] - oy) / res
    gx1 = (b[:, 0] - ox) / res
    gy1 = (b[:, 1] - oy) / res
    ix = np.floor(gx0).astype(np.int64)
    iy = np.floor(gy0).astype(np.int64)
    ix1 = np.floor(gx1).astype(np.int64)
    iy1 = np.floor(gy1).astype(np.int64)
    dx = gx1 - gx0
    dy = gy1 - gy0
    sx = np.where(dx > 0, 1, -1)
    sy = np.where(dy > 0, 1, -1)
    with np.errstate(divide="ignore", invalid="ignore"):
        tdx = np.where(dx != 0, 1.0 / np.abs(dx), np.inf)
        tdy = np.where(dy != 0, 1.0 / np.abs(dy), np.inf)
        tmx = np.where(dx > 0, ((ix + 1) - gx0) / dx, np.where(dx < 0, (gx0 - ix) / -dx, np.inf))
        tmy = np.where(dy > 0, ((iy + 1) - gy0) / dy, np.where(dy < 0, (gy0 - iy) / -dy, np.inf))
    nsteps = np.abs(ix1 - ix) + np.abs(iy1 - iy)
    S = int(nsteps.max(initial=0)) + 1
    M = len(b)
    IX = np.empty((M, S), dtype=np.int64)
    IY = np.empty((M, S), dtype=np.int64)
    T = np.empty((M, S), dtype=float)
    IX[:, 0] = ix
    IY[:, 0] = iy
    T[:, 0] = 0.0
    for s in range(1, S):
        stepx = (ix != ix1) & ((iy == iy1) | (tmx < tmy))
        T[:, s] = np.where(stepx, tmx, tmy)
        ix = np.where(stepx, ix + sx, ix)
        tmx = np.where(stepx, tmx + tdx, tmx)
        stepy = ~stepx
        iy = np.where(stepy, iy + sy, iy)
        tmy = np.where(stepy, tmy + tdy, tmy)
        IX[:, s] = ix
        IY[:, s] = iy
    valid = np.arange(S)[None, :] <= nsteps[:, None]
    # freeze padded entries on the last real cell so they stay in range
    last = nsteps
    rows = np.arange(M)
    IX = np.where(valid, IX, IX[rows, last][:, None])
    IY = np.where(valid, IY, IY[rows, last][:, None])
    return IX, IY, T, valid


def is_line_free(grid: OccupancyGrid, a, b) -> bool:
    """No cell crossed by ab is Occupied."""
    cells = grid.cells
    for ix, iy in raycast(grid, a, b):
        if cells[iy, ix] == Cell.OCCUPIED:
            return False
    return True


def lines_free(grid: OccupancyGrid, a, b) -> np.ndarray:
    """Vectorised :func:`is_line_free` for segments a[m]-b[m] (a may be one point)."""
    b = np.asarray(b, dtype=float).reshape(-1, 2)
    if len(b) == 0:
        return np.zeros(0, dtype=bool)
    IX, IY, _, valid = traverse_batch(grid, a, b)
    occ = grid.cells[IY, IX] == Cell.OCCUPIED
    return ~(occ & valid).any(axis=1)


def lines_all_free(grid: OccupancyGrid, a, b) -> np.ndarray:
    """Every cell crossed by a[m]-b[m] is known Free (stricter than
    :func:`lines_free`, which only rules out Occupied cells)."""
    b = np.asarray(b, dtype=float).reshape(-1, 2)
    if len(b) == 0:
        return np.zeros(0, dtype=bool)
    IX, IY, _, valid = traverse_batch(grid, a, b)
    bad = grid.cells[IY, IX] != Cell.FREE
    return ~(bad & valid).any(axis=1)


def first_blocker(grid: OccupancyGrid, a, b) -> Cell:
    """State of the first non-Free cell crossed by ab, or FREE if none."""
    cells = grid.cells
    for ix, iy in raycast(grid, a, b):
        s = cells[iy, ix]
        if s != Cell.FREE:
            return Cell(s)
    return Cell.FREE


def integrate_scan(grid: OccupancyGrid, pose, scan) -> OccupancyGrid:
    """Fold one sensor scan into the map in place and return the grid.

    Cells a beam passed through become Free (only if still Unknown); every
    hit cell becomes Occupied. Penetrable hits do not end a beam, so cells
    behind them get updated too.
    """
    if not grid.in_bounds(pose):
        raise OutOfBounds(f"pose {tuple(pose)} outside grid")
    passed = np.asarray(scan.passed, dtype=int).reshape(-1, 2)
    if len(passed):
        grid.mark_free(passed[:, 0], passed[:, 1])
    hits = scan.hit_cells()
    if len(hits):
        grid.mark_occupied(hits[:, 0], hits[:, 1])
    return grid


# ---------------------------------------------------------------------------
# unknown gain
# ---------------------------------------------------------------------------


def disc_cells(grid: OccupancyGrid, node, radius: float) -> tuple[np.ndarray, np.ndarray]:
    """Indices (ix, iy) of cells whose centre lies within ``radius`` of node."""
    res = grid.resolution
    ox, oy = grid.origin
    cx0 = max(0, math.floor((node[0] - radius - ox) / res - 0.5))
    cx1 = min(grid.width - 1, math.ceil((node[0] + radius - ox) / res - 0.5))
    cy0 = max(0, math.floor((node[1] - radius - oy) / res - 0.5))
    cy1 = min(grid.height - 1, math.ceil((node[1] + radius - oy) / res - 0.5))
    if cx0 > cx1 or cy0 > cy1:
        return np.zeros(0, dtype=int), np.zeros(0, dtype=int)
    xs = np.arange(cx0, cx1 + 1)
    ys = np.arange(cy0, cy1 + 1)
    gx, gy = np.meshgrid(xs, ys)
    px = ox + (gx + 0.5) * res - node[0]
    py = oy + (gy + 0.5) * res - node[1]
    sel = px * px + py * py <= radius * radius
    return gx[sel], gy[sel]


def unknown_gain(grid: OccupancyGrid, node, gain_radius: float) -> int:
    """Unknown cells within ``gain_radius`` of node with a clear line of sight.

    This is the occupancy-map volumetric gain used as the baseline.
    """
    if gain_radius <= 0:
        raise ValueError("gain_radius must be positive")
    if not grid.in_bounds(node):
        raise OutOfBounds(f"node {tuple(node)} outside grid")
    ix, iy = disc_cells(grid, node, gain_radius)
    sel = grid.cells[iy, ix] == Cell.UNKNOWN
    if not sel.any():
        return 0
    ix, iy = ix[sel], iy[sel]
    res = grid.resolution
    centers = np.column_stack(
        [grid.origin[0] + (ix + 0.5) * res, grid.origin[1] + (iy + 0.5) * res]
    )
    return int(np.count_nonzero(lines_free(grid, node, centers)))
