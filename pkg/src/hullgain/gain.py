"""Volumetric and exploration gains.

``graph_gain`` scores a viewpoint by the cells outside the expanded region
that it can reach through a passable stretch of the hull boundary.
``unknown_gains`` is the occupancy-map baseline. The exploration gains fold
volumetric gains along tree branches.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .geom import ConcaveHull, _segment_distances, rasterize_polygon
from .grid import OccupancyGrid, disc_cells, unknown_gain
from .rrg import Rrg


@dataclass
class GainParams:
    lambda1: float = 0.5  # per radian of branch-direction change
    lambda2: float = 0.25  # per metre of branch length
    lam: float = 0.25  # per metre, parent-recursive form
    gain_radius: float = 5.0
    edge_rule: str = "both"
    threshold: float = 5.0  # volumetric cells along the best branch
    formula: str = "dsvp"  # or "nbvp"

    def __post_init__(self):
        for k in ("lambda1", "lambda2", "lam", "threshold"):
            if not getattr(self, k) >= 0:
                raise ValueError(f"{k} must be >= 0")
        if not self.gain_radius > 0:
            raise ValueError("gain_radius must be positive")
        if self.edge_rule not in ("both", "any"):
            raise ValueError("edge_rule must be 'both' or 'any'")
        if self.formula not in ("dsvp", "nbvp"):
            raise ValueError("formula must be 'dsvp' or 'nbvp'")


@dataclass
class IntersectionStats:
    """Voxels judged outside the hull for which no edge crossing was found."""

    no_crossing: int = 0


# ---------------------------------------------------------------------------
# check intersection
# ---------------------------------------------------------------------------


def _xprod(ux, uy, wx, wy):
    return ux * wy - uy * wx


def _edge_ok(hull: ConcaveHull, k: int) -> bool:
    return hull.edge_passable[k]


def check_intersection(hull: ConcaveHull, node, voxel, stats: IntersectionStats | None = None) -> bool:
    """Is the voxel seen from ``node`` through a passable hull edge?

    Every edge is tested with strict orientation signs, so touching at an
    endpoint does not count as a crossing. Of the crossing edges, the one
    whose crossing point is closest to ``node`` decides (smaller edge index
    on exact ties).
    """
    verts = hull.vertices
    n = len(verts)
    lx, ly = float(node[0]), float(node[1])
    vx, vy = float(voxel[0]), float(voxel[1])
    best_s, best_k = math.inf, -1
    for k in range(n):
        ax, ay = verts[k]
        bx, by = verts[(k + 1) % n]
        ex, ey = ax - bx, ay - by
        d1 = _xprod(vx - bx, vy - by, ex, ey)
        d2 = _xprod(lx - bx, ly - by, ex, ey)
        if not d1 * d2 < 0:
            continue
        sx, sy = lx - vx, ly - vy
        d3 = _xprod(ax - vx, ay - vy, sx, sy)
        d4 = _xprod(bx - vx, by - vy, sx, sy)
        if not d3 * d4 < 0:
            continue
        s = d2 / (d2 - d1)  # fraction of the way from node to voxel
        if s < best_s:
            best_s, best_k = s, k
    if best_k < 0:
        if stats is not None:
            stats.no_crossing += 1
        return False
    return _edge_ok(hull, best_k)


def _crossings(ax, ay, bx, by, lx, ly, vx, vy):
    """Strict crossing mask and node-side crossing fraction, (M, E) each."""
    ex, ey = ax - bx, ay - by
    d1 = _xprod(vx[:, None] - bx[None, :], vy[:, None] - by[None, :], ex[None, :], ey[None, :])
    d2 = _xprod(lx - bx, ly - by, ex, ey)[None, :]
    sx, sy = lx - vx, ly - vy
    d3 = _xprod(ax[None, :] - vx[:, None], ay[None, :] - vy[:, None], sx[:, None], sy[:, None])
    d4 = _xprod(bx[None, :] - vx[:, None], by[None, :] - vy[:, None], sx[:, None], sy[:, None])
    crossing = (d1 * d2 < 0) & (d3 * d4 < 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(crossing, d2 / (d2 - d1), np.inf)
    return crossing, s


def _check_many(ax, ay, bx, by, passable, lx, ly, vx, vy):
    """Vectorised check_intersection: voxels (M,) against edges (E,).

    Returns (result per voxel, number of voxels with no crossing at all).
    """
    crossing, s = _crossings(ax, ay, bx, by, lx, ly, vx, vy)
    k = np.argmin(s, axis=1)
    found = crossing.any(axis=1)
    return found & passable[k], int(np.count_nonzero(~found))


def _count_passable(ax, ay, bx, by, passable, lx, ly, vx, vy) -> int:
    """Same count as ``_check_many(...)[0].sum()`` in two cheaper passes.

    Only voxels whose sight line crosses some passable edge can count; for
    those the impassable edges are checked for a nearer crossing (or an
    equally near one with a smaller edge index).
    """
    pe = np.nonzero(passable)[0]
    if not len(pe) or not len(vx):
        return 0
    cp, sp = _crossings(ax[pe], ay[pe], bx[pe], by[pe], lx, ly, vx, vy)
    hit = cp.any(axis=1)
    if not hit.any():
        return 0
    j = np.argmin(sp[hit], axis=1)
    s_best = sp[hit][np.arange(len(j)), j]
    k_best = pe[j]
    ie = np.nonzero(~passable)[0]
    if not len(ie):
        return int(len(j))
    vx, vy = vx[hit], vy[hit]
    ci, si = _crossings(ax[ie], ay[ie], bx[ie], by[ie], lx, ly, vx, vy)
    nearer = ci & (
        (si < s_best[:, None]) | ((si == s_best[:, None]) & (ie[None, :] < k_best[:, None]))
    )
    return int(len(j) - np.count_nonzero(nearer.any(axis=1)))


# ---------------------------------------------------------------------------
# volumetric gains
# ---------------------------------------------------------------------------


@dataclass
class HullIndex:
    """A hull prepared for repeated gain queries on one grid lattice."""

    hull: ConcaveHull
    grid: OccupancyGrid
    inside: np.ndarray  # (h, w) cell centre inside-or-on hull
    ax: np.ndarray
    ay: np.ndarray
    bx: np.ndarray
    by: np.ndarray
    passable: np.ndarray

    def __post_init__(self):
        self.a = np.column_stack([self.ax, self.ay])
        self.b = np.column_stack([self.bx, self.by])

    @classmethod
    def build(cls, hull: ConcaveHull, grid: OccupancyGrid) -> "HullIndex":
        v = hull.vertices
        w = np.roll(v, -1, axis=0)
        inside = rasterize_polygon(
            v, grid.origin[0], grid.origin[1], grid.width, grid.height, grid.resolution
        )
        return cls(
            hull, grid, inside, v[:, 0].copy(), v[:, 1].copy(), w[:, 0].copy(), w[:, 1].copy(),
            np.array(hull.edge_passable, dtype=bool),
        )

    def node_gain(self, node, radius: float, stats: IntersectionStats | None = None) -> int:
        if not self.passable.any():
            return 0
        pt = np.array([[float(node[0]), float(node[1])]])
        near = _segment_distances(pt, self.a, self.b)[0] <= radius + 1e-9
        # a crossing edge must lie within reach of the node
        if not (near & self.passable).any():
            return 0
        ix, iy = disc_cells(self.grid, node, radius)
        out = ~self.inside[iy, ix]
        if not out.any():
            return 0
        res = self.grid.resolution
        vx = self.grid.origin[0] + (ix[out] + 0.5) * res
        vy = self.grid.origin[1] + (iy[out] + 0.5) * res
        e = np.nonzero(near)[0]
        args = (self.ax[e], self.ay[e], self.bx[e], self.by[e], self.passable[e], pt[0, 0], pt[0, 1], vx, vy)
        if stats is None:
            return _count_passable(*args)
        ok, misses = _check_many(*args)
        stats.no_crossing += misses
        return int(np.count_nonzero(ok))


def graph_gain(
    hull: ConcaveHull,
    rrg: Rrg,
    params: GainParams,
    grid: OccupancyGrid,
    stats: IntersectionStats | None = None,
    store: bool = True,
) -> dict[int, int]:
    """Per-node count of lattice cells outside the hull, within
    ``gain_radius``, whose sight line leaves through a passable edge.

    ``grid`` supplies the cell lattice (resolution, origin, extent) only;
    its occupancy is not read.
    """
    if hull.edge_rule != params.edge_rule:
        hull = hull.with_rule(params.edge_rule)
    index = HullIndex.build(hull, grid)
    out = {}
    for i in sorted(rrg.nodes):
        g = index.node_gain(rrg.nodes[i].position, params.gain_radius, stats)
        out[i] = g
        if store:
            rrg.nodes[i].volumetric_gain = g
    return out


def unknown_gains(rrg: Rrg, grid: OccupancyGrid, params: GainParams, store: bool = True) -> dict[int, int]:
    out = {}
    for i in sorted(rrg.nodes):
        g = unknown_gain(grid, rrg.nodes[i].position, params.gain_radius)
        out[i] = g
        if store:
            rrg.nodes[i].volumetric_gain = g
    return out


# ---------------------------------------------------------------------------
# exploration gains
# ---------------------------------------------------------------------------


def _dist(p, q) -> float:
    return math.hypot(p[0] - q[0], p[1] - q[1])


def exploration_gain_nbvp(positions, vgains, lam: float) -> list[float]:
    """Parent-recursive gain for every node of one branch (root first)."""
    if len(positions) != len(vgains) or not len(positions):
        raise ValueError("branch needs matching, non-empty positions and gains")
    out = [float(vgains[0])]
    for k in range(1, len(positions)):
        out.append(out[-1] + vgains[k] * math.exp(-lam * _dist(positions[k - 1], positions[k])))
    return out


def branch_angle(root, tip, prev_dir) -> float:
    """Angle in [0, pi] between root->tip and ``prev_dir`` (0 if undefined)."""
    if prev_dir is None:
        return 0.0
    dx, dy = tip[0] - root[0], tip[1] - root[1]
    n = math.hypot(dx, dy)
    m = math.hypot(prev_dir[0], prev_dir[1])
    if n == 0.0 or m == 0.0:
        return 0.0
    c = (dx * prev_dir[0] + dy * prev_dir[1]) / (n * m)
    return math.acos(max(-1.0, min(1.0, c)))


def exploration_gain_dsvp(positions, vgains, prev_dir, lambda1: float, lambda2: float) -> float:
    """Direction-penalised, distance-discounted gain of a branch's tip."""
    if len(positions) != len(vgains) or not len(positions):
        raise ValueError("branch needs matching, non-empty positions and gains")
    total = 0.0
    travelled = 0.0
    for k in range(len(positions)):
        if k:
            travelled += _dist(positions[k - 1], positions[k])
        total += vgains[k] * math.exp(-lambda2 * travelled)
    sim = branch_angle(positions[0], positions[-1], prev_dir)
    return math.exp(-lambda1 * sim) * total


def coefficient_of_variation(values) -> float:
    """Population std over mean; 0 for an empty or all-zero field."""
    a = np.asarray(list(values), dtype=float)
    if a.size == 0:
        return 0.0
    m = a.mean()
    return 0.0 if m == 0 else float(a.std() / m)


@dataclass
class TreeGains:
    """Exploration gains for all nodes reachable from a source."""

    source: int
    dist: dict[int, float]
    parent: dict[int, int | None]
    exploration: dict[int, float]
    branch_volume: dict[int, float]  # plain sum of volumetric gains along the branch


def tree_gains(rrg: Rrg, source: int, params: GainParams, prev_dir=None) -> TreeGains:
    """Evaluate the chosen exploration gain at every node in one pass over
    the shortest-path tree rooted at ``source``; results are stored on the
    nodes (unreachable nodes get 0)."""
    dist, parent = rrg.shortest_paths(source)
    order = sorted(dist, key=lambda i: (dist[i], i))
    vol = {i: float(rrg.nodes[i].volumetric_gain) for i in order}
    acc: dict[int, float] = {}
    bvol: dict[int, float] = {}
    root_pos = rrg.nodes[source].position
    for i in order:
        p = parent[i]
        if p is None:
            acc[i] = vol[i]
            bvol[i] = vol[i]
            continue
        bvol[i] = bvol[p] + vol[i]
        if params.formula == "nbvp":
            acc[i] = acc[p] + vol[i] * math.exp(-params.lam * (dist[i] - dist[p]))
        else:
            acc[i] = acc[p] + vol[i] * math.exp(-params.lambda2 * dist[i])
    expl = {}
    for i in order:
        if params.formula == "nbvp":
            expl[i] = acc[i]
        else:
            sim = branch_angle(root_pos, rrg.nodes[i].position, prev_dir)
            expl[i] = math.exp(-params.lambda1 * sim) * acc[i]
    for i, n in rrg.nodes.items():
        n.exploration_gain = expl.get(i, 0.0)
    return TreeGains(source, dist, parent, expl, bvol)


def select_best(rrg: Rrg, tg: TreeGains, threshold: float) -> int | None:
    """Unvisited reachable node with the highest exploration gain.

    Ties go to the shorter path, then the smaller id. ``None`` means the
    local stage is exhausted: no branch carries ``threshold`` volumetric
    cells.
    """
    best = None
    key = None
    for i, e in tg.exploration.items():
        n = rrg.nodes[i]
        if n.visited or i == tg.source or tg.branch_volume[i] < threshold:
            continue
        k = (-e, tg.dist[i], i)
        if key is None or k < key:
            best, key = i, k
    return best


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------


@dataclass
class GainReport:
    rows: list[tuple[int, float, float, int, int, float]] = field(default_factory=list)
    hull_build: float = 0.0
    gain_update: float = 0.0
    baseline: float = 0.0

    COLUMNS = ("node_id", "x", "y", "unknown_gain", "graph_gain", "exploration_gain")

    def __post_init__(self):
        if min(self.hull_build, self.gain_update, self.baseline) < 0:
            raise ValueError("timings must be >= 0")

    @classmethod
    def from_graph(cls, rrg: Rrg, unknown: dict[int, int], graph: dict[int, int], **timings) -> "GainReport":
        rows = [
            (i, n.position.x, n.position.y, int(unknown.get(i, 0)), int(graph.get(i, 0)), n.exploration_gain)
            for i, n in sorted(rrg.nodes.items())
        ]
        return cls(rows, **timings)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.COLUMNS)
        for r in self.rows:
            w.writerow([r[0], repr(r[1]), repr(r[2]), r[3], r[4], repr(r[5])])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, timings: dict | None = None) -> "GainReport":
        rd = csv.reader(io.StringIO(text))
        head = next(rd)
        if tuple(head) != cls.COLUMNS:
            raise ValueError(f"unexpected header {head}")
        rows = [(int(a), float(b), float(c), int(d), int(e), float(f)) for a, b, c, d, e, f in rd]
        return cls(rows, **(timings or {}))

    def timings(self) -> dict[str, float]:
        return {"hull_build": self.hull_build, "gain_update": self.gain_update, "baseline": self.baseline}

    def timings_json(self) -> str:
        return json.dumps(self.timings(), sort_keys=True)


class Stopwatch:
    def __init__(self):
        self.elapsed = 0.0

    def __enter__(self):
        self._t = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed += time.perf_counter() - self._t
