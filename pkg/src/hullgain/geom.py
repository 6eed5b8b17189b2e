"""Planar geometry kernel: predicates, Delaunay triangulation, concave hulls.

Everything here is a pure function of its inputs. Points are plain ``(x, y)``
tuples (``Point2`` is a NamedTuple, so it is accepted wherever a tuple is).
"""

from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterable, NamedTuple, Sequence

import numpy as np
from scipy.spatial import cKDTree

log = logging.getLogger(__name__)

EPS_GEOM = 1e-9  # m, coincidence / collinearity
EPS_CIRC = 1e-9  # m^2, circumcircle tests

GHOST = -1  # vertex at infinity closing the triangulation


class Point2(NamedTuple):
    x: float
    y: float


class Label(IntEnum):
    SUCCESSFUL = 0
    OCCUPIED = 1
    UNKNOWN = 2
    BEYOND_WINDOW = 3

    @property
    def passable(self) -> bool:
        return self in (Label.SUCCESSFUL, Label.UNKNOWN)


# Higher wins when nodes are merged.
LABEL_PRIORITY = {
    Label.OCCUPIED: 3,
    Label.SUCCESSFUL: 2,
    Label.UNKNOWN: 1,
    Label.BEYOND_WINDOW: 0,
}


class LabeledNode(NamedTuple):
    position: Point2
    label: Label


class GeometryError(ValueError):
    """Raised on degenerate geometric input."""


def as_point(p: Sequence[float]) -> Point2:
    x, y = float(p[0]), float(p[1])
    if not (math.isfinite(x) and math.isfinite(y)):
        raise GeometryError(f"non-finite point {p!r}")
    return Point2(x, y)


def stronger(a: Label, b: Label) -> Label:
    return a if LABEL_PRIORITY[a] >= LABEL_PRIORITY[b] else b


# ---------------------------------------------------------------------------
# predicates
# ---------------------------------------------------------------------------


def cross(o, a, b) -> float:
    """Signed area (a - o) x (b - o); positive for a counter-clockwise turn."""
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _on_segment(p, a, b) -> bool:
    # p assumed collinear with ab
    return (
        min(a[0], b[0]) - EPS_GEOM <= p[0] <= max(a[0], b[0]) + EPS_GEOM
        and min(a[1], b[1]) - EPS_GEOM <= p[1] <= max(a[1], b[1]) + EPS_GEOM
    )


def _near_zero(c: float, a, b) -> bool:
    # |cross| / |ab| is the distance of the third point from line ab
    return abs(c) <= EPS_GEOM * math.hypot(b[0] - a[0], b[1] - a[1])


def segments_intersect(a, b, c, d, strict: bool = False) -> bool:
    """Do segments AB and CD intersect?

    With ``strict=False`` the segments are closed: touching endpoints and
    collinear overlap count. ``strict=True`` is the bare double sign test used
    by the hull-crossing check, where both products must be negative, so
    touching or collinear configurations do not count.
    """
    if a[0] == b[0] and a[1] == b[1]:
        raise GeometryError("segment AB has zero length")
    if c[0] == d[0] and c[1] == d[1]:
        raise GeometryError("segment CD has zero length")

    d1 = cross(c, d, a)
    d2 = cross(c, d, b)
    d3 = cross(a, b, c)
    d4 = cross(a, b, d)
    if strict:
        return d1 * d2 < 0 and d3 * d4 < 0

    z1, z2 = _near_zero(d1, c, d), _near_zero(d2, c, d)
    z3, z4 = _near_zero(d3, a, b), _near_zero(d4, a, b)
    if not (z1 or z2 or z3 or z4):
        return (d1 > 0) != (d2 > 0) and (d3 > 0) != (d4 > 0)
    if z1 and _on_segment(a, c, d):
        return True
    if z2 and _on_segment(b, c, d):
        return True
    if z3 and _on_segment(c, a, b):
        return True
    if z4 and _on_segment(d, a, b):
        return True
    if (z1 or z2) and (z3 or z4):
        return False
    # one endpoint grazes the other's line outside the segment
    s1 = 0 if z1 else (1 if d1 > 0 else -1)
    s2 = 0 if z2 else (1 if d2 > 0 else -1)
    s3 = 0 if z3 else (1 if d3 > 0 else -1)
    s4 = 0 if z4 else (1 if d4 > 0 else -1)
    return s1 * s2 < 0 and s3 * s4 < 0


def point_segment_distance(p, a, b) -> float:
    vx, vy = b[0] - a[0], b[1] - a[1]
    wx, wy = p[0] - a[0], p[1] - a[1]
    vv = vx * vx + vy * vy
    t = 0.0 if vv == 0.0 else max(0.0, min(1.0, (wx * vx + wy * vy) / vv))
    return math.hypot(wx - t * vx, wy - t * vy)


def _polygon_vertices(poly) -> list:
    if isinstance(poly, ConcaveHull):
        return [n.position for n in poly.boundary]
    return [(float(v[0]), float(v[1])) for v in poly]


def point_in_polygon(p, poly) -> bool:
    """PNPOLY even-odd test.

    ``poly`` is a :class:`ConcaveHull` or a vertex sequence. Points within
    ``EPS_GEOM`` of an edge count as inside.
    """
    verts = _polygon_vertices(poly)
    n = len(verts)
    if n < 3:
        raise GeometryError("polygon needs at least 3 vertices")
    px, py = p[0], p[1]
    j = n - 1
    for i in range(n):
        if point_segment_distance((px, py), verts[j], verts[i]) <= EPS_GEOM:
            return True
        j = i
    inside = False
    j = n - 1
    for i in range(n):
        xi, yi = verts[i]
        xj, yj = verts[j]
        if (yi > py) != (yj > py) and px < (xj - xi) * (py - yi) / (yj - yi) + xi:
            inside = not inside
        j = i
    return inside


def _segment_distances(pts: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distances from every point (M,2) to every segment (E,2)-(E,2) -> (M,E)."""
    v = b - a
    vv = np.einsum("ij,ij->i", v, v)
    vv = np.where(vv == 0.0, 1.0, vv)
    wx = pts[:, None, 0] - a[None, :, 0]
    wy = pts[:, None, 1] - a[None, :, 1]
    t = np.clip((wx * v[None, :, 0] + wy * v[None, :, 1]) / vv[None, :], 0.0, 1.0)
    return np.hypot(wx - t * v[None, :, 0], wy - t * v[None, :, 1])


def points_in_polygon(points, poly, chunk: int = 4096) -> np.ndarray:
    """Vectorised :func:`point_in_polygon` over an (M, 2) array."""
    verts = np.asarray(_polygon_vertices(poly), dtype=float)
    if len(verts) < 3:
        raise GeometryError("polygon needs at least 3 vertices")
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    vi = verts
    vj = np.roll(verts, 1, axis=0)
    out = np.empty(len(pts), dtype=bool)
    for s in range(0, len(pts), chunk):
        q = pts[s : s + chunk]
        px = q[:, 0:1]
        py = q[:, 1:2]
        straddle = (vi[None, :, 1] > py) != (vj[None, :, 1] > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = (vj[None, :, 0] - vi[None, :, 0]) * (py - vi[None, :, 1]) / (
                vj[None, :, 1] - vi[None, :, 1]
            ) + vi[None, :, 0]
        hit = straddle & (px < xint)
        inside = (np.count_nonzero(hit, axis=1) % 2) == 1
        near = (_segment_distances(q, vj, vi) <= EPS_GEOM).any(axis=1)
        out[s : s + chunk] = inside | near
    return out


def rasterize_polygon(poly, x0: float, y0: float, nx: int, ny: int, res: float) -> np.ndarray:
    """Inside mask for the lattice of cell centres ``x0 + (i + .5) res``.

    Returns a (ny, nx) boolean array identical to calling
    :func:`point_in_polygon` on every centre, computed row by row: the
    crossing abscissae of a row are sorted once and every centre counts the
    crossings to its right with a binary search.
    """
    verts = np.asarray(_polygon_vertices(poly), dtype=float)
    if len(verts) < 3:
        raise GeometryError("polygon needs at least 3 vertices")
    mask = np.zeros((ny, nx), dtype=bool)
    if nx <= 0 or ny <= 0:
        return mask
    xs = x0 + (np.arange(nx) + 0.5) * res
    ys = y0 + (np.arange(ny) + 0.5) * res
    vi = verts
    vj = np.roll(verts, 1, axis=0)
    xi, yi = vi[:, 0], vi[:, 1]
    xj, yj = vj[:, 0], vj[:, 1]

    ylo = np.minimum(yi, yj)
    yhi = np.maximum(yi, yj)
    r0 = max(0, int(np.floor((ylo.min() - y0) / res - 0.5)))
    r1 = min(ny - 1, int(np.ceil((yhi.max() - y0) / res - 0.5)))
    for r in range(r0, r1 + 1):
        py = ys[r]
        straddle = (yi > py) != (yj > py)
        if not straddle.any():
            continue
        e = np.nonzero(straddle)[0]
        xint = np.sort((xj[e] - xi[e]) * (py - yi[e]) / (yj[e] - yi[e]) + xi[e])
        # crossings strictly right of px: len - bisect_right(px)
        right = len(xint) - np.searchsorted(xint, xs, side="right")
        mask[r] = (right % 2) == 1

    # boundary band
    for k in range(len(vi)):
        a, b = vj[k], vi[k]
        c0 = max(0, int(np.ceil((min(a[0], b[0]) - EPS_GEOM - x0) / res - 0.5)))
        c1 = min(nx - 1, int(np.floor((max(a[0], b[0]) + EPS_GEOM - x0) / res - 0.5)))
        q0 = max(0, int(np.ceil((min(a[1], b[1]) - EPS_GEOM - y0) / res - 0.5)))
        q1 = min(ny - 1, int(np.floor((max(a[1], b[1]) + EPS_GEOM - y0) / res - 0.5)))
        if c0 > c1 or q0 > q1:
            continue
        gx, gy = np.meshgrid(xs[c0 : c1 + 1], ys[q0 : q1 + 1])
        pts = np.column_stack([gx.ravel(), gy.ravel()])
        d = _segment_distances(pts, a[None, :], b[None, :])[:, 0]
        near = (d <= EPS_GEOM).reshape(gx.shape)
        mask[q0 : q1 + 1, c0 : c1 + 1] |= near
    return mask


# ---------------------------------------------------------------------------
# Delaunay triangulation (Bowyer-Watson with a ghost vertex)
# ---------------------------------------------------------------------------


@dataclass
class Triangulation:
    vertices: np.ndarray  # (n, 2), deduplicated
    triangles: list[tuple[int, int, int]]  # counter-clockwise
    exterior_edges: list[tuple[int, int]]  # oriented as in their triangle
    source_index: np.ndarray  # input index -> vertex index


def _incircle(a, b, c, p) -> float:
    adx, ady = a[0] - p[0], a[1] - p[1]
    bdx, bdy = b[0] - p[0], b[1] - p[1]
    cdx, cdy = c[0] - p[0], c[1] - p[1]
    return (
        (adx * adx + ady * ady) * (bdx * cdy - cdx * bdy)
        + (bdx * bdx + bdy * bdy) * (cdx * ady - adx * cdy)
        + (cdx * cdx + cdy * cdy) * (adx * bdy - bdx * ady)
    )


def dedupe_points(points: np.ndarray, eps: float = EPS_GEOM) -> tuple[np.ndarray, np.ndarray]:
    """Merge points closer than ``eps``; first occurrence is kept.

    Returns (kept input indices, map from every input index to its kept slot).
    """
    n = len(points)
    parent = np.arange(n)
    if n > 1:
        pairs = cKDTree(points).query_pairs(eps, output_type="ndarray")
        if len(pairs):
            # union-find, representative = smallest index
            def find(i):
                while parent[i] != i:
                    parent[i] = parent[parent[i]]
                    i = parent[i]
                return i

            for i, j in pairs:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)
            for i in range(n):
                parent[i] = find(i)
    keep = np.nonzero(parent == np.arange(n))[0]
    slot = np.empty(n, dtype=int)
    slot[keep] = np.arange(len(keep))
    slot = slot[parent]
    return keep, slot


class _BowyerWatson:
    """Incremental triangulation. Ghost triangles ``(a, b, GHOST)`` cover the
    outside of each hull edge so points outside the current hull need no
    super-triangle."""

    def __init__(self, pts: list[tuple[float, float]]):
        self.pts = pts
        self.tris: dict[int, tuple[int, int, int]] = {}
        self.owner: dict[tuple[int, int], int] = {}
        self.next_id = 0
        self.last = -1

    def _add(self, a: int, b: int, c: int) -> int:
        if a == GHOST:
            a, b, c = b, c, a
        elif b == GHOST:
            a, b, c = c, a, b
        t = self.next_id
        self.next_id += 1
        self.tris[t] = (a, b, c)
        self.owner[(a, b)] = t
        self.owner[(b, c)] = t
        self.owner[(c, a)] = t
        if c != GHOST:
            self.last = t
        return t

    def _remove(self, t: int) -> None:
        a, b, c = self.tris.pop(t)
        for e in ((a, b), (b, c), (c, a)):
            if self.owner.get(e) == t:
                del self.owner[e]

    def _conflict(self, t: int, p) -> bool:
        a, b, c = self.tris[t]
        pts = self.pts
        if c == GHOST:
            o = cross(pts[a], pts[b], p)
            if o > 0:
                return True
            if o < 0:
                return False
            pa, pb = pts[a], pts[b]
            return (p[0] - pa[0]) * (p[0] - pb[0]) + (p[1] - pa[1]) * (p[1] - pb[1]) < 0
        return _incircle(pts[a], pts[b], pts[c], p) > 0

    def _locate(self, p) -> int:
        pts = self.pts
        t = self.last
        if t not in self.tris:
            t = next(k for k, v in self.tris.items() if v[2] != GHOST)
        rot = 0
        for _ in range(4 * len(self.tris) + 16):
            a, b, c = self.tris[t]
            moved = False
            edges = ((a, b), (b, c), (c, a))
            for k in range(3):
                u, v = edges[(k + rot) % 3]
                if cross(pts[u], pts[v], p) < 0:
                    nt = self.owner[(v, u)]
                    if self.tris[nt][2] == GHOST:
                        return nt
                    t = nt
                    moved = True
                    break
            rot += 1
            if not moved:
                if self._conflict(t, p):
                    return t
                break
        for k in self.tris:  # pragma: no cover - numerical fallback
            if self._conflict(k, p):
                return k
        raise GeometryError("point location failed")

    def start(self, i: int, j: int, k: int) -> None:
        pts = self.pts
        if cross(pts[i], pts[j], pts[k]) < 0:
            j, k = k, j
        self._add(i, j, k)
        self._add(j, i, GHOST)
        self._add(k, j, GHOST)
        self._add(i, k, GHOST)

    def insert(self, pi: int) -> None:
        p = self.pts[pi]
        seed = self._locate(p)
        cavity = {seed}
        seen = {seed: True}
        stack = [seed]
        rim: list[tuple[int, int]] = []
        while stack:
            t = stack.pop()
            a, b, c = self.tris[t]
            for u, v in ((a, b), (b, c), (c, a)):
                nt = self.owner[(v, u)]
                inside = seen.get(nt)
                if inside is None:
                    inside = self._conflict(nt, p)
                    seen[nt] = inside
                    if inside:
                        cavity.add(nt)
                        stack.append(nt)
                if not inside:
                    rim.append((u, v))
        for t in cavity:
            self._remove(t)
        for u, v in rim:
            self._add(u, v, pi)


def delaunay(points) -> Triangulation:
    """Delaunay triangulation of a planar point set.

    Points closer than ``EPS_GEOM`` are merged first. Raises
    :class:`GeometryError` for fewer than three distinct points or a
    collinear set.
    """
    raw = np.asarray(points, dtype=float).reshape(-1, 2)
    if not np.isfinite(raw).all():
        raise GeometryError("non-finite coordinates")
    keep, slot = dedupe_points(raw)
    verts = raw[keep]
    n = len(verts)
    if n < 3:
        raise GeometryError(f"need at least 3 distinct points, got {n}")
    pts = [(float(x), float(y)) for x, y in verts]

    # well-conditioned seed triangle
    i0 = 0
    d2 = (verts[:, 0] - verts[0, 0]) ** 2 + (verts[:, 1] - verts[0, 1]) ** 2
    i1 = int(np.argmax(d2))
    area = np.abs(
        (verts[i1, 0] - verts[i0, 0]) * (verts[:, 1] - verts[i0, 1])
        - (verts[i1, 1] - verts[i0, 1]) * (verts[:, 0] - verts[i0, 0])
    )
    i2 = int(np.argmax(area))
    if area[i2] <= EPS_GEOM * math.sqrt(d2[i1]):
        raise GeometryError("points are collinear")

    bw = _BowyerWatson(pts)
    bw.start(i0, i1, i2)
    for i in range(n):
        if i not in (i0, i1, i2):
            bw.insert(i)

    triangles = []
    exterior = []
    for a, b, c in bw.tris.values():
        if c == GHOST:
            exterior.append((b, a))
        else:
            triangles.append((a, b, c))
    return Triangulation(verts, triangles, exterior, slot)


# ---------------------------------------------------------------------------
# concave hull
# ---------------------------------------------------------------------------


@dataclass
class ConcaveHull:
    boundary: list[LabeledNode]  # closed, counter-clockwise
    edge_rule: str = "both"
    filter_warning: bool = False
    blocked_edges: int = 0  # edges longer than R kept by the regularity rule
    _passable: list[bool] | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.edge_rule not in ("both", "any"):
            raise ValueError(f"edge_rule must be 'both' or 'any', not {self.edge_rule!r}")

    def __len__(self) -> int:
        return len(self.boundary)

    @property
    def vertices(self) -> np.ndarray:
        return np.array([n.position for n in self.boundary], dtype=float).reshape(-1, 2)

    @property
    def labels(self) -> list[Label]:
        return [n.label for n in self.boundary]

    @property
    def edge_passable(self) -> list[bool]:
        """Edge ``i`` joins ``boundary[i]`` and ``boundary[i + 1]``."""
        if self._passable is None:
            lab = [n.label.passable for n in self.boundary]
            n = len(lab)
            if self.edge_rule == "both":
                self._passable = [lab[i] and lab[(i + 1) % n] for i in range(n)]
            else:
                self._passable = [lab[i] or lab[(i + 1) % n] for i in range(n)]
        return self._passable

    def edge_lengths(self) -> np.ndarray:
        v = self.vertices
        return np.hypot(*(np.roll(v, -1, axis=0) - v).T)

    def with_rule(self, edge_rule: str) -> "ConcaveHull":
        return ConcaveHull(list(self.boundary), edge_rule, self.filter_warning, self.blocked_edges)


def merge_nodes(nodes: Iterable[LabeledNode]) -> list[LabeledNode]:
    """Merge nodes closer than ``EPS_GEOM``, keeping the strongest label."""
    nodes = list(nodes)
    if not nodes:
        return []
    pos = np.array([n.position for n in nodes], dtype=float).reshape(-1, 2)
    keep, slot = dedupe_points(pos)
    labels = [nodes[k].label for k in keep]
    for i, s in enumerate(slot):
        labels[s] = stronger(labels[s], nodes[i].label)
    return [LabeledNode(Point2(float(pos[k, 0]), float(pos[k, 1])), lab) for k, lab in zip(keep, labels)]


def hull_from_triangles(
    verts: np.ndarray, triangles: Sequence[tuple[int, int, int]], max_edge: float
) -> tuple[list[int], int]:
    """Carve a triangulation down to a concave boundary.

    Repeatedly deletes the triangle behind the longest exterior edge longer
    than ``max_edge``. Ties go to the smallest ``(min, max)`` vertex pair. An
    edge is only removable when the opposite vertex is not yet on the
    boundary: otherwise the boundary would pinch into a non-simple polygon.
    Such an edge stays blocked for good since boundary vertices never leave
    the boundary.

    Returns (boundary vertex cycle, counter-clockwise; number of blocked edges).
    """
    tris = [tuple(t) for t in triangles]
    owner: dict[tuple[int, int], int] = {}
    for k, (a, b, c) in enumerate(tris):
        owner[(a, b)] = k
        owner[(b, c)] = k
        owner[(c, a)] = k
    on_boundary: set[int] = set()
    heap = []

    def push(u, v):
        length = math.hypot(verts[u, 0] - verts[v, 0], verts[u, 1] - verts[v, 1])
        heapq.heappush(heap, (-length, min(u, v), max(u, v), u, v))

    for (u, v) in owner:
        if (v, u) not in owner:
            on_boundary.add(u)
            on_boundary.add(v)
            push(u, v)

    blocked = 0
    while heap:
        neg, _, _, u, v = heap[0]
        if -neg <= max_edge:
            break
        heapq.heappop(heap)
        k = owner.get((u, v))
        if k is None or (v, u) in owner:
            continue  # stale entry
        a, b, c = tris[k]
        w = a if (b, c) == (u, v) else b if (c, a) == (u, v) else c
        if w in on_boundary:
            blocked += 1
            continue
        for e in ((a, b), (b, c), (c, a)):
            del owner[e]
        on_boundary.add(w)
        push(u, w)
        push(w, v)

    succ = {u: v for (u, v) in owner if (v, u) not in owner}
    start = min(succ)
    cycle = [start]
    cur = succ[start]
    while cur != start:
        cycle.append(cur)
        cur = succ[cur]
        if len(cycle) > len(succ):  # pragma: no cover
            raise GeometryError("boundary is not a single cycle")
    if len(cycle) != len(succ):  # pragma: no cover
        raise GeometryError("boundary is not a single cycle")
    return cycle, blocked


def concave_hull(nodes: Sequence[LabeledNode], R: float, edge_rule: str = "both") -> ConcaveHull:
    """Concave hull of labelled nodes with maximum edge length ``R``.

    ``R = inf`` gives the convex hull.
    """
    if not R > 0:
        raise GeometryError(f"max edge length must be positive, got {R}")
    merged = merge_nodes(nodes)
    if len(merged) < 3:
        raise GeometryError(f"need at least 3 distinct nodes, got {len(merged)}")
    tri = delaunay([n.position for n in merged])
    cycle, blocked = hull_from_triangles(tri.vertices, tri.triangles, R)
    return ConcaveHull([merged[i] for i in cycle], edge_rule, blocked_edges=blocked)


def _run_length(pos: list, idx: list[int], n: int) -> float:
    total = 0.0
    for a, b in zip(idx, idx[1:]):
        pa, pb = pos[a % n], pos[b % n]
        total += math.hypot(pa[0] - pb[0], pa[1] - pb[1])
    return total


def passable_runs(hull: ConcaveHull) -> list[tuple[list[int], float]]:
    """Maximal runs of consecutive passable boundary nodes.

    Each run is reported as (boundary indices, cumulative length), where the
    length spans from the impassable node before the run to the one after it.
    A boundary with no impassable node is one run measured by its perimeter.
    """
    nodes = hull.boundary
    n = len(nodes)
    pos = [nd.position for nd in nodes]
    ok = [nd.label.passable for nd in nodes]
    if all(ok):
        return [(list(range(n)), _run_length(pos, list(range(n + 1)), n))]
    start = next(i for i in range(n) if not ok[i])
    runs = []
    i = start + 1
    while i < start + n + 1:
        if ok[i % n]:
            j = i
            while ok[j % n]:
                j += 1
            span = list(range(i - 1, j + 1))
            runs.append(([k % n for k in range(i, j)], _run_length(pos, span, n)))
            i = j
        else:
            i += 1
    return runs


def filter_hull(hull: ConcaveHull, robot_size: float) -> ConcaveHull:
    """Drop passable runs too narrow for the robot (< 2 * robot_size).

    The neighbours of a dropped run are joined directly; both are impassable
    so the new edge is too. If fewer than three vertices would remain, the
    input comes back unchanged with ``filter_warning`` set.
    """
    limit = 2.0 * robot_size
    drop: set[int] = set()
    for idx, length in passable_runs(hull):
        if length < limit:
            drop.update(idx)
    if not drop:
        return hull
    kept = [nd for i, nd in enumerate(hull.boundary) if i not in drop]
    if len(kept) < 3:
        log.warning("hull filtering would leave %d vertices; keeping unfiltered hull", len(kept))
        return ConcaveHull(list(hull.boundary), hull.edge_rule, True, hull.blocked_edges)
    return ConcaveHull(kept, hull.edge_rule, hull.filter_warning, hull.blocked_edges)


def polygon_is_simple(verts) -> bool:
    v = [tuple(p) for p in np.asarray(verts, dtype=float)]
    n = len(v)
    if n < 3:
        return False
    for i in range(n):
        a, b = v[i], v[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or j == (i + 1) % n:
                continue
            c, d = v[j], v[(j + 1) % n]
            if segments_intersect(a, b, c, d):
                return False
    return True


def signed_area(verts) -> float:
    v = np.asarray(verts, dtype=float)
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))
