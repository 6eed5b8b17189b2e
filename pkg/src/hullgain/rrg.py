"""Rapidly-exploring random graph inside a sliding window.

Expansion records where it fails (obstacle, unmapped space, window border);
those failure nodes and the graph nodes together wrap the expanded region.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .geom import EPS_GEOM, Label, LabeledNode, Point2, stronger
from .grid import Cell, OccupancyGrid, first_blocker, lines_all_free


@dataclass
class RrgNode:
    id: int
    position: Point2
    volumetric_gain: int = 0
    exploration_gain: float = 0.0
    visited: bool = False
    parent: int | None = None  # tree parent at insertion time


class Rrg:
    """Undirected viewpoint graph with stable integer ids."""

    def __init__(self, root: Point2 | None = None):
        self.nodes: dict[int, RrgNode] = {}
        self.adj: dict[int, dict[int, float]] = {}
        self.root: int | None = None
        self._next = 0
        self._ids = np.zeros(64, dtype=np.int64)
        self._pos = np.zeros((64, 2))
        self._n = 0
        self._slot: dict[int, int] = {}
        if root is not None:
            self.root = self.add_node(root)

    def __len__(self) -> int:
        return len(self.nodes)

    def __contains__(self, i: int) -> bool:
        return i in self.nodes

    # -- structure ---------------------------------------------------------

    def add_node(self, position, parent: int | None = None, node_id: int | None = None) -> int:
        i = self._next if node_id is None else node_id
        if i in self.nodes:
            raise KeyError(f"node {i} exists")
        self._next = max(self._next, i + 1)
        p = Point2(float(position[0]), float(position[1]))
        self.nodes[i] = RrgNode(i, p, parent=parent)
        self.adj[i] = {}
        if self._n == len(self._ids):
            self._ids = np.concatenate([self._ids, np.zeros_like(self._ids)])
            self._pos = np.concatenate([self._pos, np.zeros_like(self._pos)])
        self._ids[self._n] = i
        self._pos[self._n] = p
        self._slot[i] = self._n
        self._n += 1
        return i

    def add_edge(self, i: int, j: int) -> None:
        if i == j:
            return
        a, b = self.nodes[i].position, self.nodes[j].position
        d = math.hypot(a[0] - b[0], a[1] - b[1])
        self.adj[i][j] = d
        self.adj[j][i] = d

    def remove_node(self, i: int) -> None:
        for j in self.adj.pop(i):
            del self.adj[j][i]
        del self.nodes[i]
        s = self._slot.pop(i)
        last = self._n - 1
        if s != last:
            moved = int(self._ids[last])
            self._ids[s] = moved
            self._pos[s] = self._pos[last]
            self._slot[moved] = s
        self._n -= 1
        if self.root == i:
            self.root = None

    def edges(self) -> list[tuple[int, int, float]]:
        return [(i, j, d) for i, nb in self.adj.items() for j, d in nb.items() if i < j]

    def positions(self) -> tuple[np.ndarray, np.ndarray]:
        return self._ids[: self._n].copy(), self._pos[: self._n].copy()

    # -- queries -----------------------------------------------------------

    def nearest(self, p) -> tuple[int, float]:
        if self._n == 0:
            raise ValueError("empty graph")
        d = np.hypot(self._pos[: self._n, 0] - p[0], self._pos[: self._n, 1] - p[1])
        k = int(np.argmin(d))
        return int(self._ids[k]), float(d[k])

    def within(self, p, radius: float) -> list[int]:
        d = np.hypot(self._pos[: self._n, 0] - p[0], self._pos[: self._n, 1] - p[1])
        return [int(i) for i in self._ids[: self._n][d <= radius]]

    def shortest_paths(self, source: int) -> tuple[dict[int, float], dict[int, int | None]]:
        """Dijkstra from ``source``; ties settle by node id."""
        dist = {source: 0.0}
        parent: dict[int, int | None] = {source: None}
        heap = [(0.0, source)]
        done = set()
        while heap:
            d, u = heapq.heappop(heap)
            if u in done:
                continue
            done.add(u)
            for v, w in self.adj[u].items():
                nd = d + w
                if nd < dist.get(v, math.inf):
                    dist[v] = nd
                    parent[v] = u
                    heapq.heappush(heap, (nd, v))
        return dist, parent

    def path(self, parent: dict[int, int | None], target: int) -> list[int]:
        out = [target]
        while parent[out[-1]] is not None:
            out.append(parent[out[-1]])
        return out[::-1]

    def is_connected(self) -> bool:
        if not self.nodes:
            return True
        start = self.root if self.root is not None else next(iter(self.nodes))
        dist, _ = self.shortest_paths(start)
        return len(dist) == len(self.nodes)

    def copy(self) -> "Rrg":
        g = Rrg()
        for n in self.nodes.values():
            g.add_node(n.position, n.parent, n.id)
            m = g.nodes[n.id]
            m.volumetric_gain, m.exploration_gain, m.visited = (
                n.volumetric_gain,
                n.exploration_gain,
                n.visited,
            )
        for i, nb in self.adj.items():
            g.adj[i] = dict(nb)
        g.root = self.root
        g._next = self._next
        return g

    # -- serialisation -----------------------------------------------------

    def to_dict(self, fail: "FailureSet | None" = None) -> dict:
        doc = {
            "root": self.root,
            "nodes": [
                {
                    "id": n.id,
                    "x": n.position.x,
                    "y": n.position.y,
                    "label": Label.SUCCESSFUL.name.lower(),
                    "volumetric_gain": n.volumetric_gain,
                    "exploration_gain": n.exploration_gain,
                    "visited": n.visited,
                    "parent": n.parent,
                }
                for n in sorted(self.nodes.values(), key=lambda n: n.id)
            ],
            "edges": [[i, j, d] for i, j, d in sorted(self.edges())],
        }
        if fail is not None:
            doc["failures"] = [
                {"x": n.position.x, "y": n.position.y, "label": n.label.name.lower()}
                for n in fail.nodes
            ]
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "Rrg":
        g = cls()
        for n in doc["nodes"]:
            i = g.add_node((n["x"], n["y"]), n.get("parent"), n["id"])
            m = g.nodes[i]
            m.volumetric_gain = n["volumetric_gain"]
            m.exploration_gain = n["exploration_gain"]
            m.visited = n["visited"]
        for i, j, d in doc["edges"]:
            g.adj[i][j] = d
            g.adj[j][i] = d
        g.root = doc["root"]
        return g

    def to_json(self, fail: "FailureSet | None" = None) -> str:
        return json.dumps(self.to_dict(fail), sort_keys=True)


@dataclass
class FailureSet:
    nodes: list[LabeledNode] = field(default_factory=list)

    def __post_init__(self):
        for n in self.nodes:
            self._check(n.label)

    @staticmethod
    def _check(label: Label) -> None:
        if label == Label.SUCCESSFUL:
            raise ValueError("failure nodes cannot be labelled successful")

    def add(self, position, label: Label) -> None:
        self._check(label)
        self.nodes.append(LabeledNode(Point2(float(position[0]), float(position[1])), label))

    def __len__(self) -> int:
        return len(self.nodes)

    @classmethod
    def from_dict(cls, doc: dict) -> "FailureSet":
        return cls(
            [LabeledNode(Point2(f["x"], f["y"]), Label[f["label"].upper()]) for f in doc.get("failures", [])]
        )


@dataclass(frozen=True)
class SlidingWindow:
    center: Point2
    half_extent: float

    def __post_init__(self):
        if not self.half_extent > 0:
            raise ValueError("half_extent must be positive")

    def contains(self, p, margin: float = 0.0) -> bool:
        h = self.half_extent + margin
        return abs(p[0] - self.center[0]) <= h and abs(p[1] - self.center[1]) <= h

    def bounds(self, margin: float = 0.0) -> tuple[float, float, float, float]:
        h = self.half_extent + margin
        cx, cy = self.center
        return cx - h, cy - h, cx + h, cy + h


@dataclass
class ExpandParams:
    step_size: float = 1.0
    connect_radius: float = 2.0
    n_sample: int = 300
    min_spacing: float = 0.5  # candidates closer than this to a node are dropped

    def __post_init__(self):
        if not (self.step_size > 0 and self.connect_radius > 0):
            raise ValueError("step_size and connect_radius must be positive")
        if self.n_sample < 1 or self.min_spacing < 0:
            raise ValueError("n_sample >= 1 and min_spacing >= 0 required")


def _sample_bounds(window: SlidingWindow, grid: OccupancyGrid, pad: float):
    # the map edge is padded like the window, so walls on it get overshoot too
    x0, y0, x1, y1 = window.bounds(pad)
    gx0, gy0, gx1, gy1 = grid.extent
    return max(x0, gx0 - pad), max(y0, gy0 - pad), min(x1, gx1 + pad), min(y1, gy1 + pad)


def _exit_point(grid: OccupancyGrid, a, b) -> tuple[float, float]:
    """Last point of ab still inside the grid (a must be inside)."""
    x0, y0, x1, y1 = grid.extent
    t = 1.0
    for p, d, lo, hi in ((a[0], b[0] - a[0], x0, x1), (a[1], b[1] - a[1], y0, y1)):
        if d > 0:
            t = min(t, (hi - p) / d)
        elif d < 0:
            t = min(t, (lo - p) / d)
    # back off a hair so the half-open upper bound still counts as inside
    q = (a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t)
    half = grid.resolution * 1e-6
    return (min(max(q[0], x0), x1 - half), min(max(q[1], y0), y1 - half))


def expand(
    rrg: Rrg,
    fail: FailureSet,
    grid: OccupancyGrid,
    window: SlidingWindow,
    params: ExpandParams,
    rng: np.random.Generator,
) -> tuple[Rrg, FailureSet]:
    """Run ``params.n_sample`` RRT extension attempts in place.

    Samples are drawn uniformly over the window padded by one step, so
    extensions can overshoot the border. Each candidate is classified by the
    first non-free cell on its steering segment (occupied or unknown), then
    by the window; only fully free, in-window candidates join the graph.
    """
    if len(rrg) == 0:
        raise ValueError("graph needs a root before expansion")
    x0, y0, x1, y1 = _sample_bounds(window, grid, params.step_size)
    samples = rng.uniform((x0, y0), (x1, y1), size=(params.n_sample, 2))
    step = params.step_size
    for sx, sy in samples:
        near, d = rrg.nearest((sx, sy))
        if d <= EPS_GEOM:
            continue
        npos = rrg.nodes[near].position
        if d > step:
            f = step / d
            cand = (npos[0] + (sx - npos[0]) * f, npos[1] + (sy - npos[1]) * f)
        else:
            cand = (float(sx), float(sy))
        if grid.in_bounds(cand):
            blocker = first_blocker(grid, npos, cand)
        else:
            # a wall on the map edge still blocks an overshooting extension;
            # the failure sits on the edge so the map can refresh it later
            edge = _exit_point(grid, npos, cand)
            blocker = first_blocker(grid, npos, edge)
            if blocker == Cell.FREE:
                fail.add(cand, Label.BEYOND_WINDOW)
                continue
            cand = edge
        if blocker == Cell.OCCUPIED:
            fail.add(cand, Label.OCCUPIED)
            continue
        if blocker == Cell.UNKNOWN:
            fail.add(cand, Label.UNKNOWN)
            continue
        if not window.contains(cand):
            fail.add(cand, Label.BEYOND_WINDOW)
            continue
        if rrg.nearest(cand)[1] < params.min_spacing:
            continue
        new = rrg.add_node(cand, parent=near)
        rrg.add_edge(near, new)
        others = [j for j in rrg.within(cand, params.connect_radius) if j not in (new, near)]
        if others:
            ends = np.array([rrg.nodes[j].position for j in others])
            for j, ok in zip(others, lines_all_free(grid, cand, ends)):
                if ok:
                    rrg.add_edge(new, j)
    return rrg, fail


def refresh_failures(fail: FailureSet, grid: OccupancyGrid) -> FailureSet:
    """Drop frontier failures whose cell has since been mapped.

    A frontier node only means "unmapped here"; once mapped it is stale and
    fresh expansion will rediscover whatever is there.
    """
    keep = []
    for n in fail.nodes:
        if n.label == Label.UNKNOWN and grid.in_bounds(n.position):
            if grid.status_at(n.position) != Cell.UNKNOWN:
                continue
        keep.append(n)
    fail.nodes = keep
    return fail


def downsample(nodes: list[LabeledNode], res: float) -> list[LabeledNode]:
    """One node per ``res``-sized cell; the strongest label wins and that
    node's position represents the cell (first one among equals)."""
    if res <= 0:
        raise ValueError("downsample resolution must be positive")
    best: dict[tuple[int, int], LabeledNode] = {}
    for n in nodes:
        key = (math.floor(n.position[0] / res), math.floor(n.position[1] / res))
        cur = best.get(key)
        if cur is None or stronger(n.label, cur.label) != cur.label:
            best[key] = n
    return list(best.values())


def build_vch(rrg: Rrg, fail: FailureSet, downsample_res: float) -> list[LabeledNode]:
    """Graph nodes (successful) plus failure nodes, voxel-downsampled."""
    union = [LabeledNode(n.position, Label.SUCCESSFUL) for n in rrg.nodes.values()]
    union.extend(fail.nodes)
    if not union:
        raise ValueError("nothing to build a hull from")
    return downsample(union, downsample_res)


def compact_failures(fail: FailureSet, res: float) -> FailureSet:
    fail.nodes = downsample(fail.nodes, res)
    return fail


def prune_on_window_update(
    rrg: Rrg,
    fail: FailureSet,
    old_window: SlidingWindow,
    new_window: SlidingWindow,
    margin: float,
) -> tuple[Rrg, FailureSet]:
    """Relabel the hull set for a moved window.

    Inside the new window, graph nodes and obstacle failures stay as they
    are while frontier and stale beyond-window failures are dropped. In the
    band of width ``margin`` around the window every node becomes a
    beyond-window failure (graph nodes leave the graph). Anything further out
    is discarded.
    """
    del old_window  # relabelling depends on the new window only
    kept: list[LabeledNode] = []
    for n in fail.nodes:
        if new_window.contains(n.position):
            if n.label == Label.OCCUPIED:
                kept.append(n)
        elif new_window.contains(n.position, margin):
            kept.append(LabeledNode(n.position, Label.BEYOND_WINDOW))
    for i in list(rrg.nodes):
        p = rrg.nodes[i].position
        if new_window.contains(p):
            continue
        if new_window.contains(p, margin):
            kept.append(LabeledNode(p, Label.BEYOND_WINDOW))
        rrg.remove_node(i)
    fail.nodes = kept
    drop_unreachable(rrg)
    return rrg, fail


def drop_unreachable(rrg: Rrg) -> None:
    if rrg.root is None or rrg.root not in rrg.nodes:
        return
    dist, _ = rrg.shortest_paths(rrg.root)
    for i in [i for i in rrg.nodes if i not in dist]:
        rrg.remove_node(i)


class MergeError(ValueError):
    pass


def _key(p) -> tuple[int, int]:
    return (round(p[0] / 1e-6), round(p[1] / 1e-6))


def merge_into_global(local: Rrg, global_: Rrg, connect_radius: float = 2.0) -> Rrg:
    """Fold ``local`` into ``global_`` (in place) and return the global graph.

    Nodes at the same position (within ``EPS_GEOM``) are one node; visited
    flags are OR-ed and the newest gains win. The two graphs must meet: some
    local node (normally the root) coincides with a global node, or the local
    root lies within ``connect_radius`` of one and a junction edge is added.
    """
    return merge_with_mapping(local, global_, connect_radius)[0]


def merge_with_mapping(
    local: Rrg, global_: Rrg, connect_radius: float = 2.0
) -> tuple[Rrg, dict[int, int]]:
    """:func:`merge_into_global` that also returns local id -> global id."""
    if len(local) == 0:
        return global_, {}
    lookup: dict[tuple[int, int], list[int]] = {}
    for g in global_.nodes.values():
        lookup.setdefault(_key(g.position), []).append(g.id)

    def find(p) -> int | None:
        kx, ky = _key(p)
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                for gid in lookup.get((kx + dx, ky + dy), ()):
                    q = global_.nodes[gid].position
                    if math.hypot(q[0] - p[0], q[1] - p[1]) <= EPS_GEOM:
                        return gid
        return None

    existing = {n.id: find(n.position) for n in local.nodes.values()} if len(global_) else {}
    junction = None
    if len(global_):
        if local.root is None or local.root not in local.nodes:
            raise MergeError("local graph has no root")
        if existing[local.root] is None and all(g is None for g in existing.values()):
            near, d = global_.nearest(local.nodes[local.root].position)
            if d > connect_radius:
                raise MergeError(f"no global node within {connect_radius} m of local root")
            junction = near

    mapping: dict[int, int] = {}
    for n in local.nodes.values():
        gid = existing.get(n.id)
        if gid is None:
            gid = global_.add_node(n.position)
            lookup.setdefault(_key(n.position), []).append(gid)
        g = global_.nodes[gid]
        g.visited = g.visited or n.visited
        g.volumetric_gain = n.volumetric_gain
        g.exploration_gain = n.exploration_gain
        mapping[n.id] = gid
    for i, j, _ in local.edges():
        global_.add_edge(mapping[i], mapping[j])
    if junction is not None:
        global_.add_edge(mapping[local.root], junction)
    if global_.root is None:
        global_.root = mapping[local.root] if local.root in mapping else min(mapping.values())
    return global_, mapping
