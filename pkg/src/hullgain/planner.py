"""Two-stage exploration: local RRG planning in a sliding window, then
relocation through the global graph once the window runs dry."""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

from .gain import (
    GainParams,
    GainReport,
    IntersectionStats,
    Stopwatch,
    graph_gain,
    select_best,
    tree_gains,
    unknown_gains,
)
from .geom import ConcaveHull, GeometryError, Point2, concave_hull, filter_hull
from .grid import Cell, OccupancyGrid, lines_all_free, raycast
from .geom import Label
from .rrg import (
    ExpandParams,
    _key,
    drop_unreachable,
    FailureSet,
    Rrg,
    SlidingWindow,
    build_vch,
    compact_failures,
    expand,
    merge_with_mapping,
    prune_on_window_update,
    refresh_failures,
)
from .sim import CellSensor, Terrain, World

log = logging.getLogger(__name__)


class Stage(str, Enum):
    LOCAL = "local"
    RELOCATING = "relocating"
    DONE = "done"


ALLOWED = {
    (Stage.LOCAL, Stage.RELOCATING),
    (Stage.RELOCATING, Stage.LOCAL),
    (Stage.LOCAL, Stage.DONE),
    (Stage.RELOCATING, Stage.DONE),
}

VARIANTS = ("graph", "unknown")


@dataclass
class PlannerParams:
    variant: str = "graph"
    robot_size: float = 0.6
    hull_R: float | None = None  # default: twice the robot size
    downsample_res: float = 0.4
    half_extent: float = 15.0
    margin: float = 2.0
    n_stall: int = 2
    budget: int = 50_000
    max_iterations: int = 20_000
    n_beams: int = 360
    sensor_range: float = 5.0
    travel_distance: float = 3.0
    expand: ExpandParams = field(default_factory=ExpandParams)
    gain: GainParams = field(default_factory=GainParams)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        positive = ("robot_size", "downsample_res", "half_extent", "sensor_range", "travel_distance")
        for k in positive:
            if not getattr(self, k) > 0:
                raise ValueError(f"{k} must be positive")
        if self.hull_R is not None and not self.hull_R > 0:
            raise ValueError("hull_R must be positive")
        if self.margin < 0 or self.n_stall < 1 or self.budget < 1 or self.n_beams < 1:
            raise ValueError("margin >= 0, n_stall >= 1, budget >= 1, n_beams >= 1 required")

    @property
    def R(self) -> float:
        return 2.0 * self.robot_size if self.hull_R is None else self.hull_R


class BudgetExceeded(Exception):
    pass


@dataclass
class ExplorationState:
    world: World
    params: PlannerParams
    grid: OccupancyGrid
    rng: np.random.Generator
    sensor: CellSensor
    robot_pose: Point2
    robot_node: int
    local_rrg: Rrg
    fail: FailureSet
    window: SlidingWindow
    global_rrg: Rrg = field(default_factory=Rrg)
    global_fail: FailureSet = field(default_factory=FailureSet)  # obstacle evidence only
    stage: Stage = Stage.LOCAL
    stall_count: int = 0
    candidates: dict[int, float] = field(default_factory=dict)  # global id -> frozen gain
    prev_dir: tuple[float, float] | None = None
    hull: ConcaveHull | None = None
    steps: int = 0
    distance: float = 0.0
    iteration: int = 0
    transitions: list[dict] = field(default_factory=list)
    relocation_targets: list[Point2] = field(default_factory=list)
    reachable: np.ndarray | None = None
    stats: IntersectionStats = field(default_factory=IntersectionStats)
    hull_failures: int = 0
    collisions: int = 0
    trail: list[tuple[int, int]] = field(default_factory=list)  # cell entered at each step

    def coverage(self) -> float:
        known = (self.grid.cells == Cell.FREE) & self.reachable
        return float(np.count_nonzero(known)) / float(np.count_nonzero(self.reachable))

    def set_stage(self, stage: Stage) -> None:
        if (self.stage, stage) not in ALLOWED:
            raise RuntimeError(f"illegal stage transition {self.stage.value} -> {stage.value}")
        self.transitions.append(
            {"iteration": self.iteration, "steps": self.steps, "from": self.stage.value, "to": stage.value}
        )
        self.stage = stage


def _cell_center(grid: OccupancyGrid, cell) -> Point2:
    return grid.cell_center(cell[0], cell[1])


def _observe(state: ExplorationState, cell) -> None:
    passed, hits = state.sensor.observe(cell)
    if len(passed):
        state.grid.mark_free(passed[:, 0], passed[:, 1])
    if len(hits):
        state.grid.mark_occupied(hits[:, 0], hits[:, 1])


def new_state(world: World, params: PlannerParams, seed: int) -> ExplorationState:
    grid = world.empty_grid()
    sensor = CellSensor(world, params.n_beams, params.sensor_range)
    pose = Point2(*world.spawn)
    local = Rrg(pose)
    state = ExplorationState(
        world=world,
        params=params,
        grid=grid,
        rng=np.random.default_rng(seed),
        sensor=sensor,
        robot_pose=pose,
        robot_node=local.root,
        local_rrg=local,
        fail=FailureSet(),
        window=SlidingWindow(pose, params.half_extent),
        reachable=world.reachable_mask(),
    )
    _observe(state, grid.cell_of(pose))
    return state


def _walk_edge(state: ExplorationState, a: Point2, b: Point2) -> None:
    """Move from a to b one cell per step, scanning in every cell entered."""
    cells = raycast(state.grid, a, b)
    for cell in cells[1:]:
        if state.steps >= state.params.budget:
            raise BudgetExceeded
        if state.world.cells[cell[1], cell[0]] != Terrain.FREE:
            state.collisions += 1  # map edges are all-Free so this never fires
            log.error("robot entered non-free cell %s", cell)
        state.steps += 1
        state.trail.append((int(cell[0]), int(cell[1])))
        state.robot_pose = _cell_center(state.grid, cell)
        _observe(state, cell)
    state.distance += math.hypot(b[0] - a[0], b[1] - a[1])
    state.robot_pose = Point2(*b)


def _follow(state: ExplorationState, graph: Rrg, path: list[int], max_len: float = math.inf) -> int:
    """Walk ``path`` node by node, stopping at the first node at or beyond
    ``max_len``; visited flags are set along the way. Returns the last node."""
    travelled = 0.0
    cur = path[0]
    graph.nodes[cur].visited = True
    for nxt in path[1:]:
        a, b = graph.nodes[cur].position, graph.nodes[nxt].position
        _walk_edge(state, a, b)
        travelled += graph.adj[cur][nxt]
        cur = nxt
        graph.nodes[cur].visited = True
        if travelled >= max_len:
            break
    return cur


# ---------------------------------------------------------------------------
# local stage
# ---------------------------------------------------------------------------


@dataclass
class IterationResult:
    report: GainReport
    best: int | None
    best_gain: float
    tree: object = None


def compute_hull(state: ExplorationState) -> ConcaveHull | None:
    p = state.params
    vch = build_vch(state.local_rrg, state.fail, p.downsample_res)
    try:
        hull = concave_hull(vch, p.R, p.gain.edge_rule)
    except GeometryError:
        state.hull_failures += 1
        return None
    return filter_hull(hull, p.robot_size)


def evaluate_gains(state: ExplorationState, variants: tuple[str, ...]) -> tuple[dict, dict, GainReport]:
    """Volumetric gains for the requested variants (timed separately).

    The driving variant's gains end up stored on the nodes, so it must come
    last in ``variants``.
    """
    rrg = state.local_rrg
    graph: dict[int, int] = {}
    unknown: dict[int, int] = {}
    hull_sw, gain_sw, base_sw = Stopwatch(), Stopwatch(), Stopwatch()
    for v in variants:
        if v == "graph":
            with hull_sw:
                state.hull = compute_hull(state)
            with gain_sw:
                if state.hull is None:
                    graph = {i: 0 for i in rrg.nodes}
                    for n in rrg.nodes.values():
                        n.volumetric_gain = 0
                else:
                    graph = graph_gain(state.hull, rrg, state.params.gain, state.grid)
        else:
            with base_sw:
                unknown = unknown_gains(rrg, state.grid, state.params.gain)
    report = GainReport(
        [], hull_build=hull_sw.elapsed, gain_update=gain_sw.elapsed, baseline=base_sw.elapsed
    )
    return unknown, graph, report


def plan_local(state: ExplorationState, variants: tuple[str, ...] | None = None) -> IterationResult:
    """Expand, score and pick the next viewpoint without moving."""
    p = state.params
    rrg = state.local_rrg
    rrg.root = state.robot_node
    refresh_failures(state.fail, state.grid)
    expand(rrg, state.fail, state.grid, state.window, p.expand, state.rng)
    compact_failures(state.fail, p.downsample_res)
    if variants is None:
        variants = (p.variant,)
    unknown, graph, report = evaluate_gains(state, variants)
    tg = tree_gains(rrg, state.robot_node, p.gain, state.prev_dir)
    best = select_best(rrg, tg, p.gain.threshold)
    report.rows = GainReport.from_graph(rrg, unknown, graph).rows
    gain = tg.exploration[best] if best is not None else 0.0
    return IterationResult(report, best, gain, tg)


def _register(state: ExplorationState, mapping: dict[int, int], ids) -> None:
    thr = state.params.gain.threshold
    for i in ids:
        n = state.local_rrg.nodes[i]
        if not n.visited and n.volumetric_gain >= thr and n.volumetric_gain > 0:
            state.candidates[mapping[i]] = float(n.volumetric_gain)


def _drop_visited_candidates(state: ExplorationState) -> None:
    g = state.global_rrg
    for c in [c for c in state.candidates if c not in g.nodes or g.nodes[c].visited]:
        del state.candidates[c]


def merge_local(state: ExplorationState) -> dict[int, int]:
    _, mapping = merge_with_mapping(state.local_rrg, state.global_rrg, state.params.expand.connect_radius)
    gf = state.global_fail
    gf.nodes.extend(n for n in state.fail.nodes if n.label == Label.OCCUPIED)
    compact_failures(gf, state.params.downsample_res)
    _drop_visited_candidates(state)
    return mapping


def import_known(state: ExplorationState) -> None:
    """Load what is already known inside the window into the local stage:
    global graph nodes (with their edges) and recorded obstacle failures.

    Without this a freshly opened window would look unexpanded even where
    the robot has been before.
    """
    g, local, w = state.global_rrg, state.local_rrg, state.window
    if len(g):
        ids, pos = g.positions()
        h = w.half_extent
        inside = (np.abs(pos[:, 0] - w.center[0]) <= h) & (np.abs(pos[:, 1] - w.center[1]) <= h)
        have = {_key(n.position): n.id for n in local.nodes.values()}
        to_local: dict[int, int] = {}
        for k in np.argsort(ids[inside], kind="stable"):
            gid = int(ids[inside][k])
            node = g.nodes[gid]
            lid = have.get(_key(node.position))
            if lid is None:
                lid = local.add_node(node.position)
            local.nodes[lid].visited = local.nodes[lid].visited or node.visited
            to_local[gid] = lid
        for gid, lid in to_local.items():
            for nb in g.adj[gid]:
                if nb in to_local:
                    local.add_edge(lid, to_local[nb])
        drop_unreachable(local)
    if len(g):
        # nodes just outside the window close the hull there, as after a prune
        band = ~inside & (np.abs(pos[:, 0] - w.center[0]) <= h + state.params.margin)
        band &= np.abs(pos[:, 1] - w.center[1]) <= h + state.params.margin
        for x, y in pos[band]:
            state.fail.add(Point2(float(x), float(y)), Label.BEYOND_WINDOW)
    known = [n for n in state.global_fail.nodes if w.contains(n.position)]
    if known:
        state.fail.nodes.extend(known)
        compact_failures(state.fail, state.params.downsample_res)


def update_window(state: ExplorationState) -> bool:
    """Recentre the window once the robot leaves its inner half."""
    w = state.window
    off = max(abs(state.robot_pose[0] - w.center[0]), abs(state.robot_pose[1] - w.center[1]))
    if off <= w.half_extent / 2:
        return False
    new = SlidingWindow(Point2(*state.robot_pose), w.half_extent)
    mapping = merge_local(state)
    leaving = [i for i, n in state.local_rrg.nodes.items() if not new.contains(n.position)]
    _register(state, mapping, leaving)
    state.local_rrg.root = state.robot_node
    prune_on_window_update(state.local_rrg, state.fail, w, new, state.params.margin)
    state.window = new
    import_known(state)
    return True


def local_step(state: ExplorationState, variants: tuple[str, ...] | None = None) -> IterationResult:
    """One local iteration: plan, then travel toward the chosen viewpoint."""
    if state.stage != Stage.LOCAL:
        raise RuntimeError("local_step needs the local stage")
    res = plan_local(state, variants)
    if res.best is not None:
        rrg = state.local_rrg
        path = rrg.path(res.tree.parent, res.best)
        start = rrg.nodes[state.robot_node].position
        tip = rrg.nodes[res.best].position
        d = math.hypot(tip[0] - start[0], tip[1] - start[1])
        if d > 0:
            state.prev_dir = ((tip[0] - start[0]) / d, (tip[1] - start[1]) / d)
        try:
            state.robot_node = _follow(state, rrg, path, state.params.travel_distance)
        finally:
            update_window(state)
    check_stall(state, res.best is not None)
    return res


def _drop_judged_candidates(state: ExplorationState) -> None:
    """Forget candidates the local planner has just written off.

    A candidate inside the window with a clear line to a local node at most
    one connection radius away was scored with fresher information than its frozen gain,
    and nothing there passed the threshold.
    """
    if not state.candidates:
        return
    _, pos = state.local_rrg.positions()
    reach = state.params.expand.connect_radius
    g = state.global_rrg
    for c in sorted(state.candidates):
        p = g.nodes[c].position
        if not state.window.contains(p):
            continue
        d = np.hypot(pos[:, 0] - p[0], pos[:, 1] - p[1])
        near = pos[d <= reach]
        if len(near) and lines_all_free(state.grid, p, near).any():
            del state.candidates[c]


def check_stall(state: ExplorationState, found: bool) -> ExplorationState:
    if state.stage != Stage.LOCAL:
        raise RuntimeError("check_stall needs the local stage")
    if found:
        state.stall_count = 0
        return state
    state.stall_count += 1
    if state.stall_count >= state.params.n_stall:
        mapping = merge_local(state)
        _register(state, mapping, list(state.local_rrg.nodes))
        _drop_judged_candidates(state)
        state.stall_count = 0
        state.set_stage(Stage.RELOCATING)
    return state


# ---------------------------------------------------------------------------
# relocation
# ---------------------------------------------------------------------------


def _robot_global_node(state: ExplorationState) -> int:
    g = state.global_rrg
    i, d = g.nearest(state.robot_pose)
    if d > 1e-9:
        raise RuntimeError("robot is not on a global node")
    return i


def choose_candidate(state: ExplorationState) -> tuple[int | None, dict[int, float], dict[int, int | None]]:
    g = state.global_rrg
    src = _robot_global_node(state)
    dist, parent = g.shortest_paths(src)
    lam = state.params.gain.lambda2
    best, key = None, None
    for c in sorted(state.candidates):
        if c not in dist:
            log.info("candidate %d unreachable in global graph; dropped", c)
            del state.candidates[c]
            continue
        score = state.candidates[c] * math.exp(-lam * dist[c])
        k = (-score, dist[c], c)
        if key is None or k < key:
            best, key = c, k
    return best, dist, parent


def relocate(state: ExplorationState) -> ExplorationState:
    if state.stage != Stage.RELOCATING:
        raise RuntimeError("relocate needs the relocating stage")
    _drop_visited_candidates(state)
    if not state.candidates:
        state.set_stage(Stage.DONE)
        return state
    target, _, parent = choose_candidate(state)
    if target is None:
        state.set_stage(Stage.DONE)
        return state
    g = state.global_rrg
    state.relocation_targets.append(g.nodes[target].position)
    path = g.path(parent, target)
    _follow(state, g, path)
    state.candidates.pop(target, None)
    _drop_visited_candidates(state)
    pose = g.nodes[target].position
    state.robot_pose = pose
    state.local_rrg = Rrg(pose)
    state.robot_node = state.local_rrg.root
    state.fail = FailureSet()
    state.window = SlidingWindow(pose, state.params.half_extent)
    state.prev_dir = None
    import_known(state)
    state.set_stage(Stage.LOCAL)
    return state


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------


@dataclass
class ExplorationLog:
    records: list[dict] = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    wall_time: float = 0.0

    @property
    def incomplete(self) -> bool:
        return not self.summary.get("complete", False)

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.records)

    @staticmethod
    def read_jsonl(text: str) -> list[dict]:
        return [json.loads(ln) for ln in text.splitlines() if ln.strip()]

    def summary_json(self) -> str:
        return json.dumps(self.summary, sort_keys=True, indent=2) + "\n"


def iteration_record(state: ExplorationState, res: IterationResult | None, event: str) -> dict:
    rec = {
        "iteration": state.iteration,
        "event": event,
        "stage": state.stage.value,
        "steps": state.steps,
        "pose": [round(state.robot_pose[0], 6), round(state.robot_pose[1], 6)],
        "coverage": round(state.coverage(), 6),
        "distance": round(state.distance, 6),
        "local_nodes": len(state.local_rrg),
        "failure_nodes": len(state.fail),
        "candidates": len(state.candidates),
    }
    if res is not None:
        rec["best"] = res.best
        rec["best_gain"] = res.best_gain
        rec["timing"] = res.report.timings()
    return rec


def summarize(state: ExplorationState, seed: int, complete: bool) -> dict:
    return {
        "world": state.world.name,
        "variant": state.params.variant,
        "seed": seed,
        "complete": complete,
        "coverage_pct": round(100.0 * state.coverage(), 6),
        "steps": state.steps,
        "iterations": state.iteration,
        "distance_m": round(state.distance, 6),
        "relocations": len(state.relocation_targets),
        "collisions": state.collisions,
        "global_nodes": len(state.global_rrg),
    }


def run_to_completion(
    world: World,
    params: PlannerParams,
    seed: int = 0,
    on_iteration: Callable[[ExplorationState, IterationResult | None], None] | None = None,
    variants: tuple[str, ...] | None = None,
) -> tuple[ExplorationLog, ExplorationState]:
    """Explore until done or out of budget.

    ``variants`` lists the gains computed each local iteration (the driving
    one last); by default only ``params.variant``.
    """
    t0 = time.perf_counter()
    state = new_state(world, params, seed)
    out = ExplorationLog()
    complete = False
    try:
        while state.iteration < params.max_iterations:
            if state.stage == Stage.DONE:
                complete = True
                break
            state.iteration += 1
            if state.stage == Stage.LOCAL:
                res = local_step(state, variants)
                out.records.append(iteration_record(state, res, "local"))
            else:
                res = None
                relocate(state)
                out.records.append(iteration_record(state, None, "relocate"))
            if on_iteration is not None:
                on_iteration(state, res)
    except BudgetExceeded:
        out.records.append(iteration_record(state, None, "budget_exceeded"))
    out.summary = summarize(state, seed, complete)
    out.summary["transitions"] = state.transitions
    out.wall_time = time.perf_counter() - t0
    return out, state


def gain_field_at(
    world: World, params: PlannerParams, seed: int, pose: Point2, radius: float = 1.0
) -> tuple[dict[int, int], dict[int, int]] | None:
    """Explore until the robot first comes within ``radius`` of ``pose``, then
    score the current local graph with both gains.

    Returns ``(unknown, graph)`` keyed by node id, or None if the pose is never
    reached.
    """
    state = new_state(world, params, seed)
    try:
        while state.iteration < params.max_iterations and state.stage != Stage.DONE:
            state.iteration += 1
            if state.stage == Stage.LOCAL:
                local_step(state)
            else:
                relocate(state)
            if math.dist(state.robot_pose, pose) <= radius:
                unknown, graph, _ = evaluate_gains(state, ("unknown", "graph"))
                return unknown, graph
    except BudgetExceeded:
        pass
    return None


def params_dict(params: PlannerParams) -> dict:
    return asdict(params)
