"""Command-line runner: ``run``, ``bench``, ``render`` and ``validate-world``.

Configuration is a flat INI file (one ``[experiment]`` section) overlaid by
command-line flags that share the key names, with dashes for underscores.
"""

from __future__ import annotations

import argparse
import configparser
import dataclasses
import io
import json
import logging
import math
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .gain import GainParams, GainReport
from .geom import Label
from .planner import PlannerParams, run_to_completion
from .rrg import ExpandParams
from .sim import World, WorldError, get_world

log = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_INCOMPLETE = 0, 1, 2


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    world: str = "empty_room"
    gain_variant: str = "graph"
    seed: int = 0
    # sampling
    step_size: float = 1.0
    connect_radius: float = 2.0
    n_sample: int = 300
    min_spacing: float = 0.5
    half_extent: float = 15.0
    margin: float = 2.0
    # hull
    robot_size: float = 0.6
    R: float = 0.0  # 0 means twice robot_size
    downsample_res: float = 0.4
    edge_rule: str = "both"
    # gain
    gain_radius: float = 5.0
    formula: str = "dsvp"
    lam: float = 0.25
    lambda1: float = 0.5
    lambda2: float = 0.25
    threshold: float = 5.0
    # run control
    n_stall: int = 2
    budget: int = 50_000
    max_iterations: int = 20_000
    n_beams: int = 360
    sensor_range: float = 5.0
    travel_distance: float = 3.0
    both_gains: bool = False  # score every node with both gains each iteration
    frame_every: int = 0  # K; 0 disables SVG frames

    @classmethod
    def keys(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    @classmethod
    def from_mapping(cls, raw: dict[str, str]) -> "ExperimentConfig":
        return cls().with_overrides(raw)

    @classmethod
    def from_ini(cls, path) -> "ExperimentConfig":
        cp = configparser.ConfigParser()
        cp.optionxform = str  # keys are case-sensitive (R)
        try:
            read = cp.read(path)
        except configparser.Error as e:
            raise ConfigError(f"{path}: {e}") from e
        if not read:
            raise ConfigError(f"cannot read config file {path}")
        if cp.sections() != ["experiment"]:
            raise ConfigError(f"{path}: expected exactly one [experiment] section")
        return cls.from_mapping(dict(cp["experiment"]))

    def with_overrides(self, raw: dict) -> "ExperimentConfig":
        types = {f.name: f.type for f in fields(self)}
        out = {}
        for k, v in raw.items():
            if k not in types:
                raise ConfigError(f"unknown config key {k!r}")
            out[k] = _coerce(k, types[k], v)
        cfg = dataclasses.replace(self, **out)
        cfg.validate()
        return cfg

    def to_ini(self) -> str:
        cp = configparser.ConfigParser()
        cp.optionxform = str  # keys are case-sensitive (R)
        cp["experiment"] = {k: str(getattr(self, k)) for k in self.keys()}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    def planner_params(self) -> PlannerParams:
        try:
            return PlannerParams(
                variant=self.gain_variant,
                robot_size=self.robot_size,
                hull_R=self.R or None,
                downsample_res=self.downsample_res,
                half_extent=self.half_extent,
                margin=self.margin,
                n_stall=self.n_stall,
                budget=self.budget,
                max_iterations=self.max_iterations,
                n_beams=self.n_beams,
                sensor_range=self.sensor_range,
                travel_distance=self.travel_distance,
                expand=ExpandParams(self.step_size, self.connect_radius, self.n_sample, self.min_spacing),
                gain=GainParams(
                    lambda1=self.lambda1,
                    lambda2=self.lambda2,
                    lam=self.lam,
                    gain_radius=self.gain_radius,
                    edge_rule=self.edge_rule,
                    threshold=self.threshold,
                    formula=self.formula,
                ),
            )
        except ValueError as e:
            raise ConfigError(str(e)) from e

    def load_world(self) -> World:
        try:
            w = get_world(self.world)
            w.validate()
        except (OSError, WorldError) as e:
            raise ConfigError(f"world {self.world!r}: {e}") from e
        return w

    def validate(self) -> None:
        if self.R < 0:
            raise ConfigError("R must be >= 0 (0 selects twice robot_size)")
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be >= 1")
        if self.frame_every < 0:
            raise ConfigError("frame_every must be >= 0")
        self.planner_params()

    def variants(self) -> tuple[str, ...] | None:
        if not self.both_gains:
            return None
        other = "unknown" if self.gain_variant == "graph" else "graph"
        return (other, self.gain_variant)


def _coerce(key: str, typ, value):
    if not isinstance(value, str):
        return value
    t = typ if isinstance(typ, str) else typ.__name__
    try:
        if t == "bool":
            v = value.strip().lower()
            if v not in ("1", "0", "true", "false", "yes", "no", "on", "off"):
                raise ValueError(value)
            return v in ("1", "true", "yes", "on")
        if t == "int":
            return int(value)
        if t == "float":
            return float(value)
    except ValueError as e:
        raise ConfigError(f"{key}: cannot parse {value!r} as {t}") from e
    return value


# ---------------------------------------------------------------------------
# scene capture and SVG frames
# ---------------------------------------------------------------------------


class SceneRecorder:
    """Per-iteration snapshots compact enough to re-render frames later."""

    def __init__(self, world: World):
        self.prev = np.zeros((world.height, world.width), dtype=np.int8)
        self.trail_at = 0
        self.scenes: dict[int, dict] = {}

    def __call__(self, state, res) -> None:
        cells = state.grid.cells.astype(np.int8)
        changed = np.flatnonzero(cells != self.prev)
        flat = cells.ravel()
        self.prev = cells.copy()
        rrg = state.local_rrg
        ids = sorted(rrg.nodes)
        index = {i: k for k, i in enumerate(ids)}
        nodes = [
            [round(rrg.nodes[i].position[0], 4), round(rrg.nodes[i].position[1], 4), int(rrg.nodes[i].volumetric_gain)]
            for i in ids
        ]
        edges = [[index[a], index[b]] for a, b, _ in rrg.edges()]
        scene = {
            "trail": [list(c) for c in state.trail[self.trail_at :]],
            "grid": [[int(k), int(flat[k])] for k in changed],
            "nodes": nodes,
            "edges": edges,
            "failures": [[round(n.position[0], 4), round(n.position[1], 4), int(n.label)] for n in state.fail.nodes],
            "hull": None,
        }
        if res is not None and state.hull is not None:
            scene["hull"] = [[round(n.position[0], 4), round(n.position[1], 4), int(n.label)] for n in state.hull.boundary]
        self.trail_at = len(state.trail)
        self.scenes[state.iteration] = scene


_LABEL_COLOR = {
    Label.SUCCESSFUL: "#d62728",
    Label.UNKNOWN: "#ff7f0e",
    Label.OCCUPIED: "#7b3294",
    Label.BEYOND_WINDOW: "#c2a5cf",
}
_CELL_COLOR = {1: "#f2f2f2", 2: "#222222"}


def frame_count(steps: int, k: int) -> int:
    return math.ceil(steps / k) if k > 0 else 0


def render_svg(world: World, grid: np.ndarray, scene: dict, robot, scale: float = 20.0) -> str:
    h, w = grid.shape
    res = world.resolution
    W, H = w * res * scale, h * res * scale
    ox, oy = 0.0, 0.0  # world frame starts at the grid corner

    def X(x):
        return (x - ox) * scale

    def Y(y):
        return H - (y - oy) * scale

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W:.0f}" height="{H:.0f}" viewBox="0 0 {W:.1f} {H:.1f}">',
        f'<rect width="{W:.1f}" height="{H:.1f}" fill="#9e9e9e"/>',
    ]
    cs = res * scale
    for iy in range(h):
        row = grid[iy]
        ix = 0
        while ix < w:
            v = int(row[ix])
            j = ix
            while j < w and row[j] == v:
                j += 1
            if v in _CELL_COLOR:
                out.append(
                    f'<rect x="{ix * cs:.1f}" y="{H - (iy + 1) * cs:.1f}" width="{(j - ix) * cs:.1f}" '
                    f'height="{cs:.1f}" fill="{_CELL_COLOR[v]}"/>'
                )
            ix = j
    nodes = scene["nodes"]
    for a, b in scene["edges"]:
        (x1, y1, _), (x2, y2, _) = nodes[a], nodes[b]
        out.append(f'<line x1="{X(x1):.1f}" y1="{Y(y1):.1f}" x2="{X(x2):.1f}" y2="{Y(y2):.1f}" stroke="#e6c700" stroke-width="1"/>')
    hull = scene.get("hull")
    if hull:
        pts = " ".join(f"{X(x):.1f},{Y(y):.1f}" for x, y, _ in hull)
        out.append(f'<polygon points="{pts}" fill="none" stroke="#1f77b4" stroke-width="1.5"/>')
        for x, y, lab in hull:
            out.append(f'<circle cx="{X(x):.1f}" cy="{Y(y):.1f}" r="2.5" fill="{_LABEL_COLOR[Label(lab)]}"/>')
    gmax = max((g for _, _, g in nodes), default=0)
    if gmax > 0:
        rmax = 0.5 * scale
        for x, y, g in nodes:
            if g > 0:
                r = rmax * g / gmax
                out.append(f'<circle cx="{X(x):.1f}" cy="{Y(y):.1f}" r="{r:.2f}" fill="#2ca02c" fill-opacity="0.4"/>')
    rx, ry = robot
    out.append(f'<circle cx="{X(rx):.1f}" cy="{Y(ry):.1f}" r="{0.3 * scale:.1f}" fill="#d62728"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_frames(world: World, records: list[dict], k: int, outdir: Path) -> list[Path]:
    """One SVG per ``k`` robot steps; frame ``j`` shows the iteration that
    contains step ``min((j + 1) * k, steps)``."""
    scenes = [r for r in records if "scene" in r]
    if not scenes:
        raise ConfigError("log has no scene data to render")
    steps = records[-1]["steps"]
    n = frame_count(steps, k)
    outdir.mkdir(parents=True, exist_ok=True)
    trail = [tuple(c) for r in scenes for c in r["scene"]["trail"]]
    grid = np.zeros((world.height, world.width), dtype=np.int8)
    flat = grid.ravel()
    paths = []
    ri = -1
    for j in range(n):
        s = min((j + 1) * k, steps)
        while ri + 1 < len(scenes) and (ri < 0 or scenes[ri]["steps"] < s):
            ri += 1
            for idx, v in scenes[ri]["scene"]["grid"]:
                flat[idx] = v
        cx, cy = trail[s - 1] if s > 0 else world.cell_of(world.spawn)
        robot = ((cx + 0.5) * world.resolution, (cy + 0.5) * world.resolution)
        p = outdir / f"frame_{j:05d}.svg"
        p.write_text(render_svg(world, grid, scenes[ri]["scene"], robot))
        paths.append(p)
    return paths


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def run(cfg: ExperimentConfig, out: Path) -> int:
    world = cfg.load_world()
    params = cfg.planner_params()
    rec = SceneRecorder(world)
    reports: dict[int, GainReport] = {}

    def on_iteration(state, res):
        rec(state, res)
        if res is not None:
            reports[state.iteration] = res.report

    lg, _ = run_to_completion(world, params, cfg.seed, on_iteration, cfg.variants())
    out.mkdir(parents=True, exist_ok=True)
    timing = []
    for r in lg.records:
        t = r.pop("timing", None)
        if t is not None:
            timing.append({"iteration": r["iteration"], **t})
        if r["iteration"] in rec.scenes and r["event"] != "budget_exceeded":
            r["scene"] = rec.scenes[r["iteration"]]
    (out / "summary.json").write_text(lg.summary_json())
    (out / "log.jsonl").write_text(lg.to_jsonl())
    (out / "timing.json").write_text(json.dumps({"wall_time_s": lg.wall_time, "iterations": timing}, indent=1) + "\n")
    (out / "config.ini").write_text(cfg.to_ini())
    gdir = out / "gains"
    gdir.mkdir(exist_ok=True)
    for it, rep in reports.items():
        (gdir / f"iter_{it:05d}.csv").write_text(rep.to_csv())
    if cfg.frame_every > 0:
        render_frames(world, lg.records, cfg.frame_every, out / "frames")
    s = lg.summary
    print(f"{s['world']} {s['variant']} seed={s['seed']} coverage={s['coverage_pct']:.2f}% "
          f"steps={s['steps']} complete={s['complete']}")
    return EXIT_INCOMPLETE if lg.incomplete else EXIT_OK


def bench(cfg: ExperimentConfig, repeats: int) -> dict:
    """Both gains scored on every iteration of one GraphGain-driven run per
    seed, so the two timings share identical inputs."""
    if repeats < 1:
        raise ConfigError("repeats must be >= 1")
    world = cfg.load_world()
    params = dataclasses.replace(cfg.planner_params(), variant="graph")
    runs = []
    for seed in range(cfg.seed, cfg.seed + repeats):
        lg, _ = run_to_completion(world, params, seed, variants=("unknown", "graph"))
        its = [r["timing"] for r in lg.records if "timing" in r]
        g = [t["hull_build"] + t["gain_update"] for t in its]
        u = [t["baseline"] for t in its]
        runs.append({
            "seed": seed,
            "iterations": len(its),
            "graph_mean_s": float(np.mean(g)) if g else 0.0,
            "unknown_mean_s": float(np.mean(u)) if u else 0.0,
            "graph_s": g,
            "unknown_s": u,
        })
    g_all = [x for r in runs for x in r["graph_s"]]
    u_all = [x for r in runs for x in r["unknown_s"]]
    gm = float(np.mean(g_all)) if g_all else 0.0
    um = float(np.mean(u_all)) if u_all else 0.0
    return {
        "world": world.name,
        "repeats": repeats,
        "rows": [
            {"variant": "graph", "mean_s": gm, "iterations": len(g_all)},
            {"variant": "unknown", "mean_s": um, "iterations": len(u_all)},
        ],
        "ratio": gm / um if um > 0 else math.inf,
        "runs": runs,
    }


def format_bench(result: dict) -> str:
    lines = [f"{'variant':<10}{'iterations':>12}{'mean ms/iter':>15}"]
    for r in result["rows"]:
        lines.append(f"{r['variant']:<10}{r['iterations']:>12}{1000 * r['mean_s']:>15.3f}")
    lines.append(f"ratio graph/unknown = {result['ratio']:.3f}")
    return "\n".join(lines)


def validate_world(name: str) -> int:
    try:
        w = get_world(name)
        w.validate()
    except (OSError, WorldError) as e:
        print(f"invalid world {name!r}: {e}", file=sys.stderr)
        return EXIT_CONFIG
    reach = int(np.count_nonzero(w.reachable_mask()))
    print(f"{w.name}: {w.width}x{w.height} cells at {w.resolution:g} m, {reach} reachable free cells")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI file with an [experiment] section")
    for f in fields(ExperimentConfig):
        flag = "--" + f.name.replace("_", "-")
        if f.name == "gain_variant":
            p.add_argument("--gain", "--gain-variant", dest=f.name, choices=("graph", "unknown"), default=None)
        elif f.name == "both_gains":
            p.add_argument(flag, dest=f.name, action="store_const", const="true", default=None)
        else:
            p.add_argument(flag, dest=f.name, default=None)


def _config_from_args(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_ini(args.config) if args.config else ExperimentConfig()
    over = {k: getattr(args, k) for k in ExperimentConfig.keys() if getattr(args, k, None) is not None}
    return cfg.with_overrides(over)


class _Parser(argparse.ArgumentParser):
    # usage errors are config errors; exit 2 is reserved for incomplete runs
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="hullgain", description="Hull-based exploration gain experiments")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    pr = sub.add_parser("run", help="explore one world and write artifacts")
    _add_config_flags(pr)
    pr.add_argument("--out", default="out", help="output directory")
    pr.add_argument("--frames", action="store_true", help="write SVG frames (K defaults to 50 steps)")
    pb = sub.add_parser("bench", help="time both gains on identical trajectories")
    _add_config_flags(pb)
    pb.add_argument("--repeats", type=int, default=1)
    pb.add_argument("--json", help="write the full timing table here")
    pd = sub.add_parser("render", help="re-render SVG frames from a saved run directory")
    pd.add_argument("run_dir")
    pd.add_argument("--every", type=int, default=50, help="K: one frame per K steps")
    pd.add_argument("--out", help="frame directory (default RUN_DIR/frames)")
    pv = sub.add_parser("validate-world", help="check a world file or built-in name")
    pv.add_argument("world")
    return ap


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        if args.cmd == "validate-world":
            return validate_world(args.world)
        if args.cmd == "render":
            d = Path(args.run_dir)
            if args.every < 1:
                raise ConfigError("--every must be >= 1")
            cfg = ExperimentConfig.from_ini(d / "config.ini")
            records = [json.loads(ln) for ln in (d / "log.jsonl").read_text().splitlines() if ln.strip()]
            paths = render_frames(cfg.load_world(), records, args.every, Path(args.out or d / "frames"))
            print(f"wrote {len(paths)} frames")
            return EXIT_OK
        cfg = _config_from_args(args)
        if args.cmd == "run":
            if args.frames and cfg.frame_every == 0:
                cfg = dataclasses.replace(cfg, frame_every=50)
            return run(cfg, Path(args.out))
        result = bench(cfg, args.repeats)
        print(format_bench(result))
        if args.json:
            Path(args.json).write_text(json.dumps(result, indent=1) + "\n")
        return EXIT_OK
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
