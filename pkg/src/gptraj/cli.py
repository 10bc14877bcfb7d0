"""Command-line interface: run one episode, sweep a benchmark, plot a record."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np
import yaml

from .bench import BenchConfig, benchmark_to_files, generate_obstacles, read_csv
from .environment import AxisBox, WorldSpec, default_body
from .optimize import OptimizerConfig
from .runtime import ProblemSpec, RunRecord, SimConfig, SolverConfig, compute_metrics, run_mode
from .se2 import Se2Pose
from .states import MobileConfig
from .svgplot import save_run_svg


class ConfigError(Exception):
    """A config file is missing, malformed, or contains unknown keys."""


def _take(section: dict | None, allowed: tuple[str, ...], name: str) -> dict:
    if section is None:
        return {}
    if not isinstance(section, dict):
        raise ConfigError(f"section {name!r} must be a mapping")
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown keys in section {name!r}: {', '.join(unknown)}")
    return dict(section)


def load_config(path: str | Path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"config root in {path} must be a mapping")
    known = ("mode", "problem", "world", "generator", "sim", "solver", "bench")
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"unknown top-level keys: {', '.join(unknown)}")
    return data


def _endpoint(raw, name: str) -> MobileConfig:
    spec = _take(raw, ("pose", "arm"), name)
    pose = spec.get("pose")
    if pose is None or len(pose) != 3:
        raise ConfigError(f"{name}.pose must be [x, y, yaw]")
    arm = np.asarray(spec.get("arm", ()), dtype=float)
    return MobileConfig(Se2Pose(*[float(v) for v in pose]), arm)


def build_world(config: dict, keep_clear: list[np.ndarray], clear_radius: float) -> WorldSpec:
    world = _take(config.get("world"), ("extent", "cell_size", "obstacles"), "world")
    extent = np.asarray(world.get("extent", (26.0, 18.0)), dtype=float)
    cell_size = float(world.get("cell_size", 0.1))
    raw_boxes = world.get("obstacles")
    gen = _take(
        config.get("generator"),
        ("n_obstacles", "obstacle_size", "clearance", "seed", "max_draws"),
        "generator",
    )
    if raw_boxes is not None and gen:
        raise ConfigError("world.obstacles and generator are mutually exclusive")
    if raw_boxes is not None:
        boxes = []
        for k, raw in enumerate(raw_boxes):
            box = _take(raw, ("center", "size"), f"world.obstacles[{k}]")
            if "center" not in box or "size" not in box:
                raise ConfigError(f"world.obstacles[{k}] needs center and size")
            boxes.append(
                AxisBox(
                    np.asarray(box["center"], dtype=float),
                    np.asarray(box["size"], dtype=float),
                )
            )
        return WorldSpec(extent, cell_size, tuple(boxes))
    if gen:
        rng = np.random.default_rng(int(gen.get("seed", 0)))
        boxes = generate_obstacles(
            rng,
            extent,
            int(gen.get("n_obstacles", 10)),
            np.asarray(gen.get("obstacle_size", (1.0, 1.0)), dtype=float),
            keep_clear,
            clear_radius + float(gen.get("clearance", 0.5)),
            int(gen.get("max_draws", 1000)),
        )
        return WorldSpec(extent, cell_size, boxes)
    return WorldSpec(extent, cell_size, ())


def build_problem(config: dict) -> ProblemSpec:
    fields = (
        "start", "goal", "n_intervals", "total_time", "qc", "eps",
        "sigma_obs", "sigma_fix", "sigma_meas", "n_interp",
    )
    problem = _take(config.get("problem"), fields, "problem")
    if "start" not in problem or "goal" not in problem:
        raise ConfigError("problem.start and problem.goal are required")
    start = _endpoint(problem["start"], "problem.start")
    goal = _endpoint(problem["goal"], "problem.goal")
    body = default_body(n_links=start.arm.size)
    eps = float(problem.get("eps", 0.25))
    world = build_world(
        config,
        [np.array([start.base.x, start.base.y]), np.array([goal.base.x, goal.base.y])],
        body.max_reach() + eps,
    )
    qc_raw = problem.get("qc", 0.01)
    qc = np.diag(np.asarray(qc_raw, dtype=float)) if isinstance(qc_raw, list) else float(qc_raw)
    try:
        return ProblemSpec(
            start=start,
            goal=goal,
            world=world,
            n_intervals=int(problem.get("n_intervals", 19)),
            total_time=float(problem.get("total_time", 20.0)),
            body=body,
            qc=qc,
            eps=eps,
            sigma_obs=float(problem.get("sigma_obs", 0.05)),
            sigma_fix=float(problem.get("sigma_fix", 0.01)),
            sigma_meas=float(problem.get("sigma_meas", 0.01)),
            n_interp=int(problem.get("n_interp", 5)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def build_sim(
    config: dict,
    seed_override: int | None = None,
    n_dyn_override: float | None = None,
    n_cam_override: float | None = None,
) -> SimConfig:
    fields = ("n_dyn", "n_cam", "seed", "exec_substeps", "rot_scale")
    sim = _take(config.get("sim"), fields, "sim")
    seed = seed_override if seed_override is not None else int(sim.get("seed", 0))
    n_dyn = n_dyn_override if n_dyn_override is not None else float(sim.get("n_dyn", 0.0))
    n_cam = n_cam_override if n_cam_override is not None else float(sim.get("n_cam", 0.0))
    return SimConfig(
        n_dyn=n_dyn,
        n_cam=n_cam,
        seed=seed,
        exec_substeps=int(sim.get("exec_substeps", 10)),
        rot_scale=float(sim.get("rot_scale", 1.0)),
    )


def build_solver(config: dict) -> SolverConfig:
    fields = ("ordering", "relin_threshold", "collision_resolution",
              "max_relin_cycles", "optimizer")
    solver = _take(config.get("solver"), fields, "solver")
    opt_fields = ("max_iterations", "relative_error_tol", "delta_norm_tol",
                  "init_damping", "damping_increase", "damping_decrease", "max_damping")
    opt = _take(solver.get("optimizer"), opt_fields, "solver.optimizer")
    optimizer = OptimizerConfig(**{k: type(getattr(OptimizerConfig(), k))(v)
                                   for k, v in opt.items()})
    try:
        return SolverConfig(
            ordering=str(solver.get("ordering", "natural")),
            relin_threshold=float(solver.get("relin_threshold", 0.1)),
            collision_resolution=int(solver.get("collision_resolution", 10)),
            max_relin_cycles=int(solver.get("max_relin_cycles", 30)),
            optimizer=optimizer,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def build_bench(config: dict) -> BenchConfig:
    fields = (
        "modes", "n_dyn_grid", "n_cam_grid", "n_seeds", "base_seed",
        "extent", "cell_size", "n_obstacles", "obstacle_size", "clearance",
        "max_draws", "start", "goal", "arm", "n_intervals", "total_time",
        "qc", "eps", "n_interp", "relin_threshold", "max_relin_cycles",
    )
    bench = _take(config.get("bench"), fields, "bench")
    defaults = {f.name: f.default for f in dataclasses.fields(BenchConfig)}
    kwargs = {}
    for key, value in bench.items():
        default = defaults[key]
        kwargs[key] = tuple(value) if isinstance(default, tuple) else type(default)(value)
    try:
        return BenchConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _cmd_run(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    spec = build_problem(config)
    sim = build_sim(config, args.seed, args.n_dyn, args.n_cam)
    solver = build_solver(config)
    mode = args.mode or str(config.get("mode", "steap"))
    try:
        record = run_mode(mode, spec, sim, solver)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if not args.quiet:
        for line in record.log_lines():
            print(line)
    metrics = compute_metrics(record, spec)
    print("metrics " + json.dumps(metrics.to_dict(), sort_keys=True))
    if args.out:
        Path(args.out).write_text(record.to_json())
        print(f"record written to {args.out}")
    if args.plot:
        save_run_svg(record, args.plot)
        print(f"svg written to {args.plot}")
    return 0


def _cmd_bench(args: argparse.Namespace) -> int:
    config = load_config(args.config) if args.config else {}
    cfg = build_bench(config)
    progress = None
    if not args.quiet:
        def progress(row: dict) -> None:
            print(
                f"done mode={row['mode']} n_dyn={row['n_dyn']:g} "
                f"n_cam={row['n_cam']:g} seed={row['seed']} "
                f"success={row['success']}"
            )
    runs_path, agg_path = benchmark_to_files(
        cfg, args.out, workers=args.jobs, progress=progress
    )
    print(f"runs written to {runs_path}")
    print(f"aggregate written to {agg_path}")
    for row in read_csv(agg_path):
        print(
            f"agg mode={row['mode']} n_dyn={row['n_dyn']:g} n_cam={row['n_cam']:g} "
            f"success_rate={row['success_rate']:g} "
            f"est_err_trans={row['est_err_trans'] if row['est_err_trans'] is not None else '-'}"
        )
    return 0


def _cmd_plot(args: argparse.Namespace) -> int:
    try:
        text = Path(args.record).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read record {args.record}: {exc}") from exc
    try:
        record = RunRecord.from_json(text)
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"invalid run record {args.record}: {exc}") from exc
    save_run_svg(record, args.out, width=args.width)
    print(f"svg written to {args.out}")
    return 0


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gptraj",
        description="Trajectory estimation and planning on factor graphs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one simulated episode")
    run.add_argument("--config", required=True, help="YAML problem config")
    run.add_argument("--mode", choices=("steap", "slap", "ol"), default=None)
    run.add_argument("--seed", type=int, default=None, help="override sim.seed")
    run.add_argument("--n-dyn", type=float, default=None, help="override sim.n_dyn")
    run.add_argument("--n-cam", type=float, default=None, help="override sim.n_cam")
    run.add_argument("--out", default=None, help="write the run record JSON here")
    run.add_argument("--plot", default=None, help="write a trajectory SVG here")
    run.add_argument("--quiet", action="store_true", help="suppress step logs")
    run.set_defaults(func=_cmd_run)

    bench = sub.add_parser("bench", help="sweep modes x noise x seeds")
    bench.add_argument("--config", default=None, help="YAML with a bench section")
    bench.add_argument("--out", required=True, help="directory for CSV outputs")
    bench.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    bench.add_argument("--quiet", action="store_true", help="suppress per-run lines")
    bench.set_defaults(func=_cmd_bench)

    plot = sub.add_parser("plot", help="render a saved run record to SVG")
    plot.add_argument("--record", required=True, help="run record JSON file")
    plot.add_argument("--out", required=True, help="output SVG path")
    plot.add_argument("--width", type=int, default=900)
    plot.set_defaults(func=_cmd_plot)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
