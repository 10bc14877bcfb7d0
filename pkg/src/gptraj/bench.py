"""Benchmark sweeps over modes, noise levels, and seeds on random worlds."""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .environment import AxisBox, WorldSpec, default_body
from .runtime import ProblemSpec, SimConfig, SolverConfig, compute_metrics, run_mode
from .se2 import Se2Pose
from .states import MobileConfig

_WORLD_SALT = 0
_SIM_SALT = 1

RUN_FIELDS = (
    "mode",
    "n_dyn",
    "n_cam",
    "seed",
    "success",
    "goal_err_trans",
    "goal_err_rot",
    "est_err_trans",
    "est_err_rot",
    "meas_err_trans",
    "mean_step_time",
    "mean_reeliminated",
    "plan_time",
    "failure_step",
)

AGGREGATE_FIELDS = (
    "mode",
    "n_dyn",
    "n_cam",
    "n_runs",
    "n_success",
    "success_rate",
    "goal_err_trans",
    "goal_err_rot",
    "est_err_trans",
    "est_err_rot",
    "meas_err_trans",
    "mean_step_time",
    "mean_reeliminated",
)

_MEAN_FIELDS = AGGREGATE_FIELDS[6:]


@dataclass(frozen=True, slots=True)
class BenchConfig:
    """Full description of a benchmark sweep.

    One random world is drawn per seed index and shared by every mode and
    noise cell, so rows with equal ``seed`` differ only in controller and
    noise scale.  All fields are plain Python scalars and tuples so the
    config can cross process boundaries and round-trip through YAML.
    """

    modes: tuple[str, ...] = ("steap", "slap", "ol")
    n_dyn_grid: tuple[float, ...] = (0.1, 0.2)
    n_cam_grid: tuple[float, ...] = (0.02, 0.1)
    n_seeds: int = 20
    base_seed: int = 0
    # world generation
    extent: tuple[float, float] = (26.0, 18.0)
    cell_size: float = 0.1
    n_obstacles: int = 10
    obstacle_size: tuple[float, float] = (1.0, 1.0)
    clearance: float = 0.5
    max_draws: int = 1000
    # problem
    start: tuple[float, float, float] = (-10.0, -6.0, 0.54)
    goal: tuple[float, float, float] = (10.0, 6.0, 0.54)
    arm: tuple[float, ...] = (0.0, 3.0)
    n_intervals: int = 19
    total_time: float = 20.0
    qc: float = 0.01
    eps: float = 0.25
    n_interp: int = 5
    # solver
    relin_threshold: float = 0.1
    max_relin_cycles: int = 8

    def __post_init__(self) -> None:
        if self.n_seeds < 1:
            raise ValueError("n_seeds must be at least 1")
        for mode in self.modes:
            if mode not in ("steap", "slap", "ol"):
                raise ValueError(f"unknown mode {mode!r}")
        if not self.modes:
            raise ValueError("modes must not be empty")


def _derived_rng(base_seed: int, seed_idx: int, salt: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((base_seed, seed_idx, salt)))


def _sim_seed(base_seed: int, seed_idx: int) -> int:
    seq = np.random.SeedSequence((base_seed, seed_idx, _SIM_SALT))
    return int(seq.generate_state(1, np.uint64)[0])


def generate_obstacles(
    rng: np.random.Generator,
    extent: Sequence[float],
    n_obstacles: int,
    obstacle_size: Sequence[float],
    keep_clear: Sequence[np.ndarray],
    clear_radius: float,
    max_draws: int = 1000,
) -> tuple[AxisBox, ...]:
    """Draw axis-aligned boxes uniformly, rejecting any near protected points.

    Box centers are sampled so the whole box stays inside the workspace.
    A draw is rejected when the box surface comes within ``clear_radius``
    of any point in ``keep_clear``.  Raises ValueError when ``max_draws``
    total draws are spent before placing all obstacles.
    """
    half = np.asarray(extent, dtype=float) / 2.0
    size = np.asarray(obstacle_size, dtype=float)
    lo, hi = -(half - size / 2.0), half - size / 2.0
    if np.any(lo >= hi):
        raise ValueError("obstacle size does not fit inside the workspace")
    boxes: list[AxisBox] = []
    draws = 0
    while len(boxes) < n_obstacles:
        draws += 1
        if draws > max_draws:
            raise ValueError(
                f"placed only {len(boxes)}/{n_obstacles} obstacles "
                f"after {max_draws} draws"
            )
        center = rng.uniform(lo, hi)
        box = AxisBox(center, size.copy())
        if any(box.distance_to_point(p) <= clear_radius for p in keep_clear):
            continue
        boxes.append(box)
    return tuple(boxes)


def generate_world(cfg: BenchConfig, seed_idx: int) -> WorldSpec:
    """Build the world for one benchmark seed (same for every mode/cell)."""
    rng = _derived_rng(cfg.base_seed, seed_idx, _WORLD_SALT)
    body = default_body(n_links=len(cfg.arm))
    radius = body.max_reach() + cfg.eps + cfg.clearance
    keep_clear = [np.asarray(cfg.start[:2]), np.asarray(cfg.goal[:2])]
    boxes = generate_obstacles(
        rng,
        cfg.extent,
        cfg.n_obstacles,
        cfg.obstacle_size,
        keep_clear,
        radius,
        cfg.max_draws,
    )
    return WorldSpec(np.asarray(cfg.extent, dtype=float), cfg.cell_size, boxes)


def make_problem(cfg: BenchConfig, world: WorldSpec) -> ProblemSpec:
    arm = np.asarray(cfg.arm, dtype=float)
    return ProblemSpec(
        start=MobileConfig(Se2Pose(*cfg.start), arm.copy()),
        goal=MobileConfig(Se2Pose(*cfg.goal), arm.copy()),
        world=world,
        n_intervals=cfg.n_intervals,
        total_time=cfg.total_time,
        body=default_body(n_links=len(cfg.arm)),
        qc=cfg.qc,
        eps=cfg.eps,
        n_interp=cfg.n_interp,
    )


def run_cell(
    cfg: BenchConfig, mode: str, n_dyn: float, n_cam: float, seed_idx: int
) -> dict:
    """Run one (mode, noise, seed) cell and reduce it to a flat row."""
    world = generate_world(cfg, seed_idx)
    spec = make_problem(cfg, world)
    sim = SimConfig(n_dyn=n_dyn, n_cam=n_cam, seed=_sim_seed(cfg.base_seed, seed_idx))
    solver = SolverConfig(
        relin_threshold=cfg.relin_threshold, max_relin_cycles=cfg.max_relin_cycles
    )
    record = run_mode(mode, spec, sim, solver)
    metrics = compute_metrics(record, spec)
    row = {"mode": mode, "n_dyn": n_dyn, "n_cam": n_cam, "seed": seed_idx}
    row.update(metrics.to_dict())
    row["success"] = int(metrics.success)
    row["plan_time"] = record.plan_time
    return row


def _run_cell_task(args: tuple) -> dict:
    return run_cell(*args)


def run_benchmark(
    cfg: BenchConfig,
    workers: int = 1,
    progress: Callable[[dict], None] | None = None,
) -> list[dict]:
    """Run the full sweep; identical row lists for any worker count."""
    tasks = [
        (cfg, mode, n_dyn, n_cam, seed_idx)
        for mode in cfg.modes
        for n_dyn in cfg.n_dyn_grid
        for n_cam in cfg.n_cam_grid
        for seed_idx in range(cfg.n_seeds)
    ]
    rows: list[dict] = []
    if workers <= 1:
        for task in tasks:
            row = _run_cell_task(task)
            if progress is not None:
                progress(row)
            rows.append(row)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for row in pool.map(_run_cell_task, tasks):
                if progress is not None:
                    progress(row)
                rows.append(row)
    mode_pos = {mode: k for k, mode in enumerate(cfg.modes)}
    rows.sort(key=lambda r: (mode_pos[r["mode"]], r["n_dyn"], r["n_cam"], r["seed"]))
    return rows


def aggregate_rows(rows: Sequence[dict]) -> list[dict]:
    """Group per-run rows by (mode, n_dyn, n_cam); average over successes.

    Error means are computed over successful runs only; a cell with no
    successes (or a metric absent for the mode) leaves the field None.
    Input order of the groups is preserved.
    """
    groups: dict[tuple, list[dict]] = {}
    for row in rows:
        groups.setdefault((row["mode"], row["n_dyn"], row["n_cam"]), []).append(row)
    out = []
    for (mode, n_dyn, n_cam), members in groups.items():
        wins = [r for r in members if r["success"]]
        agg = {
            "mode": mode,
            "n_dyn": n_dyn,
            "n_cam": n_cam,
            "n_runs": len(members),
            "n_success": len(wins),
            "success_rate": len(wins) / len(members),
        }
        for name in _MEAN_FIELDS:
            vals = [r[name] for r in wins if r.get(name) is not None]
            agg[name] = float(np.mean(vals)) if vals else None
        out.append(agg)
    return out


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def _write_csv(path: str | Path, rows: Sequence[dict], fields: Sequence[str]) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(fields)
        for row in rows:
            writer.writerow([_fmt(row.get(name)) for name in fields])


def write_runs_csv(path: str | Path, rows: Sequence[dict]) -> None:
    _write_csv(path, rows, RUN_FIELDS)


def write_aggregate_csv(path: str | Path, rows: Sequence[dict]) -> None:
    _write_csv(path, aggregate_rows(rows), AGGREGATE_FIELDS)


def read_csv(path: str | Path) -> list[dict]:
    """Read a benchmark CSV back; numbers parsed, empty cells become None."""
    out: list[dict] = []
    with open(path, newline="") as handle:
        for row in csv.DictReader(handle):
            parsed: dict = {}
            for key, text in row.items():
                if text == "":
                    parsed[key] = None
                elif key in ("mode",):
                    parsed[key] = text
                elif key in ("seed", "success", "n_runs", "n_success", "failure_step"):
                    parsed[key] = int(text)
                else:
                    parsed[key] = float(text)
            out.append(parsed)
    return out


def benchmark_to_files(
    cfg: BenchConfig,
    out_dir: str | Path,
    workers: int = 1,
    progress: Callable[[dict], None] | None = None,
) -> tuple[Path, Path]:
    """Run the sweep and write runs.csv plus aggregate.csv under out_dir."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = run_benchmark(cfg, workers=workers, progress=progress)
    runs_path = out / "runs.csv"
    agg_path = out / "aggregate.csv"
    write_runs_csv(runs_path, rows)
    write_aggregate_csv(agg_path, rows)
    return runs_path, agg_path
