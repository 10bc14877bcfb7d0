"""Closed-loop runners: plan, execute under noise, measure, update, repeat.

Three modes share one stochastic simulator:

- "steap": batch plan, then a Bayes tree kept current by inserting each new
  pose measurement incrementally; planning and estimation share one posterior.
  The final measurement replaces the goal anchor so the last state is located
  by observation rather than by intent.
- "slap": batch plan, then per step a one-variable filter for the current
  state and a separate batch replan of the remaining trajectory.
- "ol": batch plan executed open loop, no sensing.

The simulator integrates the planned relative motion exactly per substep and
adds uniform velocity noise, so a noiseless run reproduces the plan to within
floating-point roundoff.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field

import numpy as np

from .bayestree import BayesTree, relinearize_to_quiescence
from .environment import (
    BodyModel,
    SignedDistanceField,
    WorldSpec,
    build_sdf,
    config_collides,
    default_body,
)
from .factors import (
    FactorGraph,
    FixFactor,
    GpPriorFactor,
    InterpObstacleFactor,
    MeasurementFactor,
    NoiseModel,
    ObstacleFactor,
)
from .gp import interpolate_state, process_noise_cov
from .optimize import OptimizerConfig, optimize_batch, optimize_values
from .se2 import Se2Pose
from .states import MarkovState, MobileConfig, Trajectory

MODES = ("steap", "slap", "ol")

# relinearization marks below this increment are floating-point noise, not
# linearization error; without the floor a zero threshold would spin forever
RELIN_FLOOR = 1e-9


@dataclass(frozen=True, slots=True)
class ProblemSpec:
    """One trajectory problem: endpoints, horizon, world, and factor scales."""

    start: MobileConfig
    goal: MobileConfig
    world: WorldSpec
    n_intervals: int = 29
    total_time: float = 30.0
    body: BodyModel = field(default_factory=default_body)
    qc: np.ndarray | float = 1.0
    eps: float = 0.2
    sigma_obs: float = 0.05
    sigma_fix: float = 0.01
    sigma_meas: float = 0.01
    n_interp: int = 5

    def __post_init__(self) -> None:
        if self.n_intervals < 2:
            raise ValueError("n_intervals must be at least 2")
        if self.total_time <= 0:
            raise ValueError("total_time must be positive")
        if self.start.arm.shape[0] != self.body.n_links:
            raise ValueError("start arm dimension does not match the body")
        if self.goal.arm.shape[0] != self.body.n_links:
            raise ValueError("goal arm dimension does not match the body")
        d = self.start.tangent_dim
        qc = np.asarray(self.qc, dtype=float)
        if qc.ndim == 0:
            qc = float(qc) * np.eye(d)
        if qc.shape != (d, d):
            raise ValueError(f"qc must be scalar or {d}x{d}")
        object.__setattr__(self, "qc", qc)

    @property
    def dt(self) -> float:
        return self.total_time / self.n_intervals

    @property
    def n_states(self) -> int:
        return self.n_intervals + 1

    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.total_time, self.n_states)


@dataclass(frozen=True, slots=True)
class SimConfig:
    """Stochastic execution and sensing parameters."""

    n_dyn: float = 0.0
    n_cam: float = 0.0
    seed: int = 0
    exec_substeps: int = 10
    rot_scale: float = 1.0

    def __post_init__(self) -> None:
        if self.n_dyn < 0 or self.n_cam < 0:
            raise ValueError("noise levels must be non-negative")
        if self.exec_substeps < 1:
            raise ValueError("exec_substeps must be at least 1")


@dataclass(frozen=True, slots=True)
class SolverConfig:
    """Inference parameters shared by the batch and incremental solvers."""

    ordering: str = "natural"
    relin_threshold: float = 0.1
    collision_resolution: int = 10
    max_relin_cycles: int = 30
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)


# ------------------------------------------------------------ initialization


def initialize_trajectory(spec: ProblemSpec) -> Trajectory:
    """Straight-line interpolation from start to goal at constant velocity."""
    d = spec.start.tangent_dim
    xi = spec.start.local(spec.goal)
    vel = xi / spec.total_time
    n = spec.n_states
    states = []
    for i in range(n):
        cfg = spec.start.retract(xi * (i / spec.n_intervals))
        v = vel if 0 < i < n - 1 else np.zeros(d)
        states.append(MarkovState(cfg, v))
    return Trajectory(spec.times(), tuple(states))


def build_steap_graph(spec: ProblemSpec, sdf: SignedDistanceField) -> tuple[FactorGraph, int]:
    """Full planning graph; returns it with the goal anchor's factor id."""
    d = spec.start.tangent_dim
    dt = spec.dt
    graph = FactorGraph()
    graph.add(FixFactor(0, MarkovState(spec.start, np.zeros(d)), spec.sigma_fix, "StartFix"))
    for i in range(spec.n_intervals):
        graph.add(GpPriorFactor(i, i + 1, dt, spec.qc))
    for i in range(spec.n_states):
        graph.add(ObstacleFactor(i, spec.body, sdf, spec.eps, spec.sigma_obs))
    for i in range(spec.n_intervals):
        for k in range(1, spec.n_interp + 1):
            tau = dt * k / (spec.n_interp + 1)
            graph.add(
                InterpObstacleFactor(
                    i, i + 1, dt, tau, spec.qc, spec.body, sdf, spec.eps, spec.sigma_obs
                )
            )
    goal_fid = graph.add(
        FixFactor(spec.n_states - 1, MarkovState(spec.goal, np.zeros(d)), spec.sigma_fix, "GoalFix")
    )
    return graph, goal_fid


# ------------------------------------------------------------- the simulator


def simulate_execute(
    true_state: MarkovState,
    plan_i: MarkovState,
    plan_j: MarkovState,
    dt: float,
    qc: np.ndarray,
    sim: SimConfig,
    rng: np.random.Generator,
) -> tuple[MarkovState, list[MobileConfig]]:
    """Execute one planned segment from the true state under velocity noise.

    Each substep applies the exact planned relative increment plus a uniform
    velocity perturbation in [-n_dyn, n_dyn] (rotational components scaled by
    rot_scale) integrated over the substep.  Returns the new true state and
    the trace of intermediate configurations (first entry = starting config).
    """
    d = true_state.config.tangent_dim
    scale = np.ones(d)
    scale[2:] = sim.rot_scale
    h = dt / sim.exec_substeps
    cmds = [
        interpolate_state(plan_i, plan_j, dt, k * h, qc) for k in range(sim.exec_substeps + 1)
    ]
    cfg = true_state.config
    trace = [cfg]
    noise = np.zeros(d)
    for k in range(1, sim.exec_substeps + 1):
        inc = cmds[k - 1].config.local(cmds[k].config)
        noise = rng.uniform(-sim.n_dyn, sim.n_dyn, size=d) * scale
        cfg = cfg.retract(inc + noise * h)
        trace.append(cfg)
    return MarkovState(cfg, cmds[-1].velocity + noise), trace


def simulate_measurement(
    true_state: MarkovState, sim: SimConfig, sigma_floor: float, rng: np.random.Generator
) -> tuple[MobileConfig, float]:
    """Noisy pose observation and the standard deviation its factor should use."""
    d = true_state.config.tangent_dim
    eta = rng.normal(0.0, 1.0, size=d) * sim.n_cam
    return true_state.config.retract(eta), max(sim.n_cam, sigma_floor)


def segment_collision_free(
    si: MarkovState,
    sj: MarkovState,
    dt: float,
    qc: np.ndarray,
    body: BodyModel,
    sdf: SignedDistanceField,
    resolution: int,
) -> bool:
    """Check the interpolated planned segment at resolution+1 points."""
    for k in range(resolution + 1):
        state = interpolate_state(si, sj, dt, dt * k / resolution, qc)
        if config_collides(state.config, body, sdf):
            return False
    return True


# ------------------------------------------------------------------- records


def _flat_config(cfg: MobileConfig) -> np.ndarray:
    return np.concatenate([[cfg.base.x, cfg.base.y, cfg.base.yaw], cfg.arm])


def config_to_dict(cfg: MobileConfig) -> dict:
    return {
        "x": cfg.base.x,
        "y": cfg.base.y,
        "yaw": cfg.base.yaw,
        "arm": cfg.arm.tolist(),
    }


def config_from_dict(data: dict) -> MobileConfig:
    return MobileConfig(Se2Pose(data["x"], data["y"], data["yaw"]), np.asarray(data["arm"]))


def state_to_dict(state: MarkovState) -> dict:
    return {"config": config_to_dict(state.config), "velocity": state.velocity.tolist()}


def state_from_dict(data: dict) -> MarkovState:
    return MarkovState(config_from_dict(data["config"]), np.asarray(data["velocity"]))


@dataclass(slots=True)
class RunRecord:
    """Everything one closed-loop run produced, serializable to JSON."""

    mode: str
    times: np.ndarray
    world: WorldSpec
    ground_truth: list[MarkovState]
    estimated: list[MarkovState] | None
    measurements: list[MobileConfig | None]
    plans: list[list[MarkovState]]
    step_times: list[float]
    reeliminated: list[int]
    plan_time: float
    success: bool
    failure_step: int | None = None
    failure_reason: str | None = None
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "times": np.asarray(self.times).tolist(),
            "world": self.world.to_dict(),
            "ground_truth": [state_to_dict(s) for s in self.ground_truth],
            "estimated": None
            if self.estimated is None
            else [state_to_dict(s) for s in self.estimated],
            "measurements": [None if m is None else config_to_dict(m) for m in self.measurements],
            "plans": [[state_to_dict(s) for s in plan] for plan in self.plans],
            "step_times": list(self.step_times),
            "reeliminated": list(self.reeliminated),
            "plan_time": self.plan_time,
            "success": self.success,
            "failure_step": self.failure_step,
            "failure_reason": self.failure_reason,
            "meta": self.meta,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, data: dict) -> RunRecord:
        return cls(
            mode=data["mode"],
            times=np.asarray(data["times"]),
            world=WorldSpec.from_dict(data["world"]),
            ground_truth=[state_from_dict(s) for s in data["ground_truth"]],
            estimated=None
            if data["estimated"] is None
            else [state_from_dict(s) for s in data["estimated"]],
            measurements=[
                None if m is None else config_from_dict(m) for m in data["measurements"]
            ],
            plans=[[state_from_dict(s) for s in plan] for plan in data["plans"]],
            step_times=list(data["step_times"]),
            reeliminated=list(data["reeliminated"]),
            plan_time=data["plan_time"],
            success=data["success"],
            failure_step=data["failure_step"],
            failure_reason=data["failure_reason"],
            meta=data.get("meta", {}),
        )

    @classmethod
    def from_json(cls, text: str) -> RunRecord:
        return cls.from_dict(json.loads(text))

    def plan_hash(self, step: int) -> str:
        plan = self.plans[min(step, len(self.plans) - 1)]
        payload = np.concatenate(
            [np.concatenate([_flat_config(s.config), s.velocity]) for s in plan]
        )
        return hashlib.sha1(payload.tobytes()).hexdigest()[:12]

    def log_lines(self) -> list[str]:
        meta = " ".join(f"{k}={v}" for k, v in sorted(self.meta.items()))
        lines = [f"run mode={self.mode} {meta}".rstrip()]
        for i in range(len(self.step_times)):
            meas = self.measurements[i + 1] if i + 1 < len(self.measurements) else None
            pose = (
                "-"
                if meas is None
                else f"({meas.base.x:.4f},{meas.base.y:.4f},{meas.base.yaw:.4f})"
            )
            reelim = self.reeliminated[i] if i < len(self.reeliminated) else 0
            lines.append(
                f"step {i + 1}: meas={pose} reelim={reelim} "
                f"time={self.step_times[i]:.6f} plan={self.plan_hash(i)}"
            )
        tail = f"result success={self.success}"
        if not self.success:
            tail += f" failure_step={self.failure_step} reason={self.failure_reason!r}"
        lines.append(tail)
        return lines


# ------------------------------------------------------------------- metrics


@dataclass(frozen=True, slots=True)
class RunMetrics:
    success: bool
    goal_err_trans: float | None
    goal_err_rot: float | None
    est_err_trans: float | None
    est_err_rot: float | None
    meas_err_trans: float | None
    mean_step_time: float
    mean_reeliminated: float | None
    failure_step: int | None

    def to_dict(self) -> dict:
        return {
            "success": self.success,
            "goal_err_trans": self.goal_err_trans,
            "goal_err_rot": self.goal_err_rot,
            "est_err_trans": self.est_err_trans,
            "est_err_rot": self.est_err_rot,
            "meas_err_trans": self.meas_err_trans,
            "mean_step_time": self.mean_step_time,
            "mean_reeliminated": self.mean_reeliminated,
            "failure_step": self.failure_step,
        }


def compute_metrics(record: RunRecord, spec: ProblemSpec) -> RunMetrics:
    """Tangent-space error summaries of one run.

    Goal errors compare the final true configuration against the goal;
    estimation errors are root-mean-square tangent gaps between truth and
    estimate over all states both cover, split into translation (x, y) and
    rotation (yaw plus joints); measurement error is the same statistic for
    the raw observations.
    """
    goal_trans = goal_rot = None
    if record.success and record.ground_truth:
        gap = spec.goal.local(record.ground_truth[-1].config)
        goal_trans = float(np.linalg.norm(gap[:2]))
        goal_rot = float(np.linalg.norm(gap[2:]))

    est_trans = est_rot = None
    if record.estimated is not None:
        sq_t, sq_r, count = 0.0, 0.0, 0
        for truth, est in zip(record.ground_truth, record.estimated):
            gap = truth.config.local(est.config)
            sq_t += float(gap[:2] @ gap[:2])
            sq_r += float(gap[2:] @ gap[2:])
            count += 1
        if count:
            est_trans = float(np.sqrt(sq_t / count))
            est_rot = float(np.sqrt(sq_r / count))

    meas_trans = None
    pairs = [
        (truth, m)
        for truth, m in zip(record.ground_truth, record.measurements)
        if m is not None
    ]
    if pairs:
        sq = sum(
            float(np.linalg.norm(truth.config.local(m)[:2]) ** 2) for truth, m in pairs
        )
        meas_trans = float(np.sqrt(sq / len(pairs)))

    mean_step = float(np.mean(record.step_times)) if record.step_times else 0.0
    mean_reelim = float(np.mean(record.reeliminated)) if record.reeliminated else None
    return RunMetrics(
        success=record.success,
        goal_err_trans=goal_trans,
        goal_err_rot=goal_rot,
        est_err_trans=est_trans,
        est_err_rot=est_rot,
        meas_err_trans=meas_trans,
        mean_step_time=mean_step,
        mean_reeliminated=mean_reelim,
        failure_step=record.failure_step,
    )


# ------------------------------------------------------------------- runners


def _spawn_rngs(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    """Independent execution and measurement streams from one seed.

    Splitting the streams makes the dynamics noise realization identical
    across modes run with the same seed, so mode comparisons are paired.
    """
    exec_ss, meas_ss = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(exec_ss), np.random.default_rng(meas_ss)


def _check_endpoints(spec: ProblemSpec, sdf: SignedDistanceField) -> None:
    if config_collides(spec.start, spec.body, sdf):
        raise ValueError("start configuration is in collision")
    if config_collides(spec.goal, spec.body, sdf):
        raise ValueError("goal configuration is in collision")


def _tree_plan(tree: BayesTree, n_states: int) -> list[MarkovState]:
    est = tree.estimate()
    return [est[i] for i in range(n_states)]


def _batch_plan(
    spec: ProblemSpec, sdf: SignedDistanceField, solver: SolverConfig
) -> tuple[FactorGraph, int, Trajectory, float]:
    graph, goal_fid = build_steap_graph(spec, sdf)
    t0 = time.perf_counter()
    traj, report = optimize_batch(graph, initialize_trajectory(spec), solver.optimizer)
    if not report.converged:
        # a plan that merely hit the iteration cap is still usable; the
        # collision gate decides whether it is safe to follow
        pass
    return graph, goal_fid, traj, time.perf_counter() - t0


def _base_meta(spec: ProblemSpec, sim: SimConfig, solver: SolverConfig, mode: str) -> dict:
    return {
        "mode": mode,
        "seed": sim.seed,
        "n_dyn": sim.n_dyn,
        "n_cam": sim.n_cam,
        "ordering": solver.ordering,
        "n_intervals": spec.n_intervals,
        "total_time": spec.total_time,
    }


def run_steap(
    spec: ProblemSpec, sim: SimConfig | None = None, solver: SolverConfig | None = None
) -> RunRecord:
    """Closed loop with a shared posterior: plan, execute, measure, update."""
    sim = sim or SimConfig()
    solver = solver or SolverConfig()
    sdf = build_sdf(spec.world)
    _check_endpoints(spec, sdf)
    rng_exec, rng_meas = _spawn_rngs(sim.seed)
    n = spec.n_states
    dt = spec.dt

    graph, goal_fid, plan_traj, plan_time = _batch_plan(spec, sdf, solver)
    values = {i: s for i, s in enumerate(plan_traj.states)}
    tree = BayesTree.from_factor_graph(graph, values, mode=solver.ordering)
    tree.solve()

    true_state = MarkovState(spec.start, np.zeros(spec.start.tangent_dim))
    truth = [true_state]
    measurements: list[MobileConfig | None] = [None]
    plans: list[list[MarkovState]] = []
    step_times: list[float] = []
    reelim: list[int] = []
    success = True
    failure_step = failure_reason = None
    threshold = max(solver.relin_threshold, RELIN_FLOOR)

    for i in range(spec.n_intervals):
        plan = _tree_plan(tree, n)
        plans.append(plan)
        if not segment_collision_free(
            plan[i], plan[i + 1], dt, spec.qc, spec.body, sdf, solver.collision_resolution
        ):
            success, failure_step = False, i
            failure_reason = "planned segment in collision"
            break
        true_state, trace = simulate_execute(
            true_state, plan[i], plan[i + 1], dt, spec.qc, sim, rng_exec
        )
        truth.append(true_state)
        if any(config_collides(c, spec.body, sdf) for c in trace[1:]):
            success, failure_step = False, i
            failure_reason = "collision during execution"
            measurements.append(None)
            break
        meas_cfg, meas_std = simulate_measurement(true_state, sim, spec.sigma_meas, rng_meas)
        measurements.append(meas_cfg)
        t0 = time.perf_counter()
        factor = MeasurementFactor(i + 1, meas_cfg, meas_std)
        if i == spec.n_intervals - 1:
            tree.update([factor], removed_factors=(goal_fid,))
        else:
            tree.update([factor])
        count = tree.last_update_size
        tree.solve()
        count += relinearize_to_quiescence(tree, threshold, solver.max_relin_cycles)
        step_times.append(time.perf_counter() - t0)
        reelim.append(count)

    return RunRecord(
        mode="steap",
        times=spec.times(),
        world=spec.world,
        ground_truth=truth,
        estimated=_tree_plan(tree, n),
        measurements=measurements,
        plans=plans,
        step_times=step_times,
        reeliminated=reelim,
        plan_time=plan_time,
        success=success,
        failure_step=failure_step,
        failure_reason=failure_reason,
        meta=_base_meta(spec, sim, solver, "steap"),
    )


def run_ol(
    spec: ProblemSpec, sim: SimConfig | None = None, solver: SolverConfig | None = None
) -> RunRecord:
    """Batch plan executed open loop: no sensing, no updates."""
    sim = sim or SimConfig()
    solver = solver or SolverConfig()
    sdf = build_sdf(spec.world)
    _check_endpoints(spec, sdf)
    rng_exec, _ = _spawn_rngs(sim.seed)
    dt = spec.dt

    _, _, plan_traj, plan_time = _batch_plan(spec, sdf, solver)
    plan = list(plan_traj.states)

    true_state = MarkovState(spec.start, np.zeros(spec.start.tangent_dim))
    truth = [true_state]
    success = True
    failure_step = failure_reason = None
    for i in range(spec.n_intervals):
        if not segment_collision_free(
            plan[i], plan[i + 1], dt, spec.qc, spec.body, sdf, solver.collision_resolution
        ):
            success, failure_step = False, i
            failure_reason = "planned segment in collision"
            break
        true_state, trace = simulate_execute(
            true_state, plan[i], plan[i + 1], dt, spec.qc, sim, rng_exec
        )
        truth.append(true_state)
        if any(config_collides(c, spec.body, sdf) for c in trace[1:]):
            success, failure_step = False, i
            failure_reason = "collision during execution"
            break

    return RunRecord(
        mode="ol",
        times=spec.times(),
        world=spec.world,
        ground_truth=truth,
        estimated=None,
        measurements=[None] * len(truth),
        plans=[plan],
        step_times=[],
        reeliminated=[],
        plan_time=plan_time,
        success=success,
        failure_step=failure_step,
        failure_reason=failure_reason,
        meta=_base_meta(spec, sim, solver, "ol"),
    )


def run_slap(
    spec: ProblemSpec, sim: SimConfig | None = None, solver: SolverConfig | None = None
) -> RunRecord:
    """Separated baseline: filter the current state, then replan the future."""
    sim = sim or SimConfig()
    solver = solver or SolverConfig()
    sdf = build_sdf(spec.world)
    _check_endpoints(spec, sdf)
    rng_exec, rng_meas = _spawn_rngs(sim.seed)
    n = spec.n_states
    dt = spec.dt
    d = spec.start.tangent_dim

    _, _, plan_traj, plan_time = _batch_plan(spec, sdf, solver)
    plan = list(plan_traj.states)

    true_state = MarkovState(spec.start, np.zeros(d))
    est_state = MarkovState(spec.start, np.zeros(d))
    truth = [true_state]
    estimates = [est_state]
    measurements: list[MobileConfig | None] = [None]
    plans: list[list[MarkovState]] = []
    step_times: list[float] = []
    success = True
    failure_step = failure_reason = None
    process_noise = NoiseModel(process_noise_cov(dt, spec.qc))

    for i in range(spec.n_intervals):
        plans.append(list(plan))
        if not segment_collision_free(
            plan[i], plan[i + 1], dt, spec.qc, spec.body, sdf, solver.collision_resolution
        ):
            success, failure_step = False, i
            failure_reason = "planned segment in collision"
            break
        true_state, trace = simulate_execute(
            true_state, plan[i], plan[i + 1], dt, spec.qc, sim, rng_exec
        )
        truth.append(true_state)
        if any(config_collides(c, spec.body, sdf) for c in trace[1:]):
            success, failure_step = False, i
            failure_reason = "collision during execution"
            measurements.append(None)
            break
        meas_cfg, meas_std = simulate_measurement(true_state, sim, spec.sigma_meas, rng_meas)
        measurements.append(meas_cfg)
        t0 = time.perf_counter()

        # filter: propagate the previous estimate by the commanded segment
        # increment (the executed control input), then fuse the measurement
        commanded = plan[i].config.local(plan[i + 1].config)
        predicted = MarkovState(
            est_state.config.retract(commanded), plan[i + 1].velocity
        )
        filter_graph = FactorGraph()
        filter_graph.add(FixFactor(0, predicted, kind="StartFix", noise=process_noise))
        filter_graph.add(MeasurementFactor(0, meas_cfg, meas_std))
        solved, _ = optimize_values(filter_graph, {0: predicted}, solver.optimizer)
        est_state = solved[0]
        estimates.append(est_state)

        # replan the remaining states anchored at the estimate
        if i < spec.n_intervals - 1:
            future = FactorGraph()
            future.add(FixFactor(i + 1, est_state, spec.sigma_fix, "StartFix"))
            for j in range(i + 1, spec.n_intervals):
                future.add(GpPriorFactor(j, j + 1, dt, spec.qc))
            for j in range(i + 1, n):
                future.add(ObstacleFactor(j, spec.body, sdf, spec.eps, spec.sigma_obs))
            for j in range(i + 1, spec.n_intervals):
                for k in range(1, spec.n_interp + 1):
                    tau = dt * k / (spec.n_interp + 1)
                    future.add(
                        InterpObstacleFactor(
                            j, j + 1, dt, tau, spec.qc, spec.body, sdf,
                            spec.eps, spec.sigma_obs,
                        )
                    )
            future.add(
                FixFactor(n - 1, MarkovState(spec.goal, np.zeros(d)), spec.sigma_fix, "GoalFix")
            )
            init = {j: plan[j] for j in range(i + 1, n)}
            init[i + 1] = est_state
            solved, _ = optimize_values(future, init, solver.optimizer)
            for j in range(i + 1, n):
                plan[j] = solved[j]
        step_times.append(time.perf_counter() - t0)

    return RunRecord(
        mode="slap",
        times=spec.times(),
        world=spec.world,
        ground_truth=truth,
        estimated=estimates,
        measurements=measurements,
        plans=plans,
        step_times=step_times,
        reeliminated=[],
        plan_time=plan_time,
        success=success,
        failure_step=failure_step,
        failure_reason=failure_reason,
        meta=_base_meta(spec, sim, solver, "slap"),
    )


def run_mode(
    mode: str,
    spec: ProblemSpec,
    sim: SimConfig | None = None,
    solver: SolverConfig | None = None,
) -> RunRecord:
    if mode == "steap":
        return run_steap(spec, sim, solver)
    if mode == "slap":
        return run_slap(spec, sim, solver)
    if mode == "ol":
        return run_ol(spec, sim, solver)
    raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
