"""Batch nonlinear least-squares over a factor graph (Levenberg-Marquardt).

Solves the damped normal equations (A^T A + lambda I) delta = -A^T b on the
whitened linearization, retracts accepted steps on the state manifold, and
rejects steps that increase the total error by raising the damping.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .factors import FactorGraph
from .states import MarkovState, Trajectory


@dataclass(frozen=True, slots=True)
class OptimizerConfig:
    """Termination and damping parameters for the batch solver."""

    max_iterations: int = 100
    relative_error_tol: float = 1e-6
    delta_norm_tol: float = 1e-8
    init_damping: float = 1e-5
    damping_increase: float = 10.0
    damping_decrease: float = 0.1
    max_damping: float = 1e12

    def __post_init__(self) -> None:
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.init_damping <= 0:
            raise ValueError("init_damping must be positive")


@dataclass(slots=True)
class SolveReport:
    converged: bool
    iterations: int
    error: float
    initial_error: float
    reason: str
    step_errors: list[float] = field(default_factory=list)


def _apply_delta(
    values: dict[int, MarkovState], delta: np.ndarray, offsets: dict[int, int]
) -> dict[int, MarkovState]:
    out = {}
    for v, state in values.items():
        c0 = offsets[v]
        out[v] = state.retract(delta[c0 : c0 + state.dim])
    return out


def optimize_values(
    graph: FactorGraph,
    init: dict[int, MarkovState],
    config: OptimizerConfig | None = None,
) -> tuple[dict[int, MarkovState], SolveReport]:
    """Minimize the graph error starting from init; returns (values, report)."""
    config = config or OptimizerConfig()
    values = dict(init)
    error = graph.error(values)
    report = SolveReport(False, 0, error, error, "max iterations", [error])
    if not graph.factors:
        report.converged = True
        report.reason = "empty graph"
        return values, report

    damping = config.init_damping
    for it in range(1, config.max_iterations + 1):
        report.iterations = it
        system = graph.linearize(values)
        h, g, offsets = system.normal_equations()
        accepted = False
        while damping <= config.max_damping:
            h_damped = h + damping * np.eye(h.shape[0])
            try:
                delta = np.linalg.solve(h_damped, -g)
            except np.linalg.LinAlgError:
                damping *= config.damping_increase
                continue
            trial = _apply_delta(values, delta, offsets)
            trial_error = graph.error(trial)
            if np.isfinite(trial_error) and trial_error <= error:
                values = trial
                damping = max(damping * config.damping_decrease, 1e-15)
                accepted = True
                break
            damping *= config.damping_increase
        if not accepted:
            report.error = error
            report.reason = "damping limit reached without an acceptable step"
            return values, report

        prev_error = error
        error = trial_error
        report.step_errors.append(error)
        report.error = error
        if np.linalg.norm(delta) < config.delta_norm_tol:
            report.converged = True
            report.reason = "delta norm below tolerance"
            return values, report
        if (prev_error - error) <= config.relative_error_tol * max(prev_error, 1e-300):
            report.converged = True
            report.reason = "relative error decrease below tolerance"
            return values, report

    report.error = error
    return values, report


def optimize_batch(
    graph: FactorGraph,
    init: Trajectory,
    config: OptimizerConfig | None = None,
) -> tuple[Trajectory, SolveReport]:
    """Trajectory-in, trajectory-out wrapper around optimize_values."""
    values = {i: s for i, s in enumerate(init.states)}
    solved, report = optimize_values(graph, values, config)
    states = tuple(solved[i] for i in range(len(init.states)))
    return Trajectory(init.times, states), report


def timed_batch(
    graph: FactorGraph, init: Trajectory, config: OptimizerConfig | None = None
) -> tuple[Trajectory, SolveReport, float]:
    t0 = time.perf_counter()
    traj, report = optimize_batch(graph, init, config)
    return traj, report, time.perf_counter() - t0
