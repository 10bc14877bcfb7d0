"""Shared finite-difference and sampling helpers for the test suite."""

from __future__ import annotations

import numpy as np

from gptraj.se2 import Se2Pose
from gptraj.states import MarkovState, MobileConfig


def fd_jacobian(fun, x: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    """Central finite differences of fun: R^n -> R^m."""
    x = np.asarray(x, dtype=float)
    r0 = np.atleast_1d(fun(x))
    jac = np.zeros((r0.size, x.size))
    for k in range(x.size):
        step = np.zeros(x.size)
        step[k] = eps
        jac[:, k] = (np.atleast_1d(fun(x + step)) - np.atleast_1d(fun(x - step))) / (2 * eps)
    return jac


def fd_state_jacobian(fun, state: MarkovState, eps: float = 1e-6) -> np.ndarray:
    """Central finite differences of fun(state) along the state chart."""
    r0 = np.atleast_1d(fun(state))
    dim = state.dim
    jac = np.zeros((r0.size, dim))
    for k in range(dim):
        step = np.zeros(dim)
        step[k] = eps
        plus = np.atleast_1d(fun(state.retract(step)))
        minus = np.atleast_1d(fun(state.retract(-step)))
        jac[:, k] = (plus - minus) / (2 * eps)
    return jac


def rel_err(approx: np.ndarray, exact: np.ndarray) -> float:
    """Max abs difference scaled by the larger of 1 and the exact magnitude."""
    approx = np.asarray(approx)
    exact = np.asarray(exact)
    scale = max(1.0, float(np.max(np.abs(exact))) if exact.size else 1.0)
    return float(np.max(np.abs(approx - exact))) / scale if approx.size else 0.0


def random_pose(rng: np.random.Generator, span: float = 5.0) -> Se2Pose:
    x, y = rng.uniform(-span, span, size=2)
    yaw = rng.uniform(-3.0, 3.0)
    return Se2Pose(x, y, yaw)


def random_config(rng: np.random.Generator, n_arm: int = 2, span: float = 5.0) -> MobileConfig:
    return MobileConfig(random_pose(rng, span), rng.uniform(-2.0, 2.0, size=n_arm))


def random_state(rng: np.random.Generator, n_arm: int = 2, span: float = 5.0) -> MarkovState:
    cfg = random_config(rng, n_arm, span)
    return MarkovState(cfg, rng.uniform(-1.0, 1.0, size=cfg.tangent_dim))
