"""State containers for a planar mobile base with an attached arm.

A configuration pairs a planar pose with arm joint angles; a Markov state
augments it with the tangent-space velocity used by the constant-velocity
prior.  Configurations expose a chart (``retract``/``local``) plus the chart
Jacobians the factors linearize through.  ``VectorConfig`` implements the
same protocol for plain vector-space states, where every chart Jacobian is
the identity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .se2 import (
    Se2Pose,
    se2_adjoint,
    se2_exp,
    se2_jacobian_left_inv,
    se2_jacobian_right,
    se2_jacobian_right_inv,
    se2_log,
)


def _block_diag3(base: np.ndarray, n_arm: int) -> np.ndarray:
    out = np.eye(3 + n_arm)
    out[:3, :3] = base
    return out


@dataclass(frozen=True, slots=True)
class MobileConfig:
    """Configuration of the mobile base (pose) and arm (joint angles, rad).

    Tangent ordering is (vx, vy, omega, joint rates...), base first.
    """

    base: Se2Pose
    arm: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self) -> None:
        object.__setattr__(self, "arm", np.atleast_1d(np.asarray(self.arm, dtype=float)))

    @property
    def tangent_dim(self) -> int:
        return 3 + self.arm.shape[0]

    def retract(self, delta: np.ndarray) -> MobileConfig:
        """Apply a tangent perturbation: base * exp(delta_base), arm + delta_arm."""
        delta = np.asarray(delta, dtype=float)
        return MobileConfig(self.base.compose(se2_exp(delta[:3])), self.arm + delta[3:])

    def local(self, other: MobileConfig) -> np.ndarray:
        """Tangent vector xi with other = self.retract(xi)."""
        xi = se2_log(self.base.inverse().compose(other.base))
        return np.concatenate([xi, other.arm - self.arm])

    def local_jacobians(self, other: MobileConfig) -> tuple[np.ndarray, np.ndarray]:
        """Jacobians of local(self, other) w.r.t. perturbations of each argument."""
        xi = se2_log(self.base.inverse().compose(other.base))
        n = self.arm.shape[0]
        j_self = -_block_diag3(se2_jacobian_left_inv(xi), n)
        j_other = _block_diag3(se2_jacobian_right_inv(xi), n)
        return j_self, j_other

    def retract_jacobians(self, delta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Jacobians of retract(self, delta) w.r.t. self and delta.

        Both map into the tangent space at the retracted configuration.
        """
        delta = np.asarray(delta, dtype=float)
        n = self.arm.shape[0]
        j_point = _block_diag3(se2_adjoint(se2_exp(delta[:3]).inverse()), n)
        j_delta = _block_diag3(se2_jacobian_right(delta[:3]), n)
        return j_point, j_delta


@dataclass(frozen=True, slots=True)
class VectorConfig:
    """A plain vector-space configuration; the chart is addition."""

    values: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", np.atleast_1d(np.asarray(self.values, dtype=float)))

    @property
    def tangent_dim(self) -> int:
        return self.values.shape[0]

    def retract(self, delta: np.ndarray) -> VectorConfig:
        return VectorConfig(self.values + np.asarray(delta, dtype=float))

    def local(self, other: VectorConfig) -> np.ndarray:
        return other.values - self.values

    def local_jacobians(self, other: VectorConfig) -> tuple[np.ndarray, np.ndarray]:
        eye = np.eye(self.tangent_dim)
        return -eye, eye.copy()

    def retract_jacobians(self, delta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        eye = np.eye(self.tangent_dim)
        return eye, eye.copy()


@dataclass(frozen=True, slots=True)
class MarkovState:
    """Configuration plus tangent-space velocity (body frame for the base)."""

    config: MobileConfig | VectorConfig
    velocity: np.ndarray

    def __post_init__(self) -> None:
        vel = np.atleast_1d(np.asarray(self.velocity, dtype=float))
        if vel.shape[0] != self.config.tangent_dim:
            raise ValueError(
                f"velocity dim {vel.shape[0]} != config tangent dim {self.config.tangent_dim}"
            )
        object.__setattr__(self, "velocity", vel)

    @property
    def dim(self) -> int:
        """Tangent dimension of the full state (config + velocity)."""
        return 2 * self.config.tangent_dim

    def retract(self, delta: np.ndarray) -> MarkovState:
        """Perturb config on its chart and velocity additively."""
        delta = np.asarray(delta, dtype=float)
        d = self.config.tangent_dim
        if delta.shape[0] != 2 * d:
            raise ValueError(f"delta dim {delta.shape[0]} != state dim {2 * d}")
        return MarkovState(self.config.retract(delta[:d]), self.velocity + delta[d:])

    def local(self, other: MarkovState) -> np.ndarray:
        return np.concatenate([self.config.local(other.config), other.velocity - self.velocity])


@dataclass(frozen=True, slots=True)
class Trajectory:
    """Support states at strictly increasing timestamps."""

    times: np.ndarray
    states: tuple[MarkovState, ...]

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=float)
        if times.ndim != 1 or times.shape[0] != len(self.states):
            raise ValueError("times and states must have matching length")
        if times.shape[0] >= 2 and not np.all(np.diff(times) > 0):
            raise ValueError("timestamps must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", tuple(self.states))

    def __len__(self) -> int:
        return len(self.states)

    def __getitem__(self, i: int) -> MarkovState:
        return self.states[i]
