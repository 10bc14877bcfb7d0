"""Constant-velocity Gaussian-process prior on Markov states.

The prior is the linear time-invariant SDE with white-noise acceleration of
spectral density Q_C.  Between support times it yields the transition

    Phi(dt) = [[I, dt I], [0, I]]

and the process noise covariance

    Q(dt) = [[dt^3/3 Qc, dt^2/2 Qc], [dt^2/2 Qc, dt Qc]].

On the pose manifold the prior acts on the local Markov state (local pose,
body velocity) around the earlier support state, with the local velocity
approximated by the body velocity (tangent Jacobian taken as identity).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .states import MarkovState


@dataclass(frozen=True, slots=True)
class GpParams:
    """Spectral density Q_C of the white-noise-on-acceleration prior."""

    qc: np.ndarray

    def __post_init__(self) -> None:
        qc = np.atleast_2d(np.asarray(self.qc, dtype=float))
        if qc.shape[0] != qc.shape[1]:
            raise ValueError("Q_C must be square")
        object.__setattr__(self, "qc", qc)

    @classmethod
    def isotropic(cls, scale: float, dim: int) -> GpParams:
        return cls(scale * np.eye(dim))


def transition_matrix(dt: float, dim: int) -> np.ndarray:
    """State transition Phi(dt) for a dim-dimensional configuration tangent."""
    phi = np.eye(2 * dim)
    phi[:dim, dim:] = dt * np.eye(dim)
    return phi


def _process_noise(dt: float, qc: np.ndarray) -> np.ndarray:
    qc = np.atleast_2d(qc)
    dim = qc.shape[0]
    q = np.zeros((2 * dim, 2 * dim))
    q[:dim, :dim] = (dt**3 / 3.0) * qc
    q[:dim, dim:] = (dt**2 / 2.0) * qc
    q[dim:, :dim] = (dt**2 / 2.0) * qc
    q[dim:, dim:] = dt * qc
    return q


def process_noise_cov(dt: float, qc: np.ndarray) -> np.ndarray:
    """Process noise covariance Q(dt); dt must be positive."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    return _process_noise(dt, qc)


def gp_error_vector(state_i: MarkovState, state_j: MarkovState, dt: float) -> np.ndarray:
    """Prior residual Phi(dt) theta_i - theta_j for vector-space states."""
    pi, vi = state_i.config.values, state_i.velocity
    pj, vj = state_j.config.values, state_j.velocity
    return np.concatenate([pi + dt * vi - pj, vi - vj])


def gp_error_lie(state_i: MarkovState, state_j: MarkovState, dt: float) -> np.ndarray:
    """Prior residual on the local Markov state around state_i.

    The local state of state_i is (0, v_i) and of state_j is (xi, v_j) with
    xi = local(config_i, config_j), giving residual
    (v_i dt - xi, v_i - v_j).
    """
    xi = state_i.config.local(state_j.config)
    return np.concatenate([state_i.velocity * dt - xi, state_i.velocity - state_j.velocity])


def gp_error_lie_jacobians(
    state_i: MarkovState, state_j: MarkovState, dt: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Residual and its Jacobians w.r.t. the two state tangents."""
    d = state_i.config.tangent_dim
    r = gp_error_lie(state_i, state_j, dt)
    dxi_i, dxi_j = state_i.config.local_jacobians(state_j.config)
    ji = np.zeros((2 * d, 2 * d))
    ji[:d, :d] = -dxi_i
    ji[:d, d:] = dt * np.eye(d)
    ji[d:, d:] = np.eye(d)
    jj = np.zeros((2 * d, 2 * d))
    jj[:d, :d] = -dxi_j
    jj[d:, d:] = -np.eye(d)
    return r, ji, jj


def gp_interp_coeffs(dt: float, tau: float, qc: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Interpolation gains (Lambda, Psi) for a query at offset tau in [0, dt].

    The interpolated local state is Lambda gamma_i + Psi gamma_j, conditioning
    the prior on the two support states in O(1).
    """
    if not 0.0 <= tau <= dt:
        raise ValueError(f"tau={tau} outside [0, {dt}]")
    qc = np.atleast_2d(qc)
    dim = qc.shape[0]
    phi_tau = transition_matrix(tau, dim)
    phi_rest = transition_matrix(dt - tau, dim)
    q_tau = _process_noise(tau, qc)
    q_full = process_noise_cov(dt, qc)
    psi = np.linalg.solve(q_full.T, (q_tau @ phi_rest.T).T).T
    lam = phi_tau - psi @ transition_matrix(dt, dim)
    return lam, psi


def interpolate_state(
    state_i: MarkovState, state_j: MarkovState, dt: float, tau: float, qc: np.ndarray
) -> MarkovState:
    """Posterior mean state at offset tau between two support states."""
    lam, psi = gp_interp_coeffs(dt, tau, qc)
    d = state_i.config.tangent_dim
    gamma_i = np.concatenate([np.zeros(d), state_i.velocity])
    gamma_j = np.concatenate([state_i.config.local(state_j.config), state_j.velocity])
    eta = lam @ gamma_i + psi @ gamma_j
    return MarkovState(state_i.config.retract(eta[:d]), eta[d:])
