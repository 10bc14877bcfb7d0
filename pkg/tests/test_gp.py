from __future__ import annotations

import numpy as np
import pytest

from gptraj.gp import (
    GpParams,
    gp_error_lie,
    gp_error_lie_jacobians,
    gp_error_vector,
    gp_interp_coeffs,
    interpolate_state,
    process_noise_cov,
    transition_matrix,
)
from gptraj.states import MarkovState, VectorConfig
from helpers import random_state


def _vector_state(pos, vel):
    return MarkovState(VectorConfig(np.asarray(pos, dtype=float)), np.asarray(vel, dtype=float))


def _dense_interp_oracle(dt, tau, qc, gamma_i, gamma_j):
    # Condition the three-state joint Gaussian of the Markov chain
    # (x_i, x_tau, x_j) with prior x_i ~ N(0, I) on the two endpoints.
    d = qc.shape[0]
    p0 = np.eye(2 * d)
    phi_t = transition_matrix(tau, d)
    phi_r = transition_matrix(dt - tau, d)
    q_t = process_noise_cov(tau, qc) if tau > 0 else np.zeros((2 * d, 2 * d))
    s_tt = phi_t @ p0 @ phi_t.T + q_t
    cov_ti = phi_t @ p0
    cov_tj = s_tt @ phi_r.T
    s_ii = p0
    s_ij = p0 @ (phi_r @ phi_t).T
    s_jj = phi_r @ s_tt @ phi_r.T + process_noise_cov(dt - tau, qc)
    joint = np.block([[s_ii, s_ij], [s_ij.T, s_jj]])
    cross = np.hstack([cov_ti, cov_tj])
    return cross @ np.linalg.solve(joint, np.concatenate([gamma_i, gamma_j]))


def test_transition_matrix_values():
    assert np.allclose(transition_matrix(1.0, 1), [[1.0, 1.0], [0.0, 1.0]])
    phi = transition_matrix(2.0, 2)
    assert np.allclose(phi[:2, 2:], 2.0 * np.eye(2))
    assert np.allclose(phi[:2, :2], np.eye(2))
    assert np.allclose(phi[2:, 2:], np.eye(2))
    assert np.allclose(phi[2:, :2], 0.0)


def test_process_noise_cov_values():
    q = process_noise_cov(1.0, np.eye(1))
    assert np.allclose(q, [[1.0 / 3.0, 0.5], [0.5, 1.0]])
    q2 = process_noise_cov(2.0, np.eye(1))
    assert np.allclose(q2, [[8.0 / 3.0, 2.0], [2.0, 2.0]])


def test_process_noise_cov_spd_and_validation():
    rng = np.random.default_rng(20)
    for _ in range(50):
        dim = rng.integers(1, 5)
        a = rng.normal(size=(dim, dim))
        qc = a @ a.T + dim * np.eye(dim)
        dt = rng.uniform(0.05, 4.0)
        q = process_noise_cov(dt, qc)
        assert np.allclose(q, q.T, atol=1e-12)
        assert np.min(np.linalg.eigvalsh(q)) > 0
    with pytest.raises(ValueError):
        process_noise_cov(0.0, np.eye(2))
    with pytest.raises(ValueError):
        process_noise_cov(-1.0, np.eye(2))


def test_gp_params_validation():
    with pytest.raises(ValueError):
        GpParams(np.zeros((2, 3)))
    p = GpParams.isotropic(0.5, 3)
    assert np.allclose(p.qc, 0.5 * np.eye(3))


def test_gp_error_vector_zero_on_propagation():
    rng = np.random.default_rng(21)
    for _ in range(50):
        d = rng.integers(1, 4)
        pos = rng.normal(size=d)
        vel = rng.normal(size=d)
        dt = rng.uniform(0.1, 3.0)
        si = _vector_state(pos, vel)
        sj = _vector_state(pos + dt * vel, vel)
        assert np.max(np.abs(gp_error_vector(si, sj, dt))) < 1e-12


def test_gp_error_vector_sign_convention():
    si = _vector_state([1.0], [2.0])
    sj = _vector_state([0.0], [0.5])
    # Phi theta_i - theta_j = [1 + 2*1 - 0, 2 - 0.5]
    assert np.allclose(gp_error_vector(si, sj, 1.0), [3.0, 1.5])


def test_gp_error_lie_zero_on_geodesics():
    rng = np.random.default_rng(22)
    for _ in range(100):
        si = random_state(rng)
        dt = rng.uniform(0.1, 3.0)
        d = si.config.tangent_dim
        sj = MarkovState(si.config.retract(si.velocity * dt), si.velocity.copy())
        assert np.max(np.abs(gp_error_lie(si, sj, dt))) < 1e-10


def test_gp_error_lie_jacobians_finite_differences():
    from helpers import fd_state_jacobian

    rng = np.random.default_rng(23)
    for _ in range(100):
        si = random_state(rng)
        sj = random_state(rng)
        dt = rng.uniform(0.2, 2.0)
        r, ji, jj = gp_error_lie_jacobians(si, sj, dt)
        assert np.allclose(r, gp_error_lie(si, sj, dt))
        fd_i = fd_state_jacobian(lambda s: gp_error_lie(s, sj, dt), si)
        fd_j = fd_state_jacobian(lambda s: gp_error_lie(si, s, dt), sj)
        scale = max(1.0, np.max(np.abs(fd_i)), np.max(np.abs(fd_j)))
        assert np.max(np.abs(fd_i - ji)) / scale < 1e-5
        assert np.max(np.abs(fd_j - jj)) / scale < 1e-5


def test_interp_coeffs_endpoints():
    rng = np.random.default_rng(24)
    for _ in range(20):
        d = rng.integers(1, 4)
        qc = rng.uniform(0.2, 3.0) * np.eye(d)
        dt = rng.uniform(0.2, 3.0)
        lam0, psi0 = gp_interp_coeffs(dt, 0.0, qc)
        assert np.max(np.abs(lam0 - np.eye(2 * d))) < 1e-10
        assert np.max(np.abs(psi0)) < 1e-10
        lam1, psi1 = gp_interp_coeffs(dt, dt, qc)
        assert np.max(np.abs(lam1)) < 1e-10
        assert np.max(np.abs(psi1 - np.eye(2 * d))) < 1e-10
    with pytest.raises(ValueError):
        gp_interp_coeffs(1.0, 1.5, np.eye(2))
    with pytest.raises(ValueError):
        gp_interp_coeffs(1.0, -0.1, np.eye(2))


def test_interp_matches_dense_conditioning_oracle():
    rng = np.random.default_rng(25)
    for _ in range(100):
        d = int(rng.integers(1, 4))
        a = rng.normal(size=(d, d))
        qc = a @ a.T + d * np.eye(d)
        dt = rng.uniform(0.2, 3.0)
        tau = rng.uniform(0.05, 0.95) * dt
        lam, psi = gp_interp_coeffs(dt, tau, qc)
        gamma_i = rng.normal(size=2 * d)
        gamma_j = rng.normal(size=2 * d)
        expected = _dense_interp_oracle(dt, tau, qc, gamma_i, gamma_j)
        got = lam @ gamma_i + psi @ gamma_j
        assert np.max(np.abs(got - expected)) < 1e-8


def test_interpolate_state_endpoints_exact():
    rng = np.random.default_rng(26)
    for _ in range(50):
        si = random_state(rng)
        sj = random_state(rng)
        dt = rng.uniform(0.2, 2.0)
        qc = np.eye(si.config.tangent_dim)
        at_i = interpolate_state(si, sj, dt, 0.0, qc)
        at_j = interpolate_state(si, sj, dt, dt, qc)
        assert np.max(np.abs(si.local(at_i))) < 1e-10
        assert np.max(np.abs(sj.local(at_j))) < 1e-10


def test_interpolate_state_exact_on_geodesics():
    rng = np.random.default_rng(27)
    for _ in range(50):
        si = random_state(rng)
        dt = rng.uniform(0.2, 2.0)
        tau = rng.uniform(0.0, 1.0) * dt
        qc = rng.uniform(0.3, 2.0) * np.eye(si.config.tangent_dim)
        sj = MarkovState(si.config.retract(si.velocity * dt), si.velocity.copy())
        expected = MarkovState(si.config.retract(si.velocity * tau), si.velocity.copy())
        got = interpolate_state(si, sj, dt, tau, qc)
        assert np.max(np.abs(expected.local(got))) < 1e-8
