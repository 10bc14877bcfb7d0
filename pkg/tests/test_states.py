from __future__ import annotations

import numpy as np
import pytest

from gptraj.se2 import Se2Pose
from gptraj.states import MarkovState, MobileConfig, Trajectory, VectorConfig
from helpers import fd_jacobian, random_config, random_state


def test_retract_local_round_trip():
    rng = np.random.default_rng(10)
    for _ in range(200):
        a = random_config(rng)
        delta = rng.uniform(-2, 2, size=a.tangent_dim)
        delta[2] = rng.uniform(-2.5, 2.5)
        b = a.retract(delta)
        assert np.max(np.abs(a.local(b) - delta)) < 1e-10
        c = random_config(rng)
        assert np.max(np.abs(a.retract(a.local(c)).local(c))) < 1e-10


def test_local_jacobians_finite_differences():
    rng = np.random.default_rng(11)
    for _ in range(100):
        a = random_config(rng)
        b = random_config(rng)
        j_self, j_other = a.local_jacobians(b)

        def f_self(d, a=a, b=b):
            return a.retract(d).local(b)

        def f_other(d, a=a, b=b):
            return a.local(b.retract(d))

        assert np.max(np.abs(fd_jacobian(f_self, np.zeros(a.tangent_dim)) - j_self)) < 1e-7
        assert np.max(np.abs(fd_jacobian(f_other, np.zeros(a.tangent_dim)) - j_other)) < 1e-7


def test_retract_jacobians_finite_differences():
    rng = np.random.default_rng(12)
    for _ in range(100):
        a = random_config(rng)
        eta = rng.uniform(-1.5, 1.5, size=a.tangent_dim)
        base_point = a.retract(eta)
        j_point, j_delta = a.retract_jacobians(eta)

        def f_point(d, a=a, eta=eta, base_point=base_point):
            return base_point.local(a.retract(d).retract(eta))

        def f_delta(d, a=a, eta=eta, base_point=base_point):
            return base_point.local(a.retract(eta + d))

        assert np.max(np.abs(fd_jacobian(f_point, np.zeros(a.tangent_dim)) - j_point)) < 1e-7
        assert np.max(np.abs(fd_jacobian(f_delta, np.zeros(a.tangent_dim)) - j_delta)) < 1e-7


def test_vector_config_chart():
    a = VectorConfig(np.array([1.0, 2.0]))
    b = VectorConfig(np.array([0.5, -1.0]))
    assert np.allclose(a.local(b), [-0.5, -3.0])
    assert np.allclose(a.retract(a.local(b)).values, b.values)
    j_self, j_other = a.local_jacobians(b)
    assert np.allclose(j_self, -np.eye(2))
    assert np.allclose(j_other, np.eye(2))


def test_markov_state_chart_and_dim():
    rng = np.random.default_rng(13)
    s = random_state(rng, n_arm=2)
    assert s.dim == 10
    delta = rng.uniform(-0.5, 0.5, size=10)
    t = s.retract(delta)
    assert np.max(np.abs(s.local(t) - delta)) < 1e-10


def test_markov_state_velocity_dim_mismatch():
    cfg = MobileConfig(Se2Pose(0, 0, 0), np.zeros(2))
    with pytest.raises(ValueError):
        MarkovState(cfg, np.zeros(3))


def test_trajectory_validation():
    cfg = MobileConfig(Se2Pose(0, 0, 0), np.zeros(1))
    s = MarkovState(cfg, np.zeros(4))
    traj = Trajectory(np.array([0.0, 1.0, 2.0]), (s, s, s))
    assert len(traj) == 3
    assert traj[1] is s
    with pytest.raises(ValueError):
        Trajectory(np.array([0.0, 1.0, 1.0]), (s, s, s))
    with pytest.raises(ValueError):
        Trajectory(np.array([0.0, 1.0]), (s, s, s))
