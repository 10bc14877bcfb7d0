"""Factor graph over Markov states (configuration plus velocity).

Each factor measures a residual e and a noise covariance Sigma; its
contribution to the negative log posterior is 0.5 * e^T Sigma^-1 e.
Linearization whitens residuals and Jacobians by the inverse square root of
Sigma so that stacking all rows yields an ordinary least-squares problem.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg as sla

from . import environment as env
from .gp import gp_error_lie_jacobians, gp_interp_coeffs, process_noise_cov
from .states import MarkovState, MobileConfig


@dataclass(frozen=True, slots=True)
class NoiseModel:
    """Gaussian noise with cached whitening transform.

    whiten(e) = L^-1 e for the Cholesky factor Sigma = L L^T, so that
    ||whiten(e)||^2 = e^T Sigma^-1 e.
    """

    covariance: np.ndarray
    _sqrt_info: np.ndarray = field(repr=False, compare=False, default=None)

    def __post_init__(self) -> None:
        cov = np.atleast_2d(np.asarray(self.covariance, dtype=float))
        if cov.shape[0] != cov.shape[1]:
            raise ValueError("covariance must be square")
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            raise ValueError("covariance must be symmetric positive definite") from exc
        object.__setattr__(self, "covariance", cov)
        object.__setattr__(
            self, "_sqrt_info", sla.solve_triangular(chol, np.eye(cov.shape[0]), lower=True)
        )

    @property
    def dim(self) -> int:
        return self.covariance.shape[0]

    @classmethod
    def isotropic(cls, sigma: float, dim: int) -> NoiseModel:
        if sigma <= 0:
            raise ValueError("sigma must be positive")
        return cls(np.eye(dim) * sigma**2)

    @classmethod
    def diagonal(cls, sigmas: np.ndarray) -> NoiseModel:
        sigmas = np.asarray(sigmas, dtype=float)
        if np.any(sigmas <= 0):
            raise ValueError("sigmas must be positive")
        return cls(np.diag(sigmas**2))

    @classmethod
    def from_covariance(cls, cov: np.ndarray) -> NoiseModel:
        return cls(cov)

    def whiten(self, e: np.ndarray) -> np.ndarray:
        return self._sqrt_info @ e

    def whiten_jacobian(self, jac: np.ndarray) -> np.ndarray:
        return self._sqrt_info @ jac


class Factor:
    """Base of all factors; subclasses fill vars, noise, and the residual."""

    kind: str = "?"

    def __init__(self, vars_: tuple[int, ...], noise: NoiseModel) -> None:
        self.vars = tuple(int(v) for v in vars_)
        self.noise = noise

    @property
    def dim(self) -> int:
        return self.noise.dim

    def error(self, states: list[MarkovState]) -> np.ndarray:
        raise NotImplementedError

    def error_and_jacobians(
        self, states: list[MarkovState]
    ) -> tuple[np.ndarray, list[np.ndarray]]:
        raise NotImplementedError

    def __repr__(self) -> str:
        return f"{type(self).__name__}(vars={self.vars})"


class GpPriorFactor(Factor):
    """Constant-velocity process prior between consecutive states."""

    kind = "GpPrior"

    def __init__(self, i: int, j: int, dt: float, qc: np.ndarray) -> None:
        if dt <= 0:
            raise ValueError("dt must be positive")
        self.dt = float(dt)
        self.qc = np.atleast_2d(np.asarray(qc, dtype=float))
        super().__init__((i, j), NoiseModel(process_noise_cov(self.dt, self.qc)))

    def error(self, states: list[MarkovState]) -> np.ndarray:
        return gp_error_lie_jacobians(states[0], states[1], self.dt)[0]

    def error_and_jacobians(self, states: list[MarkovState]):
        r, jac_i, jac_j = gp_error_lie_jacobians(states[0], states[1], self.dt)
        return r, [jac_i, jac_j]


class FixFactor(Factor):
    """Soft equality to a target state (start or goal anchor)."""

    kind = "StartFix"

    def __init__(
        self,
        var: int,
        target: MarkovState,
        sigma: float | None = None,
        kind: str = "StartFix",
        noise: NoiseModel | None = None,
    ) -> None:
        if kind not in ("StartFix", "GoalFix"):
            raise ValueError(f"unknown fix kind {kind!r}")
        self.kind = kind
        self.target = target
        if noise is None:
            noise = NoiseModel.isotropic(sigma, target.dim)
        elif noise.dim != target.dim:
            raise ValueError("noise dimension does not match the target state")
        super().__init__((var,), noise)

    def error(self, states: list[MarkovState]) -> np.ndarray:
        cur = states[0]
        return np.concatenate(
            [self.target.config.local(cur.config), cur.velocity - self.target.velocity]
        )

    def error_and_jacobians(self, states: list[MarkovState]):
        cur = states[0]
        d = cur.config.tangent_dim
        xi = self.target.config.local(cur.config)
        _, j_cur = self.target.config.local_jacobians(cur.config)
        jac = np.zeros((2 * d, 2 * d))
        jac[:d, :d] = j_cur
        jac[d:, d:] = np.eye(d)
        return np.concatenate([xi, cur.velocity - self.target.velocity]), [jac]


class MeasurementFactor(Factor):
    """Pose-only observation of one state's configuration."""

    kind = "Measurement"

    def __init__(self, var: int, mean: MobileConfig, sigma: float) -> None:
        self.mean = mean
        super().__init__((var,), NoiseModel.isotropic(sigma, mean.tangent_dim))

    def error(self, states: list[MarkovState]) -> np.ndarray:
        return self.mean.local(states[0].config)

    def error_and_jacobians(self, states: list[MarkovState]):
        cur = states[0]
        d = cur.config.tangent_dim
        xi = self.mean.local(cur.config)
        _, j_cur = self.mean.local_jacobians(cur.config)
        jac = np.zeros((d, 2 * d))
        jac[:, :d] = j_cur
        return xi, [jac]


class ObstacleFactor(Factor):
    """Hinge obstacle cost on one support state, one row per body sphere."""

    kind = "Obstacle"

    def __init__(
        self,
        var: int,
        body: env.BodyModel,
        sdf: env.SignedDistanceField,
        eps: float,
        sigma: float,
    ) -> None:
        self.body = body
        self.sdf = sdf
        self.eps = float(eps)
        super().__init__((var,), NoiseModel.isotropic(sigma, body.n_spheres))

    def error(self, states: list[MarkovState]) -> np.ndarray:
        return env.obstacle_error(states[0].config, self.body, self.sdf, self.eps)[0]

    def error_and_jacobians(self, states: list[MarkovState]):
        cur = states[0]
        d = cur.config.tangent_dim
        r, j_cfg = env.obstacle_error(cur.config, self.body, self.sdf, self.eps)
        jac = np.zeros((r.shape[0], 2 * d))
        jac[:, :d] = j_cfg
        return r, [jac]


class InterpObstacleFactor(Factor):
    """Hinge obstacle cost at an interpolated time between two support states.

    The configuration at offset tau inside the interval [t_i, t_j] is the
    Gaussian-process posterior mean given the two endpoint states; the factor
    back-propagates the obstacle gradient through that interpolation.
    """

    kind = "ObstacleInterp"

    def __init__(
        self,
        i: int,
        j: int,
        dt: float,
        tau: float,
        qc: np.ndarray,
        body: env.BodyModel,
        sdf: env.SignedDistanceField,
        eps: float,
        sigma: float,
    ) -> None:
        self.dt = float(dt)
        self.tau = float(tau)
        self.qc = np.atleast_2d(np.asarray(qc, dtype=float))
        self.body = body
        self.sdf = sdf
        self.eps = float(eps)
        d = self.qc.shape[0]
        lam, psi = gp_interp_coeffs(self.dt, self.tau, self.qc)
        # blocks mapping endpoint tangents to the interpolated configuration
        self._lam_ov = lam[:d, d:]
        self._psi_oo = psi[:d, :d]
        self._psi_ov = psi[:d, d:]
        super().__init__((i, j), NoiseModel.isotropic(sigma, body.n_spheres))

    def _interp_config(self, si: MarkovState, sj: MarkovState) -> tuple[MobileConfig, np.ndarray]:
        xi = si.config.local(sj.config)
        eta = self._lam_ov @ si.velocity + self._psi_oo @ xi + self._psi_ov @ sj.velocity
        return si.config.retract(eta), eta

    def error(self, states: list[MarkovState]) -> np.ndarray:
        cfg, _ = self._interp_config(states[0], states[1])
        return env.obstacle_error(cfg, self.body, self.sdf, self.eps)[0]

    def error_and_jacobians(self, states: list[MarkovState]):
        si, sj = states
        d = si.config.tangent_dim
        cfg, eta = self._interp_config(si, sj)
        r, g = env.obstacle_error(cfg, self.body, self.sdf, self.eps)
        j_point, j_delta = si.config.retract_jacobians(eta)
        dxi_i, dxi_j = si.config.local_jacobians(sj.config)
        gj = g @ j_delta
        jac_i = np.zeros((r.shape[0], 2 * d))
        jac_j = np.zeros((r.shape[0], 2 * d))
        jac_i[:, :d] = g @ j_point + gj @ (self._psi_oo @ dxi_i)
        jac_i[:, d:] = gj @ self._lam_ov
        jac_j[:, :d] = gj @ (self._psi_oo @ dxi_j)
        jac_j[:, d:] = gj @ self._psi_ov
        return r, [jac_i, jac_j]


def evaluate_factor(
    factor: Factor, values: dict[int, MarkovState]
) -> tuple[np.ndarray, dict[int, np.ndarray]]:
    """Whitened residual and Jacobian blocks of one factor at given values."""
    states = [values[v] for v in factor.vars]
    r, jacs = factor.error_and_jacobians(states)
    r_w = factor.noise.whiten(r)
    jac_w = {v: factor.noise.whiten_jacobian(j) for v, j in zip(factor.vars, jacs)}
    return r_w, jac_w


@dataclass(slots=True)
class LinearRow:
    """Whitened linear factor: residual approximately blocks[v] @ delta_v + rhs."""

    blocks: dict[int, np.ndarray]
    rhs: np.ndarray
    source: int | None = None


@dataclass(slots=True)
class LinearSystem:
    """Whitened linearization of a factor graph at fixed values.

    Minimizing ||A delta + b||^2 over the stacked rows is one Gauss-Newton
    step; ||b||^2 equals twice the graph's negative log posterior (up to the
    normalization constants).
    """

    rows: list[LinearRow]
    dims: dict[int, int]

    def variable_order(self) -> list[int]:
        return sorted(self.dims)

    def column_offsets(self, order: list[int] | None = None) -> dict[int, int]:
        order = self.variable_order() if order is None else list(order)
        offsets = {}
        col = 0
        for v in order:
            offsets[v] = col
            col += self.dims[v]
        return offsets

    def stack_dense(self, order: list[int] | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Full dense (A, b) with columns in the given variable order."""
        offsets = self.column_offsets(order)
        ncols = sum(self.dims.values())
        nrows = sum(row.rhs.shape[0] for row in self.rows)
        a = np.zeros((nrows, ncols))
        b = np.zeros(nrows)
        r0 = 0
        for row in self.rows:
            nr = row.rhs.shape[0]
            for v, blk in row.blocks.items():
                c0 = offsets[v]
                a[r0 : r0 + nr, c0 : c0 + self.dims[v]] = blk
            b[r0 : r0 + nr] = row.rhs
            r0 += nr
        return a, b

    def normal_equations(
        self, order: list[int] | None = None
    ) -> tuple[np.ndarray, np.ndarray, dict[int, int]]:
        """Accumulated H = A^T A and g = A^T b without forming dense A."""
        offsets = self.column_offsets(order)
        ncols = sum(self.dims.values())
        h = np.zeros((ncols, ncols))
        g = np.zeros(ncols)
        for row in self.rows:
            items = list(row.blocks.items())
            for va, ja in items:
                ca = offsets[va]
                da = self.dims[va]
                g[ca : ca + da] += ja.T @ row.rhs
                for vb, jb in items:
                    cb = offsets[vb]
                    h[ca : ca + da, cb : cb + self.dims[vb]] += ja.T @ jb
        return h, g, offsets

    def error(self) -> float:
        return float(sum(row.rhs @ row.rhs for row in self.rows))


class FactorGraph:
    """Ordered collection of factors over integer-keyed variables."""

    def __init__(self, factors: list[Factor] | None = None) -> None:
        self.factors: list[Factor] = list(factors) if factors else []

    def add(self, factor: Factor) -> int:
        """Append a factor; returns its index in the graph."""
        self.factors.append(factor)
        return len(self.factors) - 1

    def variable_ids(self) -> list[int]:
        out: set[int] = set()
        for f in self.factors:
            out.update(f.vars)
        return sorted(out)

    def error(self, values: dict[int, MarkovState]) -> float:
        """Twice the negative log posterior: sum of squared whitened residuals."""
        total = 0.0
        for f in self.factors:
            r_w = f.noise.whiten(f.error([values[v] for v in f.vars]))
            total += float(r_w @ r_w)
        return total

    def linearize(self, values: dict[int, MarkovState]) -> LinearSystem:
        rows = []
        dims = {}
        for idx, f in enumerate(self.factors):
            r_w, jac_w = evaluate_factor(f, values)
            if not np.all(np.isfinite(r_w)) or any(
                not np.all(np.isfinite(j)) for j in jac_w.values()
            ):
                raise FloatingPointError(
                    f"non-finite linearization in factor {idx} ({f.kind}, vars={f.vars})"
                )
            rows.append(LinearRow(jac_w, r_w, source=idx))
            for v in f.vars:
                dims[v] = values[v].dim
        return LinearSystem(rows, dims)
