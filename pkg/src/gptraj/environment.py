"""World model: axis-aligned box obstacles, signed distance field, and the
collision geometry of the robot body.

The signed distance field is built on a regular grid of cell centers.  Free
cells store the exact Euclidean distance to the nearest occupied cell center,
occupied cells store minus the distance to the nearest free cell center.
Queries interpolate bilinearly between cell centers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .states import MobileConfig

# value stored by a field with no obstacles at all (clamped boundary distance)
SDF_FREE_CLAMP = 1e3


@dataclass(frozen=True, slots=True)
class AxisBox:
    """Axis-aligned rectangular obstacle."""

    center: np.ndarray
    size: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(2))
        size = np.asarray(self.size, dtype=float).reshape(2)
        if np.any(size <= 0):
            raise ValueError("obstacle size must be positive")
        object.__setattr__(self, "size", size)

    def contains(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        half = self.size / 2.0
        return np.all(np.abs(points - self.center) <= half, axis=1)

    def distance_to_point(self, point: np.ndarray) -> float:
        """Euclidean distance from the box surface (0 inside)."""
        gap = np.abs(np.asarray(point) - self.center) - self.size / 2.0
        return float(np.linalg.norm(np.maximum(gap, 0.0)))


@dataclass(frozen=True, slots=True)
class WorldSpec:
    """Rectangular world centered at the origin with box obstacles."""

    extent: np.ndarray
    cell_size: float
    obstacles: tuple[AxisBox, ...] = ()

    def __post_init__(self) -> None:
        extent = np.asarray(self.extent, dtype=float).reshape(2)
        if np.any(extent <= 0) or self.cell_size <= 0:
            raise ValueError("extent and cell_size must be positive")
        object.__setattr__(self, "extent", extent)
        object.__setattr__(self, "obstacles", tuple(self.obstacles))

    @property
    def origin(self) -> np.ndarray:
        return -self.extent / 2.0

    def to_dict(self) -> dict:
        return {
            "extent": self.extent.tolist(),
            "cell_size": self.cell_size,
            "obstacles": [
                {"center": ob.center.tolist(), "size": ob.size.tolist()} for ob in self.obstacles
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> WorldSpec:
        obstacles = tuple(
            AxisBox(np.asarray(ob["center"]), np.asarray(ob["size"]))
            for ob in data.get("obstacles", [])
        )
        return cls(np.asarray(data["extent"]), float(data["cell_size"]), obstacles)


@dataclass(frozen=True, slots=True)
class SignedDistanceField:
    """Grid of signed distances; data[iy, ix] at cell centers, y fastest north."""

    origin: np.ndarray
    cell_size: float
    data: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=float).reshape(2))
        object.__setattr__(self, "data", np.asarray(self.data, dtype=float))

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        nrows, ncols = self.data.shape
        xs = self.origin[0] + (np.arange(ncols) + 0.5) * self.cell_size
        ys = self.origin[1] + (np.arange(nrows) + 0.5) * self.cell_size
        return xs, ys

    def _node_coords(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        nrows, ncols = self.data.shape
        u = (points[:, 0] - self.origin[0]) / self.cell_size - 0.5
        v = (points[:, 1] - self.origin[1]) / self.cell_size - 0.5
        clamped = (u < 0) | (u > ncols - 1) | (v < 0) | (v > nrows - 1)
        return np.clip(u, 0.0, ncols - 1.0), np.clip(v, 0.0, nrows - 1.0), clamped

    def values_and_gradients(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Bilinear values and the exact gradient of the interpolant.

        Outside the field extent the query point is clamped; the gradient is
        zero along any clamped axis (the clamped value is constant there).
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        nrows, ncols = self.data.shape
        u, v, _ = self._node_coords(points)
        i0 = np.clip(np.floor(u).astype(int), 0, max(ncols - 2, 0))
        j0 = np.clip(np.floor(v).astype(int), 0, max(nrows - 2, 0))
        i1 = np.minimum(i0 + 1, ncols - 1)
        j1 = np.minimum(j0 + 1, nrows - 1)
        tx = u - i0
        ty = v - j0
        f00 = self.data[j0, i0]
        f10 = self.data[j0, i1]
        f01 = self.data[j1, i0]
        f11 = self.data[j1, i1]
        vals = (1 - ty) * ((1 - tx) * f00 + tx * f10) + ty * ((1 - tx) * f01 + tx * f11)
        gx = ((1 - ty) * (f10 - f00) + ty * (f11 - f01)) / self.cell_size
        gy = ((1 - tx) * (f01 - f00) + tx * (f11 - f10)) / self.cell_size
        # clamped directions carry no slope
        raw_u = (points[:, 0] - self.origin[0]) / self.cell_size - 0.5
        raw_v = (points[:, 1] - self.origin[1]) / self.cell_size - 0.5
        gx = np.where((raw_u < 0) | (raw_u > ncols - 1), 0.0, gx)
        gy = np.where((raw_v < 0) | (raw_v > nrows - 1), 0.0, gy)
        return vals, np.stack([gx, gy], axis=1)

    def values(self, points: np.ndarray) -> np.ndarray:
        return self.values_and_gradients(points)[0]


def build_sdf(world: WorldSpec) -> SignedDistanceField:
    """Rasterize the world and compute the exact signed Euclidean distances."""
    cell = world.cell_size
    ncols = int(round(world.extent[0] / cell))
    nrows = int(round(world.extent[1] / cell))
    xs = world.origin[0] + (np.arange(ncols) + 0.5) * cell
    ys = world.origin[1] + (np.arange(nrows) + 0.5) * cell
    gx, gy = np.meshgrid(xs, ys)
    centers = np.stack([gx.ravel(), gy.ravel()], axis=1)
    occ = np.zeros(centers.shape[0], dtype=bool)
    for ob in world.obstacles:
        occ |= ob.contains(centers)
    occ = occ.reshape(nrows, ncols)
    if not occ.any():
        ix = np.arange(ncols)
        iy = np.arange(nrows)
        bx = np.minimum(ix, ncols - 1 - ix)
        by = np.minimum(iy, nrows - 1 - iy)
        boundary = np.minimum(by[:, None], bx[None, :]) * cell
        data = np.minimum(boundary, SDF_FREE_CLAMP)
        return SignedDistanceField(world.origin, cell, data)
    d_out = ndimage.distance_transform_edt(~occ, sampling=cell)
    d_in = ndimage.distance_transform_edt(occ, sampling=cell)
    return SignedDistanceField(world.origin, cell, d_out - d_in)


def sdf_query(sdf: SignedDistanceField, point: np.ndarray) -> tuple[float, np.ndarray, bool]:
    """Distance and gradient at a point.

    The gradient is the central difference of the bilinear interpolant with
    step equal to the cell size.  Points outside the extent are clamped and
    flagged via the third return value.
    """
    point = np.asarray(point, dtype=float).reshape(1, 2)
    _, _, clamped = sdf._node_coords(point)
    val = float(sdf.values(point)[0])
    h = sdf.cell_size
    grad = np.array(
        [
            (sdf.values(point + [[h, 0.0]])[0] - sdf.values(point - [[h, 0.0]])[0]) / (2 * h),
            (sdf.values(point + [[0.0, h]])[0] - sdf.values(point - [[0.0, h]])[0]) / (2 * h),
        ]
    )
    return val, grad, bool(clamped[0])


def save_sdf(sdf: SignedDistanceField, path: str) -> None:
    """Write the field as a portable text grid (header plus row-major values)."""
    nrows, ncols = sdf.data.shape
    with open(path, "w") as fh:
        fh.write("gptraj-sdf 1\n")
        fh.write(f"ncols {ncols} nrows {nrows}\n")
        fh.write(f"origin {float(sdf.origin[0])!r} {float(sdf.origin[1])!r}\n")
        fh.write(f"cell_size {float(sdf.cell_size)!r}\n")
        for row in sdf.data:
            fh.write(" ".join(repr(float(x)) for x in row) + "\n")


def load_sdf(path: str) -> SignedDistanceField:
    with open(path) as fh:
        magic = fh.readline().split()
        if magic[:1] != ["gptraj-sdf"]:
            raise ValueError(f"not a gptraj-sdf file: {path}")
        tok = fh.readline().split()
        ncols, nrows = int(tok[1]), int(tok[3])
        tok = fh.readline().split()
        origin = np.array([float(tok[1]), float(tok[2])])
        cell = float(fh.readline().split()[1])
        data = np.loadtxt(fh).reshape(nrows, ncols)
    return SignedDistanceField(origin, cell, data)


@dataclass(frozen=True, slots=True)
class BodyModel:
    """Collision body: spheres on the base footprint and along each arm link.

    base_spheres rows are (x, y, radius) in the base frame.  Each link of
    length link_lengths[l] carries one sphere of link_sphere_radius at every
    fraction in link_sphere_fracs, measured from the link's proximal joint.
    The arm is mounted at the base origin.
    """

    base_spheres: np.ndarray
    link_lengths: np.ndarray = field(default_factory=lambda: np.zeros(0))
    link_sphere_fracs: np.ndarray = field(default_factory=lambda: np.array([1 / 6, 0.5, 5 / 6]))
    link_sphere_radius: float = 0.08

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "base_spheres", np.atleast_2d(np.asarray(self.base_spheres, dtype=float))
        )
        object.__setattr__(self, "link_lengths", np.atleast_1d(np.asarray(self.link_lengths, dtype=float)))
        object.__setattr__(
            self, "link_sphere_fracs", np.atleast_1d(np.asarray(self.link_sphere_fracs, dtype=float))
        )

    @property
    def n_links(self) -> int:
        return self.link_lengths.shape[0]

    @property
    def n_spheres(self) -> int:
        return self.base_spheres.shape[0] + self.n_links * self.link_sphere_fracs.shape[0]

    def radii(self) -> np.ndarray:
        link_r = np.full(self.n_links * self.link_sphere_fracs.shape[0], self.link_sphere_radius)
        return np.concatenate([self.base_spheres[:, 2], link_r])

    def max_reach(self) -> float:
        """Radius of a disc around the base origin covering every sphere."""
        base = np.max(np.linalg.norm(self.base_spheres[:, :2], axis=1) + self.base_spheres[:, 2])
        arm = float(np.sum(self.link_lengths)) + self.link_sphere_radius
        return max(base, arm)


def default_body(n_links: int = 2) -> BodyModel:
    """Benchmark body: 1.0 x 0.7 m base under four 0.35 m spheres, 0.6 m links."""
    base = np.array(
        [
            [0.25, 0.175, 0.35],
            [0.25, -0.175, 0.35],
            [-0.25, 0.175, 0.35],
            [-0.25, -0.175, 0.35],
        ]
    )
    return BodyModel(base, link_lengths=np.full(n_links, 0.6))


def forward_kinematics(config: MobileConfig, body: BodyModel) -> tuple[np.ndarray, np.ndarray]:
    """World positions of the body spheres and their Jacobians.

    Returns (centers, jacobians) with shapes (S, 2) and (S, 2, d) where d is
    the configuration tangent dimension (vx, vy, omega, joint rates...).
    """
    if config.arm.shape[0] != body.n_links:
        raise ValueError(
            f"arm has {config.arm.shape[0]} joints but body has {body.n_links} links"
        )
    d = config.tangent_dim
    rot = config.base.rotation()
    t = config.base.translation

    # sphere positions in the base frame
    local = [body.base_spheres[:, :2]]
    joints = np.zeros((body.n_links + 1, 2))
    angles = np.cumsum(config.arm)
    for l in range(body.n_links):
        direction = np.array([math.cos(angles[l]), math.sin(angles[l])])
        pts = joints[l] + np.outer(body.link_sphere_fracs * body.link_lengths[l], direction)
        local.append(pts)
        joints[l + 1] = joints[l] + body.link_lengths[l] * direction
    local = np.vstack(local)

    centers = local @ rot.T + t
    n_spheres = local.shape[0]
    jac = np.zeros((n_spheres, 2, d))
    jac[:, :, 0:2] = rot
    perp = np.stack([-local[:, 1], local[:, 0]], axis=1)
    jac[:, :, 2] = perp @ rot.T

    n_base = body.base_spheres.shape[0]
    n_per_link = body.link_sphere_fracs.shape[0]
    for k in range(body.n_links):
        # joint k rotates every sphere distal to it about the joint position
        first = n_base + k * n_per_link
        rel = local[first:] - joints[k]
        perp_k = np.stack([-rel[:, 1], rel[:, 0]], axis=1)
        jac[first:, :, 3 + k] = perp_k @ rot.T
    return centers, jac


def hinge_loss(dist: float | np.ndarray, eps: float) -> np.ndarray:
    """Obstacle cost max(eps - dist, 0); zero (inactive) at dist >= eps."""
    return np.maximum(eps - np.asarray(dist, dtype=float), 0.0)


def obstacle_error(
    config: MobileConfig, body: BodyModel, sdf: SignedDistanceField, eps: float
) -> tuple[np.ndarray, np.ndarray]:
    """Hinge residual per body sphere and its configuration Jacobian."""
    centers, fk_jac = forward_kinematics(config, body)
    vals, grads = sdf.values_and_gradients(centers)
    dist = vals - body.radii()
    r = hinge_loss(dist, eps)
    active = dist < eps
    # dr/dconfig = -grad_sdf . dcenter/dconfig where the hinge is active
    jac = -np.einsum("sk,skd->sd", grads, fk_jac)
    jac[~active] = 0.0
    return r, jac


def min_clearance(config: MobileConfig, body: BodyModel, sdf: SignedDistanceField) -> float:
    """Smallest signed sphere clearance; <= 0 counts as collision."""
    centers, _ = forward_kinematics(config, body)
    return float(np.min(sdf.values(centers) - body.radii()))


def config_collides(config: MobileConfig, body: BodyModel, sdf: SignedDistanceField) -> bool:
    return min_clearance(config, body, sdf) <= 0.0
