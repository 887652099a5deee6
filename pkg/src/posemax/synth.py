"""Synthetic benchmark instances: random points in a cube observed by a camera
on a torus around the model, with pixel noise, occlusion and image clutter,
plus the pose-success metrics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bounds import ProblemInstance
from .domain import Cuboid, TranslationDomain
from .estimators import Correspondence
from .geometry import (
    Intrinsics,
    Pose,
    bearings_from_pixels,
    look_at_rotation,
    project_to_pixels,
    rodrigues,
    rotation_to_angle_axis,
)


def default_intrinsics(width: int = 640, hfov_deg: float = 60.0, height: int = 480) -> Intrinsics:
    """Virtual camera: square pixels, principal point at the image centre."""
    f = (width / 2.0) / math.tan(math.radians(hfov_deg) / 2.0)
    return Intrinsics(fx=f, fy=f, cx=width / 2.0, cy=height / 2.0)


@dataclass(frozen=True)
class TorusPrior:
    """Camera centres lie on a torus around the model, optical axis inward."""

    major_radius: float = 3.0
    minor_radius: float = 0.5


@dataclass
class SynthConfig:
    num_points: int = 20
    omega_3d: float = 0.0
    omega_2d: float = 0.0
    sigma_px: float = 2.0
    intrinsics: Intrinsics = field(default_factory=default_intrinsics)
    image_size: tuple[int, int] = (640, 480)
    prior: TorusPrior | TranslationDomain = field(default_factory=TorusPrior)
    seed: int = 0
    theta: float = math.radians(1.0)
    zeta: float = 1e-3
    torus_cube_count: int = 32
    torus_cube_half_width: float | None = None

    def __post_init__(self):
        if not (0.0 <= self.omega_3d < 1.0 and 0.0 <= self.omega_2d < 1.0):
            raise ValueError("outlier fractions must lie in [0, 1)")
        if self.sigma_px < 0:
            raise ValueError("sigma_px must be non-negative")


@dataclass(frozen=True)
class GroundTruth:
    pose: Pose
    inlier_matching: tuple[Correspondence, ...]
    bearing_is_outlier: np.ndarray  # (N,) clutter flags
    point_occluded: np.ndarray  # (M,) withheld-point flags


def torus_domain(
    prior: TorusPrior,
    cube_count: int = 32,
    cube_half_width: float | None = None,
    zeta: float = 1e-3,
) -> TranslationDomain:
    """Union of cubes centred at uniform stations on the torus centreline.

    The default half-width covers the whole tube (worst-case station-to-tube
    distance plus the minor radius), so any camera centre on the torus lies in
    at least one cube.
    """
    if cube_count < 1:
        raise ValueError("cube_count must be >= 1")
    R, r = prior.major_radius, prior.minor_radius
    if cube_half_width is None:
        cube_half_width = 2.0 * R * math.sin(math.pi / (2.0 * cube_count)) + r
    angles = 2.0 * math.pi * np.arange(cube_count) / cube_count
    cubes = tuple(
        Cuboid(np.array([R * math.cos(a), R * math.sin(a), 0.0]),
               np.full(3, cube_half_width))
        for a in angles
    )
    return TranslationDomain(cubes, zeta)


def _sample_torus_point(rng: np.random.Generator, prior: TorusPrior) -> np.ndarray:
    """Area-uniform point on the torus surface (rejection on the tube angle)."""
    R, r = prior.major_radius, prior.minor_radius
    u = rng.uniform(0.0, 2.0 * math.pi)
    while True:
        v = rng.uniform(0.0, 2.0 * math.pi)
        if rng.uniform(0.0, R + r) <= R + r * math.cos(v):
            break
    ring = R + r * math.cos(v)
    return np.array([ring * math.cos(u), ring * math.sin(u), r * math.sin(v)])


def generate(cfg: SynthConfig) -> tuple[ProblemInstance, GroundTruth]:
    """Draw a synthetic instance and its ground truth, deterministic per seed.

    Points are uniform in [-1, 1]^3; ceil(omega_3d * M) of them are withheld as
    occluded; the rest are projected through the sampled camera, perturbed by
    Gaussian pixel noise and converted back to unit bearings; uniform random
    image points are appended until the requested clutter fraction is reached;
    finally the bearing order is shuffled.
    """
    rng = np.random.default_rng(cfg.seed)
    M = cfg.num_points
    P = rng.uniform(-1.0, 1.0, size=(M, 3))

    n_occ = math.ceil(cfg.omega_3d * M)
    occluded = np.zeros(M, dtype=bool)
    if n_occ > 0:
        occluded[rng.choice(M, size=n_occ, replace=False)] = True
    visible_idx = np.nonzero(~occluded)[0]
    if len(visible_idx) == 0:
        raise ValueError("all points occluded; no visible inliers to project")

    if isinstance(cfg.prior, TorusPrior):
        t_gt = _sample_torus_point(rng, cfg.prior)
        target = np.zeros(3)
        domain = torus_domain(
            cfg.prior, cfg.torus_cube_count, cfg.torus_cube_half_width, cfg.zeta
        )
    else:
        domain = cfg.prior
        cub = domain.cuboids[int(rng.integers(len(domain.cuboids)))]
        t_gt = rng.uniform(cub.center - cub.half_widths, cub.center + cub.half_widths)
        target = P.mean(axis=0)
    roll = rng.uniform(-math.pi, math.pi)
    R_gt = look_at_rotation(t_gt, target, roll)
    r_gt = rotation_to_angle_axis(R_gt)
    pose_gt = Pose(r_gt, t_gt)

    cam = (P[visible_idx] - t_gt) @ R_gt.T
    if np.any(cam[:, 2] <= 0.0):
        raise ValueError(
            "a visible point lies behind the camera; use a torus prior or a "
            "domain outside the point cloud"
        )
    pix = project_to_pixels(cfg.intrinsics, cam)
    if cfg.sigma_px > 0:
        pix = pix + rng.normal(0.0, cfg.sigma_px, size=pix.shape)
    bearings_in = bearings_from_pixels(cfg.intrinsics, pix)

    v = len(visible_idx)
    n_clutter = int(round(v * cfg.omega_2d / (1.0 - cfg.omega_2d)))
    w, h = cfg.image_size
    clutter_pix = rng.uniform([0.0, 0.0], [float(w), float(h)], size=(n_clutter, 2))
    bearings_out = bearings_from_pixels(cfg.intrinsics, clutter_pix) if n_clutter else np.zeros((0, 3))

    F = np.concatenate([bearings_in, bearings_out], axis=0)
    is_outlier = np.concatenate([np.zeros(v, dtype=bool), np.ones(n_clutter, dtype=bool)])
    perm = rng.permutation(len(F))
    F = F[perm]
    is_outlier = is_outlier[perm]
    new_pos = np.empty(len(perm), dtype=int)
    new_pos[perm] = np.arange(len(perm))
    matching = tuple(
        Correspondence(int(new_pos[k]), int(visible_idx[k])) for k in range(v)
    )

    inst = ProblemInstance(F, P, cfg.theta, domain)
    gt = GroundTruth(pose_gt, matching, is_outlier, occluded)
    return inst, gt


def lattice_points(n: int = 3, extent: float = 1.0) -> np.ndarray:
    """Regular n x n x n lattice in [-extent, extent]^3; a small repetitive
    structure for symmetry-stress benchmarks (27 points by default)."""
    g = np.linspace(-extent, extent, n)
    xx, yy, zz = np.meshgrid(g, g, g, indexing="ij")
    return np.stack([xx.ravel(), yy.ravel(), zz.ravel()], axis=1)


def pose_success(est: Pose, gt: Pose, rot_tol: float = 0.1, trans_tol: float = 0.1) -> tuple[bool, bool]:
    """Success flags: geodesic rotation error below ``rot_tol`` radians and
    relative camera-centre error below ``trans_tol`` (absolute fallback when
    the true centre is at the origin)."""
    R_err = rodrigues(est.r) @ rodrigues(gt.r).T
    cos_a = np.clip((np.trace(R_err) - 1.0) / 2.0, -1.0, 1.0)
    rot_ok = math.acos(cos_a) < rot_tol
    norm_gt = float(np.linalg.norm(gt.t))
    err = float(np.linalg.norm(np.asarray(est.t) - np.asarray(gt.t)))
    trans_ok = (err / norm_gt < trans_tol) if norm_gt > 0 else (err < trans_tol)
    return rot_ok, trans_ok
