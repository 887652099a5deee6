"""Independent brute-force verifiers: dense 6D grid search over poses and
dense-sampling maximisers for the uncertainty angles. Desk-scale only; the
grid refuses runs beyond a configurable cell cap.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit, prange

from .bounds import ProblemInstance
from .domain import Cuboid
from .geometry import PI, Pose, angles_between, rodrigues, rodrigues_many

DEFAULT_CELL_CAP = 10_000_000


class CellCapExceeded(RuntimeError):
    """The requested grid is larger than the configured evaluation cap."""


def _axis_grid(lo: float, hi: float, step: float) -> np.ndarray:
    if hi <= lo:
        return np.array([lo])
    n = int(math.floor((hi - lo) / step + 1e-12)) + 1
    return lo + step * np.arange(n)


def rotation_grid(step: float) -> np.ndarray:
    """Regular grid over the cube circumscribing the pi-ball, culled to the
    ball (every rotation has an in-ball representative)."""
    g = _axis_grid(-PI, PI, step)
    xx, yy, zz = np.meshgrid(g, g, g, indexing="ij")
    rs = np.stack([xx.ravel(), yy.ravel(), zz.ravel()], axis=1)
    return rs[np.linalg.norm(rs, axis=1) <= PI]


def translation_grid(cuboids, step: float) -> np.ndarray:
    pts = []
    for c in cuboids:
        axes = [
            _axis_grid(c.center[i] - c.half_widths[i], c.center[i] + c.half_widths[i], step)
            for i in range(3)
        ]
        xx, yy, zz = np.meshgrid(*axes, indexing="ij")
        pts.append(np.stack([xx.ravel(), yy.ravel(), zz.ravel()], axis=1))
    out = np.concatenate(pts, axis=0)
    return np.unique(out, axis=0)


@njit(cache=True, parallel=True)
def _grid_kernel(G, U, ok, cos_theta, best_count, best_t):  # pragma: no cover
    n_rot = G.shape[0]
    n_tr = U.shape[0]
    n = G.shape[1]
    m = U.shape[1]
    for ri in prange(n_rot):
        bc = -1
        bt = -1
        for ti in range(n_tr):
            count = 0
            for i in range(n):
                for j in range(m):
                    if not ok[ti, j]:
                        continue
                    d = (
                        G[ri, i, 0] * U[ti, j, 0]
                        + G[ri, i, 1] * U[ti, j, 1]
                        + G[ri, i, 2] * U[ti, j, 2]
                    )
                    if d >= cos_theta:
                        count += 1
                        break
            if count > bc:
                bc = count
                bt = ti
        best_count[ri] = bc
        best_t[ri] = bt


def grid_search(
    inst: ProblemInstance,
    rot_step: float,
    trans_step: float,
    cell_cap: int = DEFAULT_CELL_CAP,
) -> tuple[int, Pose]:
    """Best objective value over a regular pose grid; a lower bound on the
    true optimum. Ties resolve to the lexicographically first grid pose."""
    if rot_step <= 0 or trans_step <= 0:
        raise ValueError("grid steps must be positive")
    rots = rotation_grid(rot_step)
    trans = translation_grid(inst.translation_domain.cuboids, trans_step)
    cells = len(rots) * len(trans)
    if cells > cell_cap:
        raise CellCapExceeded(
            f"{len(rots)} x {len(trans)} = {cells} grid cells exceed the cap {cell_cap}"
        )
    if inst.num_bearings == 0 or inst.num_points == 0:
        return 0, Pose(rots[0], trans[0])

    Rs = rodrigues_many(rots)
    G = np.einsum("nj,kji->kni", inst.bearings, Rs)  # R^{-1} f per rotation
    U = inst.points[None, :, :] - trans[:, None, :]
    norms = np.linalg.norm(U, axis=2)
    ok = norms > 0.0
    U = U / np.where(norms[:, :, None] == 0.0, 1.0, norms[:, :, None])
    best_count = np.empty(len(rots), dtype=np.int64)
    best_t = np.empty(len(rots), dtype=np.int64)
    _grid_kernel(
        np.ascontiguousarray(G),
        np.ascontiguousarray(U),
        ok,
        math.cos(inst.theta),
        best_count,
        best_t,
    )
    ri = int(np.argmax(best_count))
    ti = int(best_t[ri])
    return int(best_count[ri]), Pose(rots[ri], trans[ti])


def sample_max_rotation_angle(
    v: np.ndarray, cube: Cuboid, samples: int = 10_000, seed: int = 0
) -> float:
    """Dense random maximisation of angle(R_r v, R_{r0} v) over the cube: a
    lower bound on the true maximum, so it never exceeds the certified bound."""
    if float(cube.half_widths.max()) == 0.0:
        return 0.0
    rng = np.random.default_rng(seed)
    rs = cube.center + rng.uniform(-1.0, 1.0, size=(samples, 3)) * cube.half_widths
    Rs = rodrigues_many(rs)
    v = np.asarray(v, dtype=float)
    v0 = rodrigues(cube.center) @ v
    rv = Rs @ v
    return float(angles_between(rv, v0[None, :]).max())


def sample_max_translation_angle(
    p: np.ndarray, ct: Cuboid, samples: int = 10_000, seed: int = 0
) -> float:
    """Dense random maximisation of angle(p - t, p - t0) over the cuboid."""
    p = np.asarray(p, dtype=float)
    rng = np.random.default_rng(seed)
    ts = ct.center + rng.uniform(-1.0, 1.0, size=(samples, 3)) * ct.half_widths
    d = p - ts
    good = np.linalg.norm(d, axis=1) > 0.0
    d0 = p - ct.center
    if float(np.linalg.norm(d0)) == 0.0 or not np.any(good):
        return 0.0
    return float(angles_between(d[good], d0[None, :]).max())
