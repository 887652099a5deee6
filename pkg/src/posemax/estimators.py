"""Local pose refinement over angular residuals and a RANSAC baseline that
samples correspondences at random.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import (
    Pose,
    angles_between,
    look_at_rotation,
    pairwise_angles,
    rodrigues,
    rotation_to_angle_axis,
)

_FD_EPS = 1e-7  # finite-difference step for the numeric Jacobian


@dataclass(frozen=True)
class Correspondence:
    bearing_index: int
    point_index: int


@dataclass(frozen=True)
class RefineResult:
    pose: Pose
    converged: bool
    residual: float  # sum of angular distances at the returned pose


def _residuals(x: np.ndarray, F: np.ndarray, P: np.ndarray) -> np.ndarray:
    R = rodrigues(x[:3])
    V = (P - x[3:]) @ R.T
    # Degenerate transformed points give an undefined angle; treat as worst case.
    bad = np.linalg.norm(V, axis=1) == 0.0
    if np.any(bad):
        V = V.copy()
        V[bad] = F[bad]
        ang = angles_between(F, V)
        ang[bad] = np.pi
        return ang
    return angles_between(F, V)


def refine_pnp(
    corrs,
    inst,
    init: Pose,
    max_iter: int = 100,
    tol: float = 1e-10,
) -> RefineResult:
    """Minimise the sum of angular distances over matched pairs by damped
    iterative least squares on the 6-vector (r, t).

    Steps are computed from a numerically differentiated Jacobian and accepted
    only if the angular-residual sum decreases, so the returned objective never
    exceeds the initial one. If no step is ever accepted the initial pose is
    returned with ``converged=False``.
    """
    corrs = list(corrs)
    if len(corrs) < 3:
        raise ValueError("refinement needs at least 3 correspondences")
    F = inst.bearings[[c.bearing_index for c in corrs]]
    P = inst.points[[c.point_index for c in corrs]]
    x = np.concatenate([np.asarray(init.r, dtype=float), np.asarray(init.t, dtype=float)])

    res = _residuals(x, F, P)
    cost = float(res.sum())
    lam = 1e-3
    accepted_any = False
    converged = False
    for _ in range(max_iter):
        J = np.empty((len(res), 6))
        for k in range(6):
            xp = x.copy()
            xp[k] += _FD_EPS
            J[:, k] = (_residuals(xp, F, P) - res) / _FD_EPS
        JtJ = J.T @ J
        g = J.T @ res
        step_ok = False
        for _ in range(8):
            try:
                dx = np.linalg.solve(JtJ + lam * np.eye(6), -g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            x_new = x + dx
            res_new = _residuals(x_new, F, P)
            cost_new = float(res_new.sum())
            if cost_new < cost:
                x, res = x_new, res_new
                delta = cost - cost_new
                cost = cost_new
                lam = max(lam / 10.0, 1e-12)
                step_ok = True
                accepted_any = True
                if delta < tol:
                    converged = True
                break
            lam *= 10.0
        if not step_ok:
            converged = accepted_any or cost <= tol
            break
        if converged or cost <= tol:
            converged = True
            break

    if not accepted_any and not converged:
        return RefineResult(init, False, cost)
    r = x[:3]
    nr = np.linalg.norm(r)
    if nr > np.pi:
        # Re-canonicalise into the pi-ball representative.
        r = rotation_to_angle_axis(rodrigues(r))
    return RefineResult(Pose(r, x[3:]), converged, cost)


def extract_correspondences(pose: Pose, inst) -> list[Correspondence]:
    """All (bearing, angularly-closest inlier point) pairs at a pose; the count
    equals the objective value there."""
    if inst.num_bearings == 0 or inst.num_points == 0:
        return []
    G = inst.bearings @ rodrigues(pose.r)
    U = inst.points - pose.t
    keep = np.linalg.norm(U, axis=1) > 0.0
    if not np.any(keep):
        return []
    idx = np.nonzero(keep)[0]
    A = pairwise_angles(G, U[keep])
    best = A.argmin(axis=1)
    out = []
    for i, j in enumerate(best):
        if A[i, j] <= inst.theta:
            out.append(Correspondence(i, int(idx[j])))
    return out


def ransac_baseline(inst, iterations: int, seed: int = 0):
    """Hypothesise-and-test baseline over unknown correspondences.

    Each iteration samples 3 distinct bearings and 3 distinct points, solves
    the minimal pose by nonlinear refinement from a coarse look-at
    initialisation, and scores it by the inlier count. Deterministic per seed;
    stops early once all bearings are inliers, which no later hypothesis can
    beat (ties keep the first-found pose).
    """
    from .bounds import objective
    from .solver import Solution  # local import to avoid a cycle

    rng = np.random.default_rng(seed)
    n, m = inst.num_bearings, inst.num_points
    if iterations > 0 and (n < 3 or m < 3):
        raise ValueError("RANSAC needs at least 3 bearings and 3 points")
    best_nu = -1
    best_pose: Pose | None = None
    cuboids = inst.translation_domain.cuboids
    for _ in range(iterations):
        bi = rng.choice(n, size=3, replace=False)
        pi = rng.choice(m, size=3, replace=False)
        cub = cuboids[int(rng.integers(len(cuboids)))]
        lo = cub.center - cub.half_widths
        hi = cub.center + cub.half_widths
        t0 = rng.uniform(lo, hi)
        centroid = inst.points[pi].mean(axis=0)
        if np.allclose(centroid, t0):
            continue
        r0 = rotation_to_angle_axis(look_at_rotation(t0, centroid))
        corrs = [Correspondence(int(b), int(p)) for b, p in zip(bi, pi)]
        result = refine_pnp(corrs, inst, Pose(r0, t0))
        nu = objective(result.pose, inst)
        if nu > best_nu:
            best_nu = nu
            best_pose = result.pose
            if best_nu >= n:
                break
    if best_pose is None:
        return Solution(0, None, (), False, ())
    corrs = tuple(extract_correspondences(best_pose, inst))
    return Solution(best_nu, best_pose, corrs, False, ())
