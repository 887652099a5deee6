"""Elementary 3D geometry: angle-axis rotations, angular distances, bearings,
and angular queries between rays, segments and boxes.

Conventions: vectors are float64 numpy arrays of shape (3,), rotations are
angle-axis 3-vectors ``r`` (angle ``||r||``, axis ``r/||r||``) confined to the
solid ball of radius pi, or orthonormal 3x3 matrices. A camera pose ``(r, t)``
maps a world point ``p`` to camera coordinates ``R_r (p - t)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

PI = math.pi

# Below this rotation angle the Rodrigues formula is evaluated with its
# second-order Taylor expansion to avoid 0/0.
_SMALL_ANGLE = 1e-8


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole intrinsics (focal lengths and principal point, in pixels)."""

    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")


@dataclass(frozen=True)
class Pose:
    """Camera pose: angle-axis rotation ``r`` and translation ``t`` (metres)."""

    r: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "r", np.asarray(self.r, dtype=float))
        object.__setattr__(self, "t", np.asarray(self.t, dtype=float))

    def rotation(self) -> np.ndarray:
        return rodrigues(self.r)

    def transform(self, points: np.ndarray) -> np.ndarray:
        """Map world points (..., 3) into the camera frame."""
        return (np.asarray(points) - self.t) @ self.rotation().T


def skew(v: np.ndarray) -> np.ndarray:
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def rodrigues(r: np.ndarray) -> np.ndarray:
    """Rotation matrix exp([r]_x) for an angle-axis vector."""
    r = np.asarray(r, dtype=float)
    theta = float(np.linalg.norm(r))
    K = skew(r)
    if theta < _SMALL_ANGLE:
        return np.eye(3) + K + 0.5 * (K @ K)
    a = math.sin(theta) / theta
    b = (1.0 - math.cos(theta)) / (theta * theta)
    return np.eye(3) + a * K + b * (K @ K)


def rodrigues_many(rs: np.ndarray) -> np.ndarray:
    """Vectorised Rodrigues: (n, 3) angle-axis vectors -> (n, 3, 3) matrices."""
    rs = np.asarray(rs, dtype=float)
    n = rs.shape[0]
    theta = np.linalg.norm(rs, axis=1)
    K = np.zeros((n, 3, 3))
    K[:, 0, 1] = -rs[:, 2]
    K[:, 0, 2] = rs[:, 1]
    K[:, 1, 0] = rs[:, 2]
    K[:, 1, 2] = -rs[:, 0]
    K[:, 2, 0] = -rs[:, 1]
    K[:, 2, 1] = rs[:, 0]
    KK = K @ K
    small = theta < _SMALL_ANGLE
    safe = np.where(small, 1.0, theta)
    a = np.where(small, 1.0, np.sin(safe) / safe)
    b = np.where(small, 0.5, (1.0 - np.cos(safe)) / (safe * safe))
    return np.eye(3) + a[:, None, None] * K + b[:, None, None] * KK


def rotation_to_angle_axis(R: np.ndarray) -> np.ndarray:
    """Inverse of :func:`rodrigues` (log map), canonical on the pi-surface.

    The angle-axis representation is two-to-one on the surface of the pi-ball;
    the representative with non-negative first nonzero component is returned.
    """
    R = np.asarray(R, dtype=float)
    cos_theta = np.clip((np.trace(R) - 1.0) / 2.0, -1.0, 1.0)
    theta = math.acos(cos_theta)
    if theta < _SMALL_ANGLE:
        return np.zeros(3)
    if PI - theta > 1e-6:
        w = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
        return w * (theta / (2.0 * math.sin(theta)))
    # Near the pi surface sin(theta) vanishes; recover the axis from R + I.
    A = (R + np.eye(3)) / 2.0
    axis = np.sqrt(np.clip(np.diag(A), 0.0, None))
    # Fix relative signs from the off-diagonal terms, anchored on the largest component.
    k = int(np.argmax(axis))
    for i in range(3):
        if i != k and A[k, i] < 0:
            axis[i] = -axis[i]
    axis /= np.linalg.norm(axis)
    for c in axis:
        if abs(c) > 1e-12:
            if c < 0:
                axis = -axis
            break
    return axis * theta


def angular_distance(u: np.ndarray, v: np.ndarray) -> float:
    """Angle in [0, pi] between two nonzero vectors (scale invariant)."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if not np.any(u) or not np.any(v):
        raise ValueError("angular distance undefined for zero vectors")
    c = np.cross(u, v)
    return math.atan2(float(np.linalg.norm(c)), float(np.dot(u, v)))


def angles_between(U: np.ndarray, V: np.ndarray) -> np.ndarray:
    """Broadcasting atan2-based angle between rows of U and V, shape-compatible."""
    U = np.asarray(U, dtype=float)
    V = np.asarray(V, dtype=float)
    ux, uy, uz = U[..., 0], U[..., 1], U[..., 2]
    vx, vy, vz = V[..., 0], V[..., 1], V[..., 2]
    cx = uy * vz - uz * vy
    cy = uz * vx - ux * vz
    cz = ux * vy - uy * vx
    s = np.sqrt(cx * cx + cy * cy + cz * cz)
    d = ux * vx + uy * vy + uz * vz
    return np.arctan2(s, d)


def pairwise_angles(G: np.ndarray, U: np.ndarray) -> np.ndarray:
    """Angle matrix (N, M) between bearing rows G (N, 3) and vector rows U (M, 3)."""
    return angles_between(G[:, None, :], U[None, :, :])


def bearing_from_pixel(k: Intrinsics, px: np.ndarray) -> np.ndarray:
    """Unit bearing vector through an image point: normalised K^-1 (u, v, 1)."""
    u, v = float(px[0]), float(px[1])
    d = np.array([(u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0])
    return d / np.linalg.norm(d)


def bearings_from_pixels(k: Intrinsics, px: np.ndarray) -> np.ndarray:
    px = np.asarray(px, dtype=float)
    d = np.stack(
        [(px[:, 0] - k.cx) / k.fx, (px[:, 1] - k.cy) / k.fy, np.ones(len(px))],
        axis=1,
    )
    return d / np.linalg.norm(d, axis=1, keepdims=True)


def project_to_pixels(k: Intrinsics, pts_cam: np.ndarray) -> np.ndarray:
    """Project camera-frame points (positive depth) to pixel coordinates."""
    pts_cam = np.asarray(pts_cam, dtype=float)
    z = pts_cam[:, 2]
    return np.stack(
        [k.fx * pts_cam[:, 0] / z + k.cx, k.fy * pts_cam[:, 1] / z + k.cy], axis=1
    )


def min_angle_ray_segment(f: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    """Minimum angular distance from direction ``f`` to segment [a, b].

    The stationarity condition of cos(angle) along the segment is linear in the
    segment parameter, so there is at most one interior critical point; it is
    evaluated together with both endpoints. The segment must not pass through
    the origin.
    """
    f = np.asarray(f, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d = b - a
    dd = float(d @ d)
    if dd == 0.0:
        return angular_distance(f, a)
    s_closest = min(1.0, max(0.0, -float(a @ d) / dd))
    closest = a + s_closest * d
    if float(closest @ closest) < 1e-30:
        raise ValueError("segment passes through the origin")
    fa, fd = float(f @ a), float(f @ d)
    aa, ad = float(a @ a), float(a @ d)
    best = min(angular_distance(f, a), angular_distance(f, b))
    den = fd * ad - fa * dd
    if den != 0.0:
        s = -(fd * aa - fa * ad) / den
        if 0.0 < s < 1.0:
            best = min(best, angular_distance(f, a + s * d))
    return best


def min_angles_ray_segments(F: np.ndarray, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Vectorised :func:`min_angle_ray_segment` over matched rows (K, 3)."""
    F = np.asarray(F, dtype=float)
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    D = B - A
    fa = np.sum(F * A, axis=-1)
    fd = np.sum(F * D, axis=-1)
    aa = np.sum(A * A, axis=-1)
    ad = np.sum(A * D, axis=-1)
    dd = np.sum(D * D, axis=-1)
    ang_a = angles_between(F, A)
    ang_b = angles_between(F, B)
    best = np.minimum(ang_a, ang_b)
    den = fd * ad - fa * dd
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(den != 0.0, -(fd * aa - fa * ad) / np.where(den == 0.0, 1.0, den), -1.0)
    inner = (s > 0.0) & (s < 1.0)
    if np.any(inner):
        X = A[inner] + s[inner][..., None] * D[inner]
        best[inner] = np.minimum(best[inner], angles_between(F[inner], X))
    return best


def ray_intersects_box(f: np.ndarray, center: np.ndarray, half_widths: np.ndarray) -> bool:
    """Slab test: does the ray {s f : s >= 0} meet the axis-aligned box?"""
    f = np.asarray(f, dtype=float)
    lo = np.asarray(center, dtype=float) - np.asarray(half_widths, dtype=float)
    hi = np.asarray(center, dtype=float) + np.asarray(half_widths, dtype=float)
    tmin, tmax = 0.0, math.inf
    for i in range(3):
        if f[i] == 0.0:
            if lo[i] > 0.0 or hi[i] < 0.0:
                return False
            continue
        t1, t2 = lo[i] / f[i], hi[i] / f[i]
        if t1 > t2:
            t1, t2 = t2, t1
        tmin = max(tmin, t1)
        tmax = min(tmax, t2)
    return tmin <= tmax


def rays_intersect_boxes(F: np.ndarray, Lo: np.ndarray, Hi: np.ndarray) -> np.ndarray:
    """Vectorised slab test over matched rows (K, 3) -> (K,) booleans."""
    F = np.asarray(F, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = Lo / F
        t2 = Hi / F
    lo_t = np.minimum(t1, t2)
    hi_t = np.maximum(t1, t2)
    zero = F == 0.0
    # Zero components intersect their slab iff 0 lies inside it.
    ok_zero = (Lo <= 0.0) & (Hi >= 0.0)
    lo_t = np.where(zero, -np.inf, lo_t)
    hi_t = np.where(zero, np.inf, hi_t)
    tmin = np.maximum(lo_t.max(axis=-1), 0.0)
    tmax = hi_t.min(axis=-1)
    return (tmin <= tmax) & np.all(~zero | ok_zero, axis=-1)


def look_at_rotation(eye: np.ndarray, target: np.ndarray, roll: float = 0.0) -> np.ndarray:
    """World-to-camera rotation with the optical (+z) axis from eye to target."""
    eye = np.asarray(eye, dtype=float)
    z = np.asarray(target, dtype=float) - eye
    nz = np.linalg.norm(z)
    if nz == 0.0:
        raise ValueError("eye and target coincide")
    z = z / nz
    up = np.array([0.0, 0.0, 1.0])
    x = np.cross(up, z)
    if np.linalg.norm(x) < 1e-12:
        x = np.array([1.0, 0.0, 0.0])
    x /= np.linalg.norm(x)
    y = np.cross(z, x)
    R = np.stack([x, y, z], axis=0)
    if roll != 0.0:
        cr, sr = math.cos(roll), math.sin(roll)
        R = np.array([[cr, -sr, 0.0], [sr, cr, 0.0], [0.0, 0.0, 1.0]]) @ R
    return R


def random_rotation_vector(rng: np.random.Generator) -> np.ndarray:
    """Uniform random angle-axis vector in the solid pi-ball."""
    while True:
        r = rng.uniform(-PI, PI, size=3)
        if np.linalg.norm(r) <= PI:
            return r
