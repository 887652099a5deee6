"""Objective function and branch bounds for inlier-set cardinality maximisation.

A pose ``(r, t)`` scores one inlier per bearing ``f`` that has some point ``p``
with ``angle(f, R_r (p - t)) <= theta``. For a rotation cube x translation
cuboid domain, valid upper bounds are obtained by inflating ``theta`` with
rotation and translation uncertainty angles (weak sphere-based or tight
cuboid-based variants), or by the tighter per-pair indicator that minimises
the angle over the translation cuboid exactly (ray-through-box test plus the
cuboid skeleton).
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass

import numpy as np

from .domain import Cuboid, TranslationDomain, skeleton, vertices
from .geometry import (
    PI,
    Pose,
    angles_between,
    min_angles_ray_segments,
    pairwise_angles,
    rays_intersect_boxes,
    rodrigues,
    rodrigues_many,
)

# Face-grid pitch for the certified rotation uncertainty angle, as a fraction
# of the cube half-width.
PITCH_DIVISOR = 8


class BoundMode(enum.Enum):
    """Upper-bound flavour: sphere-enclosed weak, cuboid-tight, or per-pair Gamma."""

    WEAK_SPHERE = "weak"
    TIGHT_CUBOID = "tight"
    GAMMA = "gamma"

    @classmethod
    def from_name(cls, name: str) -> "BoundMode":
        for m in cls:
            if m.value == name:
                return m
        raise ValueError(f"unknown bound mode {name!r}")


@dataclass(frozen=True)
class ProblemInstance:
    """Bearings F (N, 3), points P (M, 3), inlier threshold theta, and the
    bounded translation domain to search."""

    bearings: np.ndarray
    points: np.ndarray
    theta: float
    translation_domain: TranslationDomain

    def __post_init__(self):
        F = np.atleast_2d(np.asarray(self.bearings, dtype=float))
        P = np.atleast_2d(np.asarray(self.points, dtype=float))
        if F.size == 0:
            F = F.reshape(0, 3)
        if P.size == 0:
            P = P.reshape(0, 3)
        norms = np.linalg.norm(F, axis=1)
        if np.any(norms == 0):
            raise ValueError("bearing vectors must be nonzero")
        F = F / norms[:, None]
        if not (0.0 < self.theta < PI):
            raise ValueError("theta must lie in (0, pi)")
        object.__setattr__(self, "bearings", F)
        object.__setattr__(self, "points", P)

    @property
    def num_bearings(self) -> int:
        return len(self.bearings)

    @property
    def num_points(self) -> int:
        return len(self.points)

    @property
    def zeta(self) -> float:
        return self.translation_domain.zeta


def _mirror(cube: Cuboid) -> Cuboid:
    """Cube of the negated angle-axis vectors; bounds for inverse rotations
    of a cube are forward bounds over its mirror."""
    return Cuboid(-cube.center, cube.half_widths)


def inverse_rotated_bearings(F: np.ndarray, r0: np.ndarray) -> np.ndarray:
    """Rows R_{r0}^{-1} f, so that angle(f, R(p - t)) = angle(R^{-1} f, p - t)."""
    return np.asarray(F) @ rodrigues(r0)


def _unit_angle_matrix(G: np.ndarray, Uhat: np.ndarray) -> np.ndarray:
    """Angles between unit bearing rows G (..., N, 3) and unit rows Uhat (M, 3)
    via one matrix product; returns (..., N, M)."""
    c = G @ Uhat.T
    s = np.sqrt(np.maximum(1.0 - c * c, 0.0))
    return np.arctan2(s, c)


def objective(pose: Pose, inst: ProblemInstance) -> int:
    """Inlier count at a pose; each bearing counts at most once.

    Point-camera coincidences (``p == t`` exactly) contribute nothing; they
    violate the minimum-range restriction of the domain.
    """
    if inst.num_bearings == 0 or inst.num_points == 0:
        return 0
    G = inverse_rotated_bearings(inst.bearings, pose.r)
    U = inst.points - pose.t
    norms = np.linalg.norm(U, axis=1)
    ok = norms > 0.0
    if not np.all(ok):
        warnings.warn("point coincides with camera centre; pair skipped", stacklevel=2)
        U, norms = U[ok], norms[ok]
        if len(U) == 0:
            return 0
    A = _unit_angle_matrix(G, U / norms[:, None])
    return int(np.count_nonzero(A.min(axis=1) <= inst.theta))


def psi_r_weak(cube: Cuboid) -> float:
    """Weak rotation uncertainty angle min(sqrt(3) * delta_r, pi)."""
    return min(np.sqrt(3.0) * float(cube.half_widths.max()), PI)


from functools import lru_cache


@lru_cache(maxsize=256)
def _surface_offsets_cached(half_widths: tuple, pitch_divisor: int) -> tuple[np.ndarray, float]:
    h = np.asarray(half_widths, dtype=float)
    n = 2 * pitch_divisor + 1
    offsets = []
    for axis in range(3):
        u, v = (axis + 1) % 3, (axis + 2) % 3
        gu = np.linspace(-h[u], h[u], n)
        gv = np.linspace(-h[v], h[v], n)
        uu, vv = np.meshgrid(gu, gv, indexing="ij")
        face = np.zeros((n * n, 3))
        face[:, u] = uu.ravel()
        face[:, v] = vv.ravel()
        for sign in (-1.0, 1.0):
            f = face.copy()
            f[:, axis] = sign * h[axis]
            offsets.append(f)
    pitch = h.max() / pitch_divisor
    margin = pitch * np.sqrt(2.0) / 2.0
    return np.concatenate(offsets, axis=0), float(margin)


def _surface_offsets(half_widths: np.ndarray, pitch_divisor: int) -> tuple[np.ndarray, float]:
    """Grid sample offsets covering the cube surface, plus the Lipschitz margin
    (half the diagonal of one grid cell)."""
    return _surface_offsets_cached(tuple(np.asarray(half_widths, dtype=float)), pitch_divisor)


def rotation_uncertainty_angles_batch(
    V: np.ndarray,
    centers: np.ndarray,
    half_widths: np.ndarray,
    pitch_divisor: int = PITCH_DIVISOR,
) -> np.ndarray:
    """Certified rotation uncertainty angles for several cubes sharing
    half-widths: returns (n_cubes, n_vectors)."""
    V = np.atleast_2d(np.asarray(V, dtype=float))
    V = V / np.linalg.norm(V, axis=1, keepdims=True)
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    h = np.asarray(half_widths, dtype=float)
    weak = min(np.sqrt(3.0) * float(h.max()), PI)
    B, N = len(centers), len(V)
    if float(h.max()) == 0.0:
        return np.zeros((B, N))
    offsets, margin = _surface_offsets(h, pitch_divisor)
    K = len(offsets)
    samples = (centers[:, None, :] + offsets[None, :, :]).reshape(B * K, 3)
    Rs = rodrigues_many(samples)
    RV = np.einsum("kij,nj->kni", Rs, V).reshape(B, K, N, 3)
    R0 = rodrigues_many(centers)
    V0 = np.einsum("bij,nj->bni", R0, V)
    c = np.einsum("bkni,bni->bkn", RV, V0)
    ang = np.arctan2(np.sqrt(np.maximum(1.0 - c * c, 0.0)), c)
    return np.minimum(ang.max(axis=1) + margin, weak)


def rotation_uncertainty_angles(
    V: np.ndarray, cube: Cuboid, pitch_divisor: int = PITCH_DIVISOR
) -> np.ndarray:
    """Certified upper bounds on max_{r in cube} angle(R_r v, R_{r0} v), one per
    row of V.

    The maximum is attained on the cube surface; each face is sampled on a grid
    and the observed maximum is inflated by the grid cell half-diagonal, a valid
    Lipschitz margin because the angle varies by at most ``||r1 - r2||`` between
    sample points. The result is clamped by the weak bound.
    """
    V = np.atleast_2d(np.asarray(V, dtype=float))
    if np.any(np.linalg.norm(V, axis=1) == 0.0):
        raise ValueError("rotation uncertainty undefined for zero vectors")
    return rotation_uncertainty_angles_batch(
        V, cube.center[None, :], cube.half_widths, pitch_divisor
    )[0]


def psi_r_tight(v: np.ndarray, cube: Cuboid, pitch_divisor: int = PITCH_DIVISOR) -> float:
    """Tight rotation uncertainty angle for a single vector."""
    return float(rotation_uncertainty_angles(np.asarray(v)[None, :], cube, pitch_divisor)[0])


def psi_t_many(P: np.ndarray, ct: Cuboid, zeta: float = 0.0) -> np.ndarray:
    """Translation uncertainty angles, one per point.

    Returns pi for points inside the cuboid (or within ``zeta`` of it, the
    conservative minimum-range treatment); otherwise the exact maximum of
    angle(p - t, p - t0) over t in the cuboid, attained at a vertex.
    """
    P = np.atleast_2d(np.asarray(P, dtype=float))
    lo = ct.center - ct.half_widths
    hi = ct.center + ct.half_widths
    d = P - np.clip(P, lo, hi)
    dist2 = np.einsum("ij,ij->i", d, d)
    inside = dist2 <= 0.0
    violating = dist2 < zeta * zeta
    out = np.full(len(P), PI)
    free = ~(inside | violating)
    if np.any(free):
        vs = vertices(ct)  # (8, 3)
        dv = P[free][:, None, :] - vs[None, :, :]
        d0 = P[free] - ct.center
        ang = angles_between(dv, d0[:, None, :])
        out[free] = ang.max(axis=1)
    return out


def psi_t(p: np.ndarray, ct: Cuboid, zeta: float = 0.0) -> float:
    return float(psi_t_many(np.asarray(p)[None, :], ct, zeta)[0])


def psi_t_weak_many(P: np.ndarray, ct: Cuboid, zeta: float = 0.0) -> np.ndarray:
    """Sphere-enclosure translation uncertainty: arcsin(rho / ||p - t0||) with
    rho the cuboid half-diagonal, pi when the sphere reaches the point (or the
    cuboid violates the minimum range)."""
    P = np.atleast_2d(np.asarray(P, dtype=float))
    rho = float(np.linalg.norm(ct.half_widths))
    dist = np.linalg.norm(P - ct.center, axis=1)
    out = np.full(len(P), PI)
    ok = rho <= dist
    if zeta > 0.0:
        lo = ct.center - ct.half_widths
        hi = ct.center + ct.half_widths
        d = P - np.clip(P, lo, hi)
        ok &= np.einsum("ij,ij->i", d, d) >= zeta * zeta
    nz = ok & (dist > 0.0)
    out[nz] = np.arcsin(np.clip(rho / dist[nz], 0.0, 1.0))
    if rho == 0.0:
        out[ok & (dist == 0.0)] = 0.0
    return out


def psi_t_weak(p: np.ndarray, ct: Cuboid, zeta: float = 0.0) -> float:
    return float(psi_t_weak_many(np.asarray(p)[None, :], ct, zeta)[0])


def lower_bound(center_pose: Pose, inst: ProblemInstance) -> int:
    """Domain lower bound: the objective at the domain centre pose."""
    return objective(center_pose, inst)


class FixedTranslationEvaluator:
    """Per-rotation-node bound evaluation at a fixed translation (psi_t = 0).

    For a rotation cube with inverse-rotated bearings G and per-bearing
    rotation slack psi, the node lower bound counts bearings whose closest
    point angle is within theta, the upper bound within theta + psi.
    """

    def __init__(self, inst: ProblemInstance, t0: np.ndarray):
        U = inst.points - np.asarray(t0, dtype=float)
        norms = np.linalg.norm(U, axis=1)
        keep = norms > 0.0
        self.U = U[keep] / norms[keep][:, None]
        self.theta = inst.theta
        self.n = inst.num_bearings
        self.empty = len(self.U) == 0 or self.n == 0

    def rowmins(self, G: np.ndarray) -> np.ndarray:
        """Per (node, bearing) minimum angle to any point; G is (B, N, 3)."""
        if self.empty:
            return np.full((G.shape[0], self.n), np.inf)
        return _unit_angle_matrix(G, self.U).min(axis=2)

    def evaluate(self, G: np.ndarray, psi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """G: (B, N, 3) node bearing sets; psi: (B, N) rotation slack.
        Returns (lower (B,), upper (B,)) integer bound arrays."""
        amin = self.rowmins(G)
        lb = np.count_nonzero(amin <= self.theta, axis=1)
        ub = np.count_nonzero(amin <= self.theta + psi, axis=1)
        return lb.astype(int), ub.astype(int)


class RelaxedEvaluator:
    """Bound evaluation over a translation cuboid via per-point translation
    slack (weak sphere or tight vertex-maximum variant)."""

    def __init__(self, inst: ProblemInstance, ct: Cuboid, mode: BoundMode):
        zeta = inst.zeta
        if mode is BoundMode.WEAK_SPHERE:
            self.psi_t = psi_t_weak_many(inst.points, ct, zeta)
        else:
            self.psi_t = psi_t_many(inst.points, ct, zeta)
        U = inst.points - ct.center
        norms = np.linalg.norm(U, axis=1)
        # Degenerate directions only occur when the point lies in the cuboid,
        # where psi_t = pi makes the pair an inlier regardless of the angle.
        U[norms == 0.0] = (0.0, 0.0, 1.0)
        self.U = U / np.linalg.norm(U, axis=1, keepdims=True)
        self.theta = inst.theta
        self.n = inst.num_bearings
        self.empty = inst.num_points == 0 or self.n == 0

    def angle_matrix(self, G: np.ndarray) -> np.ndarray:
        """Raw centre angles per (node, bearing, point); G is (B, N, 3)."""
        return _unit_angle_matrix(G, self.U)

    def rowmins(self, G: np.ndarray, A: np.ndarray | None = None) -> np.ndarray:
        """Per (node, bearing) minimum translation-slackened angle."""
        if self.empty:
            return np.full((G.shape[0], self.n), np.inf)
        if A is None:
            A = self.angle_matrix(G)
        return (A - self.psi_t[None, None, :]).min(axis=2)

    def evaluate(self, G: np.ndarray, psi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        slack_min = self.rowmins(G)
        lb = np.count_nonzero(slack_min <= self.theta, axis=1)
        ub = np.count_nonzero(slack_min <= self.theta + psi, axis=1)
        return lb.astype(int), ub.astype(int)


class GammaEvaluator:
    """Per-pair bound evaluation over a translation cuboid using the exact
    minimum angle between each bearing ray and the translated-point box.

    The minimum is zero when the ray passes through the box (slab test) and is
    otherwise attained on the box skeleton. Pairs that fail the cheap
    triangle-inequality gate are provably outliers over the whole domain and
    are skipped. Boxes reaching within the minimum range of the origin make
    their point an unconditional inlier candidate (conservative).
    """

    def __init__(self, inst: ProblemInstance, ct: Cuboid):
        zeta = inst.zeta
        centers = inst.points - ct.center
        self.boxes_lo = centers - ct.half_widths
        self.boxes_hi = centers + ct.half_widths
        # Distance from the origin to each box: auto-inlier when within zeta.
        cl = np.clip(np.zeros(3), self.boxes_lo, self.boxes_hi)
        d = cl  # closest point of each box to the origin
        self.auto = np.einsum("ij,ij->i", d, d) < zeta * zeta
        self.gate_psi_t = psi_t_many(inst.points, ct, zeta)
        U = centers.copy()
        norms = np.linalg.norm(U, axis=1)
        U[norms == 0.0] = (0.0, 0.0, 1.0)
        self.U = U / np.linalg.norm(U, axis=1, keepdims=True)
        skels = np.stack([skeleton(Cuboid(c, ct.half_widths)) for c in centers])
        self.seg_a = skels[:, :, 0, :]  # (M, 12, 3)
        self.seg_b = skels[:, :, 1, :]
        self.theta = inst.theta
        self.n = inst.num_bearings
        self.empty = inst.num_points == 0 or self.n == 0

    def _pair_min_angles(
        self, G: np.ndarray, psi: np.ndarray, A: np.ndarray | None = None
    ) -> np.ndarray:
        """Minimum ray-to-box angle per (node, bearing, point), inf where the
        gate already proves the pair an outlier."""
        B, N = G.shape[0], G.shape[1]
        M = len(self.U)
        if A is None:
            A = _unit_angle_matrix(G, self.U)
        gate = A <= self.theta + psi[:, :, None] + self.gate_psi_t[None, None, :]
        gate &= ~self.auto[None, None, :]
        m = np.full((B, N, M), np.inf)
        m[:, :, self.auto] = 0.0
        bi, ni, mi = np.nonzero(gate)
        if len(bi) == 0:
            return m
        rays = G[bi, ni]
        hit = rays_intersect_boxes(rays, self.boxes_lo[mi], self.boxes_hi[mi])
        vals = np.zeros(len(bi))
        miss = ~hit
        if np.any(miss):
            rm = np.repeat(rays[miss], 12, axis=0)
            am = self.seg_a[mi[miss]].reshape(-1, 3)
            bm = self.seg_b[mi[miss]].reshape(-1, 3)
            seg_ang = min_angles_ray_segments(rm, am, bm).reshape(-1, 12)
            vals[miss] = seg_ang.min(axis=1)
        m[bi, ni, mi] = vals
        return m

    def evaluate(
        self, G: np.ndarray, psi: np.ndarray, A: np.ndarray | None = None
    ) -> tuple[np.ndarray, np.ndarray]:
        B = G.shape[0]
        if self.empty:
            z = np.zeros(B, dtype=int)
            return z, z
        m = self._pair_min_angles(G, psi, A)
        mmin = m.min(axis=2)
        lb = np.count_nonzero(mmin <= self.theta, axis=1)
        ub = np.count_nonzero(mmin <= self.theta + psi, axis=1)
        return lb.astype(int), ub.astype(int)


def _node_inputs(inst: ProblemInstance, cr: Cuboid, mode: BoundMode,
                 pitch_divisor: int = PITCH_DIVISOR) -> tuple[np.ndarray, np.ndarray]:
    """Inverse-rotated bearings and per-bearing rotation slack for one cube."""
    G = inverse_rotated_bearings(inst.bearings, cr.center)[None, :, :]
    if mode is BoundMode.WEAK_SPHERE:
        psi = np.full((1, inst.num_bearings), psi_r_weak(cr))
    else:
        psi = rotation_uncertainty_angles(inst.bearings, _mirror(cr), pitch_divisor)[None, :]
    return G, psi


def upper_bound(cr: Cuboid, ct: Cuboid, inst: ProblemInstance, mode: BoundMode) -> int:
    """Upper bound on the inlier count over the rotation cube x translation
    cuboid domain, in the requested mode."""
    G, psi = _node_inputs(inst, cr, mode)
    if mode is BoundMode.GAMMA:
        ev: object = GammaEvaluator(inst, ct)
    else:
        ev = RelaxedEvaluator(inst, ct, mode)
    _, ub = ev.evaluate(G, psi)
    return int(ub[0])


def rbb_bounds(
    cr: Cuboid,
    t0_or_ct,
    inst: ProblemInstance,
    mode: BoundMode,
    with_psi_t: bool,
) -> tuple[int, int]:
    """Nested rotation-search bounds for one rotation cube.

    With ``with_psi_t=False`` the translation is the fixed point ``t0`` and the
    bounds are exact objective bounds at that translation. With
    ``with_psi_t=True`` the argument is a translation cuboid and the bounds are
    for the relaxed objective that folds the translation slack in (per-point
    slack for the weak/tight modes, exact per-pair box minimisation for Gamma).
    """
    G, psi = _node_inputs(inst, cr, mode)
    if not with_psi_t:
        ev: object = FixedTranslationEvaluator(inst, np.asarray(t0_or_ct, dtype=float))
    elif mode is BoundMode.GAMMA:
        ev = GammaEvaluator(inst, t0_or_ct)
    else:
        ev = RelaxedEvaluator(inst, t0_or_ct, mode)
    lb, ub = ev.evaluate(G, psi)
    return int(lb[0]), int(ub[0])
