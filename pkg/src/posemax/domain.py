"""Search-domain parametrisation: axis-aligned cuboids, octree subdivision,
the rotation cube circumscribing the pi-ball, and translation domains with a
minimum camera-to-point range.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geometry import PI

# Vertex sign patterns, fixed order so skeleton/vertex enumeration is deterministic.
_SIGNS = np.array(
    [[sx, sy, sz] for sx in (-1.0, 1.0) for sy in (-1.0, 1.0) for sz in (-1.0, 1.0)]
)

# The 12 cube edges as index pairs into the vertex table above.
_EDGES = np.array(
    [
        (0, 1), (2, 3), (4, 5), (6, 7),
        (0, 2), (1, 3), (4, 6), (5, 7),
        (0, 4), (1, 5), (2, 6), (3, 7),
    ]
)


@dataclass(frozen=True)
class Cuboid:
    """Axis-aligned box with centre and per-axis half-widths."""

    center: np.ndarray
    half_widths: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float)
        h = np.asarray(self.half_widths, dtype=float)
        if np.any(h < 0):
            raise ValueError("half widths must be non-negative")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "half_widths", h)

    @property
    def width(self) -> float:
        """Greatest full side length (twice the largest half-width)."""
        return 2.0 * float(self.half_widths.max())

    @property
    def volume(self) -> float:
        return float(np.prod(2.0 * self.half_widths))

    def contains(self, x: np.ndarray) -> bool:
        d = np.abs(np.asarray(x, dtype=float) - self.center)
        return bool(np.all(d <= self.half_widths + 1e-15))

    def closest_point(self, x: np.ndarray) -> np.ndarray:
        return np.clip(np.asarray(x, dtype=float), self.center - self.half_widths,
                       self.center + self.half_widths)

    def distance_to(self, x: np.ndarray) -> float:
        return float(np.linalg.norm(np.asarray(x, dtype=float) - self.closest_point(x)))


def subdivide(c: Cuboid) -> list[Cuboid]:
    """The 8 octants of a cuboid, half-widths halved per axis.

    Zero-width axes are never split: the offset along them is zero, so the
    returned octants duplicate along degenerate axes. An all-degenerate cuboid
    cannot be subdivided.
    """
    if float(c.half_widths.max()) <= 0.0:
        raise ValueError("cannot subdivide a degenerate (point) cuboid")
    h = c.half_widths / 2.0
    return [Cuboid(c.center + s * h, h) for s in _SIGNS]


def subdivide_unique(c: Cuboid) -> list[Cuboid]:
    """Octants with duplicates from degenerate axes collapsed (2^k children)."""
    kids = subdivide(c)
    seen: set[tuple] = set()
    out = []
    for k in kids:
        key = tuple(k.center.tolist())
        if key not in seen:
            seen.add(key)
            out.append(k)
    return out


def vertices(c: Cuboid) -> np.ndarray:
    """The 8 corner points (degenerate axes yield duplicated corners)."""
    return c.center + _SIGNS * c.half_widths


def skeleton(c: Cuboid) -> np.ndarray:
    """The 12 edges as an array of endpoint pairs, shape (12, 2, 3)."""
    v = vertices(c)
    return v[_EDGES]


def intersects_pi_ball(c: Cuboid) -> bool:
    """True iff the cuboid's closest point to the origin lies within the pi-ball."""
    return c.distance_to(np.zeros(3)) <= PI


def violates_zeta(c: Cuboid, points: np.ndarray, zeta: float) -> bool:
    """True iff some point lies strictly within ``zeta`` of the cuboid."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if len(points) == 0:
        return False
    lo = c.center - c.half_widths
    hi = c.center + c.half_widths
    d = points - np.clip(points, lo, hi)
    return bool(np.any(np.einsum("ij,ij->i", d, d) < zeta * zeta))


def rotation_domain() -> Cuboid:
    """The cube circumscribing the pi-ball of angle-axis vectors."""
    return Cuboid(np.zeros(3), np.full(3, PI))


@dataclass(frozen=True)
class TranslationDomain:
    """A union of translation cuboids plus the minimum range zeta (metres)."""

    cuboids: tuple[Cuboid, ...]
    zeta: float = 1e-3

    def __post_init__(self):
        if len(self.cuboids) == 0:
            raise ValueError("translation domain must contain at least one cuboid")
        if self.zeta <= 0:
            raise ValueError("zeta must be positive")
        object.__setattr__(self, "cuboids", tuple(self.cuboids))

    @staticmethod
    def from_box(center, half_widths, zeta: float = 1e-3) -> "TranslationDomain":
        return TranslationDomain((Cuboid(np.asarray(center), np.asarray(half_widths)),), zeta)

    @property
    def volume(self) -> float:
        return float(sum(c.volume for c in self.cuboids))

    def contains(self, t: np.ndarray) -> bool:
        return any(c.contains(t) for c in self.cuboids)


def bounding_domain(points: np.ndarray, margin: float = 0.0, zeta: float = 1e-3) -> TranslationDomain:
    """Axis-aligned bounding box of a point set, optionally expanded."""
    points = np.asarray(points, dtype=float)
    lo = points.min(axis=0) - margin
    hi = points.max(axis=0) + margin
    return TranslationDomain.from_box((lo + hi) / 2.0, (hi - lo) / 2.0, zeta)
