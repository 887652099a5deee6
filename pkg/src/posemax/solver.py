"""Nested branch-and-bound search for globally-optimal camera pose and
correspondences.

The outer search branches the translation domain (widest cuboid first) and
bounds each sub-cuboid by running an inner best-first branch-and-bound over
rotation space (RBB). The inner lower-bound run fixes the translation at the
cuboid centre; the inner upper-bound run folds the translation uncertainty
into the threshold. Local pose refinement is applied whenever a promising
sub-cuboid is found, raising the incumbent without affecting optimality.
"""

from __future__ import annotations

import heapq
import itertools
import math
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from .bounds import (
    BoundMode,
    FixedTranslationEvaluator,
    GammaEvaluator,
    ProblemInstance,
    RelaxedEvaluator,
    objective,
    rotation_uncertainty_angles_batch,
)
from .domain import (
    Cuboid,
    TranslationDomain,
    intersects_pi_ball,
    rotation_domain,
    subdivide_unique,
)
from .estimators import Correspondence, extract_correspondences, refine_pnp
from .geometry import PI, Pose, rodrigues_many

# Cubes (rotation or translation) narrower than this are treated as converged;
# below it bound gaps can only come from floating-point ties on the threshold.
_MIN_WIDTH = 1e-12

_SIGNS = np.array(
    [[sx, sy, sz] for sx in (-1.0, 1.0) for sy in (-1.0, 1.0) for sz in (-1.0, 1.0)]
)


@dataclass
class SolverConfig:
    """Search configuration.

    ``zeta`` overrides the instance domain's minimum camera-to-point range
    when set. ``precompute_depth`` is the number of rotation-octree levels for
    which rotated bearings and tight rotation uncertainty angles are cached
    (deeper nodes fall back to the weak rotation bound).
    """

    bound_mode: BoundMode = BoundMode.GAMMA
    zeta: float | None = None
    threads: int = 1
    guess_verify: bool = False
    precompute_depth: int = 5
    time_budget: float | None = None
    refine: bool = True

    def __post_init__(self):
        if isinstance(self.bound_mode, str):
            self.bound_mode = BoundMode.from_name(self.bound_mode)
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        if self.precompute_depth < 0:
            raise ValueError("precompute_depth must be >= 0")


@dataclass(frozen=True)
class QueueEntry:
    """A branch queue element: a cuboid with its cached upper bound."""

    cuboid: Cuboid
    bound: int
    kind: str = "translation"


@dataclass(frozen=True)
class TraceSample:
    wall_time: float
    lower: int
    upper: int
    remaining_volume: float
    queue_size: int


@dataclass
class Solution:
    """Solver output: optimal inlier count, attaining pose, correspondences,
    certification flag and the bound-evolution trace."""

    nu_star: int
    pose: Pose | None
    correspondences: tuple[Correspondence, ...]
    optimal: bool
    trace: tuple[TraceSample, ...] = ()


class _RotNode:
    __slots__ = ("center", "half", "level", "G", "psi")

    def __init__(self, center, half, level, G):
        self.center = center
        self.half = half
        self.level = level
        self.G = G  # inverse-rotated bearings, (N, 3)
        self.psi = None  # lazy tight rotation slack, (N,)

    @property
    def cube(self) -> Cuboid:
        return Cuboid(self.center, np.full(3, self.half))


def enumerate_octree(depth: int):
    """All rotation-octree nodes to ``depth`` (before pi-ball culling), as
    (level, center, half_width) tuples."""
    out = [(0, np.zeros(3), PI)]
    frontier = [np.zeros(3)]
    half = PI
    for level in range(1, depth + 1):
        half /= 2.0
        nxt = []
        for c in frontier:
            for s in _SIGNS:
                child = c + s * half
                nxt.append(child)
                out.append((level, child, half))
        frontier = nxt
    return out


class RotationCache:
    """Memoised per-rotation-node data shared across all inner searches.

    Stores the inverse-rotated bearing set and (lazily) the tight per-bearing
    rotation uncertainty for every node down to ``depth`` levels. Deeper nodes
    are computed on the fly and not retained. Lookups are bit-identical to
    direct computation, so runs with and without memoisation coincide.
    """

    def __init__(self, bearings: np.ndarray, depth: int = 5, memoize: bool = True):
        self.F = np.atleast_2d(np.asarray(bearings, dtype=float))
        self.depth = depth
        self.memoize = memoize
        self._nodes: dict[tuple, _RotNode] = {}
        self._root = _RotNode(np.zeros(3), PI, 0, self.F.copy())
        if memoize:
            self._nodes[self._key(self._root.center, 0)] = self._root

    @staticmethod
    def _key(center: np.ndarray, level: int) -> tuple:
        return (level, center[0], center[1], center[2])

    def root(self) -> _RotNode:
        return self._root

    def _make_nodes(self, centers: np.ndarray, half: float, level: int) -> list[_RotNode]:
        Rs = rodrigues_many(centers)
        Gs = np.einsum("nj,kji->kni", self.F, Rs)
        return [_RotNode(c, half, level, g) for c, g in zip(centers, Gs)]

    def children(self, node: _RotNode) -> list[_RotNode]:
        """The pi-ball-intersecting octants of a rotation node."""
        half = node.half / 2.0
        level = node.level + 1
        centers = node.center + _SIGNS * half
        # Cull cubes wholly outside the pi-ball: every rotation has an
        # in-ball representative, so nothing is lost.
        d = np.maximum(np.abs(centers) - half, 0.0)
        keep = (d * d).sum(axis=1) <= PI * PI
        centers = centers[keep]
        store = self.memoize and level <= self.depth
        if not store:
            return self._make_nodes(centers, half, level)
        found: list[_RotNode | None] = []
        missing = []
        for c in centers:
            nd = self._nodes.get(self._key(c, level))
            found.append(nd)
            if nd is None:
                missing.append(c)
        if missing:
            made = iter(self._make_nodes(np.array(missing), half, level))
            for i, nd in enumerate(found):
                if nd is None:
                    new = next(made)
                    self._nodes[self._key(new.center, level)] = new
                    found[i] = new
        return found  # type: ignore[return-value]

    def psi_tight(self, nodes: list[_RotNode]) -> None:
        """Fill the tight rotation slack for the given nodes (batched; the
        bounds apply to inverse rotations, hence the mirrored centres)."""
        todo = [nd for nd in nodes if nd.psi is None]
        if not todo:
            return
        by_half: dict[float, list[_RotNode]] = {}
        for nd in todo:
            by_half.setdefault(nd.half, []).append(nd)
        for half, group in by_half.items():
            centers = np.array([-nd.center for nd in group])
            psis = rotation_uncertainty_angles_batch(self.F, centers, np.full(3, half))
            for nd, psi in zip(group, psis):
                nd.psi = psi

    def node_count(self) -> int:
        return len(self._nodes)


def precompute_rotation_cache(bearings: np.ndarray, depth: int) -> RotationCache:
    """Eagerly build the rotation cache for every pi-ball-intersecting node to
    ``depth`` levels, including tight rotation uncertainty angles."""
    cache = RotationCache(bearings, depth=depth, memoize=True)
    frontier = [cache.root()]
    cache.psi_tight(frontier)
    for _ in range(depth):
        nxt = []
        for nd in frontier:
            kids = cache.children(nd)
            cache.psi_tight(kids)
            nxt.extend(kids)
        frontier = nxt
    return cache


def pnp_trigger(nu_lower: int, nu_star: int) -> bool:
    """Refine locally when the best-so-far is less than twice the new lower bound."""
    return nu_star < 2 * nu_lower


class _SharedBest:
    """Monotone best-so-far shared by workers: any may raise it, all may read."""

    def __init__(self, nu0: int = 0):
        self.lock = threading.Lock()
        self.nu = nu0
        self.pose: Pose | None = None

    def offer(self, nu: int, pose: Pose) -> bool:
        with self.lock:
            if nu > self.nu:
                self.nu = nu
                self.pose = pose
                return True
            return False

    def snapshot(self) -> tuple[int, Pose | None]:
        with self.lock:
            return self.nu, self.pose


class _TraceCollector:
    """Merges per-worker bound/volume/queue states into a global trace."""

    def __init__(self, n_workers: int, total_volume: float):
        self.lock = threading.Lock()
        self.t0 = time.perf_counter()
        self.samples: list[TraceSample] = []
        self.upper = [None] * n_workers  # type: list
        self.volume = [0.0] * n_workers
        self.qsize = [0] * n_workers
        self.total_volume = total_volume

    def record(self, wid: int, lower: int, upper: int, volume: float, qsize: int):
        with self.lock:
            self.upper[wid] = upper
            self.volume[wid] = volume
            self.qsize[wid] = qsize
            glob_upper = max(u for u in self.upper if u is not None)
            frac = (
                sum(self.volume) / self.total_volume if self.total_volume > 0 else 0.0
            )
            self.samples.append(
                TraceSample(
                    wall_time=time.perf_counter() - self.t0,
                    lower=lower,
                    upper=max(glob_upper, lower),
                    remaining_volume=frac,
                    queue_size=sum(self.qsize),
                )
            )


class _BoundCounter:
    """Multiset of integer queue bounds with O(1) max tracking."""

    def __init__(self, nmax: int):
        self.counts = [0] * (nmax + 2)
        self.nmax = nmax

    def add(self, b: int):
        self.counts[b] += 1

    def remove(self, b: int):
        self.counts[b] -= 1

    def max(self) -> int:
        for b in range(self.nmax, -1, -1):
            if self.counts[b] > 0:
                return b
        return 0

    def empty(self) -> bool:
        return all(c == 0 for c in self.counts)


class _InnerSearch:
    """RBB: best-first branch-and-bound over rotation space for one
    translation centre or cuboid."""

    def __init__(self, inst: ProblemInstance, cache: RotationCache, mode: BoundMode):
        self.inst = inst
        self.cache = cache
        self.mode = mode
        self.n = inst.num_bearings

    def _psi_for(self, nodes: list[_RotNode], weak: float) -> np.ndarray:
        """Per-bearing rotation slack per node: tight within the cached depth,
        weak beyond it (both valid; weak avoids surface sampling deep down)."""
        out = np.full((len(nodes), self.n), weak)
        if self.mode is BoundMode.WEAK_SPHERE:
            return out
        shallow = [nd for nd in nodes if nd.level <= self.cache.depth]
        self.cache.psi_tight(shallow)
        for i, nd in enumerate(nodes):
            if nd.psi is not None:
                out[i] = nd.psi
        return out

    def run(
        self,
        t0: np.ndarray | None,
        ct: Cuboid | None,
        nu_seed: int,
        deadline: float | None = None,
    ) -> tuple[int, np.ndarray | None, int, np.ndarray | None]:
        """Returns (nu, r, nu_center_best, r_center_best).

        With ``ct`` absent this is the exact search over rotations at fixed
        ``t0`` seeded at ``nu_seed``; with ``ct`` present it converges to the
        relaxed maximum, a valid upper bound for the whole cuboid. The last two
        values track the best centre evaluation regardless of the seed (used by
        the refinement trigger).
        """
        inst, mode = self.inst, self.mode
        if ct is None:
            ev = FixedTranslationEvaluator(inst, t0)
        elif mode is BoundMode.GAMMA:
            ev = GammaEvaluator(inst, ct)
            gate_ev = RelaxedEvaluator(inst, ct, BoundMode.TIGHT_CUBOID)
        else:
            ev = RelaxedEvaluator(inst, ct, mode)
        gamma = ct is not None and mode is BoundMode.GAMMA

        nu_best = nu_seed
        r_best: np.ndarray | None = None
        c_best = -1
        rc_best: np.ndarray | None = None
        counter = itertools.count()
        heap: list = []

        def visit(nodes: list[_RotNode]):
            nonlocal nu_best, r_best, c_best, rc_best
            G = np.stack([nd.G for nd in nodes])
            weak = min(math.sqrt(3.0) * nodes[0].half, PI)
            if gamma:
                # Cheap valid pre-bound; children it prunes cannot affect the
                # incumbent, so the expensive per-pair bound is skipped there.
                A = gate_ev.angle_matrix(G)
                rm_pre = gate_ev.rowmins(G, A)
                ub_pre = np.count_nonzero(rm_pre <= inst.theta + weak, axis=1)
                alive = [i for i in range(len(nodes)) if ub_pre[i] > nu_best]
                if not alive:
                    return
                nodes_a = [nodes[i] for i in alive]
                psi = self._psi_for(nodes_a, weak)
                lb, ub = ev.evaluate(G[alive], psi, A[alive])
            else:
                rm = ev.rowmins(G)
                lb = np.count_nonzero(rm <= inst.theta, axis=1)
                ub_weak = np.count_nonzero(rm <= inst.theta + weak, axis=1)
                if mode is BoundMode.WEAK_SPHERE:
                    nodes_a, ub = nodes, ub_weak
                else:
                    alive = [i for i in range(len(nodes)) if ub_weak[i] > nu_best]
                    keep_lb = lb
                    nodes_a = [nodes[i] for i in alive]
                    if nodes_a:
                        psi = self._psi_for(nodes_a, weak)
                        ub = np.count_nonzero(
                            rm[alive] <= inst.theta + psi, axis=1
                        ).astype(int)
                        lb = keep_lb[alive]
                    else:
                        lb = ub = np.zeros(0, dtype=int)
                    # Centre values of pruned children still inform the trigger.
                    for i in range(len(nodes)):
                        if keep_lb[i] > c_best:
                            c_best = int(keep_lb[i])
                            rc_best = nodes[i].center
            for nd, l, u in zip(nodes_a, lb, ub):
                l, u = int(l), int(u)
                if l > c_best:
                    c_best = l
                    rc_best = nd.center
                if l > nu_best:
                    nu_best = l
                    r_best = nd.center
                if u > nu_best and nd.half * 2.0 > _MIN_WIDTH:
                    heapq.heappush(heap, (-u, next(counter), nd))

        visit([self.cache.root()])
        while heap:
            neg_ub, _, node = heapq.heappop(heap)
            if nu_best >= -neg_ub:
                break
            if deadline is not None and time.perf_counter() > deadline:
                break
            visit(self.cache.children(node))
        return nu_best, r_best, c_best, rc_best


def _effective_instance(inst: ProblemInstance, cfg: SolverConfig) -> ProblemInstance:
    if cfg.zeta is None or cfg.zeta == inst.translation_domain.zeta:
        return inst
    dom = TranslationDomain(inst.translation_domain.cuboids, cfg.zeta)
    return ProblemInstance(inst.bearings, inst.points, inst.theta, dom)


def _zeta_feasible(t: np.ndarray, points: np.ndarray, zeta: float) -> bool:
    if len(points) == 0:
        return True
    d = points - t
    return bool(np.all(np.einsum("ij,ij->i", d, d) >= zeta * zeta))


def _wholly_infeasible(c: Cuboid, points: np.ndarray, zeta: float) -> bool:
    """True if every translation in the cuboid violates the minimum range
    (the cuboid lies strictly inside some point's zeta-ball)."""
    if len(points) == 0:
        return False
    far = np.abs(points - c.center) + c.half_widths
    return bool(np.any(np.einsum("ij,ij->i", far, far) < zeta * zeta))


class _Worker:
    """Outer translation search over one set of seed cuboids."""

    def __init__(
        self,
        wid: int,
        inst: ProblemInstance,
        seeds: list[Cuboid],
        cfg: SolverConfig,
        cache: RotationCache,
        shared: _SharedBest,
        collector: _TraceCollector,
        deadline: float | None,
    ):
        self.wid = wid
        self.inst = inst
        self.cfg = cfg
        self.cache = cache
        self.shared = shared
        self.collector = collector
        self.deadline = deadline
        self.inner = _InnerSearch(inst, cache, cfg.bound_mode)
        self.n = inst.num_bearings
        self.seeds = seeds
        self.optimal = False

    def _try_refine(self, r: np.ndarray, t0: np.ndarray):
        """Local nonlinear refinement from the trigger pose; the incumbent is
        only raised by poses inside the (range-feasible) domain."""
        inst = self.inst
        init = Pose(r, t0)
        corrs = extract_correspondences(init, inst)
        if len(corrs) < 3:
            return
        result = refine_pnp(corrs, inst, init)
        pose = result.pose
        if not inst.translation_domain.contains(pose.t):
            return
        if not _zeta_feasible(pose.t, inst.points, inst.zeta):
            return
        nu = objective(pose, inst)
        if nu > self.shared.nu:
            self.shared.offer(nu, pose)

    def run(self):
        inst, cfg = self.inst, self.cfg
        zeta = inst.zeta
        counter = itertools.count()
        heap: list = []
        bounds = _BoundCounter(self.n)
        volume = 0.0
        for c in self.seeds:
            heapq.heappush(heap, (-c.width, next(counter), QueueEntry(c, self.n)))
            bounds.add(self.n)
            volume += c.volume

        truncated = False
        while heap:
            neg_w, _, entry = heapq.heappop(heap)
            ct, bound = entry.cuboid, entry.bound
            upper_q = bounds.max()
            bounds.remove(bound)
            nu_now, _ = self.shared.snapshot()
            self.collector.record(self.wid, nu_now, max(upper_q, nu_now), volume, len(heap) + 1)
            if nu_now >= upper_q:
                break
            if self.deadline is not None and time.perf_counter() > self.deadline:
                truncated = True
                break
            volume -= ct.volume
            if bound <= nu_now:
                continue
            if -neg_w <= _MIN_WIDTH:
                # Degenerate leaf: take its exact centre value and stop splitting.
                self._process_center(ct.center)
                continue
            for child in subdivide_unique(ct):
                if _wholly_infeasible(child, inst.points, zeta):
                    continue
                self._process_center(child.center)
                nu_now, _ = self.shared.snapshot()
                ub, _, _, _ = self.inner.run(None, child, nu_now, self.deadline)
                if self.shared.nu < ub:
                    heapq.heappush(
                        heap, (-child.width, next(counter), QueueEntry(child, ub))
                    )
                    bounds.add(ub)
                    volume += child.volume

        self.optimal = not truncated
        nu_now, _ = self.shared.snapshot()
        self.collector.record(
            self.wid, nu_now, nu_now if self.optimal else max(bounds.max(), nu_now),
            volume if not self.optimal else 0.0, len(heap) if not self.optimal else 0,
        )

    def _process_center(self, t0: np.ndarray):
        inst, cfg = self.inst, self.cfg
        if not _zeta_feasible(t0, inst.points, inst.zeta):
            return
        nu_now, _ = self.shared.snapshot()
        nu, r, c_best, rc = self.inner.run(t0, None, nu_now, self.deadline)
        if r is not None and nu > self.shared.nu:
            self.shared.offer(nu, Pose(r, t0))
        if cfg.refine and rc is not None and c_best >= 3 and pnp_trigger(c_best, self.shared.nu):
            self._try_refine(rc, t0)


def _split_domain(cuboids: list[Cuboid], parts: int) -> list[list[Cuboid]]:
    """Split the initial domain into ``parts`` groups by repeatedly bisecting
    the widest cuboid along its widest axis."""
    items = list(cuboids)
    while len(items) < parts:
        items.sort(key=lambda c: -c.width)
        c = items.pop(0)
        if c.width <= _MIN_WIDTH:
            items.append(c)
            break
        axis = int(np.argmax(c.half_widths))
        h = c.half_widths.copy()
        h[axis] /= 2.0
        off = np.zeros(3)
        off[axis] = h[axis]
        items.extend([Cuboid(c.center - off, h), Cuboid(c.center + off, h)])
    groups: list[list[Cuboid]] = [[] for _ in range(parts)]
    for i, c in enumerate(sorted(items, key=lambda c: -c.volume)):
        groups[i % parts].append(c)
    return [g for g in groups if g]


def _finalise(
    inst: ProblemInstance, shared: _SharedBest, optimal: bool, trace, cfg: SolverConfig
) -> Solution:
    nu, pose = shared.snapshot()
    if pose is None:
        # No feasible improvement was ever found; report the domain centre.
        pose = Pose(np.zeros(3), inst.translation_domain.cuboids[0].center)
        nu = objective(pose, inst)
    elif cfg.refine:
        # Polish the returned pose without changing the certified count.
        corrs = extract_correspondences(pose, inst)
        if len(corrs) >= 3:
            result = refine_pnp(corrs, inst, pose)
            if (
                inst.translation_domain.contains(result.pose.t)
                and _zeta_feasible(result.pose.t, inst.points, inst.zeta)
                and objective(result.pose, inst) == nu
            ):
                pose = result.pose
    corrs = tuple(extract_correspondences(pose, inst))
    return Solution(
        nu_star=nu, pose=pose, correspondences=corrs, optimal=optimal, trace=tuple(trace)
    )


def gopac_solve(inst: ProblemInstance, cfg: SolverConfig | None = None) -> Solution:
    """Globally-optimal inlier maximisation over the instance's translation
    domain and all of rotation space.

    When the returned solution has ``optimal=True`` the inlier count is the
    exact maximum (up to floating-point angle evaluation) and the pose attains
    it. A ``time_budget`` may truncate the search, returning the best-so-far
    with ``optimal=False``.
    """
    cfg = cfg or SolverConfig()
    inst = _effective_instance(inst, cfg)
    if inst.num_bearings == 0:
        dom_center = inst.translation_domain.cuboids[0].center
        return Solution(0, Pose(np.zeros(3), dom_center), (), True, ())

    deadline = (
        time.perf_counter() + cfg.time_budget if cfg.time_budget is not None else None
    )
    seeds = list(inst.translation_domain.cuboids)
    shared = _SharedBest(0)
    cache = RotationCache(inst.bearings, depth=cfg.precompute_depth)
    return _run_search(inst, cfg, seeds, shared, cache, deadline)


def _run_search(inst, cfg, seeds, shared, cache, deadline) -> Solution:
    if cfg.threads == 1:
        collector = _TraceCollector(1, sum(c.volume for c in seeds))
        worker = _Worker(0, inst, seeds, cfg, cache, shared, collector, deadline)
        worker.run()
        return _finalise(inst, shared, worker.optimal, collector.samples, cfg)
    groups = _split_domain(seeds, cfg.threads)
    collector = _TraceCollector(len(groups), sum(c.volume for c in seeds))
    workers = [
        _Worker(i, inst, g, cfg, cache, shared, collector, deadline)
        for i, g in enumerate(groups)
    ]
    threads = [threading.Thread(target=w.run, daemon=True) for w in workers]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    optimal = all(w.optimal for w in workers)
    samples = sorted(collector.samples, key=lambda s: s.wall_time)
    return _finalise(inst, shared, optimal, samples, cfg)


def rbb(
    inst: ProblemInstance,
    t0: np.ndarray,
    ct: Cuboid | None,
    nu_best: int,
    cfg: SolverConfig | None = None,
) -> tuple[int, np.ndarray | None]:
    """Rotation search subroutine: exact over rotations at fixed ``t0`` when
    ``ct`` is absent, otherwise the converged relaxed bound for the cuboid."""
    cfg = cfg or SolverConfig()
    inst = _effective_instance(inst, cfg)
    cache = RotationCache(inst.bearings, depth=cfg.precompute_depth)
    search = _InnerSearch(inst, cache, cfg.bound_mode)
    nu, r, _, _ = search.run(None if ct is not None else np.asarray(t0, dtype=float),
                             ct, nu_best)
    return nu, r


def guess_verify_schedule(n_bearings: int) -> tuple[int, int]:
    """Initial optimistic seed and decrement step: N - 1 and ceil(0.1 N)."""
    return max(n_bearings - 1, 0), max(math.ceil(0.1 * n_bearings), 1)


def guess_and_verify(inst: ProblemInstance, cfg: SolverConfig | None = None) -> Solution:
    """Optimistically seed the incumbent and decrease it until the search
    certifies, accelerating pruning without loss of optimality.

    A round that terminates with the bound test but never finds a pose beating
    its seed proves the optimum does not exceed the seed; the seed is lowered
    and the search repeated.
    """
    cfg = cfg or SolverConfig()
    inst = _effective_instance(inst, cfg)
    if inst.num_bearings == 0:
        return gopac_solve(inst, cfg)
    n, step = guess_verify_schedule(inst.num_bearings)
    deadline = (
        time.perf_counter() + cfg.time_budget if cfg.time_budget is not None else None
    )
    cache = RotationCache(inst.bearings, depth=cfg.precompute_depth)
    while True:
        shared = _SharedBest(n)
        budget = None if deadline is None else max(deadline - time.perf_counter(), 0.0)
        round_cfg = SolverConfig(
            bound_mode=cfg.bound_mode,
            zeta=cfg.zeta,
            threads=cfg.threads,
            guess_verify=False,
            precompute_depth=cfg.precompute_depth,
            time_budget=budget,
            refine=cfg.refine,
        )
        sol = _run_search(inst, round_cfg, list(inst.translation_domain.cuboids),
                          shared, cache, deadline)
        attained = shared.pose is not None and shared.nu > n
        if not sol.optimal:
            return sol
        if attained:
            return sol
        if n == 0:
            # Certified: no pose exceeds zero inliers.
            return sol
        n = max(n - step, 0)
