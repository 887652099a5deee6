"""Command-line interface: instance I/O, solving, synthetic generation,
benchmark sweeps, and the brute-force oracle.

Exit codes: 0 success, 1 malformed input, 2 certification not reached within
the time budget, 3 oracle cell cap exceeded.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from dataclasses import asdict, dataclass

import numpy as np

from .bounds import BoundMode, ProblemInstance
from .domain import Cuboid, TranslationDomain
from .estimators import Correspondence, ransac_baseline
from .geometry import Pose
from .oracle import DEFAULT_CELL_CAP, CellCapExceeded, grid_search
from .solver import SolverConfig, Solution, gopac_solve, guess_and_verify
from .synth import GroundTruth, SynthConfig, TorusPrior, default_intrinsics, generate, pose_success


class MalformedInput(ValueError):
    pass


def _require(obj: dict, key: str, path: str):
    if key not in obj:
        raise MalformedInput(f"{path}: missing required field '{key}'")
    return obj[key]


def load_instance(path: str, theta_deg_override: float | None = None,
                  zeta_override: float | None = None) -> ProblemInstance:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise MalformedInput(f"{path}: invalid JSON ({e})") from e
    bearings = np.asarray(_require(doc, "bearings", path), dtype=float)
    points = np.asarray(_require(doc, "points", path), dtype=float)
    if bearings.ndim != 2 or bearings.shape[1] != 3:
        raise MalformedInput(f"{path}: field 'bearings' must be an Nx3 array")
    if points.ndim != 2 or points.shape[1] != 3:
        raise MalformedInput(f"{path}: field 'points' must be an Mx3 array")
    norms = np.linalg.norm(bearings, axis=1)
    if np.any(norms == 0):
        raise MalformedInput(f"{path}: field 'bearings' contains a zero vector")
    if np.any(np.abs(norms - 1.0) > 1e-6):
        print(f"warning: {path}: bearings renormalised (worst deviation "
              f"{np.abs(norms - 1.0).max():.2e})", file=sys.stderr)
    theta_deg = doc.get("theta_deg", 1.0) if theta_deg_override is None else theta_deg_override
    dom_doc = _require(doc, "translation_domain", path)
    cub_docs = _require(dom_doc, "cuboids", path + ".translation_domain")
    if not cub_docs:
        raise MalformedInput(f"{path}: field 'translation_domain.cuboids' is empty")
    cuboids = []
    for i, cd in enumerate(cub_docs):
        where = f"{path}.translation_domain.cuboids[{i}]"
        center = np.asarray(_require(cd, "center", where), dtype=float)
        hw = np.asarray(_require(cd, "half_widths", where), dtype=float)
        if center.shape != (3,) or hw.shape != (3,):
            raise MalformedInput(f"{where}: 'center' and 'half_widths' must be 3-vectors")
        cuboids.append(Cuboid(center, hw))
    zeta = dom_doc.get("zeta", 1e-3) if zeta_override is None else zeta_override
    try:
        domain = TranslationDomain(tuple(cuboids), float(zeta))
        return ProblemInstance(bearings, points, math.radians(float(theta_deg)), domain)
    except ValueError as e:
        raise MalformedInput(f"{path}: {e}") from e


def save_instance(path: str, inst: ProblemInstance):
    doc = {
        "bearings": inst.bearings.tolist(),
        "points": inst.points.tolist(),
        "theta_deg": math.degrees(inst.theta),
        "translation_domain": {
            "cuboids": [
                {"center": c.center.tolist(), "half_widths": c.half_widths.tolist()}
                for c in inst.translation_domain.cuboids
            ],
            "zeta": inst.translation_domain.zeta,
        },
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def save_ground_truth(path: str, gt: GroundTruth):
    doc = {
        "pose": {"r": gt.pose.r.tolist(), "t": gt.pose.t.tolist()},
        "inlier_matching": [[c.bearing_index, c.point_index] for c in gt.inlier_matching],
        "bearing_is_outlier": gt.bearing_is_outlier.astype(int).tolist(),
        "point_occluded": gt.point_occluded.astype(int).tolist(),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_ground_truth(path: str) -> GroundTruth:
    with open(path) as fh:
        doc = json.load(fh)
    pose = Pose(np.asarray(doc["pose"]["r"]), np.asarray(doc["pose"]["t"]))
    matching = tuple(Correspondence(int(b), int(p)) for b, p in doc["inlier_matching"])
    return GroundTruth(
        pose,
        matching,
        np.asarray(doc["bearing_is_outlier"], dtype=bool),
        np.asarray(doc["point_occluded"], dtype=bool),
    )


@dataclass
class RunReport:
    """Round-trippable record of one solver run."""

    instance: str
    solver: str
    nu_star: int
    pose_r: list
    pose_t: list
    optimal: bool
    wall_time_s: float
    success_inliers: bool | None
    success_pose: bool | None
    correspondences: list

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1)

    @staticmethod
    def from_json(text: str) -> "RunReport":
        return RunReport(**json.loads(text))


def write_trace(path: str, solution: Solution):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t_s", "lower", "upper", "volume_frac", "queue_size"])
        for s in solution.trace:
            w.writerow([f"{s.wall_time:.6f}", s.lower, s.upper,
                        f"{s.remaining_volume:.6g}", s.queue_size])


def _report_from_solution(
    inst_path: str, solver_name: str, sol: Solution, wall: float,
    inst: ProblemInstance, gt: GroundTruth | None,
) -> RunReport:
    succ_inl = succ_pose = None
    if gt is not None and sol.pose is not None:
        from .bounds import objective

        nu_gt = objective(gt.pose, inst)
        succ_inl = bool(sol.nu_star >= nu_gt and (sol.optimal or sol.nu_star >= nu_gt))
        rot_ok, trans_ok = pose_success(sol.pose, gt.pose)
        succ_pose = bool(rot_ok and trans_ok)
    return RunReport(
        instance=inst_path,
        solver=solver_name,
        nu_star=sol.nu_star,
        pose_r=sol.pose.r.tolist() if sol.pose else [],
        pose_t=sol.pose.t.tolist() if sol.pose else [],
        optimal=sol.optimal,
        wall_time_s=wall,
        success_inliers=succ_inl,
        success_pose=succ_pose,
        correspondences=[[c.bearing_index, c.point_index] for c in sol.correspondences],
    )


def cmd_solve(args) -> int:
    inst = load_instance(args.instance, args.theta_deg, args.zeta)
    cfg = SolverConfig(
        bound_mode=BoundMode.from_name(args.bound),
        threads=args.threads,
        guess_verify=args.guess_verify,
        time_budget=args.time_budget,
        refine=not args.no_refine,
    )
    t0 = time.perf_counter()
    if args.solver == "ransac":
        sol = ransac_baseline(inst, args.iterations, seed=args.seed)
    elif cfg.guess_verify:
        sol = guess_and_verify(inst, cfg)
    else:
        sol = gopac_solve(inst, cfg)
    wall = time.perf_counter() - t0
    gt = load_ground_truth(args.ground_truth) if args.ground_truth else None
    report = _report_from_solution(args.instance, args.solver, sol, wall, inst, gt)
    text = report.to_json()
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    if args.trace:
        write_trace(args.trace, sol)
    if args.solver == "gopac" and not sol.optimal:
        return 2
    return 0


def _synth_config_from_doc(doc: dict, path: str) -> SynthConfig:
    prior_doc = doc.get("prior", {"type": "torus"})
    ptype = prior_doc.get("type", "torus")
    kwargs = {}
    if ptype == "torus":
        prior = TorusPrior(
            major_radius=prior_doc.get("major_radius", 3.0),
            minor_radius=prior_doc.get("minor_radius", 0.5),
        )
        kwargs["torus_cube_count"] = prior_doc.get("cube_count", 32)
        kwargs["torus_cube_half_width"] = prior_doc.get("cube_half_width")
    elif ptype == "explicit":
        cuboids = tuple(
            Cuboid(np.asarray(c["center"], dtype=float), np.asarray(c["half_widths"], dtype=float))
            for c in _require(prior_doc, "cuboids", path + ".prior")
        )
        prior = TranslationDomain(cuboids, doc.get("zeta", 1e-3))
    else:
        raise MalformedInput(f"{path}: prior.type must be 'torus' or 'explicit'")
    w, h = doc.get("image_size", [640, 480])
    return SynthConfig(
        num_points=doc.get("num_points", 20),
        omega_3d=doc.get("omega_3d", 0.0),
        omega_2d=doc.get("omega_2d", 0.0),
        sigma_px=doc.get("sigma_px", 2.0),
        intrinsics=default_intrinsics(w, doc.get("hfov_deg", 60.0), h),
        image_size=(w, h),
        prior=prior,
        seed=doc.get("seed", 0),
        theta=math.radians(doc.get("theta_deg", 1.0)),
        zeta=doc.get("zeta", 1e-3),
        **kwargs,
    )


def cmd_synth(args) -> int:
    with open(args.config) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise MalformedInput(f"{args.config}: invalid JSON ({e})") from e
    cfg = _synth_config_from_doc(doc, args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    inst, gt = generate(cfg)
    save_instance(args.out_instance, inst)
    save_ground_truth(args.out_truth, gt)
    print(f"wrote {args.out_instance} ({inst.num_bearings} bearings, "
          f"{inst.num_points} points) and {args.out_truth}")
    return 0


def cmd_bench(args) -> int:
    with open(args.sweep) as fh:
        try:
            sweep = json.load(fh)
        except json.JSONDecodeError as e:
            raise MalformedInput(f"{args.sweep}: invalid JSON ({e})") from e
    param = _require(sweep, "param", args.sweep)
    values = _require(sweep, "values", args.sweep)
    trials = int(sweep.get("trials", 10))
    base = sweep.get("base", {})
    solver_doc = sweep.get("solver", {})
    cfg_solver = SolverConfig(
        bound_mode=BoundMode.from_name(solver_doc.get("bound", "gamma")),
        threads=int(solver_doc.get("threads", 1)),
        guess_verify=bool(solver_doc.get("guess_verify", False)),
        time_budget=solver_doc.get("time_budget"),
    )
    seed0 = int(sweep.get("seed0", 0))
    out = open(args.out, "w", newline="")
    writer = csv.writer(out)
    writer.writerow(["param", "value", "trials", "succ_inliers", "succ_pose",
                     "median_runtime_s"])
    out.flush()
    try:
        for value in values:
            doc = dict(base)
            doc[param] = value
            succ_i, succ_p, runtimes = [], [], []
            for trial in range(trials):
                doc["seed"] = seed0 + trial
                cfg = _synth_config_from_doc(doc, args.sweep)
                inst, gt = generate(cfg)
                t0 = time.perf_counter()
                if cfg_solver.guess_verify:
                    sol = guess_and_verify(inst, cfg_solver)
                else:
                    sol = gopac_solve(inst, cfg_solver)
                runtimes.append(time.perf_counter() - t0)
                from .bounds import objective

                nu_gt = objective(gt.pose, inst)
                succ_i.append(sol.optimal and sol.nu_star >= nu_gt)
                rot_ok, trans_ok = pose_success(sol.pose, gt.pose)
                succ_p.append(rot_ok and trans_ok)
            writer.writerow([
                param, value, trials,
                f"{np.mean(succ_i):.3f}", f"{np.mean(succ_p):.3f}",
                f"{np.median(runtimes):.4f}",
            ])
            out.flush()
    finally:
        out.close()
    return 0


def cmd_oracle(args) -> int:
    inst = load_instance(args.instance, args.theta_deg, args.zeta)
    try:
        nu, pose = grid_search(inst, args.rot_step, args.trans_step, args.cell_cap)
    except CellCapExceeded as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    doc = {"nu": nu, "pose": {"r": pose.r.tolist(), "t": pose.t.tolist()},
           "rot_step": args.rot_step, "trans_step": args.trans_step}
    print(json.dumps(doc, indent=1))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="posemax",
                                description="Globally-optimal camera pose and "
                                            "correspondence estimation")
    sub = p.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("solve", help="solve an instance file")
    ps.add_argument("instance")
    ps.add_argument("--solver", choices=["gopac", "ransac"], default="gopac")
    ps.add_argument("--theta-deg", type=float, default=None,
                    help="inlier threshold in degrees (default: instance value, else 1.0)")
    ps.add_argument("--bound", choices=["weak", "tight", "gamma"], default="gamma")
    ps.add_argument("--threads", type=int, default=1)
    ps.add_argument("--guess-verify", action="store_true")
    ps.add_argument("--time-budget", type=float, default=None)
    ps.add_argument("--seed", type=int, default=0)
    ps.add_argument("--trace", default=None, help="write bound-evolution CSV here")
    ps.add_argument("--zeta", type=float, default=None,
                    help="minimum camera-to-point range (default: instance value, else 1e-3)")
    ps.add_argument("--iterations", type=int, default=10000,
                    help="RANSAC iterations (ransac solver only)")
    ps.add_argument("--ground-truth", default=None)
    ps.add_argument("--no-refine", action="store_true")
    ps.add_argument("--output", default=None)
    ps.set_defaults(func=cmd_solve)

    pg = sub.add_parser("synth", help="generate a synthetic instance")
    pg.add_argument("config")
    pg.add_argument("--seed", type=int, default=None)
    pg.add_argument("--out-instance", default="instance.json")
    pg.add_argument("--out-truth", default="truth.json")
    pg.set_defaults(func=cmd_synth)

    pb = sub.add_parser("bench", help="run a Monte Carlo parameter sweep")
    pb.add_argument("sweep")
    pb.add_argument("--out", default="bench.csv")
    pb.set_defaults(func=cmd_bench)

    po = sub.add_parser("oracle", help="brute-force grid search")
    po.add_argument("instance")
    po.add_argument("--rot-step", type=float, default=0.1)
    po.add_argument("--trans-step", type=float, default=0.1)
    po.add_argument("--cell-cap", type=int, default=DEFAULT_CELL_CAP)
    po.add_argument("--theta-deg", type=float, default=None)
    po.add_argument("--zeta", type=float, default=None)
    po.set_defaults(func=cmd_oracle)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except MalformedInput as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
