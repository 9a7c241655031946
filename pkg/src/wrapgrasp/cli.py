"""Scenario-driven command line: parse a config, run the task, write
tables and figures.

Subcommands name the task they expect (``solve``, ``quality-map``,
``maximize``, ``feedback``); ``validate`` checks a scenario file without
running anything, and ``render`` regenerates the SVG figures from the
CSV tables of a previous run. Artifacts land in the scenario's output
directory (overridable with ``--out``) under fixed file names, and
repeated runs of the same scenario produce byte-identical files.

Exit status: 0 on success, 1 when a solver or renderer fails, 2 for
configuration problems (unreadable, schema-invalid, or out-of-domain
scenario values).
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .contact import ContactTrajectory
from .curves import BoundaryCurve
from .errors import InvalidParameterError, ScenarioError, WrapGraspError
from .feedback import (FeedbackGains, adaptive_gains, integrate_closed_loop,
                       quasi_static_reference)
from .pmp import OcpSpec, SolverConfig, solve
from .quality import (ArmConfig, inner_solver_defaults, maximize_quality,
                      quality_map)
from .render import render_quality_svg, render_scene_svg, render_tracking_svg
from .scenario import Scenario, load_scenario
from .tables import (atomic_write_text, read_quality_map_table,
                     read_trajectory_table, write_best_grasp_table,
                     write_cost_history_table, write_curve_table,
                     write_quality_map_table, write_trajectory_table)

_TASK_FOR_COMMAND = {
    "solve": "optimal_grasp",
    "quality-map": "quality_map",
    "maximize": "maximize_quality",
    "feedback": "feedback_run",
}


def arm_points_from_contact(curve: BoundaryCurve,
                            traj: ContactTrajectory) -> np.ndarray:
    """Arm centerline recovered pointwise from the contact state.

    Each node's (rho, s_o) pins the arm sample at the boundary point
    minus rho along the left normal — no integration involved, so this
    also works for trajectories read back from tables.
    """
    gamma = curve.position(traj.s_o)
    phi = curve.tangent_angle(traj.s_o)
    normal = np.column_stack([-np.sin(phi), np.cos(phi)])
    return gamma - traj.rho[:, None] * normal


def _with_contact_depth(traj: ContactTrajectory,
                        radius: Callable[[float], float]
                        ) -> ContactTrajectory:
    r = np.fromiter((float(radius(v)) for v in traj.s), float)
    return ContactTrajectory(s=traj.s, rho=traj.rho, alpha=traj.alpha,
                             s_o=traj.s_o, nu_o=traj.nu_o, kappa=traj.kappa,
                             delta=r - traj.rho, radius=r,
                             initial=traj.initial)


def _feedback_gains(sc: Scenario, curve: BoundaryCurve,
                    arm_length: float) -> FeedbackGains:
    mu2 = sc.task["mu2"]
    if mu2 == "adaptive":
        r_obj = float(sc.object_spec["radius"])
        return adaptive_gains(sc.arm_radius_profile(arm_length), r_obj,
                              mu1=sc.task["mu1"])
    return FeedbackGains(mu1=sc.task["mu1"], mu2=float(mu2))


def _quality_arm(sc: Scenario, curve: BoundaryCurve) -> ArmConfig:
    kwargs = dict(radius=sc.uniform_arm_radius(),
                  length=sc.arm_length(curve), chi=sc.task["chi"])
    if "contact_tol" in sc.task:
        kwargs["contact_tol"] = sc.task["contact_tol"]
    return ArmConfig(**kwargs)


def _say(quiet: bool, message: str) -> None:
    if not quiet:
        print(message)


# ---------------------------------------------------------------------------
# task runners
# ---------------------------------------------------------------------------

def _run_optimal_grasp(sc: Scenario, out: Path, threads: int,
                       quiet: bool) -> int:
    curve = sc.build_curve()
    length = sc.arm_length(curve)
    radius = sc.arm_radius_profile(length)
    target = sc.task["rho_target"]
    rho_target = radius if target == "arm-radius" else float(target)

    spec = OcpSpec(curve=curve, arm_length=length, rho_target=rho_target,
                   alpha_target=sc.task["alpha_target"], chi=sc.task["chi"],
                   initial=(sc.task["initial_rho"],
                            sc.task["initial_alpha"]),
                   arm_radius=radius)
    overrides = {k: sc.task[k] for k in ("eta", "steps", "max_iterations")
                 if k in sc.task}
    if "initial_kappa" in sc.task:
        k0 = float(sc.task["initial_kappa"])
        overrides["initial_kappa"] = lambda s: k0
    report = solve(spec, SolverConfig(**overrides))

    write_curve_table(out / "object.csv", curve)
    write_trajectory_table(out / "trajectory.csv", report.trajectory)
    write_cost_history_table(out / "cost_history.csv", report)
    arm = arm_points_from_contact(curve, report.trajectory)
    mask = report.trajectory.delta >= 0.0
    atomic_write_text(out / "solution.svg",
                      render_scene_svg(curve, arm=arm, contact_mask=mask,
                                       title="optimal wrap"))
    rt = radius if target == "arm-radius" else (lambda s: float(target))
    atomic_write_text(out / "tracking.svg",
                      render_tracking_svg(report.trajectory, rt,
                                          sc.task["alpha_target"],
                                          title="tracking"))
    _say(quiet, "final cost %.6g after %d iterations (%s)"
         % (report.cost, report.iterations, report.reason))
    return 0


def _run_quality_map(sc: Scenario, out: Path, threads: int,
                     quiet: bool) -> int:
    curve = sc.build_curve()
    disc = (sc.task["d_min"], sc.task["d_max"], sc.task["n_d"],
            sc.task["n_psi"])
    qmap = quality_map(curve, arm=_quality_arm(sc, curve), disc=disc,
                       solver=inner_solver_defaults(), threads=threads)
    write_curve_table(out / "object.csv", curve)
    write_quality_map_table(out / "quality_map.csv", qmap)
    summary = []
    for metric in (1, 2, 3):
        values = qmap.metric(metric)
        finite = values[np.isfinite(values)]
        best = float(finite.max()) if finite.size else math.nan
        summary.append("Q%d %.6g" % (metric, best))
        atomic_write_text(out / ("quality_q%d.svg" % metric),
                          render_quality_svg(curve, qmap, metric))
    _say(quiet, "best " + ", ".join(summary))
    return 0


def _run_maximize(sc: Scenario, out: Path, threads: int,
                  quiet: bool) -> int:
    curve = sc.build_curve()
    disc = (sc.task["d_min"], sc.task["d_max"], sc.task["n_d"],
            sc.task["n_psi"])
    best = maximize_quality(curve, sc.task["metric"],
                            arm=_quality_arm(sc, curve), disc=disc,
                            threads=threads, starts=sc.task["starts"],
                            max_evaluations=sc.task["max_evaluations"])
    write_curve_table(out / "object.csv", curve)
    write_best_grasp_table(out / "best_grasp.csv", best)
    write_quality_map_table(out / "quality_map.csv", best.coarse_map)
    write_trajectory_table(out / "trajectory.csv", best.trajectory)
    arm = arm_points_from_contact(curve, best.trajectory)
    atomic_write_text(out / ("quality_q%d.svg" % best.metric_index),
                      render_quality_svg(curve, best.coarse_map,
                                         best.metric_index, best_arm=arm))
    _say(quiet, "best Q%d %.6g at d=%.6g, psi=%.6g (%d evaluations)"
         % (best.metric_index, best.quality, best.distance, best.angle,
            best.evaluations))
    return 0


def _run_feedback(sc: Scenario, out: Path, threads: int,
                  quiet: bool) -> int:
    curve = sc.build_curve()
    length = sc.arm_length(curve)
    gains = _feedback_gains(sc, curve, length)
    traj = integrate_closed_loop(
        curve, gains,
        (sc.task["initial_rho"], sc.task["initial_alpha"],
         sc.task["initial_shadow"]),
        length, steps=sc.task["steps"])
    traj = _with_contact_depth(traj, sc.arm_radius_profile(length))
    reference = quasi_static_reference(curve, traj, gains)

    write_curve_table(out / "object.csv", curve)
    write_trajectory_table(out / "trajectory.csv", traj)
    rho_ref = _interp_profile(traj.s, reference)
    atomic_write_text(out / "tracking.svg",
                      render_tracking_svg(traj, rho_ref, math.pi / 2,
                                          title="closed-loop tracking"))
    arm = arm_points_from_contact(curve, traj)
    atomic_write_text(out / "solution.svg",
                      render_scene_svg(curve, arm=arm,
                                       contact_mask=traj.delta >= 0.0,
                                       title="closed-loop wrap"))
    err_rho = abs(float(traj.rho[-1] - reference[-1]))
    err_alpha = abs(float(traj.alpha[-1]) - math.pi / 2)
    _say(quiet, "terminal tracking error |rho - rho_d| %.3g, "
         "|alpha - pi/2| %.3g" % (err_rho, err_alpha))
    return 0


def _interp_profile(s: np.ndarray, values: np.ndarray
                    ) -> Callable[[float], float]:
    return lambda v: float(np.interp(v, s, values))


def _rerender(sc: Scenario, out: Path, quiet: bool) -> int:
    curve = sc.build_curve()
    kind = sc.task_kind
    if kind in ("optimal_grasp", "feedback_run"):
        traj = read_trajectory_table(out / "trajectory.csv")
        arm = arm_points_from_contact(curve, traj)
        mask = (traj.delta >= 0.0) if traj.delta is not None \
            else np.zeros(traj.s.size, dtype=bool)
        if kind == "optimal_grasp":
            length = sc.arm_length(curve)
            radius = sc.arm_radius_profile(length)
            target = sc.task["rho_target"]
            rt = radius if target == "arm-radius" \
                else (lambda s: float(target))
            alpha_d = sc.task["alpha_target"]
            scene_title, panel_title = "optimal wrap", "tracking"
        else:
            gains = _feedback_gains(sc, curve, sc.arm_length(curve))
            reference = quasi_static_reference(curve, traj, gains)
            rt = _interp_profile(traj.s, reference)
            alpha_d = math.pi / 2
            scene_title = "closed-loop wrap"
            panel_title = "closed-loop tracking"
        atomic_write_text(out / "solution.svg",
                          render_scene_svg(curve, arm=arm,
                                           contact_mask=mask,
                                           title=scene_title))
        atomic_write_text(out / "tracking.svg",
                          render_tracking_svg(traj, rt, alpha_d,
                                              title=panel_title))
    elif kind == "quality_map":
        qmap = read_quality_map_table(out / "quality_map.csv")
        for metric in (1, 2, 3):
            atomic_write_text(out / ("quality_q%d.svg" % metric),
                              render_quality_svg(curve, qmap, metric))
    else:  # maximize_quality
        qmap = read_quality_map_table(out / "quality_map.csv")
        traj = read_trajectory_table(out / "trajectory.csv")
        arm = arm_points_from_contact(curve, traj)
        atomic_write_text(out / ("quality_q%d.svg" % sc.task["metric"]),
                          render_quality_svg(curve, qmap, sc.task["metric"],
                                             best_arm=arm))
    _say(quiet, "figures regenerated in %s" % out)
    return 0


_RUNNERS = {
    "optimal_grasp": _run_optimal_grasp,
    "quality_map": _run_quality_map,
    "maximize_quality": _run_maximize,
    "feedback_run": _run_feedback,
}


def run_scenario(path, out_dir=None, threads: int = 1,
                 quiet: bool = False) -> int:
    """Run one scenario file end to end; returns the exit status."""
    sc = load_scenario(path)
    out = Path(out_dir) if out_dir is not None else Path(sc.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return _RUNNERS[sc.task_kind](sc, out, threads, quiet)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wrapgrasp",
        description="Wrapping-grasp studies driven by scenario files.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
            ("solve", "run an optimal-grasp scenario"),
            ("quality-map", "run a placement quality-map scenario"),
            ("maximize", "run a quality-maximization scenario"),
            ("feedback", "run a closed-loop feedback scenario"),
            ("render", "regenerate figures from a finished run's tables"),
            ("validate", "check a scenario file against the schema")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True,
                       help="scenario TOML file")
        p.add_argument("--out", default=None,
                       help="output directory (overrides the scenario)")
        p.add_argument("--threads", type=int, default=1,
                       help="worker threads for placement grids")
        p.add_argument("--seed", type=int, default=None,
                       help="override the scenario's random seed")
        p.add_argument("--quiet", action="store_true",
                       help="suppress the summary line")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        sc = load_scenario(args.config)
        if args.command == "validate":
            _say(args.quiet, "%s: valid %s scenario"
                 % (args.config, sc.task_kind))
            return 0
        expected = _TASK_FOR_COMMAND.get(args.command)
        if expected is not None and sc.task_kind != expected:
            print("error: scenario task is '%s'; use the matching "
                  "subcommand" % sc.task_kind, file=sys.stderr)
            return 2
        out = Path(args.out) if args.out is not None else Path(sc.out_dir)
        if args.command == "render":
            return _rerender(sc, out, args.quiet)
        out.mkdir(parents=True, exist_ok=True)
        return _RUNNERS[sc.task_kind](sc, out, args.threads, args.quiet)
    except (ScenarioError, InvalidParameterError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2
    except WrapGraspError as exc:
        print("error: %s: %s" % (type(exc).__name__, exc), file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
