import math
from pathlib import Path

import numpy as np
import pytest

from wrapgrasp.cli import arm_points_from_contact, main, run_scenario
from wrapgrasp.contact import ContactTrajectory, integrate_contact
from wrapgrasp.curves import build_circle
from wrapgrasp.render import (render_quality_svg, render_scene_svg,
                              render_tracking_svg)
from wrapgrasp.tables import (atomic_write_text, format_float,
                              read_quality_map_table, read_trajectory_table,
                              write_curve_table, write_quality_map_table,
                              write_trajectory_table)

SCENARIOS = Path(__file__).parent.parent / "src" / "wrapgrasp" / "scenarios"


def _write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def _tiny_feedback(tmp_path, out=None):
    extra = '[output]\ndirectory = "%s"\n' % out if out else ""
    return _write(tmp_path, "fb.toml", (
        'spec_version = 1\n'
        '[object]\nkind = "circle"\nradius = 2.5\n'
        '[arm]\nlength = 10.0\nradius_base = 1.0\n'
        '[task]\nkind = "feedback_run"\nmu2 = "adaptive"\n'
        'initial_rho = 2.0\ninitial_alpha = 1.0\nsteps = 500\n')
        + extra)


def _tiny_solve(tmp_path):
    return _write(tmp_path, "solve.toml", (
        'spec_version = 1\n'
        '[object]\nkind = "circle"\nradius = 5.0\n'
        '[arm]\nlength = 12.0\nradius_base = 1.0\n'
        '[task]\nkind = "optimal_grasp"\nchi = 10.0\neta = 1e-2\n'
        'steps = 300\nmax_iterations = 3000\n'
        'initial_rho = 3.0\ninitial_alpha = 1.5707963267948966\n'))


# ---------------------------------------------------------------------------
# tables
# ---------------------------------------------------------------------------

def test_format_float_round_trips():
    for x in (1.0 / 3.0, math.pi, 1e-300, -0.0, 12345.6789e17):
        assert float(format_float(x)) == x


def test_atomic_write_creates_parents_and_replaces(tmp_path):
    target = tmp_path / "deep" / "dir" / "file.txt"
    atomic_write_text(target, "first")
    atomic_write_text(target, "second")
    assert target.read_text() == "second"
    # no stray temp files left behind
    assert [p.name for p in target.parent.iterdir()] == ["file.txt"]


def test_trajectory_table_round_trip(tmp_path, circle5):
    traj = integrate_contact(circle5, lambda s: 0.2 / 1.25,
                             (1.25, math.pi / 2, 0.0), 8.0,
                             steps=400, radius_profile=lambda s: 1.0)
    path = tmp_path / "traj.csv"
    write_trajectory_table(path, traj)
    back = read_trajectory_table(path)
    for name in ("s", "rho", "alpha", "s_o", "nu_o", "delta"):
        assert np.array_equal(getattr(back, name), getattr(traj, name)), name
    assert back.initial == traj.initial
    header = path.read_text().splitlines()[0]
    assert header == "s,rho,alpha,s_o,nu_o,delta,in_contact"


def test_trajectory_table_without_depth(tmp_path, circle5):
    traj = integrate_contact(circle5, lambda s: 0.2 / 1.25,
                             (1.25, math.pi / 2, 0.0), 5.0, steps=100)
    path = tmp_path / "traj.csv"
    write_trajectory_table(path, traj)
    lines = path.read_text().splitlines()
    assert lines[1].endswith("nan,0")
    assert read_trajectory_table(path).delta is None


def test_curve_table_columns(tmp_path, circle5):
    path = tmp_path / "object.csv"
    write_curve_table(path, circle5)
    lines = path.read_text().splitlines()
    assert lines[0] == "s_o,x,y,phi,kappa_o"
    first = [float(v) for v in lines[1].split(",")]
    assert first[0] == 0.0
    assert first[1] == pytest.approx(5.0, rel=1e-12)
    assert first[4] == pytest.approx(0.2, rel=1e-9)


def _toy_quality_map(curve):
    from wrapgrasp.quality import quality_map, inner_solver_defaults
    from dataclasses import replace
    starved = replace(inner_solver_defaults(), max_iterations=40)
    return quality_map(curve, disc=(3.0, 9.0, 2, 3), solver=starved)


def test_quality_map_table_round_trip(tmp_path, circle5):
    qmap = _toy_quality_map(circle5)
    path = tmp_path / "map.csv"
    write_quality_map_table(path, qmap)
    back = read_quality_map_table(path)
    assert np.array_equal(back.distances, qmap.distances)
    assert np.array_equal(back.angles, qmap.angles)
    assert np.array_equal(back.base_points, qmap.base_points)
    assert back.status == qmap.status
    # NaN metrics survive the round trip as NaN, not zeros
    assert np.array_equal(np.isnan(back.q1), np.isnan(qmap.q1))
    finite = np.isfinite(qmap.q1)
    assert np.array_equal(back.q1[finite], qmap.q1[finite])


# ---------------------------------------------------------------------------
# renderings
# ---------------------------------------------------------------------------

def test_scene_svg_is_deterministic(circle5):
    traj = integrate_contact(circle5, lambda s: 0.2 / 1.2,
                             (1.0, math.pi / 2, 0.0), 10.0, steps=200,
                             radius_profile=lambda s: 1.0)
    arm = arm_points_from_contact(circle5, traj)
    a = render_scene_svg(circle5, arm=arm, contact_mask=traj.delta >= 0,
                         title="wrap")
    b = render_scene_svg(circle5, arm=arm, contact_mask=traj.delta >= 0,
                         title="wrap")
    assert a == b
    assert a.startswith('<?xml version="1.0"')
    assert "matrix(" in a and a.count("matrix(") == 1


def test_scene_svg_contact_highlight_follows_the_mask(circle5):
    traj = integrate_contact(circle5, lambda s: 0.2 / 1.2,
                             (1.0, math.pi / 2, 0.0), 10.0, steps=200,
                             radius_profile=lambda s: 1.0)
    arm = arm_points_from_contact(circle5, traj)
    riding = render_scene_svg(circle5, arm=arm,
                              contact_mask=traj.delta >= 0)
    apart = render_scene_svg(circle5, arm=arm,
                             contact_mask=np.zeros(traj.s.size, bool))
    assert riding.count("#d95f02") == 1
    assert "#d95f02" not in apart


def test_arm_points_match_contact_distance(circle5):
    traj = integrate_contact(circle5, lambda s: 0.2 / 1.25,
                             (1.25, math.pi / 2, 0.0), 8.0, steps=160)
    arm = arm_points_from_contact(circle5, traj)
    gamma = circle5.position(traj.s_o)
    dist = np.hypot(*(gamma - arm).T)
    assert np.abs(dist - traj.rho).max() < 1e-10


def test_tracking_svg_panels(circle5):
    traj = integrate_contact(circle5, lambda s: 0.2 / 1.2,
                             (1.0, math.pi / 2, 0.0), 10.0, steps=100)
    svg = render_tracking_svg(traj, lambda s: 1.0, math.pi / 2, title="t")
    assert svg == render_tracking_svg(traj, lambda s: 1.0, math.pi / 2,
                                      title="t")
    # two data panels, two dashed reference lines
    assert svg.count('stroke-dasharray="6 4"') == 2


def test_quality_svg_marks_failures_hollow(circle5):
    qmap = _toy_quality_map(circle5)   # starved solver: all cells failed
    svg = render_quality_svg(circle5, qmap, 1)
    assert svg.count('fill="none" stroke="#b0b0b0"') == 6
    assert "colorbar" not in svg  # no stray labels, just shapes and text


# ---------------------------------------------------------------------------
# command line
# ---------------------------------------------------------------------------

def test_validate_ok_and_mismatched_subcommand(tmp_path, capsys):
    cfg = _tiny_feedback(tmp_path)
    assert main(["validate", "--config", cfg]) == 0
    assert "feedback_run" in capsys.readouterr().out
    assert main(["solve", "--config", cfg]) == 2
    assert "matching subcommand" in capsys.readouterr().err


def test_validate_is_quiet_when_asked(tmp_path, capsys):
    cfg = _tiny_feedback(tmp_path)
    assert main(["validate", "--config", cfg, "--quiet"]) == 0
    assert capsys.readouterr().out == ""


def test_schema_error_exits_two(tmp_path, capsys):
    cfg = _write(tmp_path, "bad.toml", (
        'spec_version = 1\n'
        '[object]\nkind = "circle"\nradius = 5.0\n'
        '[arm]\nlength = 12.0\nradius_base = 1.0\n'
        '[task]\nkind = "optimal_grasp"\n'
        'initial_rho = 3.0\ninitial_alpha = 1.5\n'))
    assert main(["validate", "--config", cfg]) == 2
    assert "'task.chi'" in capsys.readouterr().err


def test_missing_config_exits_two(tmp_path, capsys):
    assert main(["validate", "--config", str(tmp_path / "nope.toml")]) == 2
    assert "cannot read" in capsys.readouterr().err


def test_feedback_run_writes_artifacts_deterministically(tmp_path, capsys):
    cfg = _tiny_feedback(tmp_path)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["feedback", "--config", cfg, "--out", str(out1)]) == 0
    assert "terminal tracking error" in capsys.readouterr().out
    assert main(["feedback", "--config", cfg, "--out", str(out2),
                 "--quiet"]) == 0
    for name in ("object.csv", "trajectory.csv", "solution.svg",
                 "tracking.svg"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_render_regenerates_identical_figures(tmp_path):
    cfg = _tiny_feedback(tmp_path)
    out = tmp_path / "run"
    assert main(["feedback", "--config", cfg, "--out", str(out),
                 "--quiet"]) == 0
    before = (out / "tracking.svg").read_bytes()
    (out / "tracking.svg").unlink()
    assert main(["render", "--config", cfg, "--out", str(out),
                 "--quiet"]) == 0
    assert (out / "tracking.svg").read_bytes() == before


def test_render_without_artifacts_exits_one(tmp_path, capsys):
    cfg = _tiny_feedback(tmp_path)
    assert main(["render", "--config", cfg,
                 "--out", str(tmp_path / "empty")]) == 1
    assert "error:" in capsys.readouterr().err


def test_solver_failure_exits_one(tmp_path, capsys):
    # without the angle-restoring term this start crashes into the
    # boundary, and the CLI must surface the integrator's diagnostic
    cfg = _write(tmp_path, "crash.toml", (
        'spec_version = 1\n'
        '[object]\nkind = "circle"\nradius = 2.5\n'
        '[arm]\nlength = 40.0\nradius_base = 1.0\n'
        '[task]\nkind = "feedback_run"\nmu1 = 0.0\nmu2 = 0.714\n'
        'initial_rho = 2.0\ninitial_alpha = 1.0\n'))
    assert main(["feedback", "--config", cfg,
                 "--out", str(tmp_path / "x")]) == 1
    assert "AdmissibilityError" in capsys.readouterr().err


def test_solve_task_end_to_end(tmp_path, capsys):
    cfg = _tiny_solve(tmp_path)
    out = tmp_path / "sv"
    assert main(["solve", "--config", cfg, "--out", str(out)]) == 0
    assert "final cost" in capsys.readouterr().out
    traj = read_trajectory_table(out / "trajectory.csv")
    assert traj.s[-1] == pytest.approx(12.0)
    history = (out / "cost_history.csv").read_text().splitlines()
    assert history[0] == "iteration,cost,tracking,barrier,gradient_norm"
    assert len(history) > 10
    assert (out / "solution.svg").read_text().count("matrix(") == 1


def test_run_scenario_uses_scenario_output_dir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    cfg = _tiny_feedback(tmp_path, out="artifacts/fb")
    assert run_scenario(cfg, quiet=True) == 0
    assert (tmp_path / "artifacts" / "fb" / "trajectory.csv").exists()


def test_quality_map_task_end_to_end(tmp_path, capsys):
    cfg = _write(tmp_path, "map.toml", (
        'spec_version = 1\n'
        '[object]\nkind = "circle"\nradius = 5.0\n'
        '[arm]\nlength_fraction = 0.5\nradius_base = 1.0\n'
        '[task]\nkind = "quality_map"\nd_min = 3.0\nd_max = 6.0\n'
        'n_d = 2\nn_psi = 3\n'))
    out = tmp_path / "qm"
    assert main(["quality-map", "--config", cfg, "--out", str(out)]) == 0
    assert "best Q1" in capsys.readouterr().out
    qmap = read_quality_map_table(out / "quality_map.csv")
    assert qmap.q1.shape == (2, 3)
    assert np.isfinite(qmap.q1).all()
    for metric in (1, 2, 3):
        assert (out / ("quality_q%d.svg" % metric)).exists()
