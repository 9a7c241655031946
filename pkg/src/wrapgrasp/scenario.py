"""Scenario files: the schema behind the command-line front end.

A scenario is a single TOML document describing one study: the object
to wrap, the arm, one task (an optimal-grasp solve, a placement quality
map, a quality maximization, or a closed-loop feedback run), and where
to put the artifacts. Files carry ``spec_version = 1`` so archived
scenarios stay replayable; validation is strict and names the offending
key, since a silently ignored typo would quietly change a study.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Mapping, Optional

try:
    import tomllib
except ModuleNotFoundError:                     # Python 3.10
    import tomli as tomllib

from .curves import (BoundaryCurve, build_circle, build_deformed_circle,
                     build_ellipse)
from .errors import ScenarioError

SPEC_VERSION = 1
TASK_KINDS = ("optimal_grasp", "quality_map", "maximize_quality",
              "feedback_run")

_OBJECT_KEYS = {
    "circle": {"kind", "radius", "center", "samples"},
    "ellipse": {"kind", "semi_major", "semi_minor", "center", "samples"},
    "deformed_circle": {"kind", "radius", "amplitude", "lobes", "center",
                        "samples"},
}

_TASK_KEYS = {
    "optimal_grasp": {"kind", "chi", "eta", "steps", "max_iterations",
                      "initial_rho", "initial_alpha", "initial_kappa",
                      "rho_target", "alpha_target"},
    "quality_map": {"kind", "chi", "d_min", "d_max", "n_d", "n_psi",
                    "contact_tol"},
    "maximize_quality": {"kind", "chi", "metric", "d_min", "d_max", "n_d",
                         "n_psi", "starts", "max_evaluations",
                         "contact_tol"},
    "feedback_run": {"kind", "mu1", "mu2", "initial_rho", "initial_alpha",
                     "initial_shadow", "steps"},
}


def _is_number(v: Any) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _is_int(v: Any) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _get_number(table: Mapping, where: str, key: str,
                default: Optional[float] = None,
                required: bool = False) -> Optional[float]:
    if key not in table:
        if required:
            raise ScenarioError("missing required key '%s.%s'"
                                % (where, key))
        return default
    v = table[key]
    if not _is_number(v):
        raise ScenarioError("key '%s.%s' must be a number" % (where, key))
    return float(v)


def _get_int(table: Mapping, where: str, key: str,
             default: Optional[int] = None,
             required: bool = False) -> Optional[int]:
    if key not in table:
        if required:
            raise ScenarioError("missing required key '%s.%s'"
                                % (where, key))
        return default
    v = table[key]
    if not _is_int(v):
        raise ScenarioError("key '%s.%s' must be an integer" % (where, key))
    return int(v)


def _reject_unknown(table: Mapping, where: str, allowed) -> None:
    for key in table:
        if key not in allowed:
            raise ScenarioError("unknown key '%s.%s'" % (where, key))


def _require_positive(value: float, where: str, key: str) -> float:
    if not value > 0.0:
        raise ScenarioError("key '%s.%s' must be positive" % (where, key))
    return value


@dataclass(frozen=True)
class Scenario:
    """One validated study description.

    ``task`` holds the task table with defaults applied where the task
    has natural ones; required parameters have already been checked, so
    downstream code can index without guarding.
    """

    source: Optional[Path]
    object_spec: Mapping[str, Any]
    arm_spec: Mapping[str, Any]
    task_kind: str
    task: Mapping[str, Any]
    out_dir: str
    seed: int

    def build_curve(self) -> BoundaryCurve:
        spec = dict(self.object_spec)
        kind = spec["kind"]
        extra = {}
        if "center" in spec:
            extra["center"] = tuple(spec["center"])
        if "samples" in spec:
            extra["samples"] = spec["samples"]
        if kind == "circle":
            return build_circle(spec["radius"], **extra)
        if kind == "ellipse":
            return build_ellipse(spec["semi_major"], spec["semi_minor"],
                                 **extra)
        return build_deformed_circle(spec["radius"], spec["amplitude"],
                                     spec["lobes"], **extra)

    def arm_length(self, curve: BoundaryCurve) -> float:
        if "length" in self.arm_spec:
            return float(self.arm_spec["length"])
        return float(self.arm_spec["length_fraction"]) * curve.length

    def arm_radius_profile(self, arm_length: float
                           ) -> Callable[[float], float]:
        base = float(self.arm_spec["radius_base"])
        tip = float(self.arm_spec.get("radius_tip", base))
        if tip == base:
            return lambda s: base
        slope = (tip - base) / arm_length
        return lambda s: base + slope * s

    def uniform_arm_radius(self) -> float:
        base = float(self.arm_spec["radius_base"])
        tip = float(self.arm_spec.get("radius_tip", base))
        if tip != base:
            raise ScenarioError("task '%s' uses a uniform arm: set "
                                "'arm.radius_tip' equal to "
                                "'arm.radius_base' or drop it"
                                % self.task_kind)
        return base


def _validate_object(obj: Mapping) -> Mapping:
    kind = obj.get("kind")
    if kind not in _OBJECT_KEYS:
        raise ScenarioError("key 'object.kind' must be one of %s"
                            % ", ".join(sorted(_OBJECT_KEYS)))
    _reject_unknown(obj, "object", _OBJECT_KEYS[kind])
    if kind == "circle":
        _require_positive(_get_number(obj, "object", "radius",
                                      required=True), "object", "radius")
    elif kind == "ellipse":
        a = _get_number(obj, "object", "semi_major", required=True)
        b = _get_number(obj, "object", "semi_minor", required=True)
        _require_positive(a, "object", "semi_major")
        _require_positive(b, "object", "semi_minor")
    else:
        _require_positive(_get_number(obj, "object", "radius",
                                      required=True), "object", "radius")
        amp = _get_number(obj, "object", "amplitude", required=True)
        if not abs(amp) < 1.0:
            raise ScenarioError("key 'object.amplitude' must have "
                                "magnitude below 1")
        lobes = _get_int(obj, "object", "lobes", required=True)
        if lobes < 1:
            raise ScenarioError("key 'object.lobes' must be at least 1")
    if "center" in obj:
        c = obj["center"]
        if (not isinstance(c, list) or len(c) != 2
                or not all(_is_number(v) for v in c)):
            raise ScenarioError("key 'object.center' must be a pair of "
                                "numbers")
    if "samples" in obj:
        n = _get_int(obj, "object", "samples")
        if n < 16:
            raise ScenarioError("key 'object.samples' must be at least 16")
    return obj


def _validate_arm(arm: Mapping) -> Mapping:
    _reject_unknown(arm, "arm", {"length", "length_fraction", "radius_base",
                                 "radius_tip"})
    has_abs = "length" in arm
    has_frac = "length_fraction" in arm
    if has_abs == has_frac:
        raise ScenarioError("exactly one of 'arm.length' and "
                            "'arm.length_fraction' is required")
    if has_abs:
        _require_positive(_get_number(arm, "arm", "length"), "arm",
                          "length")
    else:
        frac = _get_number(arm, "arm", "length_fraction")
        if not 0.0 < frac <= 1.0:
            raise ScenarioError("key 'arm.length_fraction' must lie in "
                                "(0, 1]")
    _require_positive(_get_number(arm, "arm", "radius_base", required=True),
                      "arm", "radius_base")
    if "radius_tip" in arm:
        _require_positive(_get_number(arm, "arm", "radius_tip"), "arm",
                          "radius_tip")
    return arm


def _validate_task(task: Mapping) -> tuple:
    kind = task.get("kind")
    if kind not in TASK_KINDS:
        raise ScenarioError("key 'task.kind' must be one of %s"
                            % ", ".join(TASK_KINDS))
    _reject_unknown(task, "task", _TASK_KEYS[kind])
    out = dict(task)

    if kind == "optimal_grasp":
        _require_positive(_get_number(task, "task", "chi", required=True),
                          "task", "chi")
        for key in ("eta", "initial_kappa"):
            if key in task:
                _get_number(task, "task", key)
        if "eta" in task:
            _require_positive(float(task["eta"]), "task", "eta")
        for key in ("steps", "max_iterations"):
            if key in task and _get_int(task, "task", key) < 1:
                raise ScenarioError("key 'task.%s' must be at least 1"
                                    % key)
        rho0 = _get_number(task, "task", "initial_rho", required=True)
        _require_positive(rho0, "task", "initial_rho")
        alpha0 = _get_number(task, "task", "initial_alpha", required=True)
        if not 0.0 < alpha0 < math.pi:
            raise ScenarioError("key 'task.initial_alpha' must lie in "
                                "(0, pi)")
        target = task.get("rho_target", "arm-radius")
        if target != "arm-radius" and not _is_number(target):
            raise ScenarioError("key 'task.rho_target' must be a number or "
                                "'arm-radius'")
        if _is_number(target):
            _require_positive(float(target), "task", "rho_target")
        out["rho_target"] = target
        a_d = _get_number(task, "task", "alpha_target",
                          default=math.pi / 2)
        if not 0.0 < a_d < math.pi:
            raise ScenarioError("key 'task.alpha_target' must lie in "
                                "(0, pi)")
        out["alpha_target"] = a_d

    elif kind in ("quality_map", "maximize_quality"):
        out["chi"] = _require_positive(
            _get_number(task, "task", "chi", default=10.0), "task", "chi")
        d_min = _get_number(task, "task", "d_min", required=True)
        d_max = _get_number(task, "task", "d_max", required=True)
        _require_positive(d_min, "task", "d_min")
        if not d_max > d_min:
            raise ScenarioError("key 'task.d_max' must exceed 'task.d_min'")
        defaults = (24, 96) if kind == "quality_map" else (8, 24)
        out["n_d"] = _get_int(task, "task", "n_d", default=defaults[0])
        out["n_psi"] = _get_int(task, "task", "n_psi", default=defaults[1])
        if out["n_d"] < 1 or out["n_psi"] < 1:
            raise ScenarioError("keys 'task.n_d' and 'task.n_psi' must be "
                                "at least 1")
        if "contact_tol" in task:
            _require_positive(_get_number(task, "task", "contact_tol"),
                              "task", "contact_tol")
        if kind == "maximize_quality":
            metric = _get_int(task, "task", "metric", required=True)
            if metric not in (1, 2, 3):
                raise ScenarioError("key 'task.metric' must be 1, 2 or 3")
            out["starts"] = _get_int(task, "task", "starts", default=5)
            out["max_evaluations"] = _get_int(task, "task",
                                              "max_evaluations", default=60)
            if out["starts"] < 1 or out["max_evaluations"] < 1:
                raise ScenarioError("keys 'task.starts' and "
                                    "'task.max_evaluations' must be at "
                                    "least 1")

    else:  # feedback_run
        mu1 = _get_number(task, "task", "mu1", default=1.0)
        if mu1 < 0.0:
            raise ScenarioError("key 'task.mu1' must be nonnegative")
        out["mu1"] = mu1
        if "mu2" not in task:
            raise ScenarioError("missing required key 'task.mu2'")
        mu2 = task["mu2"]
        if mu2 != "adaptive" and not _is_number(mu2):
            raise ScenarioError("key 'task.mu2' must be a number or "
                                "'adaptive'")
        rho0 = _get_number(task, "task", "initial_rho", required=True)
        _require_positive(rho0, "task", "initial_rho")
        alpha0 = _get_number(task, "task", "initial_alpha", required=True)
        if not 0.0 < alpha0 < math.pi:
            raise ScenarioError("key 'task.initial_alpha' must lie in "
                                "(0, pi)")
        out["initial_shadow"] = _get_number(task, "task", "initial_shadow",
                                            default=0.0)
        out["steps"] = _get_int(task, "task", "steps", default=4000)
        if out["steps"] < 1:
            raise ScenarioError("key 'task.steps' must be at least 1")

    return kind, out


def parse_scenario(data: Mapping[str, Any],
                   source: Optional[Path] = None) -> Scenario:
    """Validate an already-decoded scenario document."""
    _reject_unknown(data, "scenario",
                    {"spec_version", "object", "arm", "task", "output",
                     "seed"})
    version = data.get("spec_version")
    if version != SPEC_VERSION:
        raise ScenarioError("key 'spec_version' must equal %d"
                            % SPEC_VERSION)
    for name in ("object", "arm", "task"):
        if name not in data or not isinstance(data[name], dict):
            raise ScenarioError("missing required table '%s'" % name)

    obj = _validate_object(data["object"])
    arm = _validate_arm(data["arm"])
    kind, task = _validate_task(data["task"])
    if (kind == "feedback_run" and task["mu2"] == "adaptive"
            and obj["kind"] != "circle"):
        raise ScenarioError("key 'task.mu2' may be 'adaptive' only for "
                            "circle objects (other boundaries have no "
                            "single radius)")

    out_dir = "out"
    if "output" in data:
        if not isinstance(data["output"], dict):
            raise ScenarioError("'output' must be a table")
        _reject_unknown(data["output"], "output", {"directory"})
        if "directory" in data["output"]:
            d = data["output"]["directory"]
            if not isinstance(d, str) or not d:
                raise ScenarioError("key 'output.directory' must be a "
                                    "nonempty string")
            out_dir = d
    elif source is not None:
        out_dir = str(Path("out") / source.stem)

    seed = _get_int(data, "scenario", "seed", default=0)
    if seed < 0:
        raise ScenarioError("key 'scenario.seed' must be nonnegative")

    return Scenario(source=source, object_spec=obj, arm_spec=arm,
                    task_kind=kind, task=task, out_dir=out_dir, seed=seed)


def load_scenario(path) -> Scenario:
    """Parse and validate a scenario TOML file."""
    p = Path(path)
    try:
        raw = p.read_bytes()
    except OSError as exc:
        raise ScenarioError("cannot read scenario file %s: %s"
                            % (p, exc)) from exc
    try:
        data = tomllib.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ScenarioError("scenario file %s is not valid TOML: %s"
                            % (p, exc)) from exc
    return parse_scenario(data, source=p)
