"""Experiment configuration: parsing, validation, canonical serialization.

Configs are JSON documents with six fixed blocks (geometry, physics,
ladder, solver, output, options) plus the experiment kind.  Parsing is
strict: unknown keys anywhere are hard errors, and all constraint
violations are collected and reported together, not one at a time.  The
experiment id is the SHA-256 of the canonical serialization of the fully
defaulted config, so identical configs always map to identical run
directories.
"""

import hashlib
import json
from dataclasses import dataclass, field

from .errors import ConfigError
from .geometry import CrossSectionSpec
from .onedim import TwistProfile

SCHEMA_VERSION = 1

EXPERIMENTS = (
    "modes", "spectrum-1d", "boundary-data", "tube-solve",
    "converge", "klaus", "qeps", "gamma",
)
THEOREMS = ("T1", "T2", "P1", "P2")

_GEOMETRY_KEYS = {"shape", "radius", "a", "b", "w", "h", "vertices", "resolution"}
_PHYSICS_KEYS = {"kappa", "delta", "c", "twist"}
_TWIST_KEYS = {"family", "amplitude", "radius"}
_LADDER_KEYS = {"epsilons"}
_SOLVER_KEYS = {
    "seed", "rtol", "budget", "x_length", "x_spacing", "n_radial",
    "power_iters", "stagnation", "n_levels", "grid_L", "grid_h", "mode",
}
_OUTPUT_KEYS = {"directory", "formats", "emit_nodal"}
_OPTIONS_KEYS = {
    "scenario", "p", "M", "w_sigma", "function", "r0", "n_samples",
    "extension_angles", "klaus_epsilons", "trial", "limit_energy",
    "slope_slack", "gap_tolerance",
}
_TOP_KEYS = {"schema_version", "experiment", "theorem", "geometry", "physics",
             "ladder", "solver", "output", "options"}

_DEFAULTS = {
    "geometry": {"shape": "disk", "radius": 1.0, "resolution": 48},
    "physics": {"kappa": 1.0, "delta": 0.3, "c": None,
                "twist": {"family": "zero", "amplitude": 0.0, "radius": 1.0}},
    "ladder": {"epsilons": [0.2, 0.1, 0.05, 0.025]},
    "solver": {"seed": 1234, "rtol": 1e-9, "budget": 3_000_000,
               "x_length": 20.0, "x_spacing": 0.02, "n_radial": None,
               "power_iters": 30, "stagnation": 1e-4, "n_levels": 3,
               "grid_L": 200.0, "grid_h": 0.01, "mode": "axisymmetric"},
    "output": {"directory": "runs", "formats": ["json", "csv"],
               "emit_nodal": False},
    "options": {},
}


@dataclass
class ExperimentConfig:
    experiment: str
    theorem: str | None
    geometry: dict
    physics: dict
    ladder: dict
    solver: dict
    output: dict
    options: dict = field(default_factory=dict)

    # -- typed views ---------------------------------------------------------

    def cross_section(self) -> CrossSectionSpec:
        g = self.geometry
        res = int(g["resolution"])
        if g["shape"] == "disk":
            return CrossSectionSpec.disk(g.get("radius", 1.0), res)
        if g["shape"] == "ellipse":
            return CrossSectionSpec.ellipse(g["a"], g["b"], res)
        if g["shape"] == "rectangle":
            return CrossSectionSpec.rectangle(g["w"], g["h"], res)
        return CrossSectionSpec.polygon(g["vertices"], res)

    def twist(self) -> TwistProfile:
        t = self.physics["twist"]
        if t["family"] == "zero":
            return TwistProfile.zero()
        if t["family"] == "constant_rate":
            return TwistProfile.constant_rate(t["amplitude"])
        return TwistProfile.compact_bump(t["amplitude"], t["radius"])

    def tube_template(self, eps=None):
        from .tube import TubeOperatorSpec

        return TubeOperatorSpec(
            kappa=self.physics["kappa"],
            eps=eps if eps is not None else self.ladder["epsilons"][0],
            delta=self.physics["delta"],
            c=self.physics["c"],
            cross_section=self.cross_section(),
            twist=self.twist(),
            x_length=self.solver["x_length"],
            x_spacing=self.solver["x_spacing"],
            mode=self.solver["mode"],
            budget=int(self.solver["budget"]),
        )

    def as_document(self):
        doc = {
            "schema_version": SCHEMA_VERSION,
            "experiment": self.experiment,
            "geometry": self.geometry,
            "physics": self.physics,
            "ladder": self.ladder,
            "solver": self.solver,
            "output": self.output,
            "options": self.options,
        }
        if self.theorem is not None:
            doc["theorem"] = self.theorem
        return doc

    def canonical_json(self):
        return json.dumps(self.as_document(), sort_keys=True,
                          separators=(",", ":"), allow_nan=False)

    def experiment_id(self):
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()[:16]


def _check_keys(block, allowed, where, violations):
    for key in block:
        if key not in allowed:
            violations.append(f"unknown key {where}.{key}")


def _merged(defaults, given):
    out = json.loads(json.dumps(defaults))
    out.update({k: v for k, v in given.items()})
    return out


def parse_config(text_or_doc) -> ExperimentConfig:
    """Parse and validate a config document (JSON text or dict).

    All violations are collected into a single ConfigError; unknown keys
    are hard errors.  Defaults: delta = 0.3 and c = 2 kappa (attractive).
    """
    if isinstance(text_or_doc, str):
        try:
            doc = json.loads(text_or_doc)
        except json.JSONDecodeError as exc:
            raise ConfigError([f"malformed JSON: {exc}"])
    else:
        doc = dict(text_or_doc)

    violations = []
    _check_keys(doc, _TOP_KEYS, "<top>", violations)
    version = doc.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        violations.append(f"schema_version {version} unsupported (expected {SCHEMA_VERSION})")

    experiment = doc.get("experiment")
    if experiment not in EXPERIMENTS:
        violations.append(f"experiment must be one of {EXPERIMENTS}, got {experiment!r}")

    theorem = doc.get("theorem")
    if experiment == "converge":
        if theorem not in THEOREMS:
            violations.append(f"converge requires theorem in {THEOREMS}, got {theorem!r}")
    elif theorem is not None:
        violations.append("theorem is only valid for the converge experiment")

    geometry = _merged(_DEFAULTS["geometry"], doc.get("geometry", {}))
    physics = _merged(_DEFAULTS["physics"], doc.get("physics", {}))
    if isinstance(doc.get("physics", {}).get("twist"), dict):
        physics["twist"] = _merged(_DEFAULTS["physics"]["twist"],
                                   doc["physics"]["twist"])
    ladder = _merged(_DEFAULTS["ladder"], doc.get("ladder", {}))
    solver = _merged(_DEFAULTS["solver"], doc.get("solver", {}))
    output = _merged(_DEFAULTS["output"], doc.get("output", {}))
    options = dict(doc.get("options", {}))

    _check_keys(doc.get("geometry", {}), _GEOMETRY_KEYS, "geometry", violations)
    _check_keys(doc.get("physics", {}), _PHYSICS_KEYS, "physics", violations)
    if isinstance(doc.get("physics", {}).get("twist"), dict):
        _check_keys(doc["physics"]["twist"], _TWIST_KEYS, "physics.twist", violations)
    _check_keys(doc.get("ladder", {}), _LADDER_KEYS, "ladder", violations)
    _check_keys(doc.get("solver", {}), _SOLVER_KEYS, "solver", violations)
    _check_keys(doc.get("output", {}), _OUTPUT_KEYS, "output", violations)
    _check_keys(options, _OPTIONS_KEYS, "options", violations)

    # defaulting: attractive shift c = 2 kappa when regularization is on
    kappa = physics.get("kappa", 1.0)
    if physics.get("c") is None and kappa > 0:
        physics["c"] = 2.0 * kappa

    # cross-field constraints (collect everything)
    delta = physics.get("delta")
    if delta is not None and not (0.0 < delta < 0.5):
        violations.append(f"delta-range: requires 0 < delta < 1/2, got {delta}")
    c = physics.get("c")
    if c is not None and kappa > 0 and c <= kappa:
        violations.append(f"shift-too-small: requires c > kappa, got c={c} kappa={kappa}")
    eps_list = ladder.get("epsilons", [])
    if len(eps_list) < 3:
        violations.append("ladder: needs at least 3 rungs for rate fitting")
    if any(not (0 < e <= 1) for e in eps_list):
        violations.append("ladder: epsilons must lie in (0, 1]")
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        violations.append("ladder: epsilons must be strictly decreasing")
    shape = geometry.get("shape")
    if shape not in ("disk", "ellipse", "rectangle", "polygon"):
        violations.append(f"geometry.shape must be disk|ellipse|rectangle|polygon, got {shape!r}")
    if geometry.get("resolution", 0) < 1:
        violations.append("geometry.resolution must be a positive integer")
    mode = solver.get("mode")
    if mode not in ("axisymmetric", "full_tensor"):
        violations.append(f"solver.mode must be axisymmetric|full_tensor, got {mode!r}")
    twist_family = physics["twist"].get("family")
    if twist_family not in ("zero", "constant_rate", "compact_bump"):
        violations.append(f"physics.twist.family invalid: {twist_family!r}")
    if mode == "axisymmetric" and experiment in ("tube-solve", "converge", "gamma"):
        if shape != "disk":
            violations.append("mode-conflict: axisymmetric mode requires a disk section")
        if twist_family != "zero":
            violations.append("mode-conflict: axisymmetric mode requires zero twist")
    if experiment == "qeps":
        p = options.get("p", 0.9)
        if options.get("scenario", "dirichlet_profile") == "dirichlet_profile":
            if not 0.75 < p < 1.0:
                violations.append(f"p-range: requires 3/4 < p < 1, got {p}")

    if violations:
        raise ConfigError(violations)
    return ExperimentConfig(
        experiment=experiment, theorem=theorem, geometry=geometry,
        physics=physics, ladder=ladder, solver=solver, output=output,
        options=options,
    )


def serialize_config(config: ExperimentConfig) -> str:
    """Canonical round-trippable JSON (parse(serialize(c)) == c)."""
    return json.dumps(config.as_document(), sort_keys=True, indent=2,
                      allow_nan=False)
