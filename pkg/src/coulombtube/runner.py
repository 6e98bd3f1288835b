"""Experiment orchestration: pipelines, artifact writing, run manifests.

One experiment writes one output directory keyed by the config hash.  All
numeric payloads in reports are deterministic for a fixed config (fixed
seeds, deterministic solvers); wall-clock fields (runtime_seconds, manifest
timestamps) are the only volatile entries and are excluded from any
determinism comparison.
"""

import csv
import hashlib
import json
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, boundary, convergence, geometry, onedim, shooting, tube
from .config import ExperimentConfig, serialize_config
from .errors import CoulombTubeError, ValidationError

SCHEMA_VERSION = 1


# ---------------------------------------------------------------------------
# Manifest plumbing
# ---------------------------------------------------------------------------

def _sha256(path: Path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_json(path: Path, payload):
    path.write_text(json.dumps(payload, sort_keys=True, indent=2,
                               allow_nan=True, default=_coerce) + "\n")


def _coerce(obj):
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _write_csv(path: Path, header, rows):
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


def run_experiment(config: ExperimentConfig, out_dir=None, jobs=1):
    """Execute the configured pipeline; returns (manifest dict, exit status).

    Exit status is 0 iff every pass criterion of the experiment holds and
    no solver failed.  Artifacts (reports, CSV mirrors, plot scripts) and a
    manifest with checksums land in <output.directory>/<experiment_id>/.
    """
    t_start = time.time()
    exp_id = config.experiment_id()
    root = Path(out_dir if out_dir is not None else config.output["directory"])
    run_dir = root / exp_id
    run_dir.mkdir(parents=True, exist_ok=True)

    (run_dir / "config.json").write_text(serialize_config(config) + "\n")

    pipeline = _PIPELINES[config.experiment]
    artifacts, passed = pipeline(config, run_dir, jobs=jobs)
    runtime = time.time() - t_start

    artifact_entries = []
    for rel in ["config.json"] + artifacts:
        p = run_dir / rel
        artifact_entries.append(
            {"path": rel, "sha256": _sha256(p), "bytes": p.stat().st_size}
        )
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "experiment_id": exp_id,
        "experiment": config.experiment,
        "created_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "tool_version": __version__,
        "runtime_seconds": runtime,
        "config": config.as_document(),
        "artifacts": artifact_entries,
        "pass": bool(passed),
    }
    _write_json(run_dir / "manifest.json", manifest)
    return manifest, 0 if passed else 1


def verify_manifest(run_dir):
    """Recheck artifact checksums; returns list of mismatched paths."""
    run_dir = Path(run_dir)
    manifest = json.loads((run_dir / "manifest.json").read_text())
    bad = []
    for entry in manifest["artifacts"]:
        p = run_dir / entry["path"]
        if not p.exists() or _sha256(p) != entry["sha256"]:
            bad.append(entry["path"])
    return bad


# ---------------------------------------------------------------------------
# Pipelines
# ---------------------------------------------------------------------------

def _report_skeleton(config, tag):
    return {
        "schema_version": SCHEMA_VERSION,
        "experiment_id": config.experiment_id(),
        "theorem_tag": tag,
    }


def _finish_report(report, run_dir, name, t0):
    report["runtime_seconds"] = time.time() - t0
    _write_json(run_dir / name, report)


def _run_modes(config, run_dir, jobs=1):
    t0 = time.time()
    mesh, _, modes = geometry.transverse_modes(config.cross_section())
    report = _report_skeleton(config, "MODES")
    report.update(modes.as_record())
    artifacts = ["modes.json"]
    if config.output.get("emit_nodal"):
        rows = [(p[0], p[1], u) for p, u in zip(mesh.points, modes.u0)]
        _write_csv(run_dir / "u0.csv", ["y1", "y2", "u0"], rows)
        artifacts.append("u0.csv")
    ok = modes.lambda0 < modes.lambda1 and modes.u0.min() > 0
    report["pass"] = bool(ok)
    _finish_report(report, run_dir, "modes.json", t0)
    return artifacts, ok


def _run_spectrum_1d(config, run_dir, jobs=1):
    t0 = time.time()
    kappa = config.physics["kappa"]
    grid = onedim.Grid1D.make(config.solver["grid_L"], config.solver["grid_h"])
    twist = config.twist()
    C_S = 0.0
    if twist.family != "zero":
        _, _, modes = geometry.transverse_modes(config.cross_section())
        C_S = modes.C_S
    op = onedim.assemble_HD(kappa, grid, twist, C_S)
    n_levels = int(config.solver["n_levels"])
    vals = onedim.spectrum_1d(op, n_levels=n_levels)
    report = _report_skeleton(config, "SPECTRUM1D")
    rows = []
    max_err = 0.0
    if kappa > 0:
        for n in range(1, n_levels + 1):
            analytic = -(kappa**2) / (4.0 * n * n)
            for copy in range(2):
                ev = float(vals[2 * (n - 1) + copy])
                rows.append((n, ev, analytic, abs(ev - analytic)))
                max_err = max(max_err, abs(ev - analytic))
        ok = max_err <= config.options.get("tolerance", 1e-3)
        report["bound_states"] = True
    else:
        # repulsive: no spectrum below the essential threshold
        low = float(vals[0])
        rows = [(1, low, 0.0, abs(min(low, 0.0)))]
        ok = low >= -1e-8
        report["bound_states"] = False
        report["note"] = "no bound state"
    _write_csv(run_dir / "spectrum.csv",
               ["n", "eigenvalue", "analytic_reference", "abs_error"], rows)
    report["levels"] = [list(r) for r in rows]
    report["max_abs_error"] = max_err
    report["pass"] = bool(ok)
    _finish_report(report, run_dir, "spectrum.json", t0)
    return ["spectrum.json", "spectrum.csv"], ok


_BOUNDARY_FUNCTIONS = {
    "linear": (lambda x: x, lambda x: 1.0),
    "constant": (lambda x: 1.0, lambda x: 0.0),
}


def _boundary_log_series(kappa):
    def phi(x):
        ax = abs(x)
        return 1.0 if ax == 0 else 1.0 - kappa * ax * np.log(abs(kappa) * ax)

    def dphi(x):
        ax = abs(x)
        return -np.sign(x) * kappa * (np.log(abs(kappa) * ax) + 1.0)

    return phi, dphi


def _run_boundary_data(config, run_dir, jobs=1):
    t0 = time.time()
    kappa = config.physics["kappa"]
    name = config.options.get("function", "linear")
    if name == "log_series":
        phi, dphi = _boundary_log_series(kappa)
    elif name in _BOUNDARY_FUNCTIONS:
        phi, dphi = _BOUNDARY_FUNCTIONS[name]
    else:
        raise ValidationError("report-not-found", f"unknown boundary function {name!r}")
    data = boundary.boundary_data(
        phi, dphi, kappa,
        r0=config.options.get("r0", 1e-3),
        n_samples=int(config.options.get("n_samples", 6)),
    )
    report = _report_skeleton(config, "BOUNDARY")
    report.update(data.as_record())
    angles = config.options.get("extension_angles")
    if angles is not None and not data.any_divergent():
        ext = boundary.ExtensionMatrix.from_angles(*angles)
        ok, residual = boundary.check_extension_membership(data, ext)
        report["extension_residual"] = residual
        report["extension_member"] = bool(ok)
        passed = True
    else:
        report["extension_residual"] = None
        passed = True
    report["pass"] = passed
    _finish_report(report, run_dir, "boundary.json", t0)
    return ["boundary.json"], passed


def _run_tube_solve(config, run_dir, jobs=1):
    t0 = time.time()
    eps = config.ladder["epsilons"][0]
    template = config.tube_template(eps=eps)
    grid = tube.build_tube_grid(template,
                                n_r=config.solver.get("n_radial"))
    kappa = template.kappa
    if kappa > 0:
        _, Adot = tube.assemble_a_forms(template, grid)
        A = Adot
        z = -1.0
    else:
        A = tube.assemble_b_form(template, grid)
        z = -1.0
    w = np.exp(-grid.axis.x**2 / 4.0) * np.sqrt(grid.axis.h)
    theta = tube.embed_from_L(w, grid)
    sol = tube.apply_resolvent(A, z, theta, rtol=config.solver["rtol"],
                               grid=grid, eps=eps)
    report = _report_skeleton(config, "TUBESOLVE")
    report.update({
        "epsilon": eps,
        "shift": {"re": sol.z.real, "im": sol.z.imag},
        "iterations": sol.iterations,
        "residual": sol.residual,
        "method": sol.method,
        "norms": {"theta": float(np.linalg.norm(theta)),
                  "psi": float(np.linalg.norm(sol.psi))},
        "grid": [grid.n_axis, grid.n_trans],
        "pass": True,
    })
    artifacts = ["tube_solve.json"]
    if config.output.get("emit_nodal"):
        vals = grid.coeffs_to_values(sol.psi.real)
        rows = [(i, v) for i, v in enumerate(vals)]
        _write_csv(run_dir / "psi.csv", ["flat_index", "psi"], rows)
        artifacts.append("psi.csv")
    _finish_report(report, run_dir, "tube_solve.json", t0)
    return artifacts, True


def _norm_sweep_rung(args):
    config_doc, pairing, eps = args
    from .config import parse_config

    config = parse_config(config_doc)
    spec = config.tube_template(eps=eps)
    sigma, _ = convergence.norm_resolvent_distance(
        spec, pairing=pairing, seed=int(config.solver["seed"]),
        power_iters=int(config.solver["power_iters"]),
        stagnation=config.solver["stagnation"],
    )
    return sigma


def _run_converge(config, run_dir, jobs=1):
    t0 = time.time()
    ladder = convergence.EpsilonLadder(
        epsilons=tuple(config.ladder["epsilons"]),
        delta=config.physics["delta"], kappa=config.physics["kappa"],
        c=config.physics["c"],
    )
    template = config.tube_template()
    theorem = config.theorem
    seed = int(config.solver["seed"])
    slack = config.options.get("slope_slack", convergence.DEFAULT_SLOPE_SLACK)
    if theorem == "T2":
        rep = convergence.strong_resolvent_sweep(ladder, template)
        rows = []
        for k, eps in enumerate(rep.epsilons):
            rows.append([eps] + [rep.distances[j][k]
                                 for j in range(len(rep.distances))])
        header = ["epsilon"] + rep.details["labels"]
    else:
        if jobs > 1:
            doc = config.as_document()
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                distances = list(pool.map(
                    _norm_sweep_rung,
                    [(doc, theorem, e) for e in ladder.epsilons],
                ))
            fit = convergence.fit_rate(distances, ladder.epsilons)
            theory = {"P1": 1.0 + ladder.delta / 2.0,
                      "P2": 1.0 - 1.5 * ladder.delta,
                      "T1": None}[theorem]
            monotone = all(b < a for a, b in zip(distances, distances[1:]))
            threshold = None if theory is None else theory - slack
            passes = monotone and (threshold is None or fit.slope >= threshold)
            rep = convergence.ConvergenceReport(
                theorem_tag=theorem, epsilons=list(ladder.epsilons),
                distances=distances, fit=fit, threshold=threshold,
                passes=passes, monotone=monotone,
                details={"theory_slope": theory, "jobs": jobs},
            )
        else:
            rep = convergence.norm_resolvent_sweep(
                ladder, template, pairing=theorem, seed=seed,
                power_iters=int(config.solver["power_iters"]),
                stagnation=config.solver["stagnation"], slope_slack=slack,
            )
        rows = list(zip(rep.epsilons, rep.distances))
        header = ["epsilon", "distance"]
    report = _report_skeleton(config, theorem)
    rec = rep.as_record()
    details = rec.pop("details", {})
    report.update(rec)
    report["theory_slope"] = details.get("theory_slope")
    _write_csv(run_dir / "converge.csv", header, rows)
    _finish_report(report, run_dir, "converge.json", t0)
    from .plots import emit_plots

    scripts = emit_plots([run_dir / "converge.json"], run_dir)
    return ["converge.json", "converge.csv"] + scripts, rep.passes


def _run_klaus(config, run_dir, jobs=1):
    t0 = time.time()
    mesh, _, modes = geometry.transverse_modes(config.cross_section())
    eps_list = config.options.get("klaus_epsilons", [1e-2, 1e-3, 1e-4])
    rep = convergence.klaus_check(
        config.physics["kappa"], config.physics["delta"], eps_list, modes, mesh,
        gap_tolerance=config.options.get("gap_tolerance", 0.2),
    )
    report = _report_skeleton(config, "KLAUS")
    report.update(rep.as_record())
    rows = list(zip(rep.epsilons, rep.integrals, rep.pointwise_residuals,
                    rep.sign_ratios))
    _write_csv(run_dir / "klaus.csv",
               ["epsilon", "integral", "pointwise_residual", "sign_ratio"], rows)
    _finish_report(report, run_dir, "klaus.json", t0)
    return ["klaus.json", "klaus.csv"], rep.passes


def _run_qeps(config, run_dir, jobs=1):
    t0 = time.time()
    scenario = config.options.get("scenario", "dirichlet_profile")
    rep = convergence.qeps_sweep(
        scenario, config.physics["kappa"], config.ladder["epsilons"],
        config.physics["delta"],
        p=config.options.get("p", 0.9), M=config.options.get("M", 1.0),
        w_sigma=config.options.get("w_sigma", 1.0),
    )
    tag = "Q1" if scenario == "dirichlet_profile" else "Q2"
    report = _report_skeleton(config, tag)
    report.update(rep.as_record())
    rows = list(zip(rep.epsilons, rep.values,
                    rep.bounds if rep.bounds else [""] * len(rep.values)))
    _write_csv(run_dir / "qeps.csv", ["epsilon", "Q", "bound"], rows)
    _finish_report(report, run_dir, "qeps.json", t0)
    from .plots import emit_plots

    scripts = emit_plots([run_dir / "qeps.json"], run_dir)
    return ["qeps.json", "qeps.csv"] + scripts, rep.passes


def _run_gamma(config, run_dir, jobs=1):
    t0 = time.time()
    template = config.tube_template()
    trial = config.options.get("trial", "decaying")
    if trial == "decaying":
        rep = convergence.gamma_trial(
            lambda x: x * np.exp(-(x**2)), config.ladder["epsilons"], template,
            seed=int(config.solver["seed"]),
        )
        passed = rep["pass"]
    else:
        rep = convergence.gamma_divergence_trial(
            lambda x: np.exp(-(x**2)), config.ladder["epsilons"], template,
        )
        passed = rep["increasing"]
    report = _report_skeleton(config, "P4")
    report.update(rep)
    rows = list(zip(rep["ladder"], rep["values"]))
    _write_csv(run_dir / "gamma.csv", ["epsilon", "form_value"], rows)
    _finish_report(report, run_dir, "gamma.json", t0)
    return ["gamma.json", "gamma.csv"], passed


_PIPELINES = {
    "modes": _run_modes,
    "spectrum-1d": _run_spectrum_1d,
    "boundary-data": _run_boundary_data,
    "tube-solve": _run_tube_solve,
    "converge": _run_converge,
    "klaus": _run_klaus,
    "qeps": _run_qeps,
    "gamma": _run_gamma,
}


def summarize_run(run_dir):
    """Human-readable per-run summary lines; raises if no manifest."""
    run_dir = Path(run_dir)
    manifest_path = run_dir / "manifest.json"
    if not manifest_path.exists():
        raise CoulombTubeError("no manifest in " + str(run_dir), code="report-not-found")
    manifest = json.loads(manifest_path.read_text())
    lines = [
        f"experiment {manifest['experiment']} id={manifest['experiment_id']}"
        f" pass={manifest['pass']} runtime={manifest['runtime_seconds']:.1f}s",
    ]
    for entry in manifest["artifacts"]:
        lines.append(f"  artifact {entry['path']} ({entry['bytes']} bytes)")
    bad = verify_manifest(run_dir)
    if bad:
        lines.append("  CHECKSUM MISMATCH: " + ", ".join(bad))
    return lines, manifest["pass"] and not bad
