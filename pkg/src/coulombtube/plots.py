"""Plot-script emission: self-contained matplotlib scripts, no in-process plotting.

Each emitted script reads the run's CSV mirror and draws the measured
points with the relevant theoretical guide line.  Keeping rendering out of
process keeps the core free of plotting dependencies and the scripts
portable next to their data.
"""

import json
from pathlib import Path

from .errors import ValidationError

_GUIDES = {
    "P1": ("1 + delta/2", lambda d: 1.0 + d / 2.0),
    "P2": ("1 - 3 delta/2", lambda d: 1.0 - 1.5 * d),
    "Q1": ("2 delta + 4p - 4", None),   # slope taken from the report
    "Q2": ("2 (delta - 1)", None),
}

_TEMPLATE = '''#!/usr/bin/env python3
"""Log-log distance plot for run {run_id} (tag {tag}); auto-generated."""
import csv
import matplotlib.pyplot as plt

eps, vals = [], []
with open({csv_name!r}) as fh:
    for row in csv.DictReader(fh):
        eps.append(float(row["epsilon"]))
        vals.append(float(row[{value_col!r}]))

fig, ax = plt.subplots(figsize=(5, 4))
ax.loglog(eps, vals, "o-", label="measured")
{guide_block}
ax.set_xlabel("epsilon")
ax.set_ylabel({ylabel!r})
ax.set_title({title!r})
ax.legend()
fig.tight_layout()
fig.savefig({png_name!r}, dpi=150)
print("wrote", {png_name!r})
'''

_GUIDE_BLOCK = '''anchor = vals[0] * {sign_factor}
guide = [anchor * (e / eps[0]) ** {slope} for e in eps]
ax.loglog(eps, guide, "--", label="guide slope {slope:.2f}")'''


def emit_plots(report_paths, out_dir):
    """Write one plot script per report; returns the script file names.

    Raises "report-not-found" if a report path does not exist.
    """
    out_dir = Path(out_dir)
    scripts = []
    for path in report_paths:
        path = Path(path)
        if not path.exists():
            raise ValidationError("report-not-found", str(path))
        report = json.loads(path.read_text())
        tag = report.get("theorem_tag", "RUN")
        run_id = report.get("experiment_id", "unknown")
        if tag in ("P1", "P2", "T1", "T2"):
            csv_name = "converge.csv"
            value_col = "distance" if tag != "T2" else "Lperp"
            slope = None
            if tag in ("P1", "P2") and report.get("threshold") is not None:
                delta = _report_delta(report)
                slope = _GUIDES[tag][1](delta)
            ylabel = "resolvent distance"
        elif tag in ("Q1", "Q2"):
            csv_name = "qeps.csv"
            value_col = "Q"
            slope = report.get("theory_slope")
            ylabel = "Q"
        else:
            csv_name = "gamma.csv" if tag == "P4" else "klaus.csv"
            value_col = "form_value" if tag == "P4" else "integral"
            slope = None
            ylabel = value_col
        guide_block = ""
        if slope is not None:
            guide_block = _GUIDE_BLOCK.format(slope=slope, sign_factor=1.0)
        script = _TEMPLATE.format(
            run_id=run_id, tag=tag, csv_name=csv_name, value_col=value_col,
            guide_block=guide_block, ylabel=ylabel,
            title=f"{tag} ladder (run {run_id})",
            png_name=f"plot_{tag.lower()}.png",
        )
        name = f"plot_{tag.lower()}.py"
        (out_dir / name).write_text(script)
        scripts.append(name)
    return scripts


def _report_delta(report):
    # slope thresholds were computed as theory - slack; recover theory from
    # the stored threshold plus the recorded theory slope when present
    details_theory = report.get("theory_slope")
    if details_theory is not None:
        tag = report.get("theorem_tag")
        if tag == "P1":
            return 2.0 * (details_theory - 1.0)
        if tag == "P2":
            return (1.0 - details_theory) / 1.5
    return 0.3
