"""Serialisation: line-oriented JSON, aligned text tables and CSV."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Table",
    "json_line",
    "render_text",
    "render_csv",
    "p_display",
    "P_DISPLAY_FLOOR",
    "ci_tables",
    "testing_tables",
    "timing_tables",
]

P_DISPLAY_FLOOR = 1e-5


def p_display(p: float, floor: float = P_DISPLAY_FLOOR) -> str:
    """Display form of a p-value; the full value is always reported alongside."""
    if not math.isfinite(p):
        return "nan"
    return f"< {floor:g}" if p < floor else f"{p:.5f}"


def _plain(obj):
    """Convert numpy scalars/arrays and non-finite floats to JSON-safe values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.generic):
        return _plain(obj.item())
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def json_line(record: dict) -> str:
    return json.dumps(_plain(record), allow_nan=False, separators=(",", ":"))


@dataclass
class Table:
    name: str
    title: str
    columns: list
    rows: list = field(default_factory=list)

    def add(self, *values) -> None:
        if len(values) != len(self.columns):
            raise ValueError(f"table {self.name}: {len(values)} values for {len(self.columns)} columns")
        self.rows.append(list(values))


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "yes" if v else "no"
    if isinstance(v, (float, np.floating)):
        if not math.isfinite(v):
            return "nan"
        return f"{v:.4f}" if 1e-3 <= abs(v) < 1e5 or v == 0 else f"{v:.4e}"
    return str(v)


def render_text(table: Table) -> str:
    cells = [[_cell(v) for v in row] for row in table.rows]
    widths = [max([len(c)] + [len(r[i]) for r in cells]) for i, c in enumerate(table.columns)]
    lines = [table.title, "  ".join(c.rjust(w) for c, w in zip(table.columns, widths))]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(v.rjust(w) for v, w in zip(r, widths)) for r in cells]
    return "\n".join(lines)


def render_csv(table: Table) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(table.columns)
    for row in table.rows:
        writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def _pair(alpha, beta) -> str:
    return f"({alpha:g}, {beta:g})"


def ci_tables(metrics, alpha, beta) -> list[Table]:
    """Coverage and mean length (x 1e4) per mediator, one column pair per method."""
    methods = list(metrics.ci)
    cov = Table("coverage", "Coverage probability (single / Bonferroni-adjusted)",
                ["mediator", "(alpha, beta)"] + [f"{m}{s}" for m in methods for s in ("", "_adj")])
    length = Table("length", "Mean interval length x 1e4 (single / Bonferroni-adjusted)",
                   ["mediator", "(alpha, beta)"] + [f"{m}{s}" for m in methods for s in ("", "_adj")])
    for k in range(len(metrics.truth)):
        cov.add(k + 1, _pair(alpha[k], beta[k]),
                *[v for m in methods for v in (metrics.ci[m].coverage[k], metrics.ci[m].coverage_adjusted[k])])
        length.add(k + 1, _pair(alpha[k], beta[k]),
                   *[v * 1e4 for m in methods
                     for v in (metrics.ci[m].mean_length[k], metrics.ci[m].mean_length_adjusted[k])])
    joint = Table("joint", "Simultaneous coverage of the Bonferroni-adjusted intervals",
                  ["method", "reps", "simultaneous_coverage", "failed_replicates"])
    for m in methods:
        s = metrics.ci[m]
        joint.add(m, s.reps, s.simultaneous_coverage_adjusted, s.failures)
    return [cov, length, joint]


def testing_tables(metrics, alpha, beta) -> list[Table]:
    """Bias (x 1e6), MSE (x 1e8) per mediator and J, then Power/FWER per J."""
    Js = list(metrics.tests)
    bias = Table("bias_mse", "Bias x 1e6 and MSE x 1e8 of the aggregated products",
                 ["mediator", "(alpha, beta)"] + [f"{s}_J{J}" for J in Js for s in ("bias", "mse")])
    for k in range(len(metrics.truth)):
        bias.add(k + 1, _pair(alpha[k], beta[k]),
                 *[v for J in Js for v in (metrics.tests[J].bias[k] * 1e6, metrics.tests[J].mse[k] * 1e8)])
    pf = Table("power_fwer", "Power over true signals and family-wise error rate",
               ["J", "reps", "power", "fwer", "omega"])
    for J in Js:
        s = metrics.tests[J]
        pf.add(J, s.reps, s.power, s.fwer, " ".join(str(k + 1) for k in s.omega))
    return [bias, pf]


def timing_tables(metrics) -> list[Table]:
    t = Table("timing", "Wall-clock seconds per run, data generation excluded",
              ["method", "runs", "mean_loop", "median_loop", "mean_total", "median_total"])
    for m, s in metrics.timing.items():
        t.add(m, s.runs, s.mean["loop_seconds"], s.median["loop_seconds"],
              s.mean["total_seconds"], s.median["total_seconds"])
    return [t]
