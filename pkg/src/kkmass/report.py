"""Render report documents as JSON and as aligned text."""
from __future__ import annotations

import json
import math

import numpy as np

__all__ = ["to_jsonable", "render_json", "render_text"]


def to_jsonable(obj):
    """Plain JSON types; non-finite floats become the strings 'inf', '-inf', 'nan'."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isfinite(x):
            return x
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return obj


def render_json(report: dict) -> str:
    return json.dumps(to_jsonable(report), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "yes" if v else "no"
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.6g}"
    if v is None:
        return "-"
    return str(v)


def _table(rows: list) -> list:
    if not rows:
        return []
    cols = list(rows[0])
    cells = [[_fmt(r.get(c)) for c in cols] for r in rows]
    widths = [max(len(c), *(len(row[i]) for row in cells)) for i, c in enumerate(cols)]
    lines = ["  ".join(c.rjust(w) for c, w in zip(cols, widths))]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(x.rjust(w) for x, w in zip(row, widths)) for row in cells]
    return lines


def render_text(report: dict) -> str:
    out = [f"task: {report['task']}    model: {report['model']['name']}    status: {report['status'].upper()}"]
    params = report["model"]["params"]
    out.append("params: " + ", ".join(f"{k}={_fmt(v)}" for k, v in sorted(params.items())))
    norm = report.get("normalization")
    if norm:
        out.append("normalization: " + ", ".join(f"{k}={_fmt(v)}" for k, v in norm.items()))
    out.append("")
    for key, val in report["results"].items():
        if isinstance(val, list) and val and isinstance(val[0], dict):
            out.append(f"{key}:")
            out += ["  " + line for line in _table(val)]
            out.append("")
        elif isinstance(val, dict):
            out.append(f"{key}: " + ", ".join(f"{k}={_fmt(v)}" for k, v in val.items()))
        else:
            out.append(f"{key}: {_fmt(val)}")
    out.append("")
    out.append("checks:")
    width = max((len(c["name"]) for c in report["checks"]), default=0)
    for c in report["checks"]:
        mark = "PASS" if c["passed"] else "FAIL"
        line = f"  [{mark}] {c['name'].ljust(width)}  value={_fmt(c['value'])}"
        if c.get("target") is not None:
            line += f"  target={_fmt(c['target'])}"
        if c.get("tolerance") is not None:
            line += f"  tol={_fmt(c['tolerance'])}"
        if c.get("detail"):
            line += f"  ({c['detail']})"
        out.append(line)
    timing = report.get("timing")
    if timing:
        out.append("")
        out.append(f"wall clock: {timing['wall_clock_seconds']:.3f} s")
    return "\n".join(out) + "\n"
