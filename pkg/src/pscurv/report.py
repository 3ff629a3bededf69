"""Aggregate the JSON reports of one or more run directories."""

from __future__ import annotations

import csv
import json
from pathlib import Path


class MissingArtifacts(FileNotFoundError):
    pass


def _fmt(v) -> str:
    if isinstance(v, list):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def collect(run_dir) -> list[tuple[Path, dict]]:
    root = Path(run_dir)
    if not root.is_dir():
        raise MissingArtifacts(f"{root} is not a directory")
    found = sorted(root.rglob("diagnostics.json"))
    if not found:
        raise MissingArtifacts(f"no diagnostics.json under {root}")
    return [(p.parent, json.loads(p.read_text())) for p in found]


def _plot_files(run: Path) -> list[Path]:
    series = run / "series.csv"
    if not series.exists():
        return []
    with series.open() as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    x = "tau" if "tau" in header else header[0]
    ix = header.index(x)
    out = []
    for j, name in enumerate(header):
        if name in ("tau", "t"):
            continue
        # the CSF series keeps physical time next to the curvature deviation
        xcol = header.index("t") if name == "ktilde_dev" and "t" in header else ix
        path = run / f"plot_{name}.csv"
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([header[xcol], name])
            for row in body:
                if row[xcol] and row[j]:
                    w.writerow([row[xcol], row[j]])
        out.append(path)
    return out


def report(run_dir) -> str:
    """Write ``summary.txt`` and ``plot_*.csv`` files; return the summary.

    Raises
    ------
    MissingArtifacts
        No ``diagnostics.json`` below ``run_dir``.
    """
    runs = collect(run_dir)
    lines = []
    for path, data in runs:
        lines.append(f"== {data['scenario']} ({path}) {'PASS' if data['passed'] else 'FAIL'}")
        width = max(len(c["name"]) for c in data["checks"]) if data["checks"] else 10
        for c in data["checks"]:
            flag = "pass" if c["passed"] else "FAIL"
            lines.append(f"  {c['name']:<{width}}  {_fmt(c['value']):>14}  {c['op']:>2} {_fmt(c['bound']):<18} {flag}")
        ext = path / "extension.json"
        if ext.exists():
            e = json.loads(ext.read_text())
            lines.append(f"  omega estimate range   {_fmt(min(e['omega_min']))} .. {_fmt(max(e['omega_max']))}")
            lines.append(f"  rtilde total           {_fmt(e['rtilde_total'])} (blow-up exponent {_fmt(e['blowup_exponent'])})")
        for key in ("t1_estimate", "J_final", "harnack_max"):
            if key in data.get("metrics", {}):
                lines.append(f"  {key:<22} {_fmt(data['metrics'][key])}")
        _plot_files(path)
    text = "\n".join(lines) + "\n"
    (Path(run_dir) / "summary.txt").write_text(text)
    return text
