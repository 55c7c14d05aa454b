"""CSV matrices and the JSON summary of an experiment report.

Matrix files have one row per learning end (``learning_end_s`` first) and
one column per FTW or horizon. Floats are written with ``repr`` so values
round-trip exactly; undefined values are empty cells in CSV and ``null``
in JSON. Every file is written to a temporary sibling and moved into
place, so a rerun replaces outputs atomically.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import platform
import tempfile
from importlib import metadata
from pathlib import Path

import numpy as np

from .evaluation import ESTIMATORS
from .experiment import MODEL_ERROR, NO_DATA, NO_EVENT, OK

COMPONENTS = ("number", "magnitude", "space", "combined")

_UMASK = os.umask(0)
os.umask(_UMASK)


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value) if math.isfinite(value) else ""
    return str(value)


def _clean(obj):
    """Replace non-finite floats by None so the JSON stays standard."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def _atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    try:
        fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        # mkstemp creates 0600 files; apply the usual umask-derived mode
        os.chmod(tmp, 0o666 & ~_UMASK)
        os.replace(tmp, path)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def _csv_text(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()


def versions() -> dict:
    out = {"python": platform.python_version()}
    for pkg in ("isbench", "numpy", "scipy", "numba"):
        try:
            out[pkg] = metadata.version("artifact" if pkg == "isbench" else pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = None
    return out


def _ftw_header(report: dict) -> list[str]:
    return ["learning_end_s"] + [f"ftw_{k + 1:02d}" for k in range(report["n_ftw"])]


def _horizon_header(report: dict) -> list[str]:
    return ["learning_end_s"] + [f"h{h}" for h in report["horizons_h"]]


def _ftw_matrix(report: dict, model: str, getter) -> list[list]:
    rows = []
    for rec in report["periods"][model]:
        row = [rec["learning_end"]]
        for k in range(report["n_ftw"]):
            if rec["status"] != OK:
                row.append(getter(None, rec["status"]))
            else:
                cell = rec["ftws"][k]
                row.append(getter(cell if cell["status"] == OK else None, cell["status"]))
        rows.append(row)
    return rows


def _horizon_matrix(report: dict, model: str, getter) -> list[list]:
    rows = []
    for rec in report["periods"][model]:
        row = [rec["learning_end"]]
        for h in report["horizons_h"]:
            cell = rec.get("horizons", {}).get(str(h)) if rec["status"] == OK else None
            status = rec["status"] if rec["status"] != OK else (cell or {}).get("status", NO_DATA)
            row.append(getter(cell if status == OK else None, status))
        rows.append(row)
    return rows


def _status_or(key):
    def get(cell, status):
        return cell[key] if cell is not None else status
    return get


def _value_or_blank(key):
    def get(cell, status):
        return cell.get(key) if cell is not None else None
    return get


def _s_status(cell, status):
    if cell is None:
        return status
    return cell["s_status"]


def _m_status(cell, status):
    if cell is None:
        return status
    return NO_EVENT if cell["observed"] == 0 else cell["m_status"]


def matrix_tables(report: dict) -> dict[str, tuple[list[str], list[list]]]:
    """All CSV tables keyed by file name."""
    tables = {}
    fh, hh = _ftw_header(report), _horizon_header(report)
    for model in report["models"]:
        tables[f"n_test_{model}.csv"] = (fh, _ftw_matrix(report, model, _status_or("n_status")))
        tables[f"n_expected_{model}.csv"] = (fh, _ftw_matrix(report, model, _value_or_blank("expected")))
        tables[f"n_observed_{model}.csv"] = (fh, _ftw_matrix(report, model, _value_or_blank("observed")))
        tables[f"s_test_{model}.csv"] = (fh, _ftw_matrix(report, model, _s_status))
        tables[f"s_ll_per_eqk_{model}.csv"] = (fh, _ftw_matrix(report, model,
                                                               _value_or_blank("ll_space_per_eqk")))
        tables[f"m_test_{model}.csv"] = (hh, _horizon_matrix(report, model, _m_status))
        tables[f"ll_per_eqk_{model}.csv"] = (hh, _horizon_matrix(report, model,
                                                                 _value_or_blank("ll_combined_per_eqk")))
    for key, comp in report.get("comparisons", {}).items():
        ends = report["learning_ends"]
        for c in COMPONENTS:
            rows = [[L] + list(vals) for L, vals in zip(ends, comp["ll_differences"][c])]
            tables[f"ll_diff_{c}_{key}.csv"] = (fh, rows)
        header = ["learning_end_s", "model"] + [f"h{h}" for h in report["horizons_h"]]
        rows = []
        # fixed orders: report.json is written with sorted keys
        for model in dict.fromkeys([comp["model_a"], comp["model_b"]]):
            curves = comp["cumulative_ll_per_eqk"][model]
            for i, L in enumerate(ends):
                rows.append([L, model] + [curves[str(h)][i] for h in report["horizons_h"]])
        tables[f"cumulative_ll_per_eqk_{key}.csv"] = (header, rows)
        rows = []
        for h in map(str, report["horizons_h"]):
            for s in comp["gain_samples"].get(h, []):
                rows.append([int(h), s["period"], "" if s["ftw"] is None else s["ftw"] + 1, s["voxel"],
                             s["value"]])
        tables[f"gain_samples_{key}.csv"] = (["horizon_h", "period", "ftw", "voxel", "gain"], rows)
        rows = []
        for h in map(str, report["horizons_h"]):
            summ = comp["gain_summaries"].get(h, {})
            for method in ESTIMATORS:
                if method not in summ:
                    continue
                s = summ[method]
                rows.append([int(h), method, s["value"], s["ci95"][0], s["ci95"][1], s["n"],
                             int(s["significant"]), int(s["flagged"]), s["probability_gain"]])
        tables[f"gain_summary_{key}.csv"] = (
            ["horizon_h", "estimator", "value", "ci_lo", "ci_hi", "n", "significant", "flagged",
             "probability_gain"], rows)
    return tables


def empty_report(models: list[str], n_ftw: int = 12, horizons=(6, 24, 48, 72), seed: int = 0) -> dict:
    return {"schema": 1, "seed": seed, "models": list(models), "learning_ends": [], "n_ftw": n_ftw,
            "horizons_h": list(horizons), "periods": {m: [] for m in models}, "comparisons": {}}


def emit_report(report: dict, out_dir, formats=("csv", "json")) -> list[Path]:
    """Write the CSV tables and/or ``report.json`` into ``out_dir``.

    Returns:
        Paths written, in a stable order.
    """
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out_dir}: {exc}") from exc
    written = []
    if "csv" in formats:
        for name, (header, rows) in sorted(matrix_tables(report).items()):
            path = out_dir / name
            _atomic_write(path, _csv_text(header, rows))
            written.append(path)
    if "json" in formats:
        doc = dict(report)
        doc.setdefault("versions", versions())
        path = out_dir / "report.json"
        text = json.dumps(_clean(doc), sort_keys=True, separators=(",", ":"), allow_nan=False)
        _atomic_write(path, text + "\n")
        written.append(path)
    return written


def load_report(path) -> dict:
    """Read a ``report.json`` file (or the directory containing it)."""
    path = Path(path)
    if path.is_dir():
        path = path / "report.json"
    return json.loads(path.read_text(encoding="utf-8"))


# N-test matrix cell values
N_TEST_STATUSES = frozenset({"pass", "fail-over", "fail-under", MODEL_ERROR, NO_DATA})
