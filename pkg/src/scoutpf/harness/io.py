"""Result serialization.

Schema version 1. CSV output is a directory holding

``steps.csv``
    one row per (filter, step): ``filter, step, time, n_runs, rmse, mean_psi,
    scout_count, gpf_count`` then ``mean_error_<j>``, ``sigma_eff_<j>`` and
    ``sigma_est_<j>`` for every state component ``j``.
``runs.csv``
    one row per (filter, run): ``filter, run, seed, status, failed_step,
    steps_completed, diverged, final_error_norm, mean_psi, update_kinds``
    (``update_kinds`` has one character per step, ``s`` scout or ``g`` gpf).
``selection.csv``
    the update-selection histogram: ``filter, step, scout, gpf``.
``summary.json``
    campaign metadata and per-filter totals.

JSON output is a single ``results.json`` holding the summary, the per-step
table and the per-run records. Floats are written with full round-trip
precision; non-finite values become empty CSV cells or JSON ``null``.
Nothing time-dependent is written, so identical campaigns give identical
bytes.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1
STEP_FIELDS = ("filter", "step", "time", "n_runs", "rmse", "mean_psi", "scout_count", "gpf_count")
RUN_FIELDS = ("filter", "run", "seed", "status", "failed_step", "steps_completed", "diverged",
              "final_error_norm", "mean_psi", "update_kinds")
SELECTION_FIELDS = ("filter", "step", "scout", "gpf")


def step_fields(n: int) -> list[str]:
    return (list(STEP_FIELDS) + [f"mean_error_{j}" for j in range(n)]
            + [f"sigma_eff_{j}" for j in range(n)] + [f"sigma_est_{j}" for j in range(n)])


def _num(v):
    if isinstance(v, (np.integer, int)) and not isinstance(v, bool):
        return int(v)
    v = float(v)
    return v if math.isfinite(v) else None


def _vec(a) -> list:
    return [_num(v) for v in np.asarray(a, dtype=float)]


def step_rows(result) -> list[dict]:
    rows = []
    for summ in result.summaries:
        for s in summ.steps:
            row = {"filter": summ.filter, "step": s.step, "time": _num(s.time),
                   "n_runs": s.n_runs, "rmse": _num(s.rmse), "mean_psi": _num(s.mean_psi),
                   "scout_count": s.scout_count, "gpf_count": s.gpf_count}
            for label, vec in (("mean_error", s.mean_error), ("sigma_eff", s.sigma_eff),
                               ("sigma_est", s.sigma_est)):
                for j, v in enumerate(_vec(vec)):
                    row[f"{label}_{j}"] = v
            rows.append(row)
    return rows


def run_rows(result) -> list[dict]:
    rows = []
    for r in result.records:
        final = float(np.linalg.norm(r.steps[-1].error)) if r.steps else float("nan")
        psi = float(np.mean([s.psi for s in r.steps])) if r.steps else float("nan")
        rows.append({"filter": r.filter, "run": r.run, "seed": r.seed, "status": r.status,
                     "failed_step": r.failed_step, "steps_completed": len(r.steps),
                     "diverged": bool(r.diverged), "final_error_norm": _num(final),
                     "mean_psi": _num(psi),
                     "update_kinds": "".join(s.update_kind[0] for s in r.steps)})
    return rows


def selection_rows(result) -> list[dict]:
    return [{"filter": summ.filter, "step": s.step, "scout": s.scout_count, "gpf": s.gpf_count}
            for summ in result.summaries for s in summ.steps]


def summary_dict(result) -> dict:
    c = result.campaign
    filters = []
    for summ in result.summaries:
        last = summ.steps[-1] if summ.steps else None
        filters.append({
            "filter": summ.filter, "config": summ.config, "n_runs": summ.n_runs,
            "n_ok": summ.n_ok, "n_failed": summ.n_failed, "n_diverged": summ.n_diverged,
            "failures": dict(sorted(summ.failures.items())),
            "final_rmse": _num(last.rmse) if last else None,
            "final_mean_psi": _num(last.mean_psi) if last else None,
        })
    return {"schema_version": SCHEMA_VERSION, "scenario": c.scenario.to_dict(),
            "n_mc": c.n_mc, "seed": c.seed, "filters": filters}


def results_dict(result) -> dict:
    """Everything emitted in JSON mode, as plain Python data."""
    runs = []
    for r, row in zip(result.records, run_rows(result)):
        row = dict(row)
        row["steps"] = [{"step": s.step, "time": _num(s.time), "mean": _vec(s.mean),
                         "cov_diag": _vec(s.cov_diag), "error": _vec(s.error),
                         "n_eff": _num(s.n_eff), "psi": _num(s.psi),
                         "update_kind": s.update_kind} for s in r.steps]
        runs.append(row)
    return {**summary_dict(result), "steps": step_rows(result), "runs": runs}


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return v


def _write_csv(path: Path, fields, rows):
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(fields), lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: _cell(row.get(k)) for k in fields})


def _dump_json(path: Path, data):
    path.write_text(json.dumps(data, indent=1, sort_keys=False, allow_nan=False) + "\n")


def emit_results(result, out, fmt: str = "csv") -> list[Path]:
    """Write a campaign result under directory ``out``; returns the files written."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        path = out / "results.json"
        _dump_json(path, results_dict(result))
        return [path]
    if fmt != "csv":
        raise ValueError(f"unknown output format {fmt!r}")
    n = result.campaign.scenario.n
    files = [out / "steps.csv", out / "runs.csv", out / "selection.csv", out / "summary.json"]
    _write_csv(files[0], step_fields(n), step_rows(result))
    _write_csv(files[1], RUN_FIELDS, run_rows(result))
    _write_csv(files[2], SELECTION_FIELDS, selection_rows(result))
    _dump_json(files[3], summary_dict(result))
    return files


def load_results(path) -> dict:
    return json.loads(Path(path).read_text())
