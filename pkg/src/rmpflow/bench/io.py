"""Deterministic CSV/JSON writers."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "" if v is None else str(v)


def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])


def jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        # JSON has no inf/nan
        return x if math.isfinite(x) else None
    return obj


def write_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(jsonable(obj), indent=2, sort_keys=True) + "\n")


def write_trajectory(path, traj):
    write_csv(path, traj.csv_header(), traj.rows())


def run_record(run_id, traj=None, **extra):
    rec = {"id": run_id}
    if traj is not None:
        rec.update(status=traj.status, cause=traj.cause, samples=len(traj), final_time=float(traj.t[-1]))
    else:
        rec.update(status=extra.pop("status", "ok"), cause=extra.pop("cause", None))
    rec.update(extra)
    return rec


def metrics_document(scenario, seed, runs, summary):
    return {"scenario": scenario, "seed": int(seed), "runs": runs, "summary": summary}
