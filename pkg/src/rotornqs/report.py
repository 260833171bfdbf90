"""Run reports: per-step records plus enough metadata to reproduce a run."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__

VMC_COLUMNS = ("step", "energy_mean", "energy_std", "grad_norm", "acceptance_rate", "wall_ms")
FOURIER_COLUMNS = ("inv_iter", "lambda", "cg_iters", "residual", "wall_ms")


def rolling_average(values, window: int = 250) -> np.ndarray:
    """Trailing mean over at most ``window`` points (shorter at the start)."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return v
    cs = np.concatenate([[0.0], np.cumsum(v)])
    idx = np.arange(1, v.size + 1)
    lo = np.maximum(idx - window, 0)
    return (cs[idx] - cs[lo]) / (idx - lo)


@dataclass
class RunReport:
    solver: str
    config: dict
    seed: int | None = None
    records: list = field(default_factory=list)
    columns: tuple = ()
    final_energy: float = float("nan")
    final_std: float | None = None
    wall_time: float = 0.0
    extra: dict = field(default_factory=dict)
    version: str = __version__

    def csv_text(self, include_timing: bool = True) -> str:
        cols = [c for c in self.columns if include_timing or c != "wall_ms"]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for rec in self.records:
            w.writerow([_fmt(rec[c]) for c in cols])
        return buf.getvalue()

    def write_csv(self, path, include_timing: bool = True) -> None:
        Path(path).write_text(self.csv_text(include_timing))

    def summary(self) -> dict:
        doc = asdict(self)
        doc.pop("records")
        doc["columns"] = list(self.columns)
        doc["num_records"] = len(self.records)
        return _jsonable(doc)

    def write_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.summary(), indent=2) + "\n")


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj
