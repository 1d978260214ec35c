"""CSV datasets and flat-text model summaries used by the command line."""

from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

from .design import Domain
from .kriging import Dataset, KrigingModel


def parse_dataset_csv(text: str) -> Dataset:
    """Header row: input columns named ``x...`` first, then one column per replication.

    Blank replication cells are allowed (ragged replication counts).
    """
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    header = [h.strip() for h in rows[0]]
    n_x = 0
    while n_x < len(header) and header[n_x].lower().startswith("x"):
        n_x += 1
    if n_x == 0 or n_x == len(header):
        raise ValueError("dataset header needs x-columns followed by at least one replication column")
    points, outputs = [], []
    for row in rows[1:]:
        points.append([float(v) for v in row[:n_x]])
        reps = [float(v) for v in row[n_x:] if v.strip()]
        if not reps:
            raise ValueError(f"row {len(points)} has no replication outputs")
        outputs.append(reps)
    return Dataset(np.array(points), tuple(outputs))


def read_dataset_csv(path) -> Dataset:
    return parse_dataset_csv(Path(path).read_text())


def parse_points_csv(text: str) -> np.ndarray:
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    try:
        [float(v) for v in rows[0]]
    except ValueError:
        rows = rows[1:]
    return np.array([[float(v) for v in r] for r in rows])


def model_summary(model: KrigingModel, data_path: str = "") -> str:
    items = {
        "kernel": model.family.value,
        "noise_mode": model.noise_mode.value,
        "process_variance": repr(model.process_variance),
        "length_scale": repr(model.length_scale),
        "beta0": repr(model.beta0_hat),
        "log_likelihood": repr(model.log_likelihood),
        "n_points": model.dataset.size,
        "lower": ",".join(repr(v) for v in model.domain.lower),
        "upper": ",".join(repr(v) for v in model.domain.upper),
    }
    if data_path:
        items["data"] = data_path
    return "".join(f"{k} = {v}\n" for k, v in items.items())


def parse_model_summary(text: str) -> dict:
    out = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def summary_domain(summary: dict) -> Domain:
    lower = tuple(float(v) for v in summary["lower"].split(","))
    upper = tuple(float(v) for v in summary["upper"].split(","))
    return Domain(lower, upper)
