"""Serialization helpers shared by the records and the command line."""

from __future__ import annotations

import csv
import dataclasses
import json
import math

import numpy as np


def to_jsonable(obj):
    """Recursively convert records, numpy values, and complex numbers to JSON types.

    Non-finite floats become strings so the output stays strict JSON.
    """
    if obj is None or isinstance(obj, (bool, int, str)):
        return obj
    if isinstance(obj, float):  # also catches np.float64, a float subclass
        return float(obj) if math.isfinite(obj) else repr(float(obj))
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return to_jsonable(float(obj))
    if isinstance(obj, np.complexfloating):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(x) for x in obj.tolist()]
    if hasattr(obj, "to_dict"):
        return to_jsonable(obj.to_dict())
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, set)):
        return [to_jsonable(x) for x in obj]
    return str(obj)


def canonical_json(obj) -> str:
    """Deterministic strict-JSON text: sorted keys, fixed layout, trailing newline."""
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(x) if isinstance(x, float) else x for x in row])


def eigenflow_rows(family, samples: int = 101):
    """Rows ``(t, lambda_1 ... lambda_n)`` of the eigenvalue flow."""
    ts = np.linspace(0.0, family.horizon, samples)
    rows = []
    for t in ts:
        w = np.linalg.eigvalsh(family.at(float(t)).entries)
        rows.append([float(t)] + [float(x) for x in w])
    return rows


def write_eigenflow_csv(family, path, samples: int = 101) -> None:
    header = ["t"] + [f"lambda_{j + 1}" for j in range(family.dim)]
    write_csv(path, header, eigenflow_rows(family, samples))


def write_unitarity_drift_csv(propagator, path) -> None:
    """Per-grid-point drift of ``U_k* U_k`` from the identity."""
    eye = np.eye(propagator.dim)
    rows = []
    for t, u in zip(propagator.grid, propagator.unitaries):
        rows.append([float(t), float(np.max(np.abs(u.conj().T @ u - eye)))])
    write_csv(path, ["t", "unitarity_defect"], rows)


def write_singular_values_csv(singular_values, path) -> None:
    rows = [[j, float(s)] for j, s in enumerate(np.asarray(singular_values))]
    write_csv(path, ["index", "sigma"], rows)
