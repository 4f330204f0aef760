"""Trajectory records, events, and their CSV / JSON-lines serializations."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

EVENT_NAMES = {1: "collision", 2: "explosion", 3: "boundary"}


@dataclass(frozen=True)
class Event:
    type: str
    t: float
    detail: dict = field(default_factory=dict)

    def to_json(self):
        return json.dumps({"type": self.type, "t": self.t,
                           "detail": self.detail}, sort_keys=True)


@dataclass
class TrajectoryRecord:
    """Time-stamped states plus diagnostics for one simulated path.

    ``matrices`` is populated by matrix-level runs (complex p x p in the
    Hermitian mode), ``eigvecs`` by spectral runs that track H.  ``stats``
    holds per-path scalars (min gap over the whole path, max Lyapunov value,
    clamp count, terminal state and so on).
    """

    times: np.ndarray
    lambdas: np.ndarray
    mingap: np.ndarray | None = None
    lyapunov: np.ndarray | None = None
    boundary: np.ndarray | None = None
    eigvecs: np.ndarray | None = None
    matrices: np.ndarray | None = None
    events: list = field(default_factory=list)
    stats: dict = field(default_factory=dict)

    @property
    def p(self):
        return self.lambdas.shape[1]

    @property
    def terminal(self):
        return self.lambdas[-1]

    def completed(self):
        return not any(e.type in ("collision", "explosion") for e in self.events)


def _fmt(x):
    # repr round-trips doubles exactly, keeping artifacts byte-reproducible
    return repr(float(x))


def write_spectral_csv(record, fileobj):
    """Header: t, lambda_1..lambda_p, mingap, lyapunovU[, h_11..h_pp]."""
    p = record.p
    cols = ["t"] + [f"lambda_{i + 1}" for i in range(p)] + ["mingap", "lyapunovU"]
    with_h = record.eigvecs is not None
    if with_h:
        cols += [f"h_{i + 1}{j + 1}" for i in range(p) for j in range(p)]
    fileobj.write(", ".join(cols) + "\n")
    for r in range(len(record.times)):
        row = [_fmt(record.times[r])]
        row += [_fmt(v) for v in record.lambdas[r]]
        row.append(_fmt(record.mingap[r]))
        row.append(_fmt(record.lyapunov[r]))
        if with_h:
            row += [_fmt(v) for v in record.eigvecs[r].reshape(-1)]
        fileobj.write(", ".join(row) + "\n")


def write_matrix_csv(record, fileobj):
    """Header: t, x_11, x_12, ..., x_pp (upper triangle, row-major).

    Complex entries are written as _re/_im column pairs.
    """
    mats = record.matrices
    p = mats.shape[1]
    is_complex = np.iscomplexobj(mats)
    cols = ["t"]
    for i in range(p):
        for j in range(i, p):
            if is_complex:
                cols += [f"x_{i + 1}{j + 1}_re", f"x_{i + 1}{j + 1}_im"]
            else:
                cols.append(f"x_{i + 1}{j + 1}")
    fileobj.write(", ".join(cols) + "\n")
    for r in range(len(record.times)):
        row = [_fmt(record.times[r])]
        for i in range(p):
            for j in range(i, p):
                if is_complex:
                    row += [_fmt(mats[r, i, j].real), _fmt(mats[r, i, j].imag)]
                else:
                    row.append(_fmt(mats[r, i, j]))
        fileobj.write(", ".join(row) + "\n")


def write_events_jsonl(events, fileobj):
    for e in events:
        fileobj.write(e.to_json() + "\n")
