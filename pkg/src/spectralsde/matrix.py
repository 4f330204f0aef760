"""Euler time-stepping of the matrix-level equation

    X' = X + g(X) dB h(X) + h(X) dB^T g(X) + b(X) dt

with g, h, b applied through one eigendecomposition per step, followed by an
explicit symmetrization.  The Hermitian variant runs the same code on the
2p x 2p real embedding with the embedded complex Brownian increment.

No truncation happens at this level: domain excursions of the spectrum are
recorded as diagnostics, since the generalized equations are defined on all
symmetric matrices through the absolute-value extension.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .errors import PreconditionError, SimulationError
from .linalg import SymmetricMatrixState, apply_spectral_function
from .trajectory import Event, TrajectoryRecord


@dataclass(frozen=True)
class MatrixSchemeConfig:
    dt: float
    T: float
    symmetrize: bool = True
    record_stride: int = 1
    overflow: float = 1e9
    eig_tol: float = 1e-11
    eig_sweeps: int = 60

    def __post_init__(self):
        if not (self.dt > 0 and self.T > 0):
            raise ValueError("dt and T must be positive")
        if self.dt > self.T:
            raise ValueError("dt must not exceed T")
        if self.record_stride < 1:
            raise ValueError("record stride must be >= 1")

    @property
    def n_steps(self):
        return int(math.floor(self.T / self.dt + 1e-9))


def step_matrix(x, coeff, db, dt):
    """One Euler step on a real symmetric state."""
    state = x if isinstance(x, SymmetricMatrixState) else \
        SymmetricMatrixState.from_array(x)
    if state.hermitian or coeff.complex_mode:
        raise ValueError("step_matrix is the real-mode step; "
                         "use step_matrix_complex")
    gX = apply_spectral_function(state, coeff.g).entries
    hX = apply_spectral_function(state, coeff.h).entries
    bX = apply_spectral_function(state, coeff.b).entries
    db = np.asarray(db, dtype=np.float64)
    M = gX @ db @ hX
    out = state.entries + M + M.T + bX * dt
    return SymmetricMatrixState.from_array(out)


def step_matrix_complex(x, coeff, dw, dt):
    """One Euler step on a Hermitian state, dW = dB1 + i dB2."""
    state = x if isinstance(x, SymmetricMatrixState) else \
        SymmetricMatrixState.from_array(x, hermitian=True)
    if not state.hermitian:
        raise ValueError("step_matrix_complex needs a Hermitian state")
    gX = apply_spectral_function(state, coeff.g).entries
    hX = apply_spectral_function(state, coeff.h).entries
    bX = apply_spectral_function(state, coeff.b).entries
    dw = np.asarray(dw, dtype=np.complex128)
    M = gX @ dw @ hX
    out = state.entries + M + M.conj().T + bX * dt
    return SymmetricMatrixState.from_array(out, hermitian=True)


def _unembed(mats, p):
    A = (mats[:, :p, :p] + mats[:, p:, p:]) / 2
    B = (mats[:, p:, :p] - mats[:, :p, p:]) / 2
    return A + 1j * B


def simulate_matrix(x0, coeff, noise, config):
    """Matrix-level trajectory driven by a matrix (or complex-matrix) bundle.

    Raises SimulationError on eigensolver failure; an explosion (guard-box
    exit) terminates the path with an event carrying the time stamp.
    """
    state = x0 if isinstance(x0, SymmetricMatrixState) else \
        SymmetricMatrixState.from_array(x0, hermitian=coeff.complex_mode)
    if state.hermitian != coeff.complex_mode:
        raise ValueError("state and coefficients disagree on complex mode")
    want_kind = "complex-matrix" if coeff.complex_mode else "matrix"
    if noise.kind != want_kind:
        raise ValueError(f"noise kind {noise.kind!r} does not match model "
                         f"(expected {want_kind!r})")
    p = state.dim
    if noise.p != p:
        raise ValueError(f"noise bundle p={noise.p} does not match state p={p}")
    n_steps = config.n_steps
    if noise.n < n_steps:
        raise ValueError(f"noise bundle has {noise.n} steps, need {n_steps}")
    if abs(noise.dt - config.dt) > 1e-15 * max(abs(config.dt), 1.0):
        raise ValueError("noise bundle dt does not match scheme dt")

    x_work = state.embedded()
    out = kernels.matrix_path(x_work, coeff.matrix_programs(),
                              coeff.complex_mode, config.dt, n_steps,
                              config.record_stride, noise.seed, noise.stream,
                              config.overflow, config.eig_tol,
                              config.eig_sweeps)
    if "error" in out:
        raise SimulationError(out["error"])

    mats = out["matrices"]
    if coeff.complex_mode:
        mats = _unembed(mats, p)
    lambdas = out["lambdas"]

    events = []
    if out["event"] == kernels.EVENT_EXPLOSION:
        events.append(Event(type="explosion", t=out["event_time"],
                            detail={"guard": config.overflow}))
    lo, hi = coeff.domain.lo, coeff.domain.hi
    min_low = float(np.min(lambdas[:, 0]))
    max_high = float(np.max(lambdas[:, -1]))
    if coeff.domain.bounded and (min_low < lo or max_high > hi):
        events.append(Event(type="boundary", t=float("nan"), detail={
            "min_lowest": min_low, "max_highest": max_high}))

    gaps = (np.min(np.diff(lambdas, axis=1), axis=1) if p > 1
            else np.full(len(lambdas), np.inf))
    with np.errstate(divide="ignore", invalid="ignore"):
        lyap = np.array([_lyapunov_of(row) for row in lambdas])
    stats = {
        "steps_done": out["steps_done"],
        "min_lowest": min_low,
        "max_highest": max_high,
        "min_gap_recorded": float(np.min(gaps)),
    }
    return TrajectoryRecord(times=out["times"], lambdas=lambdas,
                            mingap=gaps, lyapunov=lyap, matrices=mats,
                            events=events, stats=stats)


def _lyapunov_of(lam):
    p = len(lam)
    acc = 0.0
    for i in range(p - 1):
        for j in range(i + 1, p):
            d = lam[j] - lam[i]
            if d <= 0:
                return math.inf
            acc += math.log(d)
    return -acc
