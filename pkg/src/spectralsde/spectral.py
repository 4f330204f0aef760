"""Integrators for the eigenvalue system and the eigenvector flow.

One Euler step of the eigenvalue system is

    l_i' = l_i + 2 g(l_i) h(l_i) dnu_i + beta (b(l_i) + m S_i) dt

with S_i the pairwise repulsion sum and m = 2 in complex mode.  The singular
drift is handled by adaptive bisection: a proposed step is rejected when it
inverts the ordering, brings a gap at or below eps_gap, or moves any gap by
more than half its current value; the step is then split in two with
bridge-consistent noise, down to ``max_halvings`` levels, after which a
collision event is declared (the discrete-scheme stand-in for the first
collision time).

The eigenvector flow advances through the skew-symmetric stochastic
logarithm: H' = H (I + dA + (1/2) diag(dA dA)) followed by projection back
onto the orthogonal group, which keeps the Ito correction structure while
making orthonormality exact at every recorded state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .errors import OrderingError, PreconditionError, SimulationError
from .models import diffusion_vector, eigen_drift
from .noise import NoiseBundle, SharedPath, pair_index
from .linalg import reorthonormalize
from .trajectory import Event, TrajectoryRecord

TRUNCATION_MODES = ("full-truncation", "reflect-reject")


@dataclass(frozen=True)
class SpectralSchemeConfig:
    dt: float
    T: float
    eps_gap: float = 1e-12
    adaptive: bool = True
    max_halvings: int = 20
    truncation: str = "full-truncation"
    record_stride: int = 1
    track_h: bool = False
    gap_move_limit: float = 0.5
    overflow: float = 1e9

    def __post_init__(self):
        if not (self.dt > 0 and self.T > 0):
            raise ValueError("dt and T must be positive")
        if self.dt > self.T:
            raise ValueError("dt must not exceed T")
        if not self.eps_gap > 0:
            raise ValueError("eps_gap must be positive")
        if self.truncation not in TRUNCATION_MODES:
            raise ValueError(f"truncation must be one of {TRUNCATION_MODES}")
        if self.record_stride < 1:
            raise ValueError("record stride must be >= 1")
        if not (0 <= self.max_halvings <= 60):
            raise ValueError("max_halvings must be in [0, 60]")
        if self.dt / 2.0 ** self.max_halvings <= 0.0:
            raise ValueError("dt / 2^max_halvings underflows")

    @property
    def n_steps(self):
        return int(math.floor(self.T / self.dt + 1e-9))


@dataclass(frozen=True)
class EigenvectorLogIncrement:
    """Skew-symmetric increment dA of the stochastic logarithm of H."""

    dA: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.dA, dtype=np.float64)
        if not np.array_equal(a, -a.T):
            raise ValueError("dA must be exactly skew-symmetric")
        object.__setattr__(self, "dA", a)


def _validate_state(lam, coeff, eps_gap):
    lam = np.asarray(lam, dtype=np.float64)
    if lam.ndim != 1 or lam.size < 1:
        raise ValueError("lam must be a non-empty vector")
    if lam.size > 1 and np.min(np.diff(lam)) <= eps_gap:
        raise PreconditionError(
            f"minimum gap {np.min(np.diff(lam)):.3e} not above eps_gap {eps_gap:g}")
    return lam


def _truncation_active(coeff, config):
    return (config.truncation == "full-truncation"
            and coeff.domain.bounded and coeff.positivity_regime)


def step_eigenvalues(lam, coeff, dnu, dt, config=None):
    """One explicit Euler proposal, followed by domain truncation when the
    model's positivity regime applies.  Raises OrderingError if the proposal
    is not strictly ascending (the integrator treats that as a rejection)."""
    config = config or SpectralSchemeConfig(dt=dt, T=dt)
    lam = _validate_state(lam, coeff, config.eps_gap)
    dnu = np.asarray(dnu, dtype=np.float64)
    coefv = diffusion_vector(coeff, lam)
    drift = eigen_drift(coeff, lam)
    out = np.empty_like(lam)
    for i in range(lam.size):
        x = lam[i] + coefv[i] * dnu[i] + drift[i] * dt
        if _truncation_active(coeff, config):
            x = min(max(x, coeff.domain.lo), coeff.domain.hi)
        out[i] = x
    if out.size > 1 and np.any(np.diff(out) <= 0):
        raise OrderingError("proposed step inverts the eigenvalue ordering")
    return out


def build_dA(lam, coeff, dbeta, dt=0.0):
    """Stochastic-logarithm increment from the pair-indexed driver values.

    dbeta is either a flat array over pairs (k < j, lexicographic) or a
    symmetric matrix; dt is carried for signature symmetry with the step
    functions (the Ito correction is applied in step_eigenvectors).
    """
    lam = np.asarray(lam, dtype=np.float64)
    p = lam.size
    if p > 1 and np.min(np.diff(lam)) <= 0:
        raise OrderingError("eigenvalues must be strictly ascending")
    db = np.asarray(dbeta, dtype=np.float64)
    dA = np.zeros((p, p))
    for i in range(p - 1):
        for j in range(i + 1, p):
            v = db[i, j] if db.ndim == 2 else db[pair_index(i, j, p)]
            Gij = coeff.g2(lam[i]) * coeff.h2(lam[j]) + \
                coeff.g2(lam[j]) * coeff.h2(lam[i])
            a = math.sqrt(Gij) / (lam[j] - lam[i]) * v
            dA[i, j] = a
            dA[j, i] = -a
    return EigenvectorLogIncrement(dA=dA)


def step_eigenvectors(H, lam, coeff, dbeta, dt):
    """H' = reorthonormalize(H (I + dA + (1/2) diag(dA dA)))."""
    lam = np.asarray(lam, dtype=np.float64)
    p = lam.size
    inc = build_dA(lam, coeff, dbeta, dt)
    M = np.array(inc.dA)
    for i in range(p):
        acc = 0.0
        for k in range(p):
            if k != i:
                Gik = coeff.g2(lam[i]) * coeff.h2(lam[k]) + \
                    coeff.g2(lam[k]) * coeff.h2(lam[i])
                d = lam[k] - lam[i]
                acc += Gik / (d * d)
        M[i, i] = 1.0 + 0.5 * (-acc * dt)
    return reorthonormalize(np.asarray(H, dtype=np.float64) @ M)


def simulate_spectral(lam0, H0, coeff, noise, config, record_h=None):
    """Simulate the eigenvalue system (and the eigenvectors when H0 is given).

    ``noise`` is a spectral NoiseBundle, a SharedPath over one, or a
    (dnu_array, dbeta_array_or_None) tuple of precomputed increments.
    Stops at T or at the first collision/explosion event, which is recorded
    in ``events``, never silently clamped away.
    """
    lam0 = np.asarray(lam0, dtype=np.float64)
    p = lam0.size
    if p > 1 and np.min(np.diff(lam0)) <= 0:
        raise PreconditionError("initial eigenvalues must be strictly ascending")
    if coeff.domain.bounded:
        for v in lam0:
            if not coeff.domain.contains(v):
                raise PreconditionError(
                    f"initial value {v:g} outside domain {coeff.domain.label()}")
    track_h = H0 is not None
    if track_h:
        H0 = np.asarray(H0, dtype=np.float64)
        if H0.shape != (p, p):
            raise ValueError("H0 must be p x p")
        H0 = reorthonormalize(H0)

    noise_nu = noise_beta = None
    if isinstance(noise, SharedPath):
        if config.adaptive:
            raise SimulationError(
                "precomputed shared-path noise requires adaptive=False")
        arr = noise.increments()
        dt = noise.dt
        n_steps = noise.n_steps
        seed, stream = noise.base.seed, noise.base.stream
        noise_nu = np.ascontiguousarray(arr[:, :p])
        if track_h:
            noise_beta = np.ascontiguousarray(arr[:, p:])
    elif isinstance(noise, tuple):
        if config.adaptive:
            raise SimulationError(
                "precomputed noise arrays require adaptive=False")
        noise_nu = np.ascontiguousarray(noise[0], dtype=np.float64)
        noise_beta = None if noise[1] is None else \
            np.ascontiguousarray(noise[1], dtype=np.float64)
        dt = config.dt
        n_steps = min(config.n_steps, noise_nu.shape[0])
        seed, stream = 0, 0
    else:
        if noise.kind != "spectral":
            raise ValueError("simulate_spectral needs a spectral noise bundle")
        if noise.p != p:
            raise ValueError(f"noise bundle p={noise.p} does not match state p={p}")
        dt = config.dt
        if abs(noise.dt - dt) > 1e-15 * max(abs(dt), 1.0):
            raise ValueError("noise bundle dt does not match scheme dt")
        n_steps = config.n_steps
        if noise.n < n_steps:
            raise ValueError(f"noise bundle has {noise.n} steps, need {n_steps}")
        seed, stream = noise.seed, noise.stream

    if p > 1 and config.eps_gap >= float(np.min(np.diff(lam0))):
        raise PreconditionError("eps_gap must be below the initial minimum gap")

    truncate = _truncation_active(coeff, config)
    reject_domain = (config.truncation == "reflect-reject"
                     and coeff.domain.bounded)

    out = kernels.spectral_path(
        lam0, H0 if track_h else None, coeff.programs(), coeff.beta,
        coeff.interaction_multiplier, coeff.domain.lo, coeff.domain.hi,
        truncate, reject_domain, dt, n_steps, config.eps_gap,
        config.adaptive, config.max_halvings, config.gap_move_limit,
        config.record_stride, seed, stream, config.overflow,
        noise_nu, noise_beta)

    events = []
    if out["event"] == kernels.EVENT_COLLISION:
        events.append(Event(type="collision", t=out["event_time"], detail={
            "gap": out["event_gap"], "halving_level": out["event_level"]}))
    elif out["event"] == kernels.EVENT_EXPLOSION:
        events.append(Event(type="explosion", t=out["event_time"], detail={
            "halving_level": out["event_level"]}))
    if coeff.domain.bounded and not truncate:
        if out["min_lowest"] < coeff.domain.lo or out["max_highest"] > coeff.domain.hi:
            events.append(Event(type="boundary", t=float("nan"), detail={
                "min_lowest": out["min_lowest"],
                "max_highest": out["max_highest"]}))

    stats = {
        "steps_done": out["steps_done"],
        "clamp_count": out["clamp_count"],
        "min_pre_clamp": out["min_pre_clamp"],
        "min_lowest": out["min_lowest"],
        "max_highest": out["max_highest"],
        "min_gap_overall": out["min_gap_overall"],
        "max_lyapunov": out["max_lyapunov"],
    }
    return TrajectoryRecord(times=out["times"], lambdas=out["lambdas"],
                            mingap=out["mingap"], lyapunov=out["lyapunov"],
                            boundary=out["boundary"], eigvecs=out["eigvecs"],
                            events=events, stats=stats)
