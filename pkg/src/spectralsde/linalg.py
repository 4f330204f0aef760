"""Dense symmetric/Hermitian eigendecomposition and functional calculus.

The eigensolver is a self-contained cyclic Jacobi rotation method (hot path
in the compiled backend); no LAPACK is used at runtime.  Hermitian matrices
are handled through their 2p x 2p real embedding [[A, -B], [B, A]], which is
an algebra homomorphism, so functional calculus commutes with embedding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .errors import DegenerateMatrixError, EigenConvergenceError, OrderingError

DEFAULT_EIG_TOL = 1e-12
DEFAULT_ORTHO_TOL = 1e-10


@dataclass(frozen=True)
class SymmetricMatrixState:
    """A symmetric (or Hermitian) p x p matrix value of the process.

    Symmetry is exact: the constructor rejects any entry with
    entries[i, j] != conj(entries[j, i]).  Use ``from_array`` to symmetrize
    arbitrary input first.
    """

    entries: np.ndarray
    hermitian: bool = False

    def __post_init__(self):
        a = np.asarray(self.entries)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise ValueError(f"expected a square matrix, got shape {a.shape}")
        if self.hermitian:
            a = np.asarray(a, dtype=np.complex128)
            if not np.array_equal(a, a.conj().T):
                raise ValueError("entries are not exactly Hermitian")
        else:
            a = np.asarray(a, dtype=np.float64)
            if not np.array_equal(a, a.T):
                raise ValueError("entries are not exactly symmetric")
        a = a.copy()
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @classmethod
    def from_array(cls, a, hermitian=False):
        a = np.asarray(a, dtype=np.complex128 if hermitian else np.float64)
        sym = (a + a.conj().T) / 2 if hermitian else (a + a.T) / 2
        return cls(entries=sym, hermitian=hermitian)

    @property
    def dim(self):
        return self.entries.shape[0]

    def embedded(self):
        """Real 2p x 2p embedding [[A, -B], [B, A]] of a Hermitian matrix."""
        if not self.hermitian:
            return np.array(self.entries, dtype=np.float64)
        A = self.entries.real
        B = self.entries.imag
        return np.block([[A, -B], [B, A]])


@dataclass(frozen=True)
class SpectralState:
    """Ascending eigenvalues plus an orthonormal matrix of column eigenvectors."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    ortho_tol: float = DEFAULT_ORTHO_TOL

    def __post_init__(self):
        lam = np.asarray(self.eigenvalues, dtype=np.float64)
        H = np.asarray(self.eigenvectors, dtype=np.float64)
        p = lam.shape[0]
        if H.shape != (p, p):
            raise ValueError(f"eigenvector matrix shape {H.shape} != ({p}, {p})")
        if np.any(np.diff(lam) < 0):
            raise OrderingError("eigenvalues must be ascending")
        err = np.linalg.norm(H.T @ H - np.eye(p))
        if err > self.ortho_tol:
            raise DegenerateMatrixError(
                f"eigenvector matrix not orthonormal: ||H'H - I|| = {err:.3e}")
        object.__setattr__(self, "eigenvalues", lam.copy())
        object.__setattr__(self, "eigenvectors", H.copy())

    @property
    def dim(self):
        return self.eigenvalues.shape[0]

    @property
    def min_gap(self):
        if self.dim < 2:
            return np.inf
        return float(np.min(np.diff(self.eigenvalues)))

    def strictly_ordered(self, eps=0.0):
        return self.dim < 2 or self.min_gap > eps


def eigendecompose(x, tol=DEFAULT_EIG_TOL, max_sweeps=50):
    """Diagonalize a symmetric matrix: x = H diag(lam) H^T.

    Eigenvalues come back ascending; each eigenvector column is
    sign-normalized (largest-magnitude entry positive, ties broken by lowest
    row index).  Raises EigenConvergenceError if the Jacobi sweeps stall.
    """
    if isinstance(x, SymmetricMatrixState):
        if x.hermitian:
            raise ValueError("eigendecompose takes real symmetric input; "
                             "use hermitian_eigenvalues for Hermitian states")
        a = x.entries
    else:
        a = np.asarray(x, dtype=np.float64)
        if not np.array_equal(a, a.T):
            raise ValueError("matrix is not exactly symmetric")
    if tol <= 0:
        raise ValueError("tol must be positive")
    lam, H, resid, converged = kernels.jacobi_eigh(a, tol, max_sweeps)
    if not converged:
        raise EigenConvergenceError(resid, max_sweeps)
    return SpectralState(eigenvalues=lam, eigenvectors=H)


def hermitian_eigenvalues(x, tol=DEFAULT_EIG_TOL, max_sweeps=60):
    """Ascending eigenvalues of a Hermitian state via the real embedding."""
    if not (isinstance(x, SymmetricMatrixState) and x.hermitian):
        x = SymmetricMatrixState.from_array(x, hermitian=True)
    lam, _, resid, converged = kernels.jacobi_eigh(x.embedded(), tol, max_sweeps)
    if not converged:
        raise EigenConvergenceError(resid, max_sweeps)
    return lam[::2].copy()  # embedding doubles each eigenvalue


def apply_spectral_function(x, f, tol=DEFAULT_EIG_TOL):
    """Functional calculus f(X) = H f(diag) H^T through one decomposition."""
    state = x if isinstance(x, SymmetricMatrixState) else \
        SymmetricMatrixState(np.asarray(x, dtype=np.float64))
    if state.hermitian:
        emb = SymmetricMatrixState(state.embedded())
        out = apply_spectral_function(emb, f, tol=tol).entries
        p = state.dim
        A = (out[:p, :p] + out[p:, p:]) / 2
        B = (out[p:, :p] - out[:p, p:]) / 2
        return SymmetricMatrixState.from_array(A + 1j * B, hermitian=True)
    dec = eigendecompose(state.entries, tol=tol)
    fvals = np.array([float(f(v)) for v in dec.eigenvalues])
    H = dec.eigenvectors
    out = (H * fvals) @ H.T
    return SymmetricMatrixState.from_array(out)


def reorthonormalize(h, tol=1e-13, max_iter=40):
    """Orthogonal polar factor of h, the nearest orthogonal matrix.

    Newton-Schulz iteration; requires ||h^T h - I||_F < 0.5.
    """
    a = np.asarray(h, dtype=np.float64)
    p = a.shape[0]
    err0 = np.linalg.norm(a.T @ a - np.eye(p))
    if not np.isfinite(err0) or err0 >= 0.5:
        raise DegenerateMatrixError(
            f"input too far from orthogonal: ||H'H - I|| = {err0:.3e}")
    q, err, ok = kernels.polar_factor(a, tol, max_iter)
    if not ok:
        raise DegenerateMatrixError(
            f"polar iteration did not reach tolerance (residual {err:.3e})")
    return q
