"""Deterministic, seedable Brownian increment generation.

Three bundle kinds:

* ``matrix``: p^2 scalar streams per step, one per matrix entry (row-major).
* ``spectral``: p + p(p-1)/2 streams per step: first the p driving motions
  nu_i, then the symmetric pair motions beta_{kj} for k < j in lexicographic
  order.  beta_{jk} is the same motion as beta_{kj}: only the k < j slot is
  ever drawn; use ``pair_index`` to address it.
* ``complex-matrix``: 2 p^2 streams (real parts first, then imaginary parts).

Every scalar increment is a pure function of (seed, stream id, step index,
substream index) through the counter-based generator in the backend kernels,
so identical parameters reproduce bit-identical increments and independent
paths can be generated in any order or in parallel.  The substream keying
does not depend on the bundle kind, which makes the documented p = 1
cross-level identification d nu_1 = d B_11 hold exactly.

Shared paths for strong-convergence runs are built from a fixed binary tree:
leaf increments at depth ``max_level`` are independent keyed draws, and the
increment of any coarser dyadic interval is defined as the sum of its two
children.  Refinement therefore telescopes exactly (bit for bit), and the
conditional law of the children given their parent is the Brownian bridge
midpoint law.  ``max_level`` is part of the path identity: changing it
changes the realized path, not just its resolution.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace

import numpy as np

from ._backend import kernels

KINDS = ("matrix", "spectral", "complex-matrix")
_KIND_CODES = {"matrix": 0, "spectral": 1, "complex-matrix": 2}

DUMP_MAGIC = b"SSDENOIS"
DUMP_VERSION = 1

_U64_MAX = (1 << 64) - 1


def _check_u64(name, value):
    v = int(value)
    if not 0 <= v <= _U64_MAX:
        raise ValueError(f"{name} must fit in an unsigned 64-bit integer")
    return v


@dataclass(frozen=True)
class NoiseBundle:
    """Identity of one reproducible increment source."""

    kind: str
    p: int
    n: int
    dt: float
    seed: int
    stream: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.p < 1:
            raise ValueError("p must be >= 1")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        object.__setattr__(self, "seed", _check_u64("seed", self.seed))
        object.__setattr__(self, "stream", _check_u64("stream", self.stream))

    @property
    def n_streams(self):
        p = self.p
        if self.kind == "matrix":
            return p * p
        if self.kind == "spectral":
            return p + p * (p - 1) // 2
        return 2 * p * p


def derive_stream(seed, path_index):
    """Stream id for an indexed path.

    The identity map: streams are independent because the stream id is half
    of the counter-based generator key, so no further mixing is needed.
    Injective by construction and stable across runs.
    """
    _check_u64("seed", seed)
    idx = int(path_index)
    if idx < 0:
        raise ValueError("path index must be >= 0")
    return _check_u64("path index", idx)


def pair_index(k, j, p):
    """Flat index of the pair stream beta_{kj}; symmetric in (k, j)."""
    if k == j:
        raise ValueError("pair stream requires two distinct indices")
    if k > j:
        k, j = j, k
    if not (0 <= k < j < p):
        raise ValueError(f"pair ({k}, {j}) out of range for p={p}")
    return k * p - k * (k + 1) // 2 + (j - k - 1)


def draw_increments(bundle, step):
    """All scalar increments for one step, each N(0, dt), shape (n_streams,)."""
    if not 0 <= step < bundle.n:
        raise IndexError(f"step {step} out of range [0, {bundle.n})")
    z = kernels.fill_step_normals(bundle.seed, bundle.stream, step,
                                  bundle.n_streams)
    return z * np.sqrt(bundle.dt)


def matrix_increment(bundle, step):
    """The p x p (or complex p x p) matrix increment for one step."""
    v = draw_increments(bundle, step)
    p = bundle.p
    if bundle.kind == "matrix":
        return v.reshape(p, p)
    if bundle.kind == "complex-matrix":
        return v[:p * p].reshape(p, p) + 1j * v[p * p:].reshape(p, p)
    raise ValueError("matrix_increment needs a matrix-kind bundle")


def spectral_increments(bundle, step):
    """(d nu, d beta) for one step of a spectral bundle.

    d beta comes back as a full symmetric p x p array with zero diagonal.
    """
    if bundle.kind != "spectral":
        raise ValueError("spectral_increments needs a spectral bundle")
    v = draw_increments(bundle, step)
    p = bundle.p
    dnu = v[:p]
    dbeta = np.zeros((p, p))
    q = p
    for k in range(p - 1):
        for j in range(k + 1, p):
            dbeta[k, j] = v[q]
            dbeta[j, k] = v[q]
            q += 1
    return dnu, dbeta


@dataclass(frozen=True)
class SharedPath:
    """A refinable view of one Brownian path at dyadic resolution.

    Level ``level`` has step size ``base.dt / 2**level``.  All levels of one
    SharedPath are consistent realizations of the same path.
    """

    base: NoiseBundle
    level: int = 0
    max_level: int = 12

    def __post_init__(self):
        if self.level < 0:
            raise ValueError("level must be >= 0")
        if self.max_level < 0 or self.max_level > 40:
            raise ValueError("max_level must be in [0, 40]")
        if self.level > self.max_level:
            raise ValueError(
                f"level {self.level} beyond configured max level {self.max_level}")

    @property
    def dt(self):
        return self.base.dt / float(2 ** self.level)

    @property
    def n_steps(self):
        return self.base.n * 2 ** self.level

    def refine(self):
        """One level finer; coarse increments are preserved exactly."""
        if self.level + 1 > self.max_level:
            raise ValueError(
                f"refinement beyond configured max level {self.max_level}")
        return replace(self, level=self.level + 1)

    def increments(self):
        """Increment array of shape (n_steps, n_streams) at this level.

        Column j is substream j.  Summing rows 2i and 2i+1 of level l+1
        reproduces row i of level l bit for bit (adjacent pairwise sums are
        the documented accumulation order).
        """
        nb = self.base
        leaves_per_step = 2 ** self.max_level
        count = nb.n * leaves_per_step
        scale = np.sqrt(nb.dt / leaves_per_step)
        cols = []
        for j in range(nb.n_streams):
            col = kernels.fill_leaf_normals(nb.seed, nb.stream, j, 0, count)
            col = col * scale
            folds = self.max_level - self.level
            for _ in range(folds):
                col = col[0::2] + col[1::2]
            cols.append(col)
        return np.column_stack(cols)


def dump_noise(bundle, fileobj):
    """Binary export: header then one little-endian f64 row of streams per step."""
    header = struct.pack("<8sIIIQdQ", DUMP_MAGIC, DUMP_VERSION, bundle.p,
                         _KIND_CODES[bundle.kind], bundle.n, bundle.dt,
                         bundle.seed)
    fileobj.write(header)
    for step in range(bundle.n):
        row = draw_increments(bundle, step)
        fileobj.write(struct.pack(f"<{len(row)}d", *row))


def load_noise(fileobj):
    """Parse a dump back into (header dict, increments array)."""
    raw = fileobj.read(struct.calcsize("<8sIIIQdQ"))
    magic, version, p, kind_code, n, dt, seed = struct.unpack("<8sIIIQdQ", raw)
    if magic != DUMP_MAGIC:
        raise ValueError("not a noise dump (bad magic)")
    if version != DUMP_VERSION:
        raise ValueError(f"unsupported dump version {version}")
    kind = {v: k for k, v in _KIND_CODES.items()}[kind_code]
    header = {"p": p, "kind": kind, "n": n, "dt": dt, "seed": seed}
    tmp = NoiseBundle(kind=kind, p=p, n=n, dt=dt, seed=seed)
    data = np.frombuffer(fileobj.read(8 * n * tmp.n_streams), dtype="<f8")
    return header, data.reshape(n, tmp.n_streams).copy()
