# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled compute kernels.

Bit-for-bit mirror of ``spectralsde._pykernels``; that module's docstring is
the contract (RNG keying, operation order).  Compiled with -ffp-contract=off
so both backends produce identical doubles on one platform.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, NAN, fabs, log, sqrt
from libc.stdint cimport int32_t, int64_t, uint64_t

cnp.import_array()

cdef extern from *:
    ctypedef unsigned long long uint128 "unsigned __int128"

BACKEND_NAME = "ext"

DEF MAXP = 64          # largest matrix order handled by the kernels
DEF MAXSTACK = 16      # scalar-program stack depth

cdef uint64_t PHILOX_M0 = 0xD2E7470EE14C6C93ULL
cdef uint64_t PHILOX_M1 = 0xCA5A826395121157ULL
cdef uint64_t PHILOX_W0 = 0x9E3779B97F4A7C15ULL
cdef uint64_t PHILOX_W1 = 0xBB67AE8584CAA73BULL

PURPOSE_STEP = 0
PURPOSE_LEAF = 1
PURPOSE_BRIDGE = 2

cdef double INV_2_53 = 2.0 ** -53


cdef inline void _philox_block(uint64_t k0, uint64_t k1, uint64_t c0,
                               uint64_t c1, uint64_t c2, uint64_t c3,
                               uint64_t* out) noexcept nogil:
    cdef int r
    cdef uint64_t hi0, lo0, hi1, lo1
    cdef uint128 p0, p1
    for r in range(10):
        p0 = <uint128>PHILOX_M0 * c0
        p1 = <uint128>PHILOX_M1 * c2
        hi0 = <uint64_t>(p0 >> 64)
        lo0 = <uint64_t>p0
        hi1 = <uint64_t>(p1 >> 64)
        lo1 = <uint64_t>p1
        c0 = hi1 ^ c1 ^ k0
        c1 = lo1
        c2 = hi0 ^ c3 ^ k1
        c3 = lo0
        k0 = k0 + PHILOX_W0
        k1 = k1 + PHILOX_W1
    out[0] = c0
    out[1] = c1
    out[2] = c2
    out[3] = c3


def philox4x64(k0, k1, c0, c1, c2, c3):
    """One Philox4x64-10 block. Returns the four 64-bit output words."""
    cdef uint64_t out[4]
    _philox_block(<uint64_t>(k0 & 0xFFFFFFFFFFFFFFFF),
                  <uint64_t>(k1 & 0xFFFFFFFFFFFFFFFF),
                  <uint64_t>(c0 & 0xFFFFFFFFFFFFFFFF),
                  <uint64_t>(c1 & 0xFFFFFFFFFFFFFFFF),
                  <uint64_t>(c2 & 0xFFFFFFFFFFFFFFFF),
                  <uint64_t>(c3 & 0xFFFFFFFFFFFFFFFF), out)
    return (int(out[0]), int(out[1]), int(out[2]), int(out[3]))


cdef double _norm_ppf(double u) noexcept nogil:
    cdef double q = u - 0.5
    cdef double r, num, den, z
    if fabs(q) <= 0.425:
        r = 0.180625 - q * q
        num = (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r
                    + 6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r
                  + 1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r
                + 1.3314166789178437745e2) * r + 3.3871328727963666080e0)
        den = (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r
                    + 3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r
                  + 5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r
                + 4.2313330701600911252e1) * r + 1.0)
        return q * num / den
    r = u if q < 0.0 else 1.0 - u
    r = sqrt(-log(r))
    if r <= 5.0:
        r = r - 1.6
        num = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r
                    + 2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r
                  + 3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r
                + 4.63033784615654529590e0) * r + 1.42343711074968357734e0)
        den = (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r
                    + 1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r
                  + 6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r
                + 2.05319162663775882187e0) * r + 1.0)
    else:
        r = r - 5.0
        num = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r
                    + 1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r
                  + 2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r
                + 5.46378491116411436990e0) * r + 6.65790464350110377720e0)
        den = (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r
                    + 1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r
                  + 1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r
                + 5.99832206555887937690e-1) * r + 1.0)
    z = num / den
    return -z if q < 0.0 else z


def norm_ppf(double u):
    """Inverse standard normal CDF, AS241 (PPND16) rational approximation."""
    return _norm_ppf(u)


cdef inline double _raw_normal(uint64_t seed, uint64_t stream, uint64_t c0,
                               uint64_t c1, uint64_t c2, uint64_t c3) noexcept nogil:
    cdef uint64_t out[4]
    cdef double u
    _philox_block(seed, stream, c0, c1, c2, c3, out)
    u = (<double>(out[0] >> 11) + 0.5) * INV_2_53
    return _norm_ppf(u)


def normal_step(seed, stream, step, substream):
    """Standard normal for one per-step scalar draw."""
    return _raw_normal(<uint64_t>seed, <uint64_t>stream, <uint64_t>step,
                       <uint64_t>substream, 0, 0)


def normal_leaf(seed, stream, leaf, substream):
    """Standard normal for one shared-path tree leaf."""
    return _raw_normal(<uint64_t>seed, <uint64_t>stream, <uint64_t>leaf,
                       <uint64_t>substream, 1, 0)


def normal_bridge(seed, stream, step, substream, level, offset):
    """Standard normal for the bridge midpoint of an in-step bisection."""
    return _raw_normal(<uint64_t>seed, <uint64_t>stream, <uint64_t>step,
                       <uint64_t>substream, <uint64_t>(2 | (level << 8)),
                       <uint64_t>offset)


def fill_step_normals(seed, stream, step, n_sub):
    """All substream draws for one step, scaled by nothing (unit variance)."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n_sub, dtype=np.float64)
    cdef uint64_t s = <uint64_t>seed, st = <uint64_t>stream, k = <uint64_t>step
    cdef int64_t j
    for j in range(n_sub):
        out[j] = _raw_normal(s, st, k, <uint64_t>j, 0, 0)
    return out


def fill_leaf_normals(seed, stream, substream, leaf0, count):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(count, dtype=np.float64)
    cdef uint64_t s = <uint64_t>seed, st = <uint64_t>stream
    cdef uint64_t sub = <uint64_t>substream, l0 = <uint64_t>leaf0
    cdef int64_t i
    for i in range(count):
        out[i] = _raw_normal(s, st, l0 + <uint64_t>i, sub, 1, 0)
    return out


# ---------------------------------------------------------------------------
# Scalar coefficient programs.

OP_X = 0
OP_ADD = 1
OP_SUB = 2
OP_MUL = 3
OP_DIV = 4
OP_NEG = 5
OP_SQRT = 6
OP_ABS = 7
OP_CONST_BASE = 8


cdef double _eval_program(const int32_t* codes, int ncode,
                          const double* consts, double x) noexcept nogil:
    cdef double stack[MAXSTACK]
    cdef int top = -1
    cdef int i, c
    for i in range(ncode):
        c = codes[i]
        if c >= 8:
            top += 1
            stack[top] = consts[c - 8]
        elif c == 0:
            top += 1
            stack[top] = x
        elif c == 1:
            top -= 1
            stack[top] = stack[top] + stack[top + 1]
        elif c == 2:
            top -= 1
            stack[top] = stack[top] - stack[top + 1]
        elif c == 3:
            top -= 1
            stack[top] = stack[top] * stack[top + 1]
        elif c == 4:
            top -= 1
            stack[top] = stack[top] / stack[top + 1]
        elif c == 5:
            stack[top] = -stack[top]
        elif c == 6:
            stack[top] = sqrt(stack[top])
        else:
            stack[top] = fabs(stack[top])
    return stack[0]


def eval_program(codes, consts, double x):
    cdef cnp.ndarray[cnp.int32_t, ndim=1] c = np.ascontiguousarray(codes, dtype=np.int32)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] k = np.ascontiguousarray(consts, dtype=np.float64)
    return _eval_program(<const int32_t*>c.data, c.shape[0],
                         <const double*>k.data, x)


# ---------------------------------------------------------------------------
# Cyclic Jacobi eigensolver.

cdef int _jacobi_core(double* A, double* V, int p, double tol, int max_sweeps,
                      double* resid_out) noexcept nogil:
    """Diagonalize symmetric A in place, rotations accumulated into V.

    Returns 1 on convergence. A and V are p*p row-major.
    """
    cdef int i, j, k, sweep
    cdef double s, normf, off, apq, theta, t, c, sn, aii, ajj, aik, ajk, vki, vkj
    for i in range(p):
        for j in range(p):
            V[i * p + j] = 1.0 if i == j else 0.0
    if p == 1:
        resid_out[0] = 0.0
        return 1
    s = 0.0
    for i in range(p):
        for j in range(p):
            s += A[i * p + j] * A[i * p + j]
    normf = sqrt(s)
    if normf == 0.0:
        resid_out[0] = 0.0
        return 1
    s = 0.0
    for i in range(p - 1):
        for j in range(i + 1, p):
            s += A[i * p + j] * A[i * p + j]
    off = sqrt(2.0 * s)
    cdef int converged = 0
    for sweep in range(max_sweeps):
        if off <= tol * normf:
            converged = 1
            break
        for i in range(p - 1):
            for j in range(i + 1, p):
                apq = A[i * p + j]
                if apq == 0.0:
                    continue
                theta = (A[j * p + j] - A[i * p + i]) / (2.0 * apq)
                t = 1.0 / (fabs(theta) + sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / sqrt(t * t + 1.0)
                sn = t * c
                aii = A[i * p + i]
                ajj = A[j * p + j]
                A[i * p + i] = aii - t * apq
                A[j * p + j] = ajj + t * apq
                A[i * p + j] = 0.0
                A[j * p + i] = 0.0
                for k in range(p):
                    if k != i and k != j:
                        aik = A[i * p + k]
                        ajk = A[j * p + k]
                        A[i * p + k] = c * aik - sn * ajk
                        A[k * p + i] = A[i * p + k]
                        A[j * p + k] = sn * aik + c * ajk
                        A[k * p + j] = A[j * p + k]
                for k in range(p):
                    vki = V[k * p + i]
                    vkj = V[k * p + j]
                    V[k * p + i] = c * vki - sn * vkj
                    V[k * p + j] = sn * vki + c * vkj
        s = 0.0
        for i in range(p - 1):
            for j in range(i + 1, p):
                s += A[i * p + j] * A[i * p + j]
        off = sqrt(2.0 * s)
    if not converged:
        converged = 1 if off <= tol * normf else 0
    resid_out[0] = off / normf
    return converged


cdef void _jacobi_sort_sign(double* A, double* V, int p, double* lam,
                            double* H) noexcept nogil:
    """Ascending stable sort of eigenpairs plus column sign normalization."""
    cdef int order[MAXP]
    cdef int i, j, r, oi, best, src, c0
    cdef double key, bestval, av, sgn
    for i in range(p):
        order[i] = i
    for i in range(1, p):
        oi = order[i]
        key = A[oi * p + oi]
        j = i - 1
        while j >= 0 and A[order[j] * p + order[j]] > key:
            order[j + 1] = order[j]
            j -= 1
        order[j + 1] = oi
    for c0 in range(p):
        src = order[c0]
        lam[c0] = A[src * p + src]
        best = 0
        bestval = fabs(V[src])
        for r in range(1, p):
            av = fabs(V[r * p + src])
            if av > bestval:
                bestval = av
                best = r
        sgn = -1.0 if V[best * p + src] < 0.0 else 1.0
        for r in range(p):
            H[r * p + c0] = sgn * V[r * p + src]


def jacobi_eigh(a, double tol=1e-12, int max_sweeps=50):
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns (eigenvalues ascending, eigenvector columns, relative off-diagonal
    residual, converged flag).  Columns are sign-normalized: the entry of
    largest magnitude (lowest row index on ties) is made non-negative.
    """
    cdef cnp.ndarray[cnp.float64_t, ndim=2] A = np.array(a, dtype=np.float64, order="C")
    cdef int p = A.shape[0]
    if p > MAXP:
        raise ValueError(f"matrix order {p} exceeds kernel limit {MAXP}")
    cdef cnp.ndarray[cnp.float64_t, ndim=2] V = np.empty((p, p), dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] lam = np.empty(p, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] H = np.empty((p, p), dtype=np.float64)
    cdef double resid = 0.0
    cdef int conv
    conv = _jacobi_core(<double*>A.data, <double*>V.data, p, tol, max_sweeps, &resid)
    _jacobi_sort_sign(<double*>A.data, <double*>V.data, p,
                      <double*>lam.data, <double*>H.data)
    return lam, H, resid, bool(conv)


cdef int _polar_core(double* Y, int p, double tol, int max_iter,
                     double* scratch, double* err_out) noexcept nogil:
    """Newton-Schulz iteration toward the orthogonal polar factor, in place.

    scratch must hold 3*p*p doubles. Returns 1 when the final residual is
    at most 1e-12.
    """
    cdef double* T = scratch
    cdef double* M = scratch + p * p
    cdef double* Yn = scratch + 2 * p * p
    cdef int i, j, k, it
    cdef double acc, e, s, err
    err = INFINITY
    for it in range(max_iter):
        for i in range(p):
            for j in range(p):
                acc = 0.0
                for k in range(p):
                    acc += Y[k * p + i] * Y[k * p + j]
                T[i * p + j] = acc
        s = 0.0
        for i in range(p):
            for j in range(p):
                e = T[i * p + j] - 1.0 if i == j else T[i * p + j]
                s += e * e
        err = sqrt(s)
        if err <= tol:
            break
        for i in range(p):
            for j in range(p):
                M[i * p + j] = 1.5 - 0.5 * T[i * p + j] if i == j else -0.5 * T[i * p + j]
        for i in range(p):
            for j in range(p):
                acc = 0.0
                for k in range(p):
                    acc += Y[i * p + k] * M[k * p + j]
                Yn[i * p + j] = acc
        for i in range(p * p):
            Y[i] = Yn[i]
    err_out[0] = err
    return 1 if err <= 1e-12 else 0


def polar_factor(h, double tol=1e-13, int max_iter=40):
    """Orthogonal polar factor via Newton-Schulz iteration.

    Requires ||H^T H - I||_F < 0.5.  Returns (Q, final residual, ok flag).
    """
    cdef cnp.ndarray[cnp.float64_t, ndim=2] Y = np.array(h, dtype=np.float64, order="C")
    cdef int p = Y.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] scratch = np.empty(3 * p * p, dtype=np.float64)
    cdef double err = 0.0
    cdef int ok
    ok = _polar_core(<double*>Y.data, p, tol, max_iter, <double*>scratch.data, &err)
    return Y, err, bool(ok)


# ---------------------------------------------------------------------------
# Eigenvalue system right-hand side.

cdef struct Programs:
    const int32_t* gc
    int gn
    const double* gk
    const int32_t* hc
    int hn
    const double* hk
    const int32_t* bc
    int bn
    const double* bk
    const int32_t* g2c
    int g2n
    const double* g2k
    const int32_t* h2c
    int h2n
    const double* h2k


cdef class _ProgSet:
    """Keeps the five compiled programs alive and exposes their pointers."""
    cdef object arrays
    cdef Programs progs

    def __init__(self, progs):
        self.arrays = []
        cdef cnp.ndarray[cnp.int32_t, ndim=1] c
        cdef cnp.ndarray[cnp.float64_t, ndim=1] k
        ptrs = []
        for codes, consts in progs:
            c = np.ascontiguousarray(codes, dtype=np.int32)
            k = np.ascontiguousarray(consts, dtype=np.float64)
            if k.shape[0] == 0:
                k = np.zeros(1, dtype=np.float64)
            self.arrays.append((c, k))
            ptrs.append((<size_t><void*>c.data, c.shape[0], <size_t><void*>k.data))
        while len(ptrs) < 5:
            ptrs.append(ptrs[0])  # unused slots (matrix runs pass only g, h, b)
        self.progs.gc = <const int32_t*><void*><size_t>ptrs[0][0]
        self.progs.gn = ptrs[0][1]
        self.progs.gk = <const double*><void*><size_t>ptrs[0][2]
        self.progs.hc = <const int32_t*><void*><size_t>ptrs[1][0]
        self.progs.hn = ptrs[1][1]
        self.progs.hk = <const double*><void*><size_t>ptrs[1][2]
        self.progs.bc = <const int32_t*><void*><size_t>ptrs[2][0]
        self.progs.bn = ptrs[2][1]
        self.progs.bk = <const double*><void*><size_t>ptrs[2][2]
        self.progs.g2c = <const int32_t*><void*><size_t>ptrs[3][0]
        self.progs.g2n = ptrs[3][1]
        self.progs.g2k = <const double*><void*><size_t>ptrs[3][2]
        self.progs.h2c = <const int32_t*><void*><size_t>ptrs[4][0]
        self.progs.h2n = ptrs[4][1]
        self.progs.h2k = <const double*><void*><size_t>ptrs[4][2]


def coefficient_values(lam, progs):
    """Evaluate (g, h, b, g2, h2) at each component of lam."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] L = np.ascontiguousarray(lam, dtype=np.float64)
    cdef int p = L.shape[0]
    cdef _ProgSet ps = _ProgSet(progs)
    gv = np.empty(p); hv = np.empty(p); bv = np.empty(p)
    g2v = np.empty(p); h2v = np.empty(p)
    cdef double[::1] gm = gv, hm = hv, bm = bv, g2m = g2v, h2m = h2v
    cdef int i
    cdef double x
    for i in range(p):
        x = L[i]
        gm[i] = _eval_program(ps.progs.gc, ps.progs.gn, ps.progs.gk, x)
        hm[i] = _eval_program(ps.progs.hc, ps.progs.hn, ps.progs.hk, x)
        bm[i] = _eval_program(ps.progs.bc, ps.progs.bn, ps.progs.bk, x)
        g2m[i] = _eval_program(ps.progs.g2c, ps.progs.g2n, ps.progs.g2k, x)
        h2m[i] = _eval_program(ps.progs.h2c, ps.progs.h2n, ps.progs.h2k, x)
    return gv, hv, bv, g2v, h2v


cdef void _interaction(const double* lam, const double* g2v, const double* h2v,
                       int p, double* S) noexcept nogil:
    cdef int i, k
    cdef double acc
    for i in range(p):
        acc = 0.0
        for k in range(p):
            if k != i:
                acc += (g2v[i] * h2v[k] + g2v[k] * h2v[i]) / (lam[i] - lam[k])
        S[i] = acc


def interaction_sums(lam, g2v, h2v):
    """S_i = sum_{k != i} G(lam_i, lam_k) / (lam_i - lam_k)."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] L = np.ascontiguousarray(lam, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] G2 = np.ascontiguousarray(g2v, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] H2 = np.ascontiguousarray(h2v, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] S = np.empty(L.shape[0], dtype=np.float64)
    _interaction(<const double*>L.data, <const double*>G2.data,
                 <const double*>H2.data, L.shape[0], <double*>S.data)
    return S


def drift_and_diffusion(lam, progs, double beta, double mult):
    """Euler coefficients: (2 g h per component, beta*(b + mult*S))."""
    gv, hv, bv, g2v, h2v = coefficient_values(lam, progs)
    S = interaction_sums(lam, g2v, h2v)
    cdef int p = len(lam)
    coef = np.empty(p)
    drift = np.empty(p)
    cdef double[::1] cm = coef, dm = drift, gm = gv, hm = hv, bm = bv, Sm = S
    cdef int i
    for i in range(p):
        cm[i] = 2.0 * gm[i] * hm[i]
        dm[i] = beta * (bm[i] + mult * Sm[i])
    return coef, drift, g2v, h2v


# ---------------------------------------------------------------------------
# Spectral path simulation.

EVENT_NONE = 0
EVENT_COLLISION = 1
EVENT_EXPLOSION = 2

cdef enum:
    EV_NONE = 0
    EV_COLLISION = 1
    EV_EXPLOSION = 2


cdef struct SpecCtx:
    Programs pr
    double beta
    double mult
    double domain_lo
    double domain_hi
    int truncate
    int reject_domain
    double dt
    double eps_gap
    int adaptive
    int max_halvings
    double gap_limit
    uint64_t seed
    uint64_t stream
    double overflow
    int p
    int npair
    int track_h
    int use_arrays
    const double* arr_nu      # n_steps * p when use_arrays
    const double* arr_beta    # n_steps * npair when use_arrays and track_h
    # mutable state
    double* lam
    double* H
    double* arena             # (max_halvings+2) * 2 * nsub increment slots
    double* scratch           # work space
    int64_t clamps
    double min_pre_clamp
    double min_lowest
    double max_highest
    int event
    double event_time
    double event_gap
    int event_level


cdef double _lyap(const double* lam, int p) noexcept nogil:
    cdef int i, j
    cdef double acc = 0.0
    for i in range(p - 1):
        for j in range(i + 1, p):
            acc += log(lam[j] - lam[i])
    return -acc


cdef double _mingap(const double* lam, int p) noexcept nogil:
    cdef int i
    cdef double g, d
    if p < 2:
        return INFINITY
    g = lam[1] - lam[0]
    for i in range(1, p - 1):
        d = lam[i + 1] - lam[i]
        if d < g:
            g = d
    return g


cdef int _update_vectors(SpecCtx* ctx, const double* lam, const double* g2v,
                         const double* h2v, const double* dbe, double h) noexcept nogil:
    cdef int p = ctx.p
    cdef double* dA = ctx.scratch + 8 * MAXP          # p*p
    cdef double* M = dA + p * p                        # p*p
    cdef double* Hn = M + p * p                        # p*p
    cdef double* polar_scratch = Hn + p * p            # 3*p*p
    cdef int i, j, k, q
    cdef double Gij, v, acc, d, err
    q = 0
    for i in range(p):
        for j in range(p):
            dA[i * p + j] = 0.0
    for i in range(p - 1):
        for j in range(i + 1, p):
            Gij = g2v[i] * h2v[j] + g2v[j] * h2v[i]
            v = sqrt(Gij) / (lam[j] - lam[i]) * dbe[q]
            dA[i * p + j] = v
            dA[j * p + i] = -v
            q += 1
    for i in range(p):
        acc = 0.0
        for k in range(p):
            if k != i:
                Gij = g2v[i] * h2v[k] + g2v[k] * h2v[i]
                d = lam[k] - lam[i]
                acc += Gij / (d * d)
        M[i * p + i] = 1.0 + 0.5 * (-acc * h)
        for j in range(p):
            if j != i:
                M[i * p + j] = dA[i * p + j]
    for i in range(p):
        for j in range(p):
            acc = 0.0
            for k in range(p):
                acc += ctx.H[i * p + k] * M[k * p + j]
            Hn[i * p + j] = acc
    if not _polar_core(Hn, p, 1e-13, 40, polar_scratch, &err):
        return 0
    for i in range(p * p):
        ctx.H[i] = Hn[i]
    return 1


cdef int _advance(SpecCtx* ctx, int64_t step, int level, uint64_t offset,
                  double* dnu, double* dbe, double h, double t0) noexcept nogil:
    """Returns 1 on success; 0 with ctx.event set on termination."""
    cdef int p = ctx.p
    cdef double* gv = ctx.scratch
    cdef double* hv = gv + MAXP
    cdef double* bv = hv + MAXP
    cdef double* g2v = bv + MAXP
    cdef double* h2v = g2v + MAXP
    cdef double* S = h2v + MAXP
    cdef double* prop = S + MAXP
    cdef int i, k, clamped, reject, nsub, s
    cdef double x, acc, pre_min, newgap, oldgap, d, nh, s_half, parent, xi, lft
    cdef double* lam = ctx.lam

    for i in range(p):
        x = lam[i]
        gv[i] = _eval_program(ctx.pr.gc, ctx.pr.gn, ctx.pr.gk, x)
        hv[i] = _eval_program(ctx.pr.hc, ctx.pr.hn, ctx.pr.hk, x)
        bv[i] = _eval_program(ctx.pr.bc, ctx.pr.bn, ctx.pr.bk, x)
        g2v[i] = _eval_program(ctx.pr.g2c, ctx.pr.g2n, ctx.pr.g2k, x)
        h2v[i] = _eval_program(ctx.pr.h2c, ctx.pr.h2n, ctx.pr.h2k, x)
    _interaction(lam, g2v, h2v, p, S)

    clamped = 0
    pre_min = INFINITY
    for i in range(p):
        x = lam[i] + (2.0 * gv[i] * hv[i]) * dnu[i] \
            + (ctx.beta * (bv[i] + ctx.mult * S[i])) * h
        if x < pre_min:
            pre_min = x
        if ctx.truncate:
            if x < ctx.domain_lo:
                x = ctx.domain_lo
                clamped += 1
            elif x > ctx.domain_hi:
                x = ctx.domain_hi
                clamped += 1
        prop[i] = x
    if pre_min < ctx.min_pre_clamp:
        ctx.min_pre_clamp = pre_min

    for i in range(p):
        if prop[i] > ctx.overflow or prop[i] < -ctx.overflow or prop[i] != prop[i]:
            ctx.event = EV_EXPLOSION
            ctx.event_time = t0
            ctx.event_gap = _mingap(prop, p)
            ctx.event_level = level
            return 0

    reject = 0
    for i in range(p - 1):
        newgap = prop[i + 1] - prop[i]
        oldgap = lam[i + 1] - lam[i]
        if newgap <= ctx.eps_gap:
            reject = 1
            break
        d = newgap - oldgap
        if d < 0.0:
            d = -d
        if d > ctx.gap_limit * oldgap:
            reject = 1
            break
    if not reject and ctx.reject_domain:
        for i in range(p):
            if prop[i] < ctx.domain_lo or prop[i] > ctx.domain_hi:
                reject = 1
                break

    if not reject:
        if ctx.track_h:
            if not _update_vectors(ctx, lam, g2v, h2v, dbe, h):
                ctx.event = EV_COLLISION
                ctx.event_time = t0
                ctx.event_gap = _mingap(lam, p)
                ctx.event_level = level
                return 0
        for i in range(p):
            lam[i] = prop[i]
        ctx.clamps += clamped
        if lam[0] < ctx.min_lowest:
            ctx.min_lowest = lam[0]
        if lam[p - 1] > ctx.max_highest:
            ctx.max_highest = lam[p - 1]
        return 1

    if (not ctx.adaptive) or level >= ctx.max_halvings:
        ctx.event = EV_COLLISION
        ctx.event_time = t0
        ctx.event_gap = _mingap(prop, p)
        ctx.event_level = level
        return 0

    nh = 0.5 * h
    s_half = 0.5 * sqrt(h)
    nsub = p + (ctx.npair if ctx.track_h else 0)
    cdef double* left = ctx.arena + (level + 1) * 2 * (p + ctx.npair)
    cdef double* right = left + (p + ctx.npair)
    for s in range(nsub):
        parent = dnu[s] if s < p else dbe[s - p]
        xi = _raw_normal(ctx.seed, ctx.stream, <uint64_t>step, <uint64_t>s,
                         <uint64_t>(2 | ((level + 1) << 8)),
                         2 * offset) * s_half
        lft = 0.5 * parent + xi
        left[s] = lft
        right[s] = parent - lft
    if not _advance(ctx, step, level + 1, 2 * offset, left, left + p, nh, t0):
        return 0
    return _advance(ctx, step, level + 1, 2 * offset + 1, right, right + p,
                    nh, t0 + nh)


def spectral_path(lam0, H0, progs, double beta, double mult, double domain_lo,
                  double domain_hi, bint truncate, bint reject_domain,
                  double dt, int64_t n_steps, double eps_gap, bint adaptive,
                  int max_halvings, double gap_limit, int64_t stride,
                  seed, stream, double overflow,
                  noise_nu=None, noise_beta=None):
    """Simulate the eigenvalue (and optional eigenvector) system.

    Same contract as the pure-Python backend.
    """
    cdef cnp.ndarray[cnp.float64_t, ndim=1] L0 = np.ascontiguousarray(lam0, dtype=np.float64)
    cdef int p = L0.shape[0]
    if p > MAXP:
        raise ValueError(f"system size {p} exceeds kernel limit {MAXP}")
    cdef int npair = p * (p - 1) // 2
    cdef int track_h = H0 is not None
    cdef _ProgSet ps = _ProgSet(progs)

    cdef SpecCtx ctx
    ctx.pr = ps.progs
    ctx.beta = beta
    ctx.mult = mult
    ctx.domain_lo = domain_lo
    ctx.domain_hi = domain_hi
    ctx.truncate = 1 if truncate else 0
    ctx.reject_domain = 1 if reject_domain else 0
    ctx.dt = dt
    ctx.eps_gap = eps_gap
    ctx.adaptive = 1 if adaptive else 0
    ctx.max_halvings = max_halvings
    ctx.gap_limit = gap_limit
    ctx.seed = <uint64_t>seed
    ctx.stream = <uint64_t>stream
    ctx.overflow = overflow
    ctx.p = p
    ctx.npair = npair
    ctx.track_h = track_h
    ctx.clamps = 0
    ctx.min_pre_clamp = INFINITY
    ctx.event = EV_NONE
    ctx.event_time = 0.0
    ctx.event_gap = NAN
    ctx.event_level = 0

    cdef cnp.ndarray[cnp.float64_t, ndim=1] lam_buf = L0.copy()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] H_buf
    if track_h:
        H_buf = np.ascontiguousarray(np.asarray(H0, dtype=np.float64).reshape(-1))
        ctx.H = <double*>H_buf.data
    else:
        H_buf = np.empty(0, dtype=np.float64)
        ctx.H = NULL
    ctx.lam = <double*>lam_buf.data

    cdef cnp.ndarray[cnp.float64_t, ndim=1] arena = np.zeros(
        (max_halvings + 2) * 2 * (p + npair), dtype=np.float64)
    ctx.arena = <double*>arena.data
    cdef cnp.ndarray[cnp.float64_t, ndim=1] scratch = np.zeros(
        8 * MAXP + 6 * p * p + 16, dtype=np.float64)
    ctx.scratch = <double*>scratch.data

    cdef cnp.ndarray[cnp.float64_t, ndim=2] NU
    cdef cnp.ndarray[cnp.float64_t, ndim=2] BE
    ctx.use_arrays = 0
    ctx.arr_nu = NULL
    ctx.arr_beta = NULL
    if noise_nu is not None:
        NU = np.ascontiguousarray(noise_nu, dtype=np.float64)
        ctx.use_arrays = 1
        ctx.arr_nu = <const double*>NU.data
        if track_h and noise_beta is not None:
            BE = np.ascontiguousarray(noise_beta, dtype=np.float64)
            ctx.arr_beta = <const double*>BE.data

    cdef int64_t nrec_max = 2 + n_steps // stride + (1 if n_steps % stride else 0) + 1
    times = np.empty(nrec_max)
    lam_rec = np.empty((nrec_max, p))
    gap_rec = np.empty(nrec_max)
    lyap_rec = np.empty(nrec_max)
    bnd_rec = np.zeros(nrec_max, dtype=np.uint8)
    h_rec = np.empty((nrec_max, p, p)) if track_h else None

    cdef double[::1] times_m = times
    cdef double[:, ::1] lam_m = lam_rec
    cdef double[::1] gap_m = gap_rec
    cdef double[:, :, ::1] h_m = h_rec if track_h else np.empty((1, 1, 1))
    cdef double[::1] lyap_m = lyap_rec
    cdef cnp.uint8_t[::1] bnd_m = bnd_rec

    cdef int64_t nrec = 0
    cdef int i, j
    cdef double g, u
    cdef double sdt = sqrt(dt)

    times_m[nrec] = 0.0
    for i in range(p):
        lam_m[nrec, i] = ctx.lam[i]
    gap_m[nrec] = _mingap(ctx.lam, p)
    lyap_m[nrec] = _lyap(ctx.lam, p)
    if track_h:
        for i in range(p):
            for j in range(p):
                h_m[nrec, i, j] = ctx.H[i * p + j]
    nrec += 1

    cdef double min_gap_overall = gap_m[0]
    cdef double max_lyap = lyap_m[0]
    ctx.min_lowest = ctx.lam[0]
    ctx.max_highest = ctx.lam[p - 1]

    cdef double* dnu0 = ctx.arena
    cdef double* dbe0 = ctx.arena + p
    cdef int64_t k
    cdef int64_t clamps_before = 0
    cdef int64_t steps_done = 0
    cdef int ok
    for k in range(n_steps):
        if ctx.use_arrays:
            for i in range(p):
                dnu0[i] = ctx.arr_nu[k * p + i]
            if track_h:
                if ctx.arr_beta != NULL:
                    for i in range(npair):
                        dbe0[i] = ctx.arr_beta[k * npair + i]
                else:
                    for i in range(npair):
                        dbe0[i] = 0.0
        else:
            for i in range(p):
                dnu0[i] = _raw_normal(ctx.seed, ctx.stream, <uint64_t>k,
                                      <uint64_t>i, 0, 0) * sdt
            if track_h:
                for i in range(npair):
                    dbe0[i] = _raw_normal(ctx.seed, ctx.stream, <uint64_t>k,
                                          <uint64_t>(p + i), 0, 0) * sdt
        ok = _advance(&ctx, k, 0, 0, dnu0, dbe0, dt, k * dt)
        if not ok:
            break
        steps_done = k + 1
        g = _mingap(ctx.lam, p)
        u = _lyap(ctx.lam, p)
        if g < min_gap_overall:
            min_gap_overall = g
        if u > max_lyap:
            max_lyap = u
        if (k + 1) % stride == 0 or k == n_steps - 1:
            times_m[nrec] = (k + 1) * dt
            for i in range(p):
                lam_m[nrec, i] = ctx.lam[i]
            gap_m[nrec] = g
            lyap_m[nrec] = u
            bnd_m[nrec] = 1 if ctx.clamps > clamps_before else 0
            if track_h:
                for i in range(p):
                    for j in range(p):
                        h_m[nrec, i, j] = ctx.H[i * p + j]
            nrec += 1
        clamps_before = ctx.clamps

    if ctx.event != EV_NONE:
        times_m[nrec] = ctx.event_time
        for i in range(p):
            lam_m[nrec, i] = ctx.lam[i]
        gap_m[nrec] = _mingap(ctx.lam, p)
        lyap_m[nrec] = _lyap(ctx.lam, p)
        bnd_m[nrec] = 0
        if track_h:
            for i in range(p):
                for j in range(p):
                    h_m[nrec, i, j] = ctx.H[i * p + j]
        nrec += 1

    return {
        "times": times[:nrec].copy(),
        "lambdas": lam_rec[:nrec].copy(),
        "mingap": gap_rec[:nrec].copy(),
        "lyapunov": lyap_rec[:nrec].copy(),
        "boundary": bnd_rec[:nrec].copy(),
        "eigvecs": h_rec[:nrec].copy() if track_h else None,
        "steps_done": int(steps_done),
        "event": int(ctx.event),
        "event_time": float(ctx.event_time),
        "event_gap": float(ctx.event_gap),
        "event_level": int(ctx.event_level),
        "clamp_count": int(ctx.clamps),
        "min_pre_clamp": float(ctx.min_pre_clamp),
        "min_lowest": float(ctx.min_lowest),
        "max_highest": float(ctx.max_highest),
        "min_gap_overall": float(min_gap_overall),
        "max_lyapunov": float(max_lyap),
    }


# ---------------------------------------------------------------------------
# Matrix path simulation.

cdef void _congruence_diag(const double* V, const double* d, int p,
                           double* out) noexcept nogil:
    cdef int i, j, k
    cdef double acc
    for i in range(p):
        for j in range(i, p):
            acc = 0.0
            for k in range(p):
                acc += (V[i * p + k] * d[k]) * V[j * p + k]
            out[i * p + j] = acc
            out[j * p + i] = acc


cdef void _matmul(const double* A, const double* B, int p, double* out) noexcept nogil:
    cdef int i, j, k
    cdef double acc
    for i in range(p):
        for j in range(p):
            acc = 0.0
            for k in range(p):
                acc += A[i * p + k] * B[k * p + j]
            out[i * p + j] = acc


cdef int _record_eigs(const double* X, double* Acopy, double* V, double* lam_e,
                      double* Hvec, int pe, int p, int is_complex,
                      double eig_tol, int eig_sweeps,
                      double[:, ::1] lam_m, int64_t slot) noexcept nogil:
    cdef int ii, jj, cv
    cdef double resid = 0.0
    for ii in range(pe):
        for jj in range(pe):
            Acopy[ii * pe + jj] = X[ii * pe + jj]
    cv = _jacobi_core(Acopy, V, pe, eig_tol, eig_sweeps, &resid)
    if not cv:
        return 0
    _jacobi_sort_sign(Acopy, V, pe, lam_e, Hvec)
    if is_complex:
        for ii in range(p):
            lam_m[slot, ii] = lam_e[2 * ii]
    else:
        for ii in range(p):
            lam_m[slot, ii] = lam_e[ii]
    return 1


def matrix_path(x0, progs, bint is_complex, double dt, int64_t n_steps,
                int64_t stride, seed, stream, double overflow,
                double eig_tol=1e-11, int eig_sweeps=60):
    """Euler path of the matrix equation; see the pure-Python backend."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] X0 = np.array(x0, dtype=np.float64, order="C")
    cdef int pe = X0.shape[0]
    if pe > MAXP:
        raise ValueError(f"embedded order {pe} exceeds kernel limit {MAXP}")
    cdef int p = pe // 2 if is_complex else pe
    cdef _ProgSet ps = _ProgSet(progs)
    cdef uint64_t sd = <uint64_t>seed, st = <uint64_t>stream
    cdef double sdt = sqrt(dt)

    work = np.zeros(10 * pe * pe + 4 * pe, dtype=np.float64)
    cdef double[::1] wm = work
    cdef double* X = &wm[0]
    cdef double* Acopy = X + pe * pe
    cdef double* V = Acopy + pe * pe
    cdef double* Gm = V + pe * pe
    cdef double* Hm = Gm + pe * pe
    cdef double* Bm = Hm + pe * pe
    cdef double* W = Bm + pe * pe
    cdef double* P1 = W + pe * pe
    cdef double* M = P1 + pe * pe
    cdef double* Hvec = M + pe * pe
    cdef double* lam_e = Hvec + pe * pe
    cdef double* gd = lam_e + pe
    cdef double* hd = gd + pe
    cdef double* bd = hd + pe

    cdef int i, j
    for i in range(pe):
        for j in range(pe):
            X[i * pe + j] = X0[i, j]

    cdef int64_t nrec_max = 2 + n_steps // stride + (1 if n_steps % stride else 0)
    times = np.empty(nrec_max)
    mats = np.empty((nrec_max, pe, pe))
    lam_recs = np.empty((nrec_max, p))
    cdef double[::1] times_m = times
    cdef double[:, :, ::1] mats_m = mats
    cdef double[:, ::1] lam_m = lam_recs

    cdef double resid = 0.0
    cdef int conv

    cdef int64_t nrec = 0
    times_m[0] = 0.0
    for i in range(pe):
        for j in range(pe):
            mats_m[0, i, j] = X[i * pe + j]
    if not _record_eigs(X, Acopy, V, lam_e, Hvec, pe, p, is_complex,
                        eig_tol, eig_sweeps, lam_m, 0):
        return {"error": "eigensolver failed on initial state"}
    nrec = 1

    cdef int event = EV_NONE
    cdef double event_time = 0.0
    cdef int64_t steps_done = 0
    cdef int64_t k
    cdef double b1, b2, s, v
    for k in range(n_steps):
        for i in range(pe):
            for j in range(pe):
                Acopy[i * pe + j] = X[i * pe + j]
        conv = _jacobi_core(Acopy, V, pe, eig_tol, eig_sweeps, &resid)
        if not conv:
            return {"error": f"eigensolver stalled at step {k}, residual {resid:g}"}
        for i in range(pe):
            lam_e[i] = Acopy[i * pe + i]
        for i in range(pe):
            gd[i] = _eval_program(ps.progs.gc, ps.progs.gn, ps.progs.gk, lam_e[i])
            hd[i] = _eval_program(ps.progs.hc, ps.progs.hn, ps.progs.hk, lam_e[i])
            bd[i] = _eval_program(ps.progs.bc, ps.progs.bn, ps.progs.bk, lam_e[i])
        _congruence_diag(V, gd, pe, Gm)
        _congruence_diag(V, hd, pe, Hm)
        _congruence_diag(V, bd, pe, Bm)
        if not is_complex:
            for i in range(p):
                for j in range(p):
                    W[i * p + j] = _raw_normal(sd, st, <uint64_t>k,
                                               <uint64_t>(i * p + j), 0, 0) * sdt
        else:
            for i in range(p):
                for j in range(p):
                    b1 = _raw_normal(sd, st, <uint64_t>k,
                                     <uint64_t>(i * p + j), 0, 0) * sdt
                    b2 = _raw_normal(sd, st, <uint64_t>k,
                                     <uint64_t>(p * p + i * p + j), 0, 0) * sdt
                    W[i * pe + j] = b1
                    W[(i + p) * pe + (j + p)] = b1
                    W[i * pe + (j + p)] = -b2
                    W[(i + p) * pe + j] = b2
        _matmul(Gm, W, pe, P1)
        _matmul(P1, Hm, pe, M)
        for i in range(pe):
            for j in range(pe):
                X[i * pe + j] = X[i * pe + j] + M[i * pe + j] + M[j * pe + i] \
                    + dt * Bm[i * pe + j]
        for i in range(pe):
            for j in range(i + 1, pe):
                v = 0.5 * (X[i * pe + j] + X[j * pe + i])
                X[i * pe + j] = v
                X[j * pe + i] = v
        s = 0.0
        for i in range(pe):
            for j in range(pe):
                s += X[i * pe + j] * X[i * pe + j]
        if sqrt(s) > overflow or s != s:
            event = EV_EXPLOSION
            event_time = (k + 1) * dt
            break
        steps_done = k + 1
        if (k + 1) % stride == 0 or k == n_steps - 1:
            times_m[nrec] = (k + 1) * dt
            for i in range(pe):
                for j in range(pe):
                    mats_m[nrec, i, j] = X[i * pe + j]
            if not _record_eigs(X, Acopy, V, lam_e, Hvec, pe, p, is_complex,
                                eig_tol, eig_sweeps, lam_m, nrec):
                return {"error": f"eigensolver failed at record step {k + 1}"}
            nrec += 1

    return {
        "times": times[:nrec].copy(),
        "matrices": mats[:nrec].copy(),
        "lambdas": lam_recs[:nrec].copy(),
        "steps_done": int(steps_done),
        "event": int(event),
        "event_time": float(event_time),
    }
