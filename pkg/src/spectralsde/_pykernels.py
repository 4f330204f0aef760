"""Pure-Python compute kernels (reference backend).

This module and ``_ckernels.pyx`` implement the same kernels with the same
floating-point operation order, so that a simulation gives bit-identical
results on either backend (on one platform; libm log/exp may differ across
platforms).  The compiled backend is selected automatically when present; see
``spectralsde._backend``.

Random numbers
--------------
All randomness is counter-based: every scalar draw is a pure function of a
128-bit Philox4x64-10 key ``(seed, stream)`` and a 256-bit counter, so any
increment can be regenerated without storing paths and paths can be simulated
in parallel in any order.  Counter layout (four 64-bit words)::

    (index, substream, purpose | level << 8, offset)

purpose 0: per-step draw, index = step.
purpose 1: shared-path tree leaf, index = global leaf index.
purpose 2: in-step bridge midpoint at halving depth ``level``; index = step,
           offset = left-child offset at that depth.

Word 0 of the Philox output becomes a uniform ``((w >> 11) + 0.5) * 2**-53``
in (0,1), mapped to a standard normal by the AS241 rational approximation of
the inverse normal CDF (absolute error well below 1e-9).

Scalar coefficient functions are tiny postfix programs (see
``spectralsde.scalarfn``); both backends run the same opcode stream.
"""

from __future__ import annotations

import math

import numpy as np

BACKEND_NAME = "python"

_MASK64 = (1 << 64) - 1

# Philox4x64 multipliers and Weyl key increments.
_PHILOX_M0 = 0xD2E7470EE14C6C93
_PHILOX_M1 = 0xCA5A826395121157
_PHILOX_W0 = 0x9E3779B97F4A7C15
_PHILOX_W1 = 0xBB67AE8584CAA73B

PURPOSE_STEP = 0
PURPOSE_LEAF = 1
PURPOSE_BRIDGE = 2

_INV_2_53 = 2.0 ** -53


def philox4x64(k0, k1, c0, c1, c2, c3):
    """One Philox4x64-10 block. Returns the four 64-bit output words."""
    k0 &= _MASK64
    k1 &= _MASK64
    c0 &= _MASK64
    c1 &= _MASK64
    c2 &= _MASK64
    c3 &= _MASK64
    for _ in range(10):
        p0 = _PHILOX_M0 * c0
        p1 = _PHILOX_M1 * c2
        hi0 = (p0 >> 64) & _MASK64
        lo0 = p0 & _MASK64
        hi1 = (p1 >> 64) & _MASK64
        lo1 = p1 & _MASK64
        c0 = hi1 ^ c1 ^ k0
        c1 = lo1
        c2 = hi0 ^ c3 ^ k1
        c3 = lo0
        k0 = (k0 + _PHILOX_W0) & _MASK64
        k1 = (k1 + _PHILOX_W1) & _MASK64
    return c0, c1, c2, c3


def norm_ppf(u):
    """Inverse standard normal CDF, AS241 (PPND16) rational approximation."""
    q = u - 0.5
    if abs(q) <= 0.425:
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
    r = math.sqrt(-math.log(r))
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


def _raw_normal(seed, stream, c0, c1, c2, c3):
    w0, _, _, _ = philox4x64(seed, stream, c0, c1, c2, c3)
    u = ((w0 >> 11) + 0.5) * _INV_2_53
    return norm_ppf(u)


def normal_step(seed, stream, step, substream):
    """Standard normal for one per-step scalar draw."""
    return _raw_normal(seed, stream, step, substream, PURPOSE_STEP, 0)


def normal_leaf(seed, stream, leaf, substream):
    """Standard normal for one shared-path tree leaf."""
    return _raw_normal(seed, stream, leaf, substream, PURPOSE_LEAF, 0)


def normal_bridge(seed, stream, step, substream, level, offset):
    """Standard normal for the bridge midpoint of an in-step bisection."""
    return _raw_normal(seed, stream, step, substream,
                       PURPOSE_BRIDGE | (level << 8), offset)


def fill_step_normals(seed, stream, step, n_sub):
    """All substream draws for one step, scaled by nothing (unit variance)."""
    out = np.empty(n_sub, dtype=np.float64)
    for j in range(n_sub):
        out[j] = normal_step(seed, stream, step, j)
    return out


def fill_leaf_normals(seed, stream, substream, leaf0, count):
    out = np.empty(count, dtype=np.float64)
    for i in range(count):
        out[i] = normal_leaf(seed, stream, leaf0 + i, substream)
    return out


# ---------------------------------------------------------------------------
# Scalar coefficient programs (postfix stack machine).
# Opcodes 0..7; values >= 8 push consts[value - 8].

OP_X = 0
OP_ADD = 1
OP_SUB = 2
OP_MUL = 3
OP_DIV = 4
OP_NEG = 5
OP_SQRT = 6
OP_ABS = 7
OP_CONST_BASE = 8


def eval_program(codes, consts, x):
    stack = [0.0] * 16
    top = -1
    for code in codes:
        c = int(code)
        if c >= OP_CONST_BASE:
            top += 1
            stack[top] = consts[c - OP_CONST_BASE]
        elif c == OP_X:
            top += 1
            stack[top] = x
        elif c == OP_ADD:
            top -= 1
            stack[top] = stack[top] + stack[top + 1]
        elif c == OP_SUB:
            top -= 1
            stack[top] = stack[top] - stack[top + 1]
        elif c == OP_MUL:
            top -= 1
            stack[top] = stack[top] * stack[top + 1]
        elif c == OP_DIV:
            top -= 1
            stack[top] = stack[top] / stack[top + 1]
        elif c == OP_NEG:
            stack[top] = -stack[top]
        elif c == OP_SQRT:
            v = stack[top]
            stack[top] = math.sqrt(v) if v >= 0.0 else math.nan
        elif c == OP_ABS:
            stack[top] = abs(stack[top])
        else:
            raise ValueError(f"bad opcode {c}")
    return stack[0]


# ---------------------------------------------------------------------------
# Dense symmetric eigensolver: cyclic Jacobi rotations.

def jacobi_eigh(a, tol=1e-12, max_sweeps=50):
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns (eigenvalues ascending, eigenvector columns, relative off-diagonal
    residual, converged flag).  Columns are sign-normalized: the entry of
    largest magnitude (lowest row index on ties) is made non-negative.
    """
    p = a.shape[0]
    A = [[float(a[i, j]) for j in range(p)] for i in range(p)]
    V = [[1.0 if i == j else 0.0 for j in range(p)] for i in range(p)]
    if p == 1:
        return (np.array([A[0][0]]), np.array([[1.0]]), 0.0, True)

    s = 0.0
    for i in range(p):
        for j in range(p):
            s += A[i][j] * A[i][j]
    normf = math.sqrt(s)

    def offdiag():
        t = 0.0
        for i in range(p - 1):
            for j in range(i + 1, p):
                t += A[i][j] * A[i][j]
        return math.sqrt(2.0 * t)

    converged = normf == 0.0
    off = offdiag()
    if not converged:
        for _ in range(max_sweeps):
            if off <= tol * normf:
                converged = True
                break
            for i in range(p - 1):
                for j in range(i + 1, p):
                    apq = A[i][j]
                    if apq == 0.0:
                        continue
                    theta = (A[j][j] - A[i][i]) / (2.0 * apq)
                    t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                    if theta < 0.0:
                        t = -t
                    c = 1.0 / math.sqrt(t * t + 1.0)
                    sn = t * c
                    aii = A[i][i]
                    ajj = A[j][j]
                    A[i][i] = aii - t * apq
                    A[j][j] = ajj + t * apq
                    A[i][j] = 0.0
                    A[j][i] = 0.0
                    for k in range(p):
                        if k != i and k != j:
                            aik = A[i][k]
                            ajk = A[j][k]
                            A[i][k] = c * aik - sn * ajk
                            A[k][i] = A[i][k]
                            A[j][k] = sn * aik + c * ajk
                            A[k][j] = A[j][k]
                    for k in range(p):
                        vki = V[k][i]
                        vkj = V[k][j]
                        V[k][i] = c * vki - sn * vkj
                        V[k][j] = sn * vki + c * vkj
            off = offdiag()
        else:
            converged = off <= tol * normf

    evals = [A[i][i] for i in range(p)]
    order = list(range(p))
    # stable insertion sort, ascending
    for i in range(1, p):
        oi = order[i]
        key = evals[oi]
        j = i - 1
        while j >= 0 and evals[order[j]] > key:
            order[j + 1] = order[j]
            j -= 1
        order[j + 1] = oi

    lam = np.empty(p, dtype=np.float64)
    H = np.empty((p, p), dtype=np.float64)
    for c0, src in enumerate(order):
        lam[c0] = evals[src]
        best = 0
        bestval = abs(V[0][src])
        for r in range(1, p):
            if abs(V[r][src]) > bestval:
                bestval = abs(V[r][src])
                best = r
        sgn = -1.0 if V[best][src] < 0.0 else 1.0
        for r in range(p):
            H[r, c0] = sgn * V[r][src]
    resid = off / normf if normf > 0.0 else 0.0
    return lam, H, resid, converged


def polar_factor(h, tol=1e-13, max_iter=40):
    """Orthogonal polar factor via Newton-Schulz iteration.

    Requires ||H^T H - I||_F < 0.5.  Returns (Q, final residual, ok flag).
    """
    p = h.shape[0]
    Y = [[float(h[i, j]) for j in range(p)] for i in range(p)]
    err = math.inf
    for _ in range(max_iter):
        T = [[0.0] * p for _ in range(p)]
        for i in range(p):
            for j in range(p):
                acc = 0.0
                for k in range(p):
                    acc += Y[k][i] * Y[k][j]
                T[i][j] = acc
        s = 0.0
        for i in range(p):
            for j in range(p):
                e = T[i][j] - 1.0 if i == j else T[i][j]
                s += e * e
        err = math.sqrt(s)
        if err <= tol:
            break
        M = [[0.0] * p for _ in range(p)]
        for i in range(p):
            for j in range(p):
                M[i][j] = 1.5 - 0.5 * T[i][j] if i == j else -0.5 * T[i][j]
        Yn = [[0.0] * p for _ in range(p)]
        for i in range(p):
            for j in range(p):
                acc = 0.0
                for k in range(p):
                    acc += Y[i][k] * M[k][j]
                Yn[i][j] = acc
        Y = Yn
    Q = np.array(Y, dtype=np.float64)
    return Q, err, err <= 1e-12


# ---------------------------------------------------------------------------
# Eigenvalue system right-hand side.

def coefficient_values(lam, progs):
    """Evaluate (g, h, b, g2, h2) at each component of lam."""
    p = len(lam)
    gv = np.empty(p)
    hv = np.empty(p)
    bv = np.empty(p)
    g2v = np.empty(p)
    h2v = np.empty(p)
    (gc, gk), (hc, hk), (bc, bk), (g2c, g2k), (h2c, h2k) = progs
    for i in range(p):
        x = lam[i]
        gv[i] = eval_program(gc, gk, x)
        hv[i] = eval_program(hc, hk, x)
        bv[i] = eval_program(bc, bk, x)
        g2v[i] = eval_program(g2c, g2k, x)
        h2v[i] = eval_program(h2c, h2k, x)
    return gv, hv, bv, g2v, h2v


def interaction_sums(lam, g2v, h2v):
    """S_i = sum_{k != i} G(lam_i, lam_k) / (lam_i - lam_k)."""
    p = len(lam)
    S = np.empty(p)
    for i in range(p):
        acc = 0.0
        for k in range(p):
            if k != i:
                acc += (g2v[i] * h2v[k] + g2v[k] * h2v[i]) / (lam[i] - lam[k])
        S[i] = acc
    return S


def drift_and_diffusion(lam, progs, beta, mult):
    """Euler coefficients: (2 g h per component, beta*(b + mult*S))."""
    gv, hv, bv, g2v, h2v = coefficient_values(lam, progs)
    p = len(lam)
    S = interaction_sums(lam, g2v, h2v)
    coef = np.empty(p)
    drift = np.empty(p)
    for i in range(p):
        coef[i] = 2.0 * gv[i] * hv[i]
        drift[i] = beta * (bv[i] + mult * S[i])
    return coef, drift, g2v, h2v


# ---------------------------------------------------------------------------
# Spectral path simulation.

EVENT_NONE = 0
EVENT_COLLISION = 1
EVENT_EXPLOSION = 2

_SQRT = math.sqrt
_LOG = math.log


def _lyapunov(lam):
    p = len(lam)
    acc = 0.0
    for i in range(p - 1):
        for j in range(i + 1, p):
            acc += _LOG(lam[j] - lam[i])
    return -acc


def _min_gap(lam):
    p = len(lam)
    if p < 2:
        return math.inf
    g = lam[1] - lam[0]
    for i in range(1, p - 1):
        d = lam[i + 1] - lam[i]
        if d < g:
            g = d
    return g


class _SpectralState:
    __slots__ = ("lam", "H", "clamps", "min_pre_clamp", "event", "event_time",
                 "event_gap", "event_level")

    def __init__(self, lam, H):
        self.lam = lam
        self.H = H
        self.clamps = 0
        self.min_pre_clamp = math.inf
        self.event = EVENT_NONE
        self.event_time = 0.0
        self.event_gap = math.nan
        self.event_level = 0


def spectral_path(lam0, H0, progs, beta, mult, domain_lo, domain_hi,
                  truncate, reject_domain, dt, n_steps, eps_gap, adaptive,
                  max_halvings, gap_limit, stride, seed, stream, overflow,
                  noise_nu=None, noise_beta=None):
    """Simulate the eigenvalue (and optional eigenvector) system.

    Returns a dict of record arrays and path diagnostics; see the backend
    contract in the module docstring of ``spectralsde._backend``.
    """
    p = len(lam0)
    npair = p * (p - 1) // 2
    track_h = H0 is not None
    st = _SpectralState(list(map(float, lam0)),
                        [[float(H0[i, j]) for j in range(p)] for i in range(p)]
                        if track_h else None)

    times = [0.0]
    lam_rec = [list(st.lam)]
    gap_rec = [_min_gap(st.lam)]
    lyap_rec = [_lyapunov(st.lam)]
    bnd_rec = [0]
    h_rec = [[row[:] for row in st.H]] if track_h else None

    min_gap_overall = gap_rec[0]
    max_lyap = lyap_rec[0]
    min_lowest = st.lam[0]
    max_highest = st.lam[p - 1]

    def draw_step(step):
        if noise_nu is not None:
            dnu = [float(v) for v in noise_nu[step]]
            dbe = ([float(v) for v in noise_beta[step]]
                   if (track_h and noise_beta is not None) else [0.0] * npair)
            return dnu, dbe
        sdt = _SQRT(dt)
        dnu = [normal_step(seed, stream, step, j) * sdt for j in range(p)]
        dbe = ([normal_step(seed, stream, step, p + j) * sdt for j in range(npair)]
               if track_h else [0.0] * npair)
        return dnu, dbe

    def update_vectors(lam, g2v, h2v, dbe, h):
        dA = [[0.0] * p for _ in range(p)]
        q = 0
        for i in range(p - 1):
            for j in range(i + 1, p):
                Gij = g2v[i] * h2v[j] + g2v[j] * h2v[i]
                v = _SQRT(Gij) / (lam[j] - lam[i]) * dbe[q]
                dA[i][j] = v
                dA[j][i] = -v
                q += 1
        M = [[0.0] * p for _ in range(p)]
        for i in range(p):
            acc = 0.0
            for k in range(p):
                if k != i:
                    Gik = g2v[i] * h2v[k] + g2v[k] * h2v[i]
                    d = lam[k] - lam[i]
                    acc += Gik / (d * d)
            M[i][i] = 1.0 + 0.5 * (-acc * h)
            for j in range(p):
                if j != i:
                    M[i][j] = dA[i][j]
        H = st.H
        Hn = np.empty((p, p))
        for i in range(p):
            for j in range(p):
                acc = 0.0
                for k in range(p):
                    acc += H[i][k] * M[k][j]
                Hn[i, j] = acc
        Q, _, ok = polar_factor(Hn)
        if not ok:
            return False
        st.H = [[Q[i, j] for j in range(p)] for i in range(p)]
        return True

    def advance(step, level, offset, dnu, dbe, h, t0):
        nonlocal min_lowest, max_highest
        lam = st.lam
        coef, drift, g2v, h2v = drift_and_diffusion(lam, progs, beta, mult)
        prop = [0.0] * p
        clamped = 0
        pre_min = math.inf
        for i in range(p):
            x = lam[i] + coef[i] * dnu[i] + drift[i] * h
            if x < pre_min:
                pre_min = x
            if truncate:
                if x < domain_lo:
                    x = domain_lo
                    clamped += 1
                elif x > domain_hi:
                    x = domain_hi
                    clamped += 1
            prop[i] = x
        if pre_min < st.min_pre_clamp:
            st.min_pre_clamp = pre_min

        for i in range(p):
            if prop[i] > overflow or prop[i] < -overflow or prop[i] != prop[i]:
                st.event = EVENT_EXPLOSION
                st.event_time = t0
                st.event_gap = _min_gap(prop)
                st.event_level = level
                return False

        reject = False
        for i in range(p - 1):
            newgap = prop[i + 1] - prop[i]
            oldgap = lam[i + 1] - lam[i]
            if newgap <= eps_gap:
                reject = True
                break
            d = newgap - oldgap
            if d < 0.0:
                d = -d
            if d > gap_limit * oldgap:
                reject = True
                break
        if not reject and reject_domain:
            for i in range(p):
                if prop[i] < domain_lo or prop[i] > domain_hi:
                    reject = True
                    break

        if not reject:
            if track_h:
                if not update_vectors(lam, g2v, h2v, dbe, h):
                    st.event = EVENT_COLLISION
                    st.event_time = t0
                    st.event_gap = _min_gap(lam)
                    st.event_level = level
                    return False
            st.lam = prop
            st.clamps += clamped
            if prop[0] < min_lowest:
                min_lowest = prop[0]
            if prop[p - 1] > max_highest:
                max_highest = prop[p - 1]
            return True

        if (not adaptive) or level >= max_halvings:
            st.event = EVENT_COLLISION
            st.event_time = t0
            st.event_gap = _min_gap(prop)
            st.event_level = level
            return False

        nh = 0.5 * h
        s_half = 0.5 * _SQRT(h)
        nlevel = level + 1
        noff = 2 * offset
        nsub = p + (npair if track_h else 0)
        left = [0.0] * nsub
        right = [0.0] * nsub
        for s in range(nsub):
            parent = dnu[s] if s < p else dbe[s - p]
            xi = normal_bridge(seed, stream, step, s, nlevel, noff) * s_half
            lft = 0.5 * parent + xi
            left[s] = lft
            right[s] = parent - lft
        if not advance(step, nlevel, noff, left[:p], left[p:], nh, t0):
            return False
        return advance(step, nlevel, noff + 1, right[:p], right[p:], nh,
                       t0 + nh)

    clamps_before = 0
    steps_done = 0
    for k in range(n_steps):
        dnu, dbe = draw_step(k)
        ok = advance(k, 0, 0, dnu, dbe, dt, k * dt)
        if not ok:
            break
        steps_done = k + 1
        g = _min_gap(st.lam)
        u = _lyapunov(st.lam)
        if g < min_gap_overall:
            min_gap_overall = g
        if u > max_lyap:
            max_lyap = u
        if (k + 1) % stride == 0 or k == n_steps - 1:
            times.append((k + 1) * dt)
            lam_rec.append(list(st.lam))
            gap_rec.append(g)
            lyap_rec.append(u)
            bnd_rec.append(1 if st.clamps > clamps_before else 0)
            if track_h:
                h_rec.append([row[:] for row in st.H])
        clamps_before = st.clamps

    if st.event != EVENT_NONE:
        times.append(st.event_time)
        lam_rec.append(list(st.lam))
        gap_rec.append(_min_gap(st.lam))
        lyap_rec.append(_lyapunov(st.lam))
        bnd_rec.append(0)
        if track_h:
            h_rec.append([row[:] for row in st.H])

    return {
        "times": np.array(times),
        "lambdas": np.array(lam_rec),
        "mingap": np.array(gap_rec),
        "lyapunov": np.array(lyap_rec),
        "boundary": np.array(bnd_rec, dtype=np.uint8),
        "eigvecs": np.array(h_rec) if track_h else None,
        "steps_done": steps_done,
        "event": st.event,
        "event_time": st.event_time,
        "event_gap": st.event_gap,
        "event_level": st.event_level,
        "clamp_count": st.clamps,
        "min_pre_clamp": st.min_pre_clamp,
        "min_lowest": min_lowest,
        "max_highest": max_highest,
        "min_gap_overall": min_gap_overall,
        "max_lyapunov": max_lyap,
    }


# ---------------------------------------------------------------------------
# Matrix path simulation (real symmetric, or Hermitian via the 2p embedding).

def _congruence_diag(V, d, p):
    """V diag(d) V^T for p x p V (list-of-lists), symmetric result."""
    out = [[0.0] * p for _ in range(p)]
    for i in range(p):
        for j in range(i, p):
            acc = 0.0
            for k in range(p):
                acc += (V[i][k] * d[k]) * V[j][k]
            out[i][j] = acc
            out[j][i] = acc
    return out


def _matmul(A, B, p):
    out = [[0.0] * p for _ in range(p)]
    for i in range(p):
        for j in range(p):
            acc = 0.0
            for k in range(p):
                acc += A[i][k] * B[k][j]
            out[i][j] = acc
    return out


def matrix_path(x0, progs, is_complex, dt, n_steps, stride, seed, stream,
                overflow, eig_tol=1e-11, eig_sweeps=60):
    """Euler path of the matrix equation.

    ``x0`` is the real working matrix: the state itself, or for the Hermitian
    mode its 2p x 2p real embedding [[A, -B], [B, A]].  Records store the
    working matrix; eigenvalue diagnostics de-duplicate the doubled spectrum
    in the embedded case.
    """
    pe = x0.shape[0]
    p = pe // 2 if is_complex else pe
    X = [[float(x0[i, j]) for j in range(pe)] for i in range(pe)]
    sdt = _SQRT(dt)
    (gc, gk), (hc, hk), (bc, bk) = progs

    def eigvals_record(M):
        lam_e, _, resid, conv = jacobi_eigh(np.array(M), eig_tol, eig_sweeps)
        if not conv:
            return None
        if is_complex:
            return [lam_e[2 * i] for i in range(p)]
        return list(lam_e)

    def draw_matrix(step):
        W = [[0.0] * pe for _ in range(pe)]
        if not is_complex:
            for i in range(p):
                for j in range(p):
                    W[i][j] = normal_step(seed, stream, step, i * p + j) * sdt
            return W
        for i in range(p):
            for j in range(p):
                b1 = normal_step(seed, stream, step, i * p + j) * sdt
                b2 = normal_step(seed, stream, step, p * p + i * p + j) * sdt
                W[i][j] = b1
                W[i + p][j + p] = b1
                W[i][j + p] = -b2
                W[i + p][j] = b2
        return W

    lam_rec0 = eigvals_record(X)
    if lam_rec0 is None:
        return {"error": "eigensolver failed on initial state"}
    times = [0.0]
    mats = [np.array(X)]
    lam_recs = [lam_rec0]
    event = EVENT_NONE
    event_time = 0.0
    steps_done = 0

    for k in range(n_steps):
        lam_e, V, resid, conv = jacobi_eigh(np.array(X), eig_tol, eig_sweeps)
        if not conv:
            return {"error": f"eigensolver stalled at step {k}, residual {resid:g}"}
        Vl = [[V[i, j] for j in range(pe)] for i in range(pe)]
        gd = [eval_program(gc, gk, lam_e[i]) for i in range(pe)]
        hd = [eval_program(hc, hk, lam_e[i]) for i in range(pe)]
        bd = [eval_program(bc, bk, lam_e[i]) for i in range(pe)]
        Gm = _congruence_diag(Vl, gd, pe)
        Hm = _congruence_diag(Vl, hd, pe)
        Bm = _congruence_diag(Vl, bd, pe)
        W = draw_matrix(k)
        M = _matmul(_matmul(Gm, W, pe), Hm, pe)
        for i in range(pe):
            for j in range(pe):
                X[i][j] = X[i][j] + M[i][j] + M[j][i] + dt * Bm[i][j]
        for i in range(pe):
            for j in range(i + 1, pe):
                v = 0.5 * (X[i][j] + X[j][i])
                X[i][j] = v
                X[j][i] = v
        s = 0.0
        for i in range(pe):
            for j in range(pe):
                s += X[i][j] * X[i][j]
        if _SQRT(s) > overflow or s != s:
            event = EVENT_EXPLOSION
            event_time = (k + 1) * dt
            break
        steps_done = k + 1
        if (k + 1) % stride == 0 or k == n_steps - 1:
            lr = eigvals_record(X)
            if lr is None:
                return {"error": f"eigensolver failed at record step {k + 1}"}
            times.append((k + 1) * dt)
            mats.append(np.array(X))
            lam_recs.append(lr)

    return {
        "times": np.array(times),
        "matrices": np.array(mats),
        "lambdas": np.array(lam_recs),
        "steps_done": steps_done,
        "event": event,
        "event_time": event_time,
    }
