"""Catalog of spectrum-acting coefficient triples (g, h, b) and the
interaction kernel G(x, y) = g^2(x) h^2(y) + g^2(y) h^2(x).

Families
--------
dyson               g = 1/2, h = 1, b = 0; inverse temperature beta.
wishart             g = sqrt|x|, h = 1, b = alpha, on [0, inf).
generalized-wishart same coefficients, alpha any real, no domain constraint.
wishart-ou          b = alpha + c x (squared matrix Ornstein-Uhlenbeck).
besq-particles      N squared-Bessel particles with long-range repulsion:
                    b = 2 (nu + N), complex-style doubled interaction.
jacobi              g = sqrt|x|, h = sqrt|1-x|, b = q - (q+r) x, on [0, 1].
beta-wishart        wishart coefficients with free beta.
beta-jacobi         jacobi coefficients with free beta.
laguerre-complex    complex Wishart (Laguerre): b = 2 alpha, doubled interaction.
custom              expressions for g, h, b in the scalarfn grammar.

The drift of eigenvalue i is  beta * (b(l_i) + m * sum_{k != i}
G(l_i, l_k) / (l_i - l_k))  with m = 2 in complex mode and m = 1 otherwise.
Square roots always act on absolute values (the equations are extended off
the nominal domain that way), so off-domain excursions stay well defined.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._backend import kernels
from .errors import OrderingError
from .scalarfn import ScalarFn


@dataclass(frozen=True)
class Domain:
    lo: float = -math.inf
    hi: float = math.inf

    @property
    def bounded_below(self):
        return math.isfinite(self.lo)

    @property
    def bounded(self):
        return math.isfinite(self.lo) or math.isfinite(self.hi)

    def contains(self, x):
        return self.lo <= x <= self.hi

    def label(self):
        if not self.bounded:
            return "R"
        if math.isinf(self.hi):
            return f"[{self.lo:g}, inf)"
        return f"[{self.lo:g}, {self.hi:g}]"


REAL_LINE = Domain()
NONNEGATIVE = Domain(lo=0.0)
UNIT_INTERVAL = Domain(lo=0.0, hi=1.0)


@dataclass(frozen=True)
class Regularity:
    """Declared regularity of the coefficient triple (not verified symbolically)."""

    b_lipschitz: bool = False
    g2_lipschitz: bool = False
    h2_lipschitz: bool = False
    g2h2_convex_or_c11: bool = False
    G_positive_off_diagonal: bool = False


@dataclass(frozen=True)
class SpectralCoefficients:
    """The triple (g, h, b) plus the deformation weight and metadata.

    g2 and h2 are the pointwise squares as separate programs so that e.g.
    the square-root diffusions evaluate G from |x| directly.
    """

    g: ScalarFn
    h: ScalarFn
    b: ScalarFn
    g2: ScalarFn
    h2: ScalarFn
    beta: float = 1.0
    complex_mode: bool = False
    domain: Domain = REAL_LINE
    regularity: Regularity = field(default_factory=Regularity)
    name: str = "custom"
    positivity_regime: bool = False
    warnings: tuple = ()

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        probe = [x for x in (self.domain.lo, 0.0, 0.5, 1.0, self.domain.hi)
                 if math.isfinite(x) and self.domain.contains(x)]
        for fn in (self.g, self.h, self.b, self.g2, self.h2):
            for x in probe:
                if not math.isfinite(fn(x)):
                    raise ValueError(
                        f"coefficient {fn.expr!r} not finite at x={x}")

    @property
    def interaction_multiplier(self):
        return 2.0 if self.complex_mode else 1.0

    def programs(self):
        """The five (codes, consts) pairs the kernels expect."""
        return (self.g.program(), self.h.program(), self.b.program(),
                self.g2.program(), self.h2.program())

    def matrix_programs(self):
        return (self.g.program(), self.h.program(), self.b.program())


_FAMILY_PARAMS = {
    "dyson": (set(), {"beta", "p"}),
    "wishart": ({"alpha"}, {"p"}),
    "generalized-wishart": ({"alpha"}, {"p"}),
    "wishart-ou": ({"alpha", "c"}, {"p"}),
    "besq-particles": ({"nu", "N"}, {"p"}),
    "jacobi": ({"q", "r"}, {"p"}),
    "beta-wishart": ({"alpha", "beta"}, {"p"}),
    "beta-jacobi": ({"q", "r", "beta"}, {"p"}),
    "laguerre-complex": ({"alpha"}, {"p"}),
    "custom": (set(), {"beta", "p"}),
}


@dataclass(frozen=True)
class ModelId:
    """A catalog family name plus its numeric parameters."""

    name: str
    parameters: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in _FAMILY_PARAMS:
            raise ValueError(f"unknown model family {self.name!r} "
                             f"(known: {sorted(_FAMILY_PARAMS)})")
        required, optional = _FAMILY_PARAMS[self.name]
        have = set(self.parameters)
        missing = required - have
        extra = have - required - optional
        if "beta" in extra:
            raise ValueError(f"{self.name} does not take beta "
                             "(use the beta-* family)")
        if missing:
            raise ValueError(f"{self.name} missing parameters: {sorted(missing)}")
        if extra:
            raise ValueError(f"{self.name} got unknown parameters: {sorted(extra)}")
        if self.name == "besq-particles":
            N = self.parameters["N"]
            if N != int(N) or N < 1:
                raise ValueError("N must be a positive integer")
            if "p" in self.parameters and self.parameters["p"] != N:
                raise ValueError("besq-particles has p identical to N")
        if "p" in self.parameters:
            pval = self.parameters["p"]
            if pval != int(pval) or pval < 1:
                raise ValueError("p must be a positive integer")
        object.__setattr__(self, "parameters",
                           {k: float(v) for k, v in self.parameters.items()})

    def param(self, key, default=None):
        return self.parameters.get(key, default)


_SQRT_ABS_X = "sqrt(abs(x))"
_ABS_X = "abs(x)"
_SQRT_ABS_1MX = "sqrt(abs(1 - x))"
_ABS_1MX = "abs(1 - x)"


def _coeffs(g, h, b, g2, h2, **kw):
    return SpectralCoefficients(
        g=ScalarFn.parse(g), h=ScalarFn.parse(h), b=ScalarFn.parse(b),
        g2=ScalarFn.parse(g2), h2=ScalarFn.parse(h2), **kw)


def catalog(model_id):
    """Coefficients for a catalog family.

    Parameters outside the ranges where the positivity / non-collision
    theorems hold are allowed; such models come back flagged through
    ``warnings`` and with ``positivity_regime`` False, and the integrator
    then records boundary excursions instead of truncating.
    """
    mid = model_id if isinstance(model_id, ModelId) else ModelId(*model_id)
    name = mid.name
    params = mid.parameters
    p = params.get("p")
    warns = []

    if name == "dyson":
        beta = params.get("beta", 1.0)
        return _coeffs("0.5", "1", "0", "0.25", "1",
                       beta=beta, domain=REAL_LINE,
                       regularity=Regularity(True, True, True, True, True),
                       name=name, positivity_regime=False)

    if name in ("wishart", "generalized-wishart", "beta-wishart"):
        alpha = params["alpha"]
        beta = params.get("beta", 1.0)
        regime = False
        if name == "generalized-wishart":
            dom = REAL_LINE
        else:
            dom = NONNEGATIVE
            if p is not None:
                regime = alpha >= p - 1 and beta >= 1.0
                if alpha < p - 1:
                    warns.append(f"alpha={alpha:g} below the positivity "
                                 f"threshold p-1={p - 1:g}")
            if beta < 1.0:
                warns.append(f"beta={beta:g} below the non-collision threshold 1")
        return _coeffs(_SQRT_ABS_X, "1", repr(alpha), _ABS_X, "1",
                       beta=beta, domain=dom,
                       regularity=Regularity(True, True, True, True, True),
                       name=name, positivity_regime=regime,
                       warnings=tuple(warns))

    if name == "wishart-ou":
        alpha = params["alpha"]
        c = params["c"]
        regime = False
        if p is not None:
            regime = alpha >= p - 1 and c > 0
            if alpha < p - 1:
                warns.append(f"alpha={alpha:g} below the positivity "
                             f"threshold p-1={p - 1:g}")
        if c <= 0:
            warns.append(f"c={c:g} not positive")
        return _coeffs(_SQRT_ABS_X, "1", f"{alpha!r} + {c!r}*x", _ABS_X, "1",
                       domain=NONNEGATIVE,
                       regularity=Regularity(True, True, True, True, True),
                       name=name, positivity_regime=regime,
                       warnings=tuple(warns))

    if name == "besq-particles":
        nu = params["nu"]
        N = int(params["N"])
        regime = nu >= -1.0
        if nu < -1.0:
            warns.append(f"nu={nu:g} below the strong-solution threshold -1")
        drift_const = 2.0 * (nu + N)
        return _coeffs(_SQRT_ABS_X, "1", repr(drift_const), _ABS_X, "1",
                       complex_mode=True, domain=NONNEGATIVE,
                       regularity=Regularity(True, True, True, True, True),
                       name=name, positivity_regime=regime,
                       warnings=tuple(warns))

    if name == "laguerre-complex":
        alpha = params["alpha"]
        regime = False
        if p is not None:
            regime = alpha >= p - 1
            if alpha < p - 1:
                warns.append(f"alpha={alpha:g} below the positivity "
                             f"threshold p-1={p - 1:g}")
        return _coeffs(_SQRT_ABS_X, "1", repr(2.0 * alpha), _ABS_X, "1",
                       complex_mode=True, domain=NONNEGATIVE,
                       regularity=Regularity(True, True, True, True, True),
                       name=name, positivity_regime=regime,
                       warnings=tuple(warns))

    if name in ("jacobi", "beta-jacobi"):
        q = params["q"]
        r = params["r"]
        beta = params.get("beta", 1.0)
        regime = False
        if p is not None:
            regime = min(q, r) >= p - 1 and beta >= 1.0
            if min(q, r) < p - 1:
                warns.append(f"q^r={min(q, r):g} below the domain-preservation "
                             f"threshold p-1={p - 1:g}")
        if beta < 1.0:
            warns.append(f"beta={beta:g} below the non-collision threshold 1")
        b_expr = f"{q!r} - ({q!r} + {r!r})*x"
        return _coeffs(_SQRT_ABS_X, _SQRT_ABS_1MX, b_expr, _ABS_X, _ABS_1MX,
                       beta=beta, domain=UNIT_INTERVAL,
                       regularity=Regularity(True, True, True, True, True),
                       name=name, positivity_regime=regime,
                       warnings=tuple(warns))

    raise ValueError(f"catalog cannot build {name!r}; custom models are "
                     "assembled with custom_coefficients")


def custom_coefficients(g, h, b, beta=1.0, complex_mode=False,
                        domain=REAL_LINE, regularity=None):
    """Coefficients from expression strings in the scalarfn grammar."""
    gf = ScalarFn.parse(g)
    hf = ScalarFn.parse(h)
    bf = ScalarFn.parse(b)
    return SpectralCoefficients(
        g=gf, h=hf, b=bf, g2=gf.squared(), h2=hf.squared(),
        beta=beta, complex_mode=complex_mode, domain=domain,
        regularity=regularity or Regularity(), name="custom")


def kernel_G(coeff, x, y):
    """Interaction kernel G(x, y) = g2(x) h2(y) + g2(y) h2(x)."""
    return coeff.g2(x) * coeff.h2(y) + coeff.g2(y) * coeff.h2(x)


def _check_ascending(lam):
    lam = np.asarray(lam, dtype=np.float64)
    if lam.ndim != 1:
        raise ValueError("expected a vector of eigenvalues")
    if lam.size > 1 and np.any(np.diff(lam) <= 0):
        raise OrderingError("eigenvalues must be strictly ascending")
    return lam


def interaction_vector(coeff, lam):
    """S_i = sum_{k != i} G(l_i, l_k) / (l_i - l_k) for strictly ordered lam."""
    lam = _check_ascending(lam)
    _, _, _, g2v, h2v = kernels.coefficient_values(lam, coeff.programs())
    return kernels.interaction_sums(lam, g2v, h2v)


def eigen_drift(coeff, lam):
    """Drift vector of the eigenvalue system at state lam.

    beta * (b(l_i) + m * S_i) with the interaction doubled (m = 2) in
    complex mode.  Bitwise identical to what the path integrator applies.
    """
    lam = _check_ascending(lam)
    _, drift, _, _ = kernels.drift_and_diffusion(
        lam, coeff.programs(), coeff.beta, coeff.interaction_multiplier)
    return drift


def diffusion_vector(coeff, lam):
    """Per-component diffusion coefficients 2 g(l_i) h(l_i)."""
    lam = _check_ascending(lam)
    coef, _, _, _ = kernels.drift_and_diffusion(
        lam, coeff.programs(), coeff.beta, coeff.interaction_multiplier)
    return coef


def lipschitz_probe(fn, lo, hi, n=2001):
    """Diagnostic finite-difference estimate of a Lipschitz constant on [lo, hi]."""
    xs = np.linspace(lo, hi, n)
    vals = np.array([fn(x) for x in xs])
    return float(np.max(np.abs(np.diff(vals)) / np.diff(xs)))
