"""Verification harness: collision statistics, Lyapunov monitoring, boundary
monitors, matrix vs spectral consistency, trace identities, and shared-noise
strong-convergence measurement.

Statistical verdicts use two-sided 3-standard-error tests.  Zero collisions
among N paths bounds the per-path collision probability by roughly 3/N; the
reports corroborate the almost-sure statements at desk scale, they do not
prove them.  All aggregation uses exact summation (math.fsum) over per-path
values in path-index order, so verdicts do not depend on the worker count.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import OrderingError
from .linalg import SymmetricMatrixState
from .matrix import MatrixSchemeConfig, simulate_matrix
from .models import ModelId, catalog, kernel_G
from .noise import NoiseBundle, SharedPath, derive_stream
from .spectral import SpectralSchemeConfig, simulate_spectral

# ---------------------------------------------------------------------------
# Lyapunov functional and its finite-variation decomposition.


def lyapunov_U(lam):
    """U = -sum_{i<j} log(l_j - l_i); blows up at collisions."""
    lam = np.asarray(lam, dtype=np.float64)
    p = lam.size
    if p > 1 and np.min(np.diff(lam)) <= 0:
        raise OrderingError("eigenvalues must be strictly ascending")
    acc = 0.0
    for i in range(p - 1):
        for j in range(i + 1, p):
            acc += math.log(lam[j] - lam[i])
    return -acc


def lyapunov_drift_components(lam, coeff):
    """Instantaneous finite-variation rates (a1, a2, a3) of dU.

    a1: drift differences; a2: diffusion-coupling term plus the
    2(1-beta) G / gap^2 deformation term; a3: the triple sum (identically
    zero for p = 2).  Complex-mode systems are mapped to their equivalent
    real deformation (beta doubled, b halved) first.
    """
    lam = np.asarray(lam, dtype=np.float64)
    p = lam.size
    if p > 1 and np.min(np.diff(lam)) <= 0:
        raise OrderingError("eigenvalues must be strictly ascending")
    beta = coeff.beta
    bfn = coeff.b
    if coeff.complex_mode:
        beta = 2.0 * beta
        bvals = [0.5 * bfn(x) for x in lam]
    else:
        bvals = [bfn(x) for x in lam]
    g2 = [coeff.g2(x) for x in lam]
    h2 = [coeff.h2(x) for x in lam]

    a1 = 0.0
    a2 = 0.0
    for i in range(p - 1):
        for j in range(i + 1, p):
            gap = lam[j] - lam[i]
            a1 += (bvals[i] - bvals[j]) / gap
            a2 += 2.0 * (g2[j] - g2[i]) * (h2[j] - h2[i]) / (gap * gap)
            a2 += 2.0 * (1.0 - beta) * (g2[i] * h2[j] + g2[j] * h2[i]) / (gap * gap)
    a1 *= beta

    a3 = 0.0
    for i in range(p - 1):
        for j in range(i + 1, p):
            inner = 0.0
            for k in range(p):
                if k != i and k != j:
                    Gik = g2[i] * h2[k] + g2[k] * h2[i]
                    Gjk = g2[j] * h2[k] + g2[k] * h2[j]
                    inner += Gik / (lam[i] - lam[k]) - Gjk / (lam[j] - lam[k])
            a3 += inner / (lam[j] - lam[i])
    a3 *= beta
    return a1, a2, a3


# ---------------------------------------------------------------------------
# Reports.


@dataclass(frozen=True)
class Verdict:
    name: str
    passed: bool
    threshold: str
    observed: float

    def line(self):
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] {self.name}: observed {self.observed:.6g} ({self.threshold})"


@dataclass
class ExperimentReport:
    """Serializable outcome of one experiment."""

    kind: str
    model: dict
    config: dict
    paths: int
    events: dict = field(default_factory=dict)
    moments: dict = field(default_factory=dict)
    convergence: dict = field(default_factory=dict)
    verdicts: list = field(default_factory=list)

    @property
    def passed(self):
        return all(v.passed for v in self.verdicts)

    def to_json_dict(self):
        return {
            "kind": self.kind,
            "model": self.model,
            "config": self.config,
            "paths": self.paths,
            "events": self.events,
            "moments": self.moments,
            "convergence": self.convergence,
            "verdicts": [asdict(v) for v in self.verdicts],
        }

    def to_json(self):
        return json.dumps(self.to_json_dict(), sort_keys=True, indent=2)

    def text_summary(self):
        lines = [f"experiment: {self.kind}",
                 f"model: {json.dumps(self.model, sort_keys=True)}",
                 f"paths: {self.paths}"]
        for key, val in sorted(self.events.items()):
            lines.append(f"events.{key}: {val}")
        for key, val in sorted(self.moments.items()):
            lines.append(f"moments.{key}: {val}")
        if self.convergence:
            lines.append(f"convergence: {json.dumps(self.convergence, sort_keys=True)}")
        if self.verdicts:
            lines += [v.line() for v in self.verdicts]
        else:
            lines.append("informational run, no pass/fail verdicts")
        return "\n".join(lines) + "\n"


def _fmean(xs):
    return math.fsum(xs) / len(xs)


def _fvar(xs, mean=None):
    if len(xs) < 2:
        return 0.0
    m = _fmean(xs) if mean is None else mean
    return math.fsum((x - m) ** 2 for x in xs) / (len(xs) - 1)


def _se_mean(xs):
    return math.sqrt(_fvar(xs) / len(xs))


def _se_var(xs):
    # asymptotic standard error of the sample variance
    n = len(xs)
    m = _fmean(xs)
    v = _fvar(xs, m)
    m4 = math.fsum((x - m) ** 4 for x in xs) / n
    return math.sqrt(max(m4 - v * v, 0.0) / n)


def _quantiles(xs, qs=(0.0, 0.05, 0.25, 0.5, 0.75, 0.95, 1.0)):
    arr = np.sort(np.asarray(xs, dtype=np.float64))
    return {f"q{int(q * 100):02d}": float(np.quantile(arr, q)) for q in qs}


# ---------------------------------------------------------------------------
# Model bookkeeping shared by the experiments.


def default_lambda0(model_id, p):
    """Canonical strictly ordered start inside the family's domain."""
    name = model_id.name if isinstance(model_id, ModelId) else model_id
    if name in ("jacobi", "beta-jacobi"):
        return np.array([(i + 1.0) / (p + 1.0) for i in range(p)])
    if name == "dyson":
        return np.array([i - (p - 1) / 2.0 for i in range(p)])
    return np.array([float(i + 1) for i in range(p)])


def resolve_model(model_id, p, lam0=None):
    mid = model_id if isinstance(model_id, ModelId) else ModelId(*model_id)
    if mid.name == "besq-particles":
        p = int(mid.parameters["N"])
    params = dict(mid.parameters)
    if "p" not in params and mid.name != "dyson":
        params["p"] = p
        mid = ModelId(mid.name, params)
    coeff = catalog(mid)
    lam0 = default_lambda0(mid, p) if lam0 is None else \
        np.asarray(lam0, dtype=np.float64)
    if lam0.size != p:
        raise ValueError(f"lambda0 has {lam0.size} entries, expected {p}")
    return mid, coeff, lam0


def collision_free_expected(model_id, coeff):
    """True / False when theory makes a claim for this model, else None."""
    name = model_id.name
    beta = coeff.beta
    if name == "dyson":
        return True if beta >= 1.0 else False
    if name in ("wishart", "generalized-wishart", "wishart-ou", "beta-wishart"):
        return True if beta >= 1.0 else None
    if name in ("jacobi", "beta-jacobi"):
        return True if beta >= 1.0 else None
    if name in ("besq-particles", "laguerre-complex"):
        return True  # complex-mode systems: threshold is beta >= 1/2
    return None


def model_dict(model_id, lam0):
    return {"name": model_id.name,
            "parameters": {k: v for k, v in sorted(model_id.parameters.items())},
            "lambda0": [float(v) for v in lam0]}


def _config_dict(config):
    d = asdict(config)
    return {k: d[k] for k in sorted(d)}


# ---------------------------------------------------------------------------
# Path fan-out. Workers recompute from (seed, stream) keys, so the result is
# identical for any worker count; reduction happens in path-index order.


def _spectral_chunk(payload):
    (coeff, lam0, config, seed, stream0, n, collect_terminal) = payload
    out = []
    p = len(lam0)
    n_streams = p + p * (p - 1) // 2
    for i in range(n):
        bundle = NoiseBundle(kind="spectral", p=p, n=config.n_steps,
                             dt=config.dt, seed=seed,
                             stream=derive_stream(seed, stream0 + i))
        rec = simulate_spectral(lam0, None, coeff, bundle, config)
        summary = {
            "event": rec.events[0].type if rec.events and
            rec.events[0].type in ("collision", "explosion") else None,
            "event_t": rec.events[0].t if rec.events else None,
            "min_gap": rec.stats["min_gap_overall"],
            "max_lyapunov": rec.stats["max_lyapunov"],
            "min_lowest": rec.stats["min_lowest"],
            "max_highest": rec.stats["max_highest"],
            "clamp_count": rec.stats["clamp_count"],
            "min_pre_clamp": rec.stats["min_pre_clamp"],
        }
        if collect_terminal:
            summary["terminal"] = [float(v) for v in rec.terminal]
            summary["completed"] = rec.completed()
        out.append(summary)
    return out


def _matrix_chunk(payload):
    (coeff, x0_entries, hermitian, config, seed, stream0, n) = payload
    out = []
    x0 = SymmetricMatrixState(x0_entries, hermitian=hermitian)
    kind = "complex-matrix" if hermitian else "matrix"
    for i in range(n):
        bundle = NoiseBundle(kind=kind, p=x0.dim, n=config.n_steps,
                             dt=config.dt, seed=seed,
                             stream=derive_stream(seed, stream0 + i))
        rec = simulate_matrix(x0, coeff, bundle, config)
        out.append({
            "terminal": [float(v) for v in rec.terminal],
            "completed": rec.completed(),
            "min_lowest": rec.stats["min_lowest"],
            "max_highest": rec.stats["max_highest"],
        })
    return out


def _fan_out(fn, payloads, workers):
    if workers <= 1 or len(payloads) <= 1:
        results = [fn(p) for p in payloads]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(fn, payloads))
    merged = []
    for chunk in results:
        merged.extend(chunk)
    return merged


def _chunk_payloads(total, workers, make_payload):
    nchunks = max(1, min(workers, total)) if workers > 1 else 1
    base = total // nchunks
    rem = total % nchunks
    payloads = []
    start = 0
    for c in range(nchunks):
        n = base + (1 if c < rem else 0)
        if n == 0:
            continue
        payloads.append(make_payload(start, n))
        start += n
    return payloads


# ---------------------------------------------------------------------------
# Experiments.


def collision_experiment(model_id, config, paths, lam0=None, seed=0,
                         workers=1, expected_fraction=0.2, histogram_bins=20):
    """Count collision events across independent paths.

    Verdict: zero events when the non-collision theorem applies; first
    collision fraction above ``expected_fraction`` for Dyson below the
    critical temperature.  Other parameter ranges are informational.
    """
    mid, coeff, lam0 = resolve_model(model_id, len(lam0) if lam0 is not None
                                     else int(model_id.parameters.get("p", 2)),
                                     lam0)
    cfg = config
    payloads = _chunk_payloads(
        paths, workers,
        lambda s, n: (coeff, lam0, cfg, seed, s, n, False))
    rows = _fan_out(_spectral_chunk, payloads, workers)

    collision_times = [r["event_t"] for r in rows if r["event"] == "collision"]
    collisions = len(collision_times)
    explosions = sum(1 for r in rows if r["event"] == "explosion")
    hist_counts, hist_edges = np.histogram(
        collision_times, bins=histogram_bins, range=(0.0, cfg.T))
    fraction = collisions / paths

    expected = collision_free_expected(mid, coeff)
    verdicts = []
    if expected is True:
        verdicts.append(Verdict(
            name="no_collisions", passed=collisions == 0,
            threshold=f"0 events in {paths} paths "
                      f"(bounds per-path probability by ~{3.0 / paths:.2g})",
            observed=float(collisions)))
    elif expected is False:
        verdicts.append(Verdict(
            name="collisions_observed",
            passed=fraction > expected_fraction,
            threshold=f"collision fraction > {expected_fraction:g}",
            observed=fraction))

    return ExperimentReport(
        kind="collision", model=model_dict(mid, lam0),
        config=_config_dict(cfg), paths=paths,
        events={"collisions": collisions, "explosions": explosions,
                "collision_fraction": fraction,
                "first_collision_histogram": {
                    "edges": [float(e) for e in hist_edges],
                    "counts": [int(c) for c in hist_counts]}},
        moments={
            "min_gap_quantiles": _quantiles([r["min_gap"] for r in rows]),
            "lyapunov_max": max(r["max_lyapunov"] for r in rows),
        },
        verdicts=verdicts)


def _moment_block(terminals, p):
    means = []
    ses = []
    variances = []
    var_ses = []
    for i in range(p):
        xs = [t[i] for t in terminals]
        m = _fmean(xs)
        means.append(m)
        ses.append(_se_mean(xs))
        variances.append(_fvar(xs, m))
        var_ses.append(_se_var(xs))
    sums = [math.fsum(t) for t in terminals]
    return {"mean": means, "se_mean": ses, "var": variances, "se_var": var_ses,
            "trace_mean": _fmean(sums), "trace_se": _se_mean(sums)}


def analytic_trace(model_id, coeff, lam0, T):
    """Closed-form E sum(lambda_T) for the catalog families (affine b)."""
    name = model_id.name
    params = model_id.parameters
    p = len(lam0)
    m0 = float(np.sum(lam0))
    if name == "dyson":
        a0, a1 = 0.0, 0.0
    elif name in ("wishart", "generalized-wishart", "beta-wishart"):
        a0, a1 = params["alpha"], 0.0
    elif name == "wishart-ou":
        a0, a1 = params["alpha"], params["c"]
    elif name == "besq-particles":
        a0, a1 = 2.0 * (params["nu"] + params["N"]), 0.0
    elif name == "laguerre-complex":
        a0, a1 = 2.0 * params["alpha"], 0.0
    elif name in ("jacobi", "beta-jacobi"):
        a0, a1 = params["q"], -(params["q"] + params["r"])
    else:
        return None
    beta = coeff.beta
    if a1 == 0.0:
        return m0 + beta * p * a0 * T
    c = beta * a1
    k = p * a0 / a1
    return -k + (m0 + k) * math.exp(c * T)


def consistency_experiment(model_id, matrix_config, spectral_config, paths,
                           lam0=None, seed=0, workers=1, sigma=3.0):
    """Compare terminal eigenvalue moments from the matrix-level simulation
    against the spectral-level simulation with independent noise."""
    mid, coeff, lam0 = resolve_model(model_id,
                                     len(lam0) if lam0 is not None
                                     else int(model_id.parameters.get("p", 2)),
                                     lam0)
    p = len(lam0)
    x0 = np.diag(lam0).astype(np.complex128 if coeff.complex_mode else np.float64)

    mat_payloads = _chunk_payloads(
        paths, workers,
        lambda s, n: (coeff, x0, coeff.complex_mode, matrix_config, seed, s, n))
    mat_rows = _fan_out(_matrix_chunk, mat_payloads, workers)

    spec_payloads = _chunk_payloads(
        paths, workers,
        lambda s, n: (coeff, lam0, spectral_config, seed, paths + s, n, True))
    spec_rows = _fan_out(_spectral_chunk, spec_payloads, workers)

    incomplete = sum(1 for r in mat_rows if not r["completed"]) + \
        sum(1 for r in spec_rows if not r["completed"])
    mat_terms = [r["terminal"] for r in mat_rows]
    spec_terms = [r["terminal"] for r in spec_rows]
    bm = _moment_block(mat_terms, p)
    bs = _moment_block(spec_terms, p)

    verdicts = []
    for i in range(p):
        dm = abs(bm["mean"][i] - bs["mean"][i])
        se = math.sqrt(bm["se_mean"][i] ** 2 + bs["se_mean"][i] ** 2)
        verdicts.append(Verdict(
            name=f"mean_lambda_{i + 1}", passed=dm < sigma * se,
            threshold=f"|diff| < {sigma:g} combined SE = {sigma * se:.4g}",
            observed=dm))
        dv = abs(bm["var"][i] - bs["var"][i])
        sev = math.sqrt(bm["se_var"][i] ** 2 + bs["se_var"][i] ** 2)
        verdicts.append(Verdict(
            name=f"var_lambda_{i + 1}", passed=dv < sigma * sev,
            threshold=f"|diff| < {sigma:g} combined SE = {sigma * sev:.4g}",
            observed=dv))

    target = analytic_trace(mid, coeff, lam0, matrix_config.T)
    if target is not None:
        for label, blk in (("matrix", bm), ("spectral", bs)):
            d = abs(blk["trace_mean"] - target)
            verdicts.append(Verdict(
                name=f"trace_drift_{label}",
                passed=d < sigma * blk["trace_se"],
                threshold=f"|mean sum - {target:.6g}| < "
                          f"{sigma:g} SE = {sigma * blk['trace_se']:.4g}",
                observed=d))
    if incomplete:
        verdicts.append(Verdict(
            name="all_paths_completed", passed=False,
            threshold="0 terminated paths", observed=float(incomplete)))

    return ExperimentReport(
        kind="consistency", model=model_dict(mid, lam0),
        config={"matrix": _config_dict(matrix_config),
                "spectral": _config_dict(spectral_config)},
        paths=paths,
        events={"incomplete_paths": incomplete},
        moments={"matrix": bm, "spectral": bs,
                 "analytic_trace": target},
        verdicts=verdicts)


def positivity_experiment(model_id, config, paths, lam0=None, seed=0,
                          workers=1):
    """Boundary behavior: per-path minimum of the lowest particle, maximum of
    the highest, clamp tallies.  Pass/fail only when the preservation theorem
    applies; otherwise the excursion statistics are the point of the run."""
    mid, coeff, lam0 = resolve_model(model_id,
                                     len(lam0) if lam0 is not None
                                     else int(model_id.parameters.get("p", 3)),
                                     lam0)
    payloads = _chunk_payloads(
        paths, workers, lambda s, n: (coeff, lam0, config, seed, s, n, False))
    rows = _fan_out(_spectral_chunk, payloads, workers)

    min_low = min(r["min_lowest"] for r in rows)
    max_high = max(r["max_highest"] for r in rows)
    clamp_total = sum(r["clamp_count"] for r in rows)
    pre_clamp_min = min(r["min_pre_clamp"] for r in rows)
    excursion_paths = sum(1 for r in rows if r["clamp_count"] > 0)

    in_regime = (coeff.positivity_regime and coeff.domain.bounded
                 and config.truncation == "full-truncation")
    verdicts = []
    if in_regime:
        lo, hi = coeff.domain.lo, coeff.domain.hi
        ok_low = min_low >= lo
        verdicts.append(Verdict(
            name="lowest_particle_in_domain", passed=ok_low,
            threshold=f"min over paths and time >= {lo:g}", observed=min_low))
        if math.isfinite(hi):
            verdicts.append(Verdict(
                name="highest_particle_in_domain", passed=max_high <= hi,
                threshold=f"max over paths and time <= {hi:g}",
                observed=max_high))

    return ExperimentReport(
        kind="positivity", model=model_dict(mid, lam0),
        config=_config_dict(config), paths=paths,
        events={"paths_with_clamps": excursion_paths,
                "clamp_steps_total": clamp_total,
                "collisions": sum(1 for r in rows if r["event"] == "collision")},
        moments={"min_lowest": min_low, "max_highest": max_high,
                 "min_pre_clamp_proposal": pre_clamp_min,
                 "min_lowest_quantiles": _quantiles(
                     [r["min_lowest"] for r in rows])},
        verdicts=verdicts)


def _convergence_chunk(payload):
    (coeff, lam0, base_config, seed, stream0, n, levels, max_level) = payload
    p = len(lam0)
    out = []
    for i in range(n):
        bundle = NoiseBundle(kind="spectral", p=p, n=base_config.n_steps,
                             dt=base_config.dt, seed=seed,
                             stream=derive_stream(seed, stream0 + i))
        terms = []
        path = SharedPath(base=bundle, level=0, max_level=max_level)
        for lv in range(levels):
            cfg = SpectralSchemeConfig(
                dt=path.dt, T=base_config.T, eps_gap=base_config.eps_gap,
                adaptive=False, truncation=base_config.truncation,
                record_stride=path.n_steps,
                overflow=base_config.overflow)
            rec = simulate_spectral(lam0, None, coeff, path, cfg)
            terms.append([float(v) for v in rec.terminal] if rec.completed()
                         else None)
            if lv + 1 < levels:
                path = path.refine()
        out.append(terms)
    return out


def convergence_experiment(model_id, base_config, levels, paths, lam0=None,
                           seed=0, workers=1, ratio_min=1.2, max_level=None):
    """Shared-noise refinement study: RMS terminal differences between
    consecutive dyadic levels must shrink by at least ``ratio_min`` per
    halving.  A desk-scale stand-in for pathwise uniqueness."""
    if levels < 2:
        raise ValueError("need at least two refinement levels")
    mid, coeff, lam0 = resolve_model(model_id,
                                     len(lam0) if lam0 is not None
                                     else int(model_id.parameters.get("p", 2)),
                                     lam0)
    if max_level is None:
        max_level = levels - 1
    payloads = _chunk_payloads(
        paths, workers,
        lambda s, n: (coeff, lam0, base_config, seed, s, n, levels, max_level))
    rows = _fan_out(_convergence_chunk, payloads, workers)

    incomplete = sum(1 for terms in rows if any(t is None for t in terms))
    rms = []
    for lv in range(levels - 1):
        sq = [sum((a - b) ** 2 for a, b in zip(terms[lv], terms[lv + 1]))
              for terms in rows if terms[lv] is not None
              and terms[lv + 1] is not None]
        rms.append(math.sqrt(_fmean(sq)))
    ratios = [rms[i] / rms[i + 1] if rms[i + 1] > 0 else math.inf
              for i in range(len(rms) - 1)]

    verdicts = [Verdict(
        name="rms_contraction",
        passed=all(r >= ratio_min for r in ratios) and incomplete == 0,
        threshold=f"every consecutive RMS ratio >= {ratio_min:g}",
        observed=min(ratios) if ratios else math.inf)]

    return ExperimentReport(
        kind="convergence", model=model_dict(mid, lam0),
        config=_config_dict(base_config), paths=paths,
        events={"incomplete_paths": incomplete},
        convergence={"levels": list(range(levels)),
                     "dt": [base_config.dt / 2 ** lv for lv in range(levels)],
                     "rms_consecutive": rms, "ratios": ratios},
        verdicts=verdicts)
