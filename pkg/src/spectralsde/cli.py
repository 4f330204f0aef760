"""Command-line front end.

    spectral-sde --config run.cfg [--seed N] [--paths N] [--workers N]
                 [--out DIR] [--quiet]

The command itself (simulate-matrix, simulate-spectral, verify-collision,
verify-consistency, verify-positivity, verify-convergence) lives in the
config file.  Seed priority: --seed flag, then run.seed in the config, then
the SPECTRAL_SDE_SEED environment variable.  Exit status: 0 when all
verdicts pass (or a simulation completes), 1 when any verdict fails, 2 on
configuration or execution errors.

Artifacts are deterministic for a fixed seed; the manifest's ``timestamp``
field (wall-clock data) is the only part that varies between identical runs.
"""

from __future__ import annotations

import argparse
import datetime
import json
import os
import sys
import time

import numpy as np

from . import __version__
from ._backend import BACKEND
from .config import ConfigError, parse_config, serialize_config, with_overrides
from .errors import SpectralSdeError
from .linalg import SymmetricMatrixState
from .matrix import MatrixSchemeConfig, simulate_matrix
from .models import Domain, custom_coefficients
from .noise import NoiseBundle, derive_stream
from .spectral import SpectralSchemeConfig, simulate_spectral
from .trajectory import write_events_jsonl, write_matrix_csv, write_spectral_csv
from .verify import (collision_experiment, consistency_experiment,
                     convergence_experiment, default_lambda0,
                     positivity_experiment, resolve_model)

ENV_SEED = "SPECTRAL_SDE_SEED"


def _parser():
    ap = argparse.ArgumentParser(
        prog="spectral-sde",
        description="Simulate spectrum-acting matrix SDEs and verify their "
                    "non-collision, positivity, and uniqueness surrogates.")
    ap.add_argument("--config", required=True, help="path to the run config")
    ap.add_argument("--seed", type=int, default=None,
                    help="override the base seed (u64)")
    ap.add_argument("--paths", type=int, default=None,
                    help="override the path count")
    ap.add_argument("--workers", type=int, default=None,
                    help="override the worker process count")
    ap.add_argument("--out", default=None, help="override the output directory")
    ap.add_argument("--quiet", action="store_true", help="suppress stdout")
    return ap


def _say(quiet, *args):
    if not quiet:
        print(*args)


def spectral_scheme(config):
    s = config.scheme
    return SpectralSchemeConfig(dt=s.dt, T=s.T, eps_gap=s.eps_gap,
                                adaptive=s.adaptive, truncation=s.truncation,
                                record_stride=s.stride,
                                max_halvings=s.max_halvings,
                                track_h=s.track_h)


def matrix_scheme(config):
    s = config.scheme
    return MatrixSchemeConfig(dt=s.dt, T=s.T, record_stride=s.stride)


def _resolve(config):
    m = config.model
    if m.model == "custom":
        coeff = custom_coefficients(m.g, m.h, m.b, beta=m.beta or 1.0,
                                    complex_mode=m.complex)
        lam0 = (np.asarray(m.lambda0, dtype=np.float64)
                if m.lambda0 is not None
                else default_lambda0("custom", m.p))
        return None, coeff, lam0
    mid = m.model_id()
    return resolve_model(mid, m.p, m.lambda0)


def _write_manifest(outdir, config, wall_s):
    manifest = {
        "config": serialize_config(config),
        "command": config.command,
        "seed": config.run.seed,
        "version": __version__,
        "backend": BACKEND,
        "timestamp": {
            "utc": datetime.datetime.now(datetime.timezone.utc).isoformat(),
            "wall_time_s": wall_s,
        },
    }
    with open(os.path.join(outdir, "manifest.json"), "w") as f:
        json.dump(manifest, f, sort_keys=True, indent=2)
        f.write("\n")


def _simulate(config, quiet):
    mid, coeff, lam0 = _resolve(config)
    seed = config.run.seed
    outdir = config.run.out
    os.makedirs(outdir, exist_ok=True)
    all_events = []
    matrix_level = config.command == "simulate-matrix"
    if matrix_level:
        scheme = matrix_scheme(config)
        x0 = SymmetricMatrixState.from_array(
            np.diag(lam0), hermitian=coeff.complex_mode)
        kind = "complex-matrix" if coeff.complex_mode else "matrix"
    else:
        scheme = spectral_scheme(config)
        kind = "spectral"
    for i in range(config.run.paths):
        bundle = NoiseBundle(kind=kind, p=len(lam0), n=scheme.n_steps,
                             dt=scheme.dt, seed=seed,
                             stream=derive_stream(seed, i))
        if matrix_level:
            rec = simulate_matrix(x0, coeff, bundle, scheme)
            name = f"trajectory_matrix_{i:04d}.csv"
            with open(os.path.join(outdir, name), "w") as f:
                write_matrix_csv(rec, f)
        else:
            H0 = np.eye(len(lam0)) if config.scheme.track_h else None
            rec = simulate_spectral(lam0, H0, coeff, bundle, scheme)
            name = f"trajectory_spectral_{i:04d}.csv"
            with open(os.path.join(outdir, name), "w") as f:
                write_spectral_csv(rec, f)
        for e in rec.events:
            all_events.append((i, e))
        _say(quiet, f"path {i}: {len(rec.times)} records -> {name}")
    with open(os.path.join(outdir, "events.jsonl"), "w") as f:
        for i, e in all_events:
            row = json.loads(e.to_json())
            row["path"] = i
            f.write(json.dumps(row, sort_keys=True) + "\n")
    return 0


def _verify(config, quiet):
    m = config.model
    run = config.run
    if m.model == "custom":
        raise SpectralSdeError(
            "verify commands need a catalog model (custom coefficients have "
            "no reference theorem thresholds)")
    mid = m.model_id()
    seed = run.seed
    if config.command == "verify-collision":
        report = collision_experiment(mid, spectral_scheme(config), run.paths,
                                      lam0=m.lambda0, seed=seed,
                                      workers=run.workers)
    elif config.command == "verify-consistency":
        report = consistency_experiment(mid, matrix_scheme(config),
                                        spectral_scheme(config), run.paths,
                                        lam0=m.lambda0, seed=seed,
                                        workers=run.workers)
    elif config.command == "verify-positivity":
        report = positivity_experiment(mid, spectral_scheme(config), run.paths,
                                       lam0=m.lambda0, seed=seed,
                                       workers=run.workers)
    elif config.command == "verify-convergence":
        report = convergence_experiment(mid, spectral_scheme(config),
                                        run.levels, run.paths,
                                        lam0=m.lambda0, seed=seed,
                                        workers=run.workers)
    else:
        raise SpectralSdeError(f"unhandled command {config.command!r}")

    outdir = run.out
    os.makedirs(outdir, exist_ok=True)
    with open(os.path.join(outdir, "report.json"), "w") as f:
        f.write(report.to_json() + "\n")
    with open(os.path.join(outdir, "report.txt"), "w") as f:
        f.write(report.text_summary())
    _say(quiet, report.text_summary().rstrip())
    return 0 if report.passed else 1


def run(config, quiet=False):
    """Execute a validated RunConfig; returns the process exit status."""
    t0 = time.monotonic()
    if config.run.seed is None:
        print("error: no seed given (use --seed, run.seed, or "
              f"{ENV_SEED})", file=sys.stderr)
        return 2
    try:
        if config.command.startswith("simulate-"):
            status = _simulate(config, quiet)
        else:
            status = _verify(config, quiet)
    except (SpectralSdeError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    _write_manifest(config.run.out, config, time.monotonic() - t0)
    return status


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        with open(args.config) as f:
            text = f.read()
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 2
    try:
        config = parse_config(text)
    except ConfigError as exc:
        for line in exc.errors:
            print(f"config error: {line}", file=sys.stderr)
        return 2
    seed = args.seed
    if seed is None and config.run.seed is None:
        env = os.environ.get(ENV_SEED)
        if env is not None:
            try:
                seed = int(env)
            except ValueError:
                print(f"error: {ENV_SEED} must be an integer", file=sys.stderr)
                return 2
    config = with_overrides(config, seed=seed, paths=args.paths,
                            workers=args.workers, out=args.out)
    return run(config, quiet=args.quiet)


if __name__ == "__main__":
    sys.exit(main())
