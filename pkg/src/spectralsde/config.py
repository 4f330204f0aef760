"""Run configuration: a flat key = value text format with dotted sections.

Example::

    command = verify-collision
    model.model = dyson
    model.beta = 1.5
    model.p = 2
    model.lambda0 = 0.0, 0.1
    scheme.dt = 1e-4
    scheme.T = 1.0
    run.paths = 200
    run.seed = 42

Unknown keys are rejected (strict parsing), `#` starts a comment, and
validation reports every problem at once, not just the first.  Exact
threshold parameters (alpha, beta, q, r, nu) drive which theorems apply, so
silent misconfiguration must be impossible.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .models import ModelId

COMMANDS = ("simulate-matrix", "simulate-spectral", "verify-collision",
            "verify-consistency", "verify-positivity", "verify-convergence")

TRUNCATION_VALUES = ("full-truncation", "reflect-reject")

_MODEL_NAMES = ("dyson", "wishart", "generalized-wishart", "wishart-ou",
                "besq-particles", "jacobi", "beta-wishart", "beta-jacobi",
                "laguerre-complex", "custom")

_MODEL_PARAM_KEYS = ("alpha", "nu", "N", "q", "r", "c", "beta")


class ConfigError(Exception):
    """Carries every validation problem found in a config."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("\n".join(self.errors))


@dataclass(frozen=True)
class ModelSpec:
    model: str
    p: int = 2
    alpha: float | None = None
    nu: float | None = None
    N: float | None = None
    q: float | None = None
    r: float | None = None
    c: float | None = None
    beta: float | None = None
    complex: bool = False
    lambda0: tuple | None = None
    g: str | None = None
    h: str | None = None
    b: str | None = None

    def model_id(self):
        params = {}
        for key in _MODEL_PARAM_KEYS:
            v = getattr(self, key)
            if v is not None:
                params[key] = v
        if self.model not in ("dyson", "custom"):
            params["p"] = self.p
        if self.model == "besq-particles":
            params.pop("p", None)
        return ModelId(self.model, params)


@dataclass(frozen=True)
class SchemeSpec:
    dt: float
    T: float
    eps_gap: float = 1e-12
    adaptive: bool = True
    truncation: str = "full-truncation"
    stride: int = 1
    max_halvings: int = 20
    track_h: bool = False


@dataclass(frozen=True)
class RunSpec:
    paths: int = 1
    seed: int | None = None
    workers: int = 1
    out: str = "out"
    levels: int = 4


@dataclass(frozen=True)
class RunConfig:
    command: str
    model: ModelSpec
    scheme: SchemeSpec
    run: RunSpec


_BOOL_WORDS = {"true": True, "false": False, "yes": True, "no": False,
               "1": True, "0": False}


def _as_bool(s):
    v = _BOOL_WORDS.get(s.strip().lower())
    if v is None:
        raise ValueError(f"expected a boolean, got {s!r}")
    return v


def _as_int(s):
    v = int(s.strip())
    return v


def _as_float(s):
    return float(s.strip())


def _as_float_list(s):
    parts = [x.strip() for x in s.split(",") if x.strip()]
    if not parts:
        raise ValueError("expected a comma-separated list of numbers")
    return tuple(float(x) for x in parts)


def _as_str(s):
    return s.strip()


# key -> (converter, description)
_SCHEMA = {
    "command": (_as_str, "command name"),
    "model.model": (_as_str, "model family"),
    "model.p": (_as_int, "matrix/system order"),
    "model.alpha": (_as_float, "shape parameter"),
    "model.nu": (_as_float, "Bessel index"),
    "model.N": (_as_int, "particle count"),
    "model.q": (_as_float, "Jacobi parameter q"),
    "model.r": (_as_float, "Jacobi parameter r"),
    "model.c": (_as_float, "linear drift rate"),
    "model.beta": (_as_float, "inverse temperature"),
    "model.complex": (_as_bool, "complex/Hermitian mode (custom models)"),
    "model.lambda0": (_as_float_list, "initial spectrum"),
    "model.g": (_as_str, "custom g expression"),
    "model.h": (_as_str, "custom h expression"),
    "model.b": (_as_str, "custom b expression"),
    "scheme.dt": (_as_float, "base step size"),
    "scheme.T": (_as_float, "horizon"),
    "scheme.eps_gap": (_as_float, "collision tolerance"),
    "scheme.adaptive": (_as_bool, "adaptive halving"),
    "scheme.truncation": (_as_str, "boundary mode"),
    "scheme.stride": (_as_int, "record stride"),
    "scheme.max_halvings": (_as_int, "max halvings per step"),
    "scheme.track_h": (_as_bool, "integrate eigenvectors"),
    "run.paths": (_as_int, "path count"),
    "run.seed": (_as_int, "base seed"),
    "run.workers": (_as_int, "worker processes"),
    "run.out": (_as_str, "output directory"),
    "run.levels": (_as_int, "refinement levels (verify-convergence)"),
}


def parse_config(text):
    """Parse and validate; raises ConfigError listing every problem."""
    errors = []
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected key = value, got {raw.strip()!r}")
            continue
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key not in _SCHEMA:
            errors.append(f"line {lineno}: unknown key {key!r}")
            continue
        if key in values:
            errors.append(f"line {lineno}: duplicate key {key!r}")
            continue
        conv, _desc = _SCHEMA[key]
        try:
            values[key] = conv(val)
        except ValueError as exc:
            errors.append(f"line {lineno}: key {key!r}: {exc}")
    if errors:
        raise ConfigError(errors)
    return build_config(values)


def build_config(values):
    errors = []

    def need(key):
        if key not in values:
            errors.append(f"key {key!r} is required")
            return False
        return True

    command = values.get("command")
    if not need("command"):
        pass
    elif command not in COMMANDS:
        errors.append(f"key 'command': unknown command {command!r} "
                      f"(expected one of {', '.join(COMMANDS)})")

    name = values.get("model.model")
    if not need("model.model"):
        pass
    elif name not in _MODEL_NAMES:
        errors.append(f"key 'model.model': unknown family {name!r}")

    p = values.get("model.p", 2)
    if p < 1:
        errors.append("key 'model.p': must be >= 1")
    if p > 64:
        errors.append("key 'model.p': kernel limit is 64")

    beta = values.get("model.beta")
    if beta is not None and not beta > 0:
        errors.append("key 'model.beta': must be positive")
    nval = values.get("model.N")
    if nval is not None and nval < 1:
        errors.append("key 'model.N': must be >= 1")

    for key in ("scheme.dt", "scheme.T"):
        if key in values and not values[key] > 0:
            errors.append(f"key {key!r}: must be positive")
    if "scheme.dt" in values and "scheme.T" in values and \
            values["scheme.dt"] > values["scheme.T"]:
        errors.append("key 'scheme.dt': must not exceed scheme.T")
    if values.get("scheme.eps_gap", 1e-12) <= 0:
        errors.append("key 'scheme.eps_gap': must be positive")
    trunc = values.get("scheme.truncation", "full-truncation")
    if trunc not in TRUNCATION_VALUES:
        errors.append(f"key 'scheme.truncation': expected one of "
                      f"{TRUNCATION_VALUES}, got {trunc!r}")
    if values.get("scheme.stride", 1) < 1:
        errors.append("key 'scheme.stride': must be >= 1")
    if not 0 <= values.get("scheme.max_halvings", 20) <= 60:
        errors.append("key 'scheme.max_halvings': must be in [0, 60]")
    if values.get("run.paths", 1) < 1:
        errors.append("key 'run.paths': must be >= 1")
    if values.get("run.workers", 1) < 1:
        errors.append("key 'run.workers': must be >= 1")
    if values.get("run.levels", 4) < 2:
        errors.append("key 'run.levels': must be >= 2")
    seed = values.get("run.seed")
    if seed is not None and not 0 <= seed < 2 ** 64:
        errors.append("key 'run.seed': must fit in an unsigned 64-bit integer")

    need("scheme.dt")
    need("scheme.T")

    if name == "custom":
        for key in ("model.g", "model.h", "model.b"):
            if key not in values:
                errors.append(f"key {key!r} is required for custom models")
    else:
        for key in ("model.g", "model.h", "model.b"):
            if key in values:
                errors.append(f"key {key!r} is only valid for custom models")
        if values.get("model.complex"):
            errors.append("key 'model.complex': fixed by the family; "
                          "only custom models take it")

    lam0 = values.get("model.lambda0")
    if lam0 is not None:
        expect = int(values.get("model.N", p)) if name == "besq-particles" else p
        if len(lam0) != expect:
            errors.append(f"key 'model.lambda0': expected {expect} values, "
                          f"got {len(lam0)}")
        elif any(b <= a for a, b in zip(lam0, lam0[1:])):
            errors.append("key 'model.lambda0': must be strictly ascending")

    model = None
    if not errors and name is not None:
        model = ModelSpec(
            model=name, p=int(p),
            alpha=values.get("model.alpha"), nu=values.get("model.nu"),
            N=values.get("model.N"), q=values.get("model.q"),
            r=values.get("model.r"), c=values.get("model.c"),
            beta=values.get("model.beta"),
            complex=values.get("model.complex", False),
            lambda0=lam0,
            g=values.get("model.g"), h=values.get("model.h"),
            b=values.get("model.b"))
        if name != "custom":
            try:
                model.model_id()
            except ValueError as exc:
                errors.append(f"model block: {exc}")

    if errors:
        raise ConfigError(errors)

    scheme = SchemeSpec(
        dt=values["scheme.dt"], T=values["scheme.T"],
        eps_gap=values.get("scheme.eps_gap", 1e-12),
        adaptive=values.get("scheme.adaptive", True),
        truncation=trunc,
        stride=values.get("scheme.stride", 1),
        max_halvings=values.get("scheme.max_halvings", 20),
        track_h=values.get("scheme.track_h", False))
    run = RunSpec(
        paths=values.get("run.paths", 1), seed=seed,
        workers=values.get("run.workers", 1),
        out=values.get("run.out", "out"),
        levels=values.get("run.levels", 4))
    return RunConfig(command=command, model=model, scheme=scheme, run=run)


def serialize_config(config):
    """Canonical text form; parse_config(serialize_config(c)) == c."""
    m = config.model
    s = config.scheme
    r = config.run
    lines = [f"command = {config.command}", f"model.model = {m.model}",
             f"model.p = {m.p}"]
    for key in _MODEL_PARAM_KEYS:
        v = getattr(m, key)
        if v is not None:
            lines.append(f"model.{key} = {int(v) if key == 'N' else repr(v)}")
    if m.model == "custom":
        lines.append(f"model.complex = {str(m.complex).lower()}")
        for key in ("g", "h", "b"):
            lines.append(f"model.{key} = {getattr(m, key)}")
    if m.lambda0 is not None:
        lines.append("model.lambda0 = " + ", ".join(repr(v) for v in m.lambda0))
    lines += [
        f"scheme.dt = {s.dt!r}",
        f"scheme.T = {s.T!r}",
        f"scheme.eps_gap = {s.eps_gap!r}",
        f"scheme.adaptive = {str(s.adaptive).lower()}",
        f"scheme.truncation = {s.truncation}",
        f"scheme.stride = {s.stride}",
        f"scheme.max_halvings = {s.max_halvings}",
        f"scheme.track_h = {str(s.track_h).lower()}",
        f"run.paths = {r.paths}",
    ]
    if r.seed is not None:
        lines.append(f"run.seed = {r.seed}")
    lines += [
        f"run.workers = {r.workers}",
        f"run.out = {r.out}",
        f"run.levels = {r.levels}",
    ]
    return "\n".join(lines) + "\n"


def with_overrides(config, seed=None, paths=None, workers=None, out=None):
    run = config.run
    if seed is not None:
        run = replace(run, seed=seed)
    if paths is not None:
        run = replace(run, paths=paths)
    if workers is not None:
        run = replace(run, workers=workers)
    if out is not None:
        run = replace(run, out=out)
    return replace(config, run=run)
