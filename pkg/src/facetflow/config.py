"""Run configuration: ``[section] key = value`` text checked against a typed schema.

Parsing never stops at the first problem. Every unknown key, type error,
missing requirement and parameter-range violation is collected and raised
together in one :class:`ConfigError`.
"""

from dataclasses import dataclass, field
from pathlib import Path
from types import SimpleNamespace
from typing import Dict, List, Optional
import configparser

from .grid import Grid
from .io import PRESETS, load_field, preset_field
from .model import ModelParams, validate_params
from .scheme import PicardOptions, SolverOptions, TauSchedule
from .usolver import UsolveOptions
from .vsolver import VsolveOptions

MODES = ("stationary", "continuation", "evolve", "verify")
REQUIRED = object()


class ConfigError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


def _bool(text):
    low = text.strip().lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _int(text):
    return int(text.strip())


def _float(text):
    return float(text.strip())


def _str(text):
    return text.strip().strip('"').strip("'")


_PRESET_KEYS = sorted(set().union(*(keys for _, keys in PRESETS.values())))
_DATA_SCHEMA = {"constant": (_float, None), "expression": (_str, None), "file": (_str, None),
                **{k: (_float, None) for k in _PRESET_KEYS}}

SCHEMA = {
    "run": {"mode": (_str, None), "out": (_str, None), "seed": (_int, 42)},
    "grid": {"nx": (_int, REQUIRED), "ny": (_int, REQUIRED), "lx": (_float, 1.0), "ly": (_float, 1.0)},
    "model": {"p": (_float, REQUIRED), "beta": (_float, REQUIRED), "q": (_float, 0.0),
              "a": (_float, 1.0), "tau": (_float, 1.0), "relaxed": (_bool, False)},
    "schedule": {"tau0": (_float, 1.0), "ratio": (_float, 0.5), "tau_min": (_float, 1e-6)},
    "picard": {"damping": (_float, 0.7), "tol_fp": (_float, 1e-8), "max_picard": (_int, 200)},
    "usolve": {"tol_residual": (_float, 1e-10), "max_newton": (_int, 100)},
    "vsolve": {"tol": (_float, 1e-11), "max_cg": (_int, None), "preconditioner": (_str, "diagonal")},
    "evolve": {"delta": (_float, REQUIRED), "nsteps": (_int, REQUIRED)},
    "verify": {"samples": (_int, 100_000), "c": (_float, 1.0), "b": (_float, 2.0),
               "alpha": (_float, 1.0), "y0": (_float, 0.5)},
    "f": _DATA_SCHEMA,
    "u0": _DATA_SCHEMA,
}

# sections a mode cannot run without
MODE_SECTIONS = {
    "stationary": ("grid", "model", "f"),
    "continuation": ("grid", "model", "f"),
    "evolve": ("grid", "model", "u0", "evolve"),
    "verify": (),
}


@dataclass
class DataSpec:
    """Where a field comes from: a constant, a named preset, or a CSV file."""

    kind: str
    value: object
    options: Dict[str, float] = field(default_factory=dict)

    def materialize(self, grid):
        if self.kind == "constant":
            return grid.full(self.value)
        if self.kind == "expression":
            return preset_field(self.value, grid, **self.options)
        return load_field(self.value, grid)

    def describe(self):
        return {"kind": self.kind, "value": self.value, **self.options}


@dataclass
class RunConfig:
    mode: str
    grid: Optional[Grid]
    params: Optional[ModelParams]
    schedule: TauSchedule
    solver: SolverOptions
    f: Optional[DataSpec] = None
    u0: Optional[DataSpec] = None
    delta: Optional[float] = None
    nsteps: Optional[int] = None
    verify: Dict[str, float] = field(default_factory=dict)
    out: Optional[str] = None
    seed: int = 42
    echo: Dict[str, Dict[str, object]] = field(default_factory=dict)


def _read_sections(text, errors):
    parser = configparser.ConfigParser(interpolation=None, strict=True,
                                       inline_comment_prefixes=("#", ";"),
                                       default_section="__unused_default__")
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        errors.append(f"syntax: {exc.message if hasattr(exc, 'message') else exc}".splitlines()[0])
        return {}
    return {name: dict(parser[name]) for name in parser.sections()}


def _coerce(raw, errors):
    """Type every known key; unknown sections and keys become errors."""
    typed = {}
    for section, items in raw.items():
        schema = SCHEMA.get(section)
        if schema is None:
            errors.append(f"unknown section [{section}]")
            continue
        typed[section] = {}
        for key, text in items.items():
            if key not in schema:
                errors.append(f"[{section}] unknown key {key!r}")
                continue
            conv = schema[key][0]
            try:
                typed[section][key] = conv(text)
            except ValueError:
                errors.append(f"[{section}] {key} = {text!r} is not a valid {conv.__name__.strip('_')}")
    return typed


def _section(typed, name, errors, mode, required):
    """Fill defaults for one section; report missing required keys naming the mode."""
    schema = SCHEMA[name]
    given = typed.get(name, {})
    out = {}
    for key, (_, default) in schema.items():
        if key in given:
            out[key] = given[key]
        elif default is REQUIRED:
            if required:
                errors.append(f"[{name}] {key} is required for mode {mode!r}")
        else:
            out[key] = default
    return out


def _data_spec(name, values, base_dir, errors):
    kinds = [k for k in ("constant", "expression", "file") if k in values]
    options = {k: v for k, v in values.items() if k in _PRESET_KEYS}
    if len(kinds) != 1:
        errors.append(f"[{name}] needs exactly one of constant, expression, file (got {kinds or 'none'})")
        return None
    kind = kinds[0]
    if kind != "expression" and options:
        errors.append(f"[{name}] keys {sorted(options)} only apply to expression presets")
        return None
    value = values[kind]
    if kind == "expression":
        if value not in PRESETS:
            errors.append(f"[{name}] unknown preset {value!r}; choose from {sorted(PRESETS)}")
            return None
        try:
            # evaluate once on a tiny grid so option errors surface at parse time
            preset_field(value, Grid(4, 4), **options)
        except ValueError as exc:
            errors.append(f"[{name}] {exc}")
            return None
    if kind == "file":
        path = Path(value)
        if not path.is_absolute() and base_dir is not None:
            path = Path(base_dir) / path
        if not path.is_file():
            errors.append(f"[{name}] file {str(path)!r} does not exist")
            return None
        value = str(path)
    return DataSpec(kind, value, options)


def _build(factory, kwargs, label, errors):
    try:
        return factory(**kwargs)
    except ValueError as exc:
        errors.append(f"[{label}] {exc}")
        return None


def parse_config(text, mode=None, base_dir=None):
    """Parse and validate a run configuration.

    ``mode`` (from the command line) takes part in the check against any
    ``[run] mode`` entry in the text. Relative file paths resolve against
    ``base_dir``. Raises :class:`ConfigError` listing every violation.
    """
    errors: List[str] = []
    typed = _coerce(_read_sections(text, errors), errors)
    run = _section(typed, "run", errors, mode, True)
    if mode is None:
        mode = run["mode"]
    elif run["mode"] is not None and run["mode"] != mode:
        errors.append(f"[run] mode {run['mode']!r} conflicts with requested mode {mode!r}")
    if mode not in MODES:
        errors.append(f"mode must be one of {', '.join(MODES)} (got {mode!r})")
        raise ConfigError(errors)
    needed = MODE_SECTIONS[mode]
    for name in needed:
        if name not in typed and name in ("f", "u0"):
            errors.append(f"section [{name}] is required for mode {mode!r}")

    sec = {name: _section(typed, name, errors, mode, name in needed)
           for name in SCHEMA if name not in ("run", "f", "u0")}

    grid = None
    if "grid" in needed or "grid" in typed:
        g = sec["grid"]
        if "nx" in g and "ny" in g:
            grid = _build(Grid, g, "grid", errors)

    params = None
    if "model" in needed or "model" in typed:
        m = sec["model"]
        if "p" in m and "beta" in m:
            violations = validate_params(SimpleNamespace(delta=None, **m))
            errors.extend(f"[model] {v}" for v in violations)
            if not violations:
                params = ModelParams(**m)

    schedule = _build(TauSchedule, sec["schedule"], "schedule", errors)
    picard = _build(PicardOptions, sec["picard"], "picard", errors)
    usolve = _build(UsolveOptions, sec["usolve"], "usolve", errors)
    vsolve = _build(VsolveOptions, sec["vsolve"], "vsolve", errors)

    delta = nsteps = None
    if mode == "evolve":
        ev = sec["evolve"]
        delta, nsteps = ev.get("delta"), ev.get("nsteps")
        if delta is not None and not delta > 0:
            errors.append(f"[evolve] delta must be > 0 (got {delta})")
        if nsteps is not None and nsteps < 1:
            errors.append(f"[evolve] nsteps must be >= 1 (got {nsteps})")

    verify = sec["verify"]
    if mode == "verify":
        if verify["samples"] < 1:
            errors.append(f"[verify] samples must be >= 1 (got {verify['samples']})")
        if not (verify["c"] > 0 and verify["b"] > 1 and verify["alpha"] > 0 and verify["y0"] >= 0):
            errors.append("[verify] recursion constants need c > 0, b > 1, alpha > 0, y0 >= 0")

    data = {name: _data_spec(name, typed[name], base_dir, errors)
            for name in ("f", "u0") if name in typed}

    if errors:
        raise ConfigError(errors)
    echo = {name: dict(values) for name, values in typed.items()}
    return RunConfig(
        mode=mode, grid=grid, params=params, schedule=schedule,
        solver=SolverOptions(picard=picard, usolve=usolve, vsolve=vsolve),
        f=data.get("f"), u0=data.get("u0"), delta=delta, nsteps=nsteps,
        verify=verify, out=run["out"], seed=run["seed"], echo=echo,
    )


def load_config(path, mode=None):
    """Read ``path`` and parse it, resolving data files next to the config."""
    path = Path(path)
    return parse_config(path.read_text(), mode=mode, base_dir=path.parent)
