"""Flat ``key = value`` experiment configuration.

One setting per line, ``#`` starts a comment, lists are comma separated and
integer ranges may be written ``a-b``. Unknown keys are rejected so typos
cannot silently fall back to defaults.
"""
import math
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from .grid import DEFAULT_CHARGE_TIME, DEFAULT_DQ

ENV_OUTPUT_DIR = "STSPBO_OUTPUT_DIR"

POLICIES = ("ts", "sts")
MODES = ("sequential", "synchronous", "asynchronous")
VARIANT_NAMES = {
    ("ts", "sequential"): "TS-BO",
    ("ts", "synchronous"): "TS-PBO-syn",
    ("ts", "asynchronous"): "TS-PBO-asy",
    ("sts", "sequential"): "STS-BO",
    ("sts", "synchronous"): "STS-PBO-syn",
    ("sts", "asynchronous"): "STS-PBO-asy",
}


class ConfigError(ValueError):
    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


def _default_output():
    return os.environ.get(ENV_OUTPUT_DIR, "runs")


@dataclass
class ExperimentConfig:
    objective: str = "synth"
    synth: dict = field(default_factory=dict)
    grid_i1: str = "2.2:6.0:0.2"
    grid_i2: str = "2.2:6.0:0.2"
    t_f: float = DEFAULT_CHARGE_TIME
    dq: tuple = DEFAULT_DQ
    i3_max: float = math.inf
    kernel: str = "se"
    lengthscales: object = "auto"
    signal_variance: object = "auto"
    noise_variance: object = "auto"
    noise_ratio: float = 0.05
    policies: tuple = POLICIES
    modes: tuple = MODES
    m_workers: int = 4
    betas: tuple = (0.01, 0.05, 0.1, 1.0)
    z_count: int = 64
    ba_k_max: int = 100
    ba_tol: float = 1e-6
    budget_rounds: float = 10000.0
    time_scale: object = "auto"
    time_target_rounds: float = 100.0
    duration_source: str = "observed"
    seeds: tuple = tuple(range(20))
    curve_points: int = 200
    output_dir: str = field(default_factory=_default_output)

    def validate(self):
        if self.objective != "synth" and not os.path.exists(self.objective):
            raise ConfigError("objective", f"file {self.objective!r} not found")
        if self.kernel not in ("se", "matern52"):
            raise ConfigError("kernel", "must be 'se' or 'matern52'")
        for key in ("noise_ratio",):
            if not getattr(self, key) >= 0:
                raise ConfigError(key, "must be >= 0")
        if not self.policies or any(p not in POLICIES for p in self.policies):
            raise ConfigError("policies", f"choose from {POLICIES}")
        if not self.modes or any(m not in MODES for m in self.modes):
            raise ConfigError("modes", f"choose from {MODES}")
        if self.m_workers < 1:
            raise ConfigError("m_workers", "must be >= 1")
        if "sts" in self.policies and not self.betas:
            raise ConfigError("beta", "at least one value is required")
        if any(not (b >= 0 and math.isfinite(b)) for b in self.betas):
            raise ConfigError("beta", "must be finite and >= 0")
        if self.z_count < 1:
            raise ConfigError("z_count", "must be >= 1")
        if self.ba_k_max < 1:
            raise ConfigError("ba_k_max", "must be >= 1")
        if not self.ba_tol > 0:
            raise ConfigError("ba_tol", "must be > 0")
        if not self.budget_rounds > 0:
            raise ConfigError("budget_rounds", "must be > 0")
        if not self.seeds:
            raise ConfigError("seeds", "at least one seed is required")
        if any(s < 0 for s in self.seeds):
            raise ConfigError("seeds", "must be non-negative")
        if self.curve_points < 2:
            raise ConfigError("curve_points", "must be >= 2")
        if self.duration_source not in ("observed", "true"):
            raise ConfigError("duration_source", "must be 'observed' or 'true'")
        for key in ("lengthscales", "signal_variance", "noise_variance", "time_scale"):
            val = getattr(self, key)
            if val == "auto":
                continue
            vals = np.atleast_1d(val)
            bad = vals < 0 if key == "noise_variance" else vals <= 0
            if np.any(bad):
                raise ConfigError(key, "must be positive" if key != "noise_variance" else "must be >= 0")
        return self

    def to_text(self):
        lines = []
        for key, val in asdict(self).items():
            if key == "synth":
                lines.extend(f"synth.{k} = {v!r}" for k, v in sorted(val.items()))
                continue
            if isinstance(val, (tuple, list)):
                val = ", ".join(repr(v) if not isinstance(v, str) else v for v in val)
            elif isinstance(val, float):
                val = repr(val)
            lines.append(f"{key} = {val}")
        return "\n".join(lines) + "\n"


def _floats(key, text):
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise ConfigError(key, f"expected numbers, got {text!r}") from None


def _ints(key, text):
    out = []
    for tok in (t.strip() for t in text.split(",")):
        if not tok:
            continue
        try:
            if "-" in tok[1:]:
                a, b = tok.split("-", 1)
                out.extend(range(int(a), int(b) + 1))
            else:
                out.append(int(tok))
        except ValueError:
            raise ConfigError(key, f"expected integers or ranges, got {tok!r}") from None
    return tuple(out)


def _auto_or(key, text, many=False):
    if text.strip() == "auto":
        return "auto"
    vals = _floats(key, text)
    if many and vals:
        return vals
    if len(vals) != 1:
        raise ConfigError(key, f"invalid value {text!r}")
    return vals[0]


def _scalar(key, text, kind):
    try:
        return kind(text)
    except ValueError:
        raise ConfigError(key, f"invalid value {text!r}") from None


_PARSERS = {
    "objective": lambda k, v: v,
    "grid_i1": lambda k, v: v,
    "grid_i2": lambda k, v: v,
    "t_f": lambda k, v: _scalar(k, v, float),
    "dq": _floats,
    "i3_max": lambda k, v: _scalar(k, v, float),
    "kernel": lambda k, v: v,
    "lengthscales": lambda k, v: _auto_or(k, v, many=True),
    "signal_variance": _auto_or,
    "noise_variance": _auto_or,
    "noise_ratio": lambda k, v: _scalar(k, v, float),
    "policies": lambda k, v: tuple(t.strip().lower() for t in v.split(",") if t.strip()),
    "modes": lambda k, v: tuple(t.strip().lower() for t in v.split(",") if t.strip()),
    "m_workers": lambda k, v: _scalar(k, v, int),
    "betas": _floats,
    "z_count": lambda k, v: _scalar(k, v, int),
    "ba_k_max": lambda k, v: _scalar(k, v, int),
    "ba_tol": lambda k, v: _scalar(k, v, float),
    "budget_rounds": lambda k, v: _scalar(k, v, float),
    "time_scale": _auto_or,
    "time_target_rounds": lambda k, v: _scalar(k, v, float),
    "duration_source": lambda k, v: v,
    "seeds": _ints,
    "curve_points": lambda k, v: _scalar(k, v, int),
    "output_dir": lambda k, v: v,
}
_ALIASES = {"beta": "betas", "policy": "policies", "mode": "modes", "seed": "seeds",
            "budget": "budget_rounds"}


def apply_setting(cfg, key, value):
    key = key.strip()
    value = value.strip()
    if key.startswith("synth."):
        cfg.synth[key[len("synth."):]] = _scalar(key, value, float)
        return
    key = _ALIASES.get(key, key)
    if key not in _PARSERS:
        raise ConfigError(key, "unknown setting")
    setattr(cfg, key, _PARSERS[key](key, value))


def parse_lines(lines, overrides=()):
    cfg = ExperimentConfig()
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", "expected 'key = value'")
        key, value = line.split("=", 1)
        apply_setting(cfg, key, value)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(item, "override must be key=value")
        key, value = item.split("=", 1)
        apply_setting(cfg, key, value)
    return cfg.validate()


def load_config(path, overrides=()):
    with open(path) as fh:
        return parse_lines(fh.read().splitlines(), overrides)


def parse_axis(key, text):
    """``start:stop:step`` (inclusive) or an explicit comma list."""
    try:
        if ":" in text:
            start, stop, step = (float(v) for v in text.split(":"))
            if step <= 0:
                raise ValueError
            n = int(math.floor((stop - start) / step + 1e-9)) + 1
            return [round(start + k * step, 10) for k in range(n)]
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(key, f"invalid axis {text!r}") from None
