"""Run configuration: JSON files merged with command-line flags.

Couplings are absolute numbers or fractions of a* written with an ``ast``
suffix (``"0.95ast"``); fractions are resolved once Q is known.

Schema (all keys optional except N and b)::

    {"N": 1, "b": 0.5, "a": "0.95ast", "l": 2, "kappa": 1,
     "R": 25, "M": 4096, "clustering": 2,
     "schedule": ["0.9ast", "0.95ast", "0.98ast", "0.99ast", "0.995ast"],
     "tol": 1e-7, "max_iter": 20000, "seed": 0, "out": "runs/"}
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Union

from .errors import ConfigError, UsageError
from .params import Params, PotentialSpec

DEFAULT_SCHEDULE = ("0.9ast", "0.95ast", "0.98ast", "0.99ast", "0.995ast")
REQUIRED = ("N", "b")


@dataclass(frozen=True)
class Coupling:
    value: float
    relative: bool = False

    def resolve(self, a_star: Optional[float] = None) -> float:
        if not self.relative:
            return self.value
        if a_star is None:
            raise UsageError("relative coupling needs a*")
        return self.value * a_star

    def __str__(self) -> str:
        return f"{self.value!r}ast" if self.relative else repr(self.value)


def parse_coupling(raw: Union[str, float, int], name: str = "a") -> Coupling:
    if isinstance(raw, bool):
        raise ConfigError(name, f"not a coupling: {raw!r}")
    if isinstance(raw, (int, float)):
        val, rel = float(raw), False
    elif isinstance(raw, str):
        text = raw.strip()
        rel = text.endswith("ast")
        if rel:
            text = text[:-3]
        try:
            val = float(text)
        except ValueError:
            raise ConfigError(name, f"expected a number or '<fraction>ast', got {raw!r}") from None
    else:
        raise ConfigError(name, f"expected a number or '<fraction>ast', got {raw!r}")
    if not (math.isfinite(val) and val >= 0):
        raise ConfigError(name, f"coupling must be finite and >= 0, got {raw!r}")
    return Coupling(val, rel)


@dataclass
class RunConfig:
    N: int
    b: float
    a: Optional[Coupling] = None
    l: float = 2.0
    kappa: float = 1.0
    R: float = 25.0
    M: int = 4096
    clustering: float = 2.0
    schedule: list = field(default_factory=lambda: [parse_coupling(x) for x in DEFAULT_SCHEDULE])
    tol: float = 1e-7
    max_iter: int = 20000
    seed: int = 0
    out: Optional[str] = None

    def params(self, a_star: Optional[float] = None) -> Params:
        a = self.a.resolve(a_star) if self.a is not None else 0.0
        return Params(self.N, self.b, a)

    def potential(self) -> PotentialSpec:
        return PotentialSpec(self.l, self.kappa)

    def couplings(self, a_star: Optional[float] = None) -> list:
        return [c.resolve(a_star) for c in self.schedule]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["a"] = str(self.a) if self.a is not None else None
        d["schedule"] = [str(c) for c in self.schedule]
        return d


_TYPES = {"N": int, "b": float, "l": float, "kappa": float, "R": float, "M": int,
          "clustering": float, "tol": float, "max_iter": int, "seed": int, "out": str}
KNOWN = set(_TYPES) | {"a", "schedule"}


def load_config(path) -> dict:
    """Parse a JSON config file into a plain dict (unresolved)."""
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config {p}: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{p}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise UsageError(f"{p}: top level must be a JSON object")
    unknown = sorted(set(data) - KNOWN)
    if unknown:
        raise UsageError(f"{p}: unknown field(s) {', '.join(unknown)}")
    return data


def _coerce(name, raw):
    kind = _TYPES[name]
    if kind is int:
        if isinstance(raw, bool) or not (isinstance(raw, int) or (isinstance(raw, float) and raw.is_integer())):
            raise ConfigError(name, f"expected an integer, got {raw!r}")
        return int(raw)
    if kind is float:
        if isinstance(raw, bool):
            raise ConfigError(name, f"expected a number, got {raw!r}")
        try:
            return float(raw)
        except (TypeError, ValueError):
            raise ConfigError(name, f"expected a number, got {raw!r}") from None
    return str(raw)


def resolve_config(file_cfg: Optional[dict] = None, overrides: Optional[dict] = None) -> RunConfig:
    """Merge a loaded file with flag values; flags that are not None win."""
    merged = dict(file_cfg or {})
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
    for name in REQUIRED:
        if name not in merged:
            raise ConfigError(name, "required but not given (config file or --" + name + ")")
    kw = {k: _coerce(k, merged[k]) for k in _TYPES if k in merged}
    if merged.get("a") is not None:
        kw["a"] = parse_coupling(merged["a"], "a")
    if "schedule" in merged:
        sched = merged["schedule"]
        if isinstance(sched, str):
            sched = [x for x in sched.split(",") if x.strip()]
        if not isinstance(sched, (list, tuple)) or not sched:
            raise ConfigError("schedule", "expected a non-empty list of couplings")
        kw["schedule"] = [parse_coupling(x, "schedule") for x in sched]
    cfg = RunConfig(**kw)
    # surface domain errors early, naming the field
    Params(cfg.N, cfg.b)
    PotentialSpec(cfg.l, cfg.kappa)
    if cfg.M < 16:
        raise ConfigError("M", f"need at least 16 nodes, got {cfg.M}")
    if not cfg.R > 0:
        raise ConfigError("R", f"must be positive, got {cfg.R}")
    return cfg
