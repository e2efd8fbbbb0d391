"""Content-addressed JSON cache for limit profiles and minimizers.

Keys are SHA-256 digests of the canonical JSON of every producer input plus
the package version.  Entries live in ``$CRITNLS_CACHE_DIR`` (default
``~/.cache/critnls``).  Unreadable entries are recomputed and overwritten;
an unwritable directory disables caching with a warning.
"""

from __future__ import annotations

import hashlib
import json
import os
import warnings
from pathlib import Path
from typing import Callable, Optional

from . import __version__
from .io import atomic_write_text

CACHE_ENV = "CRITNLS_CACHE_DIR"


def default_cache_dir() -> Path:
    env = os.environ.get(CACHE_ENV)
    if env:
        return Path(env)
    return Path.home() / ".cache" / "critnls"


def cache_key(kind: str, inputs: dict) -> str:
    payload = json.dumps({"kind": kind, "inputs": inputs, "version": __version__},
                         sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class Cache:
    def __init__(self, directory=None, enabled: bool = True):
        self.enabled = enabled
        self.directory = Path(directory) if directory is not None else default_cache_dir()
        self.hits: dict = {}
        if enabled:
            try:
                self.directory.mkdir(parents=True, exist_ok=True)
                probe = self.directory / ".write-probe"
                probe.write_text("")
                probe.unlink()
            except OSError as exc:
                warnings.warn(f"cache directory {self.directory} is not writable ({exc}); "
                              "continuing without cache", RuntimeWarning, stacklevel=2)
                self.enabled = False

    def path(self, key: str) -> Path:
        return self.directory / f"{key}.json"

    def load(self, key: str) -> Optional[dict]:
        if not self.enabled:
            return None
        try:
            text = self.path(key).read_text(encoding="utf-8")
        except OSError:
            return None
        try:
            return json.loads(text)
        except ValueError:
            return None

    def store(self, key: str, payload: dict) -> None:
        if not self.enabled:
            return
        try:
            atomic_write_text(self.path(key), json.dumps(payload))
        except OSError as exc:
            warnings.warn(f"could not write cache entry {key[:12]}: {exc}", RuntimeWarning,
                          stacklevel=2)

    def get_or_compute(self, key: str, producer: Callable[[], object],
                       encode: Callable[[object], dict], decode: Callable[[dict], object]):
        """Value for ``key``; records hit/miss in ``self.hits``."""
        raw = self.load(key)
        if raw is not None:
            try:
                value = decode(raw)
            except (KeyError, TypeError, ValueError):
                value = None
            if value is not None:
                self.hits[key] = True
                return value
        value = producer()
        self.hits[key] = False
        self.store(key, encode(value))
        return value


def cached_q(params, grid, cache: Optional[Cache] = None, **solve_kw):
    """solve_q through the cache; returns (QSolution, key)."""
    from .limit_profile import QSolution, solve_q

    inputs = {"N": params.N, "b": params.b, "grid": grid.descriptor(),
              "solve": {k: solve_kw[k] for k in sorted(solve_kw)}}
    key = cache_key("q", inputs)
    if cache is None:
        return solve_q(params, grid, **solve_kw), key
    q = cache.get_or_compute(key, lambda: solve_q(params, grid, **solve_kw),
                             QSolution.to_dict, QSolution.from_dict)
    return q, key
