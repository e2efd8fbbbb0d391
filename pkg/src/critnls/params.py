"""Problem parameters and the trapping potential family."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class Params:
    """Dimension N, decay exponent b and coupling a.

    The nonlinearity exponent is tied to (N, b) by beta^2 = (2 - b) / N, so
    beta is derived and never stored.
    """

    N: int
    b: float
    a: float = 0.0

    def __post_init__(self):
        if isinstance(self.N, bool) or int(self.N) != self.N or self.N < 1:
            raise ConfigError("N", f"must be an integer >= 1, got {self.N!r}")
        object.__setattr__(self, "N", int(self.N))
        if not (0.0 < self.b < min(2.0, self.N)):
            raise ConfigError("b", f"must satisfy 0 < b < min(2, N) = {min(2, self.N)}, got {self.b!r}")
        object.__setattr__(self, "b", float(self.b))
        if not (self.a >= 0.0 and math.isfinite(self.a)):
            raise ConfigError("a", f"coupling must be a finite number >= 0, got {self.a!r}")
        object.__setattr__(self, "a", float(self.a))

    @property
    def beta2(self) -> float:
        return (2.0 - self.b) / self.N

    @property
    def beta(self) -> float:
        return math.sqrt(self.beta2)

    @property
    def p(self) -> float:
        """Power in the limit equation, 1 + 2 beta^2."""
        return 1.0 + 2.0 * self.beta2

    def with_a(self, a: float) -> "Params":
        return replace(self, a=a)

    def to_dict(self) -> dict:
        return {"N": self.N, "b": self.b, "a": self.a}


@dataclass(frozen=True)
class PotentialSpec:
    """Radial homogeneous trap V(r) = kappa * r**l."""

    l: float = 2.0
    kappa: float = 1.0

    def __post_init__(self):
        if not (self.l > 0.0 and math.isfinite(self.l)):
            raise ConfigError("l", f"degree must be positive, got {self.l!r}")
        if not (self.kappa >= 0.0 and math.isfinite(self.kappa)):
            raise ConfigError("kappa", f"coefficient must be >= 0, got {self.kappa!r}")
        object.__setattr__(self, "l", float(self.l))
        object.__setattr__(self, "kappa", float(self.kappa))

    def __call__(self, r):
        return self.kappa * np.asarray(r, dtype=float) ** self.l

    def radial_derivative(self, r):
        """r * V'(r), which equals l * V(r) by homogeneity."""
        return self.l * self(r)

    @property
    def trapping(self) -> bool:
        return self.kappa > 0.0

    def to_dict(self) -> dict:
        return {"l": self.l, "kappa": self.kappa}
