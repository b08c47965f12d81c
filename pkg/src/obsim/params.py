"""Physical parameters of the driven, damped atoms-plus-cavity model.

All rates are in units of the atomic half-width ``gamma`` (conventionally 1).
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

from .errors import InvalidArgumentError


@dataclass(frozen=True)
class SystemParams:
    """One model instance.

    ``inversion_decay`` is the relaxation rate of the atomic inversion in the
    mean-field and linearized equations. ``None`` means ``2 * gamma``, which is
    what the Lindblad dissipator with amplitude decay rate ``gamma`` implies.
    Setting it to ``gamma`` reproduces the literal single-rate form of the
    Maxwell-Bloch equations.
    """

    n_atoms: int
    g: float
    kappa: float
    gamma: float = 1.0
    delta_m: float = 0.0
    delta_a: float = 0.0
    eta: float = 0.0
    inversion_decay: float | None = None

    def __post_init__(self):
        if int(self.n_atoms) != self.n_atoms or self.n_atoms < 1:
            raise InvalidArgumentError(f"n_atoms must be a positive integer, got {self.n_atoms!r}")
        if not self.kappa > 0:
            raise InvalidArgumentError(f"kappa must be > 0, got {self.kappa!r}")
        if not self.gamma > 0:
            raise InvalidArgumentError(f"gamma must be > 0, got {self.gamma!r}")
        if not self.g >= 0:
            raise InvalidArgumentError(f"g must be >= 0, got {self.g!r}")
        if not self.eta >= 0:
            raise InvalidArgumentError(f"eta must be >= 0, got {self.eta!r}")
        if self.inversion_decay is not None and not self.inversion_decay > 0:
            raise InvalidArgumentError("inversion_decay must be > 0 when given")
        for name in ("g", "kappa", "gamma", "delta_m", "delta_a", "eta"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidArgumentError(f"{name} must be finite")
        object.__setattr__(self, "n_atoms", int(self.n_atoms))

    def cooperativity(self) -> float:
        return self.n_atoms * self.g**2 / (2.0 * self.kappa * self.gamma)

    @property
    def gamma_parallel(self) -> float:
        if self.inversion_decay is None:
            return 2.0 * self.gamma
        return self.inversion_decay

    @property
    def collective_g(self) -> float:
        """sqrt(N) * g."""
        return math.sqrt(self.n_atoms) * self.g

    @property
    def scaled_eta(self) -> float:
        """eta / sqrt(N)."""
        return self.eta / math.sqrt(self.n_atoms)

    def with_(self, **changes) -> "SystemParams":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_cooperativity(cls, n_atoms: int, cooperativity: float, kappa: float,
                           gamma: float = 1.0, **kw) -> "SystemParams":
        g = math.sqrt(2.0 * kappa * gamma * cooperativity / n_atoms)
        return cls(n_atoms=n_atoms, g=g, kappa=kappa, gamma=gamma, **kw)
