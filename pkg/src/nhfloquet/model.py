"""Physical system: Gaussian model potential, CW laser field and gauge tag."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np


class Gauge(str, enum.Enum):
    LENGTH = "length"
    ACCELERATION = "acceleration"


@dataclass(frozen=True)
class PotentialModel:
    """Gaussian well ``V(x) = v0 * exp(-a * x**2)``.

    The defaults are the one-electron xenon model (three bound states,
    E1 ~ -0.44, E2 ~ -0.14, E3 ~ -1.4e-4 a.u.).
    """

    v0: float = -0.63
    a: float = 0.1424

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError(f"Gaussian width parameter must be positive, got a={self.a}")

    def value(self, x):
        x = np.asarray(x)
        return self.v0 * np.exp(-self.a * x * x)

    def force(self, x):
        """Return ``-dV/dx`` (entire; complex arguments allowed)."""
        x = np.asarray(x)
        return 2.0 * self.a * self.v0 * x * np.exp(-self.a * x * x)

    def integral(self) -> float:
        """Integral of V over the real line."""
        return self.v0 * math.sqrt(math.pi / self.a)


@dataclass(frozen=True)
class LaserField:
    omega_ir: float = 0.0574
    epsilon0: float = 0.015
    alpha0: float = field(init=False)

    def __post_init__(self):
        if not self.omega_ir > 0:
            raise ValueError(f"laser frequency must be positive, got omega_ir={self.omega_ir}")
        if self.epsilon0 < 0:
            raise ValueError(f"field amplitude must be non-negative, got epsilon0={self.epsilon0}")
        object.__setattr__(self, "alpha0", self.epsilon0 / self.omega_ir**2)

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.omega_ir

    @property
    def ponderomotive_energy(self) -> float:
        return self.epsilon0**2 / (4.0 * self.omega_ir**2)


def evaluate_potential(model: PotentialModel, x):
    return model.value(x)


def evaluate_force(model: PotentialModel, x):
    return model.force(x)


def quiver_amplitude(laser: LaserField) -> float:
    """Classical free-electron quiver amplitude ``epsilon0 / omega**2`` (m_e = 1)."""
    return laser.alpha0

