"""Pulse-shaped multiplier applied to the amplitude parameter of stimulated neurons."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError

_LOG_TENTH = math.log(0.1)


@dataclass(frozen=True)
class StimulationEnvelope:
    """Log-shaped rise, flat plateau at ``R_P`` and log-shaped fall.

    Parameters
    ----------
    R_P : float
        Gain ratio on the plateau, > 1.
    T_P : float
        Total pulse duration in seconds.
    eta_R, eta_F : float
        Fractions of ``T_P`` spent rising and falling.
    t0 : float
        Start time of the pulse.
    """

    R_P: float
    T_P: float
    eta_R: float
    eta_F: float
    t0: float = 0.0

    def __post_init__(self):
        if not self.R_P > 1:
            raise ConfigError("R_P must exceed 1")
        if not self.T_P > 0:
            raise ConfigError("T_P must be positive")
        if not (0 < self.eta_R < 1 and 0 < self.eta_F < 1):
            raise ConfigError("duty cycles must lie in (0, 1)")
        if self.eta_R + self.eta_F > 1 + 1e-12:
            raise ConfigError("eta_R + eta_F must not exceed 1")

    @property
    def T_R(self) -> float:
        return self.eta_R * self.T_P

    @property
    def T_F(self) -> float:
        return self.eta_F * self.T_P

    @property
    def params(self) -> tuple:
        return (self.R_P, self.T_P, self.eta_R, self.eta_F)

    def at(self, t0: float) -> "StimulationEnvelope":
        return replace(self, t0=float(t0))

    def as_array(self) -> np.ndarray:
        return np.array([self.R_P, self.T_P, self.eta_R, self.eta_F, self.t0], dtype=float)


def envelope_multiplier(env: StimulationEnvelope, t: float) -> float:
    """Multiplier (>= 1) of the envelope at time ``t``.

    Mirrors the arithmetic used inside the integration kernels.
    """
    return envelope_value(env.R_P, env.T_P, env.eta_R, env.eta_F, env.t0, t)


def envelope_value(RP, TP, eta_R, eta_F, t0, t) -> float:
    if TP <= 0.0 or t < t0 or t > t0 + TP:
        return 1.0
    TR = eta_R * TP
    TF = eta_F * TP
    if t < t0 + TR:
        return 1.0 + (RP - 1.0) * math.log10(1.0 + 9.0 * (t - t0) / TR)
    if t <= t0 + TP - TF:
        return RP
    v = (t - (t0 + TP - TF)) / TF
    return 1.0 + (RP - 1.0) * (math.log(0.1 + 0.9 * v) / _LOG_TENTH)
